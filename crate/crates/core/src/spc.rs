//! Process-capability and variability statistics of an output sample.

use serde::Serialize;

use crate::error::{Error, Result};

/// Fractional half-width of the default specification band around the mean.
pub const DEFAULT_BAND_FRACTION: f64 = 0.02;

/// Output per period, in consistent units.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSample {
    values: Vec<f64>,
}

impl OutputSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidArgument("a sample needs at least two values".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample value {i} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Sample standard deviation (n − 1 denominator).
    pub fn std_dev(&self) -> f64 {
        let mean = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (self.values.len() - 1) as f64).sqrt()
    }

    fn nonzero_std_dev(&self) -> Result<f64> {
        let s = self.std_dev();
        if s > 0.0 {
            Ok(s)
        } else {
            Err(Error::ZeroDeviation)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpecLimits {
    pub usl: f64,
    pub lsl: f64,
}

impl SpecLimits {
    pub fn new(usl: f64, lsl: f64) -> Result<Self> {
        if !(usl.is_finite() && lsl.is_finite() && usl > lsl) {
            return Err(Error::InvalidArgument(format!(
                "specification limits need usl > lsl, got usl={usl} lsl={lsl}"
            )));
        }
        Ok(Self { usl, lsl })
    }

    /// `mean ± 2%·|mean|`.
    pub fn around_mean(mean: f64) -> Result<Self> {
        let half = DEFAULT_BAND_FRACTION * mean.abs();
        if !(half > 0.0) {
            return Err(Error::InvalidArgument(
                "default limits are degenerate for a zero mean".into(),
            ));
        }
        Self::new(mean + half, mean - half)
    }
}

/// `min(usl − mean, mean − lsl) / 3s`.
pub fn process_capability_index(sample: &OutputSample, limits: &SpecLimits) -> Result<f64> {
    let s = sample.nonzero_std_dev()?;
    let mean = sample.mean();
    Ok(((limits.usl - mean) / (3.0 * s)).min((mean - limits.lsl) / (3.0 * s)))
}

/// `(usl − lsl) / 6s`; limits default to the mean ± 2%.
pub fn process_performance(sample: &OutputSample, limits: Option<&SpecLimits>) -> Result<f64> {
    let s = sample.nonzero_std_dev()?;
    let limits = match limits {
        Some(l) => *l,
        None => SpecLimits::around_mean(sample.mean())?,
    };
    Ok((limits.usl - limits.lsl) / (6.0 * s))
}

pub fn coefficient_of_variation(sigma_d: f64, rate_d: f64) -> Result<f64> {
    if rate_d == 0.0 {
        return Err(Error::ZeroRate);
    }
    Ok(sigma_d / rate_d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VariabilityClass {
    Low,
    Moderate,
    High,
}

impl VariabilityClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            VariabilityClass::Low => "low",
            VariabilityClass::Moderate => "moderate",
            VariabilityClass::High => "high",
        }
    }
}

/// Low below 0.75, high above 1.33, moderate in between (boundaries included).
pub fn classify_variability(cv: f64) -> VariabilityClass {
    if cv < 0.75 {
        VariabilityClass::Low
    } else if cv <= 1.33 {
        VariabilityClass::Moderate
    } else {
        VariabilityClass::High
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProcessMetrics {
    pub cpk: f64,
    pub pp: f64,
    pub sigma_d: f64,
    pub rate_d: f64,
    pub cv: f64,
    pub variability_class: VariabilityClass,
}

impl ProcessMetrics {
    /// Metrics measured elsewhere. `cv` defaults to `sigma_d / rate_d`; a
    /// supplied value is kept as given, since published ratios are usually
    /// computed before the columns are rounded.
    pub fn from_columns(cpk: f64, pp: f64, sigma_d: f64, rate_d: f64, cv: Option<f64>) -> Result<Self> {
        let cv = match cv {
            Some(cv) => cv,
            None => coefficient_of_variation(sigma_d, rate_d)?,
        };
        for (name, v) in [("cpk", cpk), ("pp", pp), ("sigma_d", sigma_d), ("rate_d", rate_d), ("cv", cv)] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite")));
            }
        }
        if cv < 0.0 {
            return Err(Error::InvalidArgument(format!("cv must be nonnegative, got {cv}")));
        }
        Ok(Self {
            cpk,
            pp,
            sigma_d,
            rate_d,
            cv,
            variability_class: classify_variability(cv),
        })
    }
}

/// All metrics for one sample: `sigma_d` is the sample standard deviation and
/// `rate_d` the sample mean. Without explicit limits both Cpk and Pp use the
/// mean ± 2% band.
pub fn sample_metrics(sample: &OutputSample, limits: Option<&SpecLimits>) -> Result<ProcessMetrics> {
    let sigma_d = sample.nonzero_std_dev()?;
    let rate_d = sample.mean();
    let limits = match limits {
        Some(l) => *l,
        None => SpecLimits::around_mean(rate_d)?,
    };
    let cv = coefficient_of_variation(sigma_d, rate_d)?;
    Ok(ProcessMetrics {
        cpk: process_capability_index(sample, &limits)?,
        pp: process_performance(sample, Some(&limits))?,
        sigma_d,
        rate_d,
        cv,
        variability_class: classify_variability(cv),
    })
}
