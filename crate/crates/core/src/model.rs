//! Productivity functions, time series and their text formats.
//!
//! Model file grammar (UTF-8, line oriented, `#` starts a comment):
//!
//! ```text
//! impulse <gain>
//! exp <gain> <decay_rate>
//! ```
//!
//! At most one `impulse` line; one `exp` line per mode. A positive decay
//! rate is a decaying mode `g·e^(−λt)`, a negative one grows.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// One real exponential term `gain · e^(−decay_rate · t)` of a productivity function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialMode {
    pub gain: f64,
    pub decay_rate: f64,
}

impl ExponentialMode {
    pub fn new(gain: f64, decay_rate: f64) -> Result<Self> {
        if !gain.is_finite() || !decay_rate.is_finite() {
            return Err(Error::InvalidModel(format!(
                "mode parameters must be finite (gain={gain}, decay_rate={decay_rate})"
            )));
        }
        if decay_rate == 0.0 {
            return Err(Error::InvalidModel("decay rate must be nonzero".into()));
        }
        Ok(Self { gain, decay_rate })
    }

    /// Final contribution of this mode to the unit-step response, `g/λ`.
    pub fn step_amplitude(&self) -> f64 {
        self.gain / self.decay_rate
    }

    /// Contribution of this mode to the unit-step response at time `t ≥ 0`.
    pub fn step_value(&self, t: f64) -> f64 {
        // (g/λ)(1 − e^(−λt)); exp_m1 keeps precision for small λt.
        -self.step_amplitude() * (-self.decay_rate * t).exp_m1()
    }
}

/// Kernel relating a process's input to its output by convolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductivityFunction {
    impulse_gain: f64,
    modes: Vec<ExponentialMode>,
}

impl ProductivityFunction {
    pub fn new(impulse_gain: f64, modes: Vec<ExponentialMode>) -> Result<Self> {
        if !impulse_gain.is_finite() {
            return Err(Error::InvalidModel("impulse gain must be finite".into()));
        }
        if modes.is_empty() && impulse_gain == 0.0 {
            return Err(Error::InvalidModel(
                "a model needs a nonzero impulse gain or at least one mode".into(),
            ));
        }
        for m in &modes {
            ExponentialMode::new(m.gain, m.decay_rate)?;
        }
        Ok(Self { impulse_gain, modes })
    }

    pub fn impulse_only(gain: f64) -> Result<Self> {
        Self::new(gain, Vec::new())
    }

    pub fn impulse_gain(&self) -> f64 {
        self.impulse_gain
    }

    pub fn modes(&self) -> &[ExponentialMode] {
        &self.modes
    }

    /// True when every mode decays.
    pub fn is_stable(&self) -> bool {
        self.modes.iter().all(|m| m.decay_rate > 0.0)
    }

    /// Final value of the unit-step response; `None` when a mode grows.
    pub fn steady_state_gain(&self) -> Option<f64> {
        if !self.is_stable() {
            return None;
        }
        Some(self.impulse_gain + self.modes.iter().map(ExponentialMode::step_amplitude).sum::<f64>())
    }

    /// Slowest mode, the one with the smallest `|decay_rate|`.
    pub fn slowest_mode(&self) -> Option<&ExponentialMode> {
        self.modes
            .iter()
            .min_by(|a, b| a.decay_rate.abs().total_cmp(&b.decay_rate.abs()))
    }

    /// Analytic unit-step response at `t ≥ 0`.
    pub fn step_value(&self, t: f64) -> f64 {
        self.impulse_gain + self.modes.iter().map(|m| m.step_value(t)).sum::<f64>()
    }

    /// Same model with every gain multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        let modes = self
            .modes
            .iter()
            .map(|m| ExponentialMode::new(m.gain * k, m.decay_rate))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.impulse_gain * k, modes)
    }
}

fn parse_real(token: &str, line: usize, what: &str) -> Result<f64> {
    let value: f64 = token.parse().map_err(|_| Error::Syntax {
        line,
        message: format!("invalid {what} literal '{token}'"),
    })?;
    if !value.is_finite() {
        return Err(Error::Syntax {
            line,
            message: format!("{what} must be finite, got '{token}'"),
        });
    }
    Ok(value)
}

/// Parses the model file format.
pub fn parse_model(text: &str) -> Result<ProductivityFunction> {
    let mut impulse: Option<f64> = None;
    let mut modes = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens.as_slice() {
            ["impulse", gain] => {
                if impulse.is_some() {
                    return Err(Error::Syntax {
                        line,
                        message: "more than one impulse line".into(),
                    });
                }
                impulse = Some(parse_real(gain, line, "impulse gain")?);
            }
            ["exp", gain, rate] => {
                let gain = parse_real(gain, line, "gain")?;
                let decay_rate = parse_real(rate, line, "decay rate")?;
                if decay_rate == 0.0 {
                    return Err(Error::ZeroDecayRate { line });
                }
                modes.push(ExponentialMode { gain, decay_rate });
            }
            ["impulse", ..] => {
                return Err(Error::Syntax {
                    line,
                    message: "expected 'impulse <gain>'".into(),
                })
            }
            ["exp", ..] => {
                return Err(Error::Syntax {
                    line,
                    message: "expected 'exp <gain> <decay_rate>'".into(),
                })
            }
            [keyword, ..] => {
                return Err(Error::Syntax {
                    line,
                    message: format!("unknown keyword '{keyword}'"),
                })
            }
            [] => unreachable!(),
        }
    }
    ProductivityFunction::new(impulse.unwrap_or(0.0), modes)
}

/// Renders a model in the file format. Literals use the shortest decimal
/// representation that reads back to the same `f64`.
pub fn format_model(pf: &ProductivityFunction) -> String {
    let mut out = String::new();
    if pf.impulse_gain != 0.0 || pf.modes.is_empty() {
        out.push_str(&format!("impulse {}\n", pf.impulse_gain));
    }
    for m in &pf.modes {
        out.push_str(&format!("exp {} {}\n", m.gain, m.decay_rate));
    }
    out
}

impl FromStr for ProductivityFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_model(s)
    }
}

impl fmt::Display for ProductivityFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_model(self))
    }
}

/// Strictly time-ordered samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidSeries(format!(
                "{} timestamps but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidSeries("at least two samples are required".into()));
        }
        for (i, (&t, &v)) in times.iter().zip(&values).enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(Error::InvalidSeries(format!("sample {i} is not finite")));
            }
            if i > 0 && t <= times[i - 1] {
                return Err(Error::InvalidSeries(format!(
                    "timestamps must strictly increase (sample {i}: {t} after {})",
                    times[i - 1]
                )));
            }
        }
        Ok(Self { times, values })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let (times, values) = pairs.into_iter().unzip();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    pub fn first_time(&self) -> f64 {
        self.times[0]
    }

    pub fn last_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Linear interpolation; clamps to the end values outside the sampled range.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let hi = self.times.partition_point(|&x| x <= t);
        let lo = hi - 1;
        let (t0, t1) = (self.times[lo], self.times[hi]);
        let w = (t - t0) / (t1 - t0);
        self.values[lo] + w * (self.values[hi] - self.values[lo])
    }

    /// Linear resampling onto `first, first+dt, …` up to the last timestamp.
    pub fn resample(&self, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        let start = self.first_time();
        let steps = grid_steps(self.last_time() - start, dt);
        let end = self.last_time();
        let times: Vec<f64> = (0..=steps).map(|k| (start + k as f64 * dt).min(end)).collect();
        let values = times.iter().map(|&t| self.value_at(t)).collect();
        Self::new(times, values)
    }

    /// True when consecutive spacings agree to a relative tolerance.
    pub fn is_uniform(&self, rel_tol: f64) -> bool {
        let dt = (self.last_time() - self.first_time()) / (self.len() - 1) as f64;
        self.times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= rel_tol * dt)
    }

    pub fn same_grid(&self, other: &TimeSeries) -> bool {
        self.times.len() == other.times.len()
            && self
                .times
                .iter()
                .zip(&other.times)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0))
    }
}

/// Number of whole `dt` steps that fit in `span`, tolerating rounding.
pub(crate) fn grid_steps(span: f64, dt: f64) -> usize {
    (span / dt * (1.0 + 1e-12)).floor().max(1.0) as usize
}

/// A recorded input/output pair for one process together with its total time.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessRun {
    pub input: TimeSeries,
    pub output: TimeSeries,
    pub total_time: f64,
}

impl ProcessRun {
    pub fn new(input: TimeSeries, output: TimeSeries, total_time: f64) -> Result<Self> {
        if !(total_time > 0.0) || !total_time.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "total time must be positive, got {total_time}"
            )));
        }
        if total_time < input.last_time() {
            return Err(Error::InvalidArgument(format!(
                "total time {total_time} precedes the last input timestamp {}",
                input.last_time()
            )));
        }
        Ok(Self {
            input,
            output,
            total_time,
        })
    }
}
