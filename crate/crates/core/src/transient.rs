//! Step responses, convolution, settling time and changeover stages.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{grid_steps, ProductivityFunction, TimeSeries};

/// How the settling band is placed around the response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandMode {
    /// Slowest mode's envelope decays to `epsilon` of its own amplitude.
    #[default]
    AmplitudeRelative,
    /// Response stays within `steady ± epsilon·|steady|`.
    FinalValueRelative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SettlingConfig {
    pub epsilon: f64,
    pub band_mode: BandMode,
    /// Time at which the unit step is applied.
    pub step_onset: f64,
}

impl Default for SettlingConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.02,
            band_mode: BandMode::AmplitudeRelative,
            step_onset: 0.0,
        }
    }
}

impl SettlingConfig {
    pub fn new(epsilon: f64, band_mode: BandMode, step_onset: f64) -> Result<Self> {
        let cfg = Self {
            epsilon,
            band_mode,
            step_onset,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !self.step_onset.is_finite() {
            return Err(Error::InvalidArgument("step onset must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub low: f64,
    pub high: f64,
}

impl Band {
    pub fn contains(&self, y: f64) -> bool {
        self.low <= y && y <= self.high
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SettlingResult {
    /// Duration from step onset until the response stays in band.
    pub settling_time: f64,
    pub steady_state_value: Option<f64>,
    /// `None` for unstable models, which have no steady state to band around.
    pub band: Option<Band>,
    /// Horizon scanned by the numeric search, when one was used.
    pub reached_within: Option<f64>,
    pub step_onset: f64,
}

impl SettlingResult {
    /// Absolute instant at which the response settles.
    pub fn settled_at(&self) -> f64 {
        self.step_onset + self.settling_time
    }
}

fn check_grid(horizon: f64, dt: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    if !(dt > 0.0 && dt <= horizon) {
        return Err(Error::InvalidArgument(format!(
            "dt must satisfy 0 < dt <= horizon, got {dt}"
        )));
    }
    Ok(())
}

/// Analytic unit-step response sampled at `0, dt, 2dt, …, horizon`.
pub fn step_response(pf: &ProductivityFunction, horizon: f64, dt: f64) -> Result<TimeSeries> {
    check_grid(horizon, dt)?;
    let steps = grid_steps(horizon, dt);
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let values = times.iter().map(|&t| pf.step_value(t)).collect();
    TimeSeries::new(times, values)
}

/// A unit step held over `[0, horizon]`.
pub fn unit_step(horizon: f64) -> Result<TimeSeries> {
    TimeSeries::new(vec![0.0, horizon], vec![1.0, 1.0])
}

/// Trapezoidal convolution of `e^(−rate·t)` with `u` sampled every `dt`.
///
/// Uses the recursion `S_k = u_k + r·S_(k−1)` with `r = e^(−rate·dt)`, which
/// yields the full trapezoidal sum in linear time.
pub(crate) fn exponential_convolution(rate: f64, u: &[f64], dt: f64) -> Vec<f64> {
    let r = (-rate * dt).exp();
    let mut out = Vec::with_capacity(u.len());
    let mut running = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        running = uk + r * running;
        if k == 0 {
            out.push(0.0);
        } else {
            let tail = (-rate * dt * k as f64).exp() * u[0];
            out.push(dt * (running - 0.5 * uk - 0.5 * tail));
        }
    }
    out
}

/// Output of `pf` driven by `input`, resampled linearly onto a uniform `dt` grid.
///
/// The first input timestamp is the time origin; the input is taken to be
/// zero before it.
pub fn simulate_response(pf: &ProductivityFunction, input: &TimeSeries, dt: f64) -> Result<TimeSeries> {
    let grid = input.resample(dt)?;
    let u = grid.values();
    let mut y: Vec<f64> = u.iter().map(|&v| pf.impulse_gain() * v).collect();
    for mode in pf.modes() {
        for (acc, c) in y.iter_mut().zip(exponential_convolution(mode.decay_rate, u, dt)) {
            *acc += mode.gain * c;
        }
    }
    TimeSeries::new(grid.times().to_vec(), y)
}

/// Settling time of the unit-step response.
pub fn settling_time(pf: &ProductivityFunction, cfg: &SettlingConfig) -> Result<SettlingResult> {
    cfg.validate()?;
    let steady = pf.steady_state_gain();
    let Some(slowest) = pf.slowest_mode() else {
        // Pure feedthrough settles at the instant the step is applied.
        let s = pf.impulse_gain();
        let half = cfg.epsilon * s.abs();
        return Ok(SettlingResult {
            settling_time: 0.0,
            steady_state_value: Some(s),
            band: Some(Band { low: s - half, high: s + half }),
            reached_within: None,
            step_onset: cfg.step_onset,
        });
    };
    match cfg.band_mode {
        BandMode::AmplitudeRelative => {
            let ts = (1.0 / cfg.epsilon).ln() / slowest.decay_rate.abs();
            let band = steady.map(|s| {
                let half = cfg.epsilon * slowest.step_amplitude().abs();
                Band { low: s - half, high: s + half }
            });
            Ok(SettlingResult {
                settling_time: ts,
                steady_state_value: steady,
                band,
                reached_within: None,
                step_onset: cfg.step_onset,
            })
        }
        BandMode::FinalValueRelative => final_value_settling(pf, cfg, slowest.decay_rate),
    }
}

fn final_value_settling(pf: &ProductivityFunction, cfg: &SettlingConfig, slowest_rate: f64) -> Result<SettlingResult> {
    let steady = pf.steady_state_gain().ok_or(Error::Unstable)?;
    if steady == 0.0 {
        return Err(Error::DegenerateBand);
    }
    let half = cfg.epsilon * steady.abs();
    let band = Band {
        low: steady - half,
        high: steady + half,
    };
    // |y(t) − steady| ≤ Σ|g/λ|·e^(−λ_min t), so the response is inside the
    // band for good once that envelope drops below the half-width.
    let envelope: f64 = pf.modes().iter().map(|m| m.step_amplitude().abs()).sum();
    let horizon = ((envelope / half).ln() / slowest_rate).max((1.0 / cfg.epsilon).ln() / slowest_rate);
    let steps = 10_000usize;
    let dt = horizon / steps as f64;
    let outside = |t: f64| !band.contains(pf.step_value(t));
    let last_out = (0..=steps).rev().find(|&k| outside(k as f64 * dt));
    let ts = match last_out {
        None => 0.0,
        Some(k) if k == steps => horizon,
        Some(k) => {
            let (mut lo, mut hi) = (k as f64 * dt, (k + 1) as f64 * dt);
            while hi - lo > 1e-9 * hi {
                let mid = 0.5 * (lo + hi);
                if outside(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        }
    };
    Ok(SettlingResult {
        settling_time: ts,
        steady_state_value: Some(steady),
        band: Some(band),
        reached_within: Some(horizon),
        step_onset: cfg.step_onset,
    })
}

/// Settling time as a fraction of the total process time.
pub fn percentile_reaction_time(ts: f64, tt: f64) -> Result<f64> {
    if !(tt > 0.0) {
        return Err(Error::InvalidArgument(format!("total time must be positive, got {tt}")));
    }
    if !(ts >= 0.0) {
        return Err(Error::InvalidArgument(format!("settling time must be nonnegative, got {ts}")));
    }
    Ok(ts / tt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Steadiness {
    Steady,
    Unsteady,
}

impl Steadiness {
    pub fn as_str(&self) -> &'static str {
        match self {
            Steadiness::Steady => "steady",
            Steadiness::Unsteady => "unsteady",
        }
    }
}

/// A run is unsteady when it ends before settling or its model grows. Ties favor steady.
pub fn classify_steadiness(ts: f64, tt: f64, stable: bool) -> Steadiness {
    if !stable || ts > tt {
        Steadiness::Unsteady
    } else {
        Steadiness::Steady
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

/// Cleanup, setup and startup stages of one changeover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChangeoverStages {
    pub cleanup: Interval,
    pub setup: Interval,
    pub startup: Interval,
}

/// Splits a changeover window into its three stages.
///
/// `prev_output` starts when the previous process's input ceased; `input` is
/// the new process's input, whose first positive sample is the kick-off; and
/// `settling` is the new process's settling measured from kick-off. The
/// previous output counts as zero at or below `1e-9 × max|prev_output|`.
pub fn segment_changeover(
    prev_output: &TimeSeries,
    input: &TimeSeries,
    settling: &SettlingResult,
) -> Result<ChangeoverStages> {
    let peak = prev_output.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    segment_changeover_with_tolerance(prev_output, input, settling, 1e-9 * peak)
}

pub fn segment_changeover_with_tolerance(
    prev_output: &TimeSeries,
    input: &TimeSeries,
    settling: &SettlingResult,
    zero_tolerance: f64,
) -> Result<ChangeoverStages> {
    if !(zero_tolerance >= 0.0) {
        return Err(Error::InvalidArgument("zero tolerance must be nonnegative".into()));
    }
    let kickoff = input
        .iter()
        .find(|&(_, v)| v > 0.0)
        .map(|(t, _)| t)
        .ok_or(Error::NoKickoff)?;
    let start = prev_output.first_time();
    let cleared = prev_output
        .iter()
        .find(|&(t, v)| v <= zero_tolerance && t <= kickoff)
        .map(|(t, _)| t);
    let cleanup_end = match cleared {
        Some(t) if start <= kickoff => t,
        _ => {
            return Err(Error::CleanupOverlap {
                kickoff,
                value: prev_output.value_at(kickoff),
            })
        }
    };
    Ok(ChangeoverStages {
        cleanup: Interval { start, end: cleanup_end },
        setup: Interval { start: cleanup_end, end: kickoff },
        startup: Interval {
            start: kickoff,
            end: kickoff + settling.settling_time,
        },
    })
}
