//! Fitting productivity functions to recorded runs.
//!
//! Two estimators are provided: the static-gain baseline `y = α·u` and an
//! output-error fit of an impulse gain plus a sum of exponential modes.
//! The exponential fit screens rate combinations on a geometric grid
//! (gains follow from linear least squares for fixed rates), then polishes
//! the best candidate of each model structure by coordinate descent with
//! golden-section line searches in log-rate. Structures with different
//! parameter counts are compared by BIC.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ExponentialMode, ProcessRun, ProductivityFunction, TimeSeries};
use crate::transient::exponential_convolution;

/// Value returned by [`goodness_of_fit`] when the observations are constant
/// and the prediction misses them.
pub const GOF_FLOOR: f64 = -1e300;

/// Screening works on at most this many samples.
const SCREEN_SAMPLES: usize = 400;
/// Growing modes with `|λ|·span` above this are not tried.
const MAX_GROWTH_EXPONENT: f64 = 50.0;
/// Residual norms below this fraction of `‖y‖` count as an exact fit.
const EXACT_FIT_FRACTION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdpFit {
    pub alpha: f64,
    pub gof: f64,
}

/// Geometric grid of candidate decay rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateGrid {
    pub min: f64,
    pub max: f64,
    pub points_per_decade: usize,
}

impl Default for RateGrid {
    fn default() -> Self {
        Self {
            min: 1e-3,
            max: 1e3,
            points_per_decade: 60,
        }
    }
}

impl RateGrid {
    pub fn rates(&self) -> Result<Vec<f64>> {
        if !(self.min > 0.0 && self.max > self.min && self.max.is_finite()) || self.points_per_decade == 0 {
            return Err(Error::InvalidArgument(format!(
                "rate grid needs 0 < min < max and points per decade >= 1, got {self:?}"
            )));
        }
        let decades = (self.max / self.min).log10();
        let steps = (decades * self.points_per_decade as f64).round().max(1.0) as usize;
        let ratio = (self.max / self.min).ln() / steps as f64;
        Ok((0..=steps).map(|k| self.min * (ratio * k as f64).exp()).collect())
    }

    fn log_step(&self) -> f64 {
        std::f64::consts::LN_10 / self.points_per_decade as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitConfig {
    pub max_modes: usize,
    pub allow_impulse: bool,
    pub allow_unstable: bool,
    pub rate_grid: RateGrid,
    pub refine_iterations: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_modes: 2,
            allow_impulse: true,
            allow_unstable: true,
            rate_grid: RateGrid::default(),
            refine_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: ProductivityFunction,
    pub gof: f64,
    pub residual_norm: f64,
}

impl FitResult {
    /// JSON summary emitted by the CLI.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "gof": self.gof,
            "residual_norm": self.residual_norm,
            "mode_count": self.model.modes().len(),
            "impulse_gain": self.model.impulse_gain(),
            "stable": self.model.is_stable(),
        })
    }
}

fn nrmse(predicted: &[f64], observed: &[f64]) -> f64 {
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let residual = norm(predicted.iter().zip(observed).map(|(p, o)| o - p));
    let spread = norm(observed.iter().map(|o| o - mean));
    if spread == 0.0 {
        let scale = norm(observed.iter().copied());
        return if residual <= 1e-12 * scale { 1.0 } else { GOF_FLOOR };
    }
    1.0 - residual / spread
}

fn norm(xs: impl Iterator<Item = f64>) -> f64 {
    xs.map(|x| x * x).sum::<f64>().sqrt()
}

/// `1 − ‖y − ŷ‖ / ‖y − mean(y)‖` over two series on the same grid.
pub fn goodness_of_fit(predicted: &TimeSeries, observed: &TimeSeries) -> Result<f64> {
    if !predicted.same_grid(observed) {
        return Err(Error::GridMismatch(format!(
            "predicted has {} samples over [{}, {}], observed {} over [{}, {}]",
            predicted.len(),
            predicted.first_time(),
            predicted.last_time(),
            observed.len(),
            observed.first_time(),
            observed.last_time()
        )));
    }
    Ok(nrmse(predicted.values(), observed.values()))
}

fn common_grid(run: &ProcessRun) -> Result<()> {
    if run.input.same_grid(&run.output) {
        Ok(())
    } else {
        Err(Error::GridMismatch(
            "input and output must share timestamps; resample first".into(),
        ))
    }
}

/// Least-squares static gain `α = Σuy / Σu²`.
pub fn fit_fdp(run: &ProcessRun) -> Result<FdpFit> {
    common_grid(run)?;
    let u = run.input.values();
    let y = run.output.values();
    let uu: f64 = u.iter().map(|v| v * v).sum();
    if uu == 0.0 {
        return Err(Error::ZeroInput);
    }
    let alpha = u.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / uu;
    let predicted: Vec<f64> = u.iter().map(|v| alpha * v).collect();
    Ok(FdpFit {
        alpha,
        gof: nrmse(&predicted, y),
    })
}

/// Uniformly sampled input/output pair.
struct Problem {
    u: Vec<f64>,
    y: Vec<f64>,
    dt: f64,
}

impl Problem {
    fn from_run(run: &ProcessRun) -> Result<Self> {
        common_grid(run)?;
        let (input, output) = if run.input.is_uniform(1e-6) {
            (run.input.clone(), run.output.clone())
        } else {
            let dt = (run.input.last_time() - run.input.first_time()) / (run.input.len() - 1) as f64;
            (run.input.resample(dt)?, run.output.resample(dt)?)
        };
        let n = input.len();
        let dt = (input.last_time() - input.first_time()) / (n - 1) as f64;
        if input.values().iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroInput);
        }
        Ok(Self {
            u: input.values().to_vec(),
            y: output.values().to_vec(),
            dt,
        })
    }

    fn span(&self) -> f64 {
        self.dt * (self.u.len() - 1) as f64
    }

    fn column(&self, rate: f64) -> Vec<f64> {
        exponential_convolution(rate, &self.u, self.dt)
    }

    /// Least-squares gains for fixed rates; `None` if the design is degenerate.
    fn solve(&self, impulse: bool, rates: &[f64]) -> Option<Candidate> {
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(rates.len() + 1);
        if impulse {
            cols.push(self.u.clone());
        }
        cols.extend(rates.iter().map(|&r| self.column(r)));
        let n = self.y.len();
        let k = cols.len();
        let mut scales = Vec::with_capacity(k);
        let mut design = DMatrix::<f64>::zeros(n, k);
        for (j, col) in cols.iter().enumerate() {
            let s = norm(col.iter().copied());
            if !(s > 0.0) || !s.is_finite() {
                return None;
            }
            scales.push(s);
            for (i, v) in col.iter().enumerate() {
                design[(i, j)] = v / s;
            }
        }
        let target = DVector::from_column_slice(&self.y);
        let svd = design.clone().svd(true, true);
        let coeffs = svd.solve(&target, 1e-12).ok()?;
        let fitted = &design * &coeffs;
        let rss: f64 = fitted.iter().zip(&self.y).map(|(f, y)| (y - f).powi(2)).sum();
        if !rss.is_finite() {
            return None;
        }
        let coeffs: Vec<f64> = coeffs.iter().zip(&scales).map(|(c, s)| c / s).collect();
        Some(Candidate {
            impulse,
            rates: rates.to_vec(),
            coeffs,
            rss,
        })
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    impulse: bool,
    rates: Vec<f64>,
    coeffs: Vec<f64>,
    rss: f64,
}

impl Candidate {
    fn parameter_count(&self) -> usize {
        2 * self.rates.len() + usize::from(self.impulse)
    }

    fn model(&self) -> Result<ProductivityFunction> {
        let (impulse_gain, gains) = if self.impulse {
            (self.coeffs[0], &self.coeffs[1..])
        } else {
            (0.0, &self.coeffs[..])
        };
        let modes = gains
            .iter()
            .zip(&self.rates)
            .map(|(&g, &r)| ExponentialMode::new(g, r))
            .collect::<Result<Vec<_>>>()?;
        ProductivityFunction::new(impulse_gain, modes)
    }
}

/// Gram-matrix screen over the rate grid on a decimated copy of the data.
struct Screen {
    gram: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// Column 0 is the impulse (input) column; rate `i` is column `i + 1`.
    rates: Vec<f64>,
}

impl Screen {
    fn build(problem: &Problem, rates: Vec<f64>) -> Self {
        let stride = problem.y.len().div_ceil(SCREEN_SAMPLES).max(1);
        let pick = |v: &[f64]| -> Vec<f64> { v.iter().step_by(stride).copied().collect() };
        let normalized = |v: Vec<f64>| -> Vec<f64> {
            let s = norm(v.iter().copied());
            if s > 0.0 && s.is_finite() {
                v.into_iter().map(|x| x / s).collect()
            } else {
                vec![0.0; v.len()]
            }
        };
        let mut cols = vec![normalized(pick(&problem.u))];
        cols.extend(rates.iter().map(|&r| normalized(pick(&problem.column(r)))));
        let y = pick(&problem.y);
        let m = cols.len();
        let mut gram = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in i..m {
                let d: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
                gram[i][j] = d;
                gram[j][i] = d;
            }
        }
        let rhs = cols.iter().map(|c| c.iter().zip(&y).map(|(a, b)| a * b).sum()).collect();
        Self { gram, rhs, rates }
    }

    /// Explained sum of squares `bᵀG⁻¹b` for the chosen columns (higher is better).
    fn explained(&self, columns: &[usize]) -> Option<f64> {
        let k = columns.len();
        let mut a = vec![vec![0.0; k]; k];
        for (r, &i) in columns.iter().enumerate() {
            for (c, &j) in columns.iter().enumerate() {
                a[r][c] = self.gram[i][j];
            }
        }
        // Cholesky; near-collinear column sets are skipped.
        for j in 0..k {
            let d = a[j][..j].iter().fold(a[j][j], |d, v| d - v * v);
            if !(d > 1e-10) {
                return None;
            }
            let d = d.sqrt();
            a[j][j] = d;
            for i in (j + 1)..k {
                let s = a[i][..j].iter().zip(&a[j][..j]).fold(a[i][j], |s, (x, y)| s - x * y);
                a[i][j] = s / d;
            }
        }
        let mut z = vec![0.0; k];
        for i in 0..k {
            let mut s = self.rhs[columns[i]];
            for p in 0..i {
                s -= a[i][p] * z[p];
            }
            z[i] = s / a[i][i];
        }
        Some(z.iter().map(|v| v * v).sum())
    }

    /// Best combination of `size` rate indices, with or without the impulse column.
    fn best(&self, size: usize, impulse: bool, seed: Option<&[usize]>) -> Option<Vec<usize>> {
        let m = self.rates.len();
        let score = |idx: &[usize]| -> Option<f64> {
            let mut cols: Vec<usize> = Vec::with_capacity(idx.len() + 1);
            if impulse {
                cols.push(0);
            }
            cols.extend(idx.iter().map(|i| i + 1));
            self.explained(&cols)
        };
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut consider = |idx: Vec<usize>| {
            if let Some(s) = score(&idx) {
                if best.as_ref().is_none_or(|(b, _)| s > *b) {
                    best = Some((s, idx));
                }
            }
        };
        match (size, seed) {
            (1, _) => (0..m).for_each(|i| consider(vec![i])),
            (2, _) => {
                for i in 0..m {
                    for j in (i + 1)..m {
                        consider(vec![i, j]);
                    }
                }
            }
            (_, Some(base)) => {
                for i in (0..m).filter(|i| !base.contains(i)) {
                    let mut idx = base.to_vec();
                    idx.push(i);
                    idx.sort_unstable();
                    consider(idx);
                }
            }
            _ => {}
        }
        best.map(|(_, idx)| idx)
    }
}

fn golden_section(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-11 * (1.0 + lo.abs().max(hi.abs())) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Coordinate descent on log|rate|, signs held fixed.
fn refine(problem: &Problem, start: Candidate, log_step: f64, iterations: usize) -> Candidate {
    let mut best = start;
    let width = 2.0 * log_step;
    for _ in 0..iterations {
        let before = best.rates.clone();
        for i in 0..best.rates.len() {
            let sign = best.rates[i].signum();
            let centre = best.rates[i].abs().ln();
            let with_rate = |log_rate: f64| {
                let mut rates = best.rates.clone();
                rates[i] = sign * log_rate.exp();
                rates
            };
            let objective = |log_rate: f64| {
                problem
                    .solve(best.impulse, &with_rate(log_rate))
                    .map_or(f64::INFINITY, |c| c.rss)
            };
            let (x, fx) = golden_section(centre - width, centre + width, objective);
            if fx < best.rss {
                if let Some(c) = problem.solve(best.impulse, &with_rate(x)) {
                    best = c;
                }
            }
        }
        let moved = before
            .iter()
            .zip(&best.rates)
            .map(|(a, b)| ((a - b) / a).abs())
            .fold(0.0, f64::max);
        if moved < 1e-10 {
            break;
        }
    }
    best
}

/// Fits an impulse gain plus up to `max_modes` exponential modes to `run`.
pub fn fit_productivity(run: &ProcessRun, cfg: &FitConfig) -> Result<FitResult> {
    if cfg.max_modes == 0 {
        return Err(Error::InvalidArgument("max_modes must be at least 1".into()));
    }
    let problem = Problem::from_run(run)?;
    let grid = cfg.rate_grid.rates()?;
    if grid.len() < cfg.max_modes {
        return Err(Error::InvalidArgument(format!(
            "rate grid has {} points but max_modes is {}",
            grid.len(),
            cfg.max_modes
        )));
    }
    let mut rates: Vec<f64> = Vec::with_capacity(2 * grid.len());
    if cfg.allow_unstable {
        let limit = MAX_GROWTH_EXPONENT / problem.span();
        rates.extend(grid.iter().rev().filter(|&&r| r <= limit).map(|&r| -r));
    }
    rates.extend(grid.iter().copied());
    let screen = Screen::build(&problem, rates);

    let impulse_options: &[bool] = if cfg.allow_impulse { &[false, true] } else { &[false] };
    let mut candidates: Vec<Candidate> = Vec::new();
    if cfg.allow_impulse {
        candidates.extend(problem.solve(true, &[]));
    }
    for &impulse in impulse_options {
        let mut previous: Option<Vec<usize>> = None;
        for size in 1..=cfg.max_modes {
            let Some(idx) = screen.best(size, impulse, previous.as_deref()) else {
                break;
            };
            let start_rates: Vec<f64> = idx.iter().map(|&i| screen.rates[i]).collect();
            if let Some(start) = problem.solve(impulse, &start_rates) {
                candidates.push(refine(&problem, start, cfg.rate_grid.log_step(), cfg.refine_iterations));
            }
            previous = Some(idx);
        }
    }

    let n = problem.y.len() as f64;
    let yy: f64 = problem.y.iter().map(|v| v * v).sum();
    let rss_floor = (EXACT_FIT_FRACTION * EXACT_FIT_FRACTION * yy).max(f64::MIN_POSITIVE);
    let bic = |c: &Candidate| n * (c.rss.max(rss_floor) / n).ln() + c.parameter_count() as f64 * n.ln();
    let chosen = candidates
        .iter()
        .filter(|c| c.rss.is_finite())
        .min_by(|a, b| {
            bic(a)
                .total_cmp(&bic(b))
                .then(a.parameter_count().cmp(&b.parameter_count()))
                .then_with(|| {
                    a.rates
                        .iter()
                        .zip(&b.rates)
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
        })
        .ok_or_else(|| Error::FitFailed("no candidate produced a finite residual".into()))?;

    let mut result = finish(&problem, chosen)?;
    if cfg.allow_impulse {
        // The impulse-only structure is the static-gain baseline on the same grid.
        if let Some(baseline) = candidates.iter().find(|c| c.rates.is_empty()) {
            let baseline = finish(&problem, baseline)?;
            if baseline.gof > result.gof {
                result = baseline;
            }
        }
    }
    Ok(result)
}

fn finish(problem: &Problem, candidate: &Candidate) -> Result<FitResult> {
    let model = candidate.model()?;
    let mut predicted: Vec<f64> = problem.u.iter().map(|v| model.impulse_gain() * v).collect();
    for mode in model.modes() {
        for (p, c) in predicted.iter_mut().zip(problem.column(mode.decay_rate)) {
            *p += mode.gain * c;
        }
    }
    let residual_norm = norm(predicted.iter().zip(&problem.y).map(|(p, y)| y - p));
    Ok(FitResult {
        gof: nrmse(&predicted, &problem.y),
        residual_norm,
        model,
    })
}
