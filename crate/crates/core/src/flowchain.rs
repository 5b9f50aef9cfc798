//! Variability propagation along a serial process chain.
//!
//! Each station's departure CV follows `cd² = u²·ce² + (1 − u²)·ca²`, and in
//! a lossless chain a station's departures are the next station's arrivals.

use serde::Serialize;

use crate::error::{Error, Result};

/// One station: utilization `u` and effective-process-time CV `ce`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainNode {
    utilization: f64,
    cv_effective: f64,
}

impl ChainNode {
    pub fn new(utilization: f64, cv_effective: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&utilization) {
            return Err(Error::InvalidArgument(format!(
                "utilization must lie in [0, 1], got {utilization}"
            )));
        }
        if !(cv_effective >= 0.0) || !cv_effective.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "effective CV must be finite and nonnegative, got {cv_effective}"
            )));
        }
        Ok(Self {
            utilization,
            cv_effective,
        })
    }

    pub fn utilization(&self) -> f64 {
        self.utilization
    }

    pub fn cv_effective(&self) -> f64 {
        self.cv_effective
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainResult {
    pub arrivals: Vec<f64>,
    pub departures: Vec<f64>,
}

/// Departure CV of a station given its arrival CV.
pub fn propagate_one(ca: f64, node: &ChainNode) -> Result<f64> {
    if !(ca >= 0.0) || !ca.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "arrival CV must be finite and nonnegative, got {ca}"
        )));
    }
    let u2 = node.utilization * node.utilization;
    Ok((u2 * node.cv_effective * node.cv_effective + (1.0 - u2) * ca * ca).sqrt())
}

pub fn propagate_chain(ca0: f64, nodes: &[ChainNode]) -> Result<ChainResult> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("chain has no stations".into()));
    }
    let mut arrivals = Vec::with_capacity(nodes.len());
    let mut departures = Vec::with_capacity(nodes.len());
    let mut ca = ca0;
    for node in nodes {
        arrivals.push(ca);
        ca = propagate_one(ca, node)?;
        departures.push(ca);
    }
    Ok(ChainResult { arrivals, departures })
}
