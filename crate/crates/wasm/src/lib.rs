//! Browser bindings for three prodflow operations: plotting a model's step
//! response, computing its settling time, and propagating variability along
//! a chain of stations.
//!
//! Each binding is a thin wrapper over a plain function that returns
//! `Result<_, String>`, so the logic is testable without a browser.

use prodflow::flowchain::{propagate_chain, ChainNode};
use prodflow::model::parse_model;
use prodflow::report::render_step_plot;
use prodflow::transient::{
    classify_steadiness, percentile_reaction_time, settling_time, step_response, BandMode, SettlingConfig,
};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// SVG of the unit-step response of `model` over `[0, horizon]`.
pub fn step_plot(model: &str, horizon: f64, dt: f64) -> Result<String, String> {
    let pf = parse_model(model).map_err(text)?;
    let response = step_response(&pf, horizon, dt).map_err(text)?;
    render_step_plot(&[("model".into(), response)]).map_err(text)
}

/// Settling summary as JSON. `band` is `"amplitude"` or `"final"`.
pub fn settle(model: &str, epsilon: f64, band: &str, total_time: Option<f64>) -> Result<String, String> {
    let pf = parse_model(model).map_err(text)?;
    let mode = match band {
        "amplitude" => BandMode::AmplitudeRelative,
        "final" => BandMode::FinalValueRelative,
        other => return Err(format!("unknown band mode '{other}'")),
    };
    let cfg = SettlingConfig::new(epsilon, mode, 0.0).map_err(text)?;
    let result = settling_time(&pf, &cfg).map_err(text)?;
    let mut out = json!({
        "settling_time": result.settling_time,
        "steady_state_value": result.steady_state_value,
        "band": result.band,
        "stable": pf.is_stable(),
    });
    if let Some(tt) = total_time {
        let fraction = percentile_reaction_time(result.settling_time, tt).map_err(text)?;
        out["reaction_pct"] = json!(100.0 * fraction);
        out["steadiness"] = json!(classify_steadiness(result.settling_time, tt, pf.is_stable()).as_str());
    }
    Ok(out.to_string())
}

/// Departure variability after each station.
pub fn chain(ca0: f64, utilizations: &[f64], cv_effective: &[f64]) -> Result<Vec<f64>, String> {
    if utilizations.len() != cv_effective.len() {
        return Err(format!(
            "{} utilizations but {} effective variabilities",
            utilizations.len(),
            cv_effective.len()
        ));
    }
    let nodes = utilizations
        .iter()
        .zip(cv_effective)
        .map(|(&u, &ce)| ChainNode::new(u, ce))
        .collect::<Result<Vec<_>, _>>()
        .map_err(text)?;
    Ok(propagate_chain(ca0, &nodes).map_err(text)?.departures)
}

#[wasm_bindgen(js_name = stepPlot)]
pub fn step_plot_js(model: &str, horizon: f64, dt: f64) -> Result<String, JsError> {
    step_plot(model, horizon, dt).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = settle)]
pub fn settle_js(model: &str, epsilon: f64, band: &str, total_time: Option<f64>) -> Result<String, JsError> {
    settle(model, epsilon, band, total_time).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = chain)]
pub fn chain_js(ca0: f64, utilizations: Vec<f64>, cv_effective: Vec<f64>) -> Result<Vec<f64>, JsError> {
    chain(ca0, &utilizations, &cv_effective).map_err(|e| JsError::new(&e))
}
