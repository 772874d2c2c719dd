//! Browser bindings: closed forms, a closed-form sweep and a small Monte
//! Carlo comparison, each returned as a JSON string for the demo page.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use insider_core::config::parse_seed;
use insider_core::report::{run_compare, ComparisonRecord, SweepField};
use insider_core::{compare_closed_form, MarketParams};

/// Monte Carlo runs in the page block the UI thread; keep them short.
pub const MAX_BROWSER_SAMPLES: u64 = 2_000_000;

fn closed_form_value(p: &MarketParams) -> Result<Value, String> {
    let c = compare_closed_form(p).map_err(|e| e.to_string())?;
    Ok(json!({
        "regime": c.regime,
        "honest": c.honest_optimal,
        "skorokhod": c.skorokhod,
        "forward": c.forward,
        "threshold": p.indicator_threshold(),
        "gap_honest_minus_skorokhod": c.gaps.honest_minus_skorokhod,
        "gap_forward_minus_honest": c.gaps.forward_minus_honest,
        "ordering_pass": c.ordering_satisfied,
        "outside_positive_hypothesis": c.outside_positive_hypothesis,
    }))
}

fn market(m: f64, rho: f64, mu: f64, sigma: f64, t: f64) -> Result<MarketParams, String> {
    MarketParams::new(m, rho, mu, sigma, t).map_err(|e| e.to_string())
}

pub fn closed_form_json(m: f64, rho: f64, mu: f64, sigma: f64, t: f64) -> Result<String, String> {
    Ok(closed_form_value(&market(m, rho, mu, sigma, t)?)?.to_string())
}

/// Closed forms along a comma-separated grid of one field. Points that
/// overflow come back with an `error` entry instead of values.
pub fn sweep_json(
    m: f64,
    rho: f64,
    mu: f64,
    sigma: f64,
    t: f64,
    field: &str,
    grid: &str,
) -> Result<String, String> {
    let base = market(m, rho, mu, sigma, t)?;
    let field = SweepField::parse(field).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for item in grid.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let v: f64 = item
            .parse()
            .map_err(|_| format!("grid value `{item}` is not a number"))?;
        let p = base
            .with_field(field.name(), v)
            .map_err(|e| e.to_string())?;
        let row = match closed_form_value(&p) {
            Ok(mut row) => {
                row["value"] = json!(v);
                row
            }
            Err(e) => json!({ "value": v, "error": e }),
        };
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("grid is empty".into());
    }
    Ok(json!({ "field": field.name(), "rows": rows }).to_string())
}

/// Single-threaded comparison of estimates against closed forms.
pub fn compare_json(
    m: f64,
    rho: f64,
    mu: f64,
    sigma: f64,
    t: f64,
    samples: u64,
    seed: &str,
) -> Result<String, String> {
    if samples > MAX_BROWSER_SAMPLES {
        return Err(format!(
            "at most {MAX_BROWSER_SAMPLES} samples in the browser"
        ));
    }
    let p = market(m, rho, mu, sigma, t)?;
    let seed = parse_seed(seed).map_err(|e| e.to_string())?;
    let row = run_compare(&p, samples, seed, 1).map_err(|e| e.to_string())?;
    serde_json::to_string(&ComparisonRecord::from(&row)).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = closedForm)]
pub fn closed_form(m: f64, rho: f64, mu: f64, sigma: f64, t: f64) -> Result<String, JsError> {
    closed_form_json(m, rho, mu, sigma, t).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = sweepClosedForm)]
#[allow(clippy::too_many_arguments)]
pub fn sweep_closed_form(
    m: f64,
    rho: f64,
    mu: f64,
    sigma: f64,
    t: f64,
    field: &str,
    grid: &str,
) -> Result<String, JsError> {
    sweep_json(m, rho, mu, sigma, t, field, grid).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = compareMonteCarlo)]
#[allow(clippy::too_many_arguments)]
pub fn compare_monte_carlo(
    m: f64,
    rho: f64,
    mu: f64,
    sigma: f64,
    t: f64,
    samples: u32,
    seed: &str,
) -> Result<String, JsError> {
    compare_json(m, rho, mu, sigma, t, samples.into(), seed).map_err(|e| JsError::new(&e))
}
