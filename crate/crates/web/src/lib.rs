//! Browser bindings: each export takes plain numbers and returns JSON for
//! the page to plot. The `*_json` functions hold the logic and run natively.

use dynclass_core::experiments::{build_systems, emit_trajectory_cloud, run_experiment, ClassifierKind, ExperimentConfig};
use dynclass_core::margin::{beta, margin_bound};
use dynclass_core::sysmodel::feasibility_check;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn config(ts: f64, horizon: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        ts,
        horizon,
        seed,
        ..Default::default()
    }
}

fn rows(data: &dynclass_core::Dataset) -> Vec<Vec<f64>> {
    data.items().iter().map(|t| t.y().to_vec()).collect()
}

/// `{"class1": [[…]], "class2": [[…]]}` of unit-norm trajectories.
pub fn trajectory_cloud_json(ts: f64, horizon: usize, count: usize, seed: u64) -> Result<String, String> {
    let (c1, c2) = emit_trajectory_cloud(&config(ts, horizon, seed), count).map_err(|e| e.to_string())?;
    Ok(json!({ "class1": rows(&c1), "class2": rows(&c2) }).to_string())
}

/// `[{"N", "feasible", "beta", "bound"}]` for `N = 1..=max_horizon`; `beta` is
/// null where the rank test fails.
pub fn beta_curve_json(ts: f64, max_horizon: usize) -> Result<String, String> {
    let (s1, s2) = build_systems(&config(ts, 10, 0)).map_err(|e| e.to_string())?;
    let mut points = Vec::with_capacity(max_horizon);
    for n in 1..=max_horizon {
        let feasible = feasibility_check(&s1, &s2, n).map_err(|e| e.to_string())?.feasible;
        let b = if feasible { beta(&s1, &s2, n).ok() } else { None };
        points.push(json!({
            "N": n,
            "feasible": feasible,
            "beta": b,
            "bound": b.map(|b| margin_bound(b, s1.n(), s2.n())),
        }));
    }
    Ok(serde_json::Value::Array(points).to_string())
}

/// Validation report of one train/validate run.
pub fn classify_experiment_json(
    ts: f64,
    horizon: usize,
    train_size: usize,
    validation_size: usize,
    classifier: &str,
    seed: u64,
) -> Result<String, String> {
    let cfg = ExperimentConfig {
        train_size,
        validation_size,
        classifier: classifier.parse::<ClassifierKind>().map_err(|e| e.to_string())?,
        seeds: 1,
        ..config(ts, horizon, seed)
    };
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn trajectory_cloud(ts: f64, horizon: usize, count: usize, seed: u32) -> Result<String, JsError> {
    trajectory_cloud_json(ts, horizon, count, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn beta_curve(ts: f64, max_horizon: usize) -> Result<String, JsError> {
    beta_curve_json(ts, max_horizon).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn classify_experiment(
    ts: f64,
    horizon: usize,
    train_size: usize,
    validation_size: usize,
    classifier: &str,
    seed: u32,
) -> Result<String, JsError> {
    classify_experiment_json(ts, horizon, train_size, validation_size, classifier, seed.into())
        .map_err(|e| JsError::new(&e))
}
