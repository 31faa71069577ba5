//! WebAssembly bindings for the browser demo. Every export returns a JSON
//! string; errors are thrown as JS strings.

use dgp_core::harness::{generate_point_clouds, generate_triangles, run_sweep, summarize, Cell, SweepConfig};
use dgp_core::procrustes::{aligned_estimate, opp_loss};
use dgp_core::seed::StreamKey;
use dgp_core::{NoiseFamily, NoiseModel, OptimizerSettings, PointSet};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, String>;

fn family(name: &str) -> Result<NoiseFamily> {
    match name.parse() {
        Ok(NoiseFamily::Gaussian) => Err("pick laplace or nsst noise".into()),
        Ok(f) => Ok(f),
        Err(e) => Err(format!("{e}")),
    }
}

fn structure(kind: &str, n_points: usize, seed: u64) -> Result<PointSet> {
    let key = StreamKey::new(seed);
    let mut found = match kind {
        "triangle" => generate_triangles(1, &mut key.with_str("triangles").rng()),
        "cloud" if n_points >= 2 => generate_point_clouds(1, n_points, &mut key.with_str("clouds").rng()),
        "cloud" => return Err("a cloud needs at least 2 points".into()),
        other => return Err(format!("unknown structure kind `{other}`")),
    };
    Ok(found.remove(0))
}

fn points(ps: &PointSet) -> Value {
    ps.points().map(|p| p.to_vec()).collect()
}

fn config(truth: PointSet, family: NoiseFamily, nu: u32, snr_grid_db: Vec<f64>, m: usize, repeats: usize, seed: u64) -> SweepConfig {
    SweepConfig {
        structures: vec![truth],
        noise_families: vec![family],
        nsst_nu: nu,
        snr_grid_db,
        m_values: vec![m],
        repeats,
        seed,
        optimizer: OptimizerSettings { restarts: 3, ..OptimizerSettings::default() },
    }
}

/// Gaussian, Laplace and NSST densities at location 0, all with the given variance.
pub fn density_curves_value(variance: f64, nu: u32, half_width: f64, samples: usize) -> Result<Value> {
    if samples < 2 || half_width.is_nan() || half_width <= 0.0 {
        return Err("need at least 2 samples over a positive range".into());
    }
    let model = |f| NoiseModel::from_target_variance(f, variance, Some(nu)).map_err(|e| e.to_string());
    let models = [model(NoiseFamily::Gaussian)?, model(NoiseFamily::Laplace)?, model(NoiseFamily::Nsst)?];
    let ys: Vec<f64> = (0..samples)
        .map(|k| -half_width + 2.0 * half_width * k as f64 / (samples - 1) as f64)
        .collect();
    let curve = |m: &NoiseModel| ys.iter().map(|&y| m.log_pdf(y, 0.0).exp()).collect::<Vec<_>>();
    Ok(json!({
        "y": ys,
        "gaussian": curve(&models[0]),
        "laplace": curve(&models[1]),
        "nsst": curve(&models[2]),
    }))
}

/// One simulated measurement set, estimated with the matched and the
/// Gaussian likelihood; both estimates are aligned onto the truth.
pub fn estimate_pair_value(kind: &str, n_points: usize, noise: &str, nu: u32, snr_db: f64, m: usize, seed: u64) -> Result<Value> {
    let truth = structure(kind, n_points, seed)?;
    let cfg = config(truth, family(noise)?, nu, vec![snr_db], m.max(1), 1, seed);
    cfg.validate().map_err(|e| e.to_string())?;
    let cell = Cell { structure: 0, family: 0, snr: 0, m: 0 };
    let outcome = cfg.run_repeat(cell, 0).map_err(|e| e.to_string())?;
    let truth = &cfg.structures[0];
    let side = |est: &PointSet| -> Result<Value> {
        Ok(json!({
            "points": points(&aligned_estimate(est, truth).map_err(|e| e.to_string())?),
            "opp_loss": opp_loss(est, truth).map_err(|e| e.to_string())?,
        }))
    };
    Ok(json!({
        "truth": points(truth),
        "matched": side(&outcome.matched.estimate)?,
        "mismatched": side(&outcome.mismatched.estimate)?,
    }))
}

/// Median OPP loss per SNR for both likelihoods on one generated triangle.
pub fn snr_sweep_value(noise: &str, nu: u32, m: usize, repeats: usize, seed: u64) -> Result<Value> {
    let truth = structure("triangle", 3, seed)?;
    let fam = family(noise)?;
    let grid: Vec<f64> = (0..7).map(|k| -10.0 + 5.0 * k as f64).collect();
    let cfg = config(truth, fam, nu, grid.clone(), m.max(1), repeats.max(1), seed);
    let table = summarize(&run_sweep(&cfg).map_err(|e| e.to_string())?);
    let id = cfg.structures[0].id();
    let median = |snr, lik| table.row(id, fam, snr, cfg.m_values[0], lik).map_or(f64::NAN, |r| r.percentiles.p50);
    Ok(json!({
        "snr_db": grid,
        "matched": grid.iter().map(|&s| median(s, fam)).collect::<Vec<_>>(),
        "mismatched": grid.iter().map(|&s| median(s, NoiseFamily::Gaussian)).collect::<Vec<_>>(),
    }))
}

fn to_js(v: Result<Value>) -> std::result::Result<String, JsValue> {
    v.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn density_curves(variance: f64, nu: u32, half_width: f64, samples: usize) -> std::result::Result<String, JsValue> {
    to_js(density_curves_value(variance, nu, half_width, samples))
}

#[wasm_bindgen]
pub fn estimate_pair(kind: &str, n_points: usize, noise: &str, nu: u32, snr_db: f64, m: usize, seed: u32) -> std::result::Result<String, JsValue> {
    to_js(estimate_pair_value(kind, n_points, noise, nu, snr_db, m, seed as u64))
}

#[wasm_bindgen]
pub fn snr_sweep(noise: &str, nu: u32, m: usize, repeats: usize, seed: u32) -> std::result::Result<String, JsValue> {
    to_js(snr_sweep_value(noise, nu, m, repeats, seed as u64))
}
