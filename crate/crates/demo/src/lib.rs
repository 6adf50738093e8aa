//! Browser bindings: one sampled path, the two bound curves, and a coupling
//! tail estimate against its bound, all for the model with exponential
//! waits, a fixed elimination rate and uniform intakes.
//!
//! Every export returns a JSON string; the page parses it.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use exposure::coupling::run_three_phase;
use exposure::distributions::{DistributionSpec, Family};
use exposure::estimators::tail_curve;
use exposure::estimators::EstimatorKind;
use exposure::pdmp_sim::{sample_on_grid, simulate_path, Model, ProcessState};
use exposure::rates::{compute_rates, InitialMoments, RateReport, RateSettings};
use exposure::rng::{block_index, stream};
use exposure::Result;

fn model(rate: f64, theta: f64, intake_max: f64) -> Result<Model> {
    Model::new(
        DistributionSpec::intake(Family::Uniform { lo: 0.0, hi: intake_max })?,
        DistributionSpec::inter_arrival(Family::Exponential { rate })?,
        DistributionSpec::metabolic(Family::Dirac { value: theta })?,
    )
}

fn rates(m: &Model, x0: f64, x0_tilde: f64) -> Result<RateReport> {
    let moments = InitialMoments { mean_sum: x0 + x0_tilde, mean_max: x0.max(x0_tilde) };
    let settings = RateSettings { age_draws: 10_000, ..RateSettings::default() };
    compute_rates(m, moments, &settings)
}

fn grid(horizon: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| horizon * i as f64 / n as f64).collect()
}

#[derive(Serialize)]
struct PathOut {
    t: Vec<f64>,
    x: Vec<f64>,
    jumps: Vec<f64>,
}

pub fn path_json(rate: f64, theta: f64, intake_max: f64, x0: f64, horizon: f64, seed: u64) -> Result<String> {
    let m = model(rate, theta, intake_max)?;
    let mut rng = stream(seed, 0);
    let path = simulate_path(ProcessState::new(x0, theta, 0.0)?, &m, horizon, &mut rng)?;
    let ts: Vec<f64> = (0..=400).map(|i| horizon * i as f64 / 400.0).collect();
    let rows = sample_on_grid(&path.log, &ts)?;
    Ok(serde_json::to_string(&PathOut {
        t: ts,
        x: rows.iter().map(|r| r.1.x).collect(),
        jumps: path.log.jump_times.clone(),
    })?)
}

#[derive(Serialize)]
struct CurvesOut {
    t: Vec<f64>,
    tv: Vec<f64>,
    w1: Vec<f64>,
    tv_rate: Option<f64>,
    w1_rate: Option<f64>,
    method1_rate: Option<f64>,
    method2_rate: Option<f64>,
}

pub fn curves_json(rate: f64, theta: f64, intake_max: f64, x0: f64, x0_tilde: f64, horizon: f64) -> Result<String> {
    let m = model(rate, theta, intake_max)?;
    let r = rates(&m, x0, x0_tilde)?;
    let t = grid(horizon, 200);
    Ok(serde_json::to_string(&CurvesOut {
        tv: t.iter().map(|&s| r.tv_curve.evaluate(s)).collect(),
        w1: t.iter().map(|&s| r.w1_curve.evaluate(s)).collect(),
        t,
        tv_rate: r.tv_curve.rate(),
        w1_rate: r.w1_curve.rate(),
        method1_rate: r.exp_case.as_ref().map(|e| e.rate_method1),
        method2_rate: r.exp_case.as_ref().map(|e| e.rate_method2),
    })?)
}

#[derive(Serialize)]
struct TailOut {
    t: Vec<f64>,
    estimate: Vec<f64>,
    ci_low: Vec<f64>,
    ci_high: Vec<f64>,
    bound: Vec<f64>,
}

/// `P(tau > t)` from `n` three-phase runs per grid time, 20 grid times.
#[allow(clippy::too_many_arguments)]
pub fn tail_json(
    rate: f64,
    theta: f64,
    intake_max: f64,
    x0: f64,
    x0_tilde: f64,
    horizon: f64,
    n: usize,
    seed: u64,
) -> Result<String> {
    let m = model(rate, theta, intake_max)?;
    let r = rates(&m, x0, x0_tilde)?;
    let t = grid(horizon, 20);
    let (y, yt) = (ProcessState::new(x0, theta, 0.0)?, ProcessState::new(x0_tilde, theta, 0.0)?);
    let mut out = TailOut { t: t.clone(), estimate: vec![], ci_low: vec![], ci_high: vec![], bound: vec![] };
    for (k, &s) in t.iter().enumerate() {
        let params = exposure::coupling::CouplingPhaseParams {
            alpha: r.split.alpha,
            beta: r.split.beta,
            epsilon_tv: r.split.epsilon_at(s),
            age: None,
        };
        let mut taus = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = stream(seed, block_index(k as u32, i as u32));
            taus.push(run_three_phase(y, yt, &params, &m, s, &mut rng)?.report.tau);
        }
        let c = tail_curve(&taus, &[s], EstimatorKind::CouplingTailTv)?;
        out.estimate.push(c.values[0]);
        out.ci_low.push(c.ci_low[0]);
        out.ci_high.push(c.ci_high[0]);
        out.bound.push(r.tv_curve.evaluate(s));
    }
    Ok(serde_json::to_string(&out)?)
}

fn js(r: Result<String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn sample_path(rate: f64, theta: f64, intake_max: f64, x0: f64, horizon: f64, seed: u64) -> Result<String, JsValue> {
    js(path_json(rate, theta, intake_max, x0, horizon, seed))
}

#[wasm_bindgen]
pub fn bound_curves(
    rate: f64,
    theta: f64,
    intake_max: f64,
    x0: f64,
    x0_tilde: f64,
    horizon: f64,
) -> Result<String, JsValue> {
    js(curves_json(rate, theta, intake_max, x0, x0_tilde, horizon))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn coupling_tail(
    rate: f64,
    theta: f64,
    intake_max: f64,
    x0: f64,
    x0_tilde: f64,
    horizon: f64,
    n: usize,
    seed: u64,
) -> Result<String, JsValue> {
    js(tail_json(rate, theta, intake_max, x0, x0_tilde, horizon, n, seed))
}
