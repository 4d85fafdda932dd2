//! Browser bindings. Each exported function takes plain numbers and returns
//! a JSON string so the page needs no generated type glue beyond the shim.

use ronet_core::attacker::{bo_attack, rn_attack, AttackConfig, AttackTrace};
use ronet_core::domain::{resource_usage, ConfigAction, NetworkState};
use ronet_core::netsim::{self, SimConfig, SimOracle};
use ronet_core::policy::Policy;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Widest attack scale the page offers.
pub const MAX_EPSILON: f64 = 0.5;
/// Largest query budget the page offers.
pub const MAX_BUDGET: usize = 60;
/// Largest heatmap side.
pub const MAX_RESOLUTION: usize = 26;

fn sim_config(threshold: f64, seed: u64) -> SimConfig {
    SimConfig {
        latency_threshold: threshold,
        seed,
        ..SimConfig::default()
    }
}

fn state(ul_size: f64, dl_size: f64, mcs_ul: f64, mcs_dl: f64, distance: f64) -> Result<NetworkState, String> {
    NetworkState::new(ul_size, dl_size, mcs_ul, mcs_dl, distance).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct PairReport {
    /// Lower edges of 10 ms latency bins, up to the last occupied bin.
    bin_ms: Vec<f64>,
    counts: Vec<usize>,
    completed: usize,
    generated: usize,
    prob: f64,
    usage: f64,
    pe: f64,
    mean_rtt: Option<f64>,
}

/// One simulation run of a (state, action) pair with a latency histogram.
#[allow(clippy::too_many_arguments)]
pub fn simulate_pair_json(
    ul_size: f64,
    dl_size: f64,
    mcs_ul: f64,
    mcs_dl: f64,
    distance: f64,
    bandwidth_ul: f64,
    bandwidth_dl: f64,
    cpu_ratio: f64,
    threshold: f64,
    seed: u64,
) -> Result<String, String> {
    let s = state(ul_size, dl_size, mcs_ul, mcs_dl, distance)?;
    let a = ConfigAction::new(bandwidth_ul, bandwidth_dl, cpu_ratio).map_err(|e| e.to_string())?;
    let cfg = sim_config(threshold, seed);
    let out = netsim::simulate_detailed(&s, &a, &cfg).map_err(|e| e.to_string())?;
    let rec = netsim::record_from_latencies(&s, &a, &out.rtts, threshold).map_err(|e| e.to_string())?;
    let width = 10.0;
    let bins = out.rtts.iter().map(|r| (r / width) as usize + 1).max().unwrap_or(0);
    let mut counts = vec![0usize; bins];
    for r in &out.rtts {
        counts[(r / width) as usize] += 1;
    }
    let report = PairReport {
        bin_ms: (0..bins).map(|i| i as f64 * width).collect(),
        counts,
        completed: out.rtts.len(),
        generated: out.generated,
        prob: rec.prob,
        usage: rec.usage,
        pe: rec.pe,
        mean_rtt: (!out.rtts.is_empty()).then(|| out.rtts.iter().sum::<f64>() / out.rtts.len() as f64),
    };
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Heatmap {
    bandwidth_ul: Vec<f64>,
    bandwidth_dl: Vec<f64>,
    /// Row-major: `pe[i][j]` at `bandwidth_ul[i]`, `bandwidth_dl[j]`.
    pe: Vec<Vec<f64>>,
    best: [f64; 3],
}

/// PE over an even bandwidth_ul x bandwidth_dl grid at a fixed CPU ratio.
#[allow(clippy::too_many_arguments)]
pub fn pe_heatmap_json(
    ul_size: f64,
    dl_size: f64,
    mcs_ul: f64,
    mcs_dl: f64,
    distance: f64,
    cpu_ratio: f64,
    threshold: f64,
    resolution: usize,
    seed: u64,
) -> Result<String, String> {
    if !(2..=MAX_RESOLUTION).contains(&resolution) {
        return Err(format!("resolution must lie in 2..={MAX_RESOLUTION}"));
    }
    let s = state(ul_size, dl_size, mcs_ul, mcs_dl, distance)?;
    let cfg = sim_config(threshold, seed);
    let axis: Vec<f64> = (0..resolution)
        .map(|i| 50.0 * i as f64 / (resolution - 1) as f64)
        .collect();
    let mut pe = Vec::with_capacity(resolution);
    // (pe, usage, action): highest PE, then lowest usage
    let mut best = (f64::NEG_INFINITY, f64::INFINITY, [0.0; 3]);
    for &ul in &axis {
        let mut row = Vec::with_capacity(resolution);
        for &dl in &axis {
            let a = ConfigAction::new(ul, dl, cpu_ratio).map_err(|e| e.to_string())?;
            let v = netsim::pe_of(&s, &a, &cfg).map_err(|e| e.to_string())?.pe;
            let usage = resource_usage(&a).map_err(|e| e.to_string())?;
            if v > best.0 || (v == best.0 && usage < best.1) {
                best = (v, usage, a.to_array());
            }
            row.push(v);
        }
        pe.push(row);
    }
    serde_json::to_string(&Heatmap {
        bandwidth_ul: axis.clone(),
        bandwidth_dl: axis,
        pe,
        best: best.2,
    })
    .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct AttackReport {
    clean_pe: f64,
    bo_running_best: Vec<f64>,
    rn_running_best: Vec<f64>,
    bo_best_attack: [f64; 5],
    rn_best_attack: [f64; 5],
}

/// BO and random attacks with equal budgets against a fixed configuration.
#[allow(clippy::too_many_arguments)]
pub fn attack_trace_json(
    ul_size: f64,
    dl_size: f64,
    mcs_ul: f64,
    mcs_dl: f64,
    distance: f64,
    bandwidth_ul: f64,
    bandwidth_dl: f64,
    cpu_ratio: f64,
    epsilon: f64,
    budget: usize,
    seed: u64,
) -> Result<String, String> {
    if !(0.0..=MAX_EPSILON).contains(&epsilon) {
        return Err(format!("epsilon must lie in [0, {MAX_EPSILON}]"));
    }
    if !(1..=MAX_BUDGET).contains(&budget) {
        return Err(format!("budget must lie in 1..={MAX_BUDGET}"));
    }
    let s = state(ul_size, dl_size, mcs_ul, mcs_dl, distance)?;
    let a = ConfigAction::new(bandwidth_ul, bandwidth_dl, cpu_ratio).map_err(|e| e.to_string())?;
    let fixed = move |_: &NetworkState, _: Option<&ronet_core::attacker::AttackVector>| Ok(a);
    let policy: &dyn Policy = &fixed;
    let oracle = SimOracle::new(sim_config(SimConfig::default().latency_threshold, seed));
    let cfg = AttackConfig {
        epsilon,
        budget,
        candidate_count: 500,
        ..AttackConfig::default()
    };
    let bo = bo_attack(&s, policy, &oracle, &cfg, seed).map_err(|e| e.to_string())?;
    let rn = rn_attack(&s, policy, &oracle, epsilon, budget, seed).map_err(|e| e.to_string())?;
    let clean_pe = netsim::pe_of(&s, &a, &oracle.cfg).map_err(|e| e.to_string())?.pe;
    let best = |t: &AttackTrace| t.best().attack.0;
    serde_json::to_string(&AttackReport {
        clean_pe,
        bo_running_best: bo.running_best(),
        rn_running_best: rn.running_best(),
        bo_best_attack: best(&bo),
        rn_best_attack: best(&rn),
    })
    .map_err(|e| e.to_string())
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate_pair(
    ul_size: f64,
    dl_size: f64,
    mcs_ul: f64,
    mcs_dl: f64,
    distance: f64,
    bandwidth_ul: f64,
    bandwidth_dl: f64,
    cpu_ratio: f64,
    threshold: f64,
    seed: u32,
) -> Result<String, JsValue> {
    simulate_pair_json(
        ul_size, dl_size, mcs_ul, mcs_dl, distance, bandwidth_ul, bandwidth_dl, cpu_ratio, threshold, seed.into(),
    )
    .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn pe_heatmap(
    ul_size: f64,
    dl_size: f64,
    mcs_ul: f64,
    mcs_dl: f64,
    distance: f64,
    cpu_ratio: f64,
    threshold: f64,
    resolution: u32,
    seed: u32,
) -> Result<String, JsValue> {
    pe_heatmap_json(
        ul_size, dl_size, mcs_ul, mcs_dl, distance, cpu_ratio, threshold, resolution as usize, seed.into(),
    )
    .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn attack_trace(
    ul_size: f64,
    dl_size: f64,
    mcs_ul: f64,
    mcs_dl: f64,
    distance: f64,
    bandwidth_ul: f64,
    bandwidth_dl: f64,
    cpu_ratio: f64,
    epsilon: f64,
    budget: u32,
    seed: u32,
) -> Result<String, JsValue> {
    attack_trace_json(
        ul_size, dl_size, mcs_ul, mcs_dl, distance, bandwidth_ul, bandwidth_dl, cpu_ratio, epsilon, budget as usize,
        seed.into(),
    )
    .map_err(|e| JsValue::from_str(&e))
}
