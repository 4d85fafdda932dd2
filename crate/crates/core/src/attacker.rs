//! Learn-to-attack: per-state black-box Bayesian optimization of an
//! l∞-bounded perturbation of the normalized state, minimizing the PE the
//! policy achieves. The policy acts on the pre-attack state; PE is measured
//! at the attacked state with that action.
//!
//! The GP surrogate models the *negative* PE of each queried attack, so
//! maximizing the GP-UCB score seeks attacks that drive PE down.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    denormalize_state, normalize_state, ConfigAction, NetworkState, STATE_DIM,
};
use crate::error::{Error, Result};
use crate::gpr::{GprModel, DEFAULT_LENGTHSCALE, DEFAULT_NOISE};
use crate::netsim::GroundTruth;
use crate::policy::Policy;
use crate::seed;

/// State perturbation in normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackVector(pub [f64; STATE_DIM]);

impl AttackVector {
    pub const ZERO: Self = Self([0.0; STATE_DIM]);

    pub fn linf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// `s + v` in normalized space, clipped to `[0, 1]^5`, mapped back to raw units.
pub fn attacked_state(s: &NetworkState, v: &AttackVector) -> Result<NetworkState> {
    denormalize_state(&normalize_state(s)?.perturbed(&v.0))
}

/// Constants of the GP-UCB exploration schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UcbParams {
    pub delta: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub r: f64,
}

impl Default for UcbParams {
    fn default() -> Self {
        Self {
            delta: 0.1,
            eta1: 1.0,
            eta2: 1.0,
            r: 1.0,
        }
    }
}

/// `beta_t = 2 log(t^2 pi^2 / (3 delta)) + 2 d log(t^2 d eta2 r sqrt(log(4 d eta1 / delta)))`.
pub fn ucb_beta(t: usize, d: usize, p: &UcbParams) -> Result<f64> {
    if t == 0 || d == 0 {
        return Err(Error::Validation {
            field: "ucb_beta",
            reason: "t and d must be at least 1".into(),
        });
    }
    if !(p.delta > 0.0 && p.delta < 1.0) {
        return Err(Error::Validation {
            field: "delta",
            reason: format!("{} outside (0, 1)", p.delta),
        });
    }
    let (t, d) = (t as f64, d as f64);
    let log_checked = |name: &'static str, x: f64| {
        if x > 0.0 && x.is_finite() {
            Ok(x.ln())
        } else {
            Err(Error::Validation {
                field: name,
                reason: format!("logarithm argument {x} is not positive"),
            })
        }
    };
    let inner = log_checked("eta1", 4.0 * d * p.eta1 / p.delta)?;
    if !(inner > 0.0) {
        return Err(Error::Validation {
            field: "eta1",
            reason: format!("log(4 d eta1 / delta) = {inner} is not positive"),
        });
    }
    let first = log_checked("delta", t * t * PI * PI / (3.0 * p.delta))?;
    let second = log_checked("eta2", t * t * d * p.eta2 * p.r * inner.sqrt())?;
    Ok(2.0 * first + 2.0 * d * second)
}

/// Index of the candidate maximizing `mu + sqrt(beta) * sigma`; first wins ties.
pub fn next_attack_index(m: &GprModel, candidates: &[AttackVector], beta: f64) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Validation {
            field: "candidates",
            reason: "empty candidate set".into(),
        });
    }
    let w = beta.max(0.0).sqrt();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, c) in candidates.iter().enumerate() {
        let p = m.posterior(&c.0);
        let score = p.mean + w * p.std();
        if score > best.1 {
            best = (i, score);
        }
    }
    Ok(best.0)
}

pub fn next_attack(m: &GprModel, candidates: &[AttackVector], beta: f64) -> Result<AttackVector> {
    next_attack_index(m, candidates, beta).map(|i| candidates[i])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackQuery {
    pub attack: AttackVector,
    pub pe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackTrace {
    pub method: String,
    pub state: NetworkState,
    /// The action the policy chose from the pre-attack state.
    pub action: ConfigAction,
    pub queries: Vec<AttackQuery>,
    /// Index into `queries` of the lowest PE (first on ties).
    pub best: usize,
}

impl AttackTrace {
    fn new(method: &str, state: NetworkState, action: ConfigAction, queries: Vec<AttackQuery>) -> Self {
        let best = queries
            .iter()
            .enumerate()
            .fold(0, |b, (i, q)| if q.pe < queries[b].pe { i } else { b });
        Self {
            method: method.to_string(),
            state,
            action,
            queries,
            best,
        }
    }

    pub fn best(&self) -> &AttackQuery {
        &self.queries[self.best]
    }

    pub fn budget_used(&self) -> usize {
        self.queries.len()
    }

    /// Best PE found after each query.
    pub fn running_best(&self) -> Vec<f64> {
        self.queries
            .iter()
            .scan(f64::INFINITY, |m, q| {
                *m = m.min(q.pe);
                Some(*m)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub epsilon: f64,
    pub budget: usize,
    pub candidate_count: usize,
    pub ucb: UcbParams,
    pub lengthscale: f64,
    pub noise: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            budget: 30,
            candidate_count: 2000,
            ucb: UcbParams::default(),
            lengthscale: DEFAULT_LENGTHSCALE,
            noise: DEFAULT_NOISE,
        }
    }
}

impl AttackConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Validation {
                field: "epsilon",
                reason: format!("{} must be finite and non-negative", self.epsilon),
            });
        }
        if self.budget == 0 || self.candidate_count == 0 {
            return Err(Error::Validation {
                field: "budget",
                reason: "budget and candidate_count must be positive".into(),
            });
        }
        Ok(())
    }
}

fn uniform_attack(rng: &mut impl Rng, eps: f64) -> AttackVector {
    // unit draw scaled by eps so streams line up across budgets
    AttackVector(std::array::from_fn(|_| eps * rng.random_range(-1.0..=1.0)))
}

fn query(
    s: &NetworkState,
    a: &ConfigAction,
    v: AttackVector,
    oracle: &dyn GroundTruth,
) -> Result<AttackQuery> {
    let pe = oracle.pe(&attacked_state(s, &v)?, a)?;
    Ok(AttackQuery { attack: v, pe })
}

/// GP-UCB attack on one state.
pub fn bo_attack(
    s: &NetworkState,
    policy: &dyn Policy,
    oracle: &dyn GroundTruth,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<AttackTrace> {
    cfg.validate()?;
    let action = policy.act(s, None)?;
    let mut rng = seed::rng(seed::derive(seed, "bo-candidates"));
    let mut model = GprModel::empty(STATE_DIM, cfg.lengthscale, cfg.noise);
    let mut queries = Vec::with_capacity(cfg.budget);
    for t in 1..=cfg.budget {
        let candidates: Vec<AttackVector> = (0..cfg.candidate_count)
            .map(|_| uniform_attack(&mut rng, cfg.epsilon))
            .collect();
        let beta = ucb_beta(t, STATE_DIM, &cfg.ucb)?;
        let v = next_attack(&model, &candidates, beta)?;
        let q = query(s, &action, v, oracle)?;
        queries.push(q);
        if t < cfg.budget {
            model = model.with_point(q.attack.0.to_vec(), -q.pe)?;
        }
    }
    Ok(AttackTrace::new("BO", *s, action, queries))
}

/// Random-search baseline with the same query budget.
pub fn rn_attack(
    s: &NetworkState,
    policy: &dyn Policy,
    oracle: &dyn GroundTruth,
    epsilon: f64,
    budget: usize,
    seed: u64,
) -> Result<AttackTrace> {
    AttackConfig {
        epsilon,
        budget,
        ..AttackConfig::default()
    }
    .validate()?;
    let action = policy.act(s, None)?;
    let mut rng = seed::rng(seed::derive(seed, "rn-attacks"));
    let queries = (0..budget)
        .map(|_| query(s, &action, uniform_attack(&mut rng, epsilon), oracle))
        .collect::<Result<Vec<_>>>()?;
    Ok(AttackTrace::new("RN", *s, action, queries))
}

pub fn save_traces(traces: &[AttackTrace], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    for t in traces {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_traces(path: &Path) -> Result<Vec<AttackTrace>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: AttackTrace = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        if t.queries.is_empty() || t.best >= t.queries.len() {
            return Err(Error::MalformedLine {
                path: path.to_path_buf(),
                line: i + 1,
                reason: "trace without a valid best query".into(),
            });
        }
        out.push(t);
    }
    Ok(out)
}

/// Per-component mean and standard deviation of the best attacks.
pub fn attack_statistics(traces: &[AttackTrace]) -> [(f64, f64); STATE_DIM] {
    let n = traces.len().max(1) as f64;
    std::array::from_fn(|d| {
        let vals: Vec<f64> = traces.iter().map(|t| t.best().attack.0[d]).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    })
}
