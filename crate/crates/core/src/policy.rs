//! Configuration policies.
//!
//! All learned policies share the same search: sample actions uniformly,
//! score `(state, action)` with a PE predictor, keep the best. NANO keeps the
//! argmax; the probabilistic variant draws uniformly from the top
//! `1 - kappa` fraction. Ties between equal predictions go to the action with
//! the lower resource usage, then to the lexicographically smaller action.

use std::cmp::Ordering;

use rand::Rng;

use crate::attacker::{attacked_state, AttackVector};
use crate::dataset::{training_pairs, TransitionSet};
use crate::domain::{
    features, normalize_state, resource_usage, ConfigAction, NetworkState, PerfRecord,
    ACTION_RANGES, FEATURE_DIM, STATE_DIM,
};
use crate::error::{Error, Result};
use crate::gpr::GprModel;
use crate::linalg::{Cholesky, Matrix};
use crate::mlp::MlpModel;
use crate::seed;

pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_KAPPA: f64 = 0.99;

/// Scores normalized `(state, action)` feature rows.
pub trait PePredictor: Sync {
    fn predict_batch(&self, xs: &[[f64; FEATURE_DIM]]) -> Result<Vec<f64>>;
}

impl PePredictor for MlpModel {
    fn predict_batch(&self, xs: &[[f64; FEATURE_DIM]]) -> Result<Vec<f64>> {
        self.forward_batch(xs)
    }
}

impl PePredictor for GprModel {
    fn predict_batch(&self, xs: &[[f64; FEATURE_DIM]]) -> Result<Vec<f64>> {
        if self.dim() != FEATURE_DIM {
            return Err(Error::DimensionMismatch {
                expected: FEATURE_DIM,
                got: self.dim(),
            });
        }
        Ok(xs.iter().map(|x| self.predict_mean(x)).collect())
    }
}

/// Wraps a plain function as a predictor.
pub struct FnPredictor<F>(pub F);

impl<F> PePredictor for FnPredictor<F>
where
    F: Fn(&[f64; FEATURE_DIM]) -> f64 + Sync,
{
    fn predict_batch(&self, xs: &[[f64; FEATURE_DIM]]) -> Result<Vec<f64>> {
        Ok(xs.iter().map(|x| (self.0)(x)).collect())
    }
}

/// Ordinary least squares on `[features, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// Eight slopes followed by the intercept.
    pub weights: [f64; FEATURE_DIM + 1],
}

impl LinearModel {
    pub fn predict(&self, x: &[f64; FEATURE_DIM]) -> f64 {
        x.iter()
            .zip(&self.weights)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + self.weights[FEATURE_DIM]
    }
}

impl PePredictor for LinearModel {
    fn predict_batch(&self, xs: &[[f64; FEATURE_DIM]]) -> Result<Vec<f64>> {
        Ok(xs.iter().map(|x| self.predict(x)).collect())
    }
}

const LREG_JITTER: f64 = 1e-8;

pub fn lreg_fit_xy(xs: &[[f64; FEATURE_DIM]], ys: &[f64]) -> Result<LinearModel> {
    const P: usize = FEATURE_DIM + 1;
    if xs.len() < P || xs.len() != ys.len() {
        return Err(Error::Validation {
            field: "lreg",
            reason: format!("need at least {P} transitions, got {}", xs.len()),
        });
    }
    let mut xtx = Matrix::zeros(P, P);
    let mut xty = [0.0; P];
    for (x, &y) in xs.iter().zip(ys) {
        let row: [f64; P] = std::array::from_fn(|i| if i < FEATURE_DIM { x[i] } else { 1.0 });
        for i in 0..P {
            xty[i] += row[i] * y;
            for j in 0..=i {
                xtx[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..P {
        xtx[(i, i)] += LREG_JITTER;
    }
    let chol = Cholesky::new(&xtx).map_err(|e| Error::Validation {
        field: "lreg",
        reason: format!("design matrix rank deficient: {e}"),
    })?;
    let w = chol.solve(&xty);
    Ok(LinearModel {
        weights: std::array::from_fn(|i| w[i]),
    })
}

/// L-REG baseline fit.
pub fn lreg_fit(records: &[PerfRecord]) -> Result<LinearModel> {
    let (xs, ys) = training_pairs(records)?;
    lreg_fit_xy(&xs, &ys)
}

pub fn lreg_predict(w: &LinearModel, s: &NetworkState, a: &ConfigAction) -> Result<f64> {
    Ok(w.predict(&features(&normalize_state(s)?, a)))
}

/// R-REG baseline: GP regression of PE on a deterministic subsample.
pub fn rreg_fit(
    records: &[PerfRecord],
    max_points: usize,
    lengthscale: f64,
    noise: f64,
    seed: u64,
) -> Result<GprModel> {
    let mut idx: Vec<usize> = (0..records.len()).collect();
    if idx.len() > max_points {
        let mut rng = seed::rng(seed::derive(seed, "rreg-subsample"));
        rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut rng);
        idx.truncate(max_points);
        idx.sort_unstable();
    }
    let subset: Vec<PerfRecord> = idx.iter().map(|&i| records[i].clone()).collect();
    let (xs, ys) = training_pairs(&subset)?;
    GprModel::fit(
        FEATURE_DIM,
        xs.into_iter().map(|x| x.to_vec()).collect(),
        ys,
        lengthscale,
        noise,
    )
}

/// Uniform independent draws over the action ranges.
pub fn sample_actions(n: usize, seed: u64) -> Vec<ConfigAction> {
    let mut rng = seed::rng(seed::derive(seed, "action-samples"));
    (0..n)
        .map(|_| {
            ConfigAction::from_array(std::array::from_fn(|i| {
                let r = ACTION_RANGES[i];
                rng.random_range(r.lo..=r.hi)
            }))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Choice {
    pub action: ConfigAction,
    pub predicted: f64,
}

fn tie_break(a: &ConfigAction, b: &ConfigAction) -> Ordering {
    let ua = resource_usage(a).unwrap_or(f64::INFINITY);
    let ub = resource_usage(b).unwrap_or(f64::INFINITY);
    ua.total_cmp(&ub).then_with(|| {
        a.to_array()
            .iter()
            .zip(b.to_array())
            .map(|(x, y)| x.total_cmp(&y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Indices of `actions` from best to worst prediction.
pub fn rank(actions: &[ConfigAction], predictions: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..actions.len()).collect();
    order.sort_by(|&i, &j| {
        predictions[j]
            .total_cmp(&predictions[i])
            .then_with(|| tie_break(&actions[i], &actions[j]))
            .then(i.cmp(&j))
    });
    order
}

fn score(
    s: &NetworkState,
    predictor: &dyn PePredictor,
    actions: &[ConfigAction],
) -> Result<Vec<f64>> {
    let ns = normalize_state(s)?;
    let xs: Vec<_> = actions.iter().map(|a| features(&ns, a)).collect();
    predictor.predict_batch(&xs)
}

/// NANO: argmax of predicted PE over `n_samples` sampled actions.
pub fn nano_select(
    s: &NetworkState,
    predictor: &dyn PePredictor,
    n_samples: usize,
    seed: u64,
) -> Result<Choice> {
    if n_samples == 0 {
        return Err(Error::Validation {
            field: "n_samples",
            reason: "must be at least 1".into(),
        });
    }
    let actions = sample_actions(n_samples, seed);
    let preds = score(s, predictor, &actions)?;
    let mut best = 0;
    for i in 1..actions.len() {
        let better = match preds[i].total_cmp(&preds[best]) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => tie_break(&actions[i], &actions[best]).is_lt(),
        };
        if better {
            best = i;
        }
    }
    Ok(Choice {
        action: actions[best],
        predicted: preds[best],
    })
}

/// Number of top-ranked actions kept for a given `kappa`.
pub fn kept_count(n: usize, kappa: f64) -> usize {
    // guard against (1 - 0.99) * 1000 = 10.000000000000009
    let k = ((1.0 - kappa) * n as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(n)
}

/// Uniform draw from the actions ranked in the top `1 - kappa` fraction.
pub fn probabilistic_select(
    s: &NetworkState,
    predictor: &dyn PePredictor,
    n_samples: usize,
    kappa: f64,
    seed: u64,
) -> Result<Choice> {
    if n_samples == 0 {
        return Err(Error::Validation {
            field: "n_samples",
            reason: "must be at least 1".into(),
        });
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::Validation {
            field: "kappa",
            reason: format!("{kappa} outside (0, 1]"),
        });
    }
    let actions = sample_actions(n_samples, seed);
    let preds = score(s, predictor, &actions)?;
    let order = rank(&actions, &preds);
    let k = kept_count(n_samples, kappa);
    let pick = if k == 1 {
        0
    } else {
        seed::rng(seed::derive(seed, "kept-pick")).random_range(0..k)
    };
    let i = order[pick];
    Ok(Choice {
        action: actions[i],
        predicted: preds[i],
    })
}

/// Ground-truth best grid action per grid state.
#[derive(Debug, Clone)]
pub struct OptimalOracle {
    states: Vec<NetworkState>,
    normalized: Vec<[f64; STATE_DIM]>,
    best: Vec<(ConfigAction, f64)>,
    half_cell: [f64; STATE_DIM],
}

impl OptimalOracle {
    pub fn new(ts: &TransitionSet) -> Result<Self> {
        let states = ts.states();
        if states.is_empty() {
            return Err(Error::Validation {
                field: "oracle",
                reason: "empty transition set".into(),
            });
        }
        let mut best = Vec::with_capacity(states.len());
        for s in &states {
            let recs: Vec<&PerfRecord> = ts.records_for(s).collect();
            let actions: Vec<ConfigAction> = recs.iter().map(|r| r.action).collect();
            let pes: Vec<f64> = recs.iter().map(|r| r.pe).collect();
            let i = rank(&actions, &pes)[0];
            best.push((actions[i], pes[i]));
        }
        let normalized: Vec<[f64; STATE_DIM]> = states
            .iter()
            .map(|s| normalize_state(s).map(|n| n.0))
            .collect::<Result<_>>()?;
        let half_cell = std::array::from_fn(|d| {
            let mut vals: Vec<f64> = normalized.iter().map(|v| v[d]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            vals.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max) / 2.0
        });
        Ok(Self {
            states,
            normalized,
            best,
            half_cell,
        })
    }

    pub fn states(&self) -> &[NetworkState] {
        &self.states
    }

    /// Nearest grid state to `s` (after the attack, if any).
    pub fn snap(&self, s: &NetworkState, attack: Option<&AttackVector>) -> Result<usize> {
        let target = match attack {
            Some(v) => attacked_state(s, v)?,
            None => *s,
        };
        let t = normalize_state(&target)?.0;
        let (idx, _) = self
            .normalized
            .iter()
            .enumerate()
            .map(|(i, g)| (i, g.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("oracle has states");
        let g = &self.normalized[idx];
        for d in 0..STATE_DIM {
            if (g[d] - t[d]).abs() > self.half_cell[d] + 1e-9 {
                return Err(Error::OffGrid(target.to_array()));
            }
        }
        Ok(idx)
    }

    /// Best grid action and its recorded PE at the (attacked, snapped) state.
    pub fn select(&self, s: &NetworkState, attack: Option<&AttackVector>) -> Result<(ConfigAction, f64)> {
        Ok(self.best[self.snap(s, attack)?])
    }
}

pub fn optimal_select(
    s: &NetworkState,
    oracle: &TransitionSet,
    attack: Option<&AttackVector>,
) -> Result<ConfigAction> {
    OptimalOracle::new(oracle)?.select(s, attack).map(|(a, _)| a)
}

/// A configuration policy: observes the pre-attack state and picks an action.
/// Only the Optimal baseline is told the attack.
pub trait Policy: Sync {
    fn act(&self, s: &NetworkState, attack: Option<&AttackVector>) -> Result<ConfigAction>;
}

impl<F> Policy for F
where
    F: Fn(&NetworkState, Option<&AttackVector>) -> Result<ConfigAction> + Sync,
{
    fn act(&self, s: &NetworkState, attack: Option<&AttackVector>) -> Result<ConfigAction> {
        self(s, attack)
    }
}

#[derive(Clone, Copy)]
pub enum PolicyKind<'a> {
    Nano {
        model: &'a MlpModel,
        n_samples: usize,
    },
    NanoProbabilistic {
        model: &'a MlpModel,
        n_samples: usize,
        kappa: f64,
    },
    Lreg {
        weights: &'a LinearModel,
        n_samples: usize,
    },
    Rreg {
        gpr: &'a GprModel,
        n_samples: usize,
    },
    Optimal {
        oracle: &'a OptimalOracle,
    },
}

impl PolicyKind<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Nano { .. } => "NANO",
            PolicyKind::NanoProbabilistic { .. } => "RoNet",
            PolicyKind::Lreg { .. } => "L-REG",
            PolicyKind::Rreg { .. } => "R-REG",
            PolicyKind::Optimal { .. } => "Optimal",
        }
    }
}

/// A policy plus the seed its per-state action samples derive from.
#[derive(Clone, Copy)]
pub struct SeededPolicy<'a> {
    pub kind: PolicyKind<'a>,
    pub seed: u64,
}

impl<'a> SeededPolicy<'a> {
    pub fn new(kind: PolicyKind<'a>, seed: u64) -> Self {
        Self { kind, seed }
    }

    fn state_seed(&self, s: &NetworkState) -> u64 {
        seed::mix_f64(self.seed, &s.to_array())
    }
}

impl Policy for SeededPolicy<'_> {
    fn act(&self, s: &NetworkState, attack: Option<&AttackVector>) -> Result<ConfigAction> {
        let seed = self.state_seed(s);
        let choice = match self.kind {
            PolicyKind::Nano { model, n_samples } => nano_select(s, model, n_samples, seed)?,
            PolicyKind::NanoProbabilistic {
                model,
                n_samples,
                kappa,
            } => probabilistic_select(s, model, n_samples, kappa, seed)?,
            PolicyKind::Lreg { weights, n_samples } => nano_select(s, weights, n_samples, seed)?,
            PolicyKind::Rreg { gpr, n_samples } => nano_select(s, gpr, n_samples, seed)?,
            PolicyKind::Optimal { oracle } => return oracle.select(s, attack).map(|(a, _)| a),
        };
        Ok(choice.action)
    }
}
