//! Robust defense: retrain the predictor on attacked outcomes keyed by the
//! pre-attack state, subgroup by subgroup, and evaluate policies under the
//! stored attacks.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::attacker::{attacked_state, AttackTrace, AttackVector};
use crate::domain::{features, normalize_state, ConfigAction, NetworkState, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::mlp::{MlpModel, TrainConfig};
use crate::netsim::GroundTruth;
use crate::policy::{sample_actions, Policy};
use crate::{par, seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackedEntry {
    pub state: NetworkState,
    pub action: ConfigAction,
    /// PE achieved at the attacked state; the attack itself is not a feature.
    pub attacked_pe: f64,
    pub subgroup: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttackedDataset {
    pub entries: Vec<AttackedEntry>,
}

impl AttackedDataset {
    pub fn training_pairs(&self, max_group: usize) -> Result<(Vec<[f64; FEATURE_DIM]>, Vec<f64>)> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for e in self.entries.iter().filter(|e| e.subgroup <= max_group) {
            xs.push(features(&normalize_state(&e.state)?, &e.action));
            ys.push(e.attacked_pe);
        }
        Ok((xs, ys))
    }
}

/// Best attack per state, keyed by the state's bit pattern.
#[derive(Debug, Clone, Default)]
pub struct AttackLookup {
    map: HashMap<[u64; 5], AttackVector>,
}

impl AttackLookup {
    pub fn from_traces(traces: &[AttackTrace]) -> Self {
        Self {
            map: traces
                .iter()
                .map(|t| (key(&t.state), t.best().attack))
                .collect(),
        }
    }

    pub fn get(&self, s: &NetworkState) -> Option<&AttackVector> {
        self.map.get(&key(s))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

fn key(s: &NetworkState) -> [u64; 5] {
    s.to_array().map(f64::to_bits)
}

/// Assigns each state to one of `subgroups` groups of near-equal size,
/// ordered by a salted hash of the state.
pub fn subgroup_assignment(states: &[NetworkState], subgroups: usize, salt: u64) -> Result<Vec<usize>> {
    if subgroups == 0 {
        return Err(Error::Validation {
            field: "subgroups",
            reason: "must be at least 1".into(),
        });
    }
    let mut order: Vec<(u64, usize)> = states
        .iter()
        .enumerate()
        .map(|(i, s)| (seed::mix(salt, key(s)), i))
        .collect();
    order.sort_unstable();
    let n = states.len();
    let mut groups = vec![0; n];
    for (rank, (_, i)) in order.into_iter().enumerate() {
        groups[i] = rank * subgroups / n.max(1);
    }
    Ok(groups)
}

/// For every trace: the policy's own action plus `actions_per_state - 1`
/// sampled actions, each scored at the state's best attack.
pub fn build_attacked_dataset(
    traces: &[AttackTrace],
    policy: &dyn Policy,
    oracle: &dyn GroundTruth,
    actions_per_state: usize,
    subgroups: usize,
    seed: u64,
) -> Result<AttackedDataset> {
    if actions_per_state == 0 {
        return Err(Error::Validation {
            field: "actions_per_state",
            reason: "must be at least 1".into(),
        });
    }
    let states: Vec<NetworkState> = traces.iter().map(|t| t.state).collect();
    let groups = subgroup_assignment(&states, subgroups, seed::derive(seed, "subgroups"))?;
    let per_state = par::try_map(&traces.iter().zip(groups).collect::<Vec<_>>(), |(t, g)| {
        let v = t.best().attack;
        let target = attacked_state(&t.state, &v)?;
        let mut actions = vec![policy.act(&t.state, None)?];
        let aux_seed = seed::mix_f64(seed::derive(seed, "aux-actions"), &t.state.to_array());
        actions.extend(sample_actions(actions_per_state - 1, aux_seed));
        actions
            .into_iter()
            .map(|a| {
                Ok(AttackedEntry {
                    state: t.state,
                    action: a,
                    attacked_pe: oracle.pe(&target, &a)?,
                    subgroup: *g,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(AttackedDataset {
        entries: per_state.into_iter().flatten().collect(),
    })
}

/// Cumulative staged retraining: stage `k` trains on subgroups `0..=k`.
/// `evaluate` runs after each stage and its results form the recovery curve.
pub fn retrain(
    model: &MlpModel,
    ds: &AttackedDataset,
    subgroups: usize,
    train: &TrainConfig,
    mut evaluate: impl FnMut(usize, &MlpModel) -> Result<f64>,
) -> Result<(MlpModel, Vec<f64>)> {
    if subgroups == 0 {
        return Err(Error::Validation {
            field: "subgroups",
            reason: "must be at least 1".into(),
        });
    }
    let mut m = model.clone();
    let mut curve = Vec::with_capacity(subgroups);
    for stage in 0..subgroups {
        let (xs, ys) = ds.training_pairs(stage)?;
        if !xs.is_empty() {
            let cfg = TrainConfig {
                seed: seed::mix(train.seed, [stage as u64]),
                ..*train
            };
            m.train(&xs, &ys, &cfg, |_, _, _| Ok(()))?;
        }
        curve.push(evaluate(stage, &m)?);
    }
    Ok((m, curve))
}

/// Mean achieved PE over `states`. The policy sees the pre-attack state;
/// the oracle scores its action at the attacked state when an attack exists.
pub fn evaluate_policy(
    policy: &dyn Policy,
    states: &[NetworkState],
    attacks: Option<&AttackLookup>,
    oracle: &dyn GroundTruth,
) -> Result<f64> {
    let pes = per_state_pe(policy, states, attacks, oracle)?;
    Ok(pes.iter().sum::<f64>() / pes.len() as f64)
}

pub fn per_state_pe(
    policy: &dyn Policy,
    states: &[NetworkState],
    attacks: Option<&AttackLookup>,
    oracle: &dyn GroundTruth,
) -> Result<Vec<f64>> {
    if states.is_empty() {
        return Err(Error::Validation {
            field: "states",
            reason: "evaluation needs at least one state".into(),
        });
    }
    par::try_map(states, |s| {
        let v = attacks.and_then(|l| l.get(s));
        let a = policy.act(s, v)?;
        let scored = match v {
            Some(v) => attacked_state(s, v)?,
            None => *s,
        };
        oracle.pe(&scored, &a)
    })
}
