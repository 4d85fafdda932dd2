//! Resolved run configuration. Every default used by the pipeline lives here
//! so a run directory's `config.resolved.toml` fully describes the run.

use serde::{Deserialize, Serialize};

use crate::attacker::{AttackConfig, UcbParams};
use crate::error::{Error, Result};
use crate::gpr::{DEFAULT_LENGTHSCALE, DEFAULT_NOISE};
use crate::mlp::{TrainConfig, DEFAULT_LAYER_DIMS};
use crate::netsim::SimConfig;
use crate::policy::{DEFAULT_KAPPA, DEFAULT_SAMPLES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: String,
    /// Tag used in `data/transitions-<tag>.jsonl` and `data/attacks-<tag>.jsonl`.
    pub tag: String,
    pub sim: SimConfig,
    pub grid: GridConfig,
    pub model: ModelConfig,
    pub policy: PolicyConfig,
    pub attack: AttackSection,
    pub defense: DefenseConfig,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub levels: usize,
    /// When set, keep only every `action_stride`-th grid action (CI runs).
    pub action_stride: usize,
    /// Fraction of grid states held out from training for policy evaluation.
    pub holdout_fraction: f64,
    /// Fraction of training pairs held out for validation loss.
    pub validation_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub layer_dims: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// NANO is evaluated on the held-out states every this many epochs.
    pub curve_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub n_samples: usize,
    pub kappa: f64,
    /// Training points given to the GP baseline.
    pub rreg_points: usize,
    pub rreg_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    pub epsilon: f64,
    pub budget: usize,
    pub candidate_count: usize,
    pub delta: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub r: f64,
    pub lengthscale: f64,
    pub noise: f64,
    /// Number of grid states to attack; 0 attacks all of them.
    pub states: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefenseConfig {
    pub subgroups: usize,
    pub epochs_per_group: usize,
    /// Policy action plus auxiliary sampled actions per attacked state.
    pub actions_per_state: usize,
    /// Attack -> defense cycles.
    pub cycles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub epsilon: Vec<f64>,
    pub kappa: Vec<f64>,
    pub threshold: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            out_dir: "runs/default".into(),
            tag: "grid".into(),
            sim: SimConfig::default(),
            grid: GridConfig::default(),
            model: ModelConfig::default(),
            policy: PolicyConfig::default(),
            attack: AttackSection::default(),
            defense: DefenseConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            levels: 3,
            action_stride: 1,
            holdout_fraction: 0.2,
            validation_fraction: 0.2,
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            layer_dims: DEFAULT_LAYER_DIMS.to_vec(),
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            batch_size: t.batch_size,
            curve_every: 1,
        }
    }
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            n_samples: DEFAULT_SAMPLES,
            kappa: DEFAULT_KAPPA,
            rreg_points: 800,
            rreg_noise: 1e-2,
        }
    }
}

impl Default for AttackSection {
    fn default() -> Self {
        let u = UcbParams::default();
        Self {
            epsilon: 0.2,
            budget: 30,
            candidate_count: 2000,
            delta: u.delta,
            eta1: u.eta1,
            eta2: u.eta2,
            r: u.r,
            lengthscale: DEFAULT_LENGTHSCALE,
            noise: DEFAULT_NOISE,
            states: 0,
        }
    }
}

impl Default for DefenseConfig {
    fn default() -> Self {
        Self {
            subgroups: 8,
            epochs_per_group: 10,
            actions_per_state: 17,
            cycles: 1,
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            epsilon: vec![0.05, 0.1, 0.2],
            kappa: vec![0.9, 0.95, 0.99, 1.0],
            threshold: vec![100.0, 150.0, 200.0, 300.0],
        }
    }
}

impl RunConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.model.epochs,
            learning_rate: self.model.learning_rate,
            momentum: self.model.momentum,
            batch_size: self.model.batch_size,
            seed,
        }
    }

    pub fn attack_config(&self) -> AttackConfig {
        AttackConfig {
            epsilon: self.attack.epsilon,
            budget: self.attack.budget,
            candidate_count: self.attack.candidate_count,
            ucb: UcbParams {
                delta: self.attack.delta,
                eta1: self.attack.eta1,
                eta2: self.attack.eta2,
                r: self.attack.r,
            },
            lengthscale: self.attack.lengthscale,
            noise: self.attack.noise,
        }
    }

    /// Simulator settings with the run seed folded in.
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            seed: self.sim.seed ^ self.seed,
            ..self.sim.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.grid.levels < 2 {
            return bad("grid.levels must be at least 2");
        }
        if self.grid.action_stride == 0 {
            return bad("grid.action_stride must be at least 1");
        }
        if !(0.0..1.0).contains(&self.grid.holdout_fraction)
            || !(0.0..1.0).contains(&self.grid.validation_fraction)
        {
            return bad("grid fractions must lie in [0, 1)");
        }
        if self.model.epochs == 0 || self.model.batch_size == 0 {
            return bad("model.epochs and model.batch_size must be positive");
        }
        if self.policy.n_samples == 0 || !(self.policy.kappa > 0.0 && self.policy.kappa <= 1.0) {
            return bad("policy.n_samples must be positive and policy.kappa in (0, 1]");
        }
        if self.attack.budget == 0 || self.attack.candidate_count == 0 || !(self.attack.epsilon >= 0.0) {
            return bad("attack.budget/candidate_count must be positive and epsilon non-negative");
        }
        if self.defense.subgroups == 0 || self.defense.actions_per_state == 0 || self.defense.cycles == 0 {
            return bad("defense.subgroups, actions_per_state and cycles must be positive");
        }
        Ok(())
    }
}
