//! Stage orchestration shared by the command-line tool and the acceptance
//! tests. Every stage is a pure function of the resolved configuration and
//! its inputs; file outputs go under `RunConfig::out_dir`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::attacker::{self, bo_attack, rn_attack, AttackTrace};
use crate::config::RunConfig;
use crate::dataset::{self, TransitionSet};
use crate::defense::{self, AttackLookup};
use crate::domain::{NetworkState, PerfRecord, STATE_FIELDS};
use crate::error::{Error, Result};
use crate::gpr::GprModel;
use crate::mlp::MlpModel;
use crate::netsim::{self, GroundTruth, SimOracle};
use crate::policy::{self, LinearModel, OptimalOracle, Policy, PolicyKind, SeededPolicy};
use crate::{par, seed};

/// File layout of a run directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub root: PathBuf,
    tag: String,
}

impl RunPaths {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            root: PathBuf::from(&cfg.out_dir),
            tag: cfg.tag.clone(),
        }
    }

    pub fn transitions(&self) -> PathBuf {
        self.root.join("data").join(format!("transitions-{}.jsonl", self.tag))
    }
    pub fn attacks(&self) -> PathBuf {
        self.root.join("data").join(format!("attacks-{}.jsonl", self.tag))
    }
    pub fn random_attacks(&self) -> PathBuf {
        self.root.join("data").join(format!("attacks-{}-rn.jsonl", self.tag))
    }
    pub fn model(&self) -> PathBuf {
        self.root.join("models").join("nano.json")
    }
    pub fn defended_model(&self) -> PathBuf {
        self.root.join("models").join("defended.json")
    }
    pub fn resolved_config(&self) -> PathBuf {
        self.root.join("config.resolved.toml")
    }
    pub fn csv(&self, name: &str) -> PathBuf {
        self.root.join(format!("{name}.csv"))
    }
}

/// Writes the fully resolved configuration next to the run's outputs.
pub fn write_resolved_config(cfg: &RunConfig) -> Result<PathBuf> {
    let path = RunPaths::new(cfg).resolved_config();
    let text = toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?;
    write_file(&path, &text)?;
    Ok(path)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, contents)?;
    Ok(())
}

/// In-memory CSV table; numeric cells use Rust's shortest round-trip format.
pub struct Csv {
    w: csv::Writer<Vec<u8>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        Self { w }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.w.write_record(cells).expect("in-memory write");
    }

    pub fn save(self, path: &Path) -> Result<()> {
        let bytes = self.w.into_inner().map_err(|e| Error::Invariant(e.to_string()))?;
        write_file(path, &String::from_utf8_lossy(&bytes))
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

fn holdout_salt(cfg: &RunConfig) -> u64 {
    dataset::SPLIT_SALT ^ cfg.seed
}

fn sub_seed(cfg: &RunConfig, label: &str) -> u64 {
    seed::derive(cfg.seed, label)
}

pub fn oracle(cfg: &RunConfig) -> SimOracle {
    SimOracle::new(cfg.sim_config())
}

// ---------------------------------------------------------------- collect

pub fn collect_stage(cfg: &RunConfig) -> Result<TransitionSet> {
    cfg.validate()?;
    let states = dataset::grid_states(cfg.grid.levels)?;
    let actions: Vec<_> = dataset::grid_actions()
        .into_iter()
        .step_by(cfg.grid.action_stride)
        .collect();
    let ts = dataset::collect(&states, &actions, &cfg.sim_config())?;
    ts.save(&RunPaths::new(cfg).transitions())?;
    write_resolved_config(cfg)?;
    Ok(ts)
}

// ---------------------------------------------------------------- train

/// Grid states split into training and held-out evaluation states.
#[derive(Debug, Clone)]
pub struct StateSplit {
    pub train: Vec<NetworkState>,
    pub holdout: Vec<NetworkState>,
}

pub fn state_split(cfg: &RunConfig, ts: &TransitionSet) -> Result<StateSplit> {
    let (holdout, train): (Vec<_>, Vec<_>) = ts
        .states()
        .into_iter()
        .partition(|s| dataset::is_holdout_state(s, holdout_salt(cfg), cfg.grid.holdout_fraction));
    if train.is_empty() || holdout.is_empty() {
        return Err(Error::Validation {
            field: "grid.holdout_fraction",
            reason: format!(
                "split left {} training and {} held-out states",
                train.len(),
                holdout.len()
            ),
        });
    }
    Ok(StateSplit { train, holdout })
}

fn training_records(cfg: &RunConfig, ts: &TransitionSet) -> Vec<PerfRecord> {
    let salt = holdout_salt(cfg);
    ts.records
        .iter()
        .filter(|r| !dataset::is_holdout_state(&r.state, salt, cfg.grid.holdout_fraction))
        .cloned()
        .collect()
}

/// The regression baselines and the ground-truth oracle policy.
pub struct Baselines {
    pub lreg: LinearModel,
    pub rreg: GprModel,
    pub optimal: OptimalOracle,
}

impl Baselines {
    pub fn fit(cfg: &RunConfig, ts: &TransitionSet) -> Result<Self> {
        let records = training_records(cfg, ts);
        Ok(Self {
            lreg: policy::lreg_fit(&records)?,
            rreg: policy::rreg_fit(
                &records,
                cfg.policy.rreg_points,
                crate::gpr::DEFAULT_LENGTHSCALE,
                cfg.policy.rreg_noise,
                sub_seed(cfg, "rreg"),
            )?,
            optimal: OptimalOracle::new(ts)?,
        })
    }
}

/// Named policies evaluated side by side. All share the same action-sample seed.
pub struct Methods<'a> {
    cfg: &'a RunConfig,
    pub baselines: &'a Baselines,
}

impl<'a> Methods<'a> {
    pub fn new(cfg: &'a RunConfig, baselines: &'a Baselines) -> Self {
        Self { cfg, baselines }
    }

    fn seeded(&self, kind: PolicyKind<'a>) -> SeededPolicy<'a> {
        SeededPolicy::new(kind, sub_seed(self.cfg, "policy"))
    }

    pub fn nano(&self, model: &'a MlpModel) -> SeededPolicy<'a> {
        self.seeded(PolicyKind::Nano {
            model,
            n_samples: self.cfg.policy.n_samples,
        })
    }

    pub fn ronet(&self, model: &'a MlpModel) -> SeededPolicy<'a> {
        self.ronet_with_kappa(model, self.cfg.policy.kappa)
    }

    pub fn ronet_with_kappa(&self, model: &'a MlpModel, kappa: f64) -> SeededPolicy<'a> {
        self.seeded(PolicyKind::NanoProbabilistic {
            model,
            n_samples: self.cfg.policy.n_samples,
            kappa,
        })
    }

    pub fn lreg(&self) -> SeededPolicy<'a> {
        self.seeded(PolicyKind::Lreg {
            weights: &self.baselines.lreg,
            n_samples: self.cfg.policy.n_samples,
        })
    }

    pub fn rreg(&self) -> SeededPolicy<'a> {
        self.seeded(PolicyKind::Rreg {
            gpr: &self.baselines.rreg,
            n_samples: self.cfg.policy.n_samples,
        })
    }

    pub fn optimal(&self) -> SeededPolicy<'a> {
        self.seeded(PolicyKind::Optimal {
            oracle: &self.baselines.optimal,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub pe_nano: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub rows: Vec<EpochRow>,
    pub pe_lreg: f64,
    pub pe_rreg: f64,
    pub pe_optimal: f64,
    pub holdout: Vec<NetworkState>,
}

impl TrainOutcome {
    pub fn pe_nano(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.pe_nano)
    }
}

/// Trains the predictor on the non-held-out states and tracks every method's
/// mean PE on the held-out states. `curve_every` controls how often NANO is
/// evaluated during training (the final epoch is always evaluated).
pub fn train_stage(cfg: &RunConfig, ts: &TransitionSet) -> Result<TrainOutcome> {
    cfg.validate()?;
    let split = state_split(cfg, ts)?;
    let records = training_records(cfg, ts);
    let (train, val) = dataset::split_pairs(&records, holdout_salt(cfg), cfg.grid.validation_fraction);
    let (xs, ys) = dataset::training_pairs(&train)?;
    let (vx, vy) = dataset::training_pairs(&val)?;

    let baselines = Baselines::fit(cfg, ts)?;
    let methods = Methods::new(cfg, &baselines);
    let oracle = oracle(cfg);
    let eval = |p: &dyn Policy| defense::evaluate_policy(p, &split.holdout, None, &oracle);
    let pe_lreg = eval(&methods.lreg())?;
    let pe_rreg = eval(&methods.rreg())?;
    let pe_optimal = eval(&methods.optimal())?;

    let mut model = MlpModel::new(&cfg.model.layer_dims, sub_seed(cfg, "mlp-init"))?;
    let mut rows = Vec::with_capacity(cfg.model.epochs);
    let every = cfg.model.curve_every.max(1);
    let epochs = cfg.model.epochs;
    model.train(&xs, &ys, &cfg.train_config(sub_seed(cfg, "mlp-train")), |epoch, m, loss| {
        let val_loss = if vx.is_empty() { f64::NAN } else { m.mse(&vx, &vy)? };
        let pe_nano = if epoch % every == 0 || epoch == epochs {
            eval(&methods.nano(m))?
        } else {
            f64::NAN
        };
        rows.push(EpochRow {
            epoch,
            train_loss: loss,
            val_loss,
            pe_nano,
        });
        Ok(())
    })?;

    let out = TrainOutcome {
        model,
        rows,
        pe_lreg,
        pe_rreg,
        pe_optimal,
        holdout: split.holdout,
    };
    let paths = RunPaths::new(cfg);
    out.model.save(&paths.model())?;
    let mut csv = Csv::new(&["epoch", "train_loss", "val_loss", "pe_nano", "pe_lreg", "pe_rreg", "pe_optimal"]);
    for r in &out.rows {
        csv.row(&[
            r.epoch.to_string(),
            num(r.train_loss),
            num(r.val_loss),
            num(r.pe_nano),
            num(pe_lreg),
            num(pe_rreg),
            num(pe_optimal),
        ]);
    }
    csv.save(&paths.csv("normal_training"))?;
    write_resolved_config(cfg)?;
    Ok(out)
}

// ---------------------------------------------------------------- attack

/// States to attack: all grid states, or a stable hash-ordered subset.
pub fn attack_states(cfg: &RunConfig, ts: &TransitionSet) -> Vec<NetworkState> {
    let mut states = ts.states();
    if cfg.attack.states > 0 && cfg.attack.states < states.len() {
        let salt = sub_seed(cfg, "attack-states");
        states.sort_by_key(|s| seed::mix_f64(salt, &s.to_array()));
        states.truncate(cfg.attack.states);
    }
    states
}

#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub bo: Vec<AttackTrace>,
    pub rn: Vec<AttackTrace>,
    /// Mean PE of the attacked actions at the clean states.
    pub clean_pe: f64,
}

impl AttackOutcome {
    pub fn bo_mean(&self) -> f64 {
        mean(&self.bo.iter().map(|t| t.best().pe).collect::<Vec<_>>())
    }
    pub fn rn_mean(&self) -> f64 {
        mean(&self.rn.iter().map(|t| t.best().pe).collect::<Vec<_>>())
    }
}

/// BO and random attacks with equal budgets against `policy` on `states`.
pub fn run_attacks(
    cfg: &RunConfig,
    states: &[NetworkState],
    policy: &dyn Policy,
    oracle: &dyn GroundTruth,
    epsilon: f64,
) -> Result<AttackOutcome> {
    let acfg = attacker::AttackConfig {
        epsilon,
        ..cfg.attack_config()
    };
    let bo_seed = sub_seed(cfg, "bo-attack");
    let rn_seed = sub_seed(cfg, "rn-attack");
    let pairs = par::try_map(states, |s| {
        let key = s.to_array();
        let bo = bo_attack(s, policy, oracle, &acfg, seed::mix_f64(bo_seed, &key))?;
        let rn = rn_attack(s, policy, oracle, epsilon, acfg.budget, seed::mix_f64(rn_seed, &key))?;
        let clean = oracle.pe(s, &bo.action)?;
        Ok((bo, rn, clean))
    })?;
    let clean: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let (bo, rn) = pairs.into_iter().map(|(b, r, _)| (b, r)).unzip();
    Ok(AttackOutcome {
        bo,
        rn,
        clean_pe: mean(&clean),
    })
}

fn running_mean(traces: &[AttackTrace], budget: usize) -> Vec<f64> {
    let curves: Vec<Vec<f64>> = traces.iter().map(AttackTrace::running_best).collect();
    (0..budget)
        .map(|i| mean(&curves.iter().filter_map(|c| c.get(i).copied()).collect::<Vec<_>>()))
        .collect()
}

/// Attacks the RoNet policy driven by `model` and writes the traces and CSVs.
pub fn attack_stage(cfg: &RunConfig, ts: &TransitionSet, model: &MlpModel) -> Result<AttackOutcome> {
    cfg.validate()?;
    let baselines = Baselines::fit(cfg, ts)?;
    let methods = Methods::new(cfg, &baselines);
    let states = attack_states(cfg, ts);
    let out = run_attacks(cfg, &states, &methods.ronet(model), &oracle(cfg), cfg.attack.epsilon)?;

    let paths = RunPaths::new(cfg);
    attacker::save_traces(&out.bo, &paths.attacks())?;
    attacker::save_traces(&out.rn, &paths.random_attacks())?;

    let mut progress = Csv::new(&["iteration", "pe_bo", "pe_rn"]);
    let (bo, rn) = (running_mean(&out.bo, cfg.attack.budget), running_mean(&out.rn, cfg.attack.budget));
    for (i, (b, r)) in bo.iter().zip(&rn).enumerate() {
        progress.row(&[(i + 1).to_string(), num(*b), num(*r)]);
    }
    progress.save(&paths.csv("attack_progress"))?;

    let mut stats = Csv::new(&["dimension", "mean", "std"]);
    for (d, (m, s)) in attacker::attack_statistics(&out.bo).iter().enumerate() {
        stats.row(&[STATE_FIELDS[d].to_string(), num(*m), num(*s)]);
    }
    stats.save(&paths.csv("attack_stats"))?;

    let mut summary = Csv::new(&["method", "unattacked_pe", "attacked_pe"]);
    summary.row(&["BO".into(), num(out.clean_pe), num(out.bo_mean())]);
    summary.row(&["RN".into(), num(out.clean_pe), num(out.rn_mean())]);
    summary.save(&paths.csv("attack_summary"))?;
    write_resolved_config(cfg)?;
    Ok(out)
}

// ---------------------------------------------------------------- defend

#[derive(Debug, Clone)]
pub struct DefenseOutcome {
    pub model: MlpModel,
    /// Mean attacked PE of RoNet after each retraining stage.
    pub curve: Vec<f64>,
    pub pre_defense: f64,
    pub optimal_attacked: f64,
    /// (method, normal PE, final attacked PE) over the attacked states.
    pub table: Vec<(String, f64, f64)>,
}

impl DefenseOutcome {
    pub fn post_defense(&self) -> f64 {
        self.curve.last().copied().unwrap_or(f64::NAN)
    }
}

/// Retrains on the attacked outcomes subgroup by subgroup and evaluates every
/// method under the stored attacks. The baselines face the attacks learned
/// against RoNet; the Optimal baseline is told the attack.
pub fn defend_stage(
    cfg: &RunConfig,
    ts: &TransitionSet,
    model: &MlpModel,
    traces: &[AttackTrace],
) -> Result<DefenseOutcome> {
    cfg.validate()?;
    if traces.is_empty() {
        return Err(Error::Validation {
            field: "traces",
            reason: "defense needs at least one attack trace".into(),
        });
    }
    let baselines = Baselines::fit(cfg, ts)?;
    let methods = Methods::new(cfg, &baselines);
    let oracle = oracle(cfg);
    let lookup = AttackLookup::from_traces(traces);
    let states: Vec<NetworkState> = traces.iter().map(|t| t.state).collect();
    let attacked = |p: &dyn Policy| defense::evaluate_policy(p, &states, Some(&lookup), &oracle);
    let clean = |p: &dyn Policy| defense::evaluate_policy(p, &states, None, &oracle);

    let pre_defense = attacked(&methods.ronet(model))?;
    let optimal_attacked = attacked(&methods.optimal())?;
    let ds = defense::build_attacked_dataset(
        traces,
        &methods.ronet(model),
        &oracle,
        cfg.defense.actions_per_state,
        cfg.defense.subgroups,
        sub_seed(cfg, "defense"),
    )?;
    let train = crate::mlp::TrainConfig {
        epochs: cfg.defense.epochs_per_group,
        ..cfg.train_config(sub_seed(cfg, "defense-train"))
    };
    let (defended, curve) = defense::retrain(model, &ds, cfg.defense.subgroups, &train, |_, m| {
        attacked(&methods.ronet(m))
    })?;

    let post = *curve.last().expect("at least one subgroup");
    let table = vec![
        ("Optimal".to_string(), clean(&methods.optimal())?, optimal_attacked),
        ("RoNet".to_string(), clean(&methods.ronet(model))?, post),
        ("R-REG".to_string(), clean(&methods.rreg())?, attacked(&methods.rreg())?),
        ("L-REG".to_string(), clean(&methods.lreg())?, attacked(&methods.lreg())?),
    ];
    let out = DefenseOutcome {
        model: defended,
        curve,
        pre_defense,
        optimal_attacked,
        table,
    };

    let paths = RunPaths::new(cfg);
    out.model.save(&paths.defended_model())?;
    let mut rec = Csv::new(&["stage", "pe_ronet", "pe_optimal"]);
    rec.row(&["0".into(), num(pre_defense), num(optimal_attacked)]);
    for (k, pe) in out.curve.iter().enumerate() {
        rec.row(&[(k + 1).to_string(), num(*pe), num(optimal_attacked)]);
    }
    rec.save(&paths.csv("recovery"))?;
    let mut perf = Csv::new(&["method", "normal_pe", "final_attacked_pe"]);
    for (name, n, a) in &out.table {
        perf.row(&[name.clone(), num(*n), num(*a)]);
    }
    perf.save(&paths.csv("performance"))?;
    write_resolved_config(cfg)?;
    Ok(out)
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Epsilon,
    Kappa,
    Threshold,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::Kappa => "kappa",
            SweepAxis::Threshold => "H",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epsilon" | "eps" => Ok(SweepAxis::Epsilon),
            "kappa" => Ok(SweepAxis::Kappa),
            "H" | "h" | "threshold" => Ok(SweepAxis::Threshold),
            other => Err(Error::Config(format!(
                "unknown sweep axis {other:?} (expected epsilon, kappa or H)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub clean_pe: f64,
    pub attacked_pe: f64,
}

/// One row per axis value, all on the same states and seeds.
/// - epsilon: BO attack of RoNet at each scale.
/// - kappa: RoNet with each selection factor, clean and BO-attacked.
/// - H: RoNet's clean-state actions re-scored at each latency threshold;
///   `attacked_pe` re-scores the stored best attacks when given.
pub fn sweep_stage(
    cfg: &RunConfig,
    ts: &TransitionSet,
    model: &MlpModel,
    axis: SweepAxis,
    traces: Option<&[AttackTrace]>,
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let baselines = Baselines::fit(cfg, ts)?;
    let methods = Methods::new(cfg, &baselines);
    let oracle = oracle(cfg);
    let states = attack_states(cfg, ts);
    let rows = match axis {
        SweepAxis::Epsilon => cfg
            .sweep
            .epsilon
            .iter()
            .map(|&eps| {
                let out = run_attacks(cfg, &states, &methods.ronet(model), &oracle, eps)?;
                Ok(SweepRow {
                    value: eps,
                    clean_pe: out.clean_pe,
                    attacked_pe: out.bo_mean(),
                })
            })
            .collect::<Result<Vec<_>>>()?,
        SweepAxis::Kappa => cfg
            .sweep
            .kappa
            .iter()
            .map(|&kappa| {
                let p = methods.ronet_with_kappa(model, kappa);
                let out = run_attacks(cfg, &states, &p, &oracle, cfg.attack.epsilon)?;
                Ok(SweepRow {
                    value: kappa,
                    clean_pe: out.clean_pe,
                    attacked_pe: out.bo_mean(),
                })
            })
            .collect::<Result<Vec<_>>>()?,
        SweepAxis::Threshold => threshold_sweep(cfg, &states, &methods.ronet(model), traces)?,
    };
    let mut csv = Csv::new(&[axis.name(), "pe_clean", "pe_attacked"]);
    for r in &rows {
        csv.row(&[num(r.value), num(r.clean_pe), num(r.attacked_pe)]);
    }
    csv.save(&RunPaths::new(cfg).csv(&format!("sweep_{}", axis.name())))?;
    write_resolved_config(cfg)?;
    Ok(rows)
}

/// Fixed actions and attacks, re-scored at each threshold. The run seed does
/// not involve the threshold, so every row sees the same latencies.
fn threshold_sweep(
    cfg: &RunConfig,
    states: &[NetworkState],
    policy: &dyn Policy,
    traces: Option<&[AttackTrace]>,
) -> Result<Vec<SweepRow>> {
    let actions = par::try_map(states, |s| policy.act(s, None))?;
    let lookup = traces.map(AttackLookup::from_traces);
    let sim = cfg.sim_config();
    let pairs: Vec<(NetworkState, _, Option<NetworkState>)> = states
        .iter()
        .zip(&actions)
        .map(|(s, a)| {
            let attacked = match lookup.as_ref().and_then(|l| l.get(s)) {
                Some(v) => Some(attacker::attacked_state(s, v)?),
                None => None,
            };
            Ok((*s, *a, attacked))
        })
        .collect::<Result<_>>()?;
    let latencies = par::try_map(&pairs, |(s, a, attacked)| {
        let clean = netsim::simulate(s, a, &sim)?;
        let hit = attacked.map(|t| netsim::simulate(&t, a, &sim)).transpose()?;
        Ok((clean, hit))
    })?;
    cfg.sweep
        .threshold
        .iter()
        .map(|&h| {
            let mut clean = Vec::with_capacity(pairs.len());
            let mut hit = Vec::new();
            for ((s, a, _), (lat, att)) in pairs.iter().zip(&latencies) {
                clean.push(netsim::record_from_latencies(s, a, lat, h)?.pe);
                if let Some(att) = att {
                    hit.push(netsim::record_from_latencies(s, a, att, h)?.pe);
                }
            }
            Ok(SweepRow {
                value: h,
                clean_pe: mean(&clean),
                attacked_pe: if hit.is_empty() { f64::NAN } else { mean(&hit) },
            })
        })
        .collect()
}

// ---------------------------------------------------------------- run-all

#[derive(Debug, Clone)]
pub struct RunAllOutcome {
    pub train: TrainOutcome,
    pub attacks: Vec<AttackOutcome>,
    pub defenses: Vec<DefenseOutcome>,
    pub report: String,
}

/// collect -> train -> (attack -> defend) x cycles -> report.
pub fn run_all(cfg: &RunConfig) -> Result<RunAllOutcome> {
    let ts = collect_stage(cfg)?;
    let train = train_stage(cfg, &ts)?;
    let mut model = train.model.clone();
    let mut attacks = Vec::new();
    let mut defenses = Vec::new();
    for _ in 0..cfg.defense.cycles {
        let a = attack_stage(cfg, &ts, &model)?;
        let d = defend_stage(cfg, &ts, &model, &a.bo)?;
        model = d.model.clone();
        attacks.push(a);
        defenses.push(d);
    }
    let report = crate::report::write_report(Path::new(&cfg.out_dir))?;
    Ok(RunAllOutcome {
        train,
        attacks,
        defenses,
        report,
    })
}

/// One-line human summary of a stage result.
pub fn describe_train(out: &TrainOutcome) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "NANO {:.4}  L-REG {:.4}  R-REG {:.4}  Optimal {:.4} over {} held-out states",
        out.pe_nano(),
        out.pe_lreg,
        out.pe_rreg,
        out.pe_optimal,
        out.holdout.len()
    );
    s
}
