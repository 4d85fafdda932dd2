use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ronet_core::attacker;
use ronet_core::config::RunConfig;
use ronet_core::dataset::TransitionSet;
use ronet_core::mlp::MlpModel;
use ronet_core::pipeline::{self, RunPaths, SweepAxis};
use ronet_core::{report, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "ronet", version, about = "Collect, train, attack and defend a network configuration policy")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory of the run.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Attack scale.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Probabilistic selection factor.
    #[arg(long, global = true)]
    kappa: Option<f64>,
    /// Latency threshold H in milliseconds.
    #[arg(long = "threshold", short = 'H', global = true)]
    threshold: Option<f64>,
    /// Attack query budget.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Grid levels per state dimension.
    #[arg(long, global = true)]
    levels: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate every grid (state, action) pair and save the transitions file.
    Collect,
    /// Train the PE predictor and write normal_training.csv.
    Train {
        #[arg(long)]
        transitions: Option<PathBuf>,
    },
    /// Attack the RoNet policy with BO and random search.
    Attack {
        #[arg(long)]
        transitions: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Retrain on attacked outcomes and write recovery.csv.
    Defend {
        #[arg(long)]
        transitions: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Sweep one parameter: epsilon, kappa or H.
    Sweep {
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long)]
        transitions: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Summarize a run directory (defaults to the configured output directory).
    Report {
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
    /// collect -> train -> attack -> defend -> report.
    RunAll,
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = &common.out {
        cfg.out_dir = v.to_string_lossy().into_owned();
    }
    if let Some(v) = common.epsilon {
        cfg.attack.epsilon = v;
    }
    if let Some(v) = common.kappa {
        cfg.policy.kappa = v;
    }
    if let Some(v) = common.threshold {
        cfg.sim.latency_threshold = v;
    }
    if let Some(v) = common.budget {
        cfg.attack.budget = v;
    }
    if let Some(v) = common.levels {
        cfg.grid.levels = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn transitions(paths: &RunPaths, given: Option<PathBuf>) -> Result<TransitionSet> {
    TransitionSet::load(&given.unwrap_or_else(|| paths.transitions()))
}

fn model(given: Option<PathBuf>, default: PathBuf) -> Result<MlpModel> {
    MlpModel::load(&given.unwrap_or(default))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.common)?;
    let paths = RunPaths::new(&cfg);
    let start = Instant::now();
    match cli.command {
        Command::Collect => {
            let ts = pipeline::collect_stage(&cfg)?;
            println!(
                "collected {} records into {} in {:.1}s",
                ts.records.len(),
                paths.transitions().display(),
                start.elapsed().as_secs_f64()
            );
        }
        Command::Train { transitions: t } => {
            let ts = transitions(&paths, t)?;
            let out = pipeline::train_stage(&cfg, &ts)?;
            println!("{}", pipeline::describe_train(&out));
            println!("model saved to {}", paths.model().display());
        }
        Command::Attack { transitions: t, model: m } => {
            let ts = transitions(&paths, t)?;
            let model = model(m, paths.model())?;
            let out = pipeline::attack_stage(&cfg, &ts, &model)?;
            println!(
                "{} states: unattacked {:.4}, BO {:.4}, RN {:.4}",
                out.bo.len(),
                out.clean_pe,
                out.bo_mean(),
                out.rn_mean()
            );
        }
        Command::Defend {
            transitions: t,
            model: m,
            traces,
        } => {
            let ts = transitions(&paths, t)?;
            let model = model(m, paths.model())?;
            let traces = attacker::load_traces(&traces.unwrap_or_else(|| paths.attacks()))?;
            let out = pipeline::defend_stage(&cfg, &ts, &model, &traces)?;
            println!(
                "attacked PE: pre-defense {:.4}, post-defense {:.4}, attacked Optimal {:.4}",
                out.pre_defense,
                out.post_defense(),
                out.optimal_attacked
            );
        }
        Command::Sweep {
            axis,
            transitions: t,
            model: m,
            traces,
        } => {
            let ts = transitions(&paths, t)?;
            let model = model(m, paths.model())?;
            let traces = match traces {
                Some(p) => Some(attacker::load_traces(&p)?),
                None if paths.attacks().exists() => Some(attacker::load_traces(&paths.attacks())?),
                None => None,
            };
            let rows = pipeline::sweep_stage(&cfg, &ts, &model, axis, traces.as_deref())?;
            for r in rows {
                println!("{}={} clean {:.4} attacked {:.4}", axis.name(), r.value, r.clean_pe, r.attacked_pe);
            }
        }
        Command::Report { run_dir } => {
            let dir = run_dir.unwrap_or_else(|| paths.root.clone());
            print!("{}", report::write_report(&dir)?);
        }
        Command::RunAll => {
            let out = pipeline::run_all(&cfg)?;
            println!("{}", pipeline::describe_train(&out.train));
            print!("{}", out.report);
        }
    }
    eprintln!("done in {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}

fn error_line(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
