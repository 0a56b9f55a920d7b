use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use daclyf_core::controllers::{Controller, DerivativeEstimate};
use daclyf_core::episodic::{run_daclyf_with, trust, EpisodeRecord, Metrics, RunRecord, Setup};
use daclyf_core::learning::{read_estimator, LearnedDerivative, ResidualEstimator};
use daclyf_core::Error;
use rayon::prelude::*;

use crate::config::{Overrides, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{save_estimator, write_metrics, write_study, write_toml, write_trajectory, MetricsRow};

#[derive(Debug, Parser)]
#[command(name = "daclyf", version, about = "Episodic learning of CLF derivatives on a perturbed Segway")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// TOML configuration; defaults apply to anything it leaves out.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `run.output`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run seed, overriding `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Episode count, overriding `trust.episodes`.
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ControllerChoice {
    Pd,
    ClfQp,
    IoLin,
    /// PD plus a learned augmentation; needs `--estimator`.
    Augmented,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll out one controller on the perturbed plant.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "pd")]
        controller: ControllerChoice,
        /// Estimator file written by `daclyf`.
        #[arg(long)]
        estimator: Option<PathBuf>,
        /// Trust for the augmented controller; defaults to the last episode's.
        #[arg(long)]
        trust: Option<f64>,
    },
    /// Run the episodic learning loop once.
    Daclyf {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run seeded instances of the learning loop and aggregate them.
    Study {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 10)]
        instances: usize,
    },
}

/// Parses and runs a command line, returning the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Simulate { common, controller, estimator, trust } => {
            let cfg = resolve(&common)?;
            simulate(&cfg, controller, estimator.as_deref(), trust)
        }
        Command::Daclyf { common } => {
            let cfg = resolve(&common)?;
            daclyf(&cfg, true).map(|_| ())
        }
        Command::Study { common, instances } => {
            let cfg = resolve(&common)?;
            study(&cfg, instances)
        }
    }
}

/// Loads, overrides and validates; nothing is written before this succeeds.
pub fn resolve(common: &CommonArgs) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    cfg.apply(&Overrides { seed: common.seed, out: common.out.clone(), episodes: common.episodes });
    cfg.validate()?;
    Ok(cfg)
}

fn load_estimator(path: &Path) -> CliResult<ResidualEstimator> {
    let file = File::open(path).map_err(|e| CliError::Validation(format!("cannot open {}: {e}", path.display())))?;
    let est = read_estimator(BufReader::new(file)).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    if est.inputs() != 1 || est.features.dim() != 6 {
        return Err(CliError::Validation(format!(
            "{} holds an estimator for {} features and {} inputs, the Segway needs 6 and 1",
            path.display(),
            est.features.dim(),
            est.inputs()
        )));
    }
    Ok(est)
}

fn result_table(metrics: &Metrics) -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("ise".into(), metrics.ise.into());
    t.insert("max_err".into(), metrics.max_err.into());
    t.insert("diverged".into(), metrics.diverged.into());
    t
}

pub fn simulate(
    cfg: &RunConfig,
    choice: ControllerChoice,
    estimator: Option<&Path>,
    trust_override: Option<f64>,
) -> CliResult<()> {
    let setup = Setup::new(&cfg.daclyf)?;
    let ctx: Arc<dyn DerivativeEstimate> = Arc::new(setup.ctx.clone());
    let (mut controller, estimate, w): (Box<dyn Controller>, Arc<dyn DerivativeEstimate>, f64) = match choice {
        ControllerChoice::Pd => (Box::new(setup.pd()), ctx, 0.0),
        ControllerChoice::ClfQp => (Box::new(setup.clf_qp()), ctx, 0.0),
        ControllerChoice::IoLin => (Box::new(setup.io_lin()), ctx, 0.0),
        ControllerChoice::Augmented => {
            let path = estimator
                .ok_or_else(|| CliError::Validation("the augmented controller needs --estimator".into()))?;
            let est = Arc::new(load_estimator(path)?);
            let w = match trust_override {
                Some(w) if (0.0..=1.0).contains(&w) => w,
                Some(w) => return Err(CliError::Validation(format!("trust must lie in [0, 1], got {w}"))),
                None => trust(cfg.daclyf.episodes(), &cfg.daclyf.trust)?,
            };
            let learned = Arc::new(LearnedDerivative { ctx: setup.ctx.clone(), estimator: est.clone() });
            (Box::new(setup.augmented(est, w)?), learned, w)
        }
    };
    if choice != ControllerChoice::Augmented && (estimator.is_some() || trust_override.is_some()) {
        return Err(CliError::Validation("--estimator and --trust apply only to the augmented controller".into()));
    }

    let (traj, metrics) = setup.evaluate(controller.as_mut())?;
    let dir = &cfg.run.output;
    write_trajectory(&dir.join("trajectory.csv"), &traj, estimate.as_ref())?;
    let row = MetricsRow { episode: 0, trust: w, exploration: 0.0, metrics, dataset_size: 0, train_loss: None };
    write_metrics(&dir.join("metrics.csv"), &[row])?;
    write_toml(&dir.join("config.toml"), &cfg.to_table())?;
    let mut summary = toml::Table::new();
    let name = choice.to_possible_value().expect("no skipped variants").get_name().to_string();
    summary.insert("controller".into(), name.into());
    summary.insert("true_plant".into(), toml::Value::try_from(setup.truth.params()).expect("parameters serialize"));
    summary.insert("metrics".into(), result_table(&metrics).into());
    write_toml(&dir.join("summary.toml"), &summary)?;

    println!("ise {:.6e}  max_err {:.6e}  diverged {}", metrics.ise, metrics.max_err, metrics.diverged);
    if metrics.diverged {
        let t = traj.times.last().copied().unwrap_or(cfg.daclyf.simulation.t0);
        return Err(CliError::Divergence { t, dir: dir.clone() });
    }
    Ok(())
}

fn print_header() {
    println!(
        "{:>7} {:>7} {:>7} {:>12} {:>10} {:>8} {:>7} {:>12}",
        "episode", "trust", "explore", "ise", "max_err", "diverged", "samples", "train_loss"
    );
}

fn print_row(e: &EpisodeRecord) {
    println!(
        "{:>7} {:>7.4} {:>7.3} {:>12.4e} {:>10.4e} {:>8} {:>7} {:>12.4e}",
        e.episode,
        e.trust,
        e.exploration,
        e.metrics.ise,
        e.metrics.max_err,
        e.metrics.diverged,
        e.dataset_size,
        e.training.final_loss
    );
}

/// Writes everything a run produced into `dir`.
pub fn write_run(dir: &Path, cfg: &RunConfig, setup: &Setup, record: &RunRecord) -> CliResult<()> {
    let rows: Vec<MetricsRow> = record.episodes.iter().map(MetricsRow::from).collect();
    write_metrics(&dir.join("metrics.csv"), &rows)?;
    write_toml(&dir.join("config.toml"), &cfg.to_table())?;

    let model_based: Arc<dyn DerivativeEstimate> = Arc::new(setup.ctx.clone());
    let mut acting = model_based;
    for e in &record.episodes {
        let learned: Arc<dyn DerivativeEstimate> =
            Arc::new(LearnedDerivative { ctx: setup.ctx.clone(), estimator: e.estimator.clone() });
        let stem = format!("episode_{:02}", e.episode);
        let episodes = dir.join("episodes");
        write_trajectory(&episodes.join(format!("{stem}_experiment.csv")), &e.experiment, acting.as_ref())?;
        write_trajectory(&episodes.join(format!("{stem}_evaluation.csv")), &e.evaluation, learned.as_ref())?;
        save_estimator(&episodes.join(format!("{stem}_estimator.bin")), &e.estimator)?;
        acting = learned;
    }
    if let Some(est) = record.final_estimator() {
        save_estimator(&dir.join("estimator.bin"), est)?;
    }

    let mut summary = toml::Table::new();
    summary.insert("seed".into(), (record.seed as i64).into());
    summary.insert("plant_seed".into(), (record.config.plant.seed as i64).into());
    summary.insert("true_plant".into(), toml::Value::try_from(record.true_params).expect("parameters serialize"));
    summary.insert("baseline".into(), result_table(&record.baseline).into());
    summary.insert("episodes_completed".into(), (record.episodes.len() as i64).into());
    if let Some(f) = &record.failure {
        summary.insert("failure".into(), f.to_string().into());
    }
    write_toml(&dir.join("summary.toml"), &summary)
}

fn failure_error(record: &RunRecord) -> Option<CliError> {
    record.failure.as_ref().map(|f| match f {
        Error::NonFiniteLoss { .. } => CliError::Training(f.to_string()),
        other => CliError::Core(other.clone()),
    })
}

/// Runs the learning loop and writes its outputs, printing a table when `print` is set.
pub fn daclyf(cfg: &RunConfig, print: bool) -> CliResult<RunRecord> {
    let setup = Setup::new(&cfg.daclyf)?;
    if print {
        print_header();
    }
    let record = run_daclyf_with(&cfg.daclyf, cfg.run.seed, |e| {
        if print {
            print_row(e);
        }
    })?;
    if print {
        println!(
            "baseline pd: ise {:.4e}  max_err {:.4e}  diverged {}",
            record.baseline.ise, record.baseline.max_err, record.baseline.diverged
        );
    }
    write_run(&cfg.run.output, cfg, &setup, &record)?;
    match failure_error(&record) {
        Some(e) => Err(e),
        None => Ok(record),
    }
}

/// `(episode, min, mean, max, count)` of evaluation ISE over the records
/// that reached each episode.
pub fn aggregate(records: &[&RunRecord]) -> Vec<(usize, f64, f64, f64, usize)> {
    let episodes = records.iter().map(|r| r.episodes.len()).max().unwrap_or(0);
    (0..episodes)
        .map(|k| {
            let ise: Vec<f64> = records.iter().filter_map(|r| r.episodes.get(k)).map(|e| e.metrics.ise).collect();
            let lo = ise.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ise.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = ise.iter().sum::<f64>() / ise.len() as f64;
            (k + 1, lo, mean, hi, ise.len())
        })
        .collect()
}

/// Instance `i` runs with seed `run.seed + i` into `instance_<i>/`.
pub fn study(cfg: &RunConfig, instances: usize) -> CliResult<()> {
    if instances == 0 {
        return Err(CliError::Validation("--instances must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..instances as u64)
        .map(|i| cfg.run.seed.checked_add(i).filter(|&s| s <= i64::MAX as u64))
        .collect::<Option<_>>()
        .ok_or_else(|| CliError::Validation("instance seeds overflow".into()))?;
    write_toml(&cfg.run.output.join("config.toml"), &cfg.to_table())?;

    let outcomes: Vec<(u64, CliResult<RunRecord>)> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let mut instance = cfg.clone();
            instance.run.seed = seed;
            instance.run.output = cfg.run.output.join(format!("instance_{i:02}"));
            (seed, daclyf(&instance, false))
        })
        .collect();

    println!("{:>8} {:>6} {:>12} {:>12} {:>8}  failure", "instance", "seed", "baseline", "final_ise", "episodes");
    for (i, (seed, outcome)) in outcomes.iter().enumerate() {
        match outcome {
            Ok(r) => println!(
                "{i:>8} {seed:>6} {:>12.4e} {:>12.4e} {:>8}",
                r.baseline.ise,
                r.episodes.last().map_or(f64::NAN, |e| e.metrics.ise),
                r.episodes.len()
            ),
            Err(e) => println!("{i:>8} {seed:>6} {:>12} {:>12} {:>8}  {e}", "", "", ""),
        }
    }
    let completed: Vec<&RunRecord> = outcomes.iter().filter_map(|(_, o)| o.as_ref().ok()).collect();
    let rows = aggregate(&completed);
    write_study(&cfg.run.output.join("study.csv"), &rows)?;
    if completed.is_empty() {
        let (_, first) = outcomes.into_iter().next().expect("at least one instance");
        return Err(first.expect_err("no instance completed"));
    }
    Ok(())
}
