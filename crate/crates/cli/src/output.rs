use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use daclyf_core::controllers::DerivativeEstimate;
use daclyf_core::dynamics::StateTrajectory;
use daclyf_core::episodic::{EpisodeRecord, Metrics};
use daclyf_core::learning::{write_estimator, ResidualEstimator};

use crate::error::{CliError, CliResult};

pub const TRAJECTORY_HEADER: &str = "t,x,xdot,theta,thetadot,u,V,Vdot_est,constraint_slack,fallback_flag";
pub const METRICS_HEADER: &str = "episode,trust,exploration,ise,max_err,diverged,dataset_size,train_loss";
pub const STUDY_HEADER: &str = "episode,min_ise,mean_ise,max_ise,instances";

/// One row of a metrics CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub episode: usize,
    pub trust: f64,
    pub exploration: f64,
    pub metrics: Metrics,
    pub dataset_size: usize,
    pub train_loss: Option<f64>,
}

impl From<&EpisodeRecord> for MetricsRow {
    fn from(e: &EpisodeRecord) -> Self {
        Self {
            episode: e.episode,
            trust: e.trust,
            exploration: e.exploration,
            metrics: e.metrics,
            dataset_size: e.dataset_size,
            train_loss: Some(e.training.final_loss),
        }
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(CliError::io(format!("creating {}", dir.display())))?;
    }
    File::create(path).map(BufWriter::new).map_err(CliError::io(format!("creating {}", path.display())))
}

fn finish(path: &Path, result: std::io::Result<()>) -> CliResult<()> {
    result.map_err(CliError::io(format!("writing {}", path.display())))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| (x + 0.0).to_string()).unwrap_or_default()
}

/// Per-tick CSV of a rollout. `V̇` is the estimate the controller acted on;
/// the last tick has no held input and leaves input columns empty.
pub fn write_trajectory(path: &Path, traj: &StateTrajectory, estimate: &dyn DerivativeEstimate) -> CliResult<()> {
    let mut w = create(path)?;
    let ctx = estimate.context();
    let result = (|| {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for i in 0..traj.len() {
            let (q, qd, t) = (traj.q(i), traj.qd(i), traj.times[i]);
            let v = ctx.clf.value(&ctx.error_state(&q, &qd, t));
            let (u, vdot, slack, fallback) = match (traj.inputs.get(i), traj.diagnostics.get(i)) {
                (Some(u), Some(d)) => (
                    Some(u[0]),
                    estimate.estimate(&q, &qd, t).ok().map(|a| a.eval(u)).filter(|x| x.is_finite()),
                    Some(d.constraint_slack),
                    (d.fallback as u8).to_string(),
                ),
                _ => (None, None, None, String::new()),
            };
            writeln!(
                w,
                "{t},{},{},{},{},{},{v},{},{},{fallback}",
                q[0],
                qd[0],
                q[1],
                qd[1],
                opt(u),
                opt(vdot),
                opt(slack)
            )?;
        }
        w.flush()
    })();
    finish(path, result)
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> CliResult<()> {
    let mut w = create(path)?;
    let result = (|| {
        writeln!(w, "{METRICS_HEADER}")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.episode,
                r.trust,
                r.exploration,
                r.metrics.ise,
                r.metrics.max_err,
                r.metrics.diverged as u8,
                r.dataset_size,
                opt(r.train_loss)
            )?;
        }
        w.flush()
    })();
    finish(path, result)
}

/// `(episode, min, mean, max, count)` rows.
pub fn write_study(path: &Path, rows: &[(usize, f64, f64, f64, usize)]) -> CliResult<()> {
    let mut w = create(path)?;
    let result = (|| {
        writeln!(w, "{STUDY_HEADER}")?;
        for (k, lo, mean, hi, n) in rows {
            writeln!(w, "{k},{lo},{mean},{hi},{n}")?;
        }
        w.flush()
    })();
    finish(path, result)
}

pub fn write_toml(path: &Path, table: &toml::Table) -> CliResult<()> {
    let text = toml::to_string(table).expect("tables always serialize");
    let mut w = create(path)?;
    let result = w.write_all(text.as_bytes()).and_then(|_| w.flush());
    finish(path, result)
}

pub fn save_estimator(path: &Path, est: &ResidualEstimator) -> CliResult<()> {
    let mut w = create(path)?;
    write_estimator(est, &mut w)?;
    finish(path, w.flush())
}
