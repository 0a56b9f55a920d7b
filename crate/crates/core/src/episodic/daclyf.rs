use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{evaluate, exploration_amplitude, run_experiment, trust, ExplorationSchedule, Metrics, Perturbed, TrustSchedule};
use crate::clf::{Clf, ClfContext, ClfGains, CoordinateOutput, IoLinController, SmoothSine, TrackingProblem};
use crate::controllers::{AugmentationConfig, AugmentingController, ClfQpController, Controller, PdController};
use crate::dynamics::{perturb_params, Segway, SegwayParams, SimulationSettings, StateTrajectory};
use crate::error::{Error, Result};
use crate::learning::{fit_erm, Dataset, LearnedDerivative, ResidualEstimator, TrainingConfig, TrainingReport};
use crate::numerics::{RngStream, Vector};

/// Index of the pitch in `q = (x, θ)`.
pub const PITCH: usize = 1;

/// The true plant: nominal parameters scaled by independent factors in
/// `[1 − perturbation, 1 + perturbation]` drawn from `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantConfig {
    pub nominal: SegwayParams,
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self { nominal: SegwayParams::default(), perturbation: 0.1, seed: 0 }
    }
}

/// Gains of the nominal PD controller on pitch error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        Self { kp: 200.0, kd: 30.0 }
    }
}

/// Initial configurations `(x, θ) = (0, θ₀)` with `θ₀` uniform on `[−pitch, pitch]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSet {
    pub pitch: f64,
}

impl Default for InitialSet {
    fn default() -> Self {
        Self { pitch: 0.02 }
    }
}

/// Everything a DaCLyF run depends on besides the seed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DaclyfConfig {
    pub plant: PlantConfig,
    pub clf: ClfGains,
    pub trajectory: SmoothSine,
    pub nominal: PdGains,
    pub augmentation: AugmentationConfig,
    pub training: TrainingConfig,
    pub trust: TrustSchedule,
    pub exploration: ExplorationSchedule,
    pub simulation: SimulationSettings,
    pub initial: InitialSet,
}

impl DaclyfConfig {
    pub fn validate(&self) -> Result<()> {
        self.plant.nominal.validate()?;
        if !(0.0..1.0).contains(&self.plant.perturbation) {
            return Err(Error::InvalidInput(format!(
                "perturbation fraction must lie in [0, 1), got {}",
                self.plant.perturbation
            )));
        }
        if !(self.nominal.kp.is_finite() && self.nominal.kd.is_finite()) {
            return Err(Error::InvalidInput("PD gains must be finite".into()));
        }
        if !(self.initial.pitch >= 0.0 && self.initial.pitch < super::FALLEN_PITCH) {
            return Err(Error::InvalidInput(format!("initial pitch range {} out of bounds", self.initial.pitch)));
        }
        self.trajectory.validate()?;
        self.augmentation.validate()?;
        self.training.validate()?;
        self.trust.validate()?;
        self.exploration.validate()?;
        self.simulation.validate()?;
        Clf::from_gains(1, &self.clf)?;
        Ok(())
    }

    pub fn episodes(&self) -> usize {
        self.trust.episodes
    }
}

/// Plants, tracking problem and model-based CLF context shared by every
/// controller of a run.
#[derive(Clone)]
pub struct Setup {
    pub config: DaclyfConfig,
    pub truth: Arc<Segway>,
    pub estimated: Arc<Segway>,
    pub ctx: ClfContext,
}

impl Setup {
    pub fn new(config: &DaclyfConfig) -> Result<Self> {
        config.validate()?;
        let mut plant_rng = RngStream::new(config.plant.seed).split("plant");
        let truth = Arc::new(Segway::new(perturb_params(
            &config.plant.nominal,
            config.plant.perturbation,
            &mut plant_rng,
        )?)?);
        let estimated = Arc::new(Segway::new(config.plant.nominal)?);
        let tracking = TrackingProblem::new(
            Arc::new(CoordinateOutput { index: PITCH, dof: 2 }),
            Arc::new(config.trajectory),
            config.simulation.t0,
            config.simulation.tf,
        )?;
        let clf = Clf::from_gains(1, &config.clf)?;
        let ctx = ClfContext::new(estimated.clone(), Arc::new(tracking), Arc::new(clf))?;
        Ok(Self { config: *config, truth, estimated, ctx })
    }

    pub fn pd(&self) -> PdController {
        PdController::new(self.config.nominal.kp, self.config.nominal.kd, self.ctx.tracking.clone())
    }

    /// Model-based min-norm CLF-QP on the estimated model.
    pub fn clf_qp(&self) -> ClfQpController {
        ClfQpController::min_norm(Arc::new(self.ctx.clone()))
    }

    pub fn io_lin(&self) -> IoLinController {
        IoLinController::new(self.ctx.clone())
    }

    /// `u₀ + w·u′` around the PD controller with a learned estimate.
    pub fn augmented(&self, estimator: Arc<ResidualEstimator>, trust: f64) -> Result<AugmentingController> {
        let learned = LearnedDerivative { ctx: self.ctx.clone(), estimator };
        AugmentingController::new(Box::new(self.pd()), Arc::new(learned), self.config.augmentation, trust)
    }

    pub fn rest_state(&self) -> (Vector, Vector) {
        (Vector::zeros(2), Vector::zeros(2))
    }

    /// Noise-free rollout on the true plant from rest.
    pub fn evaluate<C: Controller + ?Sized>(&self, controller: &mut C) -> Result<(StateTrajectory, Metrics)> {
        let (q0, qd0) = self.rest_state();
        evaluate(self.truth.as_ref(), controller, &self.ctx.tracking, &q0, &qd0, &self.config.simulation)
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub trust: f64,
    pub exploration: f64,
    pub initial_pitch: f64,
    pub experiment: StateTrajectory,
    /// Samples contributed by this episode.
    pub samples: usize,
    /// Aggregated dataset size after this episode.
    pub dataset_size: usize,
    pub training: TrainingReport,
    pub estimator: Arc<ResidualEstimator>,
    /// Rollout of `u_k` without exploration.
    pub evaluation: StateTrajectory,
    pub metrics: Metrics,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: DaclyfConfig,
    pub seed: u64,
    pub true_params: SegwayParams,
    /// The nominal PD controller evaluated like every episode.
    pub baseline: Metrics,
    pub episodes: Vec<EpisodeRecord>,
    pub dataset: Dataset,
    /// Set when an episode failed; `episodes` then holds the completed prefix.
    pub failure: Option<Error>,
}

impl RunRecord {
    pub fn final_estimator(&self) -> Option<&Arc<ResidualEstimator>> {
        self.episodes.last().map(|e| &e.estimator)
    }
}

/// DaCLyF on the perturbed Segway.
pub fn run_daclyf(config: &DaclyfConfig, seed: u64) -> Result<RunRecord> {
    run_daclyf_with(config, seed, |_| {})
}

/// [`run_daclyf`], calling `on_episode` after each completed episode.
///
/// Each episode samples an initial pitch, runs the previous controller with
/// exploration noise on the true plant, aggregates the data, refits the
/// residual networks against the model-based derivative from scratch and
/// forms `u_k = u₀ + w_k·u′` around the fixed PD controller `u₀`.
pub fn run_daclyf_with(
    config: &DaclyfConfig,
    seed: u64,
    mut on_episode: impl FnMut(&EpisodeRecord),
) -> Result<RunRecord> {
    let setup = Setup::new(config)?;
    let root = RngStream::new(seed);
    let (_, baseline) = setup.evaluate(&mut setup.pd())?;
    let mut record = RunRecord {
        config: *config,
        seed,
        true_params: *setup.truth.params(),
        baseline,
        episodes: Vec::with_capacity(config.episodes()),
        dataset: Dataset::new(),
        failure: None,
    };
    let mut previous: Option<(Arc<ResidualEstimator>, f64)> = None;

    for k in 1..=config.episodes() {
        match run_episode(&setup, &root, k, previous.as_ref(), &mut record.dataset) {
            Ok(ep) => {
                on_episode(&ep);
                previous = Some((ep.estimator.clone(), ep.trust));
                record.episodes.push(ep);
            }
            Err(e) => {
                record.failure = Some(e);
                break;
            }
        }
    }
    Ok(record)
}

fn run_episode(
    setup: &Setup,
    root: &RngStream,
    k: usize,
    previous: Option<&(Arc<ResidualEstimator>, f64)>,
    dataset: &mut Dataset,
) -> Result<EpisodeRecord> {
    let cfg = &setup.config;
    let pitch = root.split_indexed("initial", k as u64).uniform(-cfg.initial.pitch, cfg.initial.pitch);
    let q0 = Vector::from_vec(vec![0.0, pitch]);
    let exploration = exploration_amplitude(k, &cfg.exploration);
    let base: Box<dyn Controller + Send> = match previous {
        None => Box::new(setup.pd()),
        Some((est, w)) => Box::new(setup.augmented(est.clone(), *w)?),
    };
    let mut explorer = Perturbed::new(base, exploration, root.split_indexed("explore", k as u64));
    let (experiment, data) = run_experiment(
        setup.truth.as_ref(),
        &mut explorer,
        &q0,
        &setup.ctx,
        PITCH,
        &cfg.simulation,
        k,
    )?;
    let samples = data.len();
    dataset.aggregate(data);

    let mut train_rng = root.split_indexed("train", k as u64);
    let (estimator, training) = fit_erm(dataset, &setup.ctx, &cfg.training, &mut train_rng)?;
    let estimator = Arc::new(estimator);
    let w = trust(k, &cfg.trust)?;
    let mut controller = setup.augmented(estimator.clone(), w)?;
    let (evaluation, metrics) = setup.evaluate(&mut controller)?;
    Ok(EpisodeRecord {
        episode: k,
        trust: w,
        exploration,
        initial_pitch: pitch,
        experiment,
        samples,
        dataset_size: dataset.len(),
        training,
        estimator,
        evaluation,
        metrics,
    })
}
