//! The episodic learning loop and its schedules and metrics.

mod daclyf;
mod experiment;
mod schedule;

pub use daclyf::{
    run_daclyf, run_daclyf_with, DaclyfConfig, EpisodeRecord, InitialSet, PdGains, PlantConfig, RunRecord, Setup,
    PITCH,
};
pub use experiment::{
    evaluate, run_experiment, tracking_metrics, truncate, upright_prefix, Metrics, Perturbed, FALLEN_PITCH,
};
pub use schedule::{exploration_amplitude, trust, ExplorationSchedule, TrustSchedule};
