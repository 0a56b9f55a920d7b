use std::sync::Arc;

use daclyf_core::episodic::{run_daclyf, trust, DaclyfConfig, RunRecord, Setup};
use daclyf_core::learning::ResidualEstimator;

fn small() -> DaclyfConfig {
    let mut cfg = DaclyfConfig::default();
    cfg.trust.episodes = 3;
    cfg.simulation.tf = 2.0;
    cfg.training.hidden = 16;
    cfg.training.epochs = 5;
    cfg
}

fn zero_estimator(hidden: usize) -> Arc<ResidualEstimator> {
    Arc::new(ResidualEstimator::zero(6, 1, hidden))
}

#[test]
fn zero_trust_reproduces_nominal_rollout_bitwise() {
    let mut cfg = small();
    cfg.exploration.amplitude = 0.0;
    cfg.trust.constant = Some(0.0);
    let setup = Setup::new(&cfg).unwrap();
    let (pd_traj, pd_metrics) = setup.evaluate(&mut setup.pd()).unwrap();

    let mut untrusted = setup.augmented(zero_estimator(16), 0.0).unwrap();
    let (traj, _) = setup.evaluate(&mut untrusted).unwrap();
    assert_eq!(traj.states, pd_traj.states);
    assert_eq!(traj.inputs, pd_traj.inputs);

    let record = run_daclyf(&cfg, 4).unwrap();
    assert!(record.failure.is_none());
    assert_eq!(record.baseline, pd_metrics);
    for ep in &record.episodes {
        assert_eq!(ep.trust, 0.0);
        assert_eq!(ep.evaluation.states, pd_traj.states, "episode {}", ep.episode);
        assert_eq!(ep.metrics, pd_metrics);
    }
}

#[test]
fn single_episode_at_zero_trust_returns_nominal() {
    let mut cfg = small();
    cfg.trust.episodes = 1;
    cfg.trust.constant = Some(0.0);
    let record = run_daclyf(&cfg, 2).unwrap();
    assert_eq!(record.episodes.len(), 1);
    assert_eq!(record.episodes[0].metrics, record.baseline);
}

#[test]
fn dataset_sizes_accumulate() {
    let record = run_daclyf(&small(), 5).unwrap();
    assert_eq!(record.episodes.len(), 3);
    let mut total = 0;
    for ep in &record.episodes {
        total += ep.samples;
        assert_eq!(ep.dataset_size, total);
        assert_eq!(ep.samples, ep.experiment.len() - 1);
    }
    assert_eq!(record.dataset.len(), total);
    let counts: Vec<usize> = record.dataset.episode_counts().iter().map(|&(_, n)| n).collect();
    assert_eq!(counts, record.episodes.iter().map(|e| e.samples).collect::<Vec<_>>());
}

fn assert_same(a: &RunRecord, b: &RunRecord) {
    assert_eq!(a.true_params, b.true_params);
    assert_eq!(a.baseline, b.baseline);
    assert_eq!(a.dataset, b.dataset);
    assert_eq!(a.failure, b.failure);
    assert_eq!(a.episodes.len(), b.episodes.len());
    for (x, y) in a.episodes.iter().zip(&b.episodes) {
        assert_eq!(x.trust.to_bits(), y.trust.to_bits());
        assert_eq!(x.initial_pitch.to_bits(), y.initial_pitch.to_bits());
        assert_eq!(x.experiment, y.experiment);
        assert_eq!(x.training, y.training);
        assert_eq!(x.estimator, y.estimator);
        assert_eq!(x.evaluation, y.evaluation);
        assert_eq!(x.metrics, y.metrics);
    }
}

#[test]
fn equal_seeds_give_identical_records() {
    let cfg = small();
    let a = run_daclyf(&cfg, 7).unwrap();
    let b = run_daclyf(&cfg, 7).unwrap();
    assert_same(&a, &b);
    let c = run_daclyf(&cfg, 8).unwrap();
    assert_ne!(a.episodes[0].initial_pitch, c.episodes[0].initial_pitch);
}

/// With an exact model the learned residuals should change nothing: the
/// learned controller tracks like the same augmentation around a zero
/// residual estimate.
#[test]
fn exact_model_learns_nothing() {
    let mut cfg = DaclyfConfig::default();
    cfg.plant.perturbation = 0.0;
    cfg.trust.episodes = 3;
    let record = run_daclyf(&cfg, 3).unwrap();
    assert!(record.failure.is_none());
    let learned = record.episodes.last().unwrap().metrics;

    let setup = Setup::new(&cfg).unwrap();
    let w = trust(3, &cfg.trust).unwrap();
    let mut reference = setup.augmented(zero_estimator(cfg.training.hidden), w).unwrap();
    let (_, exact) = setup.evaluate(&mut reference).unwrap();
    assert!(!learned.diverged && !exact.diverged);
    assert!(
        (learned.ise - exact.ise).abs() <= 0.1 * exact.ise,
        "learned {:.4e}, zero residual {:.4e}",
        learned.ise,
        exact.ise
    );
}
