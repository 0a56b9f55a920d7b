use std::sync::Arc;

use daclyf_core::clf::{Clf, ClfContext, ClfGains, CoordinateOutput, IoLinController, SmoothSine, TrackingProblem};
use daclyf_core::controllers::DerivativeEstimate;
use daclyf_core::dynamics::{Segway, SegwayParams, SimulationSettings};
use daclyf_core::episodic::{run_experiment, Perturbed};
use daclyf_core::learning::{
    empirical_risk, fit_erm, fit_rows, prepare_rows, ErmRow, LearnedDerivative, Mlp, MlpCache, TrainingConfig,
};
use daclyf_core::{RngStream, Vector};

fn context() -> ClfContext {
    let tracking = TrackingProblem::new(
        Arc::new(CoordinateOutput { index: 1, dof: 2 }),
        Arc::new(SmoothSine::default()),
        0.0,
        10.0,
    )
    .unwrap();
    ClfContext::new(
        Arc::new(Segway::new(SegwayParams::default()).unwrap()),
        Arc::new(tracking),
        Arc::new(Clf::from_gains(1, &ClfGains::default()).unwrap()),
    )
    .unwrap()
}

/// Residual pair realized by small fixed networks, so the student class contains it.
struct Teacher {
    a: Mlp,
    b: Mlp,
}

impl Teacher {
    fn new(seed: u64) -> Self {
        let mut rng = RngStream::new(seed);
        Self { a: Mlp::he_init(3, 6, 1, &mut rng), b: Mlp::he_init(3, 6, 1, &mut rng) }
    }

    fn a(&self, f: &[f64]) -> f64 {
        0.5 * self.a.forward(f)[0]
    }

    fn b(&self, f: &[f64]) -> f64 {
        0.5 * self.b.forward(f)[0]
    }

    /// Noise-free rows; `u` from `input` or uniform when `None`.
    fn rows(&self, n: usize, rng: &mut RngStream, input: Option<fn(&[f64]) -> f64>) -> Vec<ErmRow> {
        (0..n)
            .map(|_| {
                let f: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
                let u = match input {
                    Some(g) => g(&f),
                    None => rng.uniform(-2.0, 2.0),
                };
                let base = 0.7 * f[1] - 0.1 * u;
                let target = base + self.a(&f) * u + self.b(&f);
                ErmRow { features: f, u: Vector::from_vec(vec![u]), base, target }
            })
            .collect()
    }
}

#[test]
fn gradients_match_central_differences_on_random_nets() {
    let mut rng = RngStream::new(31);
    for trial in 0..100 {
        let (i, h, o) = (1 + trial % 6, 2 + trial % 9, 1 + trial % 3);
        let mut net = Mlp::he_init(i, h, o, &mut rng);
        for p in net.params_mut() {
            *p += rng.uniform(-0.2, 0.2);
        }
        let x: Vec<f64> = (0..i).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let up: Vec<f64> = (0..o).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let mut cache = MlpCache::default();
        net.forward_cached(&x, &mut cache);
        if cache.pre.iter().any(|p| p.abs() < 1e-4) {
            continue;
        }
        let mut grads = vec![0.0; net.params().len()];
        net.accumulate_gradients(&x, &mut cache, &up, &mut grads);
        let objective = |n: &Mlp| n.forward(&x).iter().zip(&up).map(|(a, b)| a * b).sum::<f64>();
        let eps = 1e-6;
        for k in 0..grads.len() {
            let (mut plus, mut minus) = (net.clone(), net.clone());
            plus.params_mut()[k] += eps;
            minus.params_mut()[k] -= eps;
            let fd = (objective(&plus) - objective(&minus)) / (2.0 * eps);
            let scale = fd.abs().max(grads[k].abs());
            assert!(
                (fd - grads[k]).abs() <= 1e-4 * scale || (fd - grads[k]).abs() <= 1e-9,
                "trial {trial} param {k}: {fd} vs {}",
                grads[k]
            );
        }
    }
}

#[test]
fn synthetic_residuals_are_recovered() {
    let rows = Teacher::new(11).rows(5000, &mut RngStream::new(1), None);
    let (_, report) = fit_rows(&rows, 1, &TrainingConfig::default(), &mut RngStream::new(2)).unwrap();
    assert!(report.final_loss <= 1e-4, "{}", report.final_loss);
}

/// Checked while the loss is still an order of magnitude above where it ends;
/// at the floor consecutive epoch means differ by sampling noise alone.
#[test]
fn epoch_losses_decrease_during_descent() {
    let rows = Teacher::new(12).rows(2000, &mut RngStream::new(3), None);
    let (_, report) = fit_rows(&rows, 1, &TrainingConfig::default(), &mut RngStream::new(4)).unwrap();
    assert!(report.final_loss <= report.initial_loss);
    let floor = 10.0 * report.final_loss;
    let descent: Vec<&[f64]> = report.epoch_losses.windows(2).take_while(|w| w[0] > floor).collect();
    let ups = descent.iter().filter(|w| w[1] > w[0]).count();
    assert!(descent.len() >= 20, "descent lasted {} epochs", descent.len());
    assert!(ups as f64 <= 0.05 * descent.len() as f64, "{ups} of {} epochs increased the loss", descent.len());
}

#[test]
fn exploration_disambiguates_input_coefficient() {
    let cfg = TrainingConfig { hidden: 32, epochs: 150, learning_rate: 3e-3, ..Default::default() };
    let teacher = Teacher::new(13);
    let held_out = teacher.rows(500, &mut RngStream::new(5), None);
    let coefficient_error = |rows: &[ErmRow]| {
        let (est, _) = fit_rows(rows, 1, &cfg, &mut RngStream::new(6)).unwrap();
        held_out.iter().map(|r| (est.residuals(&r.features).0[0] - teacher.a(&r.features)).abs()).sum::<f64>()
            / held_out.len() as f64
    };
    let explored = coefficient_error(&teacher.rows(2000, &mut RngStream::new(7), None));
    let greedy = coefficient_error(&teacher.rows(2000, &mut RngStream::new(7), Some(|f| 1.0 + 0.5 * f[0])));
    assert!(explored < 0.5 * greedy, "explored {explored}, greedy {greedy}");
}

#[test]
fn exact_model_leaves_nothing_to_learn() {
    let ctx = context();
    let settings = SimulationSettings { tf: 5.0, ..Default::default() };
    let mut data = daclyf_core::learning::Dataset::new();
    for k in 0..3u64 {
        let mut c = Perturbed::new(Box::new(IoLinController::new(ctx.clone())), 0.2, RngStream::new(k));
        let q0 = Vector::from_vec(vec![0.0, 0.02 * (k as f64 - 1.0)]);
        let (_, d) = run_experiment(ctx.model.as_ref(), &mut c, &q0, &ctx, 1, &settings, k as usize).unwrap();
        data.aggregate(d);
    }
    let cfg = TrainingConfig { hidden: 32, epochs: 30, ..Default::default() };
    let (est, _) = fit_erm(&data, &ctx, &cfg, &mut RngStream::new(9)).unwrap();
    let learned = LearnedDerivative { ctx: ctx.clone(), estimator: Arc::new(est) };
    let (mut differencing, mut deviation) = (0.0, 0.0);
    for s in data.samples() {
        let base = ctx.vdot_affine(&s.q, &s.qd, s.t).unwrap().eval(&s.u);
        differencing += (s.vdot - base).abs();
        deviation += (learned.estimate(&s.q, &s.qd, s.t).unwrap().eval(&s.u) - base).abs();
    }
    assert!(deviation <= 2.0 * differencing, "deviation {deviation}, differencing {differencing}");
}

#[test]
fn risk_and_fit_on_real_rows() {
    let ctx = context();
    let settings = SimulationSettings { tf: 2.0, ..Default::default() };
    let mut c = Perturbed::new(Box::new(IoLinController::new(ctx.clone())), 0.2, RngStream::new(1));
    let (_, data) =
        run_experiment(ctx.model.as_ref(), &mut c, &Vector::from_vec(vec![0.0, 0.01]), &ctx, 1, &settings, 1).unwrap();
    let cfg = TrainingConfig { hidden: 16, epochs: 5, ..Default::default() };
    let (a, _) = fit_erm(&data, &ctx, &cfg, &mut RngStream::new(3)).unwrap();
    let (b, _) = fit_erm(&data, &ctx, &cfg, &mut RngStream::new(3)).unwrap();
    assert_eq!(a, b);

    let rows = prepare_rows(&data, &ctx).unwrap();
    let learned = LearnedDerivative { ctx: ctx.clone(), estimator: Arc::new(a.clone()) };
    let mut manual = 0.0;
    for s in data.samples() {
        let e = learned.estimate(&s.q, &s.qd, s.t).unwrap().eval(&s.u) - s.vdot;
        manual += e * e;
    }
    manual /= data.len() as f64;
    let risk = empirical_risk(&a, &rows);
    assert!((risk - manual).abs() <= 1e-12 * manual.max(1e-300).max(risk), "{risk} vs {manual}");

    let mut rng = RngStream::new(8);
    for s in data.samples().iter().step_by(7) {
        let d = learned.estimate(&s.q, &s.qd, s.t).unwrap();
        let (u1, u2) = (rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0));
        let lambda = rng.uniform(0.0, 1.0);
        let mixed = d.eval(&Vector::from_vec(vec![lambda * u1 + (1.0 - lambda) * u2]));
        let blend = lambda * d.eval(&Vector::from_vec(vec![u1])) + (1.0 - lambda) * d.eval(&Vector::from_vec(vec![u2]));
        assert!((mixed - blend).abs() <= 1e-12 * (1.0 + mixed.abs()), "{mixed} vs {blend}");
    }
}
