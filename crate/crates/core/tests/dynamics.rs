use daclyf_core::dynamics::{simulate, RoboticModel, Segway, SegwayParams, SimulationSettings};
use daclyf_core::numerics::rk4_step;
use daclyf_core::{Matrix, Vector};
use nalgebra::dvector;
use proptest::prelude::*;

fn segway() -> Segway {
    Segway::new(SegwayParams::default()).unwrap()
}

fn lossless() -> Segway {
    Segway::new(SegwayParams { back_emf: 0.0, ..SegwayParams::default() }).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn inertia_symmetric_positive_definite(x in -50.0f64..50.0, theta in -10.0f64..10.0) {
        let d = segway().inertia(&dvector![x, theta]);
        prop_assert!((&d - d.transpose()).amax() <= 1e-12);
        prop_assert!(d.clone().cholesky().is_some());
    }
}

proptest! {
    #[test]
    fn forward_dynamics_affine_in_input(
        theta in -1.5f64..1.5,
        xd in -3.0f64..3.0,
        thetad in -3.0f64..3.0,
        u1 in -20.0f64..20.0,
        u2 in -20.0f64..20.0,
    ) {
        let s = segway();
        let (q, qd) = (dvector![0.7, theta], dvector![xd, thetad]);
        let acc = |u: f64| s.forward_dynamics(&q, &qd, &dvector![u]).unwrap();
        let lhs = acc(u1) + acc(u2) - acc(0.0) * 2.0;
        let rhs = acc(u1 + u2) - acc(0.0);
        prop_assert!((lhs - rhs).amax() <= 1e-10);
    }

    #[test]
    fn coriolis_skew_symmetry(theta in -3.0f64..3.0, xd in -3.0f64..3.0, thetad in -3.0f64..3.0) {
        let s = segway();
        let (q, qd) = (dvector![0.0, theta], dvector![xd, thetad]);
        let h = 1e-6;
        let d_dot: Matrix = (s.inertia(&(&q + &qd * h)) - s.inertia(&(&q - &qd * h))) / (2.0 * h);
        let form = qd.dot(&((d_dot - s.coriolis(&q, &qd) * 2.0) * &qd));
        prop_assert!(form.abs() <= 1e-6, "{}", form);
    }
}

#[test]
fn energy_conserved_without_input_or_back_emf() {
    let s = lossless();
    let mut state = dvector![0.0, 0.3, 0.5, -0.4];
    let energy = |x: &Vector| s.energy(&x.rows(0, 2).into_owned(), &x.rows(2, 2).into_owned());
    let e0 = energy(&state);
    let field = |_: f64, x: &Vector| {
        let (q, qd) = (x.rows(0, 2).into_owned(), x.rows(2, 2).into_owned());
        let acc = s.forward_dynamics(&q, &qd, &dvector![0.0]).unwrap();
        dvector![qd[0], qd[1], acc[0], acc[1]]
    };
    let h = 1e-3;
    for i in 0..1000 {
        state = rk4_step(field, &state, i as f64 * h, h).unwrap();
    }
    let drift = (energy(&state) - e0).abs() / e0.abs();
    assert!(drift < 1e-6, "relative energy drift {drift}");
}

#[test]
fn simulation_is_deterministic() {
    let s = segway();
    let settings = SimulationSettings { tf: 2.0, ..Default::default() };
    let run = || {
        let mut pd = |q: &Vector, qd: &Vector, _t: f64| dvector![-200.0 * q[1] - 30.0 * qd[1]];
        simulate(&s, &mut pd, &dvector![0.0, 0.05], &dvector![0.0, 0.0], &settings).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.states, b.states);
    assert_eq!(a.inputs, b.inputs);
}
