use daclyf_core::controllers::{kkt_residuals, solve_qp, QpProblem};
use daclyf_core::{Error, Matrix, RngStream, Vector};

/// Strictly convex QP whose feasible set contains a random point.
fn random_problem(rng: &mut RngStream, d: usize, c: usize) -> QpProblem {
    let w = Matrix::from_fn(d, d, |_, _| rng.uniform(-1.0, 1.0));
    let cost = &w * w.transpose() + Matrix::identity(d, d) * 0.1;
    let linear = Vector::from_fn(d, |_, _| rng.uniform(-5.0, 5.0));
    let constraints = Matrix::from_fn(c, d, |_, _| rng.uniform(-1.0, 1.0));
    let inside = Vector::from_fn(d, |_, _| rng.uniform(-1.0, 1.0));
    let bounds = &constraints * &inside + Vector::from_fn(c, |_, _| rng.uniform(0.0, 0.5));
    QpProblem { cost, linear, constant: 0.0, constraints, bounds }
}

/// Best feasible objective on successively zoomed grids.
fn grid_minimum(p: &QpProblem) -> f64 {
    let (mut cx, mut cy, mut half) = (0.0, 0.0, 500.0);
    let n = 400;
    let mut best = f64::INFINITY;
    for _ in 0..25 {
        let step = 2.0 * half / n as f64;
        let (mut bx, mut by) = (cx, cy);
        for i in 0..=n {
            for j in 0..=n {
                let z = Vector::from_vec(vec![cx - half + i as f64 * step, cy - half + j as f64 * step]);
                let feasible = (&p.constraints * &z - &p.bounds).iter().all(|&v| v <= 0.0);
                if feasible {
                    let f = p.objective(&z);
                    if f < best {
                        best = f;
                        bx = z[0];
                        by = z[1];
                    }
                }
            }
        }
        cx = bx;
        cy = by;
        half = 50.0 * step;
    }
    best
}

#[test]
fn random_instances_satisfy_kkt() {
    let mut rng = RngStream::new(2024);
    for trial in 0..1000 {
        let d = 1 + trial % 4;
        let c = trial % 6;
        let p = random_problem(&mut rng, d, c);
        let s = solve_qp(&p).unwrap();
        let r = kkt_residuals(&p, &s);
        assert!(r.primal <= 1e-9, "trial {trial}: {r:?}");
        assert!(r.stationarity <= 1e-8, "trial {trial}: {r:?}");
        assert!(r.dual <= 1e-10, "trial {trial}: {r:?}");
        assert!(r.complementarity <= 1e-9, "trial {trial}: {r:?}");
    }
}

#[test]
fn two_variable_instances_match_grid_search() {
    let mut rng = RngStream::new(77);
    for trial in 0..20 {
        let p = random_problem(&mut rng, 2, 1 + trial % 4);
        let s = solve_qp(&p).unwrap();
        let grid = grid_minimum(&p);
        assert!(grid >= s.objective - 1e-9, "trial {trial}: grid beat solver");
        assert!((grid - s.objective).abs() <= 1e-4 * s.objective.abs().max(1.0), "trial {trial}: {grid} vs {}", s.objective);
    }
}

#[test]
fn empty_polyhedron_is_infeasible() {
    let p = QpProblem {
        cost: Matrix::identity(2, 2),
        linear: Vector::zeros(2),
        constant: 0.0,
        constraints: Matrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]),
        bounds: Vector::from_vec(vec![-1.0, -1.0]),
    };
    assert!(matches!(solve_qp(&p), Err(Error::QpInfeasible)));
}
