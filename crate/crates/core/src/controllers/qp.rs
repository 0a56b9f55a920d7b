use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::numerics::{lu_solve, Matrix, Vector};

/// `min ½zᵀHz + gᵀz + r  s.t.  A z ≤ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub cost: Matrix,
    pub linear: Vector,
    pub constant: f64,
    pub constraints: Matrix,
    pub bounds: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: Vector,
    /// Indices of constraints held at equality, in the order they were added.
    pub active_set: Vec<usize>,
    /// One multiplier per constraint, zero for inactive rows.
    pub multipliers: Vector,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `max(0, max(Az − b))`
    pub primal: f64,
    /// `‖Hz + g + Aᵀλ‖∞`
    pub stationarity: f64,
    /// `max(0, −min λ)`
    pub dual: f64,
    /// `max |λᵢ (aᵢᵀz − bᵢ)|`
    pub complementarity: f64,
}

impl QpProblem {
    pub fn unconstrained(cost: Matrix, linear: Vector) -> Self {
        let d = linear.len();
        Self { cost, linear, constant: 0.0, constraints: Matrix::zeros(0, d), bounds: Vector::zeros(0) }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, z: &Vector) -> f64 {
        0.5 * z.dot(&(&self.cost * z)) + self.linear.dot(z) + self.constant
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        let c = self.bounds.len();
        if self.cost.shape() != (d, d) || self.constraints.shape() != (c, d) {
            return Err(Error::Dimension(format!(
                "QP with {d} variables and {c} constraints has cost {:?} and constraint matrix {:?}",
                self.cost.shape(),
                self.constraints.shape()
            )));
        }
        let scale = self.cost.amax().max(1.0);
        if (&self.cost - self.cost.transpose()).amax() > 1e-12 * scale {
            return Err(Error::NotSymmetric((&self.cost - self.cost.transpose()).amax()));
        }
        Ok(())
    }
}

pub fn kkt_residuals(p: &QpProblem, s: &QpSolution) -> KktResiduals {
    let slack = &p.constraints * &s.z - &p.bounds;
    let grad = &p.cost * &s.z + &p.linear + p.constraints.tr_mul(&s.multipliers);
    KktResiduals {
        primal: slack.iter().fold(0.0_f64, |m, &v| m.max(v)),
        stationarity: grad.amax(),
        dual: s.multipliers.iter().fold(0.0_f64, |m, &v| m.max(-v)),
        complementarity: slack
            .iter()
            .zip(s.multipliers.iter())
            .fold(0.0_f64, |m, (&sl, &l)| m.max((sl * l).abs())),
    }
}

/// Dual active-set method (Goldfarb–Idnani) for strictly convex QPs.
///
/// Starts from the unconstrained minimizer and adds the most violated
/// constraint each outer iteration, dropping constraints whose multipliers
/// would turn negative. The cost matrix must be positive definite. When the
/// primal step vanishes and no multiplier can block, the polyhedron is empty.
pub fn solve_qp(p: &QpProblem) -> Result<QpSolution> {
    p.validate()?;
    let d = p.dim();
    let c = p.bounds.len();
    let chol = Cholesky::new(p.cost.clone())
        .ok_or_else(|| Error::QpNumerical("cost matrix is not positive definite".into()))?;
    let max_iterations = 100 * (d + c).max(1);

    let mut z = -chol.solve(&p.linear);
    let mut active: Vec<usize> = Vec::new();
    let mut lambda: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let row = |i: usize| p.constraints.row(i).transpose();
    let violation = |z: &Vector, i: usize| row(i).dot(z) - p.bounds[i];
    let tolerance = |i: usize| 1e-12 * (1.0 + p.bounds[i].abs() + row(i).amax());

    loop {
        let candidate = (0..c)
            .filter(|i| !active.contains(i))
            .filter(|&i| violation(&z, i) > tolerance(i))
            .map(|i| (i, violation(&z, i) / row(i).norm().max(1e-300)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((added, _)) = candidate else {
            break;
        };
        let a_p = row(added);
        let mut lambda_p = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iterations {
                return Err(Error::QpNumerical(format!(
                    "iteration limit {max_iterations} reached"
                )));
            }
            let (dz, dl) = step_direction(p, &active, &a_p)?;

            let mut dual_step = f64::INFINITY;
            let mut blocking = None;
            for (j, (&l, &dlj)) in lambda.iter().zip(dl.iter()).enumerate() {
                if dlj < -1e-14 {
                    let ratio = -l / dlj;
                    if ratio < dual_step {
                        dual_step = ratio;
                        blocking = Some(j);
                    }
                }
            }
            let curvature = a_p.dot(&dz);
            let primal_step = if curvature < -1e-14 * a_p.norm_squared() / p.cost.amax().max(1e-300) {
                violation(&z, added) / -curvature
            } else {
                f64::INFINITY
            };

            if primal_step.is_infinite() && dual_step.is_infinite() {
                return Err(Error::QpInfeasible);
            }
            let step = primal_step.min(dual_step);
            if step.is_finite() {
                z += &dz * step;
            }
            for (l, dlj) in lambda.iter_mut().zip(dl.iter()) {
                *l = (*l + step * dlj).max(0.0);
            }
            lambda_p += step;

            if primal_step <= dual_step {
                active.push(added);
                lambda.push(lambda_p);
                break;
            }
            let j = blocking.expect("finite dual step has a blocking constraint");
            active.remove(j);
            lambda.remove(j);
        }
    }

    let mut multipliers = Vector::zeros(c);
    for (&i, &l) in active.iter().zip(lambda.iter()) {
        multipliers[i] = l;
    }
    let objective = p.objective(&z);
    Ok(QpSolution { z, active_set: active, multipliers, objective, iterations })
}

/// Solves `[H A_Wᵀ; A_W 0] [dz; dλ] = [−a_p; 0]`.
fn step_direction(p: &QpProblem, active: &[usize], a_p: &Vector) -> Result<(Vector, Vector)> {
    let d = p.dim();
    let w = active.len();
    let mut kkt = Matrix::zeros(d + w, d + w);
    kkt.view_mut((0, 0), (d, d)).copy_from(&p.cost);
    for (j, &i) in active.iter().enumerate() {
        for k in 0..d {
            kkt[(k, d + j)] = p.constraints[(i, k)];
            kkt[(d + j, k)] = p.constraints[(i, k)];
        }
    }
    let mut rhs = Vector::zeros(d + w);
    rhs.rows_mut(0, d).copy_from(&(-a_p));
    let sol = lu_solve(&kkt, &rhs)
        .map_err(|e| Error::QpNumerical(format!("degenerate working set: {e}")))?;
    Ok((sol.rows(0, d).into_owned(), sol.rows(d, w).into_owned()))
}
