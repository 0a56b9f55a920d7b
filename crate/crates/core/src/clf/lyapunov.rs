use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{is_positive_definite, solve_ctle, sym_eig_bounds, Matrix, Vector};

/// Scalar gains applied to every output, `K_p = kp·I`, `K_d = kd·I`, `Q = q·I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClfGains {
    pub kp: f64,
    pub kd: f64,
    pub q: f64,
}

impl Default for ClfGains {
    fn default() -> Self {
        Self { kp: 25.0, kd: 10.0, q: 1.0 }
    }
}

/// Quadratic CLF `V(η) = ηᵀPη` with `A_clᵀP + PA_cl = −Q`, `A_cl = F − GK`.
#[derive(Debug, Clone, PartialEq)]
pub struct Clf {
    kp: Matrix,
    kd: Matrix,
    gain: Matrix,
    f: Matrix,
    g: Matrix,
    a_cl: Matrix,
    q: Matrix,
    p: Matrix,
    c1: f64,
    c2: f64,
    c3: f64,
}

fn check_spd(name: &str, m: &Matrix, k: usize) -> Result<()> {
    if m.shape() != (k, k) {
        return Err(Error::Dimension(format!("{name} must be {k}x{k}, got {:?}", m.shape())));
    }
    if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) || !is_positive_definite(m) {
        return Err(Error::InvalidInput(format!("{name} must be symmetric positive definite")));
    }
    Ok(())
}

impl Clf {
    pub fn new(kp: Matrix, kd: Matrix, q: Matrix) -> Result<Self> {
        let k = kp.nrows();
        if k == 0 {
            return Err(Error::Dimension("at least one output is required".into()));
        }
        check_spd("K_p", &kp, k)?;
        check_spd("K_d", &kd, k)?;
        check_spd("Q", &q, 2 * k)?;

        let mut f = Matrix::zeros(2 * k, 2 * k);
        f.view_mut((0, k), (k, k)).fill_with_identity();
        let mut g = Matrix::zeros(2 * k, k);
        g.view_mut((k, 0), (k, k)).fill_with_identity();
        let mut gain = Matrix::zeros(k, 2 * k);
        gain.view_mut((0, 0), (k, k)).copy_from(&kp);
        gain.view_mut((0, k), (k, k)).copy_from(&kd);

        let a_cl = &f - &g * &gain;
        let p = solve_ctle(&a_cl, &q)?;
        let (c1, c2) = sym_eig_bounds(&p)?;
        let (c3, _) = sym_eig_bounds(&q)?;
        Ok(Self { kp, kd, gain, f, g, a_cl, q, p, c1, c2, c3 })
    }

    pub fn from_gains(k: usize, gains: &ClfGains) -> Result<Self> {
        let eye = Matrix::identity(k, k);
        Self::new(&eye * gains.kp, &eye * gains.kd, Matrix::identity(2 * k, 2 * k) * gains.q)
    }

    /// Replaces the decrease rate `c₃`, which may not exceed `λ_min(Q)`.
    pub fn with_decay_rate(mut self, c3: f64) -> Result<Self> {
        let (lambda_min, _) = sym_eig_bounds(&self.q)?;
        if !(c3 > 0.0 && c3 <= lambda_min) {
            return Err(Error::InvalidInput(format!(
                "decay rate c3 = {c3} must lie in (0, λ_min(Q) = {lambda_min}]"
            )));
        }
        self.c3 = c3;
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.kp.nrows()
    }

    pub fn value(&self, eta: &Vector) -> f64 {
        eta.dot(&(&self.p * eta))
    }

    /// `∂V/∂η = 2Pη`.
    pub fn gradient(&self, eta: &Vector) -> Vector {
        &self.p * eta * 2.0
    }

    pub fn kp(&self) -> &Matrix {
        &self.kp
    }

    pub fn kd(&self) -> &Matrix {
        &self.kd
    }

    /// `K = [K_p K_d]`.
    pub fn gain(&self) -> &Matrix {
        &self.gain
    }

    pub fn f(&self) -> &Matrix {
        &self.f
    }

    pub fn g(&self) -> &Matrix {
        &self.g
    }

    pub fn a_cl(&self) -> &Matrix {
        &self.a_cl
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn p(&self) -> &Matrix {
        &self.p
    }

    /// `λ_min(P)`.
    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// `λ_max(P)`.
    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// Required decrease rate in `V̇ ≤ −c₃‖η‖²`.
    pub fn c3(&self) -> f64 {
        self.c3
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn default_segway_clf() {
        let clf = Clf::from_gains(1, &ClfGains::default()).unwrap();
        // Hand solution for A_cl = [[0, 1], [-25, -10]], Q = I:
        // p12 = 1/50, p22 = (1 + 2 p12)/20, p11 = 10 p12 + 25 p22.
        let p12 = 1.0 / 50.0;
        let p22 = (1.0 + 2.0 * p12) / 20.0;
        let p11 = 10.0 * p12 + 25.0 * p22;
        assert_relative_eq!(clf.p(), &dmatrix![p11, p12; p12, p22], epsilon = 1e-12);
        assert_eq!(clf.c3(), 1.0);
        assert!(clf.c1() > 0.0 && clf.c2() >= clf.c1());
    }

    #[test]
    fn value_and_gradient() {
        let clf = Clf::new(dmatrix![1.0], dmatrix![1.0], Matrix::identity(2, 2)).unwrap();
        assert_eq!(clf.value(&Vector::zeros(2)), 0.0);
        assert_eq!(clf.gradient(&Vector::zeros(2)), Vector::zeros(2));
        let eta = dvector![3.0, 4.0];
        assert_relative_eq!(clf.gradient(&eta), clf.p() * &eta * 2.0);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let clf = Clf::from_gains(1, &ClfGains::default()).unwrap();
        let h = 1e-6;
        for eta in [dvector![0.3, -1.2], dvector![-0.05, 0.4], dvector![2.0, 2.0]] {
            let grad = clf.gradient(&eta);
            for i in 0..2 {
                let mut ep = eta.clone();
                let mut em = eta.clone();
                ep[i] += h;
                em[i] -= h;
                let fd = (clf.value(&ep) - clf.value(&em)) / (2.0 * h);
                assert_relative_eq!(grad[i], fd, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn rejects_bad_gains() {
        assert!(Clf::new(dmatrix![-1.0], dmatrix![1.0], Matrix::identity(2, 2)).is_err());
        assert!(Clf::new(dmatrix![1.0], dmatrix![1.0], Matrix::identity(3, 3)).is_err());
        let clf = Clf::from_gains(1, &ClfGains::default()).unwrap();
        assert!(clf.clone().with_decay_rate(2.0).is_err());
        assert_eq!(clf.with_decay_rate(0.5).unwrap().c3(), 0.5);
    }
}
