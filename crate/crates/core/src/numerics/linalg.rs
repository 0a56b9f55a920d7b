use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Smallest pivot magnitude accepted by [`lu_solve`] after partial pivoting.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const JACOBI_TOLERANCE: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn lu_solve(a: &Matrix, b: &Vector) -> Result<Vector> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!(
            "lu_solve needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if b.len() != n {
        return Err(Error::Dimension(format!(
            "right-hand side has length {}, expected {}",
            b.len(),
            n
        )));
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, lu[(r, col)]))
            .max_by(|l, r| l.1.abs().total_cmp(&r.1.abs()))
            .expect("non-empty pivot range");
        if !(pivot.abs() >= PIVOT_TOLERANCE) {
            return Err(Error::Singular { column: col, pivot });
        }
        if pivot_row != col {
            lu.swap_rows(pivot_row, col);
            x.swap_rows(pivot_row, col);
        }
        for r in col + 1..n {
            let factor = lu[(r, col)] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                lu[(r, c)] -= factor * lu[(col, c)];
            }
            x[r] -= factor * x[col];
        }
    }
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|c| lu[(row, c)] * x[c]).sum();
        x[row] = (x[row] - tail) / lu[(row, row)];
    }
    Ok(x)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    Matrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

fn asymmetry(s: &Matrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..s.nrows() {
        for j in i + 1..s.ncols() {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    worst
}

fn check_symmetric(s: &Matrix) -> Result<()> {
    if !s.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let scale = s.amax().max(1.0);
    let asym = asymmetry(s);
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

pub fn is_positive_definite(m: &Matrix) -> bool {
    m.is_square() && Cholesky::new(m.clone()).is_some()
}

/// Solves the continuous-time Lyapunov equation `Aᵀ P + P A = -Q`.
///
/// The equation is vectorized into `(I ⊗ Aᵀ + Aᵀ ⊗ I) vec(P) = -vec(Q)` and
/// solved with [`lu_solve`]. The result is symmetrized. A singular system, or a
/// solution that is not positive definite, means `A` is not Hurwitz.
pub fn solve_ctle(a_cl: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = a_cl.nrows();
    if !a_cl.is_square() || q.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "CTLE needs square matrices of equal size, got {:?} and {:?}",
            a_cl.shape(),
            q.shape()
        )));
    }
    check_symmetric(q)?;
    if !is_positive_definite(q) {
        return Err(Error::NotPositiveDefinite);
    }
    let eye = Matrix::identity(n, n);
    let at = a_cl.transpose();
    let system = kron(&eye, &at) + kron(&at, &eye);
    // nalgebra storage is column-major, so the slice is vec(Q).
    let rhs = -Vector::from_column_slice(q.as_slice());
    let vec_p = lu_solve(&system, &rhs)?;
    let p = Matrix::from_column_slice(n, n, vec_p.as_slice());
    let p = (&p + p.transpose()) * 0.5;
    if !is_positive_definite(&p) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(p)
}

/// All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.
pub fn sym_eigenvalues(s: &Matrix) -> Result<Vec<f64>> {
    check_symmetric(s)?;
    let n = s.nrows();
    let mut a = (s + s.transpose()) * 0.5;
    let tol = JACOBI_TOLERANCE * a.norm().max(1.0);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Extreme eigenvalues `(λ_min, λ_max)` of a symmetric matrix.
pub fn sym_eig_bounds(s: &Matrix) -> Result<(f64, f64)> {
    let eig = sym_eigenvalues(s)?;
    match (eig.first(), eig.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(Error::Dimension("empty matrix has no eigenvalues".into())),
    }
}
