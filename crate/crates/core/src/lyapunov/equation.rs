use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

/// Largest admissible `‖RᵀP + PR + I‖_max`.
pub const RESIDUAL_TOL: f64 = 1e-8;

pub fn lyapunov_residual(r: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    let n = r.nrows();
    (r.transpose() * p + p * r + DMatrix::identity(n, n)).amax()
}

fn is_symmetric(r: &DMatrix<f64>) -> bool {
    let scale = r.amax().max(f64::MIN_POSITIVE);
    (r - r.transpose()).amax() <= 1e-14 * scale
}

/// Solves `RᵀP + PR = −I` for a Hurwitz `R`.
///
/// Symmetric `R` goes through its eigendecomposition; otherwise a complex
/// Schur form `R = Q T Q*` reduces the equation to a triangular sweep.
pub fn solve_lyapunov(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = r.nrows();
    if n == 0 || r.ncols() != n {
        return Err(Error::ShapeMismatch(format!("expected a square matrix, got {}×{}", r.nrows(), r.ncols())));
    }
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    let p = if is_symmetric(r) { symmetric(r)? } else { schur(r)? };
    let res = lyapunov_residual(r, &p);
    if !(res <= RESIDUAL_TOL) {
        return Err(Error::LinearSolveFailure(format!("Lyapunov residual {res:e} exceeds {RESIDUAL_TOL:e}")));
    }
    Ok(p)
}

fn symmetric(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (r + r.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let top = eig.eigenvalues.max();
    if top >= 0.0 {
        return Err(Error::NotHurwitz(top));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| -0.5 / l));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

fn schur(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = r.nrows();
    let (q, t) = crate::linalg::complex_schur(r)?;
    let top = (0..n).map(|i| t[(i, i)].re).fold(f64::NEG_INFINITY, f64::max);
    if top >= 0.0 {
        return Err(Error::NotHurwitz(top));
    }
    // T* Y + Y T = −I with Y = Q* P Q; row-major forward substitution.
    let mut y = DMatrix::<Complex<f64>>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = if i == j { Complex::new(-1.0, 0.0) } else { Complex::new(0.0, 0.0) };
            for k in 0..i {
                acc -= t[(k, i)].conj() * y[(k, j)];
            }
            for k in 0..j {
                acc -= y[(i, k)] * t[(k, j)];
            }
            y[(i, j)] = acc / (t[(i, i)].conj() + t[(j, j)]);
        }
    }
    let p = &q * y * q.adjoint();
    let p = p.map(|z| z.re);
    Ok((&p + p.transpose()) * 0.5)
}
