//! Dense helpers shared by the spectrum and the Lyapunov solver.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

/// Phases tried when the plain Schur iteration stalls. Spectra made of
/// conjugate pairs with a common imaginary part (equal diffusion with skew
/// coupling) stall the shifted QR iteration; rotating by `e^{iθ}` breaks the tie.
const PHASES: [f64; 3] = [0.3, 0.7, 1.1];

/// Complex Schur form `A = Q T Q*` with `T` upper triangular.
pub(crate) fn complex_schur(a: &DMatrix<f64>) -> Result<(DMatrix<Complex<f64>>, DMatrix<Complex<f64>>)> {
    let n = a.nrows();
    let ac = a.map(|v| Complex::new(v, 0.0));
    if let Some(s) = ac.clone().try_schur(1e-14, 100 * n.max(10)) {
        return Ok(s.unpack());
    }
    for theta in PHASES {
        let ph = Complex::new(theta.cos(), theta.sin());
        if let Some(s) = ac.map(|z| z * ph).try_schur(1e-14, 100 * n.max(10)) {
            let (q, t) = s.unpack();
            return Ok((q, t.map(|z| z / ph)));
        }
    }
    Err(Error::EigensolverFailure("Schur iteration did not converge".into()))
}

/// Eigenvalues of a real matrix, sorted by decreasing real part.
pub(crate) fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = a.nrows();
    let mut eig: Vec<Complex<f64>> = match a.clone().try_schur(1e-14, 100 * n.max(10)) {
        Some(s) => s.complex_eigenvalues().iter().copied().collect(),
        None => {
            let (_, t) = complex_schur(a)?;
            t.diagonal().iter().copied().collect()
        }
    };
    eig.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(eig)
}
