use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Homogeneous Dirichlet, `s(0) = s(d) = 0`.
    #[serde(alias = "dirichlet0")]
    Dirichlet,
    /// Homogeneous Neumann, zero flux at both ends.
    #[serde(alias = "neumann0")]
    Neumann,
}

/// Uniform grid on `(0, d)`.
///
/// Dirichlet species live on the vertex-centred nodes `x_i = (i+1) h` with
/// `h = d/(n+1)`. Neumann species live on cell centres `x_i = (i + ½) d/n`,
/// so the zero-flux faces sit exactly at `0` and `d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub d: f64,
    pub n_interior: usize,
}

impl Grid1D {
    pub fn new(d: f64, n_interior: usize) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidGrid(format!("domain length must be positive, got {d}")));
        }
        if n_interior == 0 {
            return Err(Error::InvalidGrid("need at least one node".into()));
        }
        Ok(Grid1D { d, n_interior })
    }

    /// Dirichlet spacing `d/(n+1)`.
    pub fn h(&self) -> f64 {
        self.d / (self.n_interior as f64 + 1.0)
    }

    pub fn spacing(&self, bc: Boundary) -> f64 {
        match bc {
            Boundary::Dirichlet => self.h(),
            Boundary::Neumann => self.d / self.n_interior as f64,
        }
    }

    pub fn nodes(&self, bc: Boundary) -> Vec<f64> {
        let h = self.spacing(bc);
        let shift = match bc {
            Boundary::Dirichlet => 1.0,
            Boundary::Neumann => 0.5,
        };
        (0..self.n_interior).map(|i| (i as f64 + shift) * h).collect()
    }

    /// Quadrature weights: trapezoid with zero end values (Dirichlet) or
    /// midpoint cells (Neumann). Both are uniform.
    pub fn weight(&self, bc: Boundary) -> f64 {
        self.spacing(bc)
    }

    /// Continuum time scale `(d/π)²/c`.
    pub fn diffusion_time(&self, c: f64) -> f64 {
        (self.d / PI).powi(2) / c
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples `i` and `i+1`.
    pub off: Vec<f64>,
}

impl Tridiag {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.off[i] * x[i + 1];
            }
            y[i] = v;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.len();
        nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if j == i + 1 {
                self.off[i]
            } else if i == j + 1 {
                self.off[j]
            } else {
                0.0
            }
        })
    }

    /// `I − dt·(self + shift·I)`, pre-factored for repeated solves.
    pub fn implicit_factor(&self, dt: f64, shift: f64) -> Result<ThomasFactor> {
        let n = self.len();
        let a: Vec<f64> = self.off.iter().map(|o| -dt * o).collect();
        let mut cp = vec![0.0; n.saturating_sub(1)];
        let mut denom = vec![0.0; n];
        for i in 0..n {
            let b = 1.0 - dt * (self.diag[i] + shift);
            denom[i] = if i == 0 { b } else { b - a[i - 1] * cp[i - 1] };
            if denom[i].abs() < 1e-300 || !denom[i].is_finite() {
                return Err(Error::LinearSolveFailure(format!("zero pivot at row {i}")));
            }
            if i + 1 < n {
                cp[i] = a[i] / denom[i];
            }
        }
        Ok(ThomasFactor { a, cp, denom })
    }
}

/// LU data of a symmetric tridiagonal system (Thomas algorithm).
#[derive(Clone, Debug)]
pub struct ThomasFactor {
    a: Vec<f64>,
    cp: Vec<f64>,
    denom: Vec<f64>,
}

impl ThomasFactor {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        x[0] /= self.denom[0];
        for i in 1..n {
            x[i] = (x[i] - self.a[i - 1] * x[i - 1]) / self.denom[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= self.cp[i] * x[i + 1];
        }
    }
}

/// Second-order `c·d²/dx²` on the grid for the given boundary condition.
pub fn laplacian(grid: &Grid1D, bc: Boundary, c: f64) -> Tridiag {
    let n = grid.n_interior;
    let h = grid.spacing(bc);
    let s = c / (h * h);
    let mut diag = vec![-2.0 * s; n];
    let off = vec![s; n.saturating_sub(1)];
    if bc == Boundary::Neumann {
        // Ghost values mirror the first/last node across the zero-flux faces.
        diag[0] += s;
        diag[n - 1] += s;
    }
    Tridiag { diag, off }
}

/// Dense version of [`laplacian`].
pub fn laplacian_matrix(grid: &Grid1D, bc: Boundary, c: f64) -> nalgebra::DMatrix<f64> {
    laplacian(grid, bc, c).to_dense()
}

/// Closed-form Dirichlet eigenvalues `−(4c/h²) sin²(kπh/(2d))`, `k = 1..n`.
pub fn dirichlet_eigenvalues(grid: &Grid1D, c: f64) -> Vec<f64> {
    let h = grid.h();
    (1..=grid.n_interior)
        .map(|k| -(4.0 * c / (h * h)) * (k as f64 * PI * h / (2.0 * grid.d)).sin().powi(2))
        .collect()
}

/// Closed-form Neumann eigenvalues `−(4c/h²) sin²(kπ/(2n))`, `k = 0..n−1`.
pub fn neumann_eigenvalues(grid: &Grid1D, c: f64) -> Vec<f64> {
    let h = grid.spacing(Boundary::Neumann);
    let n = grid.n_interior as f64;
    (0..grid.n_interior)
        .map(|k| -(4.0 * c / (h * h)) * (k as f64 * PI / (2.0 * n)).sin().powi(2))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    L2,
    L4,
    H10,
    Sup,
}

impl std::str::FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(NormKind::L2),
            "l4" => Ok(NormKind::L4),
            "h10" | "h1_0" | "h1" => Ok(NormKind::H10),
            "sup" | "linf" => Ok(NormKind::Sup),
            other => Err(Error::InvalidParameter(format!("unknown norm `{other}`"))),
        }
    }
}

/// Discrete norm of one species.
///
/// `H10` is the L2 norm of forward differences of the padded field: zero
/// padding for Dirichlet, mirrored ghost values for Neumann. With these
/// choices `‖s‖²_{H10} = −⟨L s, s⟩` holds exactly for the discrete Laplacian.
pub fn norm(grid: &Grid1D, bc: Boundary, s: &[f64], which: NormKind) -> f64 {
    let w = grid.weight(bc);
    match which {
        NormKind::L2 => (w * s.iter().map(|v| v * v).sum::<f64>()).sqrt(),
        NormKind::L4 => (w * s.iter().map(|v| v.powi(4)).sum::<f64>()).powf(0.25),
        NormKind::Sup => s.iter().fold(0.0, |m, v| m.max(v.abs())),
        NormKind::H10 => h10_squared(grid, bc, s).sqrt(),
    }
}

pub fn h10_squared(grid: &Grid1D, bc: Boundary, s: &[f64]) -> f64 {
    let h = grid.spacing(bc);
    let mut acc: f64 = s.windows(2).map(|p| (p[1] - p[0]).powi(2)).sum();
    if bc == Boundary::Dirichlet {
        acc += s[0] * s[0] + s[s.len() - 1] * s[s.len() - 1];
    }
    acc / h
}

/// Weighted inner product `Σ w a_i b_i`.
pub fn inner(grid: &Grid1D, bc: Boundary, a: &[f64], b: &[f64]) -> f64 {
    grid.weight(bc) * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn stencil_small() {
        let g = Grid1D::new(4.0, 3).unwrap();
        assert_eq!(g.h(), 1.0);
        let m = laplacian_matrix(&g, Boundary::Dirichlet, 1.0);
        let want = nalgebra::DMatrix::from_row_slice(3, 3, &[-2., 1., 0., 1., -2., 1., 0., 1., -2.]);
        assert_eq!(m, want);
        let n = laplacian_matrix(&Grid1D::new(3.0, 3).unwrap(), Boundary::Neumann, 1.0);
        assert_eq!(n.row(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, 1.0, 0.0]);
        assert!(n.row_iter().all(|r| r.sum().abs() < 1e-15));
    }

    #[test]
    fn eigenvalues_match_closed_form() {
        for bc in [Boundary::Dirichlet, Boundary::Neumann] {
            let g = Grid1D::new(PI, 40).unwrap();
            let m = laplacian_matrix(&g, bc, 0.7);
            let mut num: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
            num.sort_by(|a, b| b.total_cmp(a));
            let want = match bc {
                Boundary::Dirichlet => dirichlet_eigenvalues(&g, 0.7),
                Boundary::Neumann => neumann_eigenvalues(&g, 0.7),
            };
            for (a, b) in num.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
        let g = Grid1D::new(PI, 200).unwrap();
        let l1 = dirichlet_eigenvalues(&g, 1.0)[0];
        assert!((l1 + 1.0).abs() < g.h() * g.h());
    }

    #[test]
    fn norms_of_sine() {
        let g = Grid1D::new(2.0, 200).unwrap();
        let x = g.nodes(Boundary::Dirichlet);
        let s: Vec<f64> = x.iter().map(|x| (PI * x / 2.0).sin()).collect();
        assert_relative_eq!(norm(&g, Boundary::Dirichlet, &s, NormKind::L2), 1.0, max_relative = 1e-4);
        assert_relative_eq!(norm(&g, Boundary::Dirichlet, &s, NormKind::H10), PI / 2.0, max_relative = 1e-4);
        assert_relative_eq!(norm(&g, Boundary::Dirichlet, &s, NormKind::Sup), 1.0, max_relative = 1e-4);
        let zero = vec![0.0; 200];
        for k in [NormKind::L2, NormKind::L4, NormKind::H10, NormKind::Sup] {
            assert_eq!(norm(&g, Boundary::Dirichlet, &zero, k), 0.0);
        }
    }

    #[test]
    fn h10_is_minus_laplacian_energy() {
        for bc in [Boundary::Dirichlet, Boundary::Neumann] {
            let g = Grid1D::new(3.0, 17).unwrap();
            let s: Vec<f64> = (0..17).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
            let ls = laplacian(&g, bc, 1.0).matvec(&s);
            assert_relative_eq!(-inner(&g, bc, &ls, &s), h10_squared(&g, bc, &s), max_relative = 1e-12);
        }
    }

    #[test]
    fn thomas_solves_implicit_system() {
        let g = Grid1D::new(PI, 30).unwrap();
        let t = laplacian(&g, Boundary::Neumann, 2.0);
        let f = t.implicit_factor(0.1, -0.5).unwrap();
        let b: Vec<f64> = (0..30).map(|i| (i as f64).cos()).collect();
        let mut x = b.clone();
        f.solve_in_place(&mut x);
        let tx = t.matvec(&x);
        for i in 0..30 {
            let lhs = x[i] - 0.1 * (tx[i] - 0.5 * x[i]);
            assert!((lhs - b[i]).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn friedrichs(coefs in proptest::collection::vec(-1.0f64..1.0, 1..12), d in 0.5f64..5.0) {
            let g = Grid1D::new(d, 100).unwrap();
            let x = g.nodes(Boundary::Dirichlet);
            let s: Vec<f64> = x.iter().map(|x| {
                coefs.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * PI * x / d).sin()).sum()
            }).collect();
            let l2 = norm(&g, Boundary::Dirichlet, &s, NormKind::L2);
            let h1 = norm(&g, Boundary::Dirichlet, &s, NormKind::H10);
            // the discrete first eigenvalue sits O(h²) below (π/d)²
            let slack = 1.0 + (PI * g.h() / d).powi(2) / 12.0;
            prop_assert!(l2 <= d / PI * h1 * slack);
        }
    }
}
