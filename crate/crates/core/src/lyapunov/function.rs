use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kfun::KFun;
use crate::pde::{h10_squared, laplacian, Field, Model, NormKind, ScalarMap, Stepper};

/// How a Lie derivative is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Gradient of V paired with the right-hand side.
    Analytic,
    /// Forward difference of V along one IMEX step of length `1e-6·τ`.
    FiniteDiff,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LfKind {
    /// `V(x) = w · xᵀ P x` with `w` the uniform quadrature weight.
    Quadratic { p: DMatrix<f64>, weight: f64 },
    /// `V(s) = ½‖s‖²_{H10} + ∫ F(s) dx`, `F' = reaction`, on one species.
    Energy { species: usize, reaction: ScalarMap },
    /// `V(x) = scale · ‖x_species‖^q` in the L2 or L4 norm.
    NormPower { species: usize, norm: NormKind, q: f64, scale: f64 },
    /// `V(x) = max_i σ_i⁻¹(V_i(x))`.
    Composite { parts: Vec<LyapunovFn>, sigma_inv: Vec<KFun> },
}

/// A Lyapunov function candidate together with its comparison bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovFn {
    pub kind: LfKind,
    /// Lower bound `ψ₁(‖x‖) ≤ V(x)`.
    pub psi1: Option<KFun>,
    /// Upper bound `V(x) ≤ ψ₂(‖x‖)`.
    pub psi2: Option<KFun>,
    /// Decay rate `α` in `V̇ ≤ −α(‖x‖)`.
    pub alpha: Option<KFun>,
    /// Input gain `χ`.
    pub gain: Option<KFun>,
}

impl LyapunovFn {
    pub fn new(kind: LfKind) -> Self {
        LyapunovFn { kind, psi1: None, psi2: None, alpha: None, gain: None }
    }

    pub fn quadratic(p: DMatrix<f64>, weight: f64) -> Result<Self> {
        if p.nrows() != p.ncols() {
            return Err(Error::ShapeMismatch("P must be square".into()));
        }
        if (&p - p.transpose()).amax() > 1e-12 * p.amax().max(1.0) {
            return Err(Error::InvalidParameter("P must be symmetric".into()));
        }
        Ok(LyapunovFn::new(LfKind::Quadratic { p, weight }))
    }

    pub fn energy(species: usize, reaction: ScalarMap) -> Self {
        LyapunovFn::new(LfKind::Energy { species, reaction })
    }

    pub fn norm_power(species: usize, norm: NormKind, q: f64, scale: f64) -> Result<Self> {
        if !matches!(norm, NormKind::L2 | NormKind::L4) {
            return Err(Error::InvalidParameter("norm-power functions use L2 or L4".into()));
        }
        if !(q > 0.0 && scale > 0.0) {
            return Err(Error::InvalidParameter("norm-power exponent and scale must be positive".into()));
        }
        Ok(LyapunovFn::new(LfKind::NormPower { species, norm, q, scale }))
    }

    pub fn with_bounds(mut self, psi1: KFun, psi2: KFun) -> Self {
        self.psi1 = Some(psi1);
        self.psi2 = Some(psi2);
        self
    }

    pub fn with_alpha(mut self, alpha: KFun) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_gain(mut self, gain: KFun) -> Self {
        self.gain = Some(gain);
        self
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            LfKind::Quadratic { .. } => "quadratic",
            LfKind::Energy { .. } => "energy",
            LfKind::NormPower { .. } => "norm_power",
            LfKind::Composite { .. } => "composite",
        }
    }

    pub fn value(&self, model: &Model, x: &Field) -> Result<f64> {
        model.check_field(x)?;
        Ok(match &self.kind {
            LfKind::Quadratic { p, weight } => {
                check_dim(p, x)?;
                let v = DVector::from_column_slice(x.values());
                weight * v.dot(&(p * &v))
            }
            LfKind::Energy { species, reaction } => {
                let bc = model.bc(*species);
                let s = x.species(*species);
                0.5 * h10_squared(&model.grid, bc, s)
                    + model.grid.weight(bc) * s.iter().map(|v| reaction.antiderivative(*v)).sum::<f64>()
            }
            LfKind::NormPower { species, norm, q, scale } => {
                let (sum, p) = power_sum(model, x, *species, *norm);
                scale * sum.powf(q / p)
            }
            LfKind::Composite { parts, sigma_inv } => {
                let mut best = f64::NEG_INFINITY;
                for (v, s) in parts.iter().zip(sigma_inv) {
                    best = best.max(s.eval(v.value(model, x)?)?);
                }
                best
            }
        })
    }

    /// Values `σ_i⁻¹(V_i(x))` of a composite function's parts.
    pub fn part_levels(&self, model: &Model, x: &Field) -> Result<Vec<f64>> {
        match &self.kind {
            LfKind::Composite { parts, sigma_inv } => {
                parts.iter().zip(sigma_inv).map(|(v, s)| s.eval(v.value(model, x)?)).collect()
            }
            _ => Ok(vec![self.value(model, x)?]),
        }
    }

    /// Directional derivative `DV(x)·dir` for the smooth kinds.
    pub fn directional(&self, model: &Model, x: &Field, dir: &Field) -> Result<f64> {
        Ok(match &self.kind {
            LfKind::Quadratic { p, weight } => {
                check_dim(p, x)?;
                let v = DVector::from_column_slice(x.values());
                let d = DVector::from_column_slice(dir.values());
                2.0 * weight * (p * &v).dot(&d)
            }
            LfKind::Energy { species, reaction } => {
                let bc = model.bc(*species);
                let s = x.species(*species);
                let ls = laplacian(&model.grid, bc, 1.0).matvec(s);
                let w = model.grid.weight(bc);
                w * ls
                    .iter()
                    .zip(s)
                    .zip(dir.species(*species))
                    .map(|((l, v), d)| (-l + reaction.eval(*v)) * d)
                    .sum::<f64>()
            }
            LfKind::NormPower { species, norm, q, scale } => {
                let (sum, p) = power_sum(model, x, *species, *norm);
                if sum == 0.0 {
                    if *q >= p {
                        return Ok(0.0);
                    }
                    return Err(Error::MethodUnavailable("norm power not differentiable at zero".into()));
                }
                let w = model.grid.weight(model.bc(*species));
                let dsum: f64 = x
                    .species(*species)
                    .iter()
                    .zip(dir.species(*species))
                    .map(|(s, d)| p * w * s.abs().powf(p - 2.0) * s * d)
                    .sum();
                scale * (q / p) * sum.powf(q / p - 1.0) * dsum
            }
            LfKind::Composite { parts, sigma_inv } => {
                // Upper right Dini derivative: max over active parts.
                let levels = self.part_levels(model, x)?;
                let top = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut best = f64::NEG_INFINITY;
                for (k, (v, s)) in parts.iter().zip(sigma_inv).enumerate() {
                    if levels[k] < top - 1e-12 * top.abs() {
                        continue;
                    }
                    let slope = s.derivative(v.value(model, x)?)?;
                    let dv = v.directional(model, x, dir)?;
                    let d = if dv == 0.0 { 0.0 } else { slope * dv };
                    if !d.is_finite() {
                        return Err(Error::MethodUnavailable("composite slope is unbounded at this state".into()));
                    }
                    best = best.max(d);
                }
                best
            }
        })
    }
}

fn check_dim(p: &DMatrix<f64>, x: &Field) -> Result<()> {
    if p.nrows() != x.values().len() {
        return Err(Error::ShapeMismatch(format!("P is {0}×{0}, state has {1} entries", p.nrows(), x.values().len())));
    }
    Ok(())
}

/// `(Σ w |s|^p, p)` for the L2/L4 norms.
fn power_sum(model: &Model, x: &Field, species: usize, norm: NormKind) -> (f64, f64) {
    let p = if norm == NormKind::L4 { 4.0 } else { 2.0 };
    let w = model.grid.weight(model.bc(species));
    (w * x.species(species).iter().map(|v| v.abs().powf(p)).sum::<f64>(), p)
}

/// Characteristic time `(d/π)² / max c_i`.
pub fn characteristic_time(model: &Model) -> f64 {
    let cmax = model.spec.diffusion.iter().copied().fold(0.0, f64::max);
    model.grid.diffusion_time(cmax)
}

pub fn lie_derivative(v: &LyapunovFn, model: &Model, x: &Field, u: &[Vec<f64>], method: Method) -> Result<f64> {
    match method {
        Method::Analytic => {
            let f = model.rhs(x, u)?;
            v.directional(model, x, &f)
        }
        Method::FiniteDiff => {
            let ht = 1e-6 * characteristic_time(model);
            let next = Stepper::new(model, ht)?.step(x, u)?;
            Ok((v.value(model, &next)? - v.value(model, x)?) / ht)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{Boundary, Grid1D, SystemSpec};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn scalar(lam: f64) -> Model {
        Model::new(SystemSpec::ode(vec![vec![lam]]).unwrap(), Grid1D::new(1.0, 1).unwrap()).unwrap()
    }

    #[test]
    fn quadratic_scalar() {
        let m = scalar(-1.0);
        let v = LyapunovFn::quadratic(DMatrix::from_element(1, 1, 1.0), 1.0).unwrap();
        let x = Field::from_flat(1, 1, vec![1.0]).unwrap();
        assert_eq!(lie_derivative(&v, &m, &x, &[], Method::Analytic).unwrap(), -2.0);
        let fd = lie_derivative(&v, &m, &x, &[], Method::FiniteDiff).unwrap();
        assert!((fd + 2.0).abs() < 1e-5);
    }

    fn smooth(model: &Model, rng: &mut ChaCha8Rng, amp: f64) -> Field {
        let coefs: Vec<Vec<f64>> =
            (0..model.species()).map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        model.field_from_fn(|i, x| {
            amp * coefs[i].iter().enumerate().map(|(k, a)| a / (k + 1) as f64 * ((k + 1) as f64 * x).sin()).sum::<f64>()
        })
    }

    #[test]
    fn energy_zero_input_identity() {
        let spec = SystemSpec::diffusive(vec![1.0], Boundary::Dirichlet)
            .with_term(0, 0, ScalarMap::CubicOdd, -1.0)
            .unwrap();
        let m = Model::new(spec, Grid1D::new(PI, 100).unwrap()).unwrap();
        let v = LyapunovFn::energy(0, ScalarMap::CubicOdd);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let s = smooth(&m, &mut rng, 1.5);
            let a = lie_derivative(&v, &m, &s, &[], Method::Analytic).unwrap();
            let l = laplacian(&m.grid, Boundary::Dirichlet, 1.0).matvec(s.species(0));
            let want = -m.grid.h() * l.iter().zip(s.species(0)).map(|(l, s)| (l - s.powi(3)).powi(2)).sum::<f64>();
            assert_relative_eq!(a, want, max_relative = 1e-12);
            assert!(a <= 0.0);
            let fd = lie_derivative(&v, &m, &s, &[], Method::FiniteDiff).unwrap();
            assert!((a - fd).abs() <= 1e-3 * a.abs(), "{a} vs {fd}");
        }
    }

    #[test]
    fn analytic_matches_finite_difference_for_norm_powers() {
        let spec = SystemSpec::diffusive(vec![1.0, 1.0], Boundary::Dirichlet)
            .with_coupling(vec![vec![0.0, 0.0], vec![0.0, -1.5]])
            .unwrap()
            .with_term(0, 1, ScalarMap::Square, 1.0)
            .unwrap()
            .with_term(1, 0, ScalarMap::SqrtAbs, 1.0)
            .unwrap();
        let m = Model::new(spec, Grid1D::new(PI, 100).unwrap()).unwrap();
        let v1 = LyapunovFn::norm_power(0, NormKind::L2, 2.0, 1.0).unwrap();
        let v2 = LyapunovFn::norm_power(1, NormKind::L4, 4.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let s = smooth(&m, &mut rng, 0.8);
            for v in [&v1, &v2] {
                let a = lie_derivative(v, &m, &s, &[], Method::Analytic).unwrap();
                let fd = lie_derivative(v, &m, &s, &[], Method::FiniteDiff).unwrap();
                assert!((a - fd).abs() <= 1e-3 * a.abs().max(1e-8), "{a} vs {fd}");
            }
        }
    }

    #[test]
    fn composite_takes_active_part() {
        let m = Model::new(SystemSpec::diffusive(vec![1.0, 1.0], Boundary::Dirichlet), Grid1D::new(PI, 20).unwrap())
            .unwrap();
        let v1 = LyapunovFn::norm_power(0, NormKind::L2, 2.0, 1.0).unwrap();
        let v2 = LyapunovFn::norm_power(1, NormKind::L2, 2.0, 1.0).unwrap();
        let c = LyapunovFn::new(LfKind::Composite {
            parts: vec![v1.clone(), v2.clone()],
            sigma_inv: vec![KFun::identity(), KFun::linear(0.5).unwrap()],
        });
        let x = m.field_from_fn(|i, x| if i == 0 { 0.0 } else { x.sin() });
        assert_relative_eq!(c.value(&m, &x).unwrap(), 0.5 * v2.value(&m, &x).unwrap());
        let a = lie_derivative(&c, &m, &x, &[], Method::Analytic).unwrap();
        assert_relative_eq!(a, 0.5 * lie_derivative(&v2, &m, &x, &[], Method::Analytic).unwrap());
    }
}
