use serde::Serialize;

use super::equation::{lyapunov_residual, solve_lyapunov};
use super::function::{LfKind, LyapunovFn};
use super::implication::{check_implication, Implication, InputMode, Measure, Sampler};
use crate::certificate::Certificate;
use crate::error::{Error, Result};
use crate::gains::{GainMatrix, OmegaPath};
use crate::kfun::KFun;
use crate::pde::{spectral_abscissa, Model, NormKind};

#[derive(Clone, Debug, Serialize)]
pub struct LinearizationOptions {
    /// Largest sup-norm amplitude tried.
    pub ceiling: f64,
    /// Below this amplitude the search gives up.
    pub floor: f64,
    pub iterations: usize,
    pub samples_per_level: usize,
    pub modes: usize,
    pub seed: u64,
}

impl Default for LinearizationOptions {
    fn default() -> Self {
        LinearizationOptions { ceiling: 10.0, floor: 1e-6, iterations: 40, samples_per_level: 200, modes: 12, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct Linearization {
    pub lf: LyapunovFn,
    /// Certified sup-norm radius.
    pub rho: f64,
    pub residual: f64,
    pub certificate: Certificate,
}

/// `V(x) = ⟨Px, x⟩` from the linear part, with a bisected local radius.
///
/// The implication tested is `‖x‖ ≥ √‖u‖ ⟹ V̇ ≤ −½‖x‖²` on the full
/// nonlinear model, over states of sup-norm at most `ρ`.
pub fn build_linearization_lf(model: &Model, opts: &LinearizationOptions) -> Result<Linearization> {
    let weights = model.weights();
    let w = weights[0];
    if weights.iter().any(|v| (v - w).abs() > 1e-15 * w) {
        return Err(Error::InvalidSpec("quadratic construction needs one quadrature weight for all species".into()));
    }
    let linear = Model::new(model.spec.linear_part(), model.grid.clone())?;
    let abscissa = spectral_abscissa(&linear)?;
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz(abscissa));
    }
    let g = linear.generator();
    let p = solve_lyapunov(&g)?;
    let residual = lyapunov_residual(&g, &p);
    let eig = p.clone().symmetric_eigen().eigenvalues;
    let (lmin, lmax) = (eig.min(), eig.max());
    if !(lmin > 0.0) {
        return Err(Error::LinearSolveFailure(format!("P is not positive definite (λ_min = {lmin:e})")));
    }
    let lf = LyapunovFn::quadratic(p, w)?
        .with_bounds(KFun::power(lmin, 2.0)?, KFun::power(lmax, 2.0)?)
        .with_alpha(KFun::power(0.5, 2.0)?)
        .with_gain(KFun::power(1.0, 0.5)?);
    let imp = Implication::new(
        "linearization",
        lf.clone(),
        Measure::state(NormKind::L2),
        Measure::input(NormKind::L2),
        KFun::power(1.0, 0.5)?,
    )
    .alpha(KFun::power(0.5, 2.0)?);
    let mode = if model.spec.channels() > 0 { InputMode::Satisfy } else { InputMode::Zero };
    let at = |rho: f64| -> Result<Certificate> {
        let sampler = Sampler { modes: opts.modes, ..Sampler::default() }
            .with_state_amp(rho * 1e-3, rho)
            .with_input_mode(mode)
            .with_ceiling()
            .with_seed(opts.seed);
        check_implication(model, &imp, &sampler, opts.samples_per_level)
    };
    let finalize = |mut c: Certificate, rho: f64| {
        c.detail("rho", rho);
        c.detail("lambda_min", lmin);
        c.detail("lambda_max", lmax);
        c.detail("residual", residual);
        c.detail("spectral_abscissa", abscissa);
        c.parameters.insert("options".into(), serde_json::to_value(opts).unwrap_or_default());
        c
    };
    let top = at(opts.ceiling)?;
    if top.verdict {
        return Ok(Linearization { lf, rho: opts.ceiling, residual, certificate: finalize(top, opts.ceiling) });
    }
    let bottom = at(opts.floor)?;
    if !bottom.verdict {
        return Err(Error::NoPositiveRadius(opts.floor));
    }
    let (mut lo, mut hi, mut best) = (opts.floor, opts.ceiling, bottom);
    for _ in 0..opts.iterations {
        let mid = (lo * hi).sqrt();
        let c = at(mid)?;
        if c.verdict {
            lo = mid;
            best = c;
        } else {
            hi = mid;
        }
    }
    Ok(Linearization { lf, rho: lo, residual, certificate: finalize(best, lo) })
}

/// `V(x) = max_i σ_i⁻¹(V_i(x))` along a verified Ω-path.
pub fn build_composite_lf(parts: Vec<LyapunovFn>, g: &GainMatrix, path: &OmegaPath) -> Result<LyapunovFn> {
    if !path.is_verified() {
        return Err(Error::UnverifiedPath);
    }
    let n = g.n();
    if parts.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: parts.len() });
    }
    if path.sigmas.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: path.sigmas.len() });
    }
    let sigma_inv = path.sigmas.iter().map(KFun::invert).collect::<Result<Vec<_>>>()?;
    let mut gains = Vec::new();
    for (i, s) in sigma_inv.iter().enumerate() {
        if let Some(chi) = g.input_gain(i).or(parts[i].gain.as_ref()) {
            gains.push(s.compose(chi)?);
        }
    }
    let gain = if gains.is_empty() { None } else { Some(KFun::pointwise_max_exact(&gains)?) };
    let scale = KFun::linear(1.0 / (n as f64).sqrt())?;
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (v, s) in parts.iter().zip(&sigma_inv) {
        if let (Some(p1), Some(p2)) = (&v.psi1, &v.psi2) {
            lower.push(s.compose(&p1.compose(&scale)?)?);
            upper.push(s.compose(p2)?);
        }
    }
    let (psi1, psi2) = if lower.len() == n {
        (Some(KFun::pointwise_min_exact(&lower)?), Some(KFun::pointwise_max_exact(&upper)?))
    } else {
        (None, None)
    };
    Ok(LyapunovFn { kind: LfKind::Composite { parts, sigma_inv }, psi1, psi2, alpha: None, gain })
}
