use serde::{Deserialize, Serialize};

use crate::certificate::{Certificate, Witness};
use crate::error::{Error, Result};
use crate::kfun::{KFun, KLFun};

/// Sampled norm history of one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSample {
    /// Norm of the initial state.
    pub r0: f64,
    /// Norm of the (constant) input.
    pub input_mag: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EnvelopeFit {
    pub beta: KLFun,
    pub m: f64,
    pub a: f64,
    pub certificate: Certificate,
}

/// Slack allowed for the fitted envelope, relative to the observed norm.
const FIT_TOL: f64 = 1e-9;
/// `a` is pushed until `M(a)` exceeds `M(0)` by this factor.
const M_GROWTH: f64 = 1.1;

/// Smallest `M` with `y ≤ M e^{−a t} r0 + γ(ū)` over the ensemble.
fn min_m(excess: &[(f64, f64, f64)], a: f64) -> f64 {
    excess.iter().map(|(t, e, r0)| e * (a * t).exp() / r0).fold(0.0, f64::max)
}

/// Fits `β(r, t) = M e^{−a t} r` so that `‖x(t)‖ ≤ β(‖x₀‖, t) + γ(ū)`.
///
/// `a` is the largest rate whose minimal `M` stays within 10% of the
/// rate-free minimum. The fit is infeasible when trajectories blow up, when
/// a zero initial state exceeds the gain, or when `a` falls below
/// `2 ln(1.1)/T`, the rate a non-decaying excess would produce.
pub fn estimate_iss_envelope(ensemble: &[EnvelopeSample], gamma: &KFun) -> Result<EnvelopeFit> {
    if ensemble.is_empty() {
        return Err(Error::InvalidParameter("envelope fit needs at least one trajectory".into()));
    }
    let mut excess = Vec::new();
    let mut horizon = 0.0_f64;
    for (k, s) in ensemble.iter().enumerate() {
        if s.times.len() != s.norms.len() || !(s.r0 >= 0.0) || !(s.input_mag >= 0.0) {
            return Err(Error::InvalidParameter(format!("trajectory {k} is malformed")));
        }
        let g = if s.input_mag > gamma.range_max() { f64::INFINITY } else { gamma.eval(s.input_mag)? };
        for (&t, &y) in s.times.iter().zip(&s.norms) {
            horizon = horizon.max(t);
            if !y.is_finite() {
                return Err(Error::NoFeasibleEnvelope(format!("trajectory {k} blows up at t = {t}")));
            }
            let e = y - g;
            if e > 0.0 {
                if s.r0 == 0.0 {
                    return Err(Error::NoFeasibleEnvelope(format!(
                        "trajectory {k} starts at zero yet exceeds the gain at t = {t}"
                    )));
                }
                excess.push((t, e, s.r0));
            }
        }
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter("envelope fit needs a positive time horizon".into()));
    }
    let m0 = min_m(&excess, 0.0);
    let (m, a) = if m0 == 0.0 {
        // The gain alone bounds every sample.
        (1.0, 1.0 / horizon)
    } else {
        let cap = M_GROWTH * m0;
        let mut hi = 1.0 / horizon;
        while min_m(&excess, hi) <= cap && hi < 1e6 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if min_m(&excess, mid) <= cap {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let floor = 2.0 * M_GROWTH.ln() / horizon;
        if lo < floor {
            return Err(Error::NoFeasibleEnvelope(format!(
                "best decay rate {lo:.3e} is below {floor:.3e} over horizon {horizon}"
            )));
        }
        (min_m(&excess, lo).max(f64::MIN_POSITIVE), lo)
    };
    let beta = KLFun::exp_envelope(m, a)?;
    let mut cert = Certificate::new("iss_envelope", FIT_TOL)
        .param("trajectories", ensemble.len())
        .param("horizon", horizon);
    for (k, s) in ensemble.iter().enumerate() {
        let g = gamma.eval(s.input_mag)?;
        for (&t, &y) in s.times.iter().zip(&s.norms) {
            let bound = beta.eval(s.r0, t)? + g;
            let margin = (bound - y) / y.abs().max(f64::MIN_POSITIVE);
            cert.record(margin, || Witness {
                label: format!("trajectory {k}, t = {t}"),
                margin,
                state: vec![y, bound],
                input: vec![s.input_mag],
                block_len: 2,
            });
        }
    }
    let mut cert = cert.finish();
    cert.detail("m", m);
    cert.detail("a", a);
    Ok(EnvelopeFit { beta, m, a, certificate: cert })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x0: f64, u: f64) -> EnvelopeSample {
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.05).collect();
        let norms = times.iter().map(|t| ((-t).exp() * x0 + u * (1.0 - (-t).exp())).abs()).collect();
        EnvelopeSample { r0: x0.abs(), input_mag: u.abs(), times, norms }
    }

    #[test]
    fn scalar_closed_form() {
        let mut ens = Vec::new();
        for x0 in [-2.0, 0.5, 1.0, 3.0] {
            for u in [0.0, 0.3, -1.0] {
                ens.push(scalar(x0, u));
            }
        }
        let fit = estimate_iss_envelope(&ens, &KFun::identity()).unwrap();
        assert!((fit.m - 1.0).abs() < 0.1, "{}", fit.m);
        assert!((fit.a - 1.0).abs() < 0.1, "{}", fit.a);
        assert!(fit.certificate.verdict);
    }

    #[test]
    fn growth_is_infeasible() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64).collect();
        let norms = times.iter().map(|t| 1.0 + t.sqrt()).collect();
        let s = EnvelopeSample { r0: 1.0, input_mag: 1.0, times, norms };
        let r = estimate_iss_envelope(&[s], &KFun::linear(0.5).unwrap());
        assert!(matches!(r, Err(Error::NoFeasibleEnvelope(_))));
    }
}
