use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use super::{ExampleConfig, ExampleReport};
use crate::certificate::{Certificate, Witness};
use crate::error::{Error, Result};
use crate::kfun::KFun;
use crate::lyapunov::{
    check_samples, lie_derivative, Implication, InputMode, LyapunovFn, Measure, Method, Sample, Sampler,
};
use crate::output::fmt_f64;
use crate::pde::{default_dt, norm, Boundary, Grid1D, Model, NormKind, ScalarMap, Stepper, SystemSpec};

/// `ṡ = s_xx − f(s) + u^m` on `(0, π)`, Dirichlet.
#[derive(Clone, Debug, Serialize)]
pub struct SemilinearParams {
    pub m: f64,
    pub a: f64,
    pub f_id: String,
    /// Relative slack on the decrease rate `1 − 1/a`.
    pub tolerance: f64,
    pub state_amp: (f64, f64),
}

impl Default for SemilinearParams {
    fn default() -> Self {
        SemilinearParams { m: 1.0, a: 2.0, f_id: "cubic_odd".into(), tolerance: 0.1, state_amp: (1e-2, 5.0) }
    }
}

/// `χ(r) = a π^{(1−m)/2} r^m`
pub fn semilinear_gain(m: f64, a: f64) -> Result<KFun> {
    KFun::power(a * PI.powf(0.5 * (1.0 - m)), m)
}

pub fn run_semilinear_energy(p: &SemilinearParams, cfg: &ExampleConfig) -> Result<ExampleReport> {
    if !(p.m > 0.0 && p.m <= 1.0) {
        return Err(Error::InvalidParameter(format!("exponent m must lie in (0, 1], got {}", p.m)));
    }
    if !(p.a > 1.0) {
        return Err(Error::InvalidParameter(format!("gain factor a must exceed 1, got {}", p.a)));
    }
    let f = ScalarMap::from_id(&p.f_id, None)?;
    if !f.is_odd_monotone() {
        return Err(Error::ReactionNotOddMonotone(p.f_id.clone()));
    }
    let input_map = if p.m == 1.0 { ScalarMap::Identity } else { ScalarMap::PowerM(p.m) };
    let spec = SystemSpec::diffusive(vec![1.0], Boundary::Dirichlet)
        .with_term(0, 0, f, -1.0)?
        .with_input(0, 0, input_map, 1.0)?;
    let model = Model::new(spec, Grid1D::new(PI, cfg.n_interior)?)?;
    let rate = 1.0 - 1.0 / p.a;
    let gain = semilinear_gain(p.m, p.a)?;
    let v = LyapunovFn::energy(0, f).with_gain(gain.clone()).with_alpha(KFun::power(rate, 2.0)?);

    let mut rep = ExampleReport::new("semilinear-energy");
    rep.param("m", p.m);
    rep.param("a", p.a);
    rep.param("f", f.id());
    rep.param("tolerance", p.tolerance);
    rep.param("state_amp", [p.state_amp.0, p.state_amp.1]);
    rep.param("config", cfg);

    let imp = Implication::new("energy_decrease", v.clone(), Measure::state(NormKind::H10), Measure::input(NormKind::L2), gain.clone())
        .alpha(KFun::power(rate, 2.0)?)
        .tolerance(p.tolerance);
    let sampler = Sampler::default()
        .with_state_amp(p.state_amp.0, p.state_amp.1)
        .with_input_mode(InputMode::Satisfy)
        .with_seed(cfg.seed);
    let samples = sampler.samples(&model, &imp, cfg.samples)?;
    let mut cert = check_samples(&model, &imp, &samples)?.param("seed", cfg.seed).param("rate", rate);
    cert.detail("certified_rate", cert.details.get("worst_rate_ratio").and_then(|v| v.as_f64()).map(|r| r * rate));
    rep.add_certificate("energy_decrease", cert);

    // Analytic against finite-difference Lie derivatives on the same samples.
    let pairs: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|s| {
            Ok((
                lie_derivative(&v, &model, &s.state, &s.input, Method::Analytic)?,
                lie_derivative(&v, &model, &s.state, &s.input, Method::FiniteDiff)?,
            ))
        })
        .collect::<Result<_>>()?;
    let mut fd = Certificate::new("fd_agreement", 0.0).param("relative_tolerance", 1e-3);
    for ((an, num), s) in pairs.iter().zip(&samples) {
        let margin = 1e-3 - (an - num).abs() / an.abs().max(f64::MIN_POSITIVE);
        fd.record(margin, || witness("sample", margin, s));
    }
    rep.add_certificate("fd_agreement", fd.finish());
    rep.add_table(
        "samples",
        "h10,input_l2,vdot_analytic,vdot_fd,alpha",
        samples
            .iter()
            .zip(&pairs)
            .map(|(s, (an, num))| {
                let h = model.norm(&s.state, NormKind::H10, 0);
                let u = norm(&model.grid, Boundary::Dirichlet, &s.input[0], NormKind::L2);
                vec![fmt_f64(h), fmt_f64(u), fmt_f64(*an), fmt_f64(*num), fmt_f64(rate * h * h)]
            })
            .collect(),
    );

    let zero = Implication { alpha: None, tolerance: 0.0, name: "zero_input".into(), ..imp.clone() };
    let zs = sampler.clone().with_input_mode(InputMode::Zero).with_seed(cfg.seed ^ 0x5a5a);
    let zsamples = zs.samples(&model, &zero, cfg.samples)?;
    rep.add_certificate("zero_input", check_samples(&model, &zero, &zsamples)?);

    if p.m < 1.0 {
        let mut h = Certificate::new("holder_step", 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xa5a5);
        let inputs = Sampler::default().with_input_amp(1e-3, 1e2);
        for k in 0..cfg.samples {
            let u = inputs.random_input(&model, &mut rng).remove(0);
            let um: Vec<f64> = u.iter().map(|x| input_map.eval(*x)).collect();
            let lhs = norm(&model.grid, Boundary::Dirichlet, &um, NormKind::L2);
            let rhs = PI.powf(0.5 * (1.0 - p.m)) * norm(&model.grid, Boundary::Dirichlet, &u, NormKind::L2).powf(p.m);
            let margin = (rhs - lhs) / rhs;
            h.record(margin, || Witness { label: format!("input {k}"), margin, state: vec![], input: u.clone(), block_len: 1 });
        }
        rep.add_certificate("holder_step", h.finish());
    }

    let traj = trajectory_decrease(&model, &v, &imp, &sampler, cfg)?;
    rep.add_table("trajectory_energy", "run,t,V,h10,premise", traj.1);
    rep.add_certificate("trajectory_decrease", traj.0);

    let certified = rep
        .certificate("energy_decrease")
        .and_then(|c| c.details.get("certified_rate").and_then(|v| v.as_f64()));
    rep.headline = match (rep.verdict, certified) {
        (true, Some(r)) => format!("ISS-Lyapunov decrease certified: dV/dt ≤ −{r:.4}·‖s‖²_H10 (claimed {rate:.4})"),
        (true, None) => "ISS-Lyapunov decrease certified".into(),
        (false, _) => "energy ISS-Lyapunov certificate failed".into(),
    };
    Ok(rep)
}

fn witness(label: &str, margin: f64, s: &Sample) -> Witness {
    Witness {
        label: label.into(),
        margin,
        state: s.state.values().to_vec(),
        input: s.input.iter().flatten().copied().collect(),
        block_len: s.state.n_points(),
    }
}

/// Simulates from premise-satisfying pairs and checks that `V` does not grow
/// while `‖s‖_H10 ≥ χ(‖u‖)`.
fn trajectory_decrease(
    model: &Model,
    v: &LyapunovFn,
    imp: &Implication,
    sampler: &Sampler,
    cfg: &ExampleConfig,
) -> Result<(Certificate, Vec<Vec<String>>)> {
    let runs = cfg.trajectories.min(cfg.samples).max(1);
    let starts = Sampler { state_amp: (0.5, 2.0), ..sampler.clone() }.with_seed(cfg.seed ^ 0x3c3c).samples(model, imp, runs)?;
    let dt = cfg.dt.unwrap_or_else(|| default_dt(model));
    let t_end = cfg.t_end.unwrap_or(2.0);
    let steps = (t_end / dt).round() as usize;
    let every = (steps / 200).max(1);
    let results: Vec<(f64, Vec<Vec<String>>)> = starts
        .par_iter()
        .enumerate()
        .map(|(run, s)| -> Result<(f64, Vec<Vec<String>>)> {
            let stepper = Stepper::new(model, dt)?;
            let mut x = s.state.clone();
            let mut vk = v.value(model, &x)?;
            let mut worst = f64::INFINITY;
            let mut rows = Vec::new();
            for k in 0..=steps {
                let lhs = imp.lhs.eval(model, &x, &s.input)?;
                let premise = lhs >= imp.gain.eval(imp.rhs.eval(model, &x, &s.input)?)?;
                if k % every == 0 {
                    rows.push(vec![run.to_string(), fmt_f64(k as f64 * dt), fmt_f64(vk), fmt_f64(lhs), premise.to_string()]);
                }
                if k == steps || !premise {
                    break;
                }
                x = stepper.step(&x, &s.input)?;
                let next = v.value(model, &x)?;
                worst = worst.min((vk - next) / vk.abs().max(f64::MIN_POSITIVE));
                vk = next;
            }
            Ok((worst, rows))
        })
        .collect::<Result<_>>()?;
    let mut c = Certificate::new("trajectory_decrease", 0.0).param("dt", dt).param("t_end", t_end);
    let mut rows = Vec::new();
    for (k, (w, r)) in results.into_iter().enumerate() {
        if w.is_finite() {
            c.record(w, || witness(&format!("run {k}"), w, &starts[k]));
        }
        rows.extend(r);
    }
    Ok((c.finish(), rows))
}
