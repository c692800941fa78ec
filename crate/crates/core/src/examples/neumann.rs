use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use super::{log_slope, ExampleConfig, ExampleReport};
use crate::certificate::{Certificate, Witness};
use crate::error::{Error, Result};
use crate::kfun::KFun;
use crate::lyapunov::{estimate_iss_envelope, EnvelopeSample, Sampler};
use crate::output::fmt_f64;
use crate::pde::{
    default_dt, simulate, Boundary, ChannelSignal, Field, Grid1D, InputSignal, Model, NormKind, ScalarMap, SimOptions,
    SystemSpec, Trajectory,
};

/// `ṡ = c Δs + R s + u` on `(0, d)` with Neumann boundary conditions.
#[derive(Clone, Debug, Serialize)]
pub struct NeumannParams {
    pub r: Vec<Vec<f64>>,
    pub diffusion: Vec<f64>,
    pub d: f64,
    pub stable_expected: Option<bool>,
    /// Spatially constant input levels of the envelope ensemble.
    pub input_levels: Vec<f64>,
    /// Sup-norm amplitudes of the envelope ensemble's initial states.
    pub initial_levels: Vec<f64>,
}

impl NeumannParams {
    pub fn new(r: Vec<Vec<f64>>, c: f64) -> Self {
        let k = r.len();
        NeumannParams {
            r,
            diffusion: vec![c; k],
            d: PI,
            stable_expected: None,
            input_levels: vec![0.0, 0.1, 1.0],
            initial_levels: vec![0.5, 1.0, 2.0],
        }
    }
}

fn mean_mode(model: &Model, s: &Field) -> f64 {
    let w = model.grid.weight(Boundary::Neumann);
    let d = model.grid.d;
    let sq: f64 = (0..model.species())
        .map(|i| {
            let mean = w * s.species(i).iter().sum::<f64>() / d;
            mean * mean * d
        })
        .sum();
    sq.sqrt()
}

fn l2(model: &Model, s: &Field) -> f64 {
    (0..model.species()).map(|i| model.norm(s, NormKind::L2, i).powi(2)).sum::<f64>().sqrt()
}

/// `∫₀^∞ ‖e^{Rτ}‖₂ dτ` by the trapezoid rule over `40/|λ_max|`.
fn input_gain(r: &DMatrix<f64>, lam: f64) -> f64 {
    let horizon = 40.0 / lam.abs();
    let steps = 4000;
    let h = horizon / steps as f64;
    let norm_at = |t: f64| (r * t).exp().singular_values().max();
    let mut acc = 0.5 * (norm_at(0.0) + norm_at(horizon));
    for k in 1..steps {
        acc += norm_at(k as f64 * h);
    }
    acc * h
}

pub fn run_neumann_hurwitz(p: &NeumannParams, cfg: &ExampleConfig) -> Result<ExampleReport> {
    let k = p.r.len();
    if k == 0 || p.r.iter().any(|row| row.len() != k) {
        return Err(Error::InvalidParameter("R must be a nonempty square matrix".into()));
    }
    if p.diffusion.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: p.diffusion.len() });
    }
    if p.diffusion.iter().any(|c| *c != p.diffusion[0]) {
        return Err(Error::UnequalDiffusion(p.diffusion.clone()));
    }
    let rm = DMatrix::from_fn(k, k, |i, j| p.r[i][j]);
    let eig = rm.complex_eigenvalues();
    let lam = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let hurwitz = lam < 0.0;

    let mut spec = SystemSpec::diffusive(p.diffusion.clone(), Boundary::Neumann).with_coupling(p.r.clone())?;
    for i in 0..k {
        spec = spec.with_input(i, i, ScalarMap::Identity, 1.0)?;
    }
    let model = Model::new(spec, Grid1D::new(p.d, cfg.n_interior)?)?;
    let t_end = cfg.t_end.unwrap_or(10.0 / lam.abs().max(0.1));
    let dt = cfg.dt.unwrap_or_else(|| default_dt(&model));
    let stride = ((t_end / dt / 1000.0).round() as usize).max(1);
    let opts = SimOptions { dt: Some(dt), ..SimOptions::new(t_end) }.stride(stride);

    let mut rep = ExampleReport::new("neumann-hurwitz");
    rep.param("r", &p.r);
    rep.param("diffusion", &p.diffusion);
    rep.param("d", p.d);
    rep.param("stable_expected", p.stable_expected);
    rep.param("config", cfg);
    rep.param("t_end", t_end);
    rep.param("dt", dt);
    rep.detail("max_real_eigenvalue", lam);
    rep.detail("hurwitz", hurwitz);
    rep.add_table(
        "eigenvalues",
        "re,im",
        eig.iter().map(|z| vec![fmt_f64(z.re), fmt_f64(z.im)]).collect(),
    );

    if let Some(expected) = p.stable_expected {
        let c = Certificate::new("hurwitz_expectation", 0.0).param("expected", expected).decide(hurwitz == expected);
        rep.add_certificate("hurwitz_expectation", c);
    }

    let sampler = Sampler::default().with_state_amp(1.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x0 = sampler.random_state(&model, &mut rng);
    let traj = simulate(&model, &x0, &InputSignal::zero(), &opts)?;
    let (tail_t, tail_y): (Vec<f64>, Vec<f64>) = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t >= 0.5 * t_end)
        .map(|(t, s)| (*t, if hurwitz { l2(&model, s) } else { mean_mode(&model, s) }))
        .unzip();
    let rate = log_slope(&tail_t, &tail_y);
    let rel = ((rate - lam) / lam).abs();
    let mut rc = Certificate::new("rate_matches_spectrum", 0.0)
        .param("measure", if hurwitz { "L2 norm" } else { "constant mode" })
        .param("relative_tolerance", 0.1);
    rc.detail("fitted_rate", rate);
    rc.detail("eigenvalue_rate", lam);
    let margin = 0.1 - rel;
    rc.record(margin, || Witness {
        label: "zero-input run".into(),
        margin,
        state: x0.values().to_vec(),
        input: vec![],
        block_len: x0.n_points(),
    });
    rep.add_certificate("rate_matches_spectrum", rc.finish());
    rep.detail("fitted_rate", rate);
    rep.add_table(
        "zero_input_norms",
        "t,L2,constant_mode",
        traj.times
            .iter()
            .zip(&traj.states)
            .map(|(t, s)| vec![fmt_f64(*t), fmt_f64(l2(&model, s)), fmt_f64(mean_mode(&model, s))])
            .collect(),
    );

    if hurwitz {
        let gain = input_gain(&rm, lam);
        rep.detail("input_gain", gain);
        let mut runs = Vec::new();
        for &amp in &p.initial_levels {
            for &lvl in &p.input_levels {
                let x = Sampler::default().with_state_amp(amp, amp).random_state(&model, &mut rng);
                runs.push((x, lvl));
            }
        }
        let ensemble: Vec<EnvelopeSample> = runs
            .par_iter()
            .map(|(x, lvl)| -> Result<EnvelopeSample> {
                let per = lvl / (k as f64).sqrt();
                let u = InputSignal::new(vec![ChannelSignal::Constant { value: per }; k]);
                let tr: Trajectory = simulate(&model, x, &u, &opts)?;
                let umag = (model.grid.d * k as f64).sqrt() * per;
                Ok(EnvelopeSample {
                    r0: l2(&model, x),
                    input_mag: umag,
                    times: tr.times.clone(),
                    norms: tr.states.iter().map(|s| l2(&model, s)).collect(),
                })
            })
            .collect::<Result<_>>()?;
        match estimate_iss_envelope(&ensemble, &KFun::linear(gain)?) {
            Ok(fit) => {
                rep.detail("envelope_m", fit.m);
                rep.detail("envelope_a", fit.a);
                rep.add_certificate("iss_envelope", fit.certificate);
            }
            Err(Error::NoFeasibleEnvelope(msg)) => {
                let mut c = Certificate::new("iss_envelope", 0.0).decide(false);
                c.detail("reason", msg);
                rep.add_certificate("iss_envelope", c);
            }
            Err(e) => return Err(e),
        }
        rep.headline = format!(
            "R Hurwitz (max Re λ = {lam:.4}): zero-input decay rate {:.4}, exponential ISS envelope {}",
            -rate,
            if rep.certificate("iss_envelope").is_some_and(|c| c.verdict) { "fitted" } else { "not found" }
        );
    } else {
        rep.headline = format!("R not Hurwitz (max Re λ = {lam:.4}): constant mode grows at rate {rate:.4}");
    }
    if !rep.verdict {
        rep.headline.push_str(" [claim not reproduced]");
    }
    Ok(rep)
}
