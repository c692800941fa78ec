use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use super::{level_history, log_slope, ExampleConfig, ExampleReport};
use crate::certificate::{Certificate, Witness};
use crate::error::{Error, Result};
use crate::gains::{omega_path_build, omega_path_verify, small_gain_check, GainMatrix};
use crate::kfun::KFun;
use crate::lyapunov::{
    build_composite_lf, check_implication, Implication, InputMode, LyapunovFn, Measure, Sampler, ScaleTarget,
};
use crate::output::fmt_f64;
use crate::pde::{default_dt, simulate, spectral_abscissa, Boundary, Grid1D, InputSignal, Model, NormKind, ScalarMap, SimOptions, SystemSpec};

/// Increase of the composite level allowed per time step.
const STEP_INCREASE_TOL: f64 = 1e-6;

/// `ṡ_1 = c_1 s_1'' + a_12 s_2`, `ṡ_2 = c_2 s_2'' + a_21 s_1` on `(0, d)`, Dirichlet.
#[derive(Clone, Debug, Serialize)]
pub struct CoupledLinearParams {
    pub c1: f64,
    pub c2: f64,
    pub d: f64,
    pub a12: f64,
    pub a21: f64,
    /// `None` picks `min(0.1, (1 − √ratio)/2)` below the threshold and `0.1` otherwise.
    pub eps: Option<f64>,
    /// Relative slack on the subsystem decrease rates.
    pub tolerance: f64,
}

impl Default for CoupledLinearParams {
    fn default() -> Self {
        CoupledLinearParams { c1: 1.0, c2: 1.0, d: PI, a12: 0.9, a21: 0.9, eps: None, tolerance: 0.1 }
    }
}

/// `ṡ_1 = c_1 s_1'' + s_2²`, `ṡ_2 = c_2 s_2'' − b s_2 + √|s_1|` on `(0, d)`, Dirichlet.
#[derive(Clone, Debug, Serialize)]
pub struct CoupledNonlinearParams {
    pub c1: f64,
    pub c2: f64,
    pub d: f64,
    pub b: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub tolerance: f64,
}

impl Default for CoupledNonlinearParams {
    fn default() -> Self {
        CoupledNonlinearParams { c1: 1.0, c2: 1.0, d: PI, b: 1.5, eps1: 0.1, eps2: 0.1, tolerance: 0.1 }
    }
}

/// `|a_12 a_21| (d/π)⁴ / (c_1 c_2)`; the interconnection is stable iff this is below 1.
pub fn coupled_linear_ratio(c1: f64, c2: f64, d: f64, a12: f64, a21: f64) -> f64 {
    (a12 * a21).abs() * (d / PI).powi(4) / (c1 * c2)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// Runs `trajectories` random starts and checks that `V` never rises by
/// more than [`STEP_INCREASE_TOL`] in one step.
fn composite_decrease(
    model: &Model,
    v: &LyapunovFn,
    cfg: &ExampleConfig,
    amp: (f64, f64),
) -> Result<(Certificate, Vec<Vec<String>>)> {
    let dt = cfg.dt.unwrap_or_else(|| default_dt(model));
    let t_end = cfg.t_end.unwrap_or(10.0);
    let steps = (t_end / dt).round() as usize;
    let every = (steps / 200).max(1);
    let sampler = Sampler::default().with_state_amp(amp.0, amp.1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7e7e);
    let starts: Vec<_> = (0..cfg.trajectories).map(|_| sampler.random_state(model, &mut rng)).collect();
    let u: Vec<Vec<f64>> = Vec::new();
    let levels: Vec<Vec<f64>> =
        starts.par_iter().map(|x| level_history(model, v, x, &u, dt, steps)).collect::<Result<_>>()?;
    let mut c = Certificate::new("composite_decrease", 0.0)
        .param("dt", dt)
        .param("t_end", t_end)
        .param("step_increase_tol", STEP_INCREASE_TOL);
    let mut rows = Vec::new();
    for (k, l) in levels.iter().enumerate() {
        let worst = l.windows(2).map(|w| w[0] - w[1] + STEP_INCREASE_TOL).fold(f64::INFINITY, f64::min);
        c.record(worst, || Witness {
            label: format!("trajectory {k}"),
            margin: worst,
            state: starts[k].values().to_vec(),
            input: vec![],
            block_len: starts[k].n_points(),
        });
        for (i, val) in l.iter().enumerate().step_by(every) {
            rows.push(vec![k.to_string(), fmt_f64(i as f64 * dt), fmt_f64(*val)]);
        }
    }
    let mut c = c.finish();
    let ratio: Vec<f64> = levels.iter().map(|l| l.last().unwrap_or(&0.0) / l[0].max(f64::MIN_POSITIVE)).collect();
    c.detail("final_over_initial", ratio);
    Ok((c, rows))
}

fn subsystem_check(
    model: &Model,
    name: &str,
    own: &LyapunovFn,
    other: &LyapunovFn,
    other_species: usize,
    gain: Option<KFun>,
    rate: f64,
    tol: f64,
    cfg: &ExampleConfig,
    zero: Vec<usize>,
) -> Result<Certificate> {
    // Without coupling every level pair satisfies the premise.
    let free = gain.is_none() || !zero.is_empty();
    let gain = match gain {
        Some(g) => g,
        None => KFun::linear(f64::MIN_POSITIVE)?,
    };
    let imp = Implication::new(name, own.clone(), Measure::level(own.clone()), Measure::level(other.clone()), gain)
        .alpha(KFun::linear(rate)?)
        .tolerance(tol);
    let sampler = Sampler::default()
        .with_state_amp(1e-2, 3.0)
        .with_input_mode(if free { InputMode::Free } else { InputMode::Satisfy })
        .with_scale_target(ScaleTarget::Species(other_species))
        .with_zero_species(zero)
        .with_seed(cfg.seed ^ (other_species as u64 + 1).wrapping_mul(0x9e37_79b9));
    let mut c = check_implication(model, &imp, &sampler, cfg.samples)?.param("rate", rate);
    let ratio = c.details.get("worst_rate_ratio").and_then(|v| v.as_f64());
    c.detail("certified_rate", ratio.map(|r| r * rate));
    Ok(c)
}

fn spectrum_rows(model: &Model) -> Result<Vec<Vec<String>>> {
    Ok(crate::pde::spectrum(model)?
        .iter()
        .take(20)
        .map(|z| vec![fmt_f64(z.re), fmt_f64(z.im)])
        .collect())
}

pub fn run_coupled_linear(p: &CoupledLinearParams, cfg: &ExampleConfig) -> Result<ExampleReport> {
    for (n, v) in [("c1", p.c1), ("c2", p.c2), ("d", p.d)] {
        positive(n, v)?;
    }
    let ratio = coupled_linear_ratio(p.c1, p.c2, p.d, p.a12, p.a21);
    let eps = match p.eps {
        Some(e) => e,
        None if ratio < 1.0 => (0.5 * (1.0 - ratio.sqrt())).min(0.1),
        None => 0.1,
    };
    unit_interval("eps", eps)?;
    let build = |a12: f64, a21: f64| -> Result<Model> {
        let spec = SystemSpec::diffusive(vec![p.c1, p.c2], Boundary::Dirichlet)
            .with_coupling(vec![vec![0.0, a12], vec![a21, 0.0]])?;
        Model::new(spec, Grid1D::new(p.d, cfg.n_interior)?)
    };
    let model = build(p.a12, p.a21)?;
    let q = (p.d / PI).powi(4);
    let g12 = p.c2 / p.c1.powi(3) * q * (p.a12 / (1.0 - eps)).powi(2);
    let g21 = p.c1 / p.c2.powi(3) * q * (p.a21 / (1.0 - eps)).powi(2);

    let mut rep = ExampleReport::new("coupled-linear");
    rep.param("c1", p.c1);
    rep.param("c2", p.c2);
    rep.param("d", p.d);
    rep.param("a12", p.a12);
    rep.param("a21", p.a21);
    rep.param("eps", eps);
    rep.param("eps_source", if p.eps.is_some() { "given" } else { "automatic" });
    rep.param("config", cfg);
    rep.detail("ratio", ratio);
    rep.detail("limit_threshold_holds", ratio < 1.0);
    rep.detail("gamma12", g12);
    rep.detail("gamma21", g21);
    rep.detail("cycle_coefficient", g12 * g21);

    let mut g = GainMatrix::new(2)?;
    if g12 > 0.0 {
        g.set(0, 1, KFun::linear(g12)?)?;
    }
    if g21 > 0.0 {
        g.set(1, 0, KFun::linear(g21)?)?;
    }
    let sg = small_gain_check(&g)?;
    let holds = sg.verdict;
    rep.add_certificate("small_gain", sg);

    let abscissa = spectral_abscissa(&model)?;
    rep.detail("spectral_abscissa", abscissa);
    rep.add_table("spectrum", "re,im", spectrum_rows(&model)?);
    let consistent = Certificate::new("spectrum_consistency", 0.0)
        .param("rule", "small-gain pass implies negative spectral abscissa")
        .decide(!holds || abscissa < 0.0);
    rep.add_certificate("spectrum_consistency", consistent);

    // Threshold sweep at ±10% of the critical product.
    let crit = p.c1 * p.c2 * (PI / p.d).powi(4);
    let mut sweep = Vec::new();
    for f in [0.9, 1.1] {
        let a = (f * crit).sqrt();
        sweep.push((f, spectral_abscissa(&build(a, a)?)?));
    }
    rep.detail("threshold_sweep", &sweep);
    let bracket = Certificate::new("threshold_bracket", 0.0).decide(sweep[0].1 < 0.0 && sweep[1].1 > 0.0);
    rep.add_certificate("threshold_bracket", bracket);

    if holds {
        let v1 = LyapunovFn::norm_power(0, NormKind::L2, 2.0, (p.d / PI).powi(2) / (2.0 * p.c1))?;
        let v2 = LyapunovFn::norm_power(1, NormKind::L2, 2.0, (p.d / PI).powi(2) / (2.0 * p.c2))?;
        let r1 = 2.0 * eps * p.c1 * (PI / p.d).powi(2);
        let r2 = 2.0 * eps * p.c2 * (PI / p.d).powi(2);
        let k12 = if g12 > 0.0 { Some(KFun::linear(g12)?) } else { None };
        let k21 = if g21 > 0.0 { Some(KFun::linear(g21)?) } else { None };
        let s1 = subsystem_check(&model, "subsystem_1", &v1, &v2, 1, k12, r1, p.tolerance, cfg, vec![])?;
        let s2 = subsystem_check(&model, "subsystem_2", &v2, &v1, 0, k21, r2, p.tolerance, cfg, vec![])?;
        rep.add_certificate("subsystem_1", s1);
        rep.add_certificate("subsystem_2", s2);
        let mut path = omega_path_build(&g, &[1.0, 1.0])?;
        let pc = omega_path_verify(&g, &mut path, 100)?;
        rep.add_certificate("omega_path", pc);
        let composite = build_composite_lf(vec![v1, v2], &g, &path)?;
        let (c, rows) = composite_decrease(&model, &composite, cfg, (0.1, 2.0))?;
        rep.add_certificate("composite_decrease", c);
        rep.add_table("composite_levels", "trajectory,t,V", rows);
        rep.headline = format!(
            "small-gain holds (cycle coefficient {:.4} at ε = {eps:.4}); composite V {}; spectral abscissa {abscissa:.4}",
            g12 * g21,
            if rep.verdict { "decreasing" } else { "not certified" }
        );
    } else {
        // Observed growth of a short zero-input run, for the report only.
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let x0 = Sampler::default().with_state_amp(1.0, 1.0).random_state(&model, &mut rng);
        let t_end = cfg.t_end.unwrap_or(10.0);
        let opts = SimOptions::new(t_end).stride(((t_end / default_dt(&model)) / 200.0).max(1.0) as usize);
        let tr = simulate(&model, &x0, &InputSignal::zero(), &opts)?;
        let norms: Vec<f64> = tr
            .states
            .iter()
            .map(|s| (model.norm(s, NormKind::L2, 0).powi(2) + model.norm(s, NormKind::L2, 1).powi(2)).sqrt())
            .collect();
        let half: Vec<usize> = (0..tr.times.len()).filter(|&k| tr.times[k] >= 0.5 * t_end).collect();
        let rate = log_slope(
            &half.iter().map(|&k| tr.times[k]).collect::<Vec<_>>(),
            &half.iter().map(|&k| norms[k]).collect::<Vec<_>>(),
        );
        rep.detail("observed_rate", rate);
        rep.headline = format!(
            "no small-gain conclusion (cycle coefficient {:.4} at ε = {eps:.4}); spectral abscissa {abscissa:.4}, trajectories {}",
            g12 * g21,
            if rate > 0.0 { "grow" } else { "decay" }
        );
    }
    Ok(rep)
}

pub fn run_coupled_nonlinear(p: &CoupledNonlinearParams, cfg: &ExampleConfig) -> Result<ExampleReport> {
    for (n, v) in [("c1", p.c1), ("c2", p.c2), ("d", p.d), ("b", p.b)] {
        positive(n, v)?;
    }
    unit_interval("eps1", p.eps1)?;
    unit_interval("eps2", p.eps2)?;
    let spec = SystemSpec::diffusive(vec![p.c1, p.c2], Boundary::Dirichlet)
        .with_coupling(vec![vec![0.0, 0.0], vec![0.0, -p.b]])?
        .with_term(0, 1, ScalarMap::Square, 1.0)?
        .with_term(1, 0, ScalarMap::SqrtAbs, 1.0)?;
    let model = Model::new(spec, Grid1D::new(p.d, cfg.n_interior)?)?;
    let k = (PI / p.d).powi(2);
    let chi12 = 1.0 / (p.c1.powi(2) * k * k * (1.0 - p.eps1).powi(2));
    let chi21 = 1.0 / (p.b.powi(4) * (1.0 - p.eps2).powi(4));
    let r1 = 2.0 * p.eps1 * p.c1 * k;
    let r2 = 4.0 * p.b * p.eps2;

    let mut rep = ExampleReport::new("coupled-nonlinear");
    rep.param("c1", p.c1);
    rep.param("c2", p.c2);
    rep.param("d", p.d);
    rep.param("b", p.b);
    rep.param("eps1", p.eps1);
    rep.param("eps2", p.eps2);
    rep.param("tolerance", p.tolerance);
    rep.param("config", cfg);
    let limit = p.c1 * k * p.b * p.b;
    rep.detail("limit_quantity", limit);
    rep.detail("limit_condition_holds", limit > 1.0);
    rep.detail("chi12", chi12);
    rep.detail("chi21", chi21);
    rep.detail("cycle_coefficient", chi12 * chi21);

    let v1 = LyapunovFn::norm_power(0, NormKind::L2, 2.0, 1.0)?;
    let v2 = LyapunovFn::norm_power(1, NormKind::L4, 4.0, 1.0)?;
    let c1 = subsystem_check(&model, "subsystem_1", &v1, &v2, 1, Some(KFun::linear(chi12)?), r1, p.tolerance, cfg, vec![])?;
    let c2 = subsystem_check(&model, "subsystem_2", &v2, &v1, 0, Some(KFun::linear(chi21)?), r2, p.tolerance, cfg, vec![])?;
    let c0 = subsystem_check(&model, "subsystem_2_zero_branch", &v2, &v1, 0, Some(KFun::linear(chi21)?), r2, p.tolerance, cfg, vec![0])?;
    rep.add_certificate("subsystem_1", c1);
    rep.add_certificate("subsystem_2", c2);
    rep.add_certificate("subsystem_2_zero_branch", c0);

    let g = GainMatrix::new(2)?.with(0, 1, KFun::linear(chi12)?)?.with(1, 0, KFun::linear(chi21)?)?;
    let sg = small_gain_check(&g)?;
    let holds = sg.verdict;
    rep.add_certificate("small_gain", sg);
    if holds {
        let mut path = omega_path_build(&g, &[1.0, 1.0])?;
        rep.add_certificate("omega_path", omega_path_verify(&g, &mut path, 100)?);
        let composite = build_composite_lf(vec![v1, v2], &g, &path)?;
        let (c, rows) = composite_decrease(&model, &composite, cfg, (0.1, 1.0))?;
        rep.add_certificate("composite_decrease", c);
        rep.add_table("composite_levels", "trajectory,t,V", rows);
        rep.headline = format!(
            "small-gain holds (cycle coefficient {:.4}); composite V {}",
            chi12 * chi21,
            if rep.verdict { "decrease certified" } else { "decrease not certified" }
        );
    } else {
        rep.headline = format!("no small-gain conclusion (cycle coefficient {:.4} ≥ 1)", chi12 * chi21);
    }
    Ok(rep)
}
