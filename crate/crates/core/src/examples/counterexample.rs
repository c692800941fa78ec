use serde::Serialize;
use std::f64::consts::E;

use super::ExampleReport;
use crate::certificate::{Certificate, Witness};
use crate::error::{Error, Result};
use crate::output::fmt_f64;

/// Pointwise system `ẋ(s) = −x(s)/(1+|s|) + u(s)` with `u(s) = a/√(1+|s|)`.
#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleParams {
    /// Input amplitude; `sup |u| = a`.
    pub a: f64,
    pub t_grid: Vec<f64>,
    /// Half-width `S` of the truncated `s` grid.
    pub s_truncation: f64,
    /// Height of the initial bump `x₀(s) = b e^{−s²}`.
    pub bump: f64,
    /// Spacing of the uniform part of the `s` grid.
    pub ds: f64,
}

impl Default for CounterexampleParams {
    fn default() -> Self {
        CounterexampleParams { a: 1.0, t_grid: vec![0.0, 1.0, 10.0, 25.0, 100.0, 400.0], s_truncation: 800.0, bump: 1.0, ds: 0.5 }
    }
}

/// `x(t)(s) = e^{−t/(1+|s|)} x₀ − a√(1+|s|)(e^{−t/(1+|s|)} − 1)`
pub fn closed_form(a: f64, x0: f64, s: f64, t: f64) -> f64 {
    let k = 1.0 + s.abs();
    let e = (-t / k).exp();
    e * x0 - a * k.sqrt() * (e - 1.0)
}

fn s_grid(p: &CounterexampleParams) -> Vec<f64> {
    let n = (p.s_truncation / p.ds).floor() as i64;
    let mut s: Vec<f64> = (-n..=n).map(|k| k as f64 * p.ds).collect();
    for &t in &p.t_grid {
        // The maximiser of the forced response sits at 1 + |s| = t.
        if t >= 1.0 {
            s.push(t - 1.0);
            s.push(1.0 - t);
        }
    }
    s.push(p.s_truncation);
    s.push(-p.s_truncation);
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}

fn sup(a: f64, bump: f64, s: &[f64], t: f64) -> f64 {
    s.iter().map(|&s| closed_form(a, bump * (-s * s).exp(), s, t).abs()).fold(0.0, f64::max)
}

pub fn run_counterexample(p: &CounterexampleParams) -> Result<ExampleReport> {
    if !(p.a > 0.0) {
        return Err(Error::InvalidParameter(format!("input amplitude must be positive, got {}", p.a)));
    }
    if p.t_grid.is_empty() || p.t_grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidParameter("time grid must be nonempty and nonnegative".into()));
    }
    if !(p.ds > 0.0) {
        return Err(Error::InvalidParameter("grid spacing must be positive".into()));
    }
    let t_max = p.t_grid.iter().copied().fold(0.0, f64::max);
    if p.s_truncation < t_max {
        return Err(Error::TruncationTooSmall { s: p.s_truncation, t: t_max });
    }
    let mut times = p.t_grid.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let s = s_grid(p);
    let forced: Vec<f64> = times.iter().map(|&t| sup(p.a, p.bump, &s, t)).collect();
    let free: Vec<f64> = times.iter().map(|&t| sup(0.0, p.bump, &s, t)).collect();
    let driven: Vec<f64> = times.iter().map(|&t| sup(p.a, 0.0, &s, t)).collect();

    let mut rep = ExampleReport::new("counterexample");
    rep.param("a", p.a);
    rep.param("t_grid", &times);
    rep.param("s_truncation", p.s_truncation);
    rep.param("bump", p.bump);
    rep.param("ds", p.ds);
    rep.detail("s_points", s.len());

    let point = |label: String, margin: f64, t: f64, v: f64| Witness {
        label,
        margin,
        state: vec![t, v],
        input: vec![],
        block_len: 2,
    };

    let mut growth = Certificate::new("growth_lower_bound", 0.0).param("bound", "a·sqrt(t)·(1 − 1/e)");
    for (&t, &v) in times.iter().zip(&forced) {
        if t >= 1.0 {
            let bound = p.a * t.sqrt() * (1.0 - 1.0 / E);
            let m = (v - bound) / bound;
            growth.record(m, || point(format!("t = {t}"), m, t, v));
        }
    }
    rep.add_certificate("growth_lower_bound", growth.finish());

    // Input-driven part (x₀ = 0); with a bump taller than `a` the full sup can dip first.
    let mut mono = Certificate::new("forced_sup_nondecreasing", 0.0).param("initial_state", "zero");
    for k in 1..times.len() {
        let m = driven[k] - driven[k - 1];
        mono.record(m, || point(format!("t = {}", times[k]), m, times[k], driven[k]));
    }
    rep.add_certificate("forced_sup_nondecreasing", mono.finish());

    let mut decay = Certificate::new("zero_input_decay", 0.0);
    for k in 1..times.len() {
        let m = free[k - 1] - free[k];
        decay.record(m, || point(format!("t = {}", times[k]), m, times[k], free[k]));
    }
    // Pointwise convergence: every grid value decays to zero.
    let far = t_max.max(1.0) * 1e3;
    let tail = s.iter().map(|&s| closed_form(0.0, p.bump * (-s * s).exp(), s, far).abs()).fold(0.0, f64::max);
    let m = p.bump.abs() * 1e-6 - tail;
    decay.record(m, || point(format!("t = {far}"), m, far, tail));
    rep.add_certificate("zero_input_decay", decay.finish());

    let mut ident = Certificate::new("identity_at_zero", 1e-15);
    if times[0] == 0.0 {
        let m = -(free[0] - p.bump.abs()).abs();
        ident.record(m, || point("t = 0".into(), m, 0.0, free[0]));
        let m = -(forced[0] - p.bump.abs()).abs();
        ident.record(m, || point("t = 0, forced".into(), m, 0.0, forced[0]));
    }
    rep.add_certificate("identity_at_zero", ident.finish());

    let rows = times
        .iter()
        .zip(&forced)
        .zip(&free)
        .zip(&driven)
        .map(|(((t, f), z), v)| {
            let bound = if *t >= 1.0 { p.a * t.sqrt() * (1.0 - 1.0 / E) } else { 0.0 };
            vec![fmt_f64(*t), fmt_f64(*f), fmt_f64(bound), fmt_f64(*z), fmt_f64(*v)]
        })
        .collect();
    rep.add_table("sup_norms", "t,sup_forced,lower_bound,sup_zero_input,sup_input_driven", rows);
    rep.detail("sup_forced", &forced);
    rep.detail("sup_zero_input", &free);
    rep.detail("sup_input_driven", &driven);
    rep.headline = if rep.verdict {
        format!(
            "0-GAS without bounded-input bounded-state: sup-norm reaches {:.4} at t = {} under |u| ≤ {}",
            forced.last().copied().unwrap_or(0.0),
            t_max,
            p.a
        )
    } else {
        "counterexample claims not reproduced".into()
    };
    Ok(rep)
}
