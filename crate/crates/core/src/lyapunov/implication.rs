use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::function::{lie_derivative, LyapunovFn, Method};
use crate::certificate::{Certificate, Witness};
use crate::error::{Error, Result};
use crate::kfun::KFun;
use crate::pde::{norm, Boundary, Field, Model, NormKind};

/// Scalar size of a state/input pair.
#[derive(Clone, Debug, PartialEq)]
pub enum Measure {
    /// Norm of one species, or the Euclidean combination over all species.
    State { norm: NormKind, species: Option<usize> },
    /// Norm of one input channel, or the Euclidean combination over all channels.
    Input { norm: NormKind, channel: Option<usize> },
    /// Level of a Lyapunov function.
    Level(Box<LyapunovFn>),
}

impl Measure {
    pub fn state(norm: NormKind) -> Self {
        Measure::State { norm, species: None }
    }

    pub fn input(norm: NormKind) -> Self {
        Measure::Input { norm, channel: None }
    }

    pub fn level(v: LyapunovFn) -> Self {
        Measure::Level(Box::new(v))
    }

    pub fn eval(&self, model: &Model, x: &Field, u: &[Vec<f64>]) -> Result<f64> {
        match self {
            Measure::State { norm: k, species } => {
                let parts: Vec<f64> = match species {
                    Some(i) => vec![model.norm(x, *k, *i)],
                    None => (0..model.species()).map(|i| model.norm(x, *k, i)).collect(),
                };
                Ok(combine(*k, &parts))
            }
            Measure::Input { norm: k, channel } => {
                let idx: Vec<usize> = match channel {
                    Some(c) => vec![*c],
                    None => (0..model.spec.channels()).collect(),
                };
                let mut parts = Vec::with_capacity(idx.len());
                for c in idx {
                    let vals = u.get(c).ok_or_else(|| Error::ShapeMismatch(format!("no input channel {}", c + 1)))?;
                    parts.push(norm(&model.grid, model.channel_bc(c), vals, *k));
                }
                Ok(combine(*k, &parts))
            }
            Measure::Level(v) => v.value(model, x),
        }
    }
}

fn combine(k: NormKind, parts: &[f64]) -> f64 {
    match k {
        NormKind::Sup => parts.iter().copied().fold(0.0, f64::max),
        NormKind::L4 => parts.iter().map(|p| p.powi(4)).sum::<f64>().powf(0.25),
        NormKind::L2 | NormKind::H10 => parts.iter().map(|p| p * p).sum::<f64>().sqrt(),
    }
}

/// The implication `lhs ≥ χ(rhs) ⟹ V̇ ≤ −α(lhs)`.
#[derive(Clone, Debug)]
pub struct Implication {
    pub name: String,
    pub v: LyapunovFn,
    pub lhs: Measure,
    pub rhs: Measure,
    pub gain: KFun,
    /// `None` tests `V̇ ≤ 0`.
    pub alpha: Option<KFun>,
    /// Relative to `α(lhs)` when `α` is present, absolute otherwise.
    pub tolerance: f64,
    pub method: Method,
}

impl Implication {
    pub fn new(name: &str, v: LyapunovFn, lhs: Measure, rhs: Measure, gain: KFun) -> Self {
        Implication {
            name: name.to_string(),
            v,
            lhs,
            rhs,
            gain,
            alpha: None,
            tolerance: 0.0,
            method: Method::Analytic,
        }
    }

    pub fn alpha(mut self, alpha: KFun) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

/// How inputs relate to the premise of the implication.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    Zero,
    /// Independent random amplitudes.
    Free,
    /// Rescaled so that `χ(rhs) = θ·lhs`, `θ ∈ [1e-3, 1]`.
    Satisfy,
    /// Rescaled so that `χ(rhs) = θ·lhs`, `θ ∈ (1, 1e3]`.
    Violate,
}

/// What `Satisfy`/`Violate` rescale to hit the premise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleTarget {
    Inputs,
    Species(usize),
}

/// Random truncated sine (Dirichlet) or cosine (Neumann) series.
#[derive(Clone, Debug)]
pub struct Sampler {
    pub modes: usize,
    /// Log-uniform range of each species' sup-norm amplitude.
    pub state_amp: (f64, f64),
    /// Log-uniform range of each input channel's sup-norm amplitude.
    pub input_amp: (f64, f64),
    pub input_mode: InputMode,
    pub scale_target: ScaleTarget,
    /// Species held at zero.
    pub zero_species: Vec<usize>,
    /// Add a `±` pair of samples with every species at the top amplitude.
    pub include_ceiling: bool,
    pub seed: u64,
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler {
            modes: 12,
            state_amp: (1e-3, 1e1),
            input_amp: (1e-3, 1e1),
            input_mode: InputMode::Satisfy,
            scale_target: ScaleTarget::Inputs,
            zero_species: Vec::new(),
            include_ceiling: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub state: Field,
    pub input: Vec<Vec<f64>>,
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo >= hi {
        return hi;
    }
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Unit sup-norm random series on the given node layout.
fn series(rng: &mut ChaCha8Rng, modes: usize, xs: &[f64], d: f64, bc: Boundary) -> Vec<f64> {
    let k_count = rng.gen_range(1..=modes.max(1));
    let coefs: Vec<f64> = (0..k_count).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut v: Vec<f64> = xs
        .iter()
        .map(|x| {
            coefs
                .iter()
                .enumerate()
                .map(|(k, a)| match bc {
                    Boundary::Dirichlet => a / (k + 1) as f64 * ((k + 1) as f64 * PI * x / d).sin(),
                    Boundary::Neumann => a / (k.max(1)) as f64 * (k as f64 * PI * x / d).cos(),
                })
                .sum()
        })
        .collect();
    let sup = v.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    if sup > 0.0 {
        v.iter_mut().for_each(|a| *a /= sup);
    } else {
        v.iter_mut().for_each(|a| *a = 1.0);
    }
    v
}

impl Sampler {
    pub fn with_state_amp(mut self, lo: f64, hi: f64) -> Self {
        self.state_amp = (lo, hi);
        self
    }

    pub fn with_input_amp(mut self, lo: f64, hi: f64) -> Self {
        self.input_amp = (lo, hi);
        self
    }

    pub fn with_input_mode(mut self, mode: InputMode) -> Self {
        self.input_mode = mode;
        self
    }

    pub fn with_scale_target(mut self, t: ScaleTarget) -> Self {
        self.scale_target = t;
        self
    }

    pub fn with_zero_species(mut self, s: Vec<usize>) -> Self {
        self.zero_species = s;
        self
    }

    pub fn with_ceiling(mut self) -> Self {
        self.include_ceiling = true;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn random_state(&self, model: &Model, rng: &mut ChaCha8Rng) -> Field {
        let blocks = (0..model.species())
            .map(|i| {
                let shape = series(rng, self.modes, &model.nodes(i), model.grid.d, model.bc(i));
                let amp = log_uniform(rng, self.state_amp);
                if self.zero_species.contains(&i) {
                    vec![0.0; shape.len()]
                } else {
                    shape.into_iter().map(|v| amp * v).collect()
                }
            })
            .collect();
        Field::from_species(blocks).expect("uniform blocks")
    }

    pub fn random_input(&self, model: &Model, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..model.spec.channels())
            .map(|c| {
                let bc = model.channel_bc(c);
                let shape = series(rng, self.modes, &model.grid.nodes(bc), model.grid.d, bc);
                let amp = log_uniform(rng, self.input_amp);
                shape.into_iter().map(|v| amp * v).collect()
            })
            .collect()
    }

    /// Raw samples plus the premise ratio `θ` drawn for each.
    fn draw(&self, model: &Model, n: usize) -> Vec<(Sample, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(n + 2);
        if self.include_ceiling {
            let top = Sampler { state_amp: (self.state_amp.1, self.state_amp.1), ..self.clone() };
            let x = top.random_state(model, &mut rng);
            let u = self.random_input(model, &mut rng);
            let mut neg = x.clone();
            neg.scale(-1.0);
            out.push((Sample { state: x, input: u.clone() }, 1.0));
            out.push((Sample { state: neg, input: u }, 1.0));
        }
        while out.len() < n {
            let state = self.random_state(model, &mut rng);
            let input = self.random_input(model, &mut rng);
            let theta = match self.input_mode {
                InputMode::Satisfy => {
                    if rng.gen_bool(0.1) {
                        1.0
                    } else {
                        log_uniform(&mut rng, (1e-3, 1.0))
                    }
                }
                InputMode::Violate => log_uniform(&mut rng, (1.0 + 1e-6, 1e3)),
                _ => 1.0,
            };
            out.push((Sample { state, input }, theta));
        }
        out.truncate(n.max(if self.include_ceiling { 2 } else { 0 }));
        out
    }

    /// `n` samples; inputs adjusted to the premise of `imp` when requested.
    pub fn samples(&self, model: &Model, imp: &Implication, n: usize) -> Result<Vec<Sample>> {
        let raw = self.draw(model, n);
        raw.into_par_iter()
            .map(|(mut s, theta)| {
                match self.input_mode {
                    InputMode::Zero => s.input.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v = 0.0)),
                    InputMode::Free => {}
                    InputMode::Satisfy | InputMode::Violate => self.fit_premise(model, imp, &mut s, theta)?,
                }
                Ok(s)
            })
            .collect()
    }

    /// Rescales the scale target so that `rhs = χ⁻¹(θ·lhs)`.
    fn fit_premise(&self, model: &Model, imp: &Implication, s: &mut Sample, theta: f64) -> Result<()> {
        let lhs = imp.lhs.eval(model, &s.state, &s.input)?;
        let goal = theta * lhs;
        let target = if goal <= 0.0 {
            0.0
        } else if goal >= imp.gain.value_max() {
            f64::INFINITY
        } else {
            imp.gain.invert()?.eval(goal)?
        };
        let base = s.clone();
        let apply = |k: f64, out: &mut Sample| match self.scale_target {
            ScaleTarget::Inputs => {
                for (o, b) in out.input.iter_mut().zip(&base.input) {
                    o.iter_mut().zip(b).for_each(|(o, b)| *o = k * b);
                }
            }
            ScaleTarget::Species(j) => {
                out.state.species_mut(j).iter_mut().zip(base.state.species(j)).for_each(|(o, b)| *o = k * b);
            }
        };
        if target == 0.0 || !target.is_finite() {
            apply(if target == 0.0 { 0.0 } else { 1e12 }, s);
            return Ok(());
        }
        let measure = |k: f64| -> Result<f64> {
            let mut t = base.clone();
            apply(k, &mut t);
            imp.rhs.eval(model, &t.state, &t.input)
        };
        let (mut lo, mut hi) = (1.0, 1.0);
        if measure(1.0)? <= 0.0 {
            return Ok(());
        }
        while measure(lo)? > target && lo > 1e-300 {
            lo *= 0.5_f64.powi(8);
        }
        while measure(hi)? < target && hi < 1e300 {
            hi *= 2.0_f64.powi(8);
        }
        for _ in 0..80 {
            let mid = (lo * hi).sqrt();
            if measure(mid)? <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        apply(lo, s);
        Ok(())
    }
}

fn flat_witness(label: String, margin: f64, s: &Sample) -> Witness {
    Witness {
        label,
        margin,
        state: s.state.values().to_vec(),
        input: s.input.iter().flatten().copied().collect(),
        block_len: s.state.n_points(),
    }
}

/// Outcome for one sample: `None` when the premise does not hold.
fn evaluate(model: &Model, imp: &Implication, s: &Sample) -> Result<Option<(f64, f64, f64)>> {
    let lhs = imp.lhs.eval(model, &s.state, &s.input)?;
    let rhs = imp.rhs.eval(model, &s.state, &s.input)?;
    if !(lhs > 0.0) || rhs > imp.gain.range_max() || lhs < imp.gain.eval(rhs)? {
        return Ok(None);
    }
    let vdot = lie_derivative(&imp.v, model, &s.state, &s.input, imp.method)?;
    let a = match &imp.alpha {
        Some(f) => f.eval(lhs)?,
        None => 0.0,
    };
    let margin = if imp.alpha.is_some() && a > 0.0 { (-a - vdot) / a } else { -vdot };
    Ok(Some((margin, vdot, lhs)))
}

/// Samples the implication; margins are `(−α(lhs) − V̇)/α(lhs)` (or `−V̇` without `α`).
pub fn check_implication(model: &Model, imp: &Implication, sampler: &Sampler, n_samples: usize) -> Result<Certificate> {
    let samples = sampler.samples(model, imp, n_samples)?;
    check_samples(model, imp, &samples).map(|c| {
        c.param("seed", sampler.seed)
            .param("modes", sampler.modes)
            .param("state_amp", [sampler.state_amp.0, sampler.state_amp.1])
            .param("input_mode", sampler.input_mode)
    })
}

pub fn check_samples(model: &Model, imp: &Implication, samples: &[Sample]) -> Result<Certificate> {
    let results: Vec<Option<(f64, f64, f64)>> =
        samples.par_iter().map(|s| evaluate(model, imp, s)).collect::<Result<_>>()?;
    let mut cert = Certificate::new("implication", imp.tolerance)
        .param("name", &imp.name)
        .param("lyapunov", imp.v.kind_name())
        .param("method", imp.method)
        .param("drawn", samples.len());
    let mut worst_rate = f64::INFINITY;
    let mut applicable = 0usize;
    for (k, (r, s)) in results.iter().zip(samples).enumerate() {
        if let Some((margin, vdot, lhs)) = r {
            applicable += 1;
            if let Some(a) = &imp.alpha {
                let al = a.eval(*lhs)?;
                if al > 0.0 {
                    worst_rate = worst_rate.min(-vdot / al);
                }
            }
            cert.record(*margin, || flat_witness(format!("sample {k}"), *margin, s));
        }
    }
    cert.detail("applicable", applicable);
    if worst_rate.is_finite() {
        cert.detail("worst_rate_ratio", worst_rate);
    }
    Ok(cert.finish())
}
