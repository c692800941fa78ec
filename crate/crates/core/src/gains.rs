//! Gain operator Γ, small-gain decision and Ω-path construction.
//!
//! `entries[i][j]` holds χ_ij, the gain from subsystem `j` into subsystem
//! `i`; in the gain digraph it is an edge `j → i`. Indices are 0-based in
//! Rust and 1-based in JSON.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certificate::{Certificate, CycleRecord, Witness};
use crate::error::{Error, Result};
use crate::kfun::{is_unit_exponent, log_space, KFun, SampleRange, SAMPLED_SLACK};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GainMatrixRepr", into = "GainMatrixRepr")]
pub struct GainMatrix {
    n: usize,
    entries: Vec<Vec<Option<KFun>>>,
    input_gains: Vec<Option<KFun>>,
}

#[derive(Serialize, Deserialize)]
struct EdgeRepr {
    from: usize,
    to: usize,
    gain: KFun,
}

#[derive(Serialize, Deserialize)]
struct GainMatrixRepr {
    n: usize,
    #[serde(default)]
    edges: Vec<EdgeRepr>,
    #[serde(default)]
    input_gains: Vec<Option<KFun>>,
}

impl TryFrom<GainMatrixRepr> for GainMatrix {
    type Error = Error;
    fn try_from(r: GainMatrixRepr) -> Result<Self> {
        let mut g = GainMatrix::new(r.n)?;
        for e in r.edges {
            if e.from == 0 || e.to == 0 {
                return Err(Error::InvalidGainMatrix("edge indices are 1-based".into()));
            }
            g.set(e.to - 1, e.from - 1, e.gain)?;
        }
        if !r.input_gains.is_empty() {
            if r.input_gains.len() != r.n {
                return Err(Error::DimensionMismatch { expected: r.n, got: r.input_gains.len() });
            }
            g.input_gains = r.input_gains;
        }
        Ok(g)
    }
}

impl From<GainMatrix> for GainMatrixRepr {
    fn from(g: GainMatrix) -> Self {
        let mut edges = Vec::new();
        for (i, row) in g.entries.into_iter().enumerate() {
            for (j, e) in row.into_iter().enumerate() {
                if let Some(gain) = e {
                    edges.push(EdgeRepr { from: j + 1, to: i + 1, gain });
                }
            }
        }
        GainMatrixRepr { n: g.n, edges, input_gains: g.input_gains }
    }
}

impl GainMatrix {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGainMatrix("need at least one subsystem".into()));
        }
        Ok(GainMatrix { n, entries: vec![vec![None; n]; n], input_gains: vec![None; n] })
    }

    /// Sets χ_ij (edge `j → i`).
    pub fn set(&mut self, i: usize, j: usize, gain: KFun) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::InvalidGainMatrix(format!("entry ({i}, {j}) outside {}×{}", self.n, self.n)));
        }
        if i == j {
            return Err(Error::InvalidGainMatrix(format!("self-gain χ_{i}{i} is not allowed")));
        }
        self.entries[i][j] = Some(gain);
        Ok(())
    }

    pub fn with(mut self, i: usize, j: usize, gain: KFun) -> Result<Self> {
        self.set(i, j, gain)?;
        Ok(self)
    }

    pub fn set_input_gain(&mut self, i: usize, gain: KFun) -> Result<()> {
        if i >= self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: i + 1 });
        }
        self.input_gains[i] = Some(gain);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&KFun> {
        self.entries.get(i)?.get(j)?.as_ref()
    }

    pub fn input_gain(&self, i: usize) -> Option<&KFun> {
        self.input_gains.get(i)?.as_ref()
    }

    pub fn input_gains(&self) -> &[Option<KFun>] {
        &self.input_gains
    }

    /// `(Γ s)_i = max_j χ_ij(s_j)`, zero for empty rows.
    pub fn gamma_apply(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: s.len() });
        }
        self.entries
            .iter()
            .map(|row| {
                let mut best = 0.0_f64;
                for (j, e) in row.iter().enumerate() {
                    if let Some(chi) = e {
                        best = best.max(chi.eval(s[j])?);
                    }
                }
                Ok(best)
            })
            .collect()
    }

    /// All simple cycles, each listed once starting from its smallest node.
    /// A cycle `[v0, v1, …]` follows edges `v0 → v1 → … → v0`.
    pub fn simple_cycles(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        let mut on_path = vec![false; self.n];
        for start in 0..self.n {
            path.push(start);
            on_path[start] = true;
            self.extend_cycles(start, start, &mut path, &mut on_path, &mut out);
            on_path[start] = false;
            path.pop();
        }
        out
    }

    fn extend_cycles(
        &self,
        start: usize,
        at: usize,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        out: &mut Vec<Vec<usize>>,
    ) {
        for next in start..self.n {
            if self.entries[next][at].is_none() {
                continue;
            }
            if next == start {
                out.push(path.clone());
            } else if !on_path[next] {
                path.push(next);
                on_path[next] = true;
                self.extend_cycles(start, next, path, on_path, out);
                on_path[next] = false;
                path.pop();
            }
        }
    }

    /// Composite gain around `cycle`, applied in traversal order.
    pub fn cycle_gain(&self, cycle: &[usize]) -> Result<KFun> {
        let mut acc = KFun::identity();
        for k in 0..cycle.len() {
            let (from, to) = (cycle[k], cycle[(k + 1) % cycle.len()]);
            let chi = self.entries[to][from]
                .as_ref()
                .ok_or_else(|| Error::InvalidGainMatrix(format!("no edge {} → {}", from + 1, to + 1)))?;
            acc = chi.compose(&acc)?;
        }
        Ok(acc)
    }
}

const MARGIN_GRID: (f64, f64, usize) = (1e-3, 1e3, 200);

fn sampled_margin(g: &KFun, lo: f64, hi: f64, n: usize) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for r in log_space(lo, hi.min(g.range_max()), n) {
        worst = worst.min((r - g.eval(r)?) / r);
    }
    Ok(worst)
}

/// Argument at which a failing cycle gain is at least the identity.
fn growth_point(g: &KFun) -> Result<Option<f64>> {
    if let Some((k, p)) = g.as_power() {
        return Ok(Some(if is_unit_exponent(p) {
            1.0
        } else if p > 1.0 {
            2.0 * k.powf(-1.0 / (p - 1.0))
        } else {
            0.5 * k.powf(1.0 / (1.0 - p))
        }));
    }
    let (lo, hi) = g.sample_bounds(SampleRange::Global)?;
    for r in log_space(lo, hi, 2000) {
        if g.eval(r)? >= r {
            return Ok(Some(r));
        }
    }
    Ok(None)
}

/// Builds `s ≠ 0` with `Γ(s) ≥ s` from a cycle whose gain reaches the identity at `r`.
fn cycle_witness(g: &GainMatrix, cycle: &[usize], r: f64) -> Result<Option<Vec<f64>>> {
    let mut s = vec![0.0; g.n];
    s[cycle[0]] = r;
    for k in 1..cycle.len() {
        let chi = g.get(cycle[k], cycle[k - 1]).expect("cycle edge");
        s[cycle[k]] = chi.eval(s[cycle[k - 1]])?;
    }
    let gs = g.gamma_apply(&s)?;
    let ok = s.iter().zip(&gs).all(|(si, gi)| *gi >= si * (1.0 - 1e-12));
    Ok(ok.then_some(s))
}

/// Decides the small-gain condition `Γ(s) ≱ s` for all `s ≠ 0` by cycle enumeration.
///
/// Linear-power cycles are decided exactly (coefficient below one); power
/// cycles with exponent other than one fail globally, and the interval on
/// which they still stay below the identity is recorded. Tabulated cycles
/// fall back to sampling over their support. The verdict is strict: a cycle
/// gain equal to the identity fails even though its margin is zero.
pub fn small_gain_check(g: &GainMatrix) -> Result<Certificate> {
    let mut cert = Certificate::new("small_gain", 0.0).param("n", g.n);
    let mut records = Vec::new();
    let mut verdict = true;
    let mut worst = 1.0_f64;
    for cycle in g.simple_cycles() {
        let comp = g.cycle_gain(&cycle)?;
        let (coeff, expo) = comp.as_power().map_or((None, None), |(c, p)| (Some(c), Some(p)));
        let mut local_interval = None;
        let (holds, margin) = match (coeff, expo) {
            (Some(c), Some(p)) if is_unit_exponent(p) => (c < 1.0, 1.0 - c),
            (Some(c), Some(p)) => {
                let rstar = if p > 1.0 { c.powf(-1.0 / (p - 1.0)) } else { c.powf(1.0 / (1.0 - p)) };
                local_interval = Some(if p > 1.0 { [0.0, rstar] } else { [rstar, f64::MAX] });
                (false, sampled_margin(&comp, MARGIN_GRID.0, MARGIN_GRID.1, MARGIN_GRID.2)?)
            }
            _ => {
                let holds = comp.less_than_id(SampleRange::Global, MARGIN_GRID.2)?;
                let (lo, hi) = comp.sample_bounds(SampleRange::Global)?;
                (holds, sampled_margin(&comp, lo, hi, MARGIN_GRID.2)?)
            }
        };
        worst = worst.min(margin);
        if !holds {
            if verdict {
                if let Some(r) = growth_point(&comp)? {
                    if let Some(s) = cycle_witness(g, &cycle, r)? {
                        cert.push_witness(Witness {
                            label: format!("Γ(s) ≥ s along cycle {:?}", one_based(&cycle)),
                            margin,
                            state: s,
                            input: vec![],
                            block_len: 1,
                        });
                    }
                }
            }
            verdict = false;
        }
        records.push(CycleRecord { nodes: one_based(&cycle), coeff, expo, holds, margin, local_interval });
    }
    cert.samples = records.len();
    cert.worst_margin = worst;
    cert.cycles = Some(records);
    Ok(cert.decide(verdict))
}

/// Small-gain condition restricted to levels in `[lo, hi]`: every cycle gain
/// must stay below the identity at sampled points of that interval.
pub fn small_gain_check_local(g: &GainMatrix, lo: f64, hi: f64, n_samples: usize) -> Result<Certificate> {
    let range = SampleRange::Bounded { lo, hi };
    let mut cert = Certificate::new("small_gain_local", 0.0).param("lo", lo).param("hi", hi);
    let mut verdict = true;
    let mut worst = 1.0_f64;
    let mut records = Vec::new();
    for cycle in g.simple_cycles() {
        let comp = g.cycle_gain(&cycle)?;
        let holds = comp.less_than_id(range, n_samples)?;
        let (a, b) = comp.sample_bounds(range)?;
        let margin = sampled_margin(&comp, a, b, n_samples)?;
        worst = worst.min(margin);
        verdict &= holds;
        let (coeff, expo) = comp.as_power().map_or((None, None), |(c, p)| (Some(c), Some(p)));
        records.push(CycleRecord { nodes: one_based(&cycle), coeff, expo, holds, margin, local_interval: None });
    }
    cert.samples = records.len();
    cert.worst_margin = worst;
    cert.cycles = Some(records);
    Ok(cert.decide(verdict))
}

fn one_based(c: &[usize]) -> Vec<usize> {
    c.iter().map(|v| v + 1).collect()
}

/// Settings of the monotone-iteration cross-check.
#[derive(Clone, Copy, Debug)]
pub struct IterationOracle {
    pub starts: usize,
    pub max_steps: usize,
    pub log10_lo: f64,
    pub log10_hi: f64,
    pub seed: u64,
}

impl Default for IterationOracle {
    fn default() -> Self {
        IterationOracle { starts: 50, max_steps: 10_000, log10_lo: -8.0, log10_hi: 8.0, seed: 0 }
    }
}

/// Family-agnostic small-gain test: iterate Γ from random start vectors.
///
/// A start counts as decaying when the maximum component falls below
/// `1e-6` of its initial value while still contracting (the maximum over the
/// last 120 steps must at least halve), which rules out convergence to a
/// nonzero fixed orbit. Growth beyond `1e200` counts as failure.
pub fn small_gain_by_iteration(g: &GainMatrix, cfg: &IterationOracle) -> Result<bool> {
    const WINDOW: usize = 120;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.starts {
        let mut s: Vec<f64> =
            (0..g.n).map(|_| 10f64.powf(rng.gen_range(cfg.log10_lo..cfg.log10_hi))).collect();
        let m0 = s.iter().copied().fold(0.0, f64::max);
        let mut history = Vec::with_capacity(cfg.max_steps + 1);
        history.push(m0);
        let mut decayed = false;
        for step in 1..=cfg.max_steps {
            s = g.gamma_apply(&s)?;
            let m = s.iter().copied().fold(0.0, f64::max);
            if !m.is_finite() || m > 1e200 {
                return Ok(false);
            }
            history.push(m);
            if m == 0.0 {
                decayed = true;
                break;
            }
            if m < 1e-6 * m0 && step >= WINDOW && m <= 0.5 * history[step - WINDOW] {
                decayed = true;
                break;
            }
        }
        if !decayed {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Constructed,
    UserSupplied,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaPath {
    pub sigmas: Vec<KFun>,
    pub provenance: Provenance,
    #[serde(default)]
    verified: bool,
}

impl OmegaPath {
    /// A path supplied from outside; it starts unverified.
    pub fn user_supplied(sigmas: Vec<KFun>) -> Self {
        OmegaPath { sigmas, provenance: Provenance::UserSupplied, verified: false }
    }

    pub fn is_verified(&self) -> bool {
        self.verified
    }

    pub fn eval(&self, r: f64) -> Result<Vec<f64>> {
        self.sigmas.iter().map(|s| s.eval(r)).collect()
    }
}

/// `σ(t) = MAX{a t, Γ(a t), …, Γ^{n−1}(a t)}` built symbolically.
///
/// Levels are composed exactly: power laws stay power laws, and maxima over
/// different exponents become exact max-of-power envelopes, so the path
/// inequality can be checked without interpolation error.
pub fn omega_path_build(g: &GainMatrix, a: &[f64]) -> Result<OmegaPath> {
    if a.len() != g.n {
        return Err(Error::DimensionMismatch { expected: g.n, got: a.len() });
    }
    if !small_gain_check(g)?.verdict {
        return Err(Error::SmallGainViolated);
    }
    // `None` stands for the zero function.
    let mut level: Vec<Option<KFun>> =
        a.iter().map(|&ai| KFun::linear(ai).map(Some)).collect::<Result<_>>()?;
    let mut acc: Vec<Vec<KFun>> = level.iter().map(|f| f.iter().cloned().collect()).collect();
    for _ in 1..g.n {
        let mut next = Vec::with_capacity(g.n);
        for i in 0..g.n {
            let mut terms = Vec::new();
            for (j, lj) in level.iter().enumerate() {
                if let (Some(chi), Some(l)) = (g.get(i, j), lj) {
                    terms.push(chi.compose(l)?);
                }
            }
            next.push(if terms.is_empty() { None } else { Some(KFun::pointwise_max_exact(&terms)?) });
        }
        if next.iter().all(Option::is_none) {
            break;
        }
        for (i, l) in next.iter().enumerate() {
            if let Some(f) = l {
                acc[i].push(f.clone());
            }
        }
        level = next;
    }
    let sigmas = acc.iter().map(|fs| KFun::pointwise_max_exact(fs)).collect::<Result<Vec<_>>>()?;
    Ok(OmegaPath { sigmas, provenance: Provenance::Constructed, verified: false })
}

/// Checks `Γ(σ(r)) ≤ σ(r)` at `r_samples` log-spaced points of `[1e-3, 1e3]`
/// with relative slack `1e-9`; marks the path verified on success.
pub fn omega_path_verify(g: &GainMatrix, path: &mut OmegaPath, r_samples: usize) -> Result<Certificate> {
    omega_path_verify_on(g, path, 1e-3, 1e3, r_samples)
}

pub fn omega_path_verify_on(
    g: &GainMatrix,
    path: &mut OmegaPath,
    lo: f64,
    hi: f64,
    r_samples: usize,
) -> Result<Certificate> {
    if path.sigmas.len() != g.n {
        return Err(Error::DimensionMismatch { expected: g.n, got: path.sigmas.len() });
    }
    let mut cert = Certificate::new("omega_path", SAMPLED_SLACK)
        .param("r_lo", lo)
        .param("r_hi", hi)
        .param("r_samples", r_samples);
    for r in log_space(lo, hi, r_samples.max(2)) {
        let sigma = path.eval(r)?;
        let gs = g.gamma_apply(&sigma)?;
        let margin = sigma
            .iter()
            .zip(&gs)
            .map(|(s, gsi)| (s - gsi) / s)
            .fold(f64::INFINITY, f64::min);
        cert.record(margin, || Witness {
            label: format!("r = {r}"),
            margin,
            state: sigma.clone(),
            input: gs.clone(),
            block_len: 1,
        });
    }
    let cert = cert.finish();
    path.verified = cert.verdict;
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(c: f64, e: f64) -> KFun {
        KFun::power(c, e).unwrap()
    }

    fn pair(c12: f64, c21: f64) -> GainMatrix {
        GainMatrix::new(2).unwrap().with(0, 1, p(c12, 1.0)).unwrap().with(1, 0, p(c21, 1.0)).unwrap()
    }

    #[test]
    fn gamma_examples() {
        let g = pair(0.5, 2.0);
        assert_eq!(g.gamma_apply(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(g.gamma_apply(&[1.0, 1.0]).unwrap(), vec![0.5, 2.0]);
        assert!(matches!(g.gamma_apply(&[1.0]), Err(Error::DimensionMismatch { .. })));
        // χ12 = r / (c1² (π/d)⁴ (1−ε1)²) at unit parameters and ε1 = 0
        let c1: f64 = 1.0;
        let chi12 = p(1.0 / (c1 * c1 * 1.0 * 1.0), 1.0);
        let g = GainMatrix::new(2).unwrap().with(0, 1, chi12).unwrap();
        assert_eq!(g.gamma_apply(&[0.0, 1.0]).unwrap()[0], 1.0);
    }

    #[test]
    fn diagonal_rejected() {
        let mut g = GainMatrix::new(2).unwrap();
        assert!(g.set(1, 1, p(0.5, 1.0)).is_err());
        assert!(g.set(2, 0, p(0.5, 1.0)).is_err());
    }

    #[test]
    fn json_shape() {
        let text = r#"{"n":2,"edges":[{"from":2,"to":1,"gain":{"kind":"power","coeff":0.9,"expo":1}},
                       {"from":1,"to":2,"gain":{"kind":"power","coeff":0.9,"expo":1}}],
                       "input_gains":[{"kind":"power","coeff":1,"expo":1},null]}"#;
        let g: GainMatrix = serde_json::from_str(text).unwrap();
        assert_eq!(g.get(0, 1), Some(&p(0.9, 1.0)));
        assert!(g.input_gain(1).is_none());
        let back: GainMatrix = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<GainMatrix>(
            r#"{"n":2,"edges":[{"from":1,"to":1,"gain":{"kind":"power","coeff":1,"expo":1}}]}"#
        )
        .is_err());
    }

    #[test]
    fn cycles_enumerated_once() {
        let mut g = GainMatrix::new(3).unwrap();
        for (i, j) in [(0, 1), (1, 0), (1, 2), (2, 1), (2, 0), (0, 2)] {
            g.set(i, j, p(0.5, 1.0)).unwrap();
        }
        let mut cycles = g.simple_cycles();
        cycles.sort();
        // three 2-cycles and two orientations of the triangle
        assert_eq!(cycles.len(), 5);
    }

    #[test]
    fn small_gain_examples() {
        let g = pair(0.9, 0.9);
        let c = small_gain_check(&g).unwrap();
        assert!(c.verdict);
        let cyc = &c.cycles.as_ref().unwrap()[0];
        assert_eq!(cyc.nodes, vec![1, 2]);
        assert_relative_eq!(cyc.coeff.unwrap(), 0.81, max_relative = 1e-15);
        assert_eq!(cyc.expo, Some(1.0));
        assert!(small_gain_check(&GainMatrix::new(3).unwrap()).unwrap().verdict);
        assert!(!small_gain_check(&pair(1.0, 1.0)).unwrap().verdict);
    }

    #[test]
    fn ring_with_cycle_gain_two_fails_with_witness() {
        let g = GainMatrix::new(3)
            .unwrap()
            .with(1, 0, p(2.0, 1.0))
            .unwrap()
            .with(2, 1, p(1.0, 1.0))
            .unwrap()
            .with(0, 2, p(1.0, 1.0))
            .unwrap();
        let c = small_gain_check(&g).unwrap();
        assert!(!c.verdict);
        let s = &c.witnesses[0].state;
        let gs = g.gamma_apply(s).unwrap();
        assert!(s.iter().zip(&gs).all(|(a, b)| b >= a));
        // oracle: plain iteration from (1,1,1) grows
        let mut v = vec![1.0; 3];
        for _ in 0..30 {
            v = g.gamma_apply(&v).unwrap();
        }
        assert!(v.iter().copied().fold(0.0, f64::max) > 1000.0);
        assert!(!small_gain_by_iteration(&g, &IterationOracle::default()).unwrap());
    }

    #[test]
    fn nonlinear_cycle_reports_local_interval() {
        let g = GainMatrix::new(2).unwrap().with(0, 1, p(0.5, 2.0)).unwrap().with(1, 0, p(1.0, 1.0)).unwrap();
        let c = small_gain_check(&g).unwrap();
        assert!(!c.verdict);
        let cyc = &c.cycles.as_ref().unwrap()[0];
        assert_eq!(cyc.local_interval.unwrap()[1], 2.0);
        let s = &c.witnesses[0].state;
        let gs = g.gamma_apply(s).unwrap();
        assert!(s.iter().zip(&gs).all(|(a, b)| b >= a));
        assert!(small_gain_check_local(&g, 1e-3, 1.9, 100).unwrap().verdict);
        assert!(!small_gain_check_local(&g, 1e-3, 3.0, 100).unwrap().verdict);
    }

    #[test]
    fn omega_examples() {
        let g = pair(0.5, 0.5);
        let path = omega_path_build(&g, &[1.0, 1.0]).unwrap();
        assert_eq!(path.sigmas, vec![KFun::identity(), KFun::identity()]);

        let g = pair(2.0, 0.25);
        let mut path = omega_path_build(&g, &[1.0, 1.0]).unwrap();
        assert_eq!(path.sigmas, vec![p(2.0, 1.0), KFun::identity()]);
        assert!(omega_path_verify(&g, &mut path, 100).unwrap().verdict);
        assert!(path.is_verified());

        let single = GainMatrix::new(1).unwrap();
        let path = omega_path_build(&single, &[3.0]).unwrap();
        assert_eq!(path.sigmas, vec![p(3.0, 1.0)]);

        assert!(matches!(omega_path_build(&pair(2.0, 2.0), &[1.0, 1.0]), Err(Error::SmallGainViolated)));
    }

    #[test]
    fn omega_verify_examples() {
        let g = GainMatrix::new(2).unwrap().with(0, 1, p(2.0, 1.0)).unwrap();
        let mut path = OmegaPath::user_supplied(vec![KFun::identity(), KFun::identity()]);
        let c = omega_path_verify(&g, &mut path, 50).unwrap();
        assert!(!c.verdict);
        assert_eq!(c.worst_margin, -1.0);
        assert!(!path.is_verified());

        let zero = GainMatrix::new(2).unwrap();
        let mut path = OmegaPath::user_supplied(vec![p(3.0, 2.0), p(0.1, 0.5)]);
        assert!(omega_path_verify(&zero, &mut path, 50).unwrap().verdict);
    }

    #[test]
    fn mixed_exponents_give_exact_envelope_path() {
        // 1 → 2 linear cycle, plus a square-law feed 1 → 3
        let g = GainMatrix::new(3)
            .unwrap()
            .with(1, 0, p(0.7, 1.0))
            .unwrap()
            .with(0, 1, p(0.9, 1.0))
            .unwrap()
            .with(2, 0, p(1.5, 2.0))
            .unwrap();
        let mut path = omega_path_build(&g, &[1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(path.sigmas[2], KFun::Envelope(_)));
        assert!(omega_path_verify(&g, &mut path, 100).unwrap().verdict);
    }

    #[test]
    fn rounded_unit_exponent_is_linear() {
        let (q1, q2) = (0.7015463661686019, 1.771150605405849);
        assert_ne!((q2 / q1) * (q1 / q2), 1.0);
        let g = GainMatrix::new(2).unwrap().with(0, 1, p(0.3, q1 / q2)).unwrap().with(1, 0, p(0.4, q2 / q1)).unwrap();
        let c = small_gain_check(&g).unwrap();
        assert!(c.verdict, "{:?}", c.cycles);
    }

    #[test]
    fn two_node_reduces_to_less_than_id() {
        for (a, b, e1, e2) in [(0.9, 0.9, 1.0, 1.0), (1.2, 0.9, 1.0, 1.0), (0.5, 0.5, 2.0, 0.5), (0.3, 2.0, 0.5, 1.0)] {
            let g = GainMatrix::new(2).unwrap().with(0, 1, p(a, e1)).unwrap().with(1, 0, p(b, e2)).unwrap();
            let direct = p(a, e1).compose(&p(b, e2)).unwrap().less_than_id(SampleRange::Global, 100).unwrap();
            assert_eq!(small_gain_check(&g).unwrap().verdict, direct);
        }
    }

    fn vec_pair(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (proptest::collection::vec(0.0f64..10.0, n), proptest::collection::vec(0.0f64..10.0, n))
            .prop_map(|(a, d)| {
                let b = a.iter().zip(&d).map(|(x, y)| x + y).collect();
                (a, b)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn gamma_is_monotone((s, t) in vec_pair(3), c in 0.1f64..3.0, e in 0.5f64..2.0) {
            let g = GainMatrix::new(3).unwrap()
                .with(0, 1, p(c, e)).unwrap()
                .with(1, 2, p(1.0, 1.0)).unwrap()
                .with(2, 0, p(0.5, 0.5)).unwrap()
                .with(0, 2, p(2.0, 2.0)).unwrap();
            let gs = g.gamma_apply(&s).unwrap();
            let gt = g.gamma_apply(&t).unwrap();
            prop_assert!(gs.iter().zip(&gt).all(|(a, b)| a <= b));
            prop_assert_eq!(g.gamma_apply(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        }
    }
}
