//! Comparison functions of class K, K∞ and KL.
//!
//! Every gain that shows up in the worked examples is a power law `k·r^p`,
//! and that family is closed under composition, inversion and (for equal
//! exponents) pointwise maximum. Anything else falls back to a strictly
//! increasing table with linear interpolation, sampled on a shared
//! log-spaced grid.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Relative slack used by every sampled (non-exact) comparison with the identity.
pub const SAMPLED_SLACK: f64 = 1e-9;

/// Log-spaced grid used whenever an operation has to fall back to tabulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for TableGrid {
    fn default() -> Self {
        TableGrid { lo: 1e-6, hi: 1e6, points: 512 }
    }
}

impl TableGrid {
    /// `0` followed by `points` log-spaced abscissae in `[lo, hi]`.
    pub fn abscissae(&self) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.points + 1);
        r.push(0.0);
        r.extend(log_space(self.lo, self.hi, self.points));
        r
    }
}

/// `n` log-spaced points covering `[lo, hi]` inclusive.
/// Composed exponents such as `(q₁/q₂)(q₂/q₁)` carry rounding; within this of one they count as linear.
pub const UNIT_EXPONENT_TOL: f64 = 1e-12;

pub fn is_unit_exponent(p: f64) -> bool {
    (p - 1.0).abs() <= UNIT_EXPONENT_TOL
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| {
            if k + 1 == n {
                hi
            } else {
                (a + (b - a) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Strictly increasing table through the origin, linearly interpolated.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    r: Vec<f64>,
    v: Vec<f64>,
}

impl Table {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidKFun("table needs at least two points".into()));
        }
        if points[0] != (0.0, 0.0) {
            return Err(Error::InvalidKFun("table must start at (0, 0)".into()));
        }
        for w in points.windows(2) {
            let ((r0, v0), (r1, v1)) = (w[0], w[1]);
            if !(r1.is_finite() && v1.is_finite()) {
                return Err(Error::InvalidKFun("non-finite table entry".into()));
            }
            if !(r1 > r0 && v1 > v0) {
                return Err(Error::InvalidKFun(format!(
                    "table not strictly increasing at ({r1}, {v1})"
                )));
            }
        }
        let (r, v) = points.into_iter().unzip();
        Ok(Table { r, v })
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.r.iter().copied().zip(self.v.iter().copied())
    }

    pub fn r_max(&self) -> f64 {
        *self.r.last().unwrap()
    }

    pub fn v_max(&self) -> f64 {
        *self.v.last().unwrap()
    }

    fn eval(&self, r: f64) -> Result<f64> {
        let r_max = self.r_max();
        if r > r_max * (1.0 + 1e-12) {
            return Err(Error::OutOfTableRange { arg: r, max: r_max });
        }
        let r = r.min(r_max);
        let k = self.r.partition_point(|&x| x <= r);
        if k == self.r.len() {
            return Ok(self.v_max());
        }
        let (r0, r1) = (self.r[k - 1], self.r[k]);
        let (v0, v1) = (self.v[k - 1], self.v[k]);
        Ok(v0 + (v1 - v0) * (r - r0) / (r1 - r0))
    }

    /// Right-hand slope at `r`.
    fn slope(&self, r: f64) -> Result<f64> {
        let r_max = self.r_max();
        if r > r_max * (1.0 + 1e-12) {
            return Err(Error::OutOfTableRange { arg: r, max: r_max });
        }
        let k = self.r.partition_point(|&x| x <= r).clamp(1, self.r.len() - 1);
        Ok((self.v[k] - self.v[k - 1]) / (self.r[k] - self.r[k - 1]))
    }

    fn swapped(&self) -> Table {
        Table { r: self.v.clone(), v: self.r.clone() }
    }
}

/// A class-K comparison function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KFunRepr", into = "KFunRepr")]
pub enum KFun {
    /// `coeff · r^expo`, always K∞.
    Power { coeff: f64, expo: f64 },
    Table(Table),
    /// Pointwise max or min of power laws, evaluated exactly.
    Envelope(Envelope),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum KFunRepr {
    Power { coeff: f64, expo: f64 },
    Table { points: Vec<[f64; 2]> },
    Max { terms: Vec<[f64; 2]> },
    Min { terms: Vec<[f64; 2]> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvelopeOp {
    Max,
    Min,
}

/// `max_k` (or `min_k`) of `c_k r^{p_k}`, at most one term per exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    op: EnvelopeOp,
    terms: Vec<(f64, f64)>,
}

impl Envelope {
    /// Builds the envelope, collapsing to a plain power law when one term survives.
    pub fn build(op: EnvelopeOp, terms: Vec<(f64, f64)>) -> Result<KFun> {
        if terms.is_empty() {
            return Err(Error::EmptyList);
        }
        let mut sorted = Vec::with_capacity(terms.len());
        for (c, p) in terms {
            KFun::power(c, p)?;
            sorted.push((c, p));
        }
        sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut kept: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
        for (c, p) in sorted {
            match kept.last_mut() {
                Some(last) if last.1 == p => {
                    last.0 = match op {
                        EnvelopeOp::Max => last.0.max(c),
                        EnvelopeOp::Min => last.0.min(c),
                    }
                }
                _ => kept.push((c, p)),
            }
        }
        if kept.len() == 1 {
            return KFun::power(kept[0].0, kept[0].1);
        }
        Ok(KFun::Envelope(Envelope { op, terms: kept }))
    }

    pub fn op(&self) -> EnvelopeOp {
        self.op
    }

    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    fn pick(&self, a: f64, b: f64) -> f64 {
        match self.op {
            EnvelopeOp::Max => a.max(b),
            EnvelopeOp::Min => a.min(b),
        }
    }

    fn eval(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let mut it = self.terms.iter().map(|&(c, p)| c * r.powf(p));
        let first = it.next().unwrap();
        it.fold(first, |acc, v| self.pick(acc, v))
    }

    fn derivative(&self, r: f64) -> f64 {
        let best = self.eval(r);
        let mut slope: Option<f64> = None;
        for &(c, p) in &self.terms {
            let v = if r == 0.0 { 0.0 } else { c * r.powf(p) };
            if v == best {
                let d = KFun::Power { coeff: c, expo: p }.derivative(r).unwrap();
                slope = Some(slope.map_or(d, |s| self.pick(s, d)));
            }
        }
        slope.unwrap()
    }
}

impl TryFrom<KFunRepr> for KFun {
    type Error = Error;
    fn try_from(repr: KFunRepr) -> Result<Self> {
        match repr {
            KFunRepr::Power { coeff, expo } => KFun::power(coeff, expo),
            KFunRepr::Table { points } => {
                Ok(KFun::Table(Table::new(points.into_iter().map(|[r, v]| (r, v)).collect())?))
            }
            KFunRepr::Max { terms } => Envelope::build(EnvelopeOp::Max, pairs(terms)),
            KFunRepr::Min { terms } => Envelope::build(EnvelopeOp::Min, pairs(terms)),
        }
    }
}

impl From<KFun> for KFunRepr {
    fn from(f: KFun) -> Self {
        match f {
            KFun::Power { coeff, expo } => KFunRepr::Power { coeff, expo },
            KFun::Table(t) => KFunRepr::Table { points: t.points().map(|(r, v)| [r, v]).collect() },
            KFun::Envelope(e) => {
                let terms = e.terms.iter().map(|&(c, p)| [c, p]).collect();
                match e.op {
                    EnvelopeOp::Max => KFunRepr::Max { terms },
                    EnvelopeOp::Min => KFunRepr::Min { terms },
                }
            }
        }
    }
}

fn pairs(v: Vec<[f64; 2]>) -> Vec<(f64, f64)> {
    v.into_iter().map(|[a, b]| (a, b)).collect()
}

fn compose_powers((a, p): (f64, f64), (b, q): (f64, f64)) -> (f64, f64) {
    (a * b.powf(p), p * q)
}

impl fmt::Display for KFun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KFun::Power { coeff, expo } => write!(f, "{coeff}·r^{expo}"),
            KFun::Table(t) => write!(f, "table[{} pts, r ≤ {}]", t.r.len(), t.r_max()),
            KFun::Envelope(e) => {
                let name = if e.op == EnvelopeOp::Max { "max" } else { "min" };
                let parts: Vec<String> = e.terms.iter().map(|(c, p)| format!("{c}·r^{p}")).collect();
                write!(f, "{name}({})", parts.join(", "))
            }
        }
    }
}

impl KFun {
    pub fn power(coeff: f64, expo: f64) -> Result<Self> {
        if !(coeff.is_finite() && coeff > 0.0 && expo.is_finite() && expo > 0.0) {
            return Err(Error::InvalidKFun(format!(
                "power law needs positive finite coeff and expo, got ({coeff}, {expo})"
            )));
        }
        Ok(KFun::Power { coeff, expo })
    }

    pub fn identity() -> Self {
        KFun::Power { coeff: 1.0, expo: 1.0 }
    }

    pub fn linear(coeff: f64) -> Result<Self> {
        KFun::power(coeff, 1.0)
    }

    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        Ok(KFun::Table(Table::new(points)?))
    }

    /// Tabulates `f` on `grid`; `f` must be strictly increasing with `f(0) = 0`.
    pub fn tabulate(grid: &TableGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        KFun::table(grid.abscissae().into_iter().map(|r| (r, f(r))).collect())
    }

    pub fn as_power(&self) -> Option<(f64, f64)> {
        match *self {
            KFun::Power { coeff, expo } => Some((coeff, expo)),
            _ => None,
        }
    }

    /// Largest argument the function is defined for.
    pub fn range_max(&self) -> f64 {
        match self {
            KFun::Power { .. } | KFun::Envelope(_) => f64::INFINITY,
            KFun::Table(t) => t.r_max(),
        }
    }

    /// Largest value the function attains on its domain.
    pub fn value_max(&self) -> f64 {
        match self {
            KFun::Power { .. } | KFun::Envelope(_) => f64::INFINITY,
            KFun::Table(t) => t.v_max(),
        }
    }

    pub fn is_k_infinity(&self) -> bool {
        !matches!(self, KFun::Table(_))
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::NegativeArgument(r));
        }
        match *self {
            KFun::Power { coeff, expo } => Ok(if r == 0.0 { 0.0 } else { coeff * r.powf(expo) }),
            KFun::Table(ref t) => t.eval(r),
            KFun::Envelope(ref e) => Ok(e.eval(r)),
        }
    }

    /// Right-hand derivative; infinite at `0` for power laws with exponent below one.
    pub fn derivative(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::NegativeArgument(r));
        }
        match *self {
            KFun::Power { coeff, expo } => {
                if r == 0.0 {
                    Ok(if expo < 1.0 {
                        f64::INFINITY
                    } else if expo == 1.0 {
                        coeff
                    } else {
                        0.0
                    })
                } else {
                    Ok(coeff * expo * r.powf(expo - 1.0))
                }
            }
            KFun::Table(ref t) => t.slope(r),
            KFun::Envelope(ref e) => Ok(e.derivative(r)),
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &KFun) -> Result<KFun> {
        self.compose_on(inner, &TableGrid::default())
    }

    pub fn compose_on(&self, inner: &KFun, grid: &TableGrid) -> Result<KFun> {
        match (self, inner) {
            (&KFun::Power { coeff: a, expo: p }, &KFun::Power { coeff: b, expo: q }) => {
                let (c, e) = compose_powers((a, p), (b, q));
                return KFun::power(c, e);
            }
            (&KFun::Power { coeff, expo }, KFun::Envelope(g)) => {
                let terms = g.terms.iter().map(|&t| compose_powers((coeff, expo), t)).collect();
                return Envelope::build(g.op, terms);
            }
            (KFun::Envelope(f), &KFun::Power { coeff, expo }) => {
                let terms = f.terms.iter().map(|&t| compose_powers(t, (coeff, expo))).collect();
                return Envelope::build(f.op, terms);
            }
            (KFun::Envelope(f), KFun::Envelope(g)) if f.op == g.op => {
                let terms = f
                    .terms
                    .iter()
                    .flat_map(|&a| g.terms.iter().map(move |&b| compose_powers(a, b)))
                    .collect();
                return Envelope::build(f.op, terms);
            }
            _ => {}
        }
        let outer_max = self.range_max();
        let mut pts = Vec::new();
        for r in grid.abscissae() {
            if r > inner.range_max() {
                break;
            }
            let g = inner.eval(r)?;
            if g > outer_max {
                break;
            }
            pts.push((r, self.eval(g)?));
        }
        table_from_increasing(pts)
    }

    pub fn invert(&self) -> Result<KFun> {
        match *self {
            KFun::Power { coeff, expo } => KFun::power(coeff.powf(-1.0 / expo), 1.0 / expo),
            KFun::Table(ref t) => Ok(KFun::Table(t.swapped())),
            // y = max_k f_k(r)  ⟺  r = min_k f_k⁻¹(y)
            KFun::Envelope(ref e) => {
                let op = if e.op == EnvelopeOp::Max { EnvelopeOp::Min } else { EnvelopeOp::Max };
                let terms = e.terms.iter().map(|&(c, p)| (c.powf(-1.0 / p), 1.0 / p)).collect();
                Envelope::build(op, terms)
            }
        }
    }

    /// Inverse that must be defined on `[0, upto]`.
    pub fn invert_on(&self, upto: f64) -> Result<KFun> {
        let covered = self.value_max();
        if covered < upto {
            return Err(Error::NotInvertibleOnRange { requested: upto, covered });
        }
        self.invert()
    }

    pub fn pointwise_max(fs: &[KFun]) -> Result<KFun> {
        Self::pointwise_extremum(fs, &TableGrid::default(), true)
    }

    pub fn pointwise_min(fs: &[KFun]) -> Result<KFun> {
        Self::pointwise_extremum(fs, &TableGrid::default(), false)
    }

    /// Exact pointwise max when every input is a power law or a max-envelope;
    /// falls back to [`KFun::pointwise_max`] otherwise.
    pub fn pointwise_max_exact(fs: &[KFun]) -> Result<KFun> {
        Self::exact_extremum(fs, EnvelopeOp::Max).map_or_else(|| Self::pointwise_max(fs), |r| r)
    }

    /// Exact pointwise min, dual of [`KFun::pointwise_max_exact`].
    pub fn pointwise_min_exact(fs: &[KFun]) -> Result<KFun> {
        Self::exact_extremum(fs, EnvelopeOp::Min).map_or_else(|| Self::pointwise_min(fs), |r| r)
    }

    fn exact_extremum(fs: &[KFun], op: EnvelopeOp) -> Option<Result<KFun>> {
        let mut terms = Vec::new();
        for f in fs {
            match f {
                KFun::Power { coeff, expo } => terms.push((*coeff, *expo)),
                KFun::Envelope(e) if e.op == op => terms.extend_from_slice(&e.terms),
                _ => return None,
            }
        }
        Some(Envelope::build(op, terms))
    }

    pub fn pointwise_max_on(fs: &[KFun], grid: &TableGrid) -> Result<KFun> {
        Self::pointwise_extremum(fs, grid, true)
    }

    fn pointwise_extremum(fs: &[KFun], grid: &TableGrid, take_max: bool) -> Result<KFun> {
        let first = fs.first().ok_or(Error::EmptyList)?;
        if fs.len() == 1 {
            return Ok(first.clone());
        }
        if let Some((_, p0)) = first.as_power() {
            let coeffs: Option<Vec<f64>> = fs
                .iter()
                .map(|f| f.as_power().filter(|&(_, p)| p == p0).map(|(c, _)| c))
                .collect();
            if let Some(cs) = coeffs {
                let pick = if take_max {
                    cs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                } else {
                    cs.iter().copied().fold(f64::INFINITY, f64::min)
                };
                return KFun::power(pick, p0);
            }
        }
        let r_max = fs.iter().map(KFun::range_max).fold(f64::INFINITY, f64::min);
        let mut pts = Vec::new();
        for r in grid.abscissae() {
            if r > r_max {
                break;
            }
            let vals = fs.iter().map(|f| f.eval(r)).collect::<Result<Vec<_>>>()?;
            let v = if take_max {
                vals.into_iter().fold(f64::NEG_INFINITY, f64::max)
            } else {
                vals.into_iter().fold(f64::INFINITY, f64::min)
            };
            pts.push((r, v));
        }
        table_from_increasing(pts)
    }

    /// Decides `self < Id` on `range`.
    ///
    /// Power laws on the whole half-line are decided exactly: the inequality
    /// holds iff the exponent is one and the coefficient is below one.
    /// Everything else is sampled at `n_samples` log-spaced points and must
    /// satisfy `f(r) ≤ r·(1 − SAMPLED_SLACK)` at each of them.
    pub fn less_than_id(&self, range: SampleRange, n_samples: usize) -> Result<bool> {
        match (self, range) {
            (KFun::Power { coeff, expo }, SampleRange::Global) => Ok(is_unit_exponent(*expo) && *coeff < 1.0),
            (KFun::Envelope(e), SampleRange::Global) if e.op == EnvelopeOp::Max => Ok(false),
            _ => {
                let (lo, hi) = self.sample_bounds(range)?;
                for r in log_space(lo, hi, n_samples.max(2)) {
                    if self.eval(r)? > r * (1.0 - SAMPLED_SLACK) {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }

    /// Concrete sampling interval for `range`; tables use their own support.
    pub fn sample_bounds(&self, range: SampleRange) -> Result<(f64, f64)> {
        let (lo, hi) = match range {
            SampleRange::Bounded { lo, hi } => (lo, hi),
            SampleRange::Global => match self {
                KFun::Power { .. } | KFun::Envelope(_) => (TableGrid::default().lo, TableGrid::default().hi),
                KFun::Table(t) => (t.r[1], t.r_max()),
            },
        };
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::DegenerateRange { lo, hi });
        }
        Ok((lo, hi.min(self.range_max())))
    }
}

fn table_from_increasing(pts: Vec<(f64, f64)>) -> Result<KFun> {
    // Drop points that lost strict monotonicity to rounding or underflow.
    let mut kept: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for (r, v) in pts {
        match kept.last() {
            Some(&(_, last)) if v <= last => continue,
            _ => kept.push((r, v)),
        }
    }
    KFun::table(kept)
}

/// Where a sampled comparison with the identity is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SampleRange {
    Global,
    Bounded { lo: f64, hi: f64 },
}

/// Decreasing-to-zero function of time, tabulated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl DecayTable {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 || times[0] != 0.0 {
            return Err(Error::InvalidKFun("decay table needs matching (t, ζ) starting at t = 0".into()));
        }
        let ok = times.windows(2).all(|w| w[1] > w[0])
            && values.windows(2).all(|w| w[1] <= w[0])
            && values.iter().all(|v| *v >= 0.0 && v.is_finite());
        if !ok {
            return Err(Error::InvalidKFun("decay table must be increasing in t and nonincreasing in ζ".into()));
        }
        Ok(DecayTable { times, values })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let last = self.times.len() - 1;
        if t >= self.times[last] {
            // Hyperbolic tail keeps the limit at zero.
            return self.values[last] * self.times[last] / t;
        }
        let k = self.times.partition_point(|&x| x <= t).max(1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (z0, z1) = (self.values[k - 1], self.values[k]);
        z0 + (z1 - z0) * (t - t0) / (t1 - t0)
    }
}

/// A class-KL envelope `β(r, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KLFun {
    /// `M e^{−a t} r`
    Exp { m: f64, a: f64 },
    /// `ζ(t) · k(r)`
    Product { zeta: DecayTable, k: KFun },
}

impl KLFun {
    pub fn exp_envelope(m: f64, a: f64) -> Result<Self> {
        if !(m > 0.0 && a > 0.0 && m.is_finite() && a.is_finite()) {
            return Err(Error::InvalidKFun(format!("exponential envelope needs M, a > 0, got ({m}, {a})")));
        }
        Ok(KLFun::Exp { m, a })
    }

    pub fn eval(&self, r: f64, t: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::NegativeArgument(r));
        }
        if !(t >= 0.0) {
            return Err(Error::NegativeArgument(t));
        }
        match self {
            KLFun::Exp { m, a } => Ok(m * (-a * t).exp() * r),
            KLFun::Product { zeta, k } => Ok(zeta.eval(t) * k.eval(r)?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(c: f64, e: f64) -> KFun {
        KFun::power(c, e).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(p(1.0, 1.0).eval(0.0).unwrap(), 0.0);
        assert_relative_eq!(p(2.0, 0.5).eval(9.0).unwrap(), 6.0);
        // a·π^{(1−m)/2}·r^m at a = 2, m = 1
        let (a, m) = (2.0_f64, 1.0_f64);
        let chi = p(a * std::f64::consts::PI.powf((1.0 - m) / 2.0), m);
        assert_relative_eq!(chi.eval(3.0).unwrap(), 6.0);
    }

    #[test]
    fn eval_errors() {
        assert!(matches!(p(1.0, 1.0).eval(-1.0), Err(Error::NegativeArgument(_))));
        let t = KFun::table(vec![(0.0, 0.0), (1.0, 2.0)]).unwrap();
        assert!(matches!(t.eval(3.0), Err(Error::OutOfTableRange { .. })));
        assert_relative_eq!(t.eval(0.25).unwrap(), 0.5);
    }

    #[test]
    fn table_validation() {
        assert!(KFun::table(vec![(0.0, 0.0)]).is_err());
        assert!(KFun::table(vec![(0.0, 0.1), (1.0, 2.0)]).is_err());
        assert!(KFun::table(vec![(0.0, 0.0), (1.0, 2.0), (2.0, 2.0)]).is_err());
        assert!(KFun::power(0.0, 1.0).is_err());
        assert!(KFun::power(1.0, -1.0).is_err());
    }

    #[test]
    fn compose_examples() {
        assert_eq!(p(2.0, 1.0).compose(&p(3.0, 1.0)).unwrap(), p(6.0, 1.0));
        let fg = p(2.0, 2.0).compose(&p(3.0, 0.5)).unwrap();
        let (c, e) = fg.as_power().unwrap();
        assert_relative_eq!(c, 18.0, max_relative = 1e-14);
        assert_eq!(e, 1.0);
        // pointwise oracle: f(g(r)) evaluated directly
        for r in [0.1, 1.0, 10.0] {
            let direct = 2.0 * (3.0 * f64::sqrt(r)).powi(2);
            assert!((fg.eval(r).unwrap() - direct).abs() <= 1e-12 * direct.max(1.0));
        }
        let f = p(1.7, 0.3);
        assert_eq!(f.compose(&KFun::identity()).unwrap(), f);
    }

    #[test]
    fn compose_with_table_tracks_pointwise_values() {
        let g = KFun::tabulate(&TableGrid::default(), |r| r + r * r).unwrap();
        let f = p(2.0, 0.5);
        let fg = f.compose(&g).unwrap();
        for r in [1e-3_f64, 0.5, 3.0, 40.0] {
            let want = 2.0 * (r + r * r).sqrt();
            assert_relative_eq!(fg.eval(r).unwrap(), want, max_relative = 1e-2);
        }
        // outer table narrower than inner range truncates the result
        let short = KFun::table(vec![(0.0, 0.0), (10.0, 10.0)]).unwrap();
        let h = short.compose(&p(2.0, 1.0)).unwrap();
        assert!(h.range_max() <= 5.0);
    }

    #[test]
    fn invert_examples() {
        let inv = p(4.0, 2.0).invert().unwrap();
        assert_eq!(inv, p(0.5, 0.5));
        for r in [0.5, 2.0, 7.0] {
            let back = inv.eval(p(4.0, 2.0).eval(r).unwrap()).unwrap();
            assert!((back - r).abs() <= 1e-12 * r);
        }
        assert_eq!(KFun::identity().invert().unwrap(), KFun::identity());
        assert_eq!(p(2.0, 1.0).invert().unwrap(), p(0.5, 1.0));
    }

    #[test]
    fn invert_table_range() {
        let t = KFun::table(vec![(0.0, 0.0), (1.0, 3.0), (2.0, 4.0)]).unwrap();
        let inv = t.invert().unwrap();
        assert_relative_eq!(inv.eval(3.5).unwrap(), 1.5);
        assert!(matches!(t.invert_on(10.0), Err(Error::NotInvertibleOnRange { .. })));
        assert!(t.invert_on(4.0).is_ok());
    }

    #[test]
    fn pointwise_max_examples() {
        assert_eq!(KFun::pointwise_max(&[p(2.0, 1.0), p(3.0, 1.0)]).unwrap(), p(3.0, 1.0));
        let m = KFun::pointwise_max(&[p(1.0, 1.0), p(1.0, 2.0)]).unwrap();
        assert!(matches!(m, KFun::Table(_)));
        assert_relative_eq!(m.eval(0.5).unwrap(), 0.5, max_relative = 1e-3);
        assert_relative_eq!(m.eval(2.0).unwrap(), 4.0, max_relative = 1e-3);
        assert_eq!(KFun::pointwise_max(&[p(5.0, 0.2)]).unwrap(), p(5.0, 0.2));
        assert!(matches!(KFun::pointwise_max(&[]), Err(Error::EmptyList)));
        assert_eq!(KFun::pointwise_min(&[p(2.0, 1.0), p(3.0, 1.0)]).unwrap(), p(2.0, 1.0));
    }

    #[test]
    fn less_than_id_examples() {
        let g = SampleRange::Global;
        assert!(p(0.81, 1.0).less_than_id(g, 100).unwrap());
        assert!(!p(1.0, 1.0).less_than_id(g, 100).unwrap());
        assert!(!p(0.5, 2.0).less_than_id(g, 100).unwrap());
        // the sampled oracle agrees: 0.5·4² = 8 > 4
        assert!(p(0.5, 2.0).eval(4.0).unwrap() > 4.0);
        // locally below the identity for r < 2
        let local = SampleRange::Bounded { lo: 1e-3, hi: 1.9 };
        assert!(p(0.5, 2.0).less_than_id(local, 100).unwrap());
        let bad = SampleRange::Bounded { lo: 0.0, hi: 1.0 };
        assert!(matches!(p(0.5, 2.0).less_than_id(bad, 10), Err(Error::DegenerateRange { .. })));
    }

    #[test]
    fn json_round_trip_and_shape() {
        let f = p(0.81, 1.0);
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"kind":"power","coeff":0.81,"expo":1.0}"#);
        let t: KFun = serde_json::from_str(r#"{"kind":"table","points":[[0,0],[1,2],[3,4]]}"#).unwrap();
        assert_relative_eq!(t.eval(2.0).unwrap(), 3.0);
        assert!(serde_json::from_str::<KFun>(r#"{"kind":"power","coeff":-1,"expo":1}"#).is_err());
    }

    #[test]
    fn kl_envelope() {
        let b = KLFun::exp_envelope(2.0, 1.0).unwrap();
        assert_relative_eq!(b.eval(3.0, 0.0).unwrap(), 6.0);
        assert!(b.eval(3.0, 5.0).unwrap() < b.eval(3.0, 1.0).unwrap());
        let z = DecayTable::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.25]).unwrap();
        let prod = KLFun::Product { zeta: z, k: p(1.0, 2.0) };
        assert_relative_eq!(prod.eval(2.0, 0.5).unwrap(), 4.0 * 0.75);
        assert!(prod.eval(2.0, 1e6).unwrap() < 1e-5);
        assert!(DecayTable::new(vec![0.0, 1.0], vec![0.5, 1.0]).is_err());
    }

    #[test]
    fn envelope_algebra() {
        let m = KFun::pointwise_max_exact(&[p(1.0, 1.0), p(1.0, 2.0), p(0.5, 1.0)]).unwrap();
        assert!(matches!(m, KFun::Envelope(_)));
        assert_eq!(m.eval(0.5).unwrap(), 0.5);
        assert_eq!(m.eval(2.0).unwrap(), 4.0);
        assert_eq!(KFun::pointwise_max_exact(&[p(2.0, 1.0), p(3.0, 1.0)]).unwrap(), p(3.0, 1.0));
        let inv = m.invert().unwrap();
        for r in [0.1, 0.9, 1.0, 3.0, 50.0] {
            let back = inv.eval(m.eval(r).unwrap()).unwrap();
            assert_relative_eq!(back, r, max_relative = 1e-14);
        }
        // power ∘ max distributes termwise
        let g = p(3.0, 0.5).compose(&m).unwrap();
        for r in [0.2, 1.0, 7.0] {
            assert_relative_eq!(g.eval(r).unwrap(), 3.0 * m.eval(r).unwrap().sqrt(), max_relative = 1e-14);
        }
        let mm = m.compose(&m).unwrap();
        assert_relative_eq!(mm.eval(3.0).unwrap(), 81.0, max_relative = 1e-14);
        assert_eq!(m.derivative(2.0).unwrap(), 4.0);
        assert_eq!(m.derivative(1.0).unwrap(), 2.0);
        assert!(!m.less_than_id(SampleRange::Global, 10).unwrap());
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<KFun>(&s).unwrap(), m);
    }

    fn power_law() -> impl Strategy<Value = KFun> {
        (0.05f64..20.0, 0.2f64..3.0).prop_map(|(c, e)| p(c, e))
    }

    proptest! {
        #[test]
        fn compose_is_associative(f in power_law(), g in power_law(), h in power_law(), lr in -3.0f64..3.0) {
            let r = 10f64.powf(lr);
            let a = f.compose(&g).unwrap().compose(&h).unwrap().eval(r).unwrap();
            let b = f.compose(&g.compose(&h).unwrap()).unwrap().eval(r).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300) * 10.0);
        }

        #[test]
        fn inverse_of_composition(f in power_law(), g in power_law(), lr in -2.0f64..2.0) {
            let r = 10f64.powf(lr);
            let lhs = f.compose(&g).unwrap().invert().unwrap().eval(r).unwrap();
            let rhs = g.invert().unwrap().compose(&f.invert().unwrap()).unwrap().eval(r).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
        }

        #[test]
        fn monotone(f in power_law(), a in 0.0f64..100.0, b in 0.0f64..100.0) {
            prop_assume!(a != b);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(f.eval(lo).unwrap() < f.eval(hi).unwrap());
            let m = KFun::pointwise_max(&[f.clone(), p(1.0, 1.5)]).unwrap();
            prop_assert!(m.eval(lo).unwrap() <= m.eval(hi).unwrap());
        }

        #[test]
        fn below_identity_iterates_to_zero(c in 0.01f64..0.999, r0 in 1e-3f64..1e3) {
            let f = p(c, 1.0);
            prop_assert!(f.less_than_id(SampleRange::Global, 100).unwrap());
            let mut r = r0;
            let mut k = 0;
            while r >= 1e-6 * r0 && k < 10_000 {
                r = f.eval(r).unwrap();
                k += 1;
            }
            prop_assert!(r < 1e-6 * r0);
        }
    }
}
