use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::grid::{laplacian, norm, Boundary, Grid1D, NormKind, Tridiag};
use crate::error::{Error, Result};

/// Scalar nonlinearities available to system specs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalarMap {
    None,
    Identity,
    /// `s ↦ s³`
    CubicOdd,
    /// `s ↦ √|s|`
    SqrtAbs,
    /// `s ↦ s²`
    Square,
    /// `s ↦ sign(s)|s|^m`
    PowerM(f64),
}

impl ScalarMap {
    pub fn from_id(id: &str, m: Option<f64>) -> Result<Self> {
        Ok(match id {
            "none" => ScalarMap::None,
            "identity" | "linear" => ScalarMap::Identity,
            "cubic_odd" => ScalarMap::CubicOdd,
            "sqrt_abs" => ScalarMap::SqrtAbs,
            "square" => ScalarMap::Square,
            "power_m" => {
                let m = m.ok_or_else(|| Error::InvalidSpec("power_m needs an exponent `m`".into()))?;
                if !(m > 0.0 && m.is_finite()) {
                    return Err(Error::InvalidSpec(format!("power_m exponent must be positive, got {m}")));
                }
                ScalarMap::PowerM(m)
            }
            other => return Err(Error::RegistryUnknown(other.to_string())),
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            ScalarMap::None => "none",
            ScalarMap::Identity => "identity",
            ScalarMap::CubicOdd => "cubic_odd",
            ScalarMap::SqrtAbs => "sqrt_abs",
            ScalarMap::Square => "square",
            ScalarMap::PowerM(_) => "power_m",
        }
    }

    pub fn exponent(&self) -> Option<f64> {
        match *self {
            ScalarMap::PowerM(m) => Some(m),
            _ => None,
        }
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            ScalarMap::None => 0.0,
            ScalarMap::Identity => s,
            ScalarMap::CubicOdd => s * s * s,
            ScalarMap::SqrtAbs => s.abs().sqrt(),
            ScalarMap::Square => s * s,
            ScalarMap::PowerM(m) => s.signum() * s.abs().powf(m),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            ScalarMap::None => 0.0,
            ScalarMap::Identity => 1.0,
            ScalarMap::CubicOdd => 3.0 * s * s,
            ScalarMap::SqrtAbs => s.signum() * 0.5 / s.abs().sqrt(),
            ScalarMap::Square => 2.0 * s,
            ScalarMap::PowerM(m) => m * s.abs().powf(m - 1.0),
        }
    }

    /// `∫₀^s f(y) dy`
    pub fn antiderivative(&self, s: f64) -> f64 {
        match *self {
            ScalarMap::None => 0.0,
            ScalarMap::Identity => 0.5 * s * s,
            ScalarMap::CubicOdd => 0.25 * s.powi(4),
            ScalarMap::SqrtAbs => s.signum() * (2.0 / 3.0) * s.abs().powf(1.5),
            ScalarMap::Square => s * s * s / 3.0,
            ScalarMap::PowerM(m) => s.abs().powf(m + 1.0) / (m + 1.0),
        }
    }

    /// Odd and strictly increasing.
    pub fn is_odd_monotone(&self) -> bool {
        matches!(self, ScalarMap::Identity | ScalarMap::CubicOdd | ScalarMap::PowerM(_))
    }
}

/// `coeff · map(s_source)` added to the equation of `target`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub target: usize,
    pub source: usize,
    pub map: ScalarMap,
    pub coeff: f64,
}

/// `coeff · map(u_channel)` added to the equation of `target`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputTerm {
    pub target: usize,
    pub channel: usize,
    pub map: ScalarMap,
    pub coeff: f64,
}

/// Declarative coupled reaction-diffusion system
/// `∂s_i/∂t = c_i ∂²s_i/∂x² + Σ_j R_ij s_j + Σ terms + Σ input terms`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct SystemSpec {
    pub diffusion: Vec<f64>,
    pub bc: Vec<Boundary>,
    pub linear_coupling: Vec<Vec<f64>>,
    pub nonlinear: Vec<Term>,
    pub inputs: Vec<InputTerm>,
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    target: usize,
    source: usize,
    map: String,
    #[serde(default = "one")]
    coeff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct InputTermRepr {
    target: usize,
    channel: usize,
    map: String,
    #[serde(default = "one")]
    coeff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BcRepr {
    One(Boundary),
    Each(Vec<Boundary>),
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    diffusion: Vec<f64>,
    bc: BcRepr,
    #[serde(default)]
    linear_coupling: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    nonlinear: Vec<TermRepr>,
    #[serde(default)]
    inputs: Vec<InputTermRepr>,
}

fn zero_based(k: usize, what: &str) -> Result<usize> {
    k.checked_sub(1).ok_or_else(|| Error::InvalidSpec(format!("{what} indices are 1-based")))
}

impl TryFrom<SpecRepr> for SystemSpec {
    type Error = Error;
    fn try_from(r: SpecRepr) -> Result<Self> {
        let n = r.diffusion.len();
        let bc = match r.bc {
            BcRepr::One(b) => vec![b; n],
            BcRepr::Each(v) => v,
        };
        let nonlinear = r
            .nonlinear
            .into_iter()
            .map(|t| {
                Ok(Term {
                    target: zero_based(t.target, "species")?,
                    source: zero_based(t.source, "species")?,
                    map: ScalarMap::from_id(&t.map, t.m)?,
                    coeff: t.coeff,
                })
            })
            .collect::<Result<_>>()?;
        let inputs = r
            .inputs
            .into_iter()
            .map(|t| {
                Ok(InputTerm {
                    target: zero_based(t.target, "species")?,
                    channel: zero_based(t.channel, "channel")?,
                    map: ScalarMap::from_id(&t.map, t.m)?,
                    coeff: t.coeff,
                })
            })
            .collect::<Result<_>>()?;
        let spec = SystemSpec {
            linear_coupling: r.linear_coupling.unwrap_or_else(|| vec![vec![0.0; n]; n]),
            diffusion: r.diffusion,
            bc,
            nonlinear,
            inputs,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<SystemSpec> for SpecRepr {
    fn from(s: SystemSpec) -> Self {
        SpecRepr {
            diffusion: s.diffusion,
            bc: BcRepr::Each(s.bc),
            linear_coupling: Some(s.linear_coupling),
            nonlinear: s
                .nonlinear
                .into_iter()
                .map(|t| TermRepr {
                    target: t.target + 1,
                    source: t.source + 1,
                    map: t.map.id().into(),
                    coeff: t.coeff,
                    m: t.map.exponent(),
                })
                .collect(),
            inputs: s
                .inputs
                .into_iter()
                .map(|t| InputTermRepr {
                    target: t.target + 1,
                    channel: t.channel + 1,
                    map: t.map.id().into(),
                    coeff: t.coeff,
                    m: t.map.exponent(),
                })
                .collect(),
        }
    }
}

impl SystemSpec {
    /// Purely diffusive system with no coupling.
    pub fn diffusive(diffusion: Vec<f64>, bc: Boundary) -> Self {
        let n = diffusion.len();
        SystemSpec {
            bc: vec![bc; n],
            linear_coupling: vec![vec![0.0; n]; n],
            diffusion,
            nonlinear: Vec::new(),
            inputs: Vec::new(),
        }
    }

    /// Finite-dimensional ODE `ẋ = R x`: one Neumann node per species, whose
    /// discrete Laplacian vanishes identically.
    pub fn ode(r: Vec<Vec<f64>>) -> Result<Self> {
        let n = r.len();
        let mut spec = SystemSpec::diffusive(vec![1.0; n], Boundary::Neumann);
        spec.linear_coupling = r;
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_coupling(mut self, r: Vec<Vec<f64>>) -> Result<Self> {
        self.linear_coupling = r;
        self.validate()?;
        Ok(self)
    }

    pub fn with_term(mut self, target: usize, source: usize, map: ScalarMap, coeff: f64) -> Result<Self> {
        self.nonlinear.push(Term { target, source, map, coeff });
        self.validate()?;
        Ok(self)
    }

    pub fn with_input(mut self, target: usize, channel: usize, map: ScalarMap, coeff: f64) -> Result<Self> {
        self.inputs.push(InputTerm { target, channel, map, coeff });
        self.validate()?;
        Ok(self)
    }

    pub fn species(&self) -> usize {
        self.diffusion.len()
    }

    pub fn channels(&self) -> usize {
        self.inputs.iter().map(|t| t.channel + 1).max().unwrap_or(0)
    }

    /// Copy with every nonlinear and input term removed.
    pub fn linear_part(&self) -> SystemSpec {
        SystemSpec { nonlinear: Vec::new(), inputs: Vec::new(), ..self.clone() }
    }

    pub fn has_diagonal_coupling(&self) -> bool {
        self.linear_coupling
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().enumerate().all(|(j, v)| i == j || *v == 0.0))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.species();
        if n == 0 {
            return Err(Error::InvalidSpec("no species".into()));
        }
        if let Some(c) = self.diffusion.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::InvalidSpec(format!("diffusion coefficients must be positive, got {c}")));
        }
        if self.bc.len() != n {
            return Err(Error::ShapeMismatch(format!("{} boundary conditions for {n} species", self.bc.len())));
        }
        if self.linear_coupling.len() != n || self.linear_coupling.iter().any(|r| r.len() != n) {
            return Err(Error::ShapeMismatch(format!("linear coupling must be {n}×{n}")));
        }
        if self.linear_coupling.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite coupling entry".into()));
        }
        for t in &self.nonlinear {
            if t.target >= n || t.source >= n {
                return Err(Error::InvalidSpec(format!("term references species beyond {n}")));
            }
            if self.bc[t.target] != self.bc[t.source] {
                return Err(Error::InvalidSpec("coupled species must share a boundary condition".into()));
            }
        }
        for (i, row) in self.linear_coupling.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if *v != 0.0 && self.bc[i] != self.bc[j] {
                    return Err(Error::InvalidSpec("coupled species must share a boundary condition".into()));
                }
            }
        }
        if let Some(t) = self.inputs.iter().find(|t| t.target >= n) {
            return Err(Error::InvalidSpec(format!("input term targets species {}", t.target + 1)));
        }
        Ok(())
    }
}

/// Multi-species field, species-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    species: usize,
    n: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(species: usize, n: usize) -> Self {
        Field { species, n, values: vec![0.0; species * n] }
    }

    pub fn from_species(blocks: Vec<Vec<f64>>) -> Result<Self> {
        let species = blocks.len();
        let n = blocks.first().map_or(0, Vec::len);
        if blocks.iter().any(|b| b.len() != n) {
            return Err(Error::ShapeMismatch("species blocks of unequal length".into()));
        }
        Ok(Field { species, n, values: blocks.concat() })
    }

    pub fn from_flat(species: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != species * n {
            return Err(Error::ShapeMismatch(format!("{} values for {species}×{n}", values.len())));
        }
        Ok(Field { species, n, values })
    }

    pub fn n_species(&self) -> usize {
        self.species
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn species(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn species_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, k: f64) {
        self.values.iter_mut().for_each(|v| *v *= k);
    }

    /// `self + k·other`
    pub fn axpy(&self, k: f64, other: &Field) -> Field {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + k * b).collect();
        Field { values, ..*self }
    }
}

/// A system spec bound to a grid, with cached operators.
#[derive(Clone, Debug)]
pub struct Model {
    pub spec: SystemSpec,
    pub grid: Grid1D,
    laps: Vec<Tridiag>,
}

impl Model {
    pub fn new(spec: SystemSpec, grid: Grid1D) -> Result<Self> {
        spec.validate()?;
        let laps = (0..spec.species()).map(|i| laplacian(&grid, spec.bc[i], spec.diffusion[i])).collect();
        Ok(Model { spec, grid, laps })
    }

    pub fn species(&self) -> usize {
        self.spec.species()
    }

    pub fn n(&self) -> usize {
        self.grid.n_interior
    }

    pub fn laplacian(&self, i: usize) -> &Tridiag {
        &self.laps[i]
    }

    pub fn bc(&self, i: usize) -> Boundary {
        self.spec.bc[i]
    }

    pub fn nodes(&self, species: usize) -> Vec<f64> {
        self.grid.nodes(self.spec.bc[species])
    }

    /// Node layout of an input channel: that of the first species it drives.
    pub fn channel_bc(&self, channel: usize) -> Boundary {
        self.spec
            .inputs
            .iter()
            .find(|t| t.channel == channel)
            .map_or(Boundary::Dirichlet, |t| self.spec.bc[t.target])
    }

    pub fn zeros(&self) -> Field {
        Field::zeros(self.species(), self.n())
    }

    /// Field with `f(species, x)` sampled at each species' nodes.
    pub fn field_from_fn(&self, f: impl Fn(usize, f64) -> f64) -> Field {
        let blocks = (0..self.species()).map(|i| self.nodes(i).into_iter().map(|x| f(i, x)).collect()).collect();
        Field::from_species(blocks).expect("uniform blocks")
    }

    pub fn check_field(&self, f: &Field) -> Result<()> {
        if f.n_species() != self.species() || f.n_points() != self.n() {
            return Err(Error::ShapeMismatch(format!(
                "field is {}×{}, model needs {}×{}",
                f.n_species(),
                f.n_points(),
                self.species(),
                self.n()
            )));
        }
        Ok(())
    }

    pub fn check_input(&self, u: &[Vec<f64>]) -> Result<()> {
        let ch = self.spec.channels();
        if u.len() < ch || u.iter().take(ch).any(|c| c.len() != self.n()) {
            return Err(Error::ShapeMismatch(format!("expected {ch} input channels of length {}", self.n())));
        }
        Ok(())
    }

    pub fn norm(&self, f: &Field, which: NormKind, species: usize) -> f64 {
        norm(&self.grid, self.spec.bc[species], f.species(species), which)
    }

    /// `c_i L s_i + Σ_j R_ij s_j`
    pub fn linear_into(&self, s: &Field, out: &mut Field) {
        let n = self.n();
        for i in 0..self.species() {
            self.laps[i].matvec_into(s.species(i), out.species_mut(i));
            for (j, r) in self.spec.linear_coupling[i].iter().enumerate() {
                if *r != 0.0 {
                    let src = &s.values[j * n..(j + 1) * n];
                    let dst = &mut out.values[i * n..(i + 1) * n];
                    dst.iter_mut().zip(src).for_each(|(d, v)| *d += r * v);
                }
            }
        }
    }

    /// Explicit part: nonlinear terms plus inputs, accumulated into `out`.
    pub fn nonlinear_add(&self, s: &Field, u: &[Vec<f64>], out: &mut Field) {
        let n = self.n();
        for t in &self.spec.nonlinear {
            let src = &s.values[t.source * n..(t.source + 1) * n];
            let vals: Vec<f64> = src.iter().map(|v| t.coeff * t.map.eval(*v)).collect();
            out.species_mut(t.target).iter_mut().zip(vals).for_each(|(d, v)| *d += v);
        }
        for t in &self.spec.inputs {
            let src = &u[t.channel];
            out.species_mut(t.target).iter_mut().zip(src).for_each(|(d, v)| *d += t.coeff * t.map.eval(*v));
        }
    }

    pub fn rhs(&self, s: &Field, u: &[Vec<f64>]) -> Result<Field> {
        self.check_field(s)?;
        self.check_input(u)?;
        let mut out = self.zeros();
        self.linear_into(s, &mut out);
        self.nonlinear_add(s, u, &mut out);
        Ok(out)
    }

    /// Dense block generator of the linear part.
    pub fn generator(&self) -> DMatrix<f64> {
        let (n, k) = (self.n(), self.species());
        let mut g = DMatrix::zeros(n * k, n * k);
        for i in 0..k {
            let lap = &self.laps[i];
            for p in 0..n {
                g[(i * n + p, i * n + p)] += lap.diag[p];
                if p + 1 < n {
                    g[(i * n + p, i * n + p + 1)] += lap.off[p];
                    g[(i * n + p + 1, i * n + p)] += lap.off[p];
                }
            }
            for (j, r) in self.spec.linear_coupling[i].iter().enumerate() {
                if *r != 0.0 {
                    for p in 0..n {
                        g[(i * n + p, j * n + p)] += r;
                    }
                }
            }
        }
        g
    }

    /// Quadrature weight attached to every entry of the flat state.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.species())
            .flat_map(|i| std::iter::repeat(self.grid.weight(self.spec.bc[i])).take(self.n()))
            .collect()
    }
}
