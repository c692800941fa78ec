use nalgebra::{Complex, DMatrix, DVector};
use std::path::Path;

use super::grid::{NormKind, ThomasFactor};
use super::input::InputSignal;
use super::system::{Field, Model};
use crate::error::{Error, Result};
use crate::output::{fmt_f64, write_csv};

pub const DEFAULT_M_MAX: f64 = 1e8;

/// `1e-3 · (d/π)² / max c_i`
pub fn default_dt(model: &Model) -> f64 {
    let cmax = model.spec.diffusion.iter().copied().fold(0.0, f64::max);
    1e-3 * model.grid.diffusion_time(cmax)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    pub t_end: f64,
    /// `None` selects [`default_dt`].
    pub dt: Option<f64>,
    /// Sup-norm bound beyond which the run is declared blown up.
    pub m_max: f64,
    /// Record every `stride`-th step (the final step is always recorded).
    pub stride: usize,
}

impl SimOptions {
    pub fn new(t_end: f64) -> Self {
        SimOptions { t_end, dt: None, m_max: DEFAULT_M_MAX, stride: 1 }
    }

    pub fn dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    pub input: InputSignal,
    /// Time at which the sup-norm first exceeded `m_max` (or went non-finite).
    pub blowup: Option<f64>,
    pub dt: f64,
    /// Index of the first step, so `t_k = (start_step + k)·dt`.
    pub start_step: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Field {
        self.states.last().expect("trajectory holds the initial state")
    }
}

enum LinearSolver {
    /// One tridiagonal factor per species (diagonal coupling).
    Split(Vec<ThomasFactor>),
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

/// IMEX Euler: `(I − dt L_lin) s⁺ = s + dt N(s, u)`.
pub struct Stepper<'a> {
    model: &'a Model,
    dt: f64,
    solver: LinearSolver,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a Model, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let solver = if model.spec.has_diagonal_coupling() {
            let f = (0..model.species())
                .map(|i| model.laplacian(i).implicit_factor(dt, model.spec.linear_coupling[i][i]))
                .collect::<Result<_>>()?;
            LinearSolver::Split(f)
        } else {
            let g = model.generator();
            let m = DMatrix::identity(g.nrows(), g.ncols()) - g * dt;
            let lu = m.lu();
            if !lu.is_invertible() {
                return Err(Error::LinearSolveFailure("implicit operator is singular".into()));
            }
            LinearSolver::Dense(lu)
        };
        Ok(Stepper { model, dt, solver })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, s: &Field, u: &[Vec<f64>]) -> Result<Field> {
        self.model.check_input(u)?;
        let mut rhs = self.model.zeros();
        self.model.nonlinear_add(s, u, &mut rhs);
        let mut next = s.axpy(self.dt, &rhs);
        match &self.solver {
            LinearSolver::Split(f) => {
                for (i, fac) in f.iter().enumerate() {
                    fac.solve_in_place(next.species_mut(i));
                }
            }
            LinearSolver::Dense(lu) => {
                let b = DVector::from_column_slice(next.values());
                let x = lu.solve(&b).ok_or_else(|| Error::LinearSolveFailure("LU solve failed".into()))?;
                next.values_mut().copy_from_slice(x.as_slice());
            }
        }
        Ok(next)
    }
}

/// One IMEX step from time `t`.
pub fn step(model: &Model, state: &Field, input: &InputSignal, t: f64, dt: f64) -> Result<Field> {
    model.check_field(state)?;
    let u = input.sample(model, t)?;
    Stepper::new(model, dt)?.step(state, &u)
}

pub fn simulate(model: &Model, initial: &Field, input: &InputSignal, opts: &SimOptions) -> Result<Trajectory> {
    simulate_from(model, initial, input, opts, 0)
}

/// Runs `round(t_end/dt)` steps starting at step index `start_step`; times are
/// `k·dt` for integer `k`, so a continued run repeats the exact arithmetic of
/// an uninterrupted one.
pub fn simulate_from(
    model: &Model,
    initial: &Field,
    input: &InputSignal,
    opts: &SimOptions,
    start_step: usize,
) -> Result<Trajectory> {
    model.check_field(initial)?;
    if !(opts.t_end > 0.0) {
        return Err(Error::InvalidParameter(format!("t_end must be positive, got {}", opts.t_end)));
    }
    let dt = opts.dt.unwrap_or_else(|| default_dt(model));
    let stepper = Stepper::new(model, dt)?;
    let steps = (opts.t_end / dt).round().max(1.0) as usize;
    let stride = opts.stride.max(1);
    let cached = if input.is_time_invariant() { Some(input.sample(model, 0.0)?) } else { None };

    let mut traj = Trajectory {
        times: vec![start_step as f64 * dt],
        states: vec![initial.clone()],
        input: input.clone(),
        blowup: None,
        dt,
        start_step,
    };
    let mut s = initial.clone();
    for k in 0..steps {
        let t = (start_step + k) as f64 * dt;
        let next = match &cached {
            Some(u) => stepper.step(&s, u)?,
            None => stepper.step(&s, &input.sample(model, t)?)?,
        };
        let t_next = (start_step + k + 1) as f64 * dt;
        if !next.is_finite() || next.sup() > opts.m_max {
            traj.blowup = Some(t_next);
            if next.is_finite() {
                traj.times.push(t_next);
                traj.states.push(next);
            }
            return Ok(traj);
        }
        s = next;
        if (k + 1) % stride == 0 || k + 1 == steps {
            traj.times.push(t_next);
            traj.states.push(s.clone());
        }
    }
    Ok(traj)
}

/// Eigenvalues of the discretized linear generator (diffusion plus linear coupling).
pub fn spectrum(model: &Model) -> Result<Vec<Complex<f64>>> {
    let g = model.generator();
    let scale = g.amax().max(1.0);
    let symmetric = (&g - g.transpose()).amax() <= 1e-14 * scale;
    let mut eig: Vec<Complex<f64>> = if symmetric {
        g.symmetric_eigen().eigenvalues.iter().map(|&v| Complex::new(v, 0.0)).collect()
    } else {
        crate::linalg::eigenvalues(&g)?
    };
    eig.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(eig)
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(model: &Model) -> Result<f64> {
    Ok(spectrum(model)?.first().map_or(f64::NEG_INFINITY, |z| z.re))
}

/// CSV `t,species,i,x,value` (species and node indices 1-based).
pub fn write_trajectory_csv(model: &Model, traj: &Trajectory, path: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for (t, f) in traj.times.iter().zip(&traj.states) {
        for sp in 0..model.species() {
            for (i, (x, v)) in model.nodes(sp).iter().zip(f.species(sp)).enumerate() {
                rows.push(vec![fmt_f64(*t), (sp + 1).to_string(), (i + 1).to_string(), fmt_f64(*x), fmt_f64(*v)]);
            }
        }
    }
    write_csv(path, "t,species,i,x,value", rows)
}

/// CSV `t,species,L2,L4,H10,Sup`.
pub fn write_norms_csv(model: &Model, traj: &Trajectory, path: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for (t, f) in traj.times.iter().zip(&traj.states) {
        for sp in 0..model.species() {
            let mut row = vec![fmt_f64(*t), (sp + 1).to_string()];
            for k in [NormKind::L2, NormKind::L4, NormKind::H10, NormKind::Sup] {
                row.push(fmt_f64(model.norm(f, k, sp)));
            }
            rows.push(row);
        }
    }
    write_csv(path, "t,species,L2,L4,H10,Sup", rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{Boundary, Grid1D, SystemSpec};
    use std::f64::consts::PI;

    fn heat(bc: Boundary, n: usize) -> Model {
        Model::new(SystemSpec::diffusive(vec![1.0], bc), Grid1D::new(PI, n).unwrap()).unwrap()
    }

    #[test]
    fn stepper_rejects_missing_input() {
        let spec = SystemSpec::diffusive(vec![1.0], Boundary::Dirichlet)
            .with_input(0, 0, crate::pde::ScalarMap::Identity, 1.0)
            .unwrap();
        let m = Model::new(spec, Grid1D::new(PI, 10).unwrap()).unwrap();
        let st = Stepper::new(&m, 1e-3).unwrap();
        assert!(matches!(st.step(&m.zeros(), &[]), Err(Error::ShapeMismatch(_))));
        assert!(st.step(&m.zeros(), &[vec![0.0; 10]]).is_ok());
    }

    #[test]
    fn single_step_mode_factor() {
        let m = heat(Boundary::Dirichlet, 100);
        let s = m.field_from_fn(|_, x| x.sin());
        let dt = 0.01;
        let next = step(&m, &s, &InputSignal::zero(), 0.0, dt).unwrap();
        // discrete eigenvalue oracle
        let lam = crate::pde::dirichlet_eigenvalues(&m.grid, 1.0)[0];
        for (a, b) in next.values().iter().zip(s.values()) {
            assert!((a - b / (1.0 - dt * lam)).abs() < 1e-13);
        }
        let ratio = next.species(0)[49] / s.species(0)[49];
        assert!((ratio - 1.0 / (1.0 + dt)).abs() < 1e-5);
        assert_eq!(step(&m, &m.zeros(), &InputSignal::zero(), 0.0, dt).unwrap(), m.zeros());
    }

    #[test]
    fn scalar_ode_recurrence() {
        let lam = -0.7;
        let m = Model::new(SystemSpec::ode(vec![vec![lam]]).unwrap(), Grid1D::new(1.0, 1).unwrap()).unwrap();
        let dt = 0.1;
        let traj = simulate(&m, &Field::from_flat(1, 1, vec![1.0]).unwrap(), &InputSignal::zero(), &SimOptions::new(1.0).dt(dt)).unwrap();
        for (k, f) in traj.states.iter().enumerate() {
            let want = (1.0 - dt * lam).powi(-(k as i32));
            assert!((f.values()[0] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn semigroup_is_bitwise() {
        let spec = SystemSpec::diffusive(vec![1.0, 0.5], Boundary::Dirichlet)
            .with_coupling(vec![vec![-0.1, 0.4], vec![0.3, 0.0]])
            .unwrap()
            .with_term(0, 1, crate::pde::ScalarMap::Square, 1.0)
            .unwrap()
            .with_input(1, 0, crate::pde::ScalarMap::Identity, 1.0)
            .unwrap();
        let m = Model::new(spec, Grid1D::new(PI, 30).unwrap()).unwrap();
        let x0 = m.field_from_fn(|i, x| (1.0 + i as f64) * x.sin() * 0.3);
        let u = InputSignal::new(vec![crate::pde::ChannelSignal::closure(|x, t| (t * 3.0).sin() * x)]);
        let opts = SimOptions::new(0.5).dt(0.01);
        let whole = simulate(&m, &x0, &u, &SimOptions::new(1.0).dt(0.01)).unwrap();
        let first = simulate(&m, &x0, &u, &opts).unwrap();
        let second = simulate_from(&m, first.last(), &u, &opts, 50).unwrap();
        assert_eq!(whole.last(), second.last());
        assert_eq!(whole.times.last(), second.times.last());
    }

    #[test]
    fn neumann_mean_conserved() {
        let m = heat(Boundary::Neumann, 64);
        let x0 = m.field_from_fn(|_, x| 1.0 + x.cos() + 0.3 * (3.0 * x).cos());
        let traj = simulate(&m, &x0, &InputSignal::zero(), &SimOptions::new(1.0).dt(0.01)).unwrap();
        let mean = |f: &Field| f.values().iter().sum::<f64>() / 64.0;
        assert!((mean(traj.last()) - mean(&x0)).abs() < 1e-10);
    }

    #[test]
    fn dirichlet_l2_decays() {
        let m = heat(Boundary::Dirichlet, 50);
        let x0 = m.field_from_fn(|_, x| x * (PI - x));
        let traj = simulate(&m, &x0, &InputSignal::zero(), &SimOptions::new(2.0).dt(0.01)).unwrap();
        let l2: Vec<f64> = traj.states.iter().map(|f| m.norm(f, NormKind::L2, 0)).collect();
        assert!(l2.windows(2).all(|w| w[1] < w[0]));
        assert!(traj.states.iter().all(|f| f.values().iter().all(|v| *v >= 0.0)));
    }

    #[test]
    fn blowup_is_flagged() {
        let m = Model::new(SystemSpec::ode(vec![vec![5.0]]).unwrap(), Grid1D::new(1.0, 1).unwrap()).unwrap();
        let mut opts = SimOptions::new(100.0).dt(0.01);
        opts.m_max = 1e3;
        let traj = simulate(&m, &Field::from_flat(1, 1, vec![1.0]).unwrap(), &InputSignal::zero(), &opts).unwrap();
        let tb = traj.blowup.unwrap();
        assert!(tb > 1.0 && tb < 2.0, "{tb}");
    }

    #[test]
    fn coupled_spectrum_per_mode() {
        let g = 1.1;
        let spec = SystemSpec::diffusive(vec![1.0, 1.0], Boundary::Dirichlet)
            .with_coupling(vec![vec![0.0, g], vec![g, 0.0]])
            .unwrap();
        let m = Model::new(spec, Grid1D::new(PI, 60).unwrap()).unwrap();
        let top = spectral_abscissa(&m).unwrap();
        let kappa = -crate::pde::dirichlet_eigenvalues(&m.grid, 1.0)[0];
        assert!((top - (g - kappa)).abs() < 1e-10);
        assert!((top - 0.1).abs() < 1e-3);
        let zero = Model::new(SystemSpec::diffusive(vec![1.0, 2.0], Boundary::Dirichlet), m.grid).unwrap();
        assert_eq!(spectrum(&zero).unwrap().len(), 120);
    }

    #[test]
    fn nonsymmetric_spectrum() {
        let m = Model::new(
            SystemSpec::ode(vec![vec![-1.0, 0.5], vec![0.0, -2.0]]).unwrap(),
            Grid1D::new(1.0, 1).unwrap(),
        )
        .unwrap();
        let eig = spectrum(&m).unwrap();
        assert!((eig[0].re + 1.0).abs() < 1e-12 && (eig[1].re + 2.0).abs() < 1e-12);
    }

    #[test]
    fn imex_contracts_for_any_dt() {
        let spec = SystemSpec::diffusive(vec![1.0, 3.0], Boundary::Dirichlet)
            .with_coupling(vec![vec![-0.5, 0.2], vec![0.2, -0.1]])
            .unwrap();
        let m = Model::new(spec, Grid1D::new(PI, 20).unwrap()).unwrap();
        let g = m.generator();
        for dt in [1e-4, 0.1, 10.0, 1e4] {
            let a = (DMatrix::identity(40, 40) - &g * dt).try_inverse().unwrap();
            let rho = a.symmetric_eigen().eigenvalues.amax();
            assert!(rho <= 1.0 + 1e-12);
        }
    }
}
