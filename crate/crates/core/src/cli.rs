//! Command-line front end: `isskit <command> [flags]`.
//!
//! Exit codes: 0 on a passing or completed run, 1 on a failing verdict, 2 on
//! usage or configuration errors.

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use crate::certificate::{Certificate, Witness};
use crate::error::{Error, Result};
use crate::examples::{
    run_counterexample, run_coupled_linear, run_coupled_nonlinear, run_neumann_hurwitz, run_semilinear_energy,
    CounterexampleParams, CoupledLinearParams, CoupledNonlinearParams, ExampleConfig, ExampleReport, NeumannParams,
    SemilinearParams, EXAMPLE_IDS,
};
use crate::gains::{omega_path_build, omega_path_verify, small_gain_check, GainMatrix};
use crate::kfun::KFun;
use crate::lyapunov::{
    build_composite_lf, build_linearization_lf, check_implication, estimate_iss_envelope, solve_lyapunov,
    EnvelopeSample, Implication, InputMode, LinearizationOptions, LyapunovFn, Measure, Method, Sampler,
};
use crate::output::{fmt_f64, write_csv, write_json};
use crate::pde::{
    default_dt, simulate, spectrum, write_norms_csv, write_trajectory_csv, ChannelSignal, Grid1D, InputSignal,
    Model, NormKind, ScalarMap, SimOptions, SystemSpec,
};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "ISSKIT_THREADS";

#[derive(Parser, Debug)]
#[command(name = "isskit", version, about = "Input-to-state stability certificates for reaction-diffusion systems")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed of every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Interior grid points (overrides the problem file).
    #[arg(long, global = true)]
    n_interior: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    t_end: Option<f64>,
    /// Certificate tolerance override.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a system from a random initial state.
    Simulate(SimulateArgs),
    /// Spectrum of the discretized linear part.
    Spectrum(SpecArgs),
    /// Cycle small-gain check of a gain matrix.
    SmallGain(GainsArgs),
    /// Build and verify an Ω-path.
    OmegaPath(OmegaArgs),
    /// Sample an ISS-Lyapunov implication.
    Certify(CertifyArgs),
    /// Quadratic Lyapunov function from the linear part, with local radius.
    Linearize(LinearizeArgs),
    /// Composite Lyapunov function of an interconnection.
    Composite(CompositeArgs),
    /// Run a worked example.
    Example(ExampleArgs),
    /// Fit an exponential ISS envelope to simulated trajectories.
    Envelope(EnvelopeArgs),
}

#[derive(Args, Debug)]
struct SpecArgs {
    /// Problem file: a system spec with optional `d`, `n_interior` and `input`.
    #[arg(long)]
    spec: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Sup-norm amplitude of the random initial state.
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
}

#[derive(Args, Debug)]
struct GainsArgs {
    #[arg(long)]
    gains: PathBuf,
}

#[derive(Args, Debug)]
struct OmegaArgs {
    #[command(flatten)]
    gains: GainsArgs,
    /// Path slopes, one per node (default all ones).
    #[arg(long, value_delimiter = ',')]
    a: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    samples: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LfChoice {
    Energy,
    NormPower,
    Quadratic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Satisfy,
    Violate,
    Free,
    Zero,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Analytic,
    FiniteDiff,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, value_enum, default_value = "energy")]
    lf: LfChoice,
    /// Species of an energy or norm-power function (1-based).
    #[arg(long, default_value_t = 1)]
    species: usize,
    /// Reaction `f` of the energy functional.
    #[arg(long, default_value = "cubic_odd")]
    reaction: String,
    /// Norm of a norm-power function (`l2` or `l4`).
    #[arg(long, default_value = "l2")]
    norm: String,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// State norm on the left of the premise.
    #[arg(long, default_value = "h10")]
    state_norm: String,
    /// Input norm on the right of the premise.
    #[arg(long, default_value = "l2")]
    input_norm: String,
    /// Gain `χ`: `power:C:P`, `linear:C` or K-function JSON.
    #[arg(long)]
    gain: String,
    /// Decay `α`, same syntax; omitted means `V̇ ≤ 0`.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, value_enum, default_value = "satisfy")]
    input_mode: ModeArg,
    #[arg(long, value_enum, default_value = "analytic")]
    method: MethodArg,
    #[arg(long, default_value_t = 1e-3)]
    amp_lo: f64,
    #[arg(long, default_value_t = 10.0)]
    amp_hi: f64,
}

#[derive(Args, Debug)]
struct LinearizeArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 10.0)]
    ceiling: f64,
    #[arg(long, default_value_t = 200)]
    samples_per_level: usize,
    #[arg(long, default_value_t = 40)]
    iterations: usize,
}

#[derive(Args, Debug)]
struct CompositeArgs {
    #[command(flatten)]
    gains: GainsArgs,
    #[command(flatten)]
    spec: SpecArgs,
    /// One `norm:q` per species, e.g. `l2:2,l4:4`.
    #[arg(long, value_delimiter = ',')]
    parts: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    a: Option<Vec<f64>>,
    #[arg(long, default_value_t = 20)]
    trajectories: usize,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
}

#[derive(Args, Debug)]
struct ExampleArgs {
    #[arg(long)]
    id: String,
    /// Counterexample input amplitude, or the semilinear gain factor.
    #[arg(long)]
    a: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    #[arg(long)]
    s_truncation: Option<f64>,
    /// Coupling matrix as JSON rows, e.g. `[[-1,0.5],[0,-2]]`.
    #[arg(long)]
    r: Option<String>,
    /// Diffusion coefficient(s).
    #[arg(long, value_delimiter = ',')]
    c: Option<Vec<f64>>,
    #[arg(long)]
    stable_expected: Option<bool>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    a12: Option<f64>,
    #[arg(long)]
    a21: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    trajectories: Option<usize>,
}

#[derive(Args, Debug)]
struct EnvelopeArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Gain guess `γ`, same syntax as `certify --gain`.
    #[arg(long, default_value = "linear:1")]
    gamma: String,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    levels: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,1")]
    inputs: Vec<f64>,
}

/// A system spec plus domain and grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(flatten)]
    pub system: SystemSpec,
    #[serde(default = "default_d")]
    pub d: f64,
    #[serde(default)]
    pub n_interior: Option<usize>,
    #[serde(default)]
    pub input: Option<InputSignal>,
}

fn default_d() -> f64 {
    PI
}

/// Settings echoed into every report.
#[derive(Clone, Debug, Serialize)]
struct RunConfig {
    command: String,
    seed: u64,
    output_dir: String,
    n_interior: Option<usize>,
    dt: Option<f64>,
    t_end: Option<f64>,
    tolerance: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RunReport {
    config: RunConfig,
    status: String,
    headline: String,
    outputs: Vec<String>,
    witness_files: Vec<String>,
    details: BTreeMap<String, Value>,
}

enum Failure {
    Usage(String),
    Verdict(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

struct Ctx {
    cfg: RunConfig,
    dir: PathBuf,
    outputs: Vec<String>,
    witnesses: Vec<String>,
    details: BTreeMap<String, Value>,
}

impl Ctx {
    fn detail(&mut self, k: &str, v: impl Serialize) {
        self.details.insert(k.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    fn write_cert(&mut self, stem: &str, cert: &mut Certificate) -> Result<()> {
        cert.write(&self.dir, stem)?;
        self.outputs.push(format!("{stem}.json"));
        if !cert.verdict {
            self.witnesses.extend(cert.witness_files.iter().cloned());
        }
        Ok(())
    }

    /// Writes `report.json` and maps the verdict to an exit status.
    fn finish(mut self, pass: bool, headline: String) -> CliResult<String> {
        if !pass && self.witnesses.is_empty() {
            let mut c = Certificate::new("failure", 0.0).decide(false);
            c.push_witness(Witness { label: headline.clone(), margin: -1.0, state: vec![], input: vec![], block_len: 1 });
            self.write_cert("failure", &mut c)?;
            self.witnesses.extend(c.witness_files.iter().cloned());
        }
        let report = RunReport {
            config: self.cfg.clone(),
            status: if pass { "pass".into() } else { "fail".into() },
            headline: headline.clone(),
            outputs: self.outputs.clone(),
            witness_files: self.witnesses.clone(),
            details: self.details.clone(),
        };
        write_json(&self.dir.join("report.json"), &report)?;
        if pass {
            Ok(headline)
        } else {
            Err(Failure::Verdict(headline))
        }
    }

    /// Records a refusal that counts as a failing verdict.
    fn refuse(mut self, check: &str, e: &Error) -> CliResult<String> {
        let mut c = Certificate::new(check, 0.0).decide(false);
        c.detail("reason", e.to_string());
        let value = match e {
            Error::NotHurwitz(v) | Error::NoPositiveRadius(v) => *v,
            _ => f64::NAN,
        };
        c.push_witness(Witness { label: e.to_string(), margin: -1.0, state: vec![value], input: vec![], block_len: 1 });
        self.write_cert(check, &mut c)?;
        self.finish(false, e.to_string())
    }
}

fn is_verdict_error(e: &Error) -> bool {
    matches!(
        e,
        Error::NotHurwitz(_) | Error::NoPositiveRadius(_) | Error::SmallGainViolated | Error::NoFeasibleEnvelope(_)
    )
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// `power:C:P`, `linear:C`, or K-function JSON (inline or a file path).
pub fn parse_kfun(text: &str) -> Result<KFun> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad number `{s}`")));
    match parts.as_slice() {
        ["power", c, p] => KFun::power(num(c)?, num(p)?),
        ["linear", c] => KFun::linear(num(c)?),
        ["identity"] => Ok(KFun::identity()),
        _ if text.trim_start().starts_with('{') => Ok(serde_json::from_str(text)?),
        _ => read_json(Path::new(text)),
    }
}

fn load_model(path: &Path, cli: &Cli) -> Result<(Model, Option<InputSignal>)> {
    let p: ProblemFile = read_json(path)?;
    let n = cli.n_interior.or(p.n_interior).unwrap_or(100);
    Ok((Model::new(p.system, Grid1D::new(p.d, n)?)?, p.input))
}

fn sim_opts(model: &Model, cli: &Cli, t_default: f64) -> SimOptions {
    let t_end = cli.t_end.unwrap_or(t_default);
    let dt = cli.dt.unwrap_or_else(|| default_dt(model));
    SimOptions { dt: Some(dt), ..SimOptions::new(t_end) }.stride(((t_end / dt) / 500.0).max(1.0) as usize)
}

fn total_l2(model: &Model, s: &crate::pde::Field) -> f64 {
    (0..model.species()).map(|i| model.norm(s, NormKind::L2, i).powi(2)).sum::<f64>().sqrt()
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs, mut ctx: Ctx) -> CliResult<String> {
    let (model, input) = load_model(&a.spec.spec, cli)?;
    let input = input.unwrap_or_default();
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let x0 = Sampler::default().with_state_amp(a.amplitude, a.amplitude).random_state(&model, &mut rng);
    let traj = simulate(&model, &x0, &input, &sim_opts(&model, cli, 1.0))?;
    write_trajectory_csv(&model, &traj, &ctx.dir.join("trajectory.csv"))?;
    write_norms_csv(&model, &traj, &ctx.dir.join("norms.csv"))?;
    ctx.outputs.extend(["trajectory.csv".to_string(), "norms.csv".to_string()]);
    ctx.detail("dt", traj.dt);
    ctx.detail("blowup", traj.blowup);
    ctx.detail("final_l2", total_l2(&model, traj.last()));
    let head = match traj.blowup {
        Some(t) => format!("simulation halted: blow-up at t = {t}"),
        None => format!("simulated to t = {}", traj.times.last().copied().unwrap_or(0.0)),
    };
    ctx.finish(true, head)
}

fn cmd_spectrum(cli: &Cli, a: &SpecArgs, mut ctx: Ctx) -> CliResult<String> {
    let (model, _) = load_model(&a.spec, cli)?;
    let lin = Model::new(model.spec.linear_part(), model.grid.clone())?;
    let eig = spectrum(&lin)?;
    write_csv(&ctx.dir.join("spectrum.csv"), "re,im", eig.iter().map(|z| vec![fmt_f64(z.re), fmt_f64(z.im)]))?;
    ctx.outputs.push("spectrum.csv".into());
    let top = eig.first().map_or(f64::NEG_INFINITY, |z| z.re);
    ctx.detail("spectral_abscissa", top);
    ctx.detail("hurwitz", top < 0.0);
    ctx.finish(true, format!("spectral abscissa {top:.6e} ({})", if top < 0.0 { "Hurwitz" } else { "not Hurwitz" }))
}

fn cmd_small_gain(a: &GainsArgs, mut ctx: Ctx) -> CliResult<String> {
    let g: GainMatrix = read_json(&a.gains)?;
    let mut cert = small_gain_check(&g)?;
    ctx.write_cert("small_gain", &mut cert)?;
    let head = if cert.verdict { "small-gain holds" } else { "small-gain violated" };
    ctx.finish(cert.verdict, head.into())
}

fn cmd_omega(a: &OmegaArgs, mut ctx: Ctx) -> CliResult<String> {
    let g: GainMatrix = read_json(&a.gains.gains)?;
    let slopes = a.a.clone().unwrap_or_else(|| vec![1.0; g.n()]);
    match omega_path_build(&g, &slopes) {
        Ok(mut path) => {
            let mut cert = omega_path_verify(&g, &mut path, a.samples)?;
            write_json(&ctx.dir.join("omega_path.json"), &path)?;
            ctx.outputs.push("omega_path.json".into());
            ctx.write_cert("omega_path_check", &mut cert)?;
            let head = if cert.verdict { "Ω-path verified" } else { "Ω-path check failed" };
            ctx.finish(cert.verdict, head.into())
        }
        Err(Error::SmallGainViolated) => {
            let mut cert = small_gain_check(&g)?;
            ctx.write_cert("small_gain", &mut cert)?;
            ctx.finish(false, "no Ω-path: small-gain violated".into())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_certify(cli: &Cli, a: &CertifyArgs, mut ctx: Ctx) -> CliResult<String> {
    let (model, _) = load_model(&a.spec.spec, cli)?;
    let species = a.species.checked_sub(1).filter(|s| *s < model.species()).ok_or_else(|| {
        Failure::Usage(format!("species must be in 1..={}", model.species()))
    })?;
    let v = match a.lf {
        LfChoice::Energy => LyapunovFn::energy(species, ScalarMap::from_id(&a.reaction, None)?),
        LfChoice::NormPower => LyapunovFn::norm_power(species, a.norm.parse()?, a.q, 1.0)?,
        LfChoice::Quadratic => {
            let lin = Model::new(model.spec.linear_part(), model.grid.clone())?;
            let p = match solve_lyapunov(&lin.generator()) {
                Ok(p) => p,
                Err(e) if is_verdict_error(&e) => return ctx.refuse("quadratic", &e),
                Err(e) => return Err(e.into()),
            };
            LyapunovFn::quadratic(p, model.weights()[0])?
        }
    };
    let mut imp = Implication::new(
        "certify",
        v,
        Measure::state(a.state_norm.parse()?),
        Measure::input(a.input_norm.parse()?),
        parse_kfun(&a.gain)?,
    )
    .method(match a.method {
        MethodArg::Analytic => Method::Analytic,
        MethodArg::FiniteDiff => Method::FiniteDiff,
    });
    if let Some(al) = &a.alpha {
        imp = imp.alpha(parse_kfun(al)?);
    }
    let default_tol = if imp.alpha.is_some() { 0.1 } else { 0.0 };
    imp = imp.tolerance(cli.tolerance.unwrap_or(default_tol));
    let mode = match a.input_mode {
        ModeArg::Satisfy => InputMode::Satisfy,
        ModeArg::Violate => InputMode::Violate,
        ModeArg::Free => InputMode::Free,
        ModeArg::Zero => InputMode::Zero,
    };
    let sampler =
        Sampler::default().with_state_amp(a.amp_lo, a.amp_hi).with_input_mode(mode).with_seed(cli.seed);
    let mut cert = check_implication(&model, &imp, &sampler, a.samples)?;
    ctx.write_cert("implication", &mut cert)?;
    let head = format!("implication {:?}: {} applicable samples", cert.status, cert.samples).to_lowercase();
    ctx.finish(cert.verdict, head)
}

fn cmd_linearize(cli: &Cli, a: &LinearizeArgs, mut ctx: Ctx) -> CliResult<String> {
    let (model, _) = load_model(&a.spec.spec, cli)?;
    let opts = LinearizationOptions {
        ceiling: a.ceiling,
        samples_per_level: a.samples_per_level,
        iterations: a.iterations,
        seed: cli.seed,
        ..Default::default()
    };
    match build_linearization_lf(&model, &opts) {
        Ok(mut lin) => {
            ctx.write_cert("linearization", &mut lin.certificate)?;
            ctx.detail("rho", lin.rho);
            ctx.detail("residual", lin.residual);
            ctx.finish(true, format!("local ISS-Lyapunov function certified on sup-norm radius {:.6e}", lin.rho))
        }
        Err(e) if is_verdict_error(&e) => ctx.refuse("linearization", &e),
        Err(e) => Err(e.into()),
    }
}

fn cmd_composite(cli: &Cli, a: &CompositeArgs, mut ctx: Ctx) -> CliResult<String> {
    let g: GainMatrix = read_json(&a.gains.gains)?;
    let (model, _) = load_model(&a.spec.spec, cli)?;
    if a.parts.len() != g.n() || g.n() != model.species() {
        return Err(Failure::Usage(format!(
            "need one part per species: {} parts, {} gain nodes, {} species",
            a.parts.len(),
            g.n(),
            model.species()
        )));
    }
    let parts = a
        .parts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (n, q) = p.split_once(':').ok_or_else(|| Error::InvalidParameter(format!("bad part `{p}`")))?;
            let q = q.parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad exponent in `{p}`")))?;
            LyapunovFn::norm_power(i, n.parse()?, q, 1.0)
        })
        .collect::<Result<Vec<_>>>()?;
    let slopes = a.a.clone().unwrap_or_else(|| vec![1.0; g.n()]);
    let mut path = match omega_path_build(&g, &slopes) {
        Ok(p) => p,
        Err(Error::SmallGainViolated) => {
            let mut cert = small_gain_check(&g)?;
            ctx.write_cert("small_gain", &mut cert)?;
            return ctx.finish(false, "no composite function: small-gain violated".into());
        }
        Err(e) => return Err(e.into()),
    };
    let mut pc = omega_path_verify(&g, &mut path, 100)?;
    ctx.write_cert("omega_path_check", &mut pc)?;
    if !pc.verdict {
        return ctx.finish(false, "Ω-path check failed".into());
    }
    let v = build_composite_lf(parts, &g, &path)?;
    let opts = sim_opts(&model, cli, 10.0);
    let dt = opts.dt.unwrap_or_else(|| default_dt(&model));
    let steps = (opts.t_end / dt).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let sampler = Sampler::default().with_state_amp(0.1 * a.amplitude, a.amplitude);
    let starts: Vec<_> = (0..a.trajectories).map(|_| sampler.random_state(&model, &mut rng)).collect();
    let u = vec![vec![0.0; model.n()]; model.spec.channels()];
    let tol = cli.tolerance.unwrap_or(1e-6);
    let levels: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|x| crate::examples::level_history(&model, &v, x, &u, dt, steps))
        .collect::<Result<_>>()?;
    let mut cert = Certificate::new("composite_decrease", 0.0).param("step_increase_tol", tol);
    for (k, l) in levels.iter().enumerate() {
        let worst = l.windows(2).map(|w| w[0] - w[1] + tol).fold(f64::INFINITY, f64::min);
        cert.record(worst, || Witness {
            label: format!("trajectory {k}"),
            margin: worst,
            state: starts[k].values().to_vec(),
            input: vec![],
            block_len: starts[k].n_points(),
        });
    }
    let mut cert = cert.finish();
    ctx.write_cert("composite_decrease", &mut cert)?;
    let head = if cert.verdict { "composite Lyapunov function nonincreasing" } else { "composite decrease violated" };
    ctx.finish(cert.verdict, head.into())
}

fn cmd_example(cli: &Cli, a: &ExampleArgs, ctx: Ctx) -> CliResult<String> {
    let cfg = ExampleConfig {
        n_interior: cli.n_interior.unwrap_or(100),
        seed: cli.seed,
        samples: a.samples.unwrap_or(1000),
        trajectories: a.trajectories.unwrap_or(20),
        t_end: cli.t_end,
        dt: cli.dt,
    };
    let mut rep: ExampleReport = match a.id.as_str() {
        "counterexample" => {
            let mut p = CounterexampleParams::default();
            if let Some(v) = a.a {
                p.a = v;
            }
            if let Some(t) = &a.t_grid {
                p.t_grid = t.clone();
            }
            if let Some(s) = a.s_truncation {
                p.s_truncation = s;
            }
            run_counterexample(&p)?
        }
        "neumann-hurwitz" => {
            let r: Vec<Vec<f64>> = match &a.r {
                Some(t) => serde_json::from_str(t).map_err(Error::from)?,
                None => vec![vec![-1.0, 0.5], vec![0.0, -2.0]],
            };
            let mut p = NeumannParams::new(r.clone(), 1.0);
            if let Some(c) = &a.c {
                p.diffusion = if c.len() == 1 { vec![c[0]; r.len()] } else { c.clone() };
            }
            if let Some(d) = a.d {
                p.d = d;
            }
            p.stable_expected = a.stable_expected;
            run_neumann_hurwitz(&p, &cfg)?
        }
        "semilinear-energy" => {
            let mut p = SemilinearParams::default();
            if let Some(v) = a.a {
                p.a = v;
            }
            if let Some(m) = a.m {
                p.m = m;
            }
            if let Some(f) = &a.f {
                p.f_id = f.clone();
            }
            if let Some(t) = cli.tolerance {
                p.tolerance = t;
            }
            run_semilinear_energy(&p, &cfg)?
        }
        "coupled-linear" => {
            let d = CoupledLinearParams::default();
            let p = CoupledLinearParams {
                c1: a.c1.unwrap_or(d.c1),
                c2: a.c2.unwrap_or(d.c2),
                d: a.d.unwrap_or(d.d),
                a12: a.a12.unwrap_or(d.a12),
                a21: a.a21.unwrap_or(d.a21),
                eps: a.eps,
                tolerance: cli.tolerance.unwrap_or(d.tolerance),
            };
            run_coupled_linear(&p, &cfg)?
        }
        "coupled-nonlinear" => {
            let d = CoupledNonlinearParams::default();
            let p = CoupledNonlinearParams {
                c1: a.c1.unwrap_or(d.c1),
                c2: a.c2.unwrap_or(d.c2),
                d: a.d.unwrap_or(d.d),
                b: a.b.unwrap_or(d.b),
                eps1: a.eps1.unwrap_or(d.eps1),
                eps2: a.eps2.unwrap_or(d.eps2),
                tolerance: cli.tolerance.unwrap_or(d.tolerance),
            };
            run_coupled_nonlinear(&p, &cfg)?
        }
        other => {
            return Err(Failure::Usage(format!("unknown example `{other}`; expected one of {}", EXAMPLE_IDS.join(", "))))
        }
    };
    let root = ctx.dir.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    rep.write(&root)?;
    if rep.verdict {
        Ok(rep.headline.clone())
    } else {
        Err(Failure::Verdict(format!("{} (witnesses: {})", rep.headline, rep.witness_files().join(", "))))
    }
}

fn cmd_envelope(cli: &Cli, a: &EnvelopeArgs, mut ctx: Ctx) -> CliResult<String> {
    let (model, _) = load_model(&a.spec.spec, cli)?;
    let gamma = parse_kfun(&a.gamma)?;
    let opts = sim_opts(&model, cli, 10.0);
    let channels = model.spec.channels();
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let mut runs = Vec::new();
    for &lvl in &a.levels {
        for &inp in &a.inputs {
            let x = Sampler::default().with_state_amp(lvl, lvl).random_state(&model, &mut rng);
            runs.push((x, inp));
        }
    }
    let ensemble: Vec<EnvelopeSample> = runs
        .par_iter()
        .map(|(x, inp)| -> Result<EnvelopeSample> {
            let u = InputSignal::new(vec![ChannelSignal::Constant { value: *inp }; channels]);
            let tr = simulate(&model, x, &u, &opts)?;
            let umag = u.magnitude(&model, NormKind::L2, &[0.0])?;
            let norms = tr.states.iter().map(|s| total_l2(&model, s)).chain(tr.blowup.map(|_| f64::INFINITY)).collect();
            let mut times = tr.times.clone();
            if let Some(t) = tr.blowup {
                times.push(t);
            }
            Ok(EnvelopeSample { r0: total_l2(&model, x), input_mag: umag, times, norms })
        })
        .collect::<Result<_>>()?;
    match estimate_iss_envelope(&ensemble, &gamma) {
        Ok(mut fit) => {
            ctx.write_cert("iss_envelope", &mut fit.certificate)?;
            ctx.detail("m", fit.m);
            ctx.detail("a", fit.a);
            ctx.finish(fit.certificate.verdict, format!("β(r, t) = {:.4} e^(−{:.4} t) r", fit.m, fit.a))
        }
        Err(e) if is_verdict_error(&e) => ctx.refuse("iss_envelope", &e),
        Err(e) => Err(e.into()),
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|n| *n > 0) {
        // A pool may already exist when called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Spectrum(_) => "spectrum",
        Command::SmallGain(_) => "small-gain",
        Command::OmegaPath(_) => "omega-path",
        Command::Certify(_) => "certify",
        Command::Linearize(_) => "linearize",
        Command::Composite(_) => "composite",
        Command::Example(_) => "example",
        Command::Envelope(_) => "envelope",
    }
}

fn dispatch(cli: &Cli) -> CliResult<String> {
    let name = command_name(&cli.command);
    let sub = match &cli.command {
        Command::Example(a) => a.id.clone(),
        _ => name.to_string(),
    };
    let ctx = Ctx {
        cfg: RunConfig {
            command: name.into(),
            seed: cli.seed,
            output_dir: cli.out.display().to_string(),
            n_interior: cli.n_interior,
            dt: cli.dt,
            t_end: cli.t_end,
            tolerance: cli.tolerance,
        },
        dir: cli.out.join(sub),
        outputs: Vec::new(),
        witnesses: Vec::new(),
        details: BTreeMap::new(),
    };
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(cli, a, ctx),
        Command::Spectrum(a) => cmd_spectrum(cli, a, ctx),
        Command::SmallGain(a) => cmd_small_gain(a, ctx),
        Command::OmegaPath(a) => cmd_omega(a, ctx),
        Command::Certify(a) => cmd_certify(cli, a, ctx),
        Command::Linearize(a) => cmd_linearize(cli, a, ctx),
        Command::Composite(a) => cmd_composite(cli, a, ctx),
        Command::Example(a) => cmd_example(cli, a, ctx),
        Command::Envelope(a) => cmd_envelope(cli, a, ctx),
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match dispatch(&cli) {
        Ok(head) => {
            println!("{head}");
            0
        }
        Err(Failure::Verdict(head)) => {
            println!("FAIL: {head}");
            1
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}
