//! Runnable reproductions of the classical worked examples, each producing
//! certificates, CSV data and a one-line headline.

mod counterexample;
mod coupled;
mod neumann;
mod semilinear;

pub use counterexample::{closed_form, run_counterexample, CounterexampleParams};
pub use coupled::{
    coupled_linear_ratio, run_coupled_linear, run_coupled_nonlinear, CoupledLinearParams, CoupledNonlinearParams,
};
pub use neumann::{run_neumann_hurwitz, NeumannParams};
pub use semilinear::{run_semilinear_energy, SemilinearParams};

use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::certificate::Certificate;
use crate::error::Result;
use crate::lyapunov::LyapunovFn;
use crate::output::{write_csv, write_json};
use crate::pde::{Field, Model, Stepper};

pub const EXAMPLE_IDS: [&str; 5] =
    ["counterexample", "neumann-hurwitz", "semilinear-energy", "coupled-linear", "coupled-nonlinear"];

/// Settings shared by the simulated examples.
#[derive(Clone, Debug, Serialize)]
pub struct ExampleConfig {
    pub n_interior: usize,
    pub seed: u64,
    /// Samples per implication check.
    pub samples: usize,
    /// Simulated trajectories per decrease check.
    pub trajectories: usize,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
}

impl Default for ExampleConfig {
    fn default() -> Self {
        ExampleConfig { n_interior: 100, seed: 0, samples: 1000, trajectories: 20, t_end: None, dt: None }
    }
}

#[derive(Clone, Debug)]
pub struct DataTable {
    pub name: String,
    pub header: String,
    pub rows: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateRef {
    pub name: String,
    pub file: String,
    pub verdict: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExampleReport {
    pub example_id: String,
    pub parameters: BTreeMap<String, Value>,
    pub headline: String,
    /// Conjunction of the certificate verdicts.
    pub verdict: bool,
    pub certificates: Vec<CertificateRef>,
    pub data_paths: Vec<String>,
    pub details: BTreeMap<String, Value>,
    #[serde(skip)]
    pub certs: Vec<(String, Certificate)>,
    #[serde(skip)]
    pub tables: Vec<DataTable>,
}

impl ExampleReport {
    pub fn new(id: &str) -> Self {
        ExampleReport {
            example_id: id.to_string(),
            parameters: BTreeMap::new(),
            headline: String::new(),
            verdict: true,
            certificates: Vec::new(),
            data_paths: Vec::new(),
            details: BTreeMap::new(),
            certs: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.parameters.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn add_certificate(&mut self, name: &str, cert: Certificate) {
        self.verdict &= cert.verdict;
        self.certificates.push(CertificateRef { name: name.to_string(), file: format!("{name}.json"), verdict: cert.verdict });
        self.certs.push((name.to_string(), cert));
    }

    pub fn add_table(&mut self, name: &str, header: &str, rows: Vec<Vec<String>>) {
        let file = format!("{name}.csv");
        self.data_paths.push(file.clone());
        self.tables.push(DataTable { name: file, header: header.to_string(), rows });
    }

    pub fn certificate(&self, name: &str) -> Option<&Certificate> {
        self.certs.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    /// Writes `report.json`, certificates, witnesses and CSVs under `root/<id>/`.
    pub fn write(&mut self, root: &Path) -> Result<PathBuf> {
        let dir = root.join(&self.example_id);
        for (name, cert) in self.certs.iter_mut() {
            cert.write(&dir, name)?;
        }
        for t in &self.tables {
            write_csv(&dir.join(&t.name), &t.header, t.rows.iter().cloned())?;
        }
        let path = dir.join("report.json");
        write_json(&path, self)?;
        Ok(path)
    }

    /// Witness files of failing certificates, relative to the report directory.
    pub fn witness_files(&self) -> Vec<String> {
        self.certs.iter().filter(|(_, c)| !c.verdict).flat_map(|(_, c)| c.witness_files.clone()).collect()
    }
}

/// `V` at every step of an IMEX run with a constant input.
pub fn level_history(
    model: &Model,
    v: &LyapunovFn,
    x0: &Field,
    u: &[Vec<f64>],
    dt: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let stepper = Stepper::new(model, dt)?;
    let mut x = x0.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(v.value(model, &x)?);
    for _ in 0..steps {
        x = stepper.step(&x, u)?;
        out.push(v.value(model, &x)?);
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `t`.
pub(crate) fn log_slope(t: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, y)| **y > 0.0).map(|(t, y)| (*t, y.ln())).collect();
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pts.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let var: f64 = pts.iter().map(|(t, _)| (t - mt).powi(2)).sum();
    cov / var
}
