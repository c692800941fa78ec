//! Machine-readable verdicts shared by every check.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::Result;
use crate::output::{fmt_f64, write_csv, write_json};

pub const MAX_WITNESSES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// No sample satisfied the premise of the implication.
    Vacuous,
}

/// A sample that produced the worst (or a failing) margin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    pub margin: f64,
    /// Flat state, `block_len` entries per species.
    pub state: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub input: Vec<f64>,
    pub block_len: usize,
}

/// One simple cycle of a gain digraph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    /// 1-based node labels in traversal order.
    pub nodes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expo: Option<f64>,
    pub holds: bool,
    /// Relative margin `(r − g(r))/r`, worst over the sampled range.
    pub margin: f64,
    /// For non-linear power cycles, the interval on which the cycle stays below the identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_interval: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub check: String,
    pub verdict: bool,
    pub status: Status,
    pub samples: usize,
    pub worst_margin: f64,
    pub tolerance: f64,
    #[serde(default)]
    pub parameters: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub witnesses: Vec<Witness>,
    #[serde(default)]
    pub witness_files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycles: Option<Vec<CycleRecord>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, Value>,
}

impl Certificate {
    pub fn new(check: impl Into<String>, tolerance: f64) -> Self {
        Certificate {
            check: check.into(),
            verdict: true,
            status: Status::Vacuous,
            samples: 0,
            worst_margin: f64::INFINITY,
            tolerance,
            parameters: BTreeMap::new(),
            witnesses: Vec::new(),
            witness_files: Vec::new(),
            cycles: None,
            details: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.parameters.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    /// Folds one sample margin in; `witness` is only built when it may be kept.
    pub fn record(&mut self, margin: f64, witness: impl FnOnce() -> Witness) {
        self.samples += 1;
        let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        self.worst_margin = self.worst_margin.min(margin);
        let failing = margin < -self.tolerance;
        let worst_kept = self.witnesses.iter().map(|w| w.margin).fold(f64::INFINITY, f64::min);
        if failing || margin <= worst_kept || self.witnesses.is_empty() {
            self.keep(Witness { margin, ..witness() });
        }
    }

    fn keep(&mut self, w: Witness) {
        self.witnesses.push(w);
        self.witnesses.sort_by(|a, b| a.margin.total_cmp(&b.margin));
        self.witnesses.truncate(MAX_WITNESSES);
    }

    pub fn push_witness(&mut self, w: Witness) {
        self.keep(w);
    }

    /// Sets verdict and status from the accumulated margins.
    pub fn finish(mut self) -> Self {
        if self.samples == 0 {
            self.verdict = true;
            self.status = Status::Vacuous;
            self.worst_margin = 0.0;
        } else {
            self.verdict = self.worst_margin >= -self.tolerance;
            self.status = if self.verdict { Status::Pass } else { Status::Fail };
            if self.verdict {
                // Only failing samples are interesting once the check passes.
                self.witnesses.retain(|w| w.margin < -self.tolerance);
            }
        }
        self
    }

    /// Overrides the verdict for checks that are decided by something other than a margin.
    pub fn decide(mut self, verdict: bool) -> Self {
        self.verdict = verdict;
        self.status = if verdict { Status::Pass } else { Status::Fail };
        self
    }

    /// Dumps witnesses as CSV (`part,block,i,value`) next to `dir/<stem>.json`
    /// and records their file names.
    pub fn write(&mut self, dir: &Path, stem: &str) -> Result<()> {
        self.witness_files.clear();
        for (k, w) in self.witnesses.iter().enumerate() {
            let name = format!("{stem}_witness_{k}.csv");
            let mut rows = Vec::new();
            for (part, data) in [("state", &w.state), ("input", &w.input)] {
                let bl = w.block_len.max(1);
                for (idx, v) in data.iter().enumerate() {
                    rows.push(vec![
                        part.to_string(),
                        (idx / bl).to_string(),
                        (idx % bl).to_string(),
                        fmt_f64(*v),
                    ]);
                }
            }
            write_csv(&dir.join(&name), "part,block,i,value", rows)?;
            self.witness_files.push(name);
        }
        write_json(&dir.join(format!("{stem}.json")), self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(label: &str) -> Witness {
        Witness { label: label.into(), margin: 0.0, state: vec![1.0, 2.0], input: vec![], block_len: 2 }
    }

    #[test]
    fn verdict_matches_margin() {
        let mut c = Certificate::new("demo", 0.1);
        c.record(0.5, || w("a"));
        c.record(-0.05, || w("b"));
        let c = c.finish();
        assert!(c.verdict);
        assert_eq!(c.status, Status::Pass);
        assert_eq!(c.worst_margin, -0.05);
        assert!(c.witnesses.is_empty());

        let mut c = Certificate::new("demo", 0.1);
        for k in 0..30 {
            c.record(-(k as f64), || w("x"));
        }
        let c = c.finish();
        assert!(!c.verdict);
        assert_eq!(c.witnesses.len(), MAX_WITNESSES);
        assert_eq!(c.witnesses[0].margin, -29.0);
    }

    #[test]
    fn empty_premise_is_vacuous() {
        let c = Certificate::new("demo", 0.0).finish();
        assert!(c.verdict);
        assert_eq!(c.status, Status::Vacuous);
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"status\":\"vacuous\""));
    }

    #[test]
    fn writes_witness_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Certificate::new("demo", 0.0);
        c.record(-1.0, || w("bad"));
        let mut c = c.finish();
        c.write(dir.path(), "demo").unwrap();
        assert_eq!(c.witness_files, vec!["demo_witness_0.csv".to_string()]);
        let text = std::fs::read_to_string(dir.path().join("demo_witness_0.csv")).unwrap();
        assert!(text.starts_with("part,block,i,value\nstate,0,0,"));
        assert!(dir.path().join("demo.json").exists());
    }
}
