//! Machine-readable run reports.
//!
//! Field order is fixed by declaration order; named maps keep insertion
//! order. Floating-point values are rounded to seven significant digits so
//! that identical runs produce identical bytes.

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::verdict::Verdict;

pub fn round(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.6e}").parse().unwrap_or(x)
    } else {
        x
    }
}

/// A map that serializes in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct Ordered<V>(pub Vec<(String, V)>);

impl<V> Default for Ordered<V> {
    fn default() -> Self {
        Ordered(Vec::new())
    }
}

impl<V> Ordered<V> {
    pub fn push(&mut self, key: impl Into<String>, value: V) {
        self.0.push((key.into(), value));
    }

    pub fn get(&self, key: &str) -> Option<&V> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<V: Serialize> Serialize for Ordered<V> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stat {
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictResidual {
    pub max: f64,
    pub mean: f64,
    pub decisive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictReport {
    pub name: String,
    pub outcome: bool,
    pub branch: String,
    pub bullet: Option<u8>,
    pub residuals: Ordered<VerdictResidual>,
    pub reported: Ordered<Vec<f64>>,
}

impl VerdictReport {
    pub fn from_verdict(name: &str, v: &Verdict) -> VerdictReport {
        let mut residuals = Ordered::default();
        for r in &v.residuals {
            residuals.push(
                r.name.clone(),
                VerdictResidual {
                    max: round(r.max),
                    mean: round(r.mean),
                    decisive: r.decisive,
                },
            );
        }
        let mut reported = Ordered::default();
        for r in &v.reported {
            reported.push(r.name.clone(), r.values.iter().map(|x| round(*x)).collect());
        }
        VerdictReport {
            name: name.to_string(),
            outcome: v.outcome,
            branch: v.branch.label().to_string(),
            bullet: v.branch.bullet(),
            residuals,
            reported,
        }
    }
}

/// A sampled component: mean value and largest magnitude over the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sampled {
    pub mean: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub spec: String,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub outcome: String,
    pub verdicts: Vec<VerdictReport>,
    pub residuals: Ordered<Stat>,
    /// Symbolic output, e.g. frame or boosted form components.
    pub expressions: Ordered<String>,
    /// Sampled output, e.g. connection coefficients or torsion components.
    pub sampled: Ordered<Sampled>,
}

impl Report {
    pub fn new(command: &str, spec: &str, samples: usize, seed: u64, tol: f64) -> Report {
        Report {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            spec: spec.to_string(),
            samples,
            seed,
            tol,
            outcome: "pass".into(),
            verdicts: Vec::new(),
            residuals: Ordered::default(),
            expressions: Ordered::default(),
            sampled: Ordered::default(),
        }
    }

    pub fn verdict(&mut self, name: &str, v: &Verdict) {
        self.verdicts.push(VerdictReport::from_verdict(name, v));
        self.refresh_outcome();
    }

    pub fn residual(&mut self, name: &str, max: f64, mean: f64) {
        self.residuals.push(name, Stat { max: round(max), mean: round(mean) });
    }

    pub fn sampled(&mut self, name: &str, mean: f64, max_abs: f64) {
        self.sampled.push(name, Sampled { mean: round(mean), max_abs: round(max_abs) });
    }

    fn refresh_outcome(&mut self) {
        let pass = self.verdicts.iter().all(|v| v.outcome);
        self.outcome = if pass { "pass" } else { "fail" }.into();
    }

    pub fn passed(&self) -> bool {
        self.outcome == "pass"
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text summary.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{} {}  ({} samples, seed {}, tol {:e})\n",
            self.command, self.spec, self.samples, self.seed, self.tol
        );
        for (k, v) in &self.expressions.0 {
            out += &format!("  {k} = {v}\n");
        }
        for (k, v) in &self.sampled.0 {
            out += &format!("  {k:<24} mean {:>13.6e}  max|.| {:>12.6e}\n", v.mean, v.max_abs);
        }
        for (k, v) in &self.residuals.0 {
            out += &format!("  residual {k:<22} max {:>12.6e}  mean {:>12.6e}\n", v.max, v.mean);
        }
        for v in &self.verdicts {
            let bullet = v.bullet.map(|b| format!(" (bullet {b})")).unwrap_or_default();
            out += &format!(
                "  {}: {}  branch {}{}\n",
                v.name,
                if v.outcome { "PASS" } else { "FAIL" },
                v.branch,
                bullet
            );
            for (k, r) in &v.residuals.0 {
                let tag = if r.decisive { "" } else { " (info)" };
                out += &format!("    {k:<26} max {:>12.6e}  mean {:>12.6e}{tag}\n", r.max, r.mean);
            }
            for (k, vals) in &v.reported.0 {
                let shown: Vec<String> = vals.iter().take(6).map(|x| format!("{x:.6}")).collect();
                let more = if vals.len() > 6 { ", ..." } else { "" };
                out += &format!("    {k} = [{}{more}]\n", shown.join(", "));
            }
        }
        out += &format!("  outcome: {}\n", self.outcome);
        out
    }
}
