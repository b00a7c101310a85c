//! Outcome of a characterization check.

use serde::Serialize;

use crate::tolerance::ResidualStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    TraceNonzero,
    TraceHorizontalOrZero,
    TorsionFree,
    None,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::TraceNonzero => "trace-nonzero",
            Branch::TraceHorizontalOrZero => "trace-horizontal-or-zero",
            Branch::TorsionFree => "torsion-free",
            Branch::None => "none",
        }
    }

    /// Bullet number in the characterization theorems, if any.
    pub fn bullet(self) -> Option<u8> {
        match self {
            Branch::TraceNonzero => Some(1),
            Branch::TraceHorizontalOrZero => Some(2),
            Branch::TorsionFree => Some(3),
            Branch::None => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedResidual {
    pub name: String,
    pub max: f64,
    pub mean: f64,
    /// Whether this residual decides the outcome or is reported for context.
    pub decisive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reported {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub outcome: bool,
    pub branch: Branch,
    pub residuals: Vec<NamedResidual>,
    pub reported: Vec<Reported>,
    pub tol: f64,
}

impl Verdict {
    pub fn new(branch: Branch, tol: f64) -> Verdict {
        Verdict {
            outcome: true,
            branch,
            residuals: Vec::new(),
            reported: Vec::new(),
            tol,
        }
    }

    /// Adds a decisive residual; the verdict fails if it is not below `tol`.
    pub fn require(&mut self, name: &str, stats: ResidualStats) -> &mut Verdict {
        // NaN never passes
        let passes = stats.max < self.tol;
        self.outcome &= passes;
        self.residuals.push(NamedResidual {
            name: name.to_string(),
            max: stats.max,
            mean: stats.mean,
            decisive: true,
        });
        self
    }

    pub fn inform(&mut self, name: &str, stats: ResidualStats) -> &mut Verdict {
        self.residuals.push(NamedResidual {
            name: name.to_string(),
            max: stats.max,
            mean: stats.mean,
            decisive: false,
        });
        self
    }

    pub fn report(&mut self, name: &str, values: Vec<f64>) -> &mut Verdict {
        self.reported.push(Reported {
            name: name.to_string(),
            values,
        });
        self
    }

    pub fn fail(&mut self) -> &mut Verdict {
        self.outcome = false;
        self
    }

    pub fn residual(&self, name: &str) -> Option<&NamedResidual> {
        self.residuals.iter().find(|r| r.name == name)
    }

    pub fn reported(&self, name: &str) -> Option<&[f64]> {
        self.reported.iter().find(|r| r.name == name).map(|r| r.values.as_slice())
    }
}
