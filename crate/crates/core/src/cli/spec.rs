//! TOML spec files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::carroll::{CarrollStructure, EhresmannForm, Role};
use crate::connection::{AffineConnection, Provenance};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{Basis, Chart, Frame, TensorField};
use crate::surface::{Covector, Sym2, SurfaceEmbedding};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub chart: ChartBlock,
    pub coframe: CoframeBlock,
    pub ehresmann: Option<EhresmannBlock>,
    pub connection: Option<BTreeMap<String, String>>,
    pub surface: Option<SurfaceBlock>,
    pub lemma26: Option<Lemma26Block>,
    pub killing: Option<KillingBlock>,
    #[serde(default)]
    pub run: RunBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartBlock {
    #[serde(default = "default_coords")]
    pub coords: [String; 3],
    pub domain: [[f64; 2]; 3],
}

fn default_coords() -> [String; 3] {
    ["u", "x", "y"].map(String::from)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoframeBlock {
    pub m11: String,
    pub m21: String,
    pub m22: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EhresmannBlock {
    pub w1: String,
    pub w2: String,
    #[serde(default = "default_role")]
    pub role: String,
}

fn default_role() -> String {
    "generic".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceBlock {
    pub h: String,
    pub c: f64,
    pub alpha_pullback: Option<[String; 2]>,
    pub theta: Option<[String; 2]>,
    /// Explicit B tensor for the curved-case check.
    pub b: Option<[[String; 2]; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma26Block {
    #[serde(rename = "N")]
    pub n: Option<[[String; 3]; 3]>,
    /// Builder used when neither N nor a connection is given: "scm" or "pcs".
    pub builder: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KillingBlock {
    pub xi: [String; 2],
    /// Fibre value of the slice; defaults to the middle of the u interval.
    pub u: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> usize {
    64
}

fn default_tol() -> f64 {
    1e-9
}

impl Default for RunBlock {
    fn default() -> Self {
        RunBlock {
            samples: default_samples(),
            tol: default_tol(),
            seed: 0,
        }
    }
}

fn field_error(field: &str, e: Error) -> Error {
    Error::Invalid(format!("{field}: {e}"))
}

impl std::str::FromStr for SpecFile {
    type Err = Error;

    fn from_str(text: &str) -> Result<SpecFile> {
        toml::from_str(text).map_err(|e| Error::Invalid(format!("spec file: {}", e.message())))
    }
}

impl SpecFile {
    pub fn load(path: &Path) -> Result<SpecFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
        text.parse::<SpecFile>().map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
    }

    pub fn chart(&self) -> Result<Chart> {
        let names = [
            self.chart.coords[0].as_str(),
            self.chart.coords[1].as_str(),
            self.chart.coords[2].as_str(),
        ];
        let d = self.chart.domain;
        Chart::new(names, [(d[0][0], d[0][1]), (d[1][0], d[1][1]), (d[2][0], d[2][1])])
            .map_err(|e| field_error("chart", e))
    }

    fn expr(&self, chart: &Chart, field: &str, text: &str) -> Result<Expr> {
        chart.parse(text).map_err(|e| field_error(field, e))
    }

    pub fn carroll(&self, chart: &Chart) -> Result<CarrollStructure> {
        let cf = &self.coframe;
        Ok(CarrollStructure::new(
            chart.clone(),
            self.expr(chart, "coframe.m11", &cf.m11)?,
            self.expr(chart, "coframe.m21", &cf.m21)?,
            self.expr(chart, "coframe.m22", &cf.m22)?,
        ))
    }

    pub fn ehresmann(&self, chart: &Chart) -> Result<EhresmannForm> {
        let e = self
            .ehresmann
            .as_ref()
            .ok_or_else(|| Error::Invalid("spec file has no [ehresmann] block".into()))?;
        let role = Role::from_name(&e.role).ok_or_else(|| {
            Error::Invalid(format!(
                "ehresmann.role: unknown role `{}` (expected generic, principal or potential-candidate)",
                e.role
            ))
        })?;
        Ok(EhresmannForm::new(
            self.expr(chart, "ehresmann.w1", &e.w1)?,
            self.expr(chart, "ehresmann.w2", &e.w2)?,
            role,
        ))
    }

    /// The user-supplied connection, if any; missing components are zero.
    pub fn connection(&self, chart: &Chart, frame: &Frame) -> Result<Option<AffineConnection>> {
        let Some(block) = &self.connection else {
            return Ok(None);
        };
        let names = chart.names();
        let mut gamma = TensorField::zeros(1, 2, Basis::Coordinate);
        for (key, text) in block {
            let parts: Vec<&str> = key.split('.').collect();
            let idx: Option<Vec<usize>> = match parts.as_slice() {
                ["Gamma", a, b, c] => [a, b, c]
                    .iter()
                    .map(|n| names.iter().position(|m| m == *n))
                    .collect(),
                _ => None,
            };
            let idx = idx.ok_or_else(|| {
                Error::Invalid(format!(
                    "connection: bad key `{key}` (expected Gamma.a.b.c with a, b, c in {names:?})"
                ))
            })?;
            gamma.set(&idx, self.expr(chart, &format!("connection.{key}"), text)?);
        }
        Ok(Some(AffineConnection::new(gamma, frame.clone(), Provenance::UserSupplied)?))
    }

    pub fn surface(&self, chart: &Chart) -> Result<(&SurfaceBlock, SurfaceEmbedding)> {
        let s = self
            .surface
            .as_ref()
            .ok_or_else(|| Error::Invalid("spec file has no [surface] block".into()))?;
        let h = self.expr(chart, "surface.h", &s.h)?;
        let emb = SurfaceEmbedding::new(h, s.c).map_err(|e| field_error("surface.h", e))?;
        Ok((s, emb))
    }

    pub fn covector(&self, chart: &Chart, field: &str, texts: &[String; 2]) -> Result<Covector> {
        Ok([
            self.expr(chart, &format!("{field}[0]"), &texts[0])?,
            self.expr(chart, &format!("{field}[1]"), &texts[1])?,
        ])
    }

    pub fn sym2(&self, chart: &Chart, field: &str, texts: &[[String; 2]; 2]) -> Result<Sym2> {
        let e = |i: usize, j: usize| self.expr(chart, &format!("{field}[{i}][{j}]"), &texts[i][j]);
        Ok([[e(0, 0)?, e(0, 1)?], [e(1, 0)?, e(1, 1)?]])
    }

    pub fn lemma26_n(&self, chart: &Chart) -> Result<Option<TensorField>> {
        let Some(texts) = self.lemma26.as_ref().and_then(|b| b.n.as_ref()) else {
            return Ok(None);
        };
        let mut n = TensorField::zeros(0, 2, Basis::Coordinate);
        for (i, row) in texts.iter().enumerate() {
            for (j, t) in row.iter().enumerate() {
                n.set(&[i, j], self.expr(chart, &format!("lemma26.N[{i}][{j}]"), t)?);
            }
        }
        Ok(Some(n))
    }
}

/// Splits on commas outside parentheses: `"cos(x),0"` → `["cos(x)", "0"]`.
pub fn split_top_level(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in text.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().trim_matches('"').to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    out.push(cur.trim().trim_matches('"').to_string());
    out
}
