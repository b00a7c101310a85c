//! Central tolerance policy and residual statistics.
//!
//! A residual at a point is `max |lhs - rhs|` over the compared components,
//! divided by `1 + max(|lhs|, |rhs|)` over the same components. Scalar fields
//! are classified as vanishing (max |f| below `vanish`), non-vanishing (min |f|
//! above `nonvanish`), or indeterminate otherwise.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Expr, Tape};
use crate::sample::Samples;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub pass: f64,
    pub vanish: f64,
    pub nonvanish: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            pass: 1e-9,
            vanish: 1e-9,
            nonvanish: 1e-6,
        }
    }
}

impl Tolerance {
    pub fn with_pass(pass: f64) -> Tolerance {
        Tolerance {
            pass,
            ..Tolerance::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualStats {
    pub max: f64,
    pub mean: f64,
}

impl ResidualStats {
    pub const ZERO: ResidualStats = ResidualStats { max: 0.0, mean: 0.0 };

    pub fn from_values(values: &[f64]) -> ResidualStats {
        if values.is_empty() {
            return ResidualStats::ZERO;
        }
        let max = values.iter().cloned().fold(0.0, f64::max);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        ResidualStats { max, mean }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max < tol
    }
}

/// Normalized residual at one point.
pub fn normalized(lhs: &[f64], rhs: &[f64]) -> f64 {
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (a, b) in lhs.iter().zip(rhs) {
        diff = diff.max((a - b).abs());
        scale = scale.max(a.abs()).max(b.abs());
    }
    diff / (1.0 + scale)
}

/// Per-point normalized residuals of `lhs == rhs` (componentwise).
pub fn residuals(lhs: &[Expr], rhs: &[Expr], samples: &Samples) -> Result<Vec<f64>> {
    if lhs.len() != rhs.len() {
        return Err(Error::Invalid(format!(
            "residual arity mismatch: {} vs {}",
            lhs.len(),
            rhs.len()
        )));
    }
    let tape = Tape::compile(lhs.iter().chain(rhs));
    let n = lhs.len();
    samples
        .points()
        .iter()
        .map(|p| {
            let v = tape.eval(p)?;
            Ok(normalized(&v[..n], &v[n..]))
        })
        .collect()
}

pub fn residual_stats(lhs: &[Expr], rhs: &[Expr], samples: &Samples) -> Result<ResidualStats> {
    Ok(ResidualStats::from_values(&residuals(lhs, rhs, samples)?))
}

/// Residual of `values == 0`.
pub fn vanishing_stats(values: &[Expr], samples: &Samples) -> Result<ResidualStats> {
    let zeros = vec![Expr::zero(); values.len()];
    residual_stats(values, &zeros, samples)
}

/// Values of each expression at each point (`out[point][expr]`).
pub fn evaluate_all(exprs: &[Expr], samples: &Samples) -> Result<Vec<Vec<f64>>> {
    let tape = Tape::compile(exprs);
    samples
        .points()
        .iter()
        .map(|p| tape.eval(p).map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Vanishing {
    Vanishing,
    NonVanishing,
    Indeterminate,
}

/// Classifies the largest component magnitude of a field over the grid.
pub fn classify_field(values: &[Expr], samples: &Samples, tol: &Tolerance) -> Result<Vanishing> {
    let rows = evaluate_all(values, samples)?;
    let mags: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
        .collect();
    Ok(classify_magnitudes(&mags, tol))
}

pub fn classify_magnitudes(mags: &[f64], tol: &Tolerance) -> Vanishing {
    let max = mags.iter().cloned().fold(0.0, f64::max);
    let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    if max < tol.vanish {
        Vanishing::Vanishing
    } else if min > tol.nonvanish {
        Vanishing::NonVanishing
    } else {
        Vanishing::Indeterminate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_scales_by_magnitude() {
        assert_eq!(normalized(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert!((normalized(&[0.0], &[1e-3]) - 1e-3 / (1.0 + 1e-3)).abs() < 1e-18);
        assert!((normalized(&[100.0], &[101.0]) - 1.0 / 102.0).abs() < 1e-15);
    }

    #[test]
    fn classification_bands() {
        let tol = Tolerance::default();
        assert_eq!(classify_magnitudes(&[0.0, 1e-12], &tol), Vanishing::Vanishing);
        assert_eq!(classify_magnitudes(&[1.0, 2e-6], &tol), Vanishing::NonVanishing);
        assert_eq!(classify_magnitudes(&[1.0, 1e-8], &tol), Vanishing::Indeterminate);
        assert_eq!(classify_magnitudes(&[1.0, 0.0], &tol), Vanishing::Indeterminate);
    }
}
