//! Charts, tensor fields with expression components, adapted frames and
//! basis changes.
//!
//! Coordinates are `(u, x, y)` with `ℓ = ∂_u`. Frame indices are
//! `A ∈ {0, 1, 2}` in code for `e₁ = ℓ, e₂, e₃`; spatial frame indices are
//! 1 and 2.

use std::fmt;

use crate::carroll::{CarrollStructure, EhresmannForm};
use crate::error::{Error, Result};
use crate::expr::{DiffCache, Expr};
use crate::sample::Samples;
use crate::tolerance::{self, ResidualStats};

pub const DIM: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    names: [String; 3],
    domain: [(f64, f64); 3],
}

impl Chart {
    pub fn new(names: [&str; 3], domain: [(f64, f64); 3]) -> Result<Chart> {
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || names[..i].contains(n) {
                return Err(Error::Invalid(format!("bad coordinate name `{n}`")));
            }
        }
        for (n, (lo, hi)) in names.iter().zip(domain) {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::Invalid(format!(
                    "domain of `{n}` must be a non-empty interval, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Chart {
            names: names.map(String::from),
            domain,
        })
    }

    /// `(u, x, y)` over the given box.
    pub fn standard(domain: [(f64, f64); 3]) -> Result<Chart> {
        Chart::new(["u", "x", "y"], domain)
    }

    pub fn names(&self) -> [&str; 3] {
        [&self.names[0], &self.names[1], &self.names[2]]
    }

    pub fn domain(&self) -> &[(f64, f64); 3] {
        &self.domain
    }

    /// Midpoint of the fibre interval.
    pub fn fibre_midpoint(&self) -> f64 {
        0.5 * (self.domain[0].0 + self.domain[0].1)
    }

    pub fn samples(&self, n: usize, seed: u64) -> Samples {
        Samples::stratified(&self.domain, n, seed)
    }

    pub fn parse(&self, text: &str) -> Result<Expr> {
        Ok(crate::expr::parse(text, &self.names())?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Coordinate,
    Frame,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Coordinate => "coordinate",
            Basis::Frame => "frame",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Symmetric(usize, usize),
    Antisymmetric(usize, usize),
}

/// A tensor field with `contra` upper and `cov` lower indices. Components are
/// stored row-major with the upper indices first.
#[derive(Debug, Clone)]
pub struct TensorField {
    contra: usize,
    cov: usize,
    basis: Basis,
    comps: Vec<Expr>,
    symmetries: Vec<Symmetry>,
}

impl TensorField {
    pub fn new(contra: usize, cov: usize, basis: Basis, comps: Vec<Expr>) -> Result<TensorField> {
        let want = DIM.pow((contra + cov) as u32);
        if comps.len() != want {
            return Err(Error::Invalid(format!(
                "valence ({contra},{cov}) needs {want} components, got {}",
                comps.len()
            )));
        }
        Ok(TensorField {
            contra,
            cov,
            basis,
            comps,
            symmetries: Vec::new(),
        })
    }

    pub fn zeros(contra: usize, cov: usize, basis: Basis) -> TensorField {
        let n = DIM.pow((contra + cov) as u32);
        TensorField {
            contra,
            cov,
            basis,
            comps: vec![Expr::zero(); n],
            symmetries: Vec::new(),
        }
    }

    /// Builds a field from a function of the multi-index.
    pub fn from_fn(
        contra: usize,
        cov: usize,
        basis: Basis,
        mut f: impl FnMut(&[usize]) -> Expr,
    ) -> TensorField {
        let rank = contra + cov;
        let comps = (0..DIM.pow(rank as u32))
            .map(|flat| f(&unflatten(flat, rank)))
            .collect();
        TensorField {
            contra,
            cov,
            basis,
            comps,
            symmetries: Vec::new(),
        }
    }

    pub fn with_symmetry(mut self, s: Symmetry) -> TensorField {
        self.symmetries.push(s);
        self
    }

    pub fn contra(&self) -> usize {
        self.contra
    }

    pub fn cov(&self) -> usize {
        self.cov
    }

    pub fn rank(&self) -> usize {
        self.contra + self.cov
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn symmetries(&self) -> &[Symmetry] {
        &self.symmetries
    }

    pub fn components(&self) -> &[Expr] {
        &self.comps
    }

    pub fn get(&self, idx: &[usize]) -> &Expr {
        &self.comps[flatten(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: Expr) {
        let k = flatten(idx);
        self.comps[k] = value;
    }

    pub fn map(&self, f: impl FnMut(&Expr) -> Expr) -> TensorField {
        TensorField {
            comps: self.comps.iter().map(f).collect(),
            symmetries: Vec::new(),
            ..self.clone()
        }
    }

    fn same_shape(&self, other: &TensorField) -> Result<()> {
        if self.contra != other.contra || self.cov != other.cov {
            return Err(Error::Invalid(format!(
                "valence mismatch: ({},{}) vs ({},{})",
                self.contra, self.cov, other.contra, other.cov
            )));
        }
        if self.basis != other.basis {
            return Err(Error::BasisMismatch(format!(
                "{} field combined with {} field",
                self.basis, other.basis
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &TensorField) -> Result<TensorField> {
        self.same_shape(other)?;
        let comps = self.comps.iter().zip(&other.comps).map(|(a, b)| a + b);
        TensorField::new(self.contra, self.cov, self.basis, comps.collect())
    }

    pub fn sub(&self, other: &TensorField) -> Result<TensorField> {
        self.same_shape(other)?;
        let comps = self.comps.iter().zip(&other.comps).map(|(a, b)| a - b);
        TensorField::new(self.contra, self.cov, self.basis, comps.collect())
    }

    pub fn scale(&self, s: &Expr) -> TensorField {
        self.map(|c| s * c)
    }

    /// Per-point normalized residual of `self == other`.
    pub fn residual(&self, other: &TensorField, samples: &Samples) -> Result<ResidualStats> {
        self.same_shape(other)?;
        tolerance::residual_stats(&self.comps, &other.comps, samples)
    }

    pub fn norm_residual(&self, samples: &Samples) -> Result<ResidualStats> {
        tolerance::vanishing_stats(&self.comps, samples)
    }

    /// Worst residual over the declared symmetry flags.
    pub fn symmetry_residual(&self, samples: &Samples) -> Result<ResidualStats> {
        let mut worst = ResidualStats::ZERO;
        for s in &self.symmetries {
            let (i, j, sign) = match *s {
                Symmetry::Symmetric(i, j) => (i, j, 1.0),
                Symmetry::Antisymmetric(i, j) => (i, j, -1.0),
            };
            let swapped = self.swap_slots(i, j).scale(&Expr::constant(sign));
            let r = tolerance::residual_stats(&self.comps, &swapped.comps, samples)?;
            if r.max > worst.max {
                worst = r;
            }
        }
        Ok(worst)
    }

    /// The field with slots `i` and `j` exchanged.
    pub fn swap_slots(&self, i: usize, j: usize) -> TensorField {
        let rank = self.rank();
        let comps = (0..self.comps.len())
            .map(|flat| {
                let mut idx = unflatten(flat, rank);
                idx.swap(i, j);
                self.comps[flatten(&idx)].clone()
            })
            .collect();
        TensorField {
            comps,
            symmetries: self.symmetries.clone(),
            ..self.clone()
        }
    }

    /// Applies `new[k] = Σ_j m[k][j] old[j]` on one slot.
    fn transform_slot(&self, slot: usize, m: &[[Expr; 3]; 3]) -> Vec<Expr> {
        let rank = self.rank();
        (0..self.comps.len())
            .map(|flat| {
                let mut idx = unflatten(flat, rank);
                let k = idx[slot];
                Expr::sum((0..DIM).map(|j| {
                    idx[slot] = j;
                    &m[k][j] * &self.comps[flatten(&idx)]
                }))
            })
            .collect()
    }
}

pub(crate) fn flatten(idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * DIM + i)
}

pub(crate) fn unflatten(mut flat: usize, rank: usize) -> Vec<usize> {
    let mut idx = vec![0; rank];
    for slot in (0..rank).rev() {
        idx[slot] = flat % DIM;
        flat /= DIM;
    }
    idx
}

/// Iterates all multi-indices of the given rank.
pub fn indices(rank: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..DIM.pow(rank as u32)).map(move |k| unflatten(k, rank))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToFrame,
    ToCoordinate,
}

/// The adapted frame `(e₁ = ℓ, e₂, e₃)` dual to `(ω, m¹, m²)`.
#[derive(Debug, Clone)]
pub struct Frame {
    /// `theta[A][a]` is `θ^A_a`.
    theta: [[Expr; 3]; 3],
    /// `e[A][a]` is `e_A^a`.
    e: [[Expr; 3]; 3],
    /// `c_hat[C][A][B]` is `Ĉ^C_{AB}`.
    c_hat: [[[Expr; 3]; 3]; 3],
}

impl Frame {
    /// Builds the frame from its closed form and checks that the coframe is
    /// non-degenerate at every sample point.
    pub fn build(c: &CarrollStructure, ehr: &EhresmannForm, samples: &Samples) -> Result<Frame> {
        c.check_signature(samples)?;
        let [m11, m21, m22] = c.coframe().clone();
        let [w1, w2] = ehr.spatial().clone();
        let z = Expr::zero;
        let theta = [
            [Expr::one(), w1.clone(), w2.clone()],
            [z(), m11.clone(), z()],
            [z(), m21.clone(), m22.clone()],
        ];
        let det = &m11 * &m22;
        let e = [
            [Expr::one(), z(), z()],
            [
                (&w2 * &m21 - &w1 * &m22) / &det,
                1.0 / &m11,
                -(&m21 / &det),
            ],
            [-(&w2 / &m22), z(), 1.0 / &m22],
        ];
        let c_hat = structure_functions(&theta, &e);
        Ok(Frame { theta, e, c_hat })
    }

    /// A frame from explicit component arrays; used for coordinate frames and
    /// tests. Structure functions are computed symbolically.
    pub fn from_components(theta: [[Expr; 3]; 3], e: [[Expr; 3]; 3]) -> Frame {
        let c_hat = structure_functions(&theta, &e);
        Frame { theta, e, c_hat }
    }

    pub fn coordinate() -> Frame {
        let id = || {
            std::array::from_fn(|i| {
                std::array::from_fn(|j| if i == j { Expr::one() } else { Expr::zero() })
            })
        };
        Frame::from_components(id(), id())
    }

    pub fn theta(&self) -> &[[Expr; 3]; 3] {
        &self.theta
    }

    pub fn e(&self) -> &[[Expr; 3]; 3] {
        &self.e
    }

    pub fn c_hat(&self) -> &[[[Expr; 3]; 3]; 3] {
        &self.c_hat
    }

    /// `Ĉ` as a frame-basis (1,2) field.
    pub fn structure_tensor(&self) -> TensorField {
        TensorField::from_fn(1, 2, Basis::Frame, |i| self.c_hat[i[0]][i[1]][i[2]].clone())
            .with_symmetry(Symmetry::Antisymmetric(1, 2))
    }

    pub fn coframe_field(&self, a: usize) -> TensorField {
        TensorField::from_fn(0, 1, Basis::Coordinate, |i| self.theta[a][i[0]].clone())
    }

    pub fn vector_field(&self, a: usize) -> TensorField {
        TensorField::from_fn(1, 0, Basis::Coordinate, |i| self.e[a][i[0]].clone())
    }

    /// `e_A(f)`.
    pub fn apply(&self, a: usize, f: &Expr, cache: &mut DiffCache) -> Expr {
        apply_vector(&self.e[a], f, cache)
    }

    /// Residual of `⟨θ^A, e_B⟩ = δ^A_B`.
    pub fn duality_residual(&self, samples: &Samples) -> Result<ResidualStats> {
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        for a in 0..DIM {
            for b in 0..DIM {
                lhs.push(Expr::sum((0..DIM).map(|k| &self.theta[a][k] * &self.e[b][k])));
                rhs.push(Expr::constant(if a == b { 1.0 } else { 0.0 }));
            }
        }
        tolerance::residual_stats(&lhs, &rhs, samples)
    }

    /// Residual of `δ_IJ θ^I θ^J = g`.
    pub fn metric_residual(&self, c: &CarrollStructure, samples: &Samples) -> Result<ResidualStats> {
        let rebuilt = TensorField::from_fn(0, 2, Basis::Coordinate, |i| {
            Expr::sum((1..DIM).map(|s| &self.theta[s][i[0]] * &self.theta[s][i[1]]))
        });
        rebuilt.residual(&c.metric(), samples)
    }

    /// Residual of `[e_A, e_B] = Ĉ^C_{AB} e_C`, with the bracket taken
    /// directly in coordinates.
    pub fn bracket_residual(&self, samples: &Samples) -> Result<ResidualStats> {
        let mut cache = DiffCache::new();
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        for a in 0..DIM {
            for b in 0..DIM {
                for k in 0..DIM {
                    lhs.push(
                        apply_vector(&self.e[a], &self.e[b][k], &mut cache)
                            - apply_vector(&self.e[b], &self.e[a][k], &mut cache),
                    );
                    rhs.push(Expr::sum(
                        (0..DIM).map(|c| &self.c_hat[c][a][b] * &self.e[c][k]),
                    ));
                }
            }
        }
        tolerance::residual_stats(&lhs, &rhs, samples)
    }
}

/// `X(f) = X^a ∂_a f`.
pub fn apply_vector(x: &[Expr; 3], f: &Expr, cache: &mut DiffCache) -> Expr {
    Expr::sum(
        (0..DIM)
            .filter(|&a| !x[a].is_zero())
            .map(|a| &x[a] * cache.diff(f, a)),
    )
}

fn structure_functions(theta: &[[Expr; 3]; 3], e: &[[Expr; 3]; 3]) -> [[[Expr; 3]; 3]; 3] {
    let mut cache = DiffCache::new();
    // bracket[A][B][a] = e_A(e_B^a) - e_B(e_A^a)
    let mut bracket: Vec<Vec<[Expr; 3]>> = vec![vec![std::array::from_fn(|_| Expr::zero()); 3]; 3];
    for a in 0..DIM {
        for b in (a + 1)..DIM {
            let v: [Expr; 3] = std::array::from_fn(|k| {
                apply_vector(&e[a], &e[b][k], &mut cache) - apply_vector(&e[b], &e[a][k], &mut cache)
            });
            bracket[b][a] = std::array::from_fn(|k| -&v[k]);
            bracket[a][b] = v;
        }
    }
    std::array::from_fn(|c| {
        std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                Expr::sum((0..DIM).map(|k| &theta[c][k] * &bracket[a][b][k]))
            })
        })
    })
}

/// `∂_u` applied componentwise to a covariant coordinate field; in the adapted
/// chart this is the Lie derivative along `ℓ`.
pub fn lie_derivative_along_ell(t: &TensorField) -> Result<TensorField> {
    if t.contra() != 0 {
        return Err(Error::Invalid(
            "Lie derivative along ℓ is only provided for covariant fields".into(),
        ));
    }
    if t.basis() != Basis::Coordinate {
        return Err(Error::BasisMismatch(
            "Lie derivative along ℓ needs coordinate components".into(),
        ));
    }
    let mut cache = DiffCache::new();
    Ok(t.map(|c| cache.diff(c, 0)))
}

/// Re-expresses `t` in the other basis.
pub fn change_basis(t: &TensorField, f: &Frame, direction: Direction) -> Result<TensorField> {
    let (from, to) = match direction {
        Direction::ToFrame => (Basis::Coordinate, Basis::Frame),
        Direction::ToCoordinate => (Basis::Frame, Basis::Coordinate),
    };
    if t.basis() != from {
        return Err(Error::BasisMismatch(format!(
            "cannot convert a {} field {} basis",
            t.basis(),
            match direction {
                Direction::ToFrame => "to the frame",
                Direction::ToCoordinate => "to the coordinate",
            }
        )));
    }
    // matrices m with new[k] = Σ_j m[k][j] old[j]
    let transpose = |m: &[[Expr; 3]; 3]| -> [[Expr; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| m[j][i].clone()))
    };
    let (upper, lower) = match direction {
        Direction::ToFrame => (f.theta.clone(), f.e.clone()),
        Direction::ToCoordinate => (transpose(&f.e), transpose(&f.theta)),
    };
    let mut out = t.clone();
    for slot in 0..t.rank() {
        let m = if slot < t.contra() { &upper } else { &lower };
        out.comps = out.transform_slot(slot, m);
    }
    out.basis = to;
    Ok(out)
}
