//! Affine connections with expression coefficients.
//!
//! Slot convention: `Γ^a_{bc}` pairs the argument index `b` with the direction
//! `c`, so `∇_c V^a = ∂_c V^a + Γ^a_{bc} V^b` and `∇_{e_A} e_B = Γ^C_{BA} e_C`.
//! Torsion is `T(X,Y) = ∇_X Y − ∇_Y X − [X,Y]`, i.e. `T^a_{bc} = Γ^a_{cb} − Γ^a_{bc}`
//! in coordinates, with an extra `−Ĉ^A_{BC}` in the frame.

use crate::carroll::{minimal_torsion, CarrollStructure, EhresmannForm, Role, TorsionTensor};
use crate::error::{Error, Result};
use crate::expr::{DiffCache, Expr};
use crate::geometry::{apply_vector, indices, Basis, Frame, Symmetry, TensorField, DIM};
use crate::sample::Samples;
use crate::tolerance::{self, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    BuiltScm,
    BuiltPcs,
    UserSupplied,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::BuiltScm => "built-scm",
            Provenance::BuiltPcs => "built-pcs",
            Provenance::UserSupplied => "user-supplied",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AffineConnection {
    coordinate: TensorField,
    frame_coeffs: TensorField,
    frame: Frame,
    provenance: Provenance,
}

impl AffineConnection {
    /// Wraps coordinate coefficients `Γ^a_{bc}` and derives the frame ones
    /// `Γ^C_{BA} = θ^C_a (e_A(e_B^a) + Γ^a_{bc} e_B^b e_A^c)`.
    pub fn new(coordinate: TensorField, frame: Frame, provenance: Provenance) -> Result<AffineConnection> {
        if coordinate.contra() != 1 || coordinate.cov() != 2 {
            return Err(Error::Invalid("connection coefficients need valence (1,2)".into()));
        }
        if coordinate.basis() != Basis::Coordinate {
            return Err(Error::BasisMismatch("connection coefficients must be coordinate components".into()));
        }
        let mut cache = DiffCache::new();
        let e = frame.e();
        let theta = frame.theta();
        let mut frame_coeffs = TensorField::zeros(1, 2, Basis::Frame);
        for b in 0..DIM {
            for a in 0..DIM {
                // ∇_{e_A} e_B in coordinates
                let v: Vec<Expr> = (0..DIM)
                    .map(|k| {
                        let mut terms = vec![apply_vector(&e[a], &e[b][k], &mut cache)];
                        for p in 0..DIM {
                            for q in 0..DIM {
                                let g = coordinate.get(&[k, p, q]);
                                if !g.is_zero() && !e[b][p].is_zero() && !e[a][q].is_zero() {
                                    terms.push(g * &e[b][p] * &e[a][q]);
                                }
                            }
                        }
                        Expr::sum(terms)
                    })
                    .collect();
                for c in 0..DIM {
                    frame_coeffs.set(&[c, b, a], Expr::sum((0..DIM).map(|k| &theta[c][k] * &v[k])));
                }
            }
        }
        Ok(AffineConnection {
            coordinate,
            frame_coeffs,
            frame,
            provenance,
        })
    }

    pub fn zero(frame: Frame) -> AffineConnection {
        AffineConnection::new(TensorField::zeros(1, 2, Basis::Coordinate), frame, Provenance::UserSupplied)
            .expect("zero coefficients have the right shape")
    }

    pub fn coordinate(&self) -> &TensorField {
        &self.coordinate
    }

    pub fn frame_coefficients(&self) -> &TensorField {
        &self.frame_coeffs
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    fn coeffs(&self, basis: Basis) -> &TensorField {
        match basis {
            Basis::Coordinate => &self.coordinate,
            Basis::Frame => &self.frame_coeffs,
        }
    }

    /// `∇t`, with the new covariant slot last, in `t`'s own basis.
    pub fn covariant_derivative(&self, t: &TensorField) -> TensorField {
        let mut cache = DiffCache::new();
        self.covariant_derivative_with(t, &mut cache)
    }

    pub fn covariant_derivative_with(&self, t: &TensorField, cache: &mut DiffCache) -> TensorField {
        let basis = t.basis();
        let gamma = self.coeffs(basis);
        let (r, s) = (t.contra(), t.cov());
        let rank = r + s;
        let mut out = TensorField::zeros(r, s + 1, basis);
        let mut idx = vec![0; rank];
        for full in indices(rank + 1) {
            let c = full[rank];
            idx.copy_from_slice(&full[..rank]);
            let base = t.get(&idx);
            let mut terms = vec![match basis {
                Basis::Coordinate => cache.diff(base, c),
                Basis::Frame => self.frame.apply(c, base, cache),
            }];
            for slot in 0..rank {
                let orig = idx[slot];
                for e in 0..DIM {
                    idx[slot] = e;
                    let comp = t.get(&idx);
                    let g = if slot < r {
                        gamma.get(&[orig, e, c])
                    } else {
                        gamma.get(&[e, orig, c])
                    };
                    if comp.is_zero() || g.is_zero() {
                        continue;
                    }
                    let term = g * comp;
                    terms.push(if slot < r { term } else { -term });
                }
                idx[slot] = orig;
            }
            out.set(&full, Expr::sum(terms));
        }
        out
    }

    /// Torsion from the coordinate formula and from the frame formula.
    pub fn torsion(&self) -> TorsionTensor {
        let g = &self.coordinate;
        let coord = TensorField::from_fn(1, 2, Basis::Coordinate, |i| {
            g.get(&[i[0], i[2], i[1]]) - g.get(&[i[0], i[1], i[2]])
        });
        let gf = &self.frame_coeffs;
        let ch = self.frame.c_hat();
        let frame = TensorField::from_fn(1, 2, Basis::Frame, |i| {
            gf.get(&[i[0], i[2], i[1]]) - gf.get(&[i[0], i[1], i[2]]) - &ch[i[0]][i[1]][i[2]]
        });
        TorsionTensor::from_parts(coord, frame)
    }

    /// Curvature `R^A_{BCD}`, the `A` component of `R(e_C, e_D) e_B`, computed
    /// independently in each basis.
    pub fn curvature(&self) -> Curvature {
        let mut cache = DiffCache::new();
        Curvature {
            coordinate: self.curvature_in(Basis::Coordinate, &mut cache),
            frame: self.curvature_in(Basis::Frame, &mut cache),
        }
    }

    fn curvature_in(&self, basis: Basis, cache: &mut DiffCache) -> TensorField {
        let g = self.coeffs(basis);
        let ch = self.frame.c_hat();
        let mut d = |c: usize, f: &Expr| match basis {
            Basis::Coordinate => cache.diff(f, c),
            Basis::Frame => self.frame.apply(c, f, cache),
        };
        let mut r = TensorField::zeros(1, 3, basis);
        for a in 0..DIM {
            for b in 0..DIM {
                for c in 0..DIM {
                    for dd in (c + 1)..DIM {
                        let mut terms = vec![d(c, g.get(&[a, b, dd])), -d(dd, g.get(&[a, b, c]))];
                        for e in 0..DIM {
                            terms.push(g.get(&[e, b, dd]) * g.get(&[a, e, c]));
                            terms.push(-(g.get(&[e, b, c]) * g.get(&[a, e, dd])));
                            if basis == Basis::Frame && !ch[e][c][dd].is_zero() {
                                terms.push(-(&ch[e][c][dd] * g.get(&[a, b, e])));
                            }
                        }
                        let v = Expr::sum(terms);
                        r.set(&[a, b, dd, c], -&v);
                        r.set(&[a, b, c, dd], v);
                    }
                }
            }
        }
        r.with_symmetry(Symmetry::Antisymmetric(2, 3))
    }
}

#[derive(Debug, Clone)]
pub struct Curvature {
    pub coordinate: TensorField,
    pub frame: TensorField,
}

fn ell() -> TensorField {
    TensorField::from_fn(1, 0, Basis::Coordinate, |i| {
        if i[0] == 0 {
            Expr::one()
        } else {
            Expr::zero()
        }
    })
}

/// `Γ^a_{bc} = S^a_{bc} − ½T^a_{bc}` with `S` symmetric, fixed by `∇ℓ = 0`,
/// `∇g = 0`, the given torsion, and `∇_{(b}ν_{c)} = N_{bc}` on spatial pairs.
fn assemble(
    c: &CarrollStructure,
    nu: &EhresmannForm,
    torsion: &TensorField,
    n_term: Option<&TensorField>,
) -> TensorField {
    let mut cache = DiffCache::new();
    let t = |a: usize, b: usize, cc: usize| torsion.get(&[a, b, cc]).clone();
    let mut s = TensorField::zeros(1, 2, Basis::Coordinate);
    for a in 0..DIM {
        for b in 0..DIM {
            let half = 0.5 * t(a, 0, b);
            s.set(&[a, 0, b], half.clone());
            s.set(&[a, b, 0], half);
        }
    }
    let g = c.metric();
    let ginv = c.inverse_spatial_metric();
    // T_{kji} = g_{kl} T^l_{ji}
    let t_low = |k: usize, j: usize, i: usize| {
        Expr::sum((1..DIM).map(|l| g.get(&[k, l]) * &t(l, j, i)))
    };
    let mut a_tensor = |i: usize, j: usize, k: usize| {
        cache.diff(g.get(&[j, k]), i) + 0.5 * (t_low(k, j, i) + t_low(j, k, i))
    };
    let mut s_low = vec![Expr::zero(); 27];
    for k in 1..DIM {
        for i in 1..DIM {
            for j in i..DIM {
                let v = 0.5 * (a_tensor(i, j, k) + a_tensor(j, i, k) - a_tensor(k, i, j));
                s_low[9 * k + 3 * i + j] = v.clone();
                s_low[9 * k + 3 * j + i] = v;
            }
        }
    }
    for l in 1..DIM {
        for i in 1..DIM {
            for j in 1..DIM {
                let v = Expr::sum((1..DIM).map(|k| &ginv[l - 1][k - 1] * &s_low[9 * k + 3 * i + j]));
                s.set(&[l, i, j], v);
            }
        }
    }
    let form = nu.form();
    for i in 1..DIM {
        for j in 1..DIM {
            let sym = 0.5 * (cache.diff(form.get(&[j]), i) + cache.diff(form.get(&[i]), j));
            let mut v = sym - Expr::sum((1..DIM).map(|l| s.get(&[l, i, j]) * form.get(&[l])));
            if let Some(n) = n_term {
                v = v - n.get(&[i, j]);
            }
            s.set(&[0, i, j], v);
        }
    }
    TensorField::from_fn(1, 2, Basis::Coordinate, |i| {
        s.get(i) - 0.5 * torsion.get(i)
    })
}

/// The connection with `∇g = ∇ℓ = ∇ν = 0` and minimal torsion, for principal `ν`.
pub fn build_scm(
    c: &CarrollStructure,
    nu: &EhresmannForm,
    samples: &Samples,
    tol: &Tolerance,
) -> Result<AffineConnection> {
    nu.with_role(Role::Principal).validate(samples, tol)?;
    let frame = Frame::build(c, nu, samples)?;
    let torsion = minimal_torsion(c, nu, &frame)?;
    let gamma = assemble(c, nu, torsion.coordinate(), None);
    AffineConnection::new(gamma, frame, Provenance::BuiltScm)
}

/// The connection with `∇g = ∇ℓ = 0`, `∇_{(a}α_{b)} = g_{ab}` and minimal torsion.
pub fn build_pcs(
    c: &CarrollStructure,
    alpha: &EhresmannForm,
    samples: &Samples,
) -> Result<AffineConnection> {
    let frame = Frame::build(c, alpha, samples)?;
    let torsion = minimal_torsion(c, alpha, &frame)?;
    let gamma = assemble(c, alpha, torsion.coordinate(), Some(&c.metric()));
    AffineConnection::new(gamma, frame, Provenance::BuiltPcs)
}

/// Symmetrization over the last two slots of a covariant rank-2 field.
pub fn symmetrize(t: &TensorField) -> TensorField {
    TensorField::from_fn(0, 2, t.basis(), |i| {
        0.5 * (t.get(&[i[0], i[1]]) + t.get(&[i[1], i[0]]))
    })
    .with_symmetry(Symmetry::Symmetric(0, 1))
}

/// Residual summary of a connection against its defining conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Postconditions {
    pub metric: f64,
    pub ell: f64,
    /// `∇ν` for SCM, `∇_{(a}α_{b)} − g_{ab}` for PCS.
    pub form: f64,
    pub torsion: f64,
}

impl Postconditions {
    pub fn worst(&self) -> f64 {
        self.metric.max(self.ell).max(self.form).max(self.torsion)
    }
}

pub fn metric_residual(conn: &AffineConnection, c: &CarrollStructure, samples: &Samples) -> Result<f64> {
    Ok(conn.covariant_derivative(&c.metric()).norm_residual(samples)?.max)
}

pub fn ell_residual(conn: &AffineConnection, samples: &Samples) -> Result<f64> {
    Ok(conn.covariant_derivative(&ell()).norm_residual(samples)?.max)
}

pub fn parallel_form_residual(conn: &AffineConnection, nu: &EhresmannForm, samples: &Samples) -> Result<f64> {
    Ok(conn.covariant_derivative(&nu.form()).norm_residual(samples)?.max)
}

pub fn potential_residual(
    conn: &AffineConnection,
    c: &CarrollStructure,
    alpha: &EhresmannForm,
    samples: &Samples,
) -> Result<f64> {
    let sym = symmetrize(&conn.covariant_derivative(&alpha.form()));
    Ok(sym.residual(&c.metric(), samples)?.max)
}

pub fn torsion_residual(
    conn: &AffineConnection,
    c: &CarrollStructure,
    form: &EhresmannForm,
    samples: &Samples,
) -> Result<f64> {
    let minimal = minimal_torsion(c, form, conn.frame())?;
    Ok(conn.torsion().coordinate().residual(minimal.coordinate(), samples)?.max)
}

pub fn scm_postconditions(
    conn: &AffineConnection,
    c: &CarrollStructure,
    nu: &EhresmannForm,
    samples: &Samples,
) -> Result<Postconditions> {
    Ok(Postconditions {
        metric: metric_residual(conn, c, samples)?,
        ell: ell_residual(conn, samples)?,
        form: parallel_form_residual(conn, nu, samples)?,
        torsion: torsion_residual(conn, c, nu, samples)?,
    })
}

pub fn pcs_postconditions(
    conn: &AffineConnection,
    c: &CarrollStructure,
    alpha: &EhresmannForm,
    samples: &Samples,
) -> Result<Postconditions> {
    Ok(Postconditions {
        metric: metric_residual(conn, c, samples)?,
        ell: ell_residual(conn, samples)?,
        form: potential_residual(conn, c, alpha, samples)?,
        torsion: torsion_residual(conn, c, alpha, samples)?,
    })
}

/// Residual between a frame-basis field and the basis change of its
/// coordinate counterpart.
pub fn basis_consistency(coordinate: &TensorField, frame: &TensorField, f: &Frame, samples: &Samples) -> Result<f64> {
    let converted = crate::geometry::change_basis(coordinate, f, crate::geometry::Direction::ToFrame)?;
    Ok(tolerance::residual_stats(converted.components(), frame.components(), samples)?.max)
}
