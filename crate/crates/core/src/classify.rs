//! Characterization checkers for Carrollian connections.
//!
//! Every checker first verifies the standing hypotheses `∇g = ∇ℓ = 0` and
//! fails with [`Error::HypothesisViolated`] rather than returning a verdict
//! when they do not hold.

use crate::carroll::{lie_data, lie_identity_residual, minimal_torsion, torsion_trace, CarrollStructure, EhresmannForm, TorsionTensor};
use crate::connection::{ell_residual, metric_residual, symmetrize, AffineConnection};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{change_basis, indices, lie_derivative_along_ell, Basis, Direction, Frame, TensorField, DIM};
use crate::sample::Samples;
use crate::tolerance::{self, classify_magnitudes, normalized, ResidualStats, Tolerance, Vanishing};
use crate::verdict::{Branch, Verdict};

pub use crate::surface::verify_vorticity_free_killing;

/// The connection re-expressed against the frame adapted to `(c, form)`.
fn reframe(conn: &AffineConnection, c: &CarrollStructure, form: &EhresmannForm, samples: &Samples) -> Result<AffineConnection> {
    let f = Frame::build(c, form, samples)?;
    AffineConnection::new(conn.coordinate().clone(), f, conn.provenance())
}

fn hypothesis(name: &str, residual: f64, tol: &Tolerance) -> Result<()> {
    if residual < tol.pass {
        Ok(())
    } else {
        Err(Error::HypothesisViolated {
            name: name.to_string(),
            residual,
        })
    }
}

/// Checks `∇g = 0` and `∇ℓ = 0`.
pub fn check_hypotheses(conn: &AffineConnection, c: &CarrollStructure, samples: &Samples, tol: &Tolerance) -> Result<()> {
    hypothesis("nabla-ell", ell_residual(conn, samples)?, tol)?;
    hypothesis("nabla-g", metric_residual(conn, c, samples)?, tol)
}

fn stats(values: f64) -> ResidualStats {
    ResidualStats { max: values, mean: values }
}

/// `(L_ℓg)(X,Y) = g(T(ℓ,X),Y) + g(X,T(ℓ,Y))` over frame pairs.
pub fn check_carrollian_torsion_identity(
    c: &CarrollStructure,
    ehr: &EhresmannForm,
    conn: &AffineConnection,
    samples: &Samples,
    tol: &Tolerance,
) -> Result<Verdict> {
    check_hypotheses(conn, c, samples, tol)?;
    let conn = reframe(conn, c, ehr, samples)?;
    let t = conn.torsion();
    let r = lie_identity_residual(&t, c, ehr, conn.frame(), samples)?;
    let mut v = Verdict::new(Branch::None, tol.pass);
    v.require("lie-metric-identity", stats(r));
    Ok(v)
}

/// The three minimality constraints on a coordinate-basis (1,2) tensor.
pub fn check_minimal(
    c: &CarrollStructure,
    ehr: &EhresmannForm,
    t: &TensorField,
    samples: &Samples,
    tol: &Tolerance,
) -> Result<Verdict> {
    let f = Frame::build(c, ehr, samples)?;
    let tf = change_basis(t, &f, Direction::ToFrame)?;
    let (lg, lw) = lie_data(c, ehr, &f)?;
    let g = change_basis(&c.metric(), &f, Direction::ToFrame)?;
    let (mut l1, mut r1, mut l2, mut r2, mut l3) = (vec![], vec![], vec![], vec![], vec![]);
    for x in 0..DIM {
        for y in 0..DIM {
            l1.push(Expr::sum((0..DIM).map(|a| tf.get(&[a, 0, x]) * g.get(&[a, y]))));
            r1.push(0.5 * lg.get(&[x, y]));
        }
        l2.push(tf.get(&[0, 0, x]).clone());
        r2.push(lw.get(&[x]).clone());
    }
    for a in 0..DIM {
        for i in 1..DIM {
            for j in 1..DIM {
                l3.push(tf.get(&[a, i, j]).clone());
            }
        }
    }
    let mut v = Verdict::new(Branch::None, tol.pass);
    v.require("lie-metric", tolerance::residual_stats(&l1, &r1, samples)?)
        .require("lie-form", tolerance::residual_stats(&l2, &r2, samples)?)
        .require("horizontal", tolerance::vanishing_stats(&l3, samples)?);
    Ok(v)
}

fn torsion_status(t: &TorsionTensor, samples: &Samples, tol: &Tolerance) -> Result<Vanishing> {
    let rows = tolerance::evaluate_all(t.coordinate().components(), samples)?;
    let max = rows
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(classify_magnitudes(&[max], tol))
}

/// `T_{abc} = g_{ae} T^e_{bc}` in coordinates.
fn lowered_torsion(t: &TorsionTensor, c: &CarrollStructure) -> TensorField {
    let g = c.metric();
    let tc = t.coordinate();
    TensorField::from_fn(0, 3, Basis::Coordinate, |i| {
        Expr::sum((1..DIM).map(|e| g.get(&[i[0], e]) * tc.get(&[e, i[1], i[2]])))
    })
}

/// Residual of `−∇_d T_{abc} = ∇_d(L_ℓg_{a[b})ω_{c]} + L_ℓg_{a[b}N_{c]d}`,
/// antisymmetrizing over `[b,c]` with unit weight.
fn torsion_derivative_residual(
    conn: &AffineConnection,
    t: &TorsionTensor,
    c: &CarrollStructure,
    form: &EhresmannForm,
    n: Option<&TensorField>,
    samples: &Samples,
) -> Result<ResidualStats> {
    let dt = conn.covariant_derivative(&lowered_torsion(t, c));
    let lg = lie_derivative_along_ell(&c.metric())?;
    let dlg = conn.covariant_derivative(&lg);
    let w = form.form();
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for i in indices(4) {
        let (a, b, cc, d) = (i[0], i[1], i[2], i[3]);
        lhs.push(-dt.get(&i));
        let mut r = 0.5 * (dlg.get(&[a, b, d]) * w.get(&[cc]) - dlg.get(&[a, cc, d]) * w.get(&[b]));
        if let Some(n) = n {
            r = r + 0.5 * (lg.get(&[a, b]) * n.get(&[cc, d]) - lg.get(&[a, cc]) * n.get(&[b, d]));
        }
        rhs.push(r);
    }
    tolerance::residual_stats(&lhs, &rhs, samples)
}

fn sym_gradient_residual(
    conn: &AffineConnection,
    gamma_frame: &TensorField,
    target: &TensorField,
    samples: &Samples,
) -> Result<ResidualStats> {
    let gamma = change_basis(gamma_frame, conn.frame(), Direction::ToCoordinate)?;
    symmetrize(&conn.covariant_derivative(&gamma)).residual(target, samples)
}

fn component_means(t: &TensorField, samples: &Samples) -> Result<Vec<f64>> {
    let rows = tolerance::evaluate_all(t.components(), samples)?;
    let n = rows.len().max(1) as f64;
    Ok((0..t.components().len())
        .map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n)
        .collect())
}

/// Branch decision shared by the non-vanishing-torsion checks.
struct TraceBranch {
    branch: Branch,
    trace: crate::carroll::TorsionTrace,
}

fn trace_branch(
    t: &TorsionTensor,
    c: &CarrollStructure,
    form: &EhresmannForm,
    conn: &AffineConnection,
    samples: &Samples,
    tol: &Tolerance,
) -> Result<TraceBranch> {
    let trace = torsion_trace(t, c, form, conn.frame(), samples, tol)?;
    let branch = match trace.branch {
        Vanishing::NonVanishing => Branch::TraceNonzero,
        _ => Branch::TraceHorizontalOrZero,
    };
    Ok(TraceBranch { branch, trace })
}

/// Lemma-type check for a symmetric `N` with `N(ℓ,·) = 0` and non-vanishing torsion.
pub fn check_lemma_26(
    c: &CarrollStructure,
    ehr: &EhresmannForm,
    conn: &AffineConnection,
    n: &TensorField,
    samples: &Samples,
    tol: &Tolerance,
) -> Result<Verdict> {
    if n.contra() != 0 || n.cov() != 2 || n.basis() != Basis::Coordinate {
        return Err(Error::Invalid("N must be a covariant 2-tensor in coordinates".into()));
    }
    let swapped = n.swap_slots(0, 1);
    hypothesis("N-symmetric", n.residual(&swapped, samples)?.max, tol)?;
    let n_ell: Vec<Expr> = (0..DIM).map(|b| n.get(&[0, b]).clone()).collect();
    hypothesis("N-ell", tolerance::vanishing_stats(&n_ell, samples)?.max, tol)?;
    check_hypotheses(conn, c, samples, tol)?;
    let conn = reframe(conn, c, ehr, samples)?;
    let t = conn.torsion();
    match torsion_status(&t, samples, tol)? {
        Vanishing::Vanishing => return Err(Error::VanishingTorsion),
        Vanishing::Indeterminate => return Err(Error::IndeterminateBranch { quantity: "torsion" }),
        Vanishing::NonVanishing => {}
    }
    let tb = trace_branch(&t, c, ehr, &conn, samples, tol)?;
    let mut v = Verdict::new(tb.branch, tol.pass);
    match tb.branch {
        Branch::TraceNonzero => {
            let gamma = tb.trace.gamma.as_ref().expect("gamma exists on the trace-nonzero branch");
            v.require("sym-grad-gamma", sym_gradient_residual(&conn, gamma, n, samples)?);
            v.report("gamma", component_means(gamma, samples)?);
        }
        _ => {
            v.require(
                "torsion-derivative",
                torsion_derivative_residual(&conn, &t, c, ehr, Some(n), samples)?,
            );
        }
    }
    let forward = symmetrize(&conn.covariant_derivative(&ehr.form())).residual(n, samples)?;
    v.inform("sym-grad-omega", forward);
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Scm,
    Pcs,
}

/// Evaluates the three bullets characterizing SCM connections.
pub fn classify_scm(
    c: &CarrollStructure,
    nu: &EhresmannForm,
    conn: &AffineConnection,
    samples: &Samples,
    tol: &Tolerance,
) -> Result<Verdict> {
    classify(Kind::Scm, c, nu, conn, samples, tol)
}

/// Evaluates the three bullets characterizing PCS connections.
pub fn classify_pcs(
    c: &CarrollStructure,
    alpha: &EhresmannForm,
    conn: &AffineConnection,
    samples: &Samples,
    tol: &Tolerance,
) -> Result<Verdict> {
    classify(Kind::Pcs, c, alpha, conn, samples, tol)
}

fn classify(
    kind: Kind,
    c: &CarrollStructure,
    form: &EhresmannForm,
    conn: &AffineConnection,
    samples: &Samples,
    tol: &Tolerance,
) -> Result<Verdict> {
    check_hypotheses(conn, c, samples, tol)?;
    let conn = reframe(conn, c, form, samples)?;
    let f = conn.frame();
    let t = conn.torsion();
    let minimal = minimal_torsion(c, form, f)?;
    hypothesis(
        "minimal-torsion",
        t.coordinate().residual(minimal.coordinate(), samples)?.max,
        tol,
    )?;
    match torsion_status(&t, samples, tol)? {
        Vanishing::Indeterminate => Err(Error::IndeterminateBranch { quantity: "torsion" }),
        Vanishing::Vanishing => torsion_free(kind, c, form, &conn, &t, samples, tol),
        Vanishing::NonVanishing => {
            let tb = trace_branch(&t, c, form, &conn, samples, tol)?;
            let mut v = Verdict::new(tb.branch, tol.pass);
            let target = match kind {
                Kind::Scm => TensorField::zeros(0, 2, Basis::Coordinate),
                Kind::Pcs => c.metric(),
            };
            // ν(T(ℓ,X)) = T^1_{1X}
            let vertical: Vec<Expr> = (0..DIM).map(|x| t.get(0, 0, x).clone()).collect();
            if kind == Kind::Scm {
                v.require("form-torsion-ell", tolerance::vanishing_stats(&vertical, samples)?);
            }
            match tb.branch {
                Branch::TraceNonzero => {
                    let gamma = match kind {
                        Kind::Scm => tb.trace.v.map(|x| x / &tb.trace.v_on_ell),
                        Kind::Pcs => tb.trace.gamma.clone().expect("gamma exists on the trace-nonzero branch"),
                    };
                    v.require("sym-grad-gamma", sym_gradient_residual(&conn, &gamma, &target, samples)?);
                    v.report("gamma", component_means(&gamma, samples)?);
                }
                _ => {
                    if kind == Kind::Scm {
                        v.require("trace", tb.trace.v.norm_residual(samples)?);
                    }
                    let n = (kind == Kind::Pcs).then_some(&target);
                    v.require(
                        "torsion-derivative",
                        torsion_derivative_residual(&conn, &t, c, form, n, samples)?,
                    );
                }
            }
            Ok(v)
        }
    }
}

/// Bullet 3. Where the transverse curvature `R²_{323}` vanishes the curvature
/// conditions carry no information about `Γ¹_{IJ}`, so at those points the
/// conclusion (`∇ν = 0`, resp. `∇_{(I}α_{J)} = g_{IJ}`) is checked directly.
fn torsion_free(
    kind: Kind,
    c: &CarrollStructure,
    form: &EhresmannForm,
    conn: &AffineConnection,
    t: &TorsionTensor,
    samples: &Samples,
    tol: &Tolerance,
) -> Result<Verdict> {
    let mut v = Verdict::new(Branch::TorsionFree, tol.pass);
    v.require("torsion", t.coordinate().norm_residual(samples)?);
    let curv = conn.curvature();
    let r = &curv.coordinate;
    let w = form.form();
    let contract = |t: &TensorField, rank: usize| -> TensorField {
        TensorField::from_fn(0, rank, Basis::Coordinate, |i| {
            let mut full = vec![0; rank + 1];
            full[1..].copy_from_slice(i);
            Expr::sum((0..DIM).map(|a| {
                full[0] = a;
                w.get(&[a]) * t.get(&full)
            }))
        })
    };
    match kind {
        Kind::Scm => {
            v.require("form-curvature", contract(r, 3).norm_residual(samples)?);
            let dr = conn.covariant_derivative(r);
            v.require("form-nabla-curvature", contract(&dr, 4).norm_residual(samples)?);
        }
        Kind::Pcs => {
            let wr = contract(r, 3);
            let at_ell: Vec<Expr> = indices(2).map(|i| wr.get(&[i[0], i[1], 0]).clone()).collect();
            v.require("form-curvature-ell", tolerance::vanishing_stats(&at_ell, samples)?);
            pcs_curvature_fit(&mut v, c, form, conn, r, samples)?;
        }
    }

    // transverse curvature and the direct check at flat points
    let k = curv.frame.get(&[1, 2, 1, 2]).clone();
    let nabla_form = change_basis(&conn.covariant_derivative(&w), conn.frame(), Direction::ToFrame)?;
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for i in 1..DIM {
        for j in 1..DIM {
            match kind {
                Kind::Scm => {
                    lhs.push(nabla_form.get(&[i, j]).clone());
                    rhs.push(Expr::zero());
                }
                Kind::Pcs => {
                    lhs.push(0.5 * (nabla_form.get(&[i, j]) + nabla_form.get(&[j, i])));
                    rhs.push(Expr::constant(if i == j { 1.0 } else { 0.0 }));
                }
            }
        }
    }
    let n = lhs.len();
    let rows = tolerance::evaluate_all(&[vec![k], lhs, rhs].concat(), samples)?;
    let mut flat_points = 0usize;
    let residuals: Vec<f64> = rows
        .iter()
        .map(|row| {
            if row[0].abs() < tol.nonvanish {
                flat_points += 1;
                normalized(&row[1..1 + n], &row[1 + n..])
            } else {
                0.0
            }
        })
        .collect();
    v.require("flat-transverse", ResidualStats::from_values(&residuals));
    v.report("flat-transverse-points", vec![flat_points as f64]);
    Ok(v)
}

/// `α_a e₂^b e₃^d ∇_{(f}[R^a_{|b|c)d} − ℓ^a R^e_{|b|c)d} α_e] = X g_{fc}`
/// with `X` fitted by least squares at each point.
fn pcs_curvature_fit(
    v: &mut Verdict,
    c: &CarrollStructure,
    alpha: &EhresmannForm,
    conn: &AffineConnection,
    r: &TensorField,
    samples: &Samples,
) -> Result<()> {
    let w = alpha.form();
    let r_tilde = TensorField::from_fn(1, 3, Basis::Coordinate, |i| {
        if i[0] != 0 {
            return r.get(i).clone();
        }
        let vertical = Expr::sum((0..DIM).map(|e| r.get(&[e, i[1], i[2], i[3]]) * w.get(&[e])));
        r.get(i) - vertical
    });
    let dr = conn.covariant_derivative(&r_tilde);
    let e = conn.frame().e();
    // m[c][f] = α_a e₂^b e₃^d ∇_f R̃^a_{bcd}
    let m = |cc: usize, ff: usize| {
        let mut terms = Vec::new();
        for a in 0..DIM {
            for b in 0..DIM {
                for d in 0..DIM {
                    if w.get(&[a]).is_zero() || e[1][b].is_zero() || e[2][d].is_zero() {
                        continue;
                    }
                    terms.push(w.get(&[a]) * &e[1][b] * &e[2][d] * dr.get(&[a, b, cc, d, ff]));
                }
            }
        }
        Expr::sum(terms)
    };
    let g = c.metric();
    let mut q = Vec::new();
    let mut gv = Vec::new();
    for ff in 0..DIM {
        for cc in 0..DIM {
            q.push(0.5 * (m(cc, ff) + m(ff, cc)));
            gv.push(g.get(&[ff, cc]).clone());
        }
    }
    // closed form X = −Γ¹_{IJ} R^{IJ}_{23} in the orthonormal frame
    let gf = conn.frame_coefficients();
    let rf = conn.curvature().frame;
    let closed = -Expr::sum((1..DIM).flat_map(|i| (1..DIM).map(move |j| (i, j))).map(|(i, j)| {
        gf.get(&[0, i, j]) * rf.get(&[i, j, 1, 2])
    }));
    let n = q.len();
    let rows = tolerance::evaluate_all(&[q, gv, vec![closed]].concat(), samples)?;
    let mut fit_res = Vec::new();
    let mut closed_res = Vec::new();
    let mut xs = Vec::new();
    for row in &rows {
        let (qv, gvals) = (&row[..n], &row[n..2 * n]);
        let gg: f64 = gvals.iter().map(|x| x * x).sum();
        let x = qv.iter().zip(gvals).map(|(a, b)| a * b).sum::<f64>() / gg;
        let fitted: Vec<f64> = gvals.iter().map(|b| x * b).collect();
        fit_res.push(normalized(qv, &fitted));
        closed_res.push(normalized(&[x], &[row[2 * n]]));
        xs.push(x);
    }
    v.require("curvature-proportionality", ResidualStats::from_values(&fit_res));
    v.inform("x-closed-form", ResidualStats::from_values(&closed_res));
    v.report("x", xs);
    Ok(())
}
