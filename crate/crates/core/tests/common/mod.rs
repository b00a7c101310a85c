//! Shared fixtures and independent numeric oracles.
//!
//! The oracles only evaluate the user-level expressions (coframe and form
//! components) as plain functions; every derivative is a finite difference and
//! every connection is a dense linear solve, so nothing here goes through the
//! library's symbolic differentiation or its closed-form builders.

#![allow(dead_code)]

use std::path::PathBuf;

use carroll_forge::carroll::{boost_to_principal, CarrollStructure, EhresmannForm, Role};
use carroll_forge::cli::SpecFile;
use carroll_forge::expr::{BinaryOp, Expr, UnaryOp};
use carroll_forge::geometry::Chart;
use nalgebra::{DMatrix, DVector, Matrix3};
use rand::Rng;

pub const GALLERY: [&str; 6] = ["flat", "expanding", "shear", "twisted", "drifting", "sphere"];

pub fn gallery_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../gallery")
        .join(format!("{name}.toml"))
}

pub fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_carroll-forge")
}

/// One gallery spec, loaded from its file.
pub struct Case {
    pub name: &'static str,
    pub chart: Chart,
    pub c: CarrollStructure,
    /// The spec's form, used as α for PCS work.
    pub alpha: EhresmannForm,
    /// A principal form for SCM work: the spec's form, boosted if needed.
    pub nu: EhresmannForm,
}

pub fn load(name: &'static str) -> Case {
    let spec = SpecFile::load(&gallery_path(name)).expect("gallery spec loads");
    let chart = spec.chart().unwrap();
    let c = spec.carroll(&chart).unwrap();
    let alpha = spec.ehresmann(&chart).unwrap();
    let probe = chart.samples(16, 1);
    let nu = if alpha.principal_residual(&probe).unwrap() < 1e-12 {
        alpha.with_role(Role::Principal)
    } else {
        boost_to_principal(&alpha, &chart)
    };
    Case {
        name,
        chart,
        c,
        alpha,
        nu,
    }
}

pub fn gallery() -> Vec<Case> {
    GALLERY.iter().map(|n| load(n)).collect()
}

/// Prints the criterion line and panics on failure. The line goes to the
/// process stdout directly so it shows even when the harness captures output.
pub fn report(id: u32, title: &str, ok: bool, detail: &str) {
    use std::io::Write;
    let tag = if ok { "PASS" } else { "FAIL" };
    let line = format!("[{tag}] acceptance {id}: {title} | {detail}\n");
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(ok, "acceptance {id} failed: {detail}");
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// Fourth-order central difference of `f` along coordinate `k`.
pub fn fd(f: &dyn Fn([f64; 3]) -> f64, p: [f64; 3], k: usize) -> f64 {
    let h = 1e-3;
    let at = |s: f64| {
        let mut q = p;
        q[k] += s;
        f(q)
    };
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

fn eval(e: &Expr, p: [f64; 3]) -> f64 {
    e.eval(&p).expect("expression evaluates inside the domain")
}

/// The coframe rows `θ^A_a` of `(c, form)` as plain numbers.
fn coframe_at(c: &CarrollStructure, form: &EhresmannForm, p: [f64; 3]) -> Matrix3<f64> {
    let [m11, m21, m22] = c.coframe().clone().map(|e| eval(&e, p));
    let [w1, w2] = form.spatial().clone().map(|e| eval(&e, p));
    Matrix3::new(1.0, w1, w2, 0.0, m11, 0.0, 0.0, m21, m22)
}

/// `g_ab = Σ_I θ^I_a θ^I_b`.
fn metric_at(c: &CarrollStructure, p: [f64; 3]) -> Matrix3<f64> {
    let [m11, m21, m22] = c.coframe().clone().map(|e| eval(&e, p));
    let rows = Matrix3::new(0.0, m11, 0.0, 0.0, m21, m22, 0.0, 0.0, 0.0);
    rows.transpose() * rows
}

fn form_at(form: &EhresmannForm, p: [f64; 3]) -> [f64; 3] {
    let [w1, w2] = form.spatial().clone().map(|e| eval(&e, p));
    [1.0, w1, w2]
}

/// Numeric geometry of `(c, form)` at one point.
pub struct PointData {
    pub g: Matrix3<f64>,
    /// `dg[c][(a, b)] = ∂_c g_ab`.
    pub dg: [Matrix3<f64>; 3],
    pub w: [f64; 3],
    /// `dw[c][a] = ∂_c ω_a`.
    pub dw: [[f64; 3]; 3],
    /// Coordinate components of the minimal torsion, `t[a][b][c] = T^a_{bc}`.
    pub t: [[[f64; 3]; 3]; 3],
}

/// Builds the minimal torsion from its frame definition: `T(ℓ, e_I)` has
/// `θ¹`-component `(L_ℓω)(e_I)` and spatial components `½(L_ℓg)(e_I, e_J)`,
/// and `T(e_I, e_J) = 0`.
#[allow(clippy::needless_range_loop)]
pub fn point_data(c: &CarrollStructure, form: &EhresmannForm, p: [f64; 3]) -> PointData {
    let g = metric_at(c, p);
    let dg: [Matrix3<f64>; 3] = std::array::from_fn(|k| {
        Matrix3::from_fn(|a, b| fd(&|q| metric_at(c, q)[(a, b)], p, k))
    });
    let w = form_at(form, p);
    let dw: [[f64; 3]; 3] = std::array::from_fn(|k| std::array::from_fn(|a| fd(&|q| form_at(form, q)[a], p, k)));
    let theta = coframe_at(c, form, p);
    let e = theta.try_inverse().expect("coframe is invertible");
    // e[(a, A)] = e_A^a
    let lie_g = |x: usize, y: usize| -> f64 {
        let mut s = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                s += dg[0][(a, b)] * e[(a, x)] * e[(b, y)];
            }
        }
        s
    };
    let lie_w = |x: usize| -> f64 { (0..3).map(|a| dw[0][a] * e[(a, x)]).sum() };
    let mut tf = [[[0.0; 3]; 3]; 3];
    for i in 1..3 {
        tf[0][0][i] = lie_w(i);
        tf[0][i][0] = -lie_w(i);
        for j in 1..3 {
            tf[j][0][i] = 0.5 * lie_g(i, j);
            tf[j][i][0] = -0.5 * lie_g(i, j);
        }
    }
    let mut t = [[[0.0; 3]; 3]; 3];
    for (a, ta) in t.iter_mut().enumerate() {
        for (b, tab) in ta.iter_mut().enumerate() {
            for (cc, v) in tab.iter_mut().enumerate() {
                let mut s = 0.0;
                for (aa, tfa) in tf.iter().enumerate() {
                    for (bb, tfab) in tfa.iter().enumerate() {
                        for (ccc, x) in tfab.iter().enumerate() {
                            s += e[(a, aa)] * x * theta[(bb, b)] * theta[(ccc, cc)];
                        }
                    }
                }
                *v = s;
            }
        }
    }
    PointData { g, dg, w, dw, t }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Scm,
    Pcs,
}

/// Solution of the defining linear system for the 27 unknowns `Γ^a_{bc}`.
pub struct Solve {
    /// `gamma[9a + 3b + c] = Γ^a_{bc}`.
    pub gamma: Vec<f64>,
    pub rank: usize,
    /// Normalized least-squares residual of the system.
    pub inconsistency: f64,
}

fn unknown(a: usize, b: usize, c: usize) -> usize {
    9 * a + 3 * b + c
}

/// Assembles and solves `∇ℓ = 0`, `∇g = 0`, torsion = minimal torsion, and
/// either `∇ν = 0` (SCM) or `∇_{(a}α_{b)} = g_ab` (PCS) at one point.
pub fn solve_connection(kind: Kind, c: &CarrollStructure, form: &EhresmannForm, p: [f64; 3]) -> Solve {
    let d = point_data(c, form, p);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut push = |row: Vec<(usize, f64)>, value: f64| {
        let mut r = vec![0.0; 27];
        for (k, v) in row {
            r[k] += v;
        }
        rows.push(r);
        rhs.push(value);
    };
    // ∇_c ℓ^a = Γ^a_{uc}
    for a in 0..3 {
        for cc in 0..3 {
            push(vec![(unknown(a, 0, cc), 1.0)], 0.0);
        }
    }
    // ∇_c g_ab = ∂_c g_ab − Γ^d_{ac} g_db − Γ^d_{bc} g_ad
    for a in 0..3 {
        for b in a..3 {
            for cc in 0..3 {
                let mut row = Vec::new();
                for dd in 0..3 {
                    row.push((unknown(dd, a, cc), d.g[(dd, b)]));
                    row.push((unknown(dd, b, cc), d.g[(a, dd)]));
                }
                push(row, d.dg[cc][(a, b)]);
            }
        }
    }
    // T^a_{bc} = Γ^a_{cb} − Γ^a_{bc}
    for a in 0..3 {
        for b in 0..3 {
            for cc in b + 1..3 {
                push(vec![(unknown(a, cc, b), 1.0), (unknown(a, b, cc), -1.0)], d.t[a][b][cc]);
            }
        }
    }
    match kind {
        Kind::Scm => {
            // ∇_c ν_b = ∂_c ν_b − Γ^d_{bc} ν_d
            for b in 0..3 {
                for cc in 0..3 {
                    let row = (0..3).map(|dd| (unknown(dd, b, cc), d.w[dd])).collect();
                    push(row, d.dw[cc][b]);
                }
            }
        }
        Kind::Pcs => {
            for b in 0..3 {
                for cc in b..3 {
                    let mut row = Vec::new();
                    for dd in 0..3 {
                        row.push((unknown(dd, b, cc), 0.5 * d.w[dd]));
                        row.push((unknown(dd, cc, b), 0.5 * d.w[dd]));
                    }
                    push(row, 0.5 * (d.dw[cc][b] + d.dw[b][cc]) - d.g[(b, cc)]);
                }
            }
        }
    }
    let m = DMatrix::from_fn(rows.len(), 27, |i, j| rows[i][j]);
    let y = DVector::from_vec(rhs);
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|s| **s > 1e-10 * smax).count();
    let x = svd.solve(&y, 1e-10 * smax).expect("svd solve");
    let r = &m * &x - &y;
    let inconsistency = r.amax() / (1.0 + y.amax());
    Solve {
        gamma: x.iter().copied().collect(),
        rank,
        inconsistency,
    }
}

/// A random expression over `u, x, y` of depth at most `depth`, using every
/// operation of the grammar.
pub fn random_expr(rng: &mut impl Rng, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.2) {
        return if rng.gen_bool(0.7) {
            Expr::var(rng.gen_range(0..3))
        } else {
            Expr::constant((rng.gen_range(-2.0..2.0_f64) * 100.0).round() / 100.0)
        };
    }
    let sub = |rng: &mut _| random_expr(rng, depth - 1);
    match rng.gen_range(0..12) {
        0 => Expr::binary(BinaryOp::Add, sub(rng), sub(rng)),
        1 => Expr::binary(BinaryOp::Sub, sub(rng), sub(rng)),
        2 | 3 => Expr::binary(BinaryOp::Mul, sub(rng), sub(rng)),
        4 => Expr::binary(BinaryOp::Div, sub(rng), sub(rng)),
        5 => Expr::pow(sub(rng), [2.0, 3.0, -1.0, 0.5, 1.5][rng.gen_range(0..5)]),
        6 => Expr::unary(UnaryOp::Neg, sub(rng)),
        7 => sub(rng).sin(),
        8 => sub(rng).cos(),
        9 => sub(rng).exp(),
        10 => [UnaryOp::Log, UnaryOp::Sqrt, UnaryOp::Tan][rng.gen_range(0..3)].apply_to(sub(rng)),
        _ => Expr::pow_expr(sub(rng), sub(rng)),
    }
}

/// A point in `[-1, 1]³` where `e` is finite and moderate on the whole
/// finite-difference stencil, and two step sizes agree; `None` if no such
/// point turns up.
pub fn nonsingular_point(e: &Expr, rng: &mut impl Rng) -> Option<[f64; 3]> {
    'search: for _ in 0..40 {
        let p: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        for k in 0..3 {
            for s in [-4.0e-3, -2.0e-3, -1.0e-3, 0.0, 1.0e-3, 2.0e-3, 4.0e-3] {
                let mut q = p;
                q[k] += s;
                match e.eval(&q) {
                    Ok(v) if v.abs() < 1e4 => {}
                    _ => continue 'search,
                }
            }
            let f = |q: [f64; 3]| e.eval(&q).unwrap();
            let h1 = (f(shift(p, k, 1e-3)) - f(shift(p, k, -1e-3))) / 2e-3;
            let h2 = (f(shift(p, k, 2e-3)) - f(shift(p, k, -2e-3))) / 4e-3;
            if (h1 - h2).abs() > 1e-3 * h1.abs().max(1.0) {
                continue 'search;
            }
        }
        return Some(p);
    }
    None
}

fn shift(mut p: [f64; 3], k: usize, s: f64) -> [f64; 3] {
    p[k] += s;
    p
}

trait ApplyTo {
    fn apply_to(self, e: Expr) -> Expr;
}

impl ApplyTo for UnaryOp {
    fn apply_to(self, e: Expr) -> Expr {
        Expr::unary(self, e)
    }
}
