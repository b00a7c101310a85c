//! Horizontal graph surfaces `u = c − h(x, y)` and their induced 2-d geometry.
//!
//! Surface tensors are indexed by `i ∈ {0, 1}` for `(x, y)`, i.e. chart
//! variables 1 and 2. Covariant derivatives append the new slot last.

use crate::carroll::{CarrollStructure, EhresmannForm};
use crate::error::{Error, Result};
use crate::expr::{DiffCache, Expr};
use crate::sample::Samples;
use crate::tolerance::{self, classify_magnitudes, ResidualStats, Tolerance, Vanishing};
use crate::verdict::{Branch, Verdict};

pub type Covector = [Expr; 2];
pub type Sym2 = [[Expr; 2]; 2];
pub type Tensor3 = [[[Expr; 2]; 2]; 2];

fn var(i: usize) -> usize {
    i + 1
}

#[derive(Debug, Clone)]
pub struct SurfaceEmbedding {
    pub h: Expr,
    pub level: f64,
}

impl SurfaceEmbedding {
    pub fn new(h: Expr, level: f64) -> Result<SurfaceEmbedding> {
        if h.depends_on(0) {
            return Err(Error::Invalid("the height function may only depend on x and y".into()));
        }
        Ok(SurfaceEmbedding { h, level })
    }

    /// `u = c − h` as an expression.
    pub fn fibre_value(&self) -> Expr {
        self.level - &self.h
    }
}

#[derive(Debug, Clone)]
pub struct InducedGeometry {
    g: Sym2,
    ginv: Sym2,
    gamma: Tensor3,
    scalar: Expr,
    volume: Expr,
}

impl InducedGeometry {
    /// Levi-Civita geometry of a 2-d metric in `(x, y)`.
    pub fn from_metric(g: Sym2, samples: &Samples) -> Result<InducedGeometry> {
        let det = &g[0][0] * &g[1][1] - &g[0][1] * &g[0][1];
        let rows = tolerance::evaluate_all(&[g[0][0].clone(), det.clone()], samples)?;
        if rows.iter().any(|r| r[0] <= 0.0 || r[1] <= 0.0) {
            return Err(Error::DegenerateMetric);
        }
        let ginv = [
            [&g[1][1] / &det, -(&g[0][1] / &det)],
            [-(&g[0][1] / &det), &g[0][0] / &det],
        ];
        let mut cache = DiffCache::new();
        let mut dg = |a: usize, b: usize, k: usize| cache.diff(&g[a][b], var(k));
        let lower: Tensor3 = std::array::from_fn(|l| {
            std::array::from_fn(|j| {
                std::array::from_fn(|k| 0.5 * (dg(l, k, j) + dg(l, j, k) - dg(j, k, l)))
            })
        });
        let gamma: Tensor3 = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                std::array::from_fn(|k| Expr::sum((0..2).map(|l| &ginv[i][l] * &lower[l][j][k])))
            })
        });
        let mut geo = InducedGeometry {
            volume: det.sqrt(),
            g,
            ginv,
            gamma,
            scalar: Expr::zero(),
        };
        let r = geo.riemann();
        let ric = |b: usize, d: usize| Expr::sum((0..2).map(|a| r[a][b][a][d].clone()));
        geo.scalar = Expr::sum(
            (0..2).flat_map(|b| (0..2).map(move |d| (b, d))).map(|(b, d)| &geo.ginv[b][d] * ric(b, d)),
        );
        Ok(geo)
    }

    /// Pulls `g` back along `u = c − h`; `g` has no `du` part, so this is
    /// substitution into the spatial block.
    pub fn induced(c: &CarrollStructure, s: &SurfaceEmbedding, samples: &Samples) -> Result<InducedGeometry> {
        let u = s.fibre_value();
        let g = c.metric();
        let pulled: Sym2 = std::array::from_fn(|i| {
            std::array::from_fn(|j| g.get(&[var(i), var(j)]).substitute(0, &u))
        });
        InducedGeometry::from_metric(pulled, samples)
    }

    /// The metric of the slice `u = u0`.
    pub fn slice(c: &CarrollStructure, u0: f64, samples: &Samples) -> Result<InducedGeometry> {
        let s = SurfaceEmbedding::new(Expr::zero(), u0)?;
        InducedGeometry::induced(c, &s, samples)
    }

    pub fn metric(&self) -> &Sym2 {
        &self.g
    }

    pub fn inverse(&self) -> &Sym2 {
        &self.ginv
    }

    pub fn christoffel(&self) -> &Tensor3 {
        &self.gamma
    }

    pub fn scalar_curvature(&self) -> &Expr {
        &self.scalar
    }

    /// `√det ḡ`.
    pub fn volume_density(&self) -> &Expr {
        &self.volume
    }

    /// `R^a_{bcd}`, the `a` component of `R(∂_c, ∂_d)∂_b`.
    pub fn riemann(&self) -> [[[[Expr; 2]; 2]; 2]; 2] {
        let mut cache = DiffCache::new();
        let gm = &self.gamma;
        std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                std::array::from_fn(|c| {
                    std::array::from_fn(|d| {
                        let mut terms = vec![
                            cache.diff(&gm[a][b][d], var(c)),
                            -cache.diff(&gm[a][b][c], var(d)),
                        ];
                        for e in 0..2 {
                            terms.push(&gm[e][b][d] * &gm[a][e][c]);
                            terms.push(-(&gm[e][b][c] * &gm[a][e][d]));
                        }
                        Expr::sum(terms)
                    })
                })
            })
        })
    }

    /// `R_{abcd} = g_{ae} R^e_{bcd}`.
    pub fn riemann_lowered(&self) -> [[[[Expr; 2]; 2]; 2]; 2] {
        let r = self.riemann();
        std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                std::array::from_fn(|c| {
                    std::array::from_fn(|d| Expr::sum((0..2).map(|e| &self.g[a][e] * &r[e][b][c][d])))
                })
            })
        })
    }

    /// Residual of `R_{abcd} = (Sc/2)(g_ac g_bd − g_ad g_bc)`.
    pub fn decomposition_residual(&self, samples: &Samples) -> Result<ResidualStats> {
        let r = self.riemann_lowered();
        let g = &self.g;
        let half = 0.5 * &self.scalar;
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        lhs.push(r[a][b][c][d].clone());
                        rhs.push(&half * (&g[a][c] * &g[b][d] - &g[a][d] * &g[b][c]));
                    }
                }
            }
        }
        tolerance::residual_stats(&lhs, &rhs, samples)
    }

    pub fn gradient(&self, f: &Expr) -> Covector {
        std::array::from_fn(|i| f.diff(var(i)))
    }

    /// `∇̄_j w_i` stored as `[i][j]`.
    pub fn nabla_covector(&self, w: &Covector) -> Sym2 {
        let mut cache = DiffCache::new();
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                cache.diff(&w[i], var(j)) - Expr::sum((0..2).map(|e| &self.gamma[e][i][j] * &w[e]))
            })
        })
    }

    /// `∇̄_c t_{ab}` stored as `[a][b][c]`.
    pub fn nabla_2(&self, t: &Sym2) -> Tensor3 {
        let mut cache = DiffCache::new();
        std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                std::array::from_fn(|c| {
                    let mut terms = vec![cache.diff(&t[a][b], var(c))];
                    for e in 0..2 {
                        terms.push(-(&self.gamma[e][a][c] * &t[e][b]));
                        terms.push(-(&self.gamma[e][b][c] * &t[a][e]));
                    }
                    Expr::sum(terms)
                })
            })
        })
    }

    /// `∇̄_{(a} w_{b)}`.
    pub fn sym_nabla(&self, w: &Covector) -> Sym2 {
        let d = self.nabla_covector(w);
        std::array::from_fn(|a| std::array::from_fn(|b| 0.5 * (&d[a][b] + &d[b][a])))
    }

    /// `∇̄∇̄ f`.
    pub fn hessian(&self, f: &Expr) -> Sym2 {
        self.sym_nabla(&self.gradient(f))
    }

    pub fn raise(&self, w: &Covector) -> Covector {
        std::array::from_fn(|i| Expr::sum((0..2).map(|j| &self.ginv[i][j] * &w[j])))
    }

    pub fn lower(&self, v: &Covector) -> Covector {
        std::array::from_fn(|i| Expr::sum((0..2).map(|j| &self.g[i][j] * &v[j])))
    }

    fn scalar_branch(&self, samples: &Samples, tol: &Tolerance) -> Result<Vanishing> {
        let vals: Vec<f64> = tolerance::evaluate_all(std::slice::from_ref(&self.scalar), samples)?
            .into_iter()
            .map(|r| r[0])
            .collect();
        let mags: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
        let branch = classify_magnitudes(&mags, tol);
        let mixed = vals.iter().any(|v| *v > 0.0) && vals.iter().any(|v| *v < 0.0);
        Ok(if branch == Vanishing::NonVanishing && mixed {
            Vanishing::Indeterminate
        } else {
            branch
        })
    }
}

fn flatten2(t: &Sym2) -> Vec<Expr> {
    t.iter().flatten().cloned().collect()
}

/// `ι*α_i = (α_i − ∂_i h)` evaluated on the surface.
pub fn pullback_form(alpha: &EhresmannForm, s: &SurfaceEmbedding) -> Covector {
    let u = s.fibre_value();
    std::array::from_fn(|i| (&alpha.spatial()[i] - s.h.diff(var(i))).substitute(0, &u))
}

/// `B = ḡ − ∇̄_{(a}(ι*α)_{b)}`.
pub fn b_tensor(geo: &InducedGeometry, pulled_alpha: &Covector) -> Sym2 {
    let s = geo.sym_nabla(pulled_alpha);
    std::array::from_fn(|a| std::array::from_fn(|b| &geo.g[a][b] - &s[a][b]))
}

/// `B` computed from the ambient data.
pub fn b_tensor_ambient(
    c: &CarrollStructure,
    alpha: &EhresmannForm,
    s: &SurfaceEmbedding,
    samples: &Samples,
) -> Result<(InducedGeometry, Sym2)> {
    let geo = InducedGeometry::induced(c, s, samples)?;
    let b = b_tensor(&geo, &pullback_form(alpha, s));
    Ok((geo, b))
}

/// Flat slice: `ι*dα` must be a constant multiple of the area form.
pub fn check_flat_case(
    geo: &InducedGeometry,
    pulled_alpha: &Covector,
    samples: &Samples,
    tol: &Tolerance,
) -> Result<Verdict> {
    if geo.scalar_branch(samples, tol)? != Vanishing::Vanishing {
        return Err(Error::WrongBranch("the flat case needs vanishing scalar curvature".into()));
    }
    let curl = pulled_alpha[1].diff(var(0)) - pulled_alpha[0].diff(var(1));
    let ratio = curl / &geo.volume;
    let values: Vec<f64> = tolerance::evaluate_all(std::slice::from_ref(&ratio), samples)?
        .into_iter()
        .map(|r| r[0])
        .collect();
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = 1.0 + max.abs().max(min.abs());
    let spread = (max - min) / scale;
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    let mut v = Verdict::new(Branch::None, tol.pass);
    v.require("ratio-spread", ResidualStats { max: spread, mean: spread });
    v.report("ratio", vec![min, mean, max]);
    Ok(v)
}

/// Curved slice: with `K_b = ḡ^{cd}(∇̄_c B_{bd} − ∇̄_b B_{cd})`, requires
/// `2∇̄_a(K_b / Sc̄) = B_{ab}`.
pub fn check_curved_case(geo: &InducedGeometry, b: &Sym2, samples: &Samples, tol: &Tolerance) -> Result<Verdict> {
    if geo.scalar_branch(samples, tol)? != Vanishing::NonVanishing {
        return Err(Error::WrongBranch(
            "the curved case needs scalar curvature of one sign bounded away from zero".into(),
        ));
    }
    let db = geo.nabla_2(b);
    let k: Covector = std::array::from_fn(|bb| {
        Expr::sum((0..2).flat_map(|c| (0..2).map(move |d| (c, d))).map(|(c, d)| {
            &geo.ginv[c][d] * (&db[bb][d][c] - &db[c][d][bb])
        }))
    });
    let w: Covector = std::array::from_fn(|i| &k[i] / &geo.scalar);
    let dw = geo.nabla_covector(&w);
    // dw[b][a] = ∇̄_a w_b
    let lhs: Vec<Expr> = (0..2)
        .flat_map(|a| (0..2).map(move |bb| (a, bb)))
        .map(|(a, bb)| 2.0 * &dw[bb][a])
        .collect();
    let stats = tolerance::residual_stats(&lhs, &flatten2(b), samples)?;
    let mut v = Verdict::new(Branch::None, tol.pass);
    v.require("curvature-constraint", stats);
    Ok(v)
}

/// Residual of `R̄_{abcd}∇̄^d h = ∇̄_a B_{bc} − ∇̄_b B_{ac}` for `B = ∇̄²h`.
pub fn bryant_residual(geo: &InducedGeometry, h: &Expr, samples: &Samples) -> Result<ResidualStats> {
    let b = geo.hessian(h);
    let db = geo.nabla_2(&b);
    let grad_up = geo.raise(&geo.gradient(h));
    let r = geo.riemann_lowered();
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for a in 0..2 {
        for bb in 0..2 {
            for c in 0..2 {
                lhs.push(Expr::sum((0..2).map(|d| &r[a][bb][c][d] * &grad_up[d])));
                rhs.push(&db[bb][c][a] - &db[a][c][bb]);
            }
        }
    }
    tolerance::residual_stats(&lhs, &rhs, samples)
}

/// Requires `∇̄_{(a}θ̄_{b)} = ḡ_{ab}`.
pub fn verify_homothety(geo: &InducedGeometry, theta: &Covector, samples: &Samples, tol: &Tolerance) -> Result<Verdict> {
    let s = geo.sym_nabla(theta);
    let stats = tolerance::residual_stats(&flatten2(&s), &flatten2(&geo.g), samples)?;
    let mut v = Verdict::new(Branch::None, tol.pass);
    v.require("homothety", stats);
    Ok(v)
}

/// Requires `ξ♭` to satisfy Killing's equation and be closed.
pub fn verify_vorticity_free_killing(
    geo: &InducedGeometry,
    xi: &Covector,
    samples: &Samples,
    tol: &Tolerance,
) -> Result<Verdict> {
    let flat = geo.lower(xi);
    let killing = tolerance::vanishing_stats(&flatten2(&geo.sym_nabla(&flat)), samples)?;
    let curl = flat[1].diff(var(0)) - flat[0].diff(var(1));
    let vorticity = tolerance::vanishing_stats(&[curl], samples)?;
    let mut v = Verdict::new(Branch::None, tol.pass);
    v.require("killing", killing).require("vorticity", vorticity);
    Ok(v)
}
