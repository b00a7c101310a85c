//! Carrollian structures, Ehresmann forms, boosts and the minimal torsion.

use crate::error::{Error, Result};
use crate::expr::{DiffCache, Expr};
use crate::geometry::{
    change_basis, lie_derivative_along_ell, Basis, Chart, Direction, Frame, Symmetry, TensorField,
    DIM,
};
use crate::sample::Samples;
use crate::tolerance::{self, classify_magnitudes, Tolerance, Vanishing};

/// A degenerate metric `g = δ_IJ m^I m^J` with kernel `ℓ = ∂_u`, given by the
/// upper-triangular spatial coframe `m¹ = m11 dx`, `m² = m21 dx + m22 dy`.
#[derive(Debug, Clone)]
pub struct CarrollStructure {
    chart: Chart,
    m: [Expr; 3],
}

impl CarrollStructure {
    pub fn new(chart: Chart, m11: Expr, m21: Expr, m22: Expr) -> CarrollStructure {
        CarrollStructure {
            chart,
            m: [m11, m21, m22],
        }
    }

    pub fn parse(chart: Chart, m: [&str; 3]) -> Result<CarrollStructure> {
        let [a, b, c] = m.map(|t| chart.parse(t));
        Ok(CarrollStructure::new(chart, a?, b?, c?))
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// `[m11, m21, m22]`.
    pub fn coframe(&self) -> &[Expr; 3] {
        &self.m
    }

    /// Coordinate components `g_ab`; the `u` row and column vanish.
    pub fn metric(&self) -> TensorField {
        let [m11, m21, m22] = &self.m;
        let gxx = m11 * m11 + m21 * m21;
        let gxy = m21 * m22;
        let gyy = m22 * m22;
        let mut g = TensorField::zeros(0, 2, Basis::Coordinate);
        g.set(&[1, 1], gxx);
        g.set(&[1, 2], gxy.clone());
        g.set(&[2, 1], gxy);
        g.set(&[2, 2], gyy);
        g.with_symmetry(Symmetry::Symmetric(0, 1))
    }

    /// Inverse of the spatial block of `g`, as `[[g^xx, g^xy], [g^xy, g^yy]]`.
    pub fn inverse_spatial_metric(&self) -> [[Expr; 2]; 2] {
        let [m11, m21, m22] = &self.m;
        // M⁻¹ = [[1/m11, 0], [-m21/(m11 m22), 1/m22]], g⁻¹ = M⁻¹ M⁻ᵀ
        let a = 1.0 / m11;
        let b = -(m21 / (m11 * m22));
        let d = 1.0 / m22;
        let xy = &a * &b;
        [[&a * &a, xy.clone()], [xy, &b * &b + &d * &d]]
    }

    /// Requires `m11 > 0` and `m22 > 0` at every sample point.
    pub fn check_signature(&self, samples: &Samples) -> Result<()> {
        let rows = tolerance::evaluate_all(&[self.m[0].clone(), self.m[2].clone()], samples)?;
        for r in rows {
            if r[0] <= 0.0 {
                return Err(Error::DegenerateCoframe("m11"));
            }
            if r[1] <= 0.0 {
                return Err(Error::DegenerateCoframe("m22"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Generic,
    Principal,
    PotentialCandidate,
}

impl Role {
    pub fn from_name(name: &str) -> Option<Role> {
        Some(match name {
            "generic" => Role::Generic,
            "principal" => Role::Principal,
            "potential-candidate" => Role::PotentialCandidate,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Generic => "generic",
            Role::Principal => "principal",
            Role::PotentialCandidate => "potential-candidate",
        }
    }
}

/// `ω = du + ω₁ dx + ω₂ dy`, so `ω(ℓ) = 1` by construction.
#[derive(Debug, Clone)]
pub struct EhresmannForm {
    w: [Expr; 2],
    role: Role,
}

impl EhresmannForm {
    pub fn new(w1: Expr, w2: Expr, role: Role) -> EhresmannForm {
        EhresmannForm { w: [w1, w2], role }
    }

    pub fn parse(chart: &Chart, w: [&str; 2], role: Role) -> Result<EhresmannForm> {
        Ok(EhresmannForm::new(chart.parse(w[0])?, chart.parse(w[1])?, role))
    }

    /// `[ω₁, ω₂]`.
    pub fn spatial(&self) -> &[Expr; 2] {
        &self.w
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn with_role(&self, role: Role) -> EhresmannForm {
        EhresmannForm {
            w: self.w.clone(),
            role,
        }
    }

    /// Coordinate components `(1, ω₁, ω₂)`.
    pub fn form(&self) -> TensorField {
        TensorField::from_fn(0, 1, Basis::Coordinate, |i| match i[0] {
            0 => Expr::one(),
            k => self.w[k - 1].clone(),
        })
    }

    /// Largest `|∂_u ω_i|` over the samples.
    pub fn principal_residual(&self, samples: &Samples) -> Result<f64> {
        let d: Vec<Expr> = self.w.iter().map(|w| w.diff(0)).collect();
        Ok(tolerance::vanishing_stats(&d, samples)?.max)
    }

    /// Checks the role's requirement; only the principal role constrains `ω`.
    pub fn validate(&self, samples: &Samples, tol: &Tolerance) -> Result<()> {
        if self.role == Role::Principal {
            let residual = self.principal_residual(samples)?;
            if residual >= tol.vanish {
                return Err(Error::NotPrincipal { residual });
            }
        }
        Ok(())
    }
}

/// Boosts `ω` to a principal form by freezing its spatial part at the
/// midpoint `u₀` of the fibre interval: `ν_i(x, y) = ω_i(u₀, x, y)`.
pub fn boost_to_principal(ehr: &EhresmannForm, chart: &Chart) -> EhresmannForm {
    let u0 = Expr::constant(chart.fibre_midpoint());
    let [w1, w2] = ehr.spatial();
    EhresmannForm::new(w1.substitute(0, &u0), w2.substitute(0, &u0), Role::Principal)
}

/// A (1,2) tensor antisymmetric in its lower pair, kept in both bases.
#[derive(Debug, Clone)]
pub struct TorsionTensor {
    coordinate: TensorField,
    frame: TensorField,
}

impl TorsionTensor {
    pub fn from_frame(frame_field: TensorField, f: &Frame) -> Result<TorsionTensor> {
        let coordinate = change_basis(&frame_field, f, Direction::ToCoordinate)?;
        Ok(TorsionTensor {
            coordinate: coordinate.with_symmetry(Symmetry::Antisymmetric(1, 2)),
            frame: frame_field.with_symmetry(Symmetry::Antisymmetric(1, 2)),
        })
    }

    pub fn from_coordinate(coordinate: TensorField, f: &Frame) -> Result<TorsionTensor> {
        let frame = change_basis(&coordinate, f, Direction::ToFrame)?;
        Ok(TorsionTensor {
            coordinate: coordinate.with_symmetry(Symmetry::Antisymmetric(1, 2)),
            frame: frame.with_symmetry(Symmetry::Antisymmetric(1, 2)),
        })
    }

    pub(crate) fn from_parts(coordinate: TensorField, frame: TensorField) -> TorsionTensor {
        TorsionTensor {
            coordinate: coordinate.with_symmetry(Symmetry::Antisymmetric(1, 2)),
            frame: frame.with_symmetry(Symmetry::Antisymmetric(1, 2)),
        }
    }

    pub fn coordinate(&self) -> &TensorField {
        &self.coordinate
    }

    pub fn frame(&self) -> &TensorField {
        &self.frame
    }

    /// `T^A_{BC}` in the frame.
    pub fn get(&self, a: usize, b: usize, c: usize) -> &Expr {
        self.frame.get(&[a, b, c])
    }
}

/// Frame components of `L_ℓ g` and `L_ℓ ω`.
pub fn lie_data(c: &CarrollStructure, ehr: &EhresmannForm, f: &Frame) -> Result<(TensorField, TensorField)> {
    let lg = change_basis(&lie_derivative_along_ell(&c.metric())?, f, Direction::ToFrame)?;
    let lw = change_basis(&lie_derivative_along_ell(&ehr.form())?, f, Direction::ToFrame)?;
    Ok((lg, lw))
}

/// The unique minimal torsion: `T^1_{1I} = (L_ℓω)_I`, `T^J_{1I} = ½(L_ℓg)_{IJ}`,
/// antisymmetric in the lower pair, with no purely spatial part.
pub fn minimal_torsion(c: &CarrollStructure, ehr: &EhresmannForm, f: &Frame) -> Result<TorsionTensor> {
    let (lg, lw) = lie_data(c, ehr, f)?;
    let mut t = TensorField::zeros(1, 2, Basis::Frame);
    for i in 1..DIM {
        t.set(&[0, 0, i], lw.get(&[i]).clone());
        t.set(&[0, i, 0], -lw.get(&[i]));
        for j in 1..DIM {
            let half = 0.5 * lg.get(&[i, j]);
            t.set(&[j, i, 0], -&half);
            t.set(&[j, 0, i], half);
        }
    }
    TorsionTensor::from_frame(t, f)
}

#[derive(Debug, Clone)]
pub struct TorsionTrace {
    /// Frame components of `V`.
    pub v: TensorField,
    pub v_on_ell: Expr,
    /// `(V − L_ℓω)/V(ℓ)` in the frame, present on the `V(ℓ) ≠ 0` branch.
    pub gamma: Option<TensorField>,
    pub branch: Vanishing,
}

/// `V(ℓ) = Σ_I T^I_{1I}` and `V(e_I) = T^B_{BI}`, classified over the grid.
pub fn torsion_trace(
    t: &TorsionTensor,
    c: &CarrollStructure,
    ehr: &EhresmannForm,
    f: &Frame,
    samples: &Samples,
    tol: &Tolerance,
) -> Result<TorsionTrace> {
    let v_on_ell = Expr::sum((1..DIM).map(|i| t.get(i, 0, i).clone()));
    let v = TensorField::from_fn(0, 1, Basis::Frame, |i| match i[0] {
        0 => v_on_ell.clone(),
        a => Expr::sum((0..DIM).map(|b| t.get(b, b, a).clone())),
    });
    let values: Vec<f64> = tolerance::evaluate_all(std::slice::from_ref(&v_on_ell), samples)?
        .into_iter()
        .map(|r| r[0])
        .collect();
    let mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let mut branch = classify_magnitudes(&mags, tol);
    let mixed_sign = values.iter().any(|v| *v > 0.0) && values.iter().any(|v| *v < 0.0);
    if branch == Vanishing::NonVanishing && mixed_sign {
        branch = Vanishing::Indeterminate;
    }
    let gamma = match branch {
        Vanishing::Indeterminate => return Err(Error::IndeterminateBranch { quantity: "V(ℓ)" }),
        Vanishing::Vanishing => None,
        Vanishing::NonVanishing => {
            let (_, lw) = lie_data(c, ehr, f)?;
            Some(v.sub(&lw)?.map(|x| x / &v_on_ell))
        }
    };
    Ok(TorsionTrace {
        v,
        v_on_ell,
        gamma,
        branch,
    })
}

/// Residual of `(L_ℓg)(X,Y) = g(T(ℓ,X),Y) + g(X,T(ℓ,Y))` over frame vectors.
pub fn lie_identity_residual(
    t: &TorsionTensor,
    c: &CarrollStructure,
    ehr: &EhresmannForm,
    f: &Frame,
    samples: &Samples,
) -> Result<f64> {
    let (lg, _) = lie_data(c, ehr, f)?;
    let g = change_basis(&c.metric(), f, Direction::ToFrame)?;
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for x in 0..DIM {
        for y in 0..DIM {
            lhs.push(lg.get(&[x, y]).clone());
            rhs.push(Expr::sum((0..DIM).map(|a| {
                t.get(a, 0, x) * g.get(&[a, y]) + g.get(&[x, a]) * t.get(a, 0, y)
            })));
        }
    }
    Ok(tolerance::residual_stats(&lhs, &rhs, samples)?.max)
}

/// Residual of a candidate torsion (frame basis) against the minimal one.
pub fn minimality_residual(candidate: &TensorField, minimal: &TorsionTensor, samples: &Samples) -> Result<f64> {
    Ok(candidate.residual(minimal.frame(), samples)?.max)
}

/// `e_A(f)` for each frame vector, sharing one derivative cache.
pub fn frame_gradient(f: &Frame, s: &Expr, cache: &mut DiffCache) -> [Expr; 3] {
    std::array::from_fn(|a| f.apply(a, s, cache))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(m: [&str; 3], w: [&str; 2], u: (f64, f64)) -> (CarrollStructure, EhresmannForm, Frame, Samples) {
        let ch = Chart::standard([u, (-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let s = ch.samples(24, 3);
        let c = CarrollStructure::parse(ch.clone(), m).unwrap();
        let ehr = EhresmannForm::parse(&ch, w, Role::Generic).unwrap();
        let f = Frame::build(&c, &ehr, &s).unwrap();
        (c, ehr, f, s)
    }

    fn val(e: &Expr) -> f64 {
        e.eval(&[0.3, 0.2, -0.1]).unwrap()
    }

    #[test]
    fn boosts() {
        let ch = Chart::standard([(0.0, 2.0), (-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let s = ch.samples(16, 0);
        let ehr = EhresmannForm::parse(&ch, ["u*x", "0"], Role::Generic).unwrap();
        let nu = boost_to_principal(&ehr, &ch);
        assert_eq!(nu.role(), Role::Principal);
        assert_eq!(nu.spatial()[0].eval(&[0.3, 0.7, 0.0]).unwrap(), 0.7);
        nu.validate(&s, &Tolerance::default()).unwrap();

        let ehr = EhresmannForm::parse(&ch, ["0", "sin(u)"], Role::Generic).unwrap();
        let nu = boost_to_principal(&ehr, &ch);
        assert!(nu.principal_residual(&s).unwrap() < 1e-12);
        assert_eq!(nu.spatial()[1].eval(&[0.0, 0.0, 0.0]).unwrap(), 1f64.sin());

        let bad = ehr.with_role(Role::Principal);
        assert!(matches!(bad.validate(&s, &Tolerance::default()), Err(Error::NotPrincipal { .. })));
    }

    #[test]
    fn flat_torsion_vanishes() {
        let (c, ehr, f, s) = build(["1", "0", "1"], ["0", "0"], (0.0, 1.0));
        let t = minimal_torsion(&c, &ehr, &f).unwrap();
        assert_eq!(t.frame().norm_residual(&s).unwrap().max, 0.0);
        let tr = torsion_trace(&t, &c, &ehr, &f, &s, &Tolerance::default()).unwrap();
        assert_eq!(tr.branch, Vanishing::Vanishing);
        assert!(tr.gamma.is_none());
    }

    #[test]
    fn expanding_torsion_and_trace() {
        let (c, ehr, f, s) = build(["exp(u)", "0", "exp(u)"], ["0", "0"], (0.0, 1.0));
        let t = minimal_torsion(&c, &ehr, &f).unwrap();
        // 2 e₂⊗θ¹∧θ² with θ¹∧θ² = ½(θ¹⊗θ² − θ²⊗θ¹)
        assert!((val(t.get(1, 0, 1)) - 1.0).abs() < 1e-13);
        assert!((val(t.get(2, 0, 2)) + val(t.get(2, 2, 0))).abs() < 1e-13);
        assert!(val(t.get(1, 0, 2)).abs() < 1e-13);
        assert!(t.frame().symmetry_residual(&s).unwrap().max < 1e-13);
        let tr = torsion_trace(&t, &c, &ehr, &f, &s, &Tolerance::default()).unwrap();
        assert!((val(&tr.v_on_ell) - 2.0).abs() < 1e-13);
        let gamma = tr.gamma.unwrap();
        let omega = change_basis(&ehr.form(), &f, Direction::ToFrame).unwrap();
        assert!(gamma.residual(&omega, &s).unwrap().max < 1e-12);
        assert!(lie_identity_residual(&t, &c, &ehr, &f, &s).unwrap() < 1e-12);
    }

    #[test]
    fn drifting_torsion_and_trace() {
        let (c, ehr, f, s) = build(["1", "0", "1"], ["0", "u"], (0.0, 1.0));
        let t = minimal_torsion(&c, &ehr, &f).unwrap();
        assert!((val(t.get(0, 0, 2)) - 1.0).abs() < 1e-13);
        let tr = torsion_trace(&t, &c, &ehr, &f, &s, &Tolerance::default()).unwrap();
        assert_eq!(tr.branch, Vanishing::Vanishing);
        assert!((val(tr.v.get(&[2])) - 1.0).abs() < 1e-13);
        assert!(val(tr.v.get(&[1])).abs() < 1e-13);
    }

    #[test]
    fn mixed_sign_trace_is_indeterminate() {
        let (c, ehr, f, s) = build(["exp(u*x)", "0", "1"], ["0", "0"], (0.0, 1.0));
        let t = minimal_torsion(&c, &ehr, &f).unwrap();
        let err = torsion_trace(&t, &c, &ehr, &f, &s, &Tolerance::default()).unwrap_err();
        assert!(matches!(err, Error::IndeterminateBranch { .. }));
    }

    #[test]
    fn sheared_cross_term() {
        let (c, ehr, f, s) = build(["1", "u", "1"], ["0", "0"], (0.0, 1.0));
        let t = minimal_torsion(&c, &ehr, &f).unwrap();
        // (L_ℓg)_{23} = 1, shared between T³_{12} and T²_{13}
        assert!((val(t.get(2, 0, 1)) - 0.5).abs() < 1e-13);
        assert!((val(t.get(1, 0, 2)) - 0.5).abs() < 1e-13);
        assert!(lie_identity_residual(&t, &c, &ehr, &f, &s).unwrap() < 1e-12);
    }
}
