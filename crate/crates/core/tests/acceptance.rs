//! Acceptance criteria, one test each. Every test prints a PASS/FAIL line.
//! Run with `cargo test --test acceptance -- --nocapture --test-threads 1`.

mod common;

use carroll_forge::carroll::{
    boost_to_principal, lie_identity_residual, minimal_torsion, torsion_trace, CarrollStructure, EhresmannForm, Role,
};
use carroll_forge::classify::{check_minimal, classify_pcs, classify_scm};
use carroll_forge::connection::{
    basis_consistency, build_pcs, build_scm, ell_residual, pcs_postconditions, scm_postconditions, AffineConnection,
    Provenance,
};
use carroll_forge::expr::{DiffCache, Expr};
use carroll_forge::geometry::{change_basis, Basis, Chart, Direction, Frame, TensorField};
use carroll_forge::surface::{self, InducedGeometry, SurfaceEmbedding};
use carroll_forge::tolerance::{self, Tolerance};
use carroll_forge::verdict::Branch;
use common::{gallery, report, Case, Kind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 2024;

fn tol() -> Tolerance {
    Tolerance::default()
}

fn built(case: &Case, n: usize) -> (AffineConnection, AffineConnection) {
    let s = case.chart.samples(n, SEED);
    let scm = build_scm(&case.c, &case.nu, &s, &tol()).unwrap();
    let pcs = build_pcs(&case.c, &case.alpha, &s).unwrap();
    (scm, pcs)
}

#[test]
fn criterion_1_builder_closure() {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for case in gallery() {
        let s = case.chart.samples(64, SEED);
        let (scm, pcs) = built(&case, 64);
        let a = scm_postconditions(&scm, &case.c, &case.nu, &s).unwrap();
        let b = pcs_postconditions(&pcs, &case.c, &case.alpha, &s).unwrap();
        for (kind, p) in [("scm", a), ("pcs", b)] {
            let r = p.metric.max(p.ell).max(p.form);
            println!("  {:<10} {kind}: nabla-g {:.2e} nabla-ell {:.2e} form {:.2e}", case.name, p.metric, p.ell, p.form);
            worst = worst.max(r);
            if r >= 1e-9 {
                failures.push(format!("{} {kind} ({r:.3e})", case.name));
            }
        }
    }
    report(
        1,
        "builder closure on the gallery, 64 points, < 1e-9",
        failures.is_empty(),
        &format!("worst {worst:.3e}; failing: {failures:?}"),
    );
}

#[test]
fn criterion_2_uniqueness_oracle() {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for case in gallery() {
        let (scm, pcs) = built(&case, 16);
        let points = case.chart.samples(16, SEED + 1);
        for (kind, conn, form) in [(Kind::Scm, &scm, &case.nu), (Kind::Pcs, &pcs, &case.alpha)] {
            let mut case_worst: f64 = 0.0;
            let mut rank = 27;
            let mut inconsistency: f64 = 0.0;
            for p in points.points() {
                let sol = common::solve_connection(kind, &case.c, form, *p);
                rank = rank.min(sol.rank);
                inconsistency = inconsistency.max(sol.inconsistency);
                for (k, g) in conn.coordinate().components().iter().enumerate() {
                    case_worst = case_worst.max(common::rel(g.eval(p).unwrap(), sol.gamma[k]));
                }
            }
            println!(
                "  {:<10} {kind:?}: rank {rank} system residual {inconsistency:.2e} max diff {case_worst:.2e}",
                case.name
            );
            worst = worst.max(case_worst);
            if rank != 27 || case_worst >= 1e-8 {
                failures.push(format!("{} {kind:?} (rank {rank}, diff {case_worst:.3e})", case.name));
            }
        }
    }
    report(
        2,
        "linear-system Γ agrees with the builders at 16 points, < 1e-8",
        failures.is_empty(),
        &format!("worst {worst:.3e}; failing: {failures:?}"),
    );
}

#[test]
fn criterion_3_torsion_identity_and_perturbation() {
    let mut worst: f64 = 0.0;
    for case in gallery() {
        let s = case.chart.samples(32, SEED);
        let (scm, pcs) = built(&case, 32);
        for (conn, form) in [(&scm, &case.nu), (&pcs, &case.alpha)] {
            let r = lie_identity_residual(&conn.torsion(), &case.c, form, conn.frame(), &s).unwrap();
            worst = worst.max(r);
        }
    }
    let case = common::load("expanding");
    let s = case.chart.samples(32, SEED);
    let (_, pcs) = built(&case, 32);
    let mut coords = pcs.coordinate().clone();
    // Γ^x_{ux}: breaks ∇ℓ = 0
    let idx = [1, 0, 1];
    coords.set(&idx, coords.get(&idx) + 1e-3);
    let broken = AffineConnection::new(coords, pcs.frame().clone(), Provenance::UserSupplied).unwrap();
    let ell = ell_residual(&broken, &s).unwrap();
    let identity = lie_identity_residual(&broken.torsion(), &case.c, &case.alpha, broken.frame(), &s).unwrap();
    let detected = ell.max(identity);
    report(
        3,
        "torsion identity < 1e-9 on built connections; ε = 1e-3 break detected (> 1e-4)",
        worst < 1e-9 && detected > 1e-4,
        &format!("identity worst {worst:.3e}; broken: nabla-ell {ell:.3e}, identity {identity:.3e}"),
    );
}

#[test]
fn criterion_4_minimal_torsion_expanding() {
    let case = common::load("expanding");
    let s = case.chart.samples(64, SEED);
    let f = Frame::build(&case.c, &case.alpha, &s).unwrap();
    let t = minimal_torsion(&case.c, &case.alpha, &f).unwrap();
    let minimal = check_minimal(&case.c, &case.alpha, t.coordinate(), &s, &tol()).unwrap();
    // 2 e₂⊗θ¹∧θ² + 2 e₃⊗θ¹∧θ³ with θ^A∧θ^B = ½(θ^A⊗θ^B − θ^B⊗θ^A)
    let expected = TensorField::from_fn(1, 2, Basis::Frame, |i| match (i[0], i[1], i[2]) {
        (1, 0, 1) | (2, 0, 2) => Expr::one(),
        (1, 1, 0) | (2, 2, 0) => -Expr::one(),
        _ => Expr::zero(),
    });
    let shape = t.frame().residual(&expected, &s).unwrap().max;
    let tr = torsion_trace(&t, &case.c, &case.alpha, &f, &s, &tol()).unwrap();
    let v_ell = tolerance::residual_stats(std::slice::from_ref(&tr.v_on_ell), &[Expr::constant(2.0)], &s)
        .unwrap()
        .max;
    let du = TensorField::from_fn(0, 1, Basis::Coordinate, |i| if i[0] == 0 { Expr::one() } else { Expr::zero() });
    let gamma = match &tr.gamma {
        Some(g) => {
            let coord = change_basis(g, &f, Direction::ToCoordinate).unwrap();
            coord.residual(&du, &s).unwrap().max
        }
        None => f64::INFINITY,
    };
    let ok = minimal.outcome && shape < 1e-9 && v_ell < 1e-9 && gamma < 1e-9;
    report(
        4,
        "minimal torsion on the e^u spec, V(ℓ) = 2, γ = du",
        ok,
        &format!("check_minimal {}; shape {shape:.3e}; V(ℓ) {v_ell:.3e}; γ {gamma:.3e}", minimal.outcome),
    );
}

fn expected_branch(case: &Case, form: &EhresmannForm, s: &carroll_forge::sample::Samples) -> Branch {
    let f = Frame::build(&case.c, form, s).unwrap();
    let t = minimal_torsion(&case.c, form, &f).unwrap();
    if tolerance::vanishing_stats(t.frame().components(), s).unwrap().max < 1e-9 {
        return Branch::TorsionFree;
    }
    match torsion_trace(&t, &case.c, form, &f, s, &tol()).unwrap().branch {
        tolerance::Vanishing::NonVanishing => Branch::TraceNonzero,
        _ => Branch::TraceHorizontalOrZero,
    }
}

#[test]
fn criterion_5_classifier_closure_and_exclusion() {
    let mut failures = Vec::new();
    for case in gallery() {
        let s = case.chart.samples(64, SEED);
        let (scm, pcs) = built(&case, 64);
        let checks = [
            ("scm", classify_scm(&case.c, &case.nu, &scm, &s, &tol()), expected_branch(&case, &case.nu, &s)),
            ("pcs", classify_pcs(&case.c, &case.alpha, &pcs, &s, &tol()), expected_branch(&case, &case.alpha, &s)),
        ];
        for (kind, verdict, want) in checks {
            match verdict {
                Ok(v) => {
                    println!(
                        "  {:<10} {kind}: outcome {} branch {} (trace says {})",
                        case.name,
                        v.outcome,
                        v.branch.label(),
                        want.label()
                    );
                    if !v.outcome || v.branch != want {
                        let worst = v.residuals.iter().filter(|r| r.decisive).map(|r| r.max).fold(0.0, f64::max);
                        failures.push(format!("{} {kind} (worst residual {worst:.3e})", case.name));
                    }
                }
                Err(e) => failures.push(format!("{} {kind}: {e}", case.name)),
            }
        }
    }
    let flat = common::load("flat");
    let s = flat.chart.samples(64, SEED);
    let (scm, pcs) = built(&flat, 64);
    let scm_on_pcs = classify_scm(&flat.c, &flat.nu, &pcs, &s, &tol()).map(|v| v.outcome);
    let pcs_on_scm = classify_pcs(&flat.c, &flat.alpha, &scm, &s, &tol()).map(|v| v.outcome);
    println!("  flat cross: classify_scm(PCS) {scm_on_pcs:?}, classify_pcs(SCM) {pcs_on_scm:?}");
    if !matches!(scm_on_pcs, Ok(false)) {
        failures.push("flat: classify_scm accepted the PCS".into());
    }
    if !matches!(pcs_on_scm, Ok(false)) {
        failures.push("flat: classify_pcs accepted the SCM".into());
    }
    report(
        5,
        "classifiers accept their own builder, reject the other, branch matches trace",
        failures.is_empty(),
        &format!("failing: {failures:?}"),
    );
}

#[test]
fn criterion_6_boost() {
    let chart = Chart::standard([(0.0, 2.0), (-1.0, 1.0), (-1.0, 1.0)]).unwrap();
    let s = chart.samples(64, SEED);
    let omega = EhresmannForm::parse(&chart, ["u*x", "0"], Role::Generic).unwrap();
    let nu = boost_to_principal(&omega, &chart);
    let lie = nu.principal_residual(&s).unwrap();
    let want = [chart.parse("x").unwrap(), Expr::zero()];
    let shape = tolerance::residual_stats(nu.spatial(), &want, &s).unwrap().max;
    report(
        6,
        "boost of du + u·x dx is principal and equals du + x dx",
        lie < 1e-12 && shape < 1e-12,
        &format!("L_ℓν {lie:.3e}; ν − (du + x dx) {shape:.3e}"),
    );
}

fn flat_slice(w: [&str; 2]) -> (Chart, InducedGeometry, surface::Covector) {
    let chart = Chart::standard([(0.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)]).unwrap();
    let s = chart.samples(64, SEED);
    let c = CarrollStructure::parse(chart.clone(), ["1", "0", "1"]).unwrap();
    let alpha = EhresmannForm::parse(&chart, w, Role::Generic).unwrap();
    let emb = SurfaceEmbedding::new(Expr::zero(), 0.5).unwrap();
    let geo = InducedGeometry::induced(&c, &emb, &s).unwrap();
    let pulled = surface::pullback_form(&alpha, &emb);
    (chart, geo, pulled)
}

#[test]
fn criterion_7_surface_suite() {
    let t = tol();
    let mut failures = Vec::new();

    let (chart, geo, pulled) = flat_slice(["-y/2", "x/2"]);
    let s = chart.samples(64, SEED);
    let v = surface::check_flat_case(&geo, &pulled, &s, &t).unwrap();
    let ratio = v.reported("ratio").unwrap().to_vec();
    println!("  flat case, du + (x dy − y dx)/2: outcome {} ratio {ratio:?}", v.outcome);
    if !v.outcome || ratio.iter().any(|r| (r - 1.0).abs() > 1e-12) {
        failures.push("heisenberg flat case".to_string());
    }

    let (_, geo, pulled) = flat_slice(["0", "x^2"]);
    let v = surface::check_flat_case(&geo, &pulled, &s, &t).unwrap();
    let ratio = v.reported("ratio").unwrap().to_vec();
    let xs: Vec<f64> = s.points().iter().map(|p| 2.0 * p[1]).collect();
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!("  flat case, du + x² dy: outcome {} ratio {ratio:?}, 2x range [{lo:.4}, {hi:.4}]", v.outcome);
    if v.outcome || (ratio[0] - lo).abs() > 1e-12 || (ratio[2] - hi).abs() > 1e-12 {
        failures.push("quadratic flat case".to_string());
    }

    let sphere = Chart::standard([(0.0, 1.0), (0.5, 2.5), (0.0, 6.0)]).unwrap();
    let ss = sphere.samples(64, SEED);
    let c = CarrollStructure::parse(sphere.clone(), ["1", "0", "sin(x)"]).unwrap();
    let sgeo = InducedGeometry::slice(&c, 0.5, &ss).unwrap();
    let v = surface::check_curved_case(&sgeo, sgeo.metric(), &ss, &t).unwrap();
    let r = v.residual("curvature-constraint").unwrap().max;
    println!("  curved case, B = ḡ on the sphere: outcome {} residual {r:.3e}", v.outcome);
    if v.outcome {
        failures.push("curved case accepted B = ḡ".to_string());
    }
    let hess = sgeo.hessian(&sphere.parse("cos(x)").unwrap());
    let control = surface::check_curved_case(&sgeo, &hess, &ss, &t).unwrap();
    println!(
        "  curved case control, B = ∇̄²cos x: outcome {} residual {:.3e}",
        control.outcome,
        control.residual("curvature-constraint").unwrap().max
    );

    let (chart, geo, _) = flat_slice(["0", "0"]);
    let theta = [chart.parse("x").unwrap(), chart.parse("y").unwrap()];
    let v = surface::verify_homothety(&geo, &theta, &s, &t).unwrap();
    let r = v.residual("homothety").unwrap().max;
    println!("  homothety x dx + y dy on the flat slice: residual {r:.3e}");
    if !(v.outcome && r < 1e-10) {
        failures.push("flat homothety".to_string());
    }

    let mut candidates: Vec<[String; 2]> = [
        ["cos(x)", "0"],
        ["-sin(x)", "0"],
        ["x", "0"],
        ["0", "sin(x)^2"],
        ["sin(x)*cos(x)", "0"],
        ["0", "sin(x)*cos(x)"],
        ["tan(x)", "y"],
        ["1", "1"],
    ]
    .iter()
    .map(|[a, b]| [a.to_string(), b.to_string()])
    .collect();
    let basis = ["cos(x)", "sin(x)", "x", "1", "sin(x)^2", "sin(x)*cos(x)", "y"];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for _ in 0..24 {
        let mut comp = || {
            let terms: Vec<String> = basis
                .iter()
                .map(|b| format!("({:.6})*{b}", rng.gen_range(-2.0..2.0)))
                .collect();
            terms.join(" + ")
        };
        candidates.push([comp(), comp()]);
    }
    let mut least: f64 = f64::INFINITY;
    let mut accepted = 0;
    for [a, b] in &candidates {
        let th = [sphere.parse(a).unwrap(), sphere.parse(b).unwrap()];
        let v = surface::verify_homothety(&sgeo, &th, &ss, &t).unwrap();
        least = least.min(v.residual("homothety").unwrap().max);
        if v.outcome {
            accepted += 1;
        }
    }
    println!("  sphere family: {} candidates, {accepted} accepted, smallest residual {least:.3e}", candidates.len());
    if accepted > 0 {
        failures.push(format!("{accepted} sphere homotheties accepted"));
    }

    report(
        7,
        "surface flat/curved/homothety suite",
        failures.is_empty(),
        &format!("failing: {failures:?}"),
    );
}

#[test]
fn criterion_8_cross_representation() {
    let mut worst_t: f64 = 0.0;
    let mut worst_r: f64 = 0.0;
    let mut worst_d: f64 = 0.0;
    for case in gallery() {
        let s = case.chart.samples(64, SEED);
        let (scm, pcs) = built(&case, 64);
        for conn in [&scm, &pcs] {
            let t = conn.torsion();
            worst_t = worst_t.max(basis_consistency(t.coordinate(), t.frame(), conn.frame(), &s).unwrap());
            let r = conn.curvature();
            worst_r = worst_r.max(basis_consistency(&r.coordinate, &r.frame, conn.frame(), &s).unwrap());
        }
        let geo = InducedGeometry::slice(&case.c, case.chart.fibre_midpoint(), &s).unwrap();
        worst_d = worst_d.max(geo.decomposition_residual(&s).unwrap().max);
        let tilted = SurfaceEmbedding::new(case.chart.parse("0.2*x*y").unwrap(), 0.5).unwrap();
        let geo = InducedGeometry::induced(&case.c, &tilted, &s).unwrap();
        worst_d = worst_d.max(geo.decomposition_residual(&s).unwrap().max);
    }
    report(
        8,
        "coordinate vs frame torsion/curvature, 2-d decomposition, < 1e-9",
        worst_t < 1e-9 && worst_r < 1e-9 && worst_d < 1e-9,
        &format!("torsion {worst_t:.3e}; curvature {worst_r:.3e}; decomposition {worst_d:.3e}"),
    );
}

#[test]
fn criterion_9_derivative_engine() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut cache = DiffCache::new();
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    while checked < 200 {
        let e = common::random_expr(&mut rng, 5);
        let var = rng.gen_range(0..3);
        let Some(p) = common::nonsingular_point(&e, &mut rng) else {
            continue;
        };
        let d = cache.diff(&e, var).eval(&p).unwrap();
        let fd = common::fd(&|q| e.eval(&q).unwrap_or(f64::NAN), p, var);
        let err = (d - fd).abs() / d.abs().max(1.0);
        worst = worst.max(err);
        if err.is_nan() || err >= 1e-5 {
            failures.push(format!("{} at {p:?}: {d} vs {fd}", e.display(&["u", "x", "y"])));
        }
        checked += 1;
    }
    report(
        9,
        "symbolic derivatives of 200 random expressions match finite differences, 1e-5 relative",
        failures.is_empty(),
        &format!("worst {worst:.3e}; failing: {failures:?}"),
    );
}
