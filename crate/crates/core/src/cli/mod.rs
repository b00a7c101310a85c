//! Command-line front end: `carroll-forge <command> [scm|pcs] SPEC [flags]`.
//!
//! Exit codes: 0 when every verdict passes, 1 when some verdict fails, 2 on
//! errors (bad input, violated hypotheses, indeterminate branches).

mod report;
mod spec;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::carroll::{boost_to_principal, minimal_torsion, torsion_trace, CarrollStructure, EhresmannForm, Role};
use crate::classify;
use crate::connection::{self, build_pcs, build_scm, symmetrize, AffineConnection};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{change_basis, indices, Chart, Direction, Frame, TensorField};
use crate::sample::Samples;
use crate::surface::{self, InducedGeometry};
use crate::tolerance::{self, Tolerance, Vanishing};
use crate::verdict::{Branch, Verdict};

pub use report::{round, Ordered, Report, Sampled, Stat, VerdictReport, VerdictResidual};
pub use spec::{split_top_level, SpecFile};

#[derive(Debug, Parser)]
#[command(name = "carroll-forge", version, about = "Verify Carrollian connections and their characterizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Number of sample points (overrides the spec file).
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Pass threshold on normalized residuals (overrides the spec file).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for the sample grid (overrides the spec file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the JSON report instead of the text summary.
    #[arg(long, global = true)]
    json: bool,
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Scm,
    Pcs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SurfaceCheck {
    Flat,
    Curved,
    Homothety,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the structure axioms and the adapted frame.
    Validate { spec: PathBuf },
    /// Print the adapted frame and its structure functions.
    Frame { spec: PathBuf },
    /// Minimal torsion, its trace and γ.
    Torsion { spec: PathBuf },
    /// Boost the Ehresmann form to a principal one.
    Boost { spec: PathBuf },
    /// Build the SCM or PCS connection and check its defining properties.
    Build {
        kind: Kind,
        spec: PathBuf,
        /// Boost a non-principal form before building an SCM connection.
        #[arg(long)]
        boost: bool,
    },
    /// Run the SCM or PCS characterization on the supplied or built connection.
    Classify {
        kind: Kind,
        spec: PathBuf,
        /// Boost a non-principal form before building an SCM connection.
        #[arg(long)]
        boost: bool,
    },
    /// Check the symmetric-tensor lemma for non-vanishing torsion.
    Lemma26 { spec: PathBuf },
    /// Verify a vorticity-free Killing field on a fibre slice.
    Killing { spec: PathBuf },
    /// Surface criteria relating PCS and SCM structures.
    Surface {
        check: SurfaceCheck,
        spec: PathBuf,
        /// Candidate θ̄ components, e.g. "x,y".
        #[arg(long)]
        theta: Option<String>,
    },
}

/// Result of one invocation.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    pub report: Option<Report>,
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            let code = if e.use_stderr() { 2 } else { 0 };
            let (stdout, stderr) = if code == 0 { (text, String::new()) } else { (String::new(), text) };
            return Outcome { code, stdout, stderr, report: None };
        }
    };
    match execute(&cli) {
        Ok(report) => {
            let mut stderr = String::new();
            if let Some(path) = &cli.out {
                if let Err(e) = std::fs::write(path, report.to_json() + "\n") {
                    return Outcome {
                        code: 2,
                        stdout: String::new(),
                        stderr: format!("error: cannot write {}: {e}\n", path.display()),
                        report: Some(report),
                    };
                }
                stderr = format!("report written to {}\n", path.display());
            }
            let stdout = if cli.json { report.to_json() + "\n" } else { report.summary() };
            Outcome {
                code: if report.passed() { 0 } else { 1 },
                stdout,
                stderr,
                report: Some(report),
            }
        }
        Err(e) => Outcome {
            code: 2,
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
            report: None,
        },
    }
}

struct Ctx {
    spec: SpecFile,
    path: String,
    chart: Chart,
    samples: Samples,
    tol: Tolerance,
    seed: u64,
    n: usize,
}

impl Ctx {
    fn load(cli: &Cli, path: &std::path::Path) -> Result<Ctx> {
        let spec = SpecFile::load(path)?;
        let chart = spec.chart()?;
        let n = cli.samples.unwrap_or(spec.run.samples);
        if n == 0 {
            return Err(Error::Invalid("at least one sample point is needed".into()));
        }
        let seed = cli.seed.unwrap_or(spec.run.seed);
        let pass = cli.tol.unwrap_or(spec.run.tol);
        if pass.is_nan() || pass <= 0.0 {
            return Err(Error::Invalid(format!("tolerance must be positive, got {pass}")));
        }
        let samples = chart.samples(n, seed);
        Ok(Ctx {
            spec,
            path: path.display().to_string(),
            chart,
            samples,
            tol: Tolerance::with_pass(pass),
            seed,
            n,
        })
    }

    fn report(&self, command: &str) -> Report {
        Report::new(command, &self.path, self.n, self.seed, self.tol.pass)
    }

    fn carroll(&self) -> Result<CarrollStructure> {
        let c = self.spec.carroll(&self.chart)?;
        c.check_signature(&self.samples)?;
        Ok(c)
    }

    fn ehresmann(&self) -> Result<EhresmannForm> {
        let e = self.spec.ehresmann(&self.chart)?;
        e.validate(&self.samples, &self.tol)?;
        Ok(e)
    }

    fn names(&self) -> [&str; 3] {
        self.chart.names()
    }

    fn show(&self, e: &Expr) -> String {
        e.display(&self.names()).to_string()
    }

    /// Mean and max magnitude of each expression over the grid.
    fn sample_stats(&self, exprs: &[Expr]) -> Result<Vec<(f64, f64)>> {
        let rows = tolerance::evaluate_all(exprs, &self.samples)?;
        let n = rows.len() as f64;
        Ok((0..exprs.len())
            .map(|k| {
                let mean = rows.iter().map(|r| r[k]).sum::<f64>() / n;
                let max = rows.iter().fold(0.0_f64, |m, r| m.max(r[k].abs()));
                (mean, max)
            })
            .collect())
    }

    /// Adds every component of `t` that is not identically zero on the grid.
    fn sample_field(&self, report: &mut Report, prefix: &str, t: &TensorField, labels: &dyn Fn(usize) -> String, skip: &dyn Fn(&[usize]) -> bool) -> Result<()> {
        let idx: Vec<Vec<usize>> = indices(t.rank()).filter(|i| !skip(i)).collect();
        let exprs: Vec<Expr> = idx.iter().map(|i| t.get(i).clone()).collect();
        for (i, (mean, max)) in idx.iter().zip(self.sample_stats(&exprs)?) {
            if max < self.tol.vanish {
                continue;
            }
            let name: Vec<String> = i.iter().map(|k| labels(*k)).collect();
            report.sampled(&format!("{prefix}.{}", name.join(".")), mean, max);
        }
        Ok(())
    }

    fn coord_label(&self) -> impl Fn(usize) -> String + '_ {
        move |k| self.names()[k].to_string()
    }
}

fn frame_label(k: usize) -> String {
    (k + 1).to_string()
}

fn no_skip(_: &[usize]) -> bool {
    false
}

fn execute(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::Validate { spec } => validate(&Ctx::load(cli, spec)?),
        Command::Frame { spec } => frame(&Ctx::load(cli, spec)?),
        Command::Torsion { spec } => torsion(&Ctx::load(cli, spec)?),
        Command::Boost { spec } => boost(&Ctx::load(cli, spec)?),
        Command::Build { kind, spec, boost } => build(&Ctx::load(cli, spec)?, *kind, *boost),
        Command::Classify { kind, spec, boost } => classify_cmd(&Ctx::load(cli, spec)?, *kind, *boost),
        Command::Lemma26 { spec } => lemma26(&Ctx::load(cli, spec)?),
        Command::Killing { spec } => killing(&Ctx::load(cli, spec)?),
        Command::Surface { check, spec, theta } => surface_cmd(&Ctx::load(cli, spec)?, *check, theta.as_deref()),
    }
}

fn frame_residuals(ctx: &Ctx, c: &CarrollStructure, f: &Frame, v: &mut Verdict) -> Result<()> {
    v.require("duality", f.duality_residual(&ctx.samples)?)
        .require("metric-reconstruction", f.metric_residual(c, &ctx.samples)?)
        .require("bracket", f.bracket_residual(&ctx.samples)?);
    Ok(())
}

fn validate(ctx: &Ctx) -> Result<Report> {
    let mut report = ctx.report("validate");
    let c = ctx.carroll()?;
    let mut v = Verdict::new(Branch::None, ctx.tol.pass);
    if ctx.spec.ehresmann.is_some() {
        let ehr = ctx.spec.ehresmann(&ctx.chart)?;
        let principal = ehr.principal_residual(&ctx.samples)?;
        report.residual("lie-ell-omega", principal, principal);
        if ehr.role() == Role::Principal {
            v.require("principal", tolerance::ResidualStats { max: principal, mean: principal });
        }
        let f = Frame::build(&c, &ehr, &ctx.samples)?;
        frame_residuals(ctx, &c, &f, &mut v)?;
    }
    report.verdict("structure", &v);
    Ok(report)
}

fn frame(ctx: &Ctx) -> Result<Report> {
    let mut report = ctx.report("frame");
    let c = ctx.carroll()?;
    let ehr = ctx.ehresmann()?;
    let f = Frame::build(&c, &ehr, &ctx.samples)?;
    for a in 0..3 {
        let comps: Vec<String> = f.e()[a].iter().map(|e| ctx.show(e)).collect();
        report.expressions.push(format!("e{}", a + 1), format!("[{}]", comps.join(", ")));
    }
    for a in 0..3 {
        let comps: Vec<String> = f.theta()[a].iter().map(|e| ctx.show(e)).collect();
        report.expressions.push(format!("theta{}", a + 1), format!("[{}]", comps.join(", ")));
    }
    ctx.sample_field(&mut report, "Chat", &f.structure_tensor(), &frame_label, &|i| i[1] >= i[2])?;
    let mut v = Verdict::new(Branch::None, ctx.tol.pass);
    frame_residuals(ctx, &c, &f, &mut v)?;
    report.verdict("frame", &v);
    Ok(report)
}

fn torsion(ctx: &Ctx) -> Result<Report> {
    let mut report = ctx.report("torsion");
    let c = ctx.carroll()?;
    let ehr = ctx.ehresmann()?;
    let f = Frame::build(&c, &ehr, &ctx.samples)?;
    let t = minimal_torsion(&c, &ehr, &f)?;
    ctx.sample_field(&mut report, "T", t.frame(), &frame_label, &|i| i[1] >= i[2])?;
    report.verdict("minimal", &classify::check_minimal(&c, &ehr, t.coordinate(), &ctx.samples, &ctx.tol)?);
    let tr = torsion_trace(&t, &c, &ehr, &f, &ctx.samples, &ctx.tol)?;
    ctx.sample_field(&mut report, "V", &tr.v, &frame_label, &no_skip)?;
    let (mean, max) = ctx.sample_stats(std::slice::from_ref(&tr.v_on_ell))?[0];
    report.sampled("V(l)", mean, max);
    let branch = match tr.branch {
        Vanishing::NonVanishing => Branch::TraceNonzero,
        _ => Branch::TraceHorizontalOrZero,
    };
    let mut v = Verdict::new(branch, ctx.tol.pass);
    if let Some(gamma) = &tr.gamma {
        let omega = change_basis(&ehr.form(), &f, Direction::ToFrame)?;
        v.require("gamma-equals-omega", gamma.residual(&omega, &ctx.samples)?);
        let means = ctx.sample_stats(gamma.components())?.into_iter().map(|(m, _)| m).collect();
        v.report("gamma", means);
    }
    report.verdict("trace", &v);
    Ok(report)
}

fn boost(ctx: &Ctx) -> Result<Report> {
    let mut report = ctx.report("boost");
    let ehr = ctx.spec.ehresmann(&ctx.chart)?;
    let nu = boost_to_principal(&ehr, &ctx.chart);
    report.expressions.push("u0", format!("{}", ctx.chart.fibre_midpoint()));
    report.expressions.push("nu.w1", ctx.show(&nu.spatial()[0]));
    report.expressions.push("nu.w2", ctx.show(&nu.spatial()[1]));
    let r = nu.principal_residual(&ctx.samples)?;
    let mut v = Verdict::new(Branch::None, ctx.tol.pass);
    v.require("lie-ell-nu", tolerance::ResidualStats { max: r, mean: r });
    report.verdict("principal", &v);
    Ok(report)
}

/// The form used for SCM work: the spec's form, boosted when asked.
fn scm_form(ctx: &Ctx, boost: bool, report: &mut Report) -> Result<EhresmannForm> {
    let ehr = ctx.spec.ehresmann(&ctx.chart)?;
    if boost && ehr.principal_residual(&ctx.samples)? >= ctx.tol.vanish {
        let nu = boost_to_principal(&ehr, &ctx.chart);
        report.expressions.push("nu.w1", ctx.show(&nu.spatial()[0]));
        report.expressions.push("nu.w2", ctx.show(&nu.spatial()[1]));
        return Ok(nu);
    }
    Ok(ehr.with_role(Role::Principal))
}

fn build(ctx: &Ctx, kind: Kind, boost: bool) -> Result<Report> {
    let c = ctx.carroll()?;
    let (mut report, conn, form) = match kind {
        Kind::Scm => {
            let mut report = ctx.report("build scm");
            let nu = scm_form(ctx, boost, &mut report)?;
            (report, build_scm(&c, &nu, &ctx.samples, &ctx.tol)?, nu)
        }
        Kind::Pcs => {
            let alpha = ctx.ehresmann()?;
            (ctx.report("build pcs"), build_pcs(&c, &alpha, &ctx.samples)?, alpha)
        }
    };
    ctx.sample_field(&mut report, "Gamma", conn.coordinate(), &ctx.coord_label(), &no_skip)?;
    let post = match kind {
        Kind::Scm => connection::scm_postconditions(&conn, &c, &form, &ctx.samples)?,
        Kind::Pcs => connection::pcs_postconditions(&conn, &c, &form, &ctx.samples)?,
    };
    let stat = |x: f64| tolerance::ResidualStats { max: x, mean: x };
    let lemma = crate::carroll::lie_identity_residual(&conn.torsion(), &c, &form, conn.frame(), &ctx.samples)?;
    let mut v = Verdict::new(Branch::None, ctx.tol.pass);
    v.require("nabla-g", stat(post.metric))
        .require("nabla-ell", stat(post.ell))
        .require(if kind == Kind::Scm { "nabla-nu" } else { "sym-nabla-alpha-minus-g" }, stat(post.form))
        .require("torsion-minus-minimal", stat(post.torsion))
        .require("lie-metric-identity", stat(lemma));
    report.verdict("postconditions", &v);
    Ok(report)
}

/// The spec's connection if given, otherwise the built one.
fn connection_for(ctx: &Ctx, c: &CarrollStructure, form: &EhresmannForm, builder: Kind) -> Result<AffineConnection> {
    let f = Frame::build(c, form, &ctx.samples)?;
    if let Some(conn) = ctx.spec.connection(&ctx.chart, &f)? {
        return Ok(conn);
    }
    match builder {
        Kind::Scm => build_scm(c, form, &ctx.samples, &ctx.tol),
        Kind::Pcs => build_pcs(c, form, &ctx.samples),
    }
}

fn classify_cmd(ctx: &Ctx, kind: Kind, boost: bool) -> Result<Report> {
    let c = ctx.carroll()?;
    match kind {
        Kind::Scm => {
            let mut report = ctx.report("classify scm");
            let nu = scm_form(ctx, boost, &mut report)?;
            let conn = connection_for(ctx, &c, &nu, Kind::Scm)?;
            report.expressions.push("connection", conn.provenance().name().to_string());
            let v = classify::classify_scm(&c, &nu, &conn, &ctx.samples, &ctx.tol)?;
            report.verdict("classify-scm", &v);
            Ok(report)
        }
        Kind::Pcs => {
            let mut report = ctx.report("classify pcs");
            let alpha = ctx.ehresmann()?;
            let conn = connection_for(ctx, &c, &alpha, Kind::Pcs)?;
            report.expressions.push("connection", conn.provenance().name().to_string());
            let v = classify::classify_pcs(&c, &alpha, &conn, &ctx.samples, &ctx.tol)?;
            report.verdict("classify-pcs", &v);
            Ok(report)
        }
    }
}

fn lemma26(ctx: &Ctx) -> Result<Report> {
    let mut report = ctx.report("lemma26");
    let c = ctx.carroll()?;
    let ehr = ctx.ehresmann()?;
    let builder = match ctx.spec.lemma26.as_ref().and_then(|b| b.builder.as_deref()) {
        None | Some("pcs") => Kind::Pcs,
        Some("scm") => Kind::Scm,
        Some(other) => return Err(Error::Invalid(format!("lemma26.builder: expected scm or pcs, got `{other}`"))),
    };
    let conn = connection_for(ctx, &c, &ehr, builder)?;
    let n = match ctx.spec.lemma26_n(&ctx.chart)? {
        Some(n) => n,
        None => symmetrize(&conn.covariant_derivative(&ehr.form())),
    };
    report.expressions.push("connection", conn.provenance().name().to_string());
    let v = classify::check_lemma_26(&c, &ehr, &conn, &n, &ctx.samples, &ctx.tol)?;
    report.verdict("lemma26", &v);
    Ok(report)
}

fn killing(ctx: &Ctx) -> Result<Report> {
    let mut report = ctx.report("killing");
    let c = ctx.carroll()?;
    let block = ctx
        .spec
        .killing
        .as_ref()
        .ok_or_else(|| Error::Invalid("spec file has no [killing] block".into()))?;
    let u0 = block.u.unwrap_or_else(|| ctx.chart.fibre_midpoint());
    let geo = InducedGeometry::slice(&c, u0, &ctx.samples)?;
    let xi = ctx.spec.covector(&ctx.chart, "killing.xi", &block.xi)?;
    report.expressions.push("u0", format!("{u0}"));
    let v = classify::verify_vorticity_free_killing(&geo, &xi, &ctx.samples, &ctx.tol)?;
    report.verdict("vorticity-free-killing", &v);
    Ok(report)
}

fn surface_cmd(ctx: &Ctx, check: SurfaceCheck, theta: Option<&str>) -> Result<Report> {
    let c = ctx.carroll()?;
    let (block, emb) = ctx.spec.surface(&ctx.chart)?;
    let geo = InducedGeometry::induced(&c, &emb, &ctx.samples)?;
    let (mean, max) = ctx.sample_stats(std::slice::from_ref(geo.scalar_curvature()))?[0];
    let pulled = || -> Result<surface::Covector> {
        match &block.alpha_pullback {
            Some(a) => ctx.spec.covector(&ctx.chart, "surface.alpha_pullback", a),
            None => Ok(surface::pullback_form(&ctx.spec.ehresmann(&ctx.chart)?, &emb)),
        }
    };
    let mut report;
    let v = match check {
        SurfaceCheck::Flat => {
            report = ctx.report("surface flat");
            surface::check_flat_case(&geo, &pulled()?, &ctx.samples, &ctx.tol)?
        }
        SurfaceCheck::Curved => {
            report = ctx.report("surface curved");
            let b = match &block.b {
                Some(b) => ctx.spec.sym2(&ctx.chart, "surface.b", b)?,
                None => surface::b_tensor(&geo, &pulled()?),
            };
            surface::check_curved_case(&geo, &b, &ctx.samples, &ctx.tol)?
        }
        SurfaceCheck::Homothety => {
            report = ctx.report("surface homothety");
            let texts: [String; 2] = match theta {
                Some(t) => {
                    let parts = split_top_level(t);
                    <[String; 2]>::try_from(parts).map_err(|p| {
                        Error::Invalid(format!("--theta needs two components, got {}", p.len()))
                    })?
                }
                None => block
                    .theta
                    .clone()
                    .ok_or_else(|| Error::Invalid("no θ̄ candidate: pass --theta or set surface.theta".into()))?,
            };
            let th = ctx.spec.covector(&ctx.chart, "theta", &texts)?;
            report.expressions.push("theta", format!("[{}, {}]", texts[0], texts[1]));
            surface::verify_homothety(&geo, &th, &ctx.samples, &ctx.tol)?
        }
    };
    report.sampled("scalar-curvature", mean, max);
    report.verdict(
        match check {
            SurfaceCheck::Flat => "flat-case",
            SurfaceCheck::Curved => "curved-case",
            SurfaceCheck::Homothety => "homothety",
        },
        &v,
    );
    Ok(report)
}
