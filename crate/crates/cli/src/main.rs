//! Command-line front end: load a problem file or a built-in instance,
//! run one analysis, print a human summary, and optionally write the
//! versioned JSON report.
//!
//! Exit codes: 0 = analysis completed (whatever the verdicts), 1 = input
//! error (unreadable file, parse failure, dimension mismatch, unknown
//! name), 2 = a mathematical precondition failed and aborted the
//! analysis (the base point is not a solution, a value escaped the
//! ordering cone, or an asserted inclusion was refuted on the sample).
//!
//! The human text and the JSON report are rendered from the same
//! structures, so the two never disagree on a verdict.

use clap::{Args, Parser, Subcommand};
use std::fs;
use vep_core::approx::{inner_cone, outer_cone, verify_inclusions, ApproxError, VerifyOptions};
use vep_core::deriv::{ScalarFn, Structure};
use vep_core::optimality::{
    local_min_brute, noc_decomposed, soc_check, MpvecInstance, OptError,
};
use vep_core::problem::{
    error_bound_probe, EquiOracle, VepInstance, DEFAULT_ERROR_BOUND_RADII,
};
use vep_core::registry;
use vep_core::report::{
    analysis_json, brute_json, cone_json, error_bound_json, noc_decomposed_json, residual_json,
    soc_json, AnalysisJson, CheckEqJson, ConeJson, ErrorBoundJson, NocDecomposedJson,
    OptimalityJson, ProblemFile, Report, ReportBody, ReportError, SocJson,
};
use vep_core::sampling::{sphere_grid, TGrid};

#[derive(Parser)]
#[command(
    name = "vep",
    version,
    about = "Analyze strong vector equilibrium problems: residuals, conical \
             approximations of the solution set, and first-order optimality"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Args)]
struct CommonArgs {
    /// Point to analyze, comma-separated (e.g. --at 0,0).  Defaults to
    /// the instance's declared base point when one is known.
    #[arg(long, allow_hyphen_values = true)]
    at: Option<String>,
    /// Write the JSON report to this path; "-" prints JSON to stdout
    /// instead of the human summary.
    #[arg(long)]
    json: Option<String>,
    /// Sampling seed (default: VEP_SEED env var, then the instance's
    /// own setting).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Args)]
struct ConeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of probe directions on the unit sphere.
    #[arg(long, default_value_t = 64)]
    dirs: usize,
}

#[derive(Clone, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of probe directions on the unit sphere.
    #[arg(long, default_value_t = 64)]
    dirs: usize,
    /// Error-bound probe radii, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    radii: Option<String>,
    /// Skip the doubled-radius sensitivity pass.
    #[arg(long)]
    no_sensitivity: bool,
}

#[derive(Clone, Args)]
struct ErrorBoundArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Probe radii, comma-separated (default 1,0.1,0.01,0.001).
    #[arg(long, allow_hyphen_values = true)]
    radii: Option<String>,
}

#[derive(Clone, Args)]
struct ExportArgs {
    /// Output path (default: stdout).
    #[arg(long)]
    json: Option<String>,
}

#[derive(Clone, Subcommand)]
enum Action {
    /// Worst ordering-cone violation over the parameter sample at a point.
    Residual(CommonArgs),
    /// Solution membership at the pinned tolerance.
    CheckEq(CommonArgs),
    /// Inner approximation of the solution set's contingent cone.
    InnerCone(ConeArgs),
    /// Outer approximation of the solution set's contingent cone.
    OuterCone(ConeArgs),
    /// Full analysis: cones, hypothesis probes, inclusion verdicts, and
    /// optimality when an objective is present.
    Verify(VerifyArgs),
    /// Dual necessary optimality condition, direct and decomposed.
    Noc(CommonArgs),
    /// Sufficient optimality condition for a strict local minimum.
    Soc(CommonArgs),
    /// Error-bound modulus table over shrinking radii.
    ErrorBound(ErrorBoundArgs),
    /// Write the instance as a problem file.
    Export(ExportArgs),
}

#[derive(Subcommand)]
enum Cmd {
    Residual {
        file: String,
        #[command(flatten)]
        args: CommonArgs,
    },
    CheckEq {
        file: String,
        #[command(flatten)]
        args: CommonArgs,
    },
    InnerCone {
        file: String,
        #[command(flatten)]
        args: ConeArgs,
    },
    OuterCone {
        file: String,
        #[command(flatten)]
        args: ConeArgs,
    },
    Verify {
        file: String,
        #[command(flatten)]
        args: VerifyArgs,
    },
    Noc {
        file: String,
        #[command(flatten)]
        args: CommonArgs,
    },
    Soc {
        file: String,
        #[command(flatten)]
        args: CommonArgs,
    },
    ErrorBound {
        file: String,
        #[command(flatten)]
        args: ErrorBoundArgs,
    },
    Export {
        file: String,
        #[command(flatten)]
        args: ExportArgs,
    },
    /// Run a subcommand on a built-in instance.
    Example {
        name: String,
        #[command(subcommand)]
        action: Action,
    },
    /// List built-in instances.
    List,
}

enum Source {
    File(String),
    Example(String),
}

#[derive(Debug)]
enum CliError {
    /// Bad input: exit code 1.
    Input(String),
    /// A mathematical precondition failed and the analysis aborted:
    /// exit code 2.
    Analysis(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Analysis(m) => write!(f, "{m}"),
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn from_report_err(e: ReportError) -> CliError {
    match e {
        ReportError::Opt(OptError::CandidateNotEquilibrium { residual }) => CliError::Analysis(
            format!("candidate is not an equilibrium (residual {residual:.3e})"),
        ),
        other => CliError::Input(other.to_string()),
    }
}

fn from_problem_err(e: vep_core::problem::ProblemError) -> CliError {
    match &e {
        vep_core::problem::ProblemError::BaseNotEquilibrium { .. } => {
            CliError::Analysis(e.to_string())
        }
        _ => CliError::Input(e.to_string()),
    }
}

fn from_approx_err(e: ApproxError) -> CliError {
    match &e {
        ApproxError::BaseNotEquilibrium { .. } | ApproxError::ValueOutsideCone { .. } => {
            CliError::Analysis(e.to_string())
        }
        _ => CliError::Input(e.to_string()),
    }
}

fn from_opt_err(e: OptError) -> CliError {
    match &e {
        OptError::CandidateNotEquilibrium { .. } => CliError::Analysis(e.to_string()),
        OptError::Approx(inner) => match inner {
            ApproxError::BaseNotEquilibrium { .. } | ApproxError::ValueOutsideCone { .. } => {
                CliError::Analysis(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        },
        _ => CliError::Input(e.to_string()),
    }
}

fn parse_point(s: &str, n: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let coords: Result<Vec<f64>, _> =
        s.split(',').map(|c| c.trim().parse::<f64>()).collect();
    let coords = coords.map_err(|e| {
        CliError::Input(format!("cannot parse {what} {s:?}: {e}"))
    })?;
    if coords.len() != n {
        return Err(CliError::Input(format!(
            "{what} has {} coordinates, the problem has {n}",
            coords.len()
        )));
    }
    Ok(coords)
}

fn parse_radii(s: &Option<String>) -> Result<Vec<f64>, CliError> {
    match s {
        None => Ok(DEFAULT_ERROR_BOUND_RADII.to_vec()),
        Some(text) => {
            let radii: Result<Vec<f64>, _> =
                text.split(',').map(|c| c.trim().parse::<f64>()).collect();
            let radii =
                radii.map_err(|e| CliError::Input(format!("cannot parse --radii: {e}")))?;
            if radii.is_empty() || radii.iter().any(|r| !r.is_finite() || *r <= 0.0) {
                return Err(CliError::Input("--radii must be positive numbers".into()));
            }
            Ok(radii)
        }
    }
}

/// A loaded instance plus everything needed to pick default points and
/// record the seed.
struct Instanced {
    file: ProblemFile,
    vep: VepInstance,
    /// Declared solution point (registry) or derivative base (file).
    default_at: Option<Vec<f64>>,
    seed: u64,
}

fn load(source: &Source, seed_flag: Option<u64>) -> Result<Instanced, CliError> {
    let (mut file, registry_at) = match source {
        Source::File(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("cannot read {path}: {e}")))?;
            (ProblemFile::from_json(&text).map_err(from_report_err)?, None)
        }
        Source::Example(name) => match registry::load_example(name).map_err(input)? {
            registry::Loaded::Vep(v) => {
                let base = registry::golden_vep(name).map(|g| g.base);
                (ProblemFile::from_vep(&v), base)
            }
            registry::Loaded::Mpvec(m) => {
                let candidate = m.candidate.clone();
                (ProblemFile::from_mpvec(&m), Some(candidate))
            }
        },
    };
    let env_seed = std::env::var("VEP_SEED").ok().and_then(|s| s.parse::<u64>().ok());
    if let Some(seed) = seed_flag.or(env_seed) {
        file.sampling.get_or_insert_with(Default::default).seed = seed;
    }
    let vep = file.to_vep().map_err(from_report_err)?;
    let default_at = registry_at.or_else(|| file.bderiv.as_ref().map(|b| b.at.clone()));
    let seed = vep.sampling.seed;
    Ok(Instanced { file, vep, default_at, seed })
}

impl Instanced {
    fn point(&self, at: &Option<String>) -> Result<Vec<f64>, CliError> {
        match at {
            Some(s) => parse_point(s, self.vep.n(), "--at"),
            None => self.default_at.clone().ok_or_else(|| {
                CliError::Input(
                    "--at is required: the problem declares no base point".into(),
                )
            }),
        }
    }

    fn objective(&self) -> Result<ScalarFn, CliError> {
        let obj = self.file.objective.as_ref().ok_or_else(|| {
            CliError::Input(
                "this analysis needs an objective block in the problem (or an mp-* example)"
                    .into(),
            )
        })?;
        let structure = match obj.structure.as_str() {
            "smooth" => Structure::Smooth,
            "convex" => Structure::Convex,
            "concave" => Structure::Concave,
            "generic" => Structure::Generic,
            other => {
                return Err(CliError::Input(format!(
                    "unknown objective structure {other:?} (expected smooth, convex, concave \
                     or generic)"
                )))
            }
        };
        ScalarFn::parse(&obj.expr, structure)
            .map_err(|e| CliError::Input(format!("cannot parse objective: {e}")))
    }

    fn mpvec(&self, at: &[f64]) -> Result<MpvecInstance, CliError> {
        MpvecInstance::new(self.vep.clone(), self.objective()?, at.to_vec())
            .map_err(from_opt_err)
    }
}

// ---------------------------------------------------------------------------
// Formatting helpers
// ---------------------------------------------------------------------------

/// Write to stdout, tolerating a closed pipe (e.g. `vep ... | head`).
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn fmt_point(v: &[f64]) -> String {
    let inner: Vec<String> = v.iter().map(|c| format!("{c}")).collect();
    format!("[{}]", inner.join(", "))
}

fn fmt_opt(v: &Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.3e}"),
        None => "n/a".into(),
    }
}

fn yesno(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn cone_lines(label: &str, c: &ConeJson, out: &mut String) {
    out.push_str(&format!(
        "{label}: {}/{} sampled directions are members",
        c.member_count,
        c.directions.len()
    ));
    match &c.exact {
        Some(vep_core::report::ExactConeJson::FullSpace) => {
            out.push_str("  (exact: full space)\n")
        }
        Some(vep_core::report::ExactConeJson::Halfspaces { rows }) => {
            out.push_str(&format!("  (exact: {} halfspace rows)\n", rows.len()));
            for r in rows.iter().take(12) {
                out.push_str(&format!("    {}\n", fmt_point(r)));
            }
            if rows.len() > 12 {
                out.push_str(&format!("    ... {} more\n", rows.len() - 12));
            }
        }
        None => {
            let res = c.resolution.map(|r| format!(", resolution {r:.1e}")).unwrap_or_default();
            out.push_str(&format!("  (sampled{res})\n"));
        }
    }
    if let Some(m) = &c.meta {
        out.push_str(&format!(
            "  parameter values: {} interior (skipped), {} zero, {} contributing\n",
            m.skipped_interior, m.zero_values, m.contributing
        ));
    }
}

fn inclusion_line(c: &vep_core::report::InclusionJson) -> String {
    let mut s = format!(
        "{}: {}{}",
        c.name,
        if c.holds_on_sample { "holds on sample" } else { "REFUTED on sample" },
        if c.asserted { " [asserted]" } else { " [informational]" },
    );
    if c.strict {
        s.push_str(&format!("; strict ({} witnesses)", c.strict_witnesses.len()));
    } else {
        s.push_str("; not strict");
    }
    if c.indeterminate > 0 {
        s.push_str(&format!("; {} directions indeterminate", c.indeterminate));
    }
    if !c.counterexamples.is_empty() {
        s.push_str(&format!("; counterexample {}", fmt_point(&c.counterexamples[0])));
    }
    s
}

fn hypotheses_lines(h: &vep_core::report::HypothesesJson) -> String {
    format!(
        "hypotheses: polyhedral feasible set {} | f vanishes at base {} (max {:.2e}) | \
         strict derivative {} | equicontinuity {} (modulus {}) | error bound {} | \
         inner gate {} | all pass {}",
        yesno(h.polyhedral_k),
        yesno(h.f_vanishes),
        h.max_f_norm,
        yesno(h.strict_bdiff),
        yesno(h.equicontinuity_evidence),
        fmt_opt(&h.equicontinuity_modulus),
        h.error_bound,
        yesno(h.inner_gate),
        yesno(h.all_pass),
    )
}

fn analysis_text(a: &AnalysisJson) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "analysis at {}  (tol {:.3e}, parameter sample {}, solution cloud {}, oracle \
         resolution {:.1e})\n",
        fmt_point(&a.base),
        a.tol_eq,
        a.z_sample_size,
        a.cloud_size,
        a.oracle_resolution
    ));
    out.push_str(&hypotheses_lines(&a.hypotheses));
    out.push('\n');
    cone_lines("inner cone", &a.inner, &mut out);
    cone_lines("contingent cone", &a.contingent, &mut out);
    cone_lines("outer cone", &a.outer, &mut out);
    out.push_str(&format!("{}\n", inclusion_line(&a.inner_inclusion)));
    out.push_str(&format!("{}\n", inclusion_line(&a.outer_inclusion)));
    match &a.corollary {
        Some(c) => out.push_str(&format!(
            "equality regime: cones agree on grid {}; exact inner == outer: {}\n",
            yesno(c.equal_on_grid),
            c.exact_cones_equal.map(yesno).unwrap_or("n/a"),
        )),
        None => out.push_str("equality regime: not entered (hypotheses incomplete)\n"),
    }
    if let Some(s) = &a.sensitivity {
        out.push_str(&format!(
            "sensitivity: radius {} -> {}: inner members {} -> {}, witness margin {} -> {}\n",
            s.radius,
            s.doubled_radius,
            s.inner_members,
            s.inner_members_doubled,
            fmt_opt(&s.witness_margin),
            fmt_opt(&s.witness_margin_doubled),
        ));
    }
    if let Some(o) = &a.optimality {
        out.push_str(&format!(
            "optimality of \"{}\" ({}) at {}:\n",
            o.objective,
            o.structure,
            fmt_point(&o.candidate)
        ));
        out.push_str(&format!("  necessary ({}): {}\n", o.noc.verdict, o.noc.summary));
        if let Some(d) = &o.decomposed {
            out.push_str(&format!("  decomposed ({}): {}\n", d.verdict, d.summary));
        }
        out.push_str(&format!("  sufficient ({}): {}\n", o.soc.verdict, o.soc.summary));
        if let Some(b) = &o.brute {
            out.push_str(&format!(
                "  sampled ground truth: {} over {} nearby solution points\n",
                b.verdict, b.compared
            ));
        }
    }
    out
}

fn noc_text(at: &[f64], objective: &str, d: &NocDecomposedJson) -> String {
    let mut out = format!("necessary condition at {} for \"{objective}\":\n", fmt_point(at));
    out.push_str(&format!("  direct ({}): {}\n", d.direct.verdict, d.direct.summary));
    out.push_str(&format!(
        "  decomposed ({}): qualification {} (margin {}), split feasible: {}, fallback: {}\n",
        d.verdict,
        yesno(d.qualification),
        fmt_opt(&d.qualification_margin),
        d.decomposition_feasible.map(yesno).unwrap_or("n/a"),
        yesno(d.fallback),
    ));
    out.push_str(&format!(
        "  additivity toward the cone: {} (worst violation {:.2e}); generators: {}\n",
        yesno(d.concavity_ok),
        d.concavity_worst,
        d.direct.generators.len(),
    ));
    out.push_str(&format!("  {}\n", hypotheses_lines(&d.direct.hypotheses)));
    out
}

fn soc_text(at: &[f64], objective: &str, s: &SocJson) -> String {
    let mut out = format!("sufficient condition at {} for \"{objective}\":\n", fmt_point(at));
    out.push_str(&format!("  verdict ({}): {}\n", s.verdict, s.summary));
    match &s.witness {
        Some(w) => out.push_str(&format!(
            "  witness subgradient {} with interiority margin {}\n",
            fmt_point(&w.v),
            fmt_opt(&w.margin)
        )),
        None => out.push_str("  no witness\n"),
    }
    out.push_str(&format!(
        "  outer cone pointed: {}; subgradient candidates checked: {}\n",
        yesno(s.outer_pointed),
        s.candidates_checked
    ));
    out.push_str(&format!("  {}\n", hypotheses_lines(&s.hypotheses)));
    out
}

fn error_bound_text(at: &[f64], e: &ErrorBoundJson) -> String {
    let mut out = format!("error-bound probe at {}:\n", fmt_point(at));
    for r in &e.rows {
        out.push_str(&format!(
            "  radius {:.1e}: kappa {}  ({} samples, {} equilibria skipped)\n",
            r.radius,
            fmt_opt(&r.kappa),
            r.samples_used,
            r.skipped_equilibria
        ));
    }
    out.push_str(&format!("verdict: {}\n", e.verdict));
    out
}

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

struct Outcome {
    human: String,
    body: Option<ReportBody>,
    /// Seed the run actually used, recorded in the report envelope.
    seed: u64,
    exit: i32,
}

fn run_action(source: Source, action: Action) -> Result<(), CliError> {
    let (common, outcome) = match &action {
        Action::Export(args) => {
            let inst = load(&source, None)?;
            let text = inst.file.to_json();
            match &args.json {
                Some(path) if path != "-" => fs::write(path, &text)
                    .map_err(|e| CliError::Input(format!("cannot write {path}: {e}")))?,
                _ => emit(&text),
            }
            return Ok(());
        }
        Action::Residual(c) => (c.clone(), residual_action(&source, c)?),
        Action::CheckEq(c) => (c.clone(), check_eq_action(&source, c)?),
        Action::InnerCone(a) => (a.common.clone(), cone_action(&source, a, true)?),
        Action::OuterCone(a) => (a.common.clone(), cone_action(&source, a, false)?),
        Action::Verify(a) => (a.common.clone(), verify_action(&source, a)?),
        Action::Noc(c) => (c.clone(), noc_action(&source, c)?),
        Action::Soc(c) => (c.clone(), soc_action(&source, c)?),
        Action::ErrorBound(a) => (a.common.clone(), error_bound_action(&source, a)?),
    };
    let json_text = outcome.body.map(|b| Report::new(outcome.seed, b).render());
    match (&common.json, json_text) {
        (Some(path), Some(text)) if path == "-" => emit(&text),
        (Some(path), Some(text)) => {
            fs::write(path, &text)
                .map_err(|e| CliError::Input(format!("cannot write {path}: {e}")))?;
            emit(&outcome.human);
        }
        _ => emit(&outcome.human),
    }
    if outcome.exit != 0 {
        std::process::exit(outcome.exit);
    }
    Ok(())
}

fn residual_action(source: &Source, c: &CommonArgs) -> Result<Outcome, CliError> {
    let inst = load(source, c.seed)?;
    let at = inst.point(&c.at)?;
    let r = inst.vep.residual(&at).map_err(input)?;
    let body = residual_json(&at, &r);
    let human = format!(
        "residual at {}: {:.6e}  (argmax z = {}, sample size {})\n",
        fmt_point(&at),
        body.value,
        fmt_point(&body.argmax_z),
        body.sample_size
    );
    Ok(Outcome { human, body: Some(ReportBody::Residual(body)), seed: inst.seed, exit: 0 })
}

fn check_eq_action(source: &Source, c: &CommonArgs) -> Result<Outcome, CliError> {
    let inst = load(source, c.seed)?;
    let at = inst.point(&c.at)?;
    let tol = inst.vep.default_tol_eq(&at).map_err(input)?;
    let equilibrium = inst.vep.is_equilibrium(&at, tol).map_err(input)?;
    let r = inst.vep.residual(&at).map_err(input)?;
    let body = CheckEqJson { at: at.clone(), residual: r.value, tol, equilibrium };
    let feasible = inst.vep.k.contains(&at, 1e-9);
    let human = format!(
        "point {}: {} (residual {:.3e}, tol {:.3e}{})\n",
        fmt_point(&at),
        if equilibrium { "equilibrium" } else { "NOT an equilibrium" },
        r.value,
        tol,
        if feasible { "" } else { ", outside the feasible set" }
    );
    Ok(Outcome { human, body: Some(ReportBody::CheckEq(body)), seed: inst.seed, exit: 0 })
}

fn cone_action(source: &Source, a: &ConeArgs, inner: bool) -> Result<Outcome, CliError> {
    let inst = load(source, a.common.seed)?;
    let at = inst.point(&a.common.at)?;
    let dirs = sphere_grid(inst.vep.n(), a.dirs);
    let body = if inner {
        let oracle = EquiOracle::build(&inst.vep, &at).map_err(input)?;
        let cone = inner_cone(&inst.vep, &oracle, &at, &dirs).map_err(from_approx_err)?;
        cone_json(&cone, &at, None)
    } else {
        let (cone, meta) = outer_cone(&inst.vep, &at, &dirs).map_err(from_approx_err)?;
        cone_json(&cone, &at, Some(&meta))
    };
    let mut human = String::new();
    cone_lines(if inner { "inner cone" } else { "outer cone" }, &body, &mut human);
    Ok(Outcome { human, body: Some(ReportBody::Cone(body)), seed: inst.seed, exit: 0 })
}

fn verify_action(source: &Source, a: &VerifyArgs) -> Result<Outcome, CliError> {
    let inst = load(source, a.common.seed)?;
    let at = inst.point(&a.common.at)?;
    let oracle = EquiOracle::build(&inst.vep, &at).map_err(input)?;
    let opts = VerifyOptions {
        dir_count: a.dirs,
        grid: TGrid::default(),
        error_bound_radii: parse_radii(&a.radii)?,
        sensitivity: !a.no_sensitivity,
    };
    let report = verify_inclusions(&inst.vep, &oracle, &at, &opts).map_err(from_approx_err)?;
    let mut body = analysis_json(&report);
    if inst.file.objective.is_some() {
        let mp = inst.mpvec(&at)?;
        let noc = noc_decomposed(&mp, &oracle).map_err(from_opt_err)?;
        let soc = soc_check(&mp, &oracle).map_err(from_opt_err)?;
        let brute = local_min_brute(&mp, &oracle, 5.0, 1).map_err(from_opt_err)?;
        body.optimality = Some(OptimalityJson {
            candidate: at.clone(),
            objective: inst.file.objective.as_ref().map(|o| o.expr.clone()).unwrap_or_default(),
            structure: inst
                .file
                .objective
                .as_ref()
                .map(|o| o.structure.clone())
                .unwrap_or_default(),
            noc: vep_core::report::noc_json(&noc.direct),
            decomposed: Some(noc_decomposed_json(&noc)),
            soc: soc_json(&soc),
            brute: Some(brute_json(&brute)),
        });
    }
    let human = analysis_text(&body);
    // An asserted inclusion refuted on the sample is an assertion
    // failure: exit 2.
    let refuted = (body.inner_inclusion.asserted && !body.inner_inclusion.holds_on_sample)
        || (body.outer_inclusion.asserted && !body.outer_inclusion.holds_on_sample);
    let exit = if refuted { 2 } else { 0 };
    Ok(Outcome { human, body: Some(ReportBody::Verify(Box::new(body))), seed: inst.seed, exit })
}

fn noc_action(source: &Source, c: &CommonArgs) -> Result<Outcome, CliError> {
    let inst = load(source, c.seed)?;
    let at = inst.point(&c.at)?;
    let mp = inst.mpvec(&at)?;
    let oracle = EquiOracle::build(&inst.vep, &at).map_err(input)?;
    let report = noc_decomposed(&mp, &oracle).map_err(from_opt_err)?;
    let body = noc_decomposed_json(&report);
    let human = noc_text(&at, &inst.file.objective.as_ref().unwrap().expr, &body);
    Ok(Outcome { human, body: Some(ReportBody::NocDecomposed(body)), seed: inst.seed, exit: 0 })
}

fn soc_action(source: &Source, c: &CommonArgs) -> Result<Outcome, CliError> {
    let inst = load(source, c.seed)?;
    let at = inst.point(&c.at)?;
    let mp = inst.mpvec(&at)?;
    let oracle = EquiOracle::build(&inst.vep, &at).map_err(input)?;
    let report = soc_check(&mp, &oracle).map_err(from_opt_err)?;
    let body = soc_json(&report);
    let human = soc_text(&at, &inst.file.objective.as_ref().unwrap().expr, &body);
    Ok(Outcome { human, body: Some(ReportBody::Soc(body)), seed: inst.seed, exit: 0 })
}

fn error_bound_action(source: &Source, a: &ErrorBoundArgs) -> Result<Outcome, CliError> {
    let inst = load(source, a.common.seed)?;
    let at = inst.point(&a.common.at)?;
    let oracle = EquiOracle::build(&inst.vep, &at).map_err(input)?;
    let radii = parse_radii(&a.radii)?;
    let report = error_bound_probe(&oracle, &at, &radii).map_err(from_problem_err)?;
    let body = error_bound_json(&report);
    let human = error_bound_text(&at, &body);
    Ok(Outcome { human, body: Some(ReportBody::ErrorBound(body)), seed: inst.seed, exit: 0 })
}

fn list_action() {
    let mut out = String::from("built-in instances:\n");
    for name in registry::example_names() {
        let desc = registry::describe(name).unwrap_or("");
        out.push_str(&format!("  {name:<18} {desc}\n"));
    }
    emit(&out);
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Residual { file, args } => run_action(Source::File(file), Action::Residual(args)),
        Cmd::CheckEq { file, args } => run_action(Source::File(file), Action::CheckEq(args)),
        Cmd::InnerCone { file, args } => {
            run_action(Source::File(file), Action::InnerCone(args))
        }
        Cmd::OuterCone { file, args } => {
            run_action(Source::File(file), Action::OuterCone(args))
        }
        Cmd::Verify { file, args } => run_action(Source::File(file), Action::Verify(args)),
        Cmd::Noc { file, args } => run_action(Source::File(file), Action::Noc(args)),
        Cmd::Soc { file, args } => run_action(Source::File(file), Action::Soc(args)),
        Cmd::ErrorBound { file, args } => {
            run_action(Source::File(file), Action::ErrorBound(args))
        }
        Cmd::Export { file, args } => run_action(Source::File(file), Action::Export(args)),
        Cmd::Example { name, action } => run_action(Source::Example(name), action),
        Cmd::List => {
            list_action();
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => {}
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
        Err(CliError::Analysis(msg)) => {
            eprintln!("aborted: {msg}");
            std::process::exit(2);
        }
    }
}
