//! File formats: problem files (input) and analysis reports (output).
//!
//! A problem file is a single JSON document describing one instance —
//! dimensions, ordering cone, feasible set, bifunction, optional
//! derivative family, optional scalar objective, and sampling knobs — so
//! that one file reproduces one analysis.  Reports are emitted as a
//! versioned envelope with the sampling seed recorded; rendering is
//! deterministic, so two runs with the same seed produce byte-identical
//! output.  Non-finite numbers (e.g. the vacuous interiority margin over
//! an origin-only cone) serialize as `null`.

use crate::approx::{
    AnalysisReport, ApproxCone, CorollaryCheck, HypothesisChecks, InclusionCheck, OuterMeta,
    SensitivityReport,
};
use crate::cones::{ConeError, ConvexCone, Polyhedron};
use crate::deriv::{DerivativeFamily, ScalarFn, Structure};
use crate::expr::ExprVector;
use crate::linalg::Mat;
use crate::optimality::{
    DirectionalReport, LocalMinReport, MpvecInstance, NocDecomposedReport, NocReport, OptError,
    SocReport,
};
use crate::problem::{ErrorBoundReport, ProblemError, Residual, SamplingConfig, VepInstance};
use crate::tangent::ConeEstimate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot parse {field}: {message}")]
    Parse { field: String, message: String },
    #[error("dimension mismatches: {}", .0.join("; "))]
    Dims(Vec<String>),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error("{0}")]
    NotExportable(String),
}

// ---------------------------------------------------------------------------
// Problem files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConeSpec {
    Orthant { dim: usize },
    Halfspaces { rows: Vec<Vec<f64>> },
    FullSpace { dim: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KSpec {
    FullSpace {
        n: usize,
    },
    Halfspaces {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BderivSpec {
    pub at: Vec<f64>,
    /// Row-major matrix of expressions in `z`: one inner list per output
    /// component, one entry per unknown.
    pub matrix_exprs: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub expr: String,
    /// One of `smooth`, `convex`, `concave`, `generic`.
    pub structure: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingSpec {
    pub radius: f64,
    pub count: usize,
    pub seed: u64,
    pub include: Vec<Vec<f64>>,
    pub restrict_error_bound_to_feasible: bool,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        let c = SamplingConfig::default();
        SamplingSpec {
            radius: c.radius,
            count: c.count,
            seed: c.seed,
            include: c.include,
            restrict_error_bound_to_feasible: c.restrict_error_bound_to_feasible,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub dims: Dims,
    pub cone: ConeSpec,
    #[serde(rename = "K")]
    pub k: KSpec,
    pub f: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bderiv: Option<BderivSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingSpec>,
}

fn parse_structure(s: &str) -> Result<Structure, ReportError> {
    Ok(match s {
        "smooth" => Structure::Smooth,
        "convex" => Structure::Convex,
        "concave" => Structure::Concave,
        "generic" => Structure::Generic,
        other => {
            return Err(ReportError::Parse {
                field: "objective.structure".into(),
                message: format!(
                    "unknown structure {other:?} (expected smooth, convex, concave or generic)"
                ),
            })
        }
    })
}

fn structure_str(s: Structure) -> &'static str {
    match s {
        Structure::Smooth => "smooth",
        Structure::Convex => "convex",
        Structure::Concave => "concave",
        Structure::Generic => "generic",
    }
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("problem files serialize");
        s.push('\n');
        s
    }

    /// Build the instance, collecting every dimension mismatch before
    /// failing so the diagnostics list all offending fields at once.
    pub fn to_vep(&self) -> Result<VepInstance, ReportError> {
        let n = self.dims.n;
        let m = self.dims.m;
        let mut issues: Vec<String> = Vec::new();

        if self.f.len() != m {
            issues.push(format!("f has {} components, dims.m is {}", self.f.len(), m));
        }
        let f = ExprVector::parse(&self.f.join("; ")).map_err(|e| ReportError::Parse {
            field: "f".into(),
            message: e.to_string(),
        })?;
        if f.max_x > n {
            issues.push(format!("f references x{} but dims.n is {}", f.max_x, n));
        }
        if f.max_u > 0 {
            issues.push("f must not reference direction variables u".into());
        }

        let cone = match &self.cone {
            ConeSpec::Orthant { dim } => {
                if *dim != m {
                    issues.push(format!("cone.orthant.dim is {dim}, dims.m is {m}"));
                }
                ConvexCone::orthant(m)
            }
            ConeSpec::FullSpace { dim } => {
                if *dim != m {
                    issues.push(format!("cone.full-space.dim is {dim}, dims.m is {m}"));
                }
                ConvexCone::full_space(m)
            }
            ConeSpec::Halfspaces { rows } => {
                for (i, r) in rows.iter().enumerate() {
                    if r.len() != m {
                        issues.push(format!(
                            "cone.halfspaces.rows[{i}] has {} entries, dims.m is {m}",
                            r.len()
                        ));
                    }
                }
                if issues.is_empty() {
                    ConvexCone::halfspaces(Mat::from_rows(rows.clone(), m))
                } else {
                    ConvexCone::full_space(m)
                }
            }
        };

        let k = match &self.k {
            KSpec::FullSpace { n: kn } => {
                if *kn != n {
                    issues.push(format!("K.full-space.n is {kn}, dims.n is {n}"));
                }
                Some(Polyhedron::full_space(n))
            }
            KSpec::Halfspaces { a, b } => {
                let mut shaped = true;
                for (i, r) in a.iter().enumerate() {
                    if r.len() != n {
                        issues.push(format!(
                            "K.A[{i}] has {} entries, dims.n is {n}",
                            r.len()
                        ));
                        shaped = false;
                    }
                }
                if a.len() != b.len() {
                    issues.push(format!("K.A has {} rows, K.b has {}", a.len(), b.len()));
                    shaped = false;
                }
                if shaped {
                    match Polyhedron::new(Mat::from_rows(a.clone(), n), b.clone()) {
                        Ok(p) => Some(p),
                        Err(e) => {
                            return Err(ReportError::Parse {
                                field: "K".into(),
                                message: e.to_string(),
                            })
                        }
                    }
                } else {
                    None
                }
            }
        };

        let deriv = match &self.bderiv {
            None => None,
            Some(bd) => {
                if bd.at.len() != n {
                    issues.push(format!(
                        "bderiv.at has {} coordinates, dims.n is {n}",
                        bd.at.len()
                    ));
                }
                if bd.matrix_exprs.len() != m {
                    issues.push(format!(
                        "bderiv.matrix_exprs has {} rows, dims.m is {m}",
                        bd.matrix_exprs.len()
                    ));
                }
                for (i, row) in bd.matrix_exprs.iter().enumerate() {
                    if row.len() != n {
                        issues.push(format!(
                            "bderiv.matrix_exprs[{i}] has {} entries, dims.n is {n}",
                            row.len()
                        ));
                    }
                }
                if issues.is_empty() {
                    let flat = bd.matrix_exprs.concat().join("; ");
                    let entries =
                        ExprVector::parse(&flat).map_err(|e| ReportError::Parse {
                            field: "bderiv.matrix_exprs".into(),
                            message: e.to_string(),
                        })?;
                    match DerivativeFamily::matrix_entries(bd.at.clone(), entries, m, n) {
                        Ok(fam) => Some(fam),
                        Err(e) => {
                            return Err(ReportError::Parse {
                                field: "bderiv".into(),
                                message: e.to_string(),
                            })
                        }
                    }
                } else {
                    None
                }
            }
        };

        let sampling = self.sampling.clone().unwrap_or_default();
        for (i, zp) in sampling.include.iter().enumerate() {
            if zp.len() != n {
                issues.push(format!(
                    "sampling.include[{i}] has {} coordinates, dims.n is {n}",
                    zp.len()
                ));
            }
        }

        if !issues.is_empty() {
            return Err(ReportError::Dims(issues));
        }
        let config = SamplingConfig {
            radius: sampling.radius,
            count: sampling.count,
            seed: sampling.seed,
            include: sampling.include,
            restrict_error_bound_to_feasible: sampling.restrict_error_bound_to_feasible,
        };
        Ok(VepInstance::new(cone, k.expect("shape-checked"), f, deriv, config)?)
    }

    /// Build the minimization instance; requires an `objective` block
    /// and the candidate point (typically from the command line).
    pub fn to_mpvec(&self, candidate: Vec<f64>) -> Result<MpvecInstance, ReportError> {
        let obj = self.objective.as_ref().ok_or_else(|| ReportError::Parse {
            field: "objective".into(),
            message: "missing; this analysis needs an objective block".into(),
        })?;
        let structure = parse_structure(&obj.structure)?;
        let fun = ScalarFn::parse(&obj.expr, structure).map_err(|e| ReportError::Parse {
            field: "objective.expr".into(),
            message: e.to_string(),
        })?;
        let vep = self.to_vep()?;
        Ok(MpvecInstance::new(vep, fun, candidate)?)
    }

    pub fn from_vep(inst: &VepInstance) -> Self {
        let m = inst.m();
        let n = inst.n();
        let cone = if inst.c.is_full_space() {
            ConeSpec::FullSpace { dim: m }
        } else {
            let rows = inst.c.halfspace_rows().expect("non-full cones carry rows");
            ConeSpec::Halfspaces { rows: rows.rows_iter().map(|r| r.to_vec()).collect() }
        };
        let k = if inst.k.a.rows == 0 {
            KSpec::FullSpace { n }
        } else {
            KSpec::Halfspaces {
                a: inst.k.a.rows_iter().map(|r| r.to_vec()).collect(),
                b: inst.k.b.clone(),
            }
        };
        let f = inst.f.components.iter().map(|c| c.to_string()).collect();
        let bderiv = inst.deriv.as_ref().and_then(|fam| {
            fam.matrix_entry_sources().map(|flat| BderivSpec {
                at: fam.base().to_vec(),
                matrix_exprs: flat.chunks(fam.input_dim()).map(|c| c.to_vec()).collect(),
            })
        });
        let s = &inst.sampling;
        ProblemFile {
            dims: Dims { n, m },
            cone,
            k,
            f,
            bderiv,
            objective: None,
            sampling: Some(SamplingSpec {
                radius: s.radius,
                count: s.count,
                seed: s.seed,
                include: s.include.clone(),
                restrict_error_bound_to_feasible: s.restrict_error_bound_to_feasible,
            }),
        }
    }

    pub fn from_mpvec(mp: &MpvecInstance) -> Self {
        let mut file = Self::from_vep(&mp.vep);
        file.objective = Some(ObjectiveSpec {
            expr: mp.objective.expr.to_string(),
            structure: structure_str(mp.objective.structure).to_string(),
        });
        file
    }
}

// ---------------------------------------------------------------------------
// Report JSON
// ---------------------------------------------------------------------------

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn verdict_str<T: std::fmt::Debug>(v: &T) -> String {
    // CamelCase debug name -> kebab-case.
    let raw = format!("{v:?}");
    let mut out = String::new();
    for (i, ch) in raw.chars().enumerate() {
        if ch.is_ascii_uppercase() {
            if i > 0 {
                out.push('-');
            }
            out.push(ch.to_ascii_lowercase());
        } else {
            out.push(ch);
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualJson {
    pub at: Vec<f64>,
    pub value: f64,
    pub argmax_z: Vec<f64>,
    pub sample_size: usize,
}

pub fn residual_json(at: &[f64], r: &Residual) -> ResidualJson {
    ResidualJson {
        at: at.to_vec(),
        value: r.value,
        argmax_z: r.argmax_z.clone(),
        sample_size: r.sample_size,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckEqJson {
    pub at: Vec<f64>,
    pub residual: f64,
    pub tol: f64,
    pub equilibrium: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExactConeJson {
    FullSpace,
    Halfspaces { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionJson {
    pub direction: Vec<f64>,
    /// Inner/outer tables: worst constraint margin.  Sampled estimates:
    /// the distance-quotient score.
    pub value: Option<f64>,
    pub member: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OuterMetaJson {
    pub skipped_interior: usize,
    pub zero_values: usize,
    pub contributing: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeJson {
    pub notion: String,
    pub base: Vec<f64>,
    pub exact: Option<ExactConeJson>,
    pub member_count: usize,
    pub directions: Vec<DirectionJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<OuterMetaJson>,
}

fn exact_cone_json(cone: &ConvexCone) -> ExactConeJson {
    if cone.is_full_space() {
        ExactConeJson::FullSpace
    } else {
        let rows = cone.halfspace_rows().expect("non-full cones carry rows");
        ExactConeJson::Halfspaces { rows: rows.rows_iter().map(|r| r.to_vec()).collect() }
    }
}

pub fn cone_json(cone: &ApproxCone, base: &[f64], meta: Option<&OuterMeta>) -> ConeJson {
    ConeJson {
        notion: verdict_str(&cone.notion),
        base: base.to_vec(),
        exact: cone.exact.as_ref().map(exact_cone_json),
        member_count: cone.member_count(),
        directions: cone
            .table
            .iter()
            .map(|d| DirectionJson {
                direction: d.direction.clone(),
                value: finite(d.margin),
                member: d.member,
            })
            .collect(),
        resolution: None,
        threshold: None,
        meta: meta.map(|m| OuterMetaJson {
            skipped_interior: m.skipped_interior,
            zero_values: m.zero_values,
            contributing: m.contributing,
        }),
    }
}

pub fn estimate_json(est: &ConeEstimate) -> ConeJson {
    ConeJson {
        notion: verdict_str(&est.notion),
        base: est.base.clone(),
        exact: None,
        member_count: est.members().count(),
        directions: est
            .directions
            .iter()
            .map(|d| DirectionJson {
                direction: d.direction.clone(),
                value: finite(d.score),
                member: d.member,
            })
            .collect(),
        resolution: Some(est.resolution),
        threshold: Some(est.threshold),
        meta: None,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBoundRowJson {
    pub radius: f64,
    pub kappa: Option<f64>,
    pub samples_used: usize,
    pub skipped_equilibria: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBoundJson {
    pub verdict: String,
    pub rows: Vec<ErrorBoundRowJson>,
}

pub fn error_bound_json(r: &ErrorBoundReport) -> ErrorBoundJson {
    ErrorBoundJson {
        verdict: verdict_str(&r.verdict),
        rows: r
            .rows
            .iter()
            .map(|row| ErrorBoundRowJson {
                radius: row.radius,
                kappa: row.kappa.and_then(finite),
                samples_used: row.samples_used,
                skipped_equilibria: row.skipped_equilibria,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesesJson {
    pub polyhedral_k: bool,
    pub f_vanishes: bool,
    pub max_f_norm: f64,
    pub strict_bdiff: bool,
    pub equicontinuity_modulus: Option<f64>,
    pub equicontinuity_evidence: bool,
    pub error_bound: String,
    pub inner_gate: bool,
    pub all_pass: bool,
}

pub fn hypotheses_json(h: &HypothesisChecks) -> HypothesesJson {
    HypothesesJson {
        polyhedral_k: h.polyhedral_k,
        f_vanishes: h.f_vanishes,
        max_f_norm: h.max_f_norm,
        strict_bdiff: h.strict_bdiff,
        equicontinuity_modulus: finite(h.equicontinuity_modulus),
        equicontinuity_evidence: h.equicontinuity_evidence,
        error_bound: verdict_str(&h.error_bound),
        inner_gate: h.inner_gate,
        all_pass: h.all_pass,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InclusionJson {
    pub name: String,
    pub holds_on_sample: bool,
    pub asserted: bool,
    pub counterexamples: Vec<Vec<f64>>,
    pub strict: bool,
    pub strict_witnesses: Vec<Vec<f64>>,
    pub indeterminate: usize,
}

fn inclusion_json(c: &InclusionCheck) -> InclusionJson {
    InclusionJson {
        name: c.name.to_string(),
        holds_on_sample: c.holds_on_sample,
        asserted: c.asserted,
        counterexamples: c.counterexamples.clone(),
        strict: c.strict,
        strict_witnesses: c.strict_witnesses.clone(),
        indeterminate: c.indeterminate,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorollaryJson {
    pub equal_on_grid: bool,
    pub mismatches: Vec<Vec<f64>>,
    pub exact_cones_equal: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityJson {
    pub radius: f64,
    pub doubled_radius: f64,
    pub inner_members: usize,
    pub inner_members_doubled: usize,
    pub witness_margin: Option<f64>,
    pub witness_margin_doubled: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisJson {
    pub base: Vec<f64>,
    pub tol_eq: f64,
    pub cloud_size: usize,
    pub oracle_resolution: f64,
    pub z_sample_size: usize,
    pub inner: ConeJson,
    pub outer: ConeJson,
    pub contingent: ConeJson,
    pub hypotheses: HypothesesJson,
    pub inner_inclusion: InclusionJson,
    pub outer_inclusion: InclusionJson,
    pub corollary: Option<CorollaryJson>,
    pub sensitivity: Option<SensitivityJson>,
    /// Optimality block, present when the problem carries an objective.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimality: Option<OptimalityJson>,
}

pub fn analysis_json(r: &AnalysisReport) -> AnalysisJson {
    AnalysisJson {
        base: r.base.clone(),
        tol_eq: r.tol_eq,
        cloud_size: r.cloud_size,
        oracle_resolution: r.oracle_resolution,
        z_sample_size: r.z_sample_size,
        inner: cone_json(&r.inner, &r.base, None),
        outer: cone_json(&r.outer, &r.base, Some(&r.outer_meta)),
        contingent: estimate_json(&r.contingent),
        hypotheses: hypotheses_json(&r.hypotheses),
        inner_inclusion: inclusion_json(&r.inner_inclusion),
        outer_inclusion: inclusion_json(&r.outer_inclusion),
        corollary: r.corollary.as_ref().map(|c: &CorollaryCheck| CorollaryJson {
            equal_on_grid: c.equal_on_grid,
            mismatches: c.mismatches.clone(),
            exact_cones_equal: c.exact_cones_equal,
        }),
        sensitivity: r.sensitivity.as_ref().map(|s: &SensitivityReport| SensitivityJson {
            radius: s.radius,
            doubled_radius: s.doubled_radius,
            inner_members: s.inner_members,
            inner_members_doubled: s.inner_members_doubled,
            witness_margin: s.witness_margin.and_then(finite),
            witness_margin_doubled: s.witness_margin_doubled.and_then(finite),
        }),
        optimality: None,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NocJson {
    pub verdict: String,
    pub applicable: bool,
    pub generators: Vec<Vec<f64>>,
    pub violating_generator: Option<Vec<f64>>,
    pub violation_witness: Option<Vec<f64>>,
    pub summary: String,
    pub hypotheses: HypothesesJson,
}

pub fn noc_json(r: &NocReport) -> NocJson {
    NocJson {
        verdict: verdict_str(&r.verdict),
        applicable: r.applicable,
        generators: r.generators.clone(),
        violating_generator: r.violating_generator.clone(),
        violation_witness: r.violation_witness.clone(),
        summary: r.summary.clone(),
        hypotheses: hypotheses_json(&r.hypotheses),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NocDecomposedJson {
    pub verdict: String,
    pub qualification: bool,
    pub qualification_margin: Option<f64>,
    pub concavity_ok: bool,
    pub concavity_worst: f64,
    pub decomposition_feasible: Option<bool>,
    pub fallback: bool,
    pub agree: Option<bool>,
    pub summary: String,
    pub direct: NocJson,
}

pub fn noc_decomposed_json(r: &NocDecomposedReport) -> NocDecomposedJson {
    NocDecomposedJson {
        verdict: verdict_str(&r.verdict),
        qualification: r.qualification,
        qualification_margin: r.qualification_margin.and_then(finite),
        concavity_ok: r.concavity_ok,
        concavity_worst: r.concavity_worst,
        decomposition_feasible: r.decomposition_feasible,
        fallback: r.fallback,
        agree: r.agree,
        summary: r.summary.clone(),
        direct: noc_json(&r.direct),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SocWitnessJson {
    pub v: Vec<f64>,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SocJson {
    pub verdict: String,
    pub applicable: bool,
    pub outer_pointed: bool,
    pub witness: Option<SocWitnessJson>,
    pub candidates_checked: usize,
    pub summary: String,
    pub hypotheses: HypothesesJson,
}

pub fn soc_json(r: &SocReport) -> SocJson {
    SocJson {
        verdict: verdict_str(&r.verdict),
        applicable: r.applicable,
        outer_pointed: r.outer_pointed,
        witness: r
            .witness
            .as_ref()
            .map(|w| SocWitnessJson { v: w.v.clone(), margin: finite(w.margin) }),
        candidates_checked: r.candidates_checked,
        summary: r.summary.clone(),
        hypotheses: hypotheses_json(&r.hypotheses),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BruteJson {
    pub verdict: String,
    pub value_at_candidate: f64,
    pub compared: usize,
    pub best_other_point: Option<Vec<f64>>,
    pub best_other_value: Option<f64>,
}

pub fn brute_json(r: &LocalMinReport) -> BruteJson {
    BruteJson {
        verdict: verdict_str(&r.verdict),
        value_at_candidate: r.value_at_candidate,
        compared: r.compared,
        best_other_point: r.best_other.as_ref().map(|(p, _)| p.clone()),
        best_other_value: r.best_other.as_ref().map(|(_, v)| *v),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeJson {
    pub direction: Vec<f64>,
    pub value: Option<f64>,
    pub unstable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionalJson {
    pub cone: String,
    pub verdict: String,
    pub probes: Vec<ProbeJson>,
    pub violations: Vec<ProbeJson>,
    pub unstable: usize,
}

pub fn directional_json(r: &DirectionalReport) -> DirectionalJson {
    let probe = |p: &crate::optimality::DirectionalProbe| ProbeJson {
        direction: p.direction.clone(),
        value: finite(p.value),
        unstable: p.unstable,
    };
    DirectionalJson {
        cone: verdict_str(&r.choice),
        verdict: verdict_str(&r.verdict),
        probes: r.probes.iter().map(probe).collect(),
        violations: r.violations.iter().map(probe).collect(),
        unstable: r.unstable,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimalityJson {
    pub candidate: Vec<f64>,
    pub objective: String,
    pub structure: String,
    pub noc: NocJson,
    pub decomposed: Option<NocDecomposedJson>,
    pub soc: SocJson,
    pub brute: Option<BruteJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportBody {
    Residual(ResidualJson),
    CheckEq(CheckEqJson),
    Cone(ConeJson),
    Verify(Box<AnalysisJson>),
    ErrorBound(ErrorBoundJson),
    Noc(NocJson),
    NocDecomposed(NocDecomposedJson),
    Soc(SocJson),
    Brute(BruteJson),
    Directional(DirectionalJson),
}

/// Versioned envelope for every JSON report the tool emits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    /// Sampling seed the analysis ran with.
    pub seed: u64,
    pub report: ReportBody,
}

impl Report {
    pub fn new(seed: u64, body: ReportBody) -> Self {
        Report { schema_version: SCHEMA_VERSION, seed, report: body }
    }

    /// Deterministic pretty rendering with a trailing newline.
    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::verify_inclusions;
    use crate::approx::VerifyOptions;
    use crate::problem::EquiOracle;
    use crate::registry::{golden_vep, load_example, Loaded, MP_NAMES, VEP_NAMES};
    use crate::sampling::TGrid;

    #[test]
    fn registry_instances_round_trip_through_problem_files() {
        for name in VEP_NAMES {
            let Loaded::Vep(inst) = load_example(name).unwrap() else { unreachable!() };
            let text = ProblemFile::from_vep(&inst).to_json();
            let back = ProblemFile::from_json(&text).unwrap().to_vep().unwrap();
            assert_eq!(back.n(), inst.n(), "{name}");
            assert_eq!(back.m(), inst.m(), "{name}");
            assert_eq!(back.z_sample().len(), inst.z_sample().len(), "{name}");
            let base = golden_vep(name).unwrap().base;
            let probe: Vec<f64> = base.iter().map(|c| c + 0.37).collect();
            for x in [&base, &probe] {
                let a = inst.residual(x).unwrap().value;
                let b = back.residual(x).unwrap().value;
                assert!((a - b).abs() <= 1e-12 * (1.0 + a), "{name}: residual drift at {x:?}");
            }
            match (&inst.deriv, &back.deriv) {
                (Some(fa), Some(fb)) => {
                    let z = inst.z_sample()[0].clone();
                    let u: Vec<f64> = vec![0.3; inst.n()];
                    let ya = fa.map_at(&z).unwrap().apply(&u).unwrap();
                    let yb = fb.map_at(&z).unwrap().apply(&u).unwrap();
                    for (a, b) in ya.iter().zip(&yb) {
                        assert!((a - b).abs() <= 1e-12, "{name}: derivative drift");
                    }
                }
                (None, None) => {}
                _ => panic!("{name}: derivative family lost in round trip"),
            }
        }
    }

    #[test]
    fn minimization_entries_round_trip_with_objectives() {
        for name in MP_NAMES {
            let Loaded::Mpvec(mp) = load_example(name).unwrap() else { unreachable!() };
            let text = ProblemFile::from_mpvec(&mp).to_json();
            let parsed = ProblemFile::from_json(&text).unwrap();
            let back = parsed.to_mpvec(mp.candidate.clone()).unwrap();
            assert_eq!(back.objective.structure, mp.objective.structure, "{name}");
            for x in [&mp.candidate, &vec![0.25; mp.vep.n()]] {
                let a = mp.objective.eval(x).unwrap();
                let b = back.objective.eval(x).unwrap();
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{name}: objective drift");
            }
        }
    }

    #[test]
    fn dimension_diagnostics_list_every_offending_field() {
        let text = r#"{
            "dims": {"n": 2, "m": 2},
            "cone": {"orthant": {"dim": 3}},
            "K": {"halfspaces": {"A": [[1.0, 0.0], [0.0]], "b": [0.0, 0.0]}},
            "f": ["x1"],
            "sampling": {"include": [[1.0]]}
        }"#;
        let err = ProblemFile::from_json(text).unwrap().to_vep().unwrap_err();
        let msg = err.to_string();
        for needle in ["cone.orthant.dim", "K.A[1]", "f has 1 components", "sampling.include[0]"] {
            assert!(msg.contains(needle), "missing {needle:?} in {msg}");
        }
    }

    #[test]
    fn malformed_expressions_name_their_field() {
        let text = r#"{
            "dims": {"n": 1, "m": 1},
            "cone": {"orthant": {"dim": 1}},
            "K": {"full-space": {"n": 1}},
            "f": ["x1 + "]
        }"#;
        let err = ProblemFile::from_json(text).unwrap().to_vep().unwrap_err();
        match err {
            ReportError::Parse { field, .. } => assert_eq!(field, "f"),
            other => panic!("expected a parse diagnostic, got {other}"),
        }
    }

    #[test]
    fn unknown_structure_is_rejected_with_options() {
        let text = r#"{
            "dims": {"n": 1, "m": 1},
            "cone": {"orthant": {"dim": 1}},
            "K": {"full-space": {"n": 1}},
            "f": ["x1"],
            "objective": {"expr": "x1", "structure": "wobbly"}
        }"#;
        let err =
            ProblemFile::from_json(text).unwrap().to_mpvec(vec![0.0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("objective.structure") && msg.contains("smooth"), "{msg}");
    }

    #[test]
    fn rendering_is_deterministic_and_versioned() {
        let body = ReportBody::Residual(ResidualJson {
            at: vec![0.5],
            value: 0.125,
            argmax_z: vec![-1.0],
            sample_size: 513,
        });
        let a = Report::new(7, body.clone()).render();
        let b = Report::new(7, body).render();
        assert_eq!(a, b);
        assert!(a.contains("\"schema_version\": 1"));
        assert!(a.contains("\"seed\": 7"));
        assert!(a.ends_with('\n'));
    }

    #[test]
    fn non_finite_margins_serialize_as_null() {
        let soc = SocJson {
            verdict: "holds".into(),
            applicable: true,
            outer_pointed: true,
            witness: Some(SocWitnessJson { v: vec![1.0, 1.0], margin: finite(f64::INFINITY) }),
            candidates_checked: 1,
            summary: "s".into(),
            hypotheses: HypothesesJson {
                polyhedral_k: true,
                f_vanishes: true,
                max_f_norm: 0.0,
                strict_bdiff: true,
                equicontinuity_modulus: finite(f64::NAN),
                equicontinuity_evidence: true,
                error_bound: "holds".into(),
                inner_gate: true,
                all_pass: true,
            },
        };
        let text = Report::new(0, ReportBody::Soc(soc)).render();
        assert!(text.contains("\"margin\": null"));
        assert!(text.contains("\"equicontinuity_modulus\": null"));
    }

    #[test]
    fn full_analysis_report_serializes_and_parses_back() {
        let Loaded::Vep(inst) = load_example("identity-orthant").unwrap() else {
            unreachable!()
        };
        let oracle = EquiOracle::build(&inst, &[0.0, 0.0]).unwrap();
        let opts = VerifyOptions {
            dir_count: 16,
            grid: TGrid::default(),
            error_bound_radii: vec![1.0, 0.1],
            sensitivity: false,
        };
        let report = verify_inclusions(&inst, &oracle, &[0.0, 0.0], &opts).unwrap();
        let text = Report::new(0, ReportBody::Verify(Box::new(analysis_json(&report)))).render();
        let back: Report = serde_json::from_str(&text).unwrap();
        let ReportBody::Verify(v) = back.report else { panic!("round trip kept the kind") };
        assert_eq!(v.inner.member_count, report.inner.member_count());
        assert!(matches!(v.inner.exact, Some(ExactConeJson::Halfspaces { .. })));
        assert_eq!(v.hypotheses.all_pass, report.hypotheses.all_pass);
        assert_eq!(v.contingent.directions.len(), report.contingent.directions.len());
    }
}
