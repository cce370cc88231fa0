//! First-order optimality analysis for minimizing a scalar objective over
//! the solution set of a vector equilibrium problem.
//!
//! The candidate point is always certified as a solution first.  Four
//! complementary checks are provided:
//!
//! * [`directional_probe`]: sampled directional-derivative necessary
//!   conditions over the radial or contingent cone of the solution set;
//! * [`noc_check`]: the dual necessary condition — the negated upper
//!   subdifferential of the objective must land in the polar of the inner
//!   approximation cone;
//! * [`noc_decomposed`]: the same condition split through a qualification
//!   LP into a polar-plus-normal-cone Minkowski decomposition;
//! * [`soc_check`]: the sufficient condition — some regular subgradient,
//!   negated, lies strictly inside the polar of the outer approximation
//!   cone, certifying a strict local minimum.
//!
//! Every verdict carries the hypothesis-diagnostic block; a condition that
//! holds while its governing hypotheses failed is reported as holding
//! **but inapplicable**, never silently.  [`local_min_brute`] is the
//! ground-truth oracle the test suite pairs the verdicts against.

use crate::approx::{
    c_concavity_check, derivative_halfspace_rows, hypothesis_checks, inner_cone, outer_cone,
    ApproxCone, ApproxError, HypothesisChecks,
};
use crate::cones::ConeError;
use crate::deriv::{
    dini_derivative, regular_subdiff_member, subdiff_candidates, upper_subdiff_member, DerivError,
    DiniMode, ScalarFn, Structure,
};
use crate::exec;
use crate::linalg::{dot, norm, sub, Mat};
use crate::lp::{self, Lp, LpError, LpOutcome, Rel};
use crate::problem::{EquiOracle, ProblemError, VepInstance, DEFAULT_ERROR_BOUND_RADII};
use crate::sampling::{sphere_grid, TGrid};
use crate::tangent::{contingent_cone_sampled, radial_cone_member, TangentError, DEFAULT_EPS_GRID};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptError {
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Deriv(#[from] DerivError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Tangent(#[from] TangentError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("candidate has {got} coordinates, the problem has {expected}")]
    CandidateDim { expected: usize, got: usize },
    #[error("objective references x{max_x} but the problem has {n} unknowns")]
    ObjectiveArity { max_x: usize, n: usize },
    #[error("objective must depend on x only")]
    ObjectiveUsesParams,
    #[error("candidate is not an equilibrium (residual {residual:.3e})")]
    CandidateNotEquilibrium { residual: f64 },
}

/// A scalar minimization problem over the solution set of an equilibrium
/// instance, with a candidate point to analyze.
#[derive(Debug, Clone)]
pub struct MpvecInstance {
    pub vep: VepInstance,
    pub objective: ScalarFn,
    pub candidate: Vec<f64>,
}

impl MpvecInstance {
    pub fn new(
        vep: VepInstance,
        objective: ScalarFn,
        candidate: Vec<f64>,
    ) -> Result<Self, OptError> {
        if candidate.len() != vep.n() {
            return Err(OptError::CandidateDim { expected: vep.n(), got: candidate.len() });
        }
        if objective.expr.max_x > vep.n() {
            return Err(OptError::ObjectiveArity { max_x: objective.expr.max_x, n: vep.n() });
        }
        if objective.expr.max_z > 0 || objective.expr.max_u > 0 {
            return Err(OptError::ObjectiveUsesParams);
        }
        Ok(MpvecInstance { vep, objective, candidate })
    }

    /// Solution-set oracle anchored at the candidate.
    pub fn oracle(&self) -> Result<EquiOracle<'_>, ProblemError> {
        EquiOracle::build(&self.vep, &self.candidate)
    }

    fn certify(&self, oracle: &EquiOracle<'_>) -> Result<(), OptError> {
        if !oracle.is_equilibrium(&self.candidate)? {
            return Err(OptError::CandidateNotEquilibrium {
                residual: self.vep.residual(&self.candidate)?.value,
            });
        }
        Ok(())
    }
}

const PROBE_TOL: f64 = 1e-6;
const POLAR_TOL: f64 = 1e-7;
/// Relative margin below which interior verdicts are treated as ties.
const INTERIOR_TOL: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Directional necessary conditions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeChoice {
    /// Radial (feasible) directions of the solution set; paired with the
    /// upper Dini derivative.
    Radial,
    /// Contingent directions; paired with the upper Dini–Hadamard
    /// derivative.
    Contingent,
}

#[derive(Debug, Clone)]
pub struct DirectionalProbe {
    pub direction: Vec<f64>,
    pub value: f64,
    /// Step-grid tail did not settle; the estimate is suspect.
    pub unstable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeVerdict {
    NoViolation,
    Violated,
    /// No nonzero directions in the sampled cone — nothing to check.
    Vacuous,
}

#[derive(Debug, Clone)]
pub struct DirectionalReport {
    pub choice: ConeChoice,
    pub verdict: ProbeVerdict,
    /// Every sampled cone direction with its derivative value.
    pub probes: Vec<DirectionalProbe>,
    /// The probes with value below `-tol`.
    pub violations: Vec<DirectionalProbe>,
    pub unstable: usize,
}

/// Sample directions of the solution set's radial or contingent cone at
/// the candidate and evaluate the matching upper directional derivative;
/// any value below `-tol` violates the first-order necessary condition.
pub fn directional_probe(
    mp: &MpvecInstance,
    oracle: &EquiOracle<'_>,
    choice: ConeChoice,
    dir_count: usize,
) -> Result<DirectionalReport, OptError> {
    mp.certify(oracle)?;
    let dirs = sphere_grid(mp.vep.n(), dir_count);
    let members: Vec<Vec<f64>> = match choice {
        ConeChoice::Radial => {
            let mut kept = Vec::new();
            for d in &dirs {
                if radial_cone_member(oracle, &mp.candidate, d, &DEFAULT_EPS_GRID)? {
                    kept.push(d.clone());
                }
            }
            kept
        }
        ConeChoice::Contingent => {
            let est = contingent_cone_sampled(oracle, &mp.candidate, &TGrid::default(), &dirs)?;
            est.members().map(|s| s.direction.clone()).collect()
        }
    };
    if members.is_empty() {
        return Ok(DirectionalReport {
            choice,
            verdict: ProbeVerdict::Vacuous,
            probes: Vec::new(),
            violations: Vec::new(),
            unstable: 0,
        });
    }
    let mode = match choice {
        ConeChoice::Radial => DiniMode::DiniUpper,
        ConeChoice::Contingent => DiniMode::DhUpper,
    };
    let per: Vec<Result<DirectionalProbe, OptError>> = exec::map_slice(&members, |w| {
        let est = dini_derivative(&mp.objective, &mp.candidate, w, mode)?;
        Ok(DirectionalProbe { direction: w.clone(), value: est.value, unstable: est.unstable })
    });
    let probes = per.into_iter().collect::<Result<Vec<_>, _>>()?;
    let violations: Vec<DirectionalProbe> =
        probes.iter().filter(|p| p.value < -PROBE_TOL).cloned().collect();
    let unstable = probes.iter().filter(|p| p.unstable).count();
    let verdict =
        if violations.is_empty() { ProbeVerdict::NoViolation } else { ProbeVerdict::Violated };
    Ok(DirectionalReport { choice, verdict, probes, violations, unstable })
}

// ---------------------------------------------------------------------------
// Subdifferential generators
// ---------------------------------------------------------------------------

/// Finite description of a subdifferential for the dual checks: a
/// generator list (exhaustive for structured objectives, sampled
/// otherwise) or provably/empirically empty.
#[derive(Debug, Clone)]
pub enum SubdiffDesc {
    Generators(Vec<Vec<f64>>),
    Empty,
}

fn dedupe_points(points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut unique: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !unique.iter().any(|q| norm(&sub(q, &p)) <= 1e-9) {
            unique.push(p);
        }
    }
    unique
}

/// Finite-difference gradients at small offsets around `base`; their
/// spread distinguishes a differentiable point (singleton subdifferential)
/// from a kink.
fn gradient_spread(fun: &ScalarFn, base: &[f64]) -> Result<(Vec<f64>, f64), OptError> {
    let n = base.len();
    let t = 1e-4 * (1.0 + norm(base));
    let g0 = fun.gradient(base)?;
    let mut spread = 0.0_f64;
    for w in sphere_grid(n, 8) {
        let at: Vec<f64> = base.iter().zip(&w).map(|(b, d)| b + t * d).collect();
        let g = fun.gradient(&at)?;
        spread = spread.max(norm(&sub(&g, &g0)));
    }
    Ok((g0, spread))
}

fn filtered_candidates(
    fun: &ScalarFn,
    base: &[f64],
    upper: bool,
) -> Result<SubdiffDesc, OptError> {
    let sphere = sphere_grid(base.len(), 16);
    let cands = subdiff_candidates(fun, base, &sphere)?;
    let mut keep = Vec::new();
    for v in cands {
        let member = if upper {
            upper_subdiff_member(fun, base, &v, &sphere)?
        } else {
            regular_subdiff_member(fun, base, &v, &sphere)?
        };
        if member {
            keep.push(v);
        }
    }
    let keep = dedupe_points(keep);
    Ok(if keep.is_empty() { SubdiffDesc::Empty } else { SubdiffDesc::Generators(keep) })
}

fn singleton_or_empty(fun: &ScalarFn, base: &[f64]) -> Result<SubdiffDesc, OptError> {
    let (g, spread) = gradient_spread(fun, base)?;
    if spread <= 1e-4 * (1.0 + norm(&g)) {
        Ok(SubdiffDesc::Generators(vec![g]))
    } else {
        Ok(SubdiffDesc::Empty)
    }
}

/// Generators of the upper subdifferential at `base`.  Smooth objectives
/// give the gradient; concave ones harvest superdifferential extreme
/// points from nearby gradients; convex ones are a singleton where
/// differentiable and empty at kinks; generic objectives sample.
pub fn upper_subdiff_generators(fun: &ScalarFn, base: &[f64]) -> Result<SubdiffDesc, OptError> {
    match fun.structure {
        Structure::Smooth => Ok(SubdiffDesc::Generators(vec![fun.gradient(base)?])),
        Structure::Concave => filtered_candidates(fun, base, true),
        Structure::Convex => singleton_or_empty(fun, base),
        Structure::Generic => filtered_candidates(fun, base, true),
    }
}

/// Generators of the regular (Fréchet) subdifferential at `base` —
/// mirror image of [`upper_subdiff_generators`].
pub fn regular_subdiff_generators(fun: &ScalarFn, base: &[f64]) -> Result<SubdiffDesc, OptError> {
    match fun.structure {
        Structure::Smooth => Ok(SubdiffDesc::Generators(vec![fun.gradient(base)?])),
        Structure::Convex => filtered_candidates(fun, base, false),
        Structure::Concave => singleton_or_empty(fun, base),
        Structure::Generic => filtered_candidates(fun, base, false),
    }
}

// ---------------------------------------------------------------------------
// Polar membership
// ---------------------------------------------------------------------------

/// Is `u` in the negative polar of the cone?  Exact cones solve
/// `max <u, w> : w in cone, |w|_inf <= 1` (zero iff member, a positive
/// optimum yields a violating direction); sampled cones scan the table's
/// member directions.
fn polar_member(cone: &ApproxCone, u: &[f64]) -> Result<(bool, Option<Vec<f64>>), OptError> {
    let tol = POLAR_TOL * (1.0 + norm(u));
    if let Some(exact) = &cone.exact {
        let n = u.len();
        let rows = exact.halfspace_rows().unwrap_or_else(|| Mat::zeros(0, n));
        let mut lp_rows: Vec<(Vec<f64>, Rel, f64)> = Vec::new();
        for r in rows.rows_iter() {
            lp_rows.push((r.to_vec(), Rel::Ge, 0.0));
        }
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            lp_rows.push((e.clone(), Rel::Le, 1.0));
            lp_rows.push((e, Rel::Ge, -1.0));
        }
        let lp = Lp { n, maximize: true, objective: u.to_vec(), rows: lp_rows };
        match lp::solve(&lp)? {
            LpOutcome::Optimal { x, value } => {
                if value <= tol {
                    Ok((true, None))
                } else {
                    let len = norm(&x);
                    let w = if len > 1e-300 {
                        x.iter().map(|c| c / len).collect()
                    } else {
                        x
                    };
                    Ok((false, Some(w)))
                }
            }
            // The box makes the LP bounded and w = 0 keeps it feasible.
            _ => unreachable!("boxed polar program is always solvable"),
        }
    } else {
        let mut worst: Option<(f64, Vec<f64>)> = None;
        for d in cone.table.iter().filter(|d| d.member) {
            let val = dot(u, &d.direction);
            if worst.as_ref().is_none_or(|(w, _)| val > *w) {
                worst = Some((val, d.direction.clone()));
            }
        }
        match worst {
            Some((val, w)) if val > tol => Ok((false, Some(w))),
            _ => Ok((true, None)),
        }
    }
}

// ---------------------------------------------------------------------------
// Dual necessary condition
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondVerdict {
    Holds,
    Violated,
    /// The relevant subdifferential is empty; no information.
    Vacuous,
}

#[derive(Debug, Clone)]
pub struct NocReport {
    pub verdict: CondVerdict,
    /// Governing hypotheses established; only then is the condition
    /// genuinely necessary.
    pub applicable: bool,
    pub hypotheses: HypothesisChecks,
    pub generators: Vec<Vec<f64>>,
    pub violating_generator: Option<Vec<f64>>,
    /// Inner-cone direction pairing positively with the negated
    /// generator.
    pub violation_witness: Option<Vec<f64>>,
    pub summary: String,
}

fn noc_summary(verdict: CondVerdict, applicable: bool) -> String {
    match (verdict, applicable) {
        (CondVerdict::Holds, true) => "necessary condition holds".into(),
        (CondVerdict::Holds, false) => {
            "necessary condition holds, but its governing hypotheses were not established".into()
        }
        (CondVerdict::Violated, true) => {
            "necessary condition violated: the candidate is not a local minimum".into()
        }
        (CondVerdict::Violated, false) => {
            "dual inclusion violated, but its governing hypotheses were not established; \
             no conclusion"
                .into()
        }
        (CondVerdict::Vacuous, _) => {
            "upper subdifferential is empty: the condition carries no information".into()
        }
    }
}

/// Dual first-order necessary condition at the candidate: every upper
/// subdifferential generator, negated, must lie in the polar of the
/// inner approximation cone.
pub fn noc_check(mp: &MpvecInstance, oracle: &EquiOracle<'_>) -> Result<NocReport, OptError> {
    mp.certify(oracle)?;
    let hypotheses =
        hypothesis_checks(&mp.vep, oracle, &mp.candidate, &DEFAULT_ERROR_BOUND_RADII)?;
    let applicable = hypotheses.inner_gate && hypotheses.strict_bdiff;
    let generators = match upper_subdiff_generators(&mp.objective, &mp.candidate)? {
        SubdiffDesc::Empty => {
            return Ok(NocReport {
                verdict: CondVerdict::Vacuous,
                applicable,
                hypotheses,
                generators: Vec::new(),
                violating_generator: None,
                violation_witness: None,
                summary: noc_summary(CondVerdict::Vacuous, applicable),
            })
        }
        SubdiffDesc::Generators(g) => g,
    };
    let dirs = sphere_grid(mp.vep.n(), 32);
    let inner = inner_cone(&mp.vep, oracle, &mp.candidate, &dirs)?;
    for g in &generators {
        let minus: Vec<f64> = g.iter().map(|c| -c).collect();
        let (member, witness) = polar_member(&inner, &minus)?;
        if !member {
            return Ok(NocReport {
                verdict: CondVerdict::Violated,
                applicable,
                hypotheses,
                generators: generators.clone(),
                violating_generator: Some(g.clone()),
                violation_witness: witness,
                summary: noc_summary(CondVerdict::Violated, applicable),
            });
        }
    }
    Ok(NocReport {
        verdict: CondVerdict::Holds,
        applicable,
        hypotheses,
        generators,
        violating_generator: None,
        violation_witness: None,
        summary: noc_summary(CondVerdict::Holds, applicable),
    })
}

// ---------------------------------------------------------------------------
// Decomposed necessary condition
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct NocDecomposedReport {
    /// Best strict margin of a direction interior to the feasible
    /// tangent cone while satisfying every derivative constraint; `None`
    /// when no exact halfspace form exists.
    pub qualification_margin: Option<f64>,
    pub qualification: bool,
    pub concavity_ok: bool,
    pub concavity_worst: f64,
    pub verdict: CondVerdict,
    /// Whether every negated generator admitted the polar-plus-normal
    /// Minkowski split; `None` when the decomposition was not attempted.
    pub decomposition_feasible: Option<bool>,
    /// The direct dual test was used instead of the decomposition.
    pub fallback: bool,
    /// Decomposed and direct verdicts agree (only meaningful when both
    /// ran).
    pub agree: Option<bool>,
    pub direct: NocReport,
    pub summary: String,
}

/// Decomposed form of the dual necessary condition: a qualification LP
/// asks for a derivative-feasible direction strictly interior to the
/// feasible tangent cone; if one exists, each negated generator is split
/// as a sum of a derivative-polar element and a normal-cone element by
/// LP feasibility.  Without qualification the direct dual test is used
/// and noted.
pub fn noc_decomposed(
    mp: &MpvecInstance,
    oracle: &EquiOracle<'_>,
) -> Result<NocDecomposedReport, OptError> {
    mp.certify(oracle)?;
    let direct = noc_check(mp, oracle)?;
    let family = mp.vep.deriv.as_ref().ok_or(ApproxError::MissingDerivative)?;
    let concavity = c_concavity_check(family, &mp.vep.c, mp.vep.z_sample())?;

    let df_rows = derivative_halfspace_rows(&mp.vep)?;
    let tangent = crate::tangent::polyhedral_tangent(&mp.vep.k, &mp.candidate)?;
    let w_rows = tangent.halfspace_rows().unwrap_or_else(|| Mat::zeros(0, mp.vep.n()));

    let (qualification_margin, qualification) = match &df_rows {
        Some(b_rows) => {
            let n = mp.vep.n();
            let mut rows: Vec<(Vec<f64>, Rel, f64)> = Vec::new();
            for b in b_rows.rows_iter() {
                let mut r = b.to_vec();
                r.push(0.0);
                rows.push((r, Rel::Ge, 0.0));
            }
            for w in w_rows.rows_iter() {
                let len = norm(w);
                if len <= 1e-300 {
                    continue;
                }
                let mut r: Vec<f64> = w.iter().map(|c| c / len).collect();
                r.push(-1.0);
                rows.push((r, Rel::Ge, 0.0));
            }
            for i in 0..n {
                let mut e = vec![0.0; n + 1];
                e[i] = 1.0;
                rows.push((e.clone(), Rel::Le, 1.0));
                rows.push((e, Rel::Ge, -1.0));
            }
            let mut es = vec![0.0; n + 1];
            es[n] = 1.0;
            rows.push((es.clone(), Rel::Le, 1.0));
            let lp = Lp { n: n + 1, maximize: true, objective: es, rows };
            match lp::solve(&lp)? {
                LpOutcome::Optimal { value, .. } => (Some(value), value > 1e-9),
                _ => (None, false),
            }
        }
        None => (None, false),
    };

    if !qualification || direct.verdict == CondVerdict::Vacuous {
        let fallback_for_structure = df_rows.is_none();
        let summary = if direct.verdict == CondVerdict::Vacuous {
            direct.summary.clone()
        } else if fallback_for_structure {
            "no exact halfspace form; direct dual test used".to_string()
        } else {
            "qualification failed; direct dual test used".to_string()
        };
        return Ok(NocDecomposedReport {
            qualification_margin,
            qualification,
            concavity_ok: concavity.passes,
            concavity_worst: concavity.worst_violation,
            verdict: direct.verdict,
            decomposition_feasible: None,
            fallback: true,
            agree: None,
            direct,
            summary,
        });
    }

    // Minkowski split: generator = B^T lambda + W^T mu with lambda, mu
    // >= 0, checked by LP feasibility for every generator.
    let b_rows = df_rows.expect("qualification implies exact rows");
    let n = mp.vep.n();
    let nb = b_rows.rows;
    let nw = w_rows.rows;
    let mut all_feasible = true;
    for g in &direct.generators {
        let mut rows: Vec<(Vec<f64>, Rel, f64)> = Vec::new();
        for i in 0..n {
            let mut coeff = vec![0.0; nb + nw];
            for (k, b) in b_rows.rows_iter().enumerate() {
                coeff[k] = b[i];
            }
            for (j, w) in w_rows.rows_iter().enumerate() {
                coeff[nb + j] = w[i];
            }
            rows.push((coeff, Rel::Eq, g[i]));
        }
        for k in 0..(nb + nw) {
            let mut e = vec![0.0; nb + nw];
            e[k] = 1.0;
            rows.push((e, Rel::Ge, 0.0));
        }
        if lp::feasible_point(nb + nw, &rows)?.is_none() {
            all_feasible = false;
            break;
        }
    }
    let verdict = if all_feasible { CondVerdict::Holds } else { CondVerdict::Violated };
    let agree = Some(verdict == direct.verdict);
    let summary = format!(
        "{} (decomposed form{})",
        noc_summary(verdict, direct.applicable),
        if agree == Some(true) { ", agrees with the direct test" } else { ", DISAGREES with the direct test" },
    );
    Ok(NocDecomposedReport {
        qualification_margin,
        qualification,
        concavity_ok: concavity.passes,
        concavity_worst: concavity.worst_violation,
        verdict,
        decomposition_feasible: Some(all_feasible),
        fallback: false,
        agree,
        direct,
        summary,
    })
}

// ---------------------------------------------------------------------------
// Sufficient condition
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SocVerdict {
    Holds,
    /// No regular subgradient yields a strictly dual-interior witness.
    Fails,
    /// The polar of the outer cone has empty interior; the condition can
    /// never be satisfied here.
    CannotHold,
    /// Regular subdifferential empty; nothing to test.
    Inapplicable,
    /// Best margin ties the tolerance band.
    Indeterminate,
}

#[derive(Debug, Clone)]
pub struct SocWitness {
    pub v: Vec<f64>,
    /// `<v, w> >= margin * |w|` for every sampled outer-cone member `w`.
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct SocReport {
    pub verdict: SocVerdict,
    pub applicable: bool,
    pub hypotheses: HypothesisChecks,
    pub outer_pointed: bool,
    pub witness: Option<SocWitness>,
    pub candidates_checked: usize,
    pub summary: String,
}

fn soc_summary(verdict: SocVerdict, applicable: bool) -> String {
    match (verdict, applicable) {
        (SocVerdict::Holds, true) => {
            "sufficient condition holds: strict local minimum certified (modulo sampled \
             hypotheses)"
                .into()
        }
        (SocVerdict::Holds, false) => {
            "interiority condition holds, but the governing hypotheses were not established; \
             no certification"
                .into()
        }
        (SocVerdict::Fails, _) => "no regular subgradient gives a dual-interior witness".into(),
        (SocVerdict::CannotHold, _) => {
            "the polar of the outer cone has empty interior: the condition can never hold \
             here"
                .into()
        }
        (SocVerdict::Inapplicable, _) => {
            "regular subdifferential is empty: the condition cannot be evaluated".into()
        }
        (SocVerdict::Indeterminate, _) => {
            "best interiority margin ties the tolerance; indeterminate".into()
        }
    }
}

/// Strict interiority margin of `v` against the exact outer cone: the
/// minimum of `<v, w>` over the cross-section `{w in O : <p, w> = 1}`
/// with `p` the sum of normalized rows (positive on the pointed cone).
/// `None` when the section is empty (the cone is only the origin).
fn section_margin(rows: &Mat, v: &[f64]) -> Result<Option<f64>, OptError> {
    let n = v.len();
    let mut p = vec![0.0; n];
    for r in rows.rows_iter() {
        let len = norm(r);
        if len <= 1e-300 {
            continue;
        }
        for (pi, ri) in p.iter_mut().zip(r) {
            *pi += ri / len;
        }
    }
    let mut lp_rows: Vec<(Vec<f64>, Rel, f64)> = Vec::new();
    for r in rows.rows_iter() {
        lp_rows.push((r.to_vec(), Rel::Ge, 0.0));
    }
    lp_rows.push((p, Rel::Eq, 1.0));
    let lp = Lp { n, maximize: false, objective: v.to_vec(), rows: lp_rows };
    match lp::solve(&lp)? {
        LpOutcome::Optimal { value, .. } => Ok(Some(value)),
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Ok(Some(f64::NEG_INFINITY)),
    }
}

/// Sufficient condition for a strict local minimum: some regular
/// subgradient `v` has `-v` strictly interior to the polar of the outer
/// approximation cone, equivalently `<v, w> > 0` for every nonzero outer
/// direction.
pub fn soc_check(mp: &MpvecInstance, oracle: &EquiOracle<'_>) -> Result<SocReport, OptError> {
    mp.certify(oracle)?;
    let hypotheses =
        hypothesis_checks(&mp.vep, oracle, &mp.candidate, &DEFAULT_ERROR_BOUND_RADII)?;
    let applicable = hypotheses.strict_bdiff && hypotheses.equicontinuity_evidence;
    let dirs = sphere_grid(mp.vep.n(), 64);
    let (outer, _meta) = outer_cone(&mp.vep, &mp.candidate, &dirs)?;

    let outer_pointed = match &outer.exact {
        Some(cone) => cone.is_pointed()?,
        None => {
            // Sampled heuristic: opposite member pairs betray a line.
            let members: Vec<&[f64]> = outer
                .table
                .iter()
                .filter(|d| d.member)
                .map(|d| d.direction.as_slice())
                .collect();
            !members.iter().any(|a| {
                members
                    .iter()
                    .any(|b| a.iter().zip(b.iter()).all(|(x, y)| (x + y).abs() <= 1e-9))
            })
        }
    };

    let done = |verdict: SocVerdict, witness: Option<SocWitness>, checked: usize| SocReport {
        verdict,
        applicable,
        hypotheses: hypotheses.clone(),
        outer_pointed,
        witness,
        candidates_checked: checked,
        summary: soc_summary(verdict, applicable),
    };

    let generators = match regular_subdiff_generators(&mp.objective, &mp.candidate)? {
        SubdiffDesc::Empty => return Ok(done(SocVerdict::Inapplicable, None, 0)),
        SubdiffDesc::Generators(g) => g,
    };
    if !outer_pointed {
        return Ok(done(SocVerdict::CannotHold, None, generators.len()));
    }

    let member_dirs: Vec<Vec<f64>> = outer
        .table
        .iter()
        .filter(|d| d.member)
        .map(|d| d.direction.clone())
        .collect();
    let margins: Vec<Result<(Vec<f64>, f64), OptError>> = exec::map_slice(&generators, |v| {
        let strict = match &outer.exact {
            Some(cone) => {
                let rows = cone
                    .halfspace_rows()
                    .unwrap_or_else(|| Mat::zeros(0, mp.vep.n()));
                section_margin(&rows, v)?.unwrap_or(f64::INFINITY)
            }
            None => f64::INFINITY,
        };
        // Reported margin: worst pairing against the sampled members —
        // the inequality the witness property promises.
        let sampled = member_dirs
            .iter()
            .map(|w| dot(v, w))
            .fold(f64::INFINITY, f64::min);
        Ok((v.clone(), strict.min(sampled)))
    });
    let mut best: Option<SocWitness> = None;
    let checked = generators.len();
    for r in margins {
        let (v, margin) = r?;
        if best.as_ref().is_none_or(|b| margin > b.margin) {
            best = Some(SocWitness { v, margin });
        }
    }
    let best = best.expect("nonempty generator list");
    let tie = INTERIOR_TOL * (1.0 + norm(&best.v));
    if best.margin > tie {
        Ok(done(SocVerdict::Holds, Some(best), checked))
    } else if best.margin >= -tie {
        Ok(done(SocVerdict::Indeterminate, Some(best), checked))
    } else {
        Ok(done(SocVerdict::Fails, Some(best), checked))
    }
}

// ---------------------------------------------------------------------------
// Brute-force ground truth
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalMinVerdict {
    StrictLocalMin,
    LocalMin,
    NotLocalMin,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct LocalMinReport {
    pub verdict: LocalMinVerdict,
    pub value_at_candidate: f64,
    /// Solution-cloud points compared (distinct from the candidate,
    /// within the radius).
    pub compared: usize,
    /// The best competing point and its objective value.
    pub best_other: Option<(Vec<f64>, f64)>,
}

/// Compare the objective at the candidate against every solution-cloud
/// point within `radius`.  A lone candidate whose cloud holds no other
/// point at all is trivially a strict minimum of the sampled solution
/// set; too few comparison points otherwise is inconclusive.
pub fn local_min_brute(
    mp: &MpvecInstance,
    oracle: &EquiOracle<'_>,
    radius: f64,
    min_points: usize,
) -> Result<LocalMinReport, OptError> {
    mp.certify(oracle)?;
    let v0 = mp.objective.eval(&mp.candidate)?;
    let near = oracle.resolution().max(1e-9);
    let distinct: Vec<&Vec<f64>> = oracle
        .cloud()
        .iter()
        .filter(|p| norm(&sub(p, &mp.candidate)) > near)
        .collect();
    let within: Vec<&Vec<f64>> = distinct
        .iter()
        .copied()
        .filter(|p| norm(&sub(p, &mp.candidate)) <= radius)
        .collect();
    if within.is_empty() && distinct.is_empty() {
        return Ok(LocalMinReport {
            verdict: LocalMinVerdict::StrictLocalMin,
            value_at_candidate: v0,
            compared: 0,
            best_other: None,
        });
    }
    if within.len() < min_points {
        return Ok(LocalMinReport {
            verdict: LocalMinVerdict::Inconclusive,
            value_at_candidate: v0,
            compared: within.len(),
            best_other: None,
        });
    }
    let tol = 1e-9 * (1.0 + v0.abs());
    let mut best: Option<(Vec<f64>, f64)> = None;
    for p in &within {
        let val = mp.objective.eval(p)?;
        if best.as_ref().is_none_or(|(_, b)| val < *b) {
            best = Some(((*p).clone(), val));
        }
    }
    let (_, best_val) = best.clone().expect("nonempty comparison set");
    let verdict = if best_val < v0 - tol {
        LocalMinVerdict::NotLocalMin
    } else if best_val > v0 + tol {
        LocalMinVerdict::StrictLocalMin
    } else {
        LocalMinVerdict::LocalMin
    };
    Ok(LocalMinReport { verdict, value_at_candidate: v0, compared: within.len(), best_other: best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::{ConvexCone, Polyhedron};
    use crate::expr::ExprVector;
    use crate::deriv::DerivativeFamily;
    use crate::problem::SamplingConfig;

    fn quadratic_instance() -> VepInstance {
        let f = ExprVector::parse(
            "0.5*(-(1 - 1/(z1^2 + z2^2 + 1))*x1 + x2 + 1)^2; \
             0.5*((1 + 1/(z1^2 + z2^2 + 1))*x1 - x2 + 1)^2",
        )
        .unwrap();
        let family = DerivativeFamily::matrix_entries(
            vec![0.0, 0.0],
            ExprVector::parse("-(1 - 1/(z1^2 + z2^2 + 1)); 1; 1 + 1/(z1^2 + z2^2 + 1); -1")
                .unwrap(),
            2,
            2,
        )
        .unwrap();
        VepInstance::new(
            ConvexCone::orthant(2),
            Polyhedron::new(Mat::identity(2), vec![0.0, 0.0]).unwrap(),
            f,
            Some(family),
            SamplingConfig::default(),
        )
        .unwrap()
    }

    fn scalar_instance() -> VepInstance {
        VepInstance::new(
            ConvexCone::orthant(1),
            Polyhedron::full_space(1),
            ExprVector::parse("x1^2*z1/(z1^2 + 1)").unwrap(),
            Some(DerivativeFamily::constant_linear(vec![0.0], Mat::zeros(1, 1))),
            SamplingConfig { include: vec![vec![-1.0]], ..SamplingConfig::default() },
        )
        .unwrap()
    }

    /// A problem whose feasible set is the nonnegative half of the x1
    /// axis: every feasible tangent direction is boundary, so the
    /// qualification LP must fail.
    fn halfline_instance() -> VepInstance {
        let rows = Mat::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]], 2);
        VepInstance::new(
            ConvexCone::orthant(2),
            Polyhedron::new(rows, vec![0.0, 0.0, 0.0]).unwrap(),
            ExprVector::parse("x1; x2").unwrap(),
            Some(DerivativeFamily::constant_linear(vec![0.0, 0.0], Mat::identity(2))),
            SamplingConfig::default(),
        )
        .unwrap()
    }

    fn mp(vep: VepInstance, obj: &str, structure: Structure, at: Vec<f64>) -> MpvecInstance {
        MpvecInstance::new(vep, ScalarFn::parse(obj, structure).unwrap(), at).unwrap()
    }

    #[test]
    fn directional_probe_accepts_monotone_objective() {
        let m = mp(quadratic_instance(), "x1 + x2", Structure::Smooth, vec![0.0, 0.0]);
        let oracle = m.oracle().unwrap();
        for choice in [ConeChoice::Radial, ConeChoice::Contingent] {
            let report = directional_probe(&m, &oracle, choice, 32).unwrap();
            assert_eq!(report.verdict, ProbeVerdict::NoViolation, "{choice:?}");
            assert!(!report.probes.is_empty());
            for p in &report.probes {
                assert!(p.value >= -1e-9, "direction {:?} value {}", p.direction, p.value);
            }
        }
    }

    #[test]
    fn directional_probe_flags_descent_direction() {
        let m = mp(quadratic_instance(), "-x1", Structure::Smooth, vec![0.0, 0.0]);
        let oracle = m.oracle().unwrap();
        let report = directional_probe(&m, &oracle, ConeChoice::Contingent, 32).unwrap();
        assert_eq!(report.verdict, ProbeVerdict::Violated);
        let hit = report
            .violations
            .iter()
            .find(|p| p.direction[0] > 0.99)
            .expect("the first axis direction certifies descent");
        assert!((hit.value + 1.0).abs() <= 0.05, "value {}", hit.value);
    }

    #[test]
    fn directional_probe_vacuous_on_singleton_solution_set() {
        let m = mp(scalar_instance(), "x1 + 1", Structure::Smooth, vec![0.0]);
        let oracle = m.oracle().unwrap();
        let report = directional_probe(&m, &oracle, ConeChoice::Contingent, 2).unwrap();
        assert_eq!(report.verdict, ProbeVerdict::Vacuous);
        assert!(report.probes.is_empty());
    }

    #[test]
    fn smooth_generators_are_the_gradient() {
        let fun = ScalarFn::parse("x1 + x2", Structure::Smooth).unwrap();
        match upper_subdiff_generators(&fun, &[0.0, 0.0]).unwrap() {
            SubdiffDesc::Generators(g) => {
                assert_eq!(g.len(), 1);
                assert!(norm(&sub(&g[0], &[1.0, 1.0])) <= 1e-6);
            }
            SubdiffDesc::Empty => panic!("smooth objective has a gradient"),
        }
    }

    #[test]
    fn upper_generators_empty_at_convex_kink() {
        let fun = ScalarFn::parse("abs(x1) + abs(x2)", Structure::Convex).unwrap();
        assert!(matches!(
            upper_subdiff_generators(&fun, &[0.0, 0.0]).unwrap(),
            SubdiffDesc::Empty
        ));
    }

    #[test]
    fn regular_generators_of_l1_norm_contain_the_vertex() {
        let fun = ScalarFn::parse("abs(x1) + abs(x2)", Structure::Convex).unwrap();
        match regular_subdiff_generators(&fun, &[0.0, 0.0]).unwrap() {
            SubdiffDesc::Generators(g) => {
                assert!(
                    g.iter().any(|v| norm(&sub(v, &[1.0, 1.0])) <= 1e-6),
                    "vertex (1,1) expected among {g:?}"
                );
                for v in &g {
                    assert!(v.iter().all(|c| c.abs() <= 1.0 + 1e-6), "outside the box: {v:?}");
                }
            }
            SubdiffDesc::Empty => panic!("convex subdifferential is nonempty"),
        }
    }

    #[test]
    fn noc_holds_for_increasing_linear_objective() {
        let m = mp(quadratic_instance(), "x1 + x2", Structure::Smooth, vec![0.0, 0.0]);
        let oracle = m.oracle().unwrap();
        let report = noc_check(&m, &oracle).unwrap();
        assert_eq!(report.verdict, CondVerdict::Holds);
        assert!(report.applicable, "hypotheses: {:?}", report.hypotheses);
        assert!(report.violating_generator.is_none());
        assert_eq!(report.generators.len(), 1);
    }

    #[test]
    fn noc_violated_for_decreasing_linear_objective() {
        let m = mp(quadratic_instance(), "-x1 - x2", Structure::Smooth, vec![0.0, 0.0]);
        let oracle = m.oracle().unwrap();
        let report = noc_check(&m, &oracle).unwrap();
        assert_eq!(report.verdict, CondVerdict::Violated);
        assert!(report.applicable);
        let w = report.violation_witness.expect("violating direction reported");
        // The witness lives in the inner wedge: nearly diagonal.
        assert!(w[0] > 0.0 && w[1] > 0.0, "witness {w:?}");
        assert!((w[1] / w[0] - 1.0).abs() <= 0.02, "witness {w:?}");
        assert!(report.summary.contains("not a local minimum"));
    }

    #[test]
    fn noc_vacuous_for_l1_objective() {
        let m = mp(
            quadratic_instance(),
            "abs(x1) + abs(x2)",
            Structure::Convex,
            vec![0.0, 0.0],
        );
        let oracle = m.oracle().unwrap();
        let report = noc_check(&m, &oracle).unwrap();
        assert_eq!(report.verdict, CondVerdict::Vacuous);
        assert!(report.summary.contains("no information"));
    }

    #[test]
    fn decomposed_noc_agrees_when_qualification_holds() {
        let oracle_holder = quadratic_instance();
        let m = MpvecInstance::new(
            oracle_holder,
            ScalarFn::parse("x1 + x2", Structure::Smooth).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap();
        let oracle = m.oracle().unwrap();
        let report = noc_decomposed(&m, &oracle).unwrap();
        assert!(report.qualification, "margin {:?}", report.qualification_margin);
        assert!(report.qualification_margin.unwrap() > 0.5);
        assert!(report.concavity_ok);
        assert_eq!(report.verdict, CondVerdict::Holds);
        assert_eq!(report.decomposition_feasible, Some(true));
        assert_eq!(report.agree, Some(true));
        assert!(!report.fallback);
    }

    #[test]
    fn decomposed_noc_matches_direct_violation() {
        let m = mp(quadratic_instance(), "-x1 - x2", Structure::Smooth, vec![0.0, 0.0]);
        let oracle = m.oracle().unwrap();
        let report = noc_decomposed(&m, &oracle).unwrap();
        assert!(report.qualification);
        assert_eq!(report.verdict, CondVerdict::Violated);
        assert_eq!(report.decomposition_feasible, Some(false));
        assert_eq!(report.agree, Some(true));
    }

    #[test]
    fn decomposed_noc_falls_back_without_qualification() {
        let m = mp(halfline_instance(), "x1", Structure::Smooth, vec![0.0, 0.0]);
        let oracle = m.oracle().unwrap();
        let report = noc_decomposed(&m, &oracle).unwrap();
        assert!(!report.qualification);
        assert!(report.qualification_margin.unwrap().abs() <= 1e-9);
        assert!(report.fallback);
        assert_eq!(report.agree, None);
        assert_eq!(report.verdict, report.direct.verdict);
        assert_eq!(report.verdict, CondVerdict::Holds);
        assert!(report.summary.contains("qualification failed"));
    }

    #[test]
    fn soc_certifies_l1_objective_on_quadrant() {
        let m = mp(
            quadratic_instance(),
            "abs(x1) + abs(x2)",
            Structure::Convex,
            vec![0.0, 0.0],
        );
        let oracle = m.oracle().unwrap();
        let report = soc_check(&m, &oracle).unwrap();
        assert_eq!(report.verdict, SocVerdict::Holds);
        assert!(report.applicable);
        assert!(report.outer_pointed);
        let w = report.witness.expect("witness returned");
        assert!(w.margin > 0.9, "margin {}", w.margin);
        assert!(w.v[0] > 0.9 && w.v[1] > 0.9, "witness subgradient {:?}", w.v);
        assert!(report.summary.contains("strict local minimum"));
        // Witness inequality against the ground truth.
        let brute = local_min_brute(&m, &oracle, 5.0, 1).unwrap();
        assert_eq!(brute.verdict, LocalMinVerdict::StrictLocalMin);
    }

    #[test]
    fn soc_witness_margin_dominates_sampled_pairings() {
        let m = mp(
            quadratic_instance(),
            "abs(x1) + abs(x2)",
            Structure::Convex,
            vec![0.0, 0.0],
        );
        let oracle = m.oracle().unwrap();
        let report = soc_check(&m, &oracle).unwrap();
        let w = report.witness.unwrap();
        let dirs = sphere_grid(2, 64);
        let (outer, _) = outer_cone(&m.vep, &m.candidate, &dirs).unwrap();
        for d in outer.table.iter().filter(|d| d.member) {
            let lhs = dot(&w.v, &d.direction);
            assert!(
                lhs >= w.margin * norm(&d.direction) - 1e-9,
                "pairing {lhs} below margin {} at {:?}",
                w.margin,
                d.direction
            );
        }
    }

    #[test]
    fn soc_cannot_hold_when_outer_cone_is_a_line() {
        let m = mp(scalar_instance(), "abs(x1)", Structure::Convex, vec![0.0]);
        let oracle = m.oracle().unwrap();
        let report = soc_check(&m, &oracle).unwrap();
        assert_eq!(report.verdict, SocVerdict::CannotHold);
        assert!(!report.outer_pointed);
        // One-sidedness: the candidate IS the strict minimum, the
        // sufficient condition just cannot see it.
        let brute = local_min_brute(&m, &oracle, 1.0, 0).unwrap();
        assert_eq!(brute.verdict, LocalMinVerdict::StrictLocalMin);
    }

    #[test]
    fn soc_fails_for_descent_objective() {
        let m = mp(quadratic_instance(), "-x1", Structure::Smooth, vec![0.0, 0.0]);
        let oracle = m.oracle().unwrap();
        let report = soc_check(&m, &oracle).unwrap();
        assert_eq!(report.verdict, SocVerdict::Fails);
        assert!(report.witness.unwrap().margin < 0.0);
    }

    #[test]
    fn brute_force_verdicts_on_the_quadrant() {
        let strict = mp(
            quadratic_instance(),
            "abs(x1) + abs(x2)",
            Structure::Convex,
            vec![0.0, 0.0],
        );
        let oracle = strict.oracle().unwrap();
        let report = local_min_brute(&strict, &oracle, 5.0, 3).unwrap();
        assert_eq!(report.verdict, LocalMinVerdict::StrictLocalMin);
        assert!(report.compared >= 3);

        let descent = mp(quadratic_instance(), "-x1 - x2", Structure::Smooth, vec![0.0, 0.0]);
        let oracle = descent.oracle().unwrap();
        let report = local_min_brute(&descent, &oracle, 5.0, 3).unwrap();
        assert_eq!(report.verdict, LocalMinVerdict::NotLocalMin);
        let (p, val) = report.best_other.unwrap();
        assert!(val < 0.0, "best competitor {p:?} -> {val}");
    }

    #[test]
    fn brute_force_singleton_is_trivially_strict() {
        let m = mp(scalar_instance(), "x1^2", Structure::Smooth, vec![0.0]);
        let oracle = m.oracle().unwrap();
        let report = local_min_brute(&m, &oracle, 0.5, 5).unwrap();
        assert_eq!(report.verdict, LocalMinVerdict::StrictLocalMin);
        assert_eq!(report.compared, 0);
    }

    #[test]
    fn soundness_pairing_on_the_quadrant() {
        // Ground truth says local min + hypotheses pass => the necessary
        // condition must not be violated.
        let m = mp(quadratic_instance(), "x1 + x2", Structure::Smooth, vec![0.0, 0.0]);
        let oracle = m.oracle().unwrap();
        let brute = local_min_brute(&m, &oracle, 5.0, 3).unwrap();
        assert_eq!(brute.verdict, LocalMinVerdict::StrictLocalMin);
        let noc = noc_check(&m, &oracle).unwrap();
        if noc.applicable {
            assert_ne!(noc.verdict, CondVerdict::Violated, "{}", noc.summary);
        }
        // And the sufficient condition certifying => ground truth strict.
        let soc = soc_check(&m, &oracle).unwrap();
        if soc.verdict == SocVerdict::Holds && soc.applicable {
            assert_eq!(brute.verdict, LocalMinVerdict::StrictLocalMin);
        }
    }

    #[test]
    fn instance_validation_rejects_bad_objectives() {
        let vep = scalar_instance();
        let err = MpvecInstance::new(
            vep.clone(),
            ScalarFn::parse("x1 + x2", Structure::Smooth).unwrap(),
            vec![0.0],
        )
        .unwrap_err();
        assert!(matches!(err, OptError::ObjectiveArity { .. }));
        let err = MpvecInstance::new(
            vep.clone(),
            ScalarFn::parse("x1*z1", Structure::Smooth).unwrap(),
            vec![0.0],
        )
        .unwrap_err();
        assert!(matches!(err, OptError::ObjectiveUsesParams));
        let err = MpvecInstance::new(
            vep.clone(),
            ScalarFn::parse("x1", Structure::Smooth).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap_err();
        assert!(matches!(err, OptError::CandidateDim { .. }));
        // Non-equilibrium candidates are rejected at analysis time.
        let m = MpvecInstance::new(
            vep,
            ScalarFn::parse("x1", Structure::Smooth).unwrap(),
            vec![2.0],
        )
        .unwrap();
        let oracle = EquiOracle::build(&m.vep, &[0.0]).unwrap();
        let err = noc_check(&m, &oracle).unwrap_err();
        assert!(matches!(err, OptError::CandidateNotEquilibrium { .. }));
    }
}
