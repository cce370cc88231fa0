//! Inner and outer conical approximations of the solution set's
//! contingent cone, and verification of the inclusion chain between them.
//!
//! At a solution `x̄`, the derivative family `z -> Df(x̄, z)` induces two
//! polyhedral-style approximations of `T(x̄, Equi)`:
//!
//! * the **inner** cone: directions `v` in the feasible cone of `K` whose
//!   derivative images `Df(x̄, z) v` land in `C` for every sampled `z`;
//! * the **outer** cone: directions whose images land in the tangent cone
//!   of `C` at `f(x̄, z)`, parameters with `f(x̄, z)` interior to `C`
//!   contributing nothing.
//!
//! When every derivative map is linear and the target cones are
//! halfspace-representable, both cones are computed exactly by stacking
//! halfspace rows; otherwise membership is sampled on a direction grid.
//! [`verify_inclusions`] scores both against a sampled estimate of the
//! contingent cone and reports per-direction verdicts, hypothesis
//! diagnostics, and strictness witnesses.

use crate::cones::{cones_equal, dedupe_normalized_rows, ConeError, ConvexCone};
use crate::deriv::{strictness_check, DerivError, DerivativeFamily};
use crate::exec;
use crate::expr::EvalCtx;
use crate::linalg::{dot, norm, sub, Mat};
use crate::lp::{self, Lp, LpError, LpOutcome, Rel};
use crate::problem::{
    error_bound_probe, EquiOracle, ErrorBoundVerdict, ProblemError, SamplingConfig, VepInstance,
    DEFAULT_ERROR_BOUND_RADII,
};
use crate::sampling::{sphere_grid, TGrid};
use crate::tangent::{
    contingent_cone_sampled, polyhedral_tangent, radial_cone_member, ConeEstimate, ConeNotion,
    TangentError, DEFAULT_EPS_GRID, TAU_DIR,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApproxError {
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Deriv(#[from] DerivError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Tangent(#[from] TangentError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("instance has no derivative family")]
    MissingDerivative,
    #[error("base point is not an equilibrium (residual {residual:.3e})")]
    BaseNotEquilibrium { residual: f64 },
    #[error("f(base, z) lies outside the ordering cone at z = {z:?} (distance {distance:.3e}); the base is not an equilibrium for that parameter")]
    ValueOutsideCone { z: Vec<f64>, distance: f64 },
}

/// One probe direction with its crisp membership verdict and a signed
/// margin: the worst normalized halfspace value over all constraints
/// (positive strictly inside, negative outside, infinite when nothing
/// constrains).
#[derive(Debug, Clone)]
pub struct DirectionVerdict {
    pub direction: Vec<f64>,
    pub member: bool,
    pub margin: f64,
}

/// An approximation cone: exact halfspace form when available, and a
/// membership table on the probe grid either way.
#[derive(Debug, Clone)]
pub struct ApproxCone {
    pub notion: ConeNotion,
    pub exact: Option<ConvexCone>,
    pub table: Vec<DirectionVerdict>,
}

impl ApproxCone {
    pub fn member_count(&self) -> usize {
        self.table.iter().filter(|d| d.member).count()
    }
}

/// Per-parameter bookkeeping of the outer-cone construction.
#[derive(Debug, Clone, Copy, Default)]
pub struct OuterMeta {
    /// Parameters skipped because `f(base, z)` is interior to `C` (they
    /// contribute the whole space).
    pub skipped_interior: usize,
    /// Parameters where `f(base, z)` vanishes (tangent cone is `C`).
    pub zero_values: usize,
    /// Parameters contributing a nontrivial constraint.
    pub contributing: usize,
}

const MEMBER_TOL: f64 = 1e-9;

fn unitize(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|c| c / n).collect()
}

/// Worst normalized row value of `rows` at `v` (`+inf` when unconstrained,
/// zero rows are vacuous and skipped).
fn rows_margin(rows: &Mat, v: &[f64]) -> f64 {
    let mut worst = f64::INFINITY;
    for row in rows.rows_iter() {
        let len = norm(row);
        if len <= 1e-300 {
            continue;
        }
        worst = worst.min(dot(row, v) / len);
    }
    worst
}

/// All derivative maps over the sample, in matrix form when every map is
/// linear.
fn linear_maps(
    family: &DerivativeFamily,
    zs: &[Vec<f64>],
) -> Result<Option<Vec<Mat>>, ApproxError> {
    let mut mats = Vec::with_capacity(zs.len());
    for z in zs {
        match family.map_at(z)?.as_linear() {
            Some(m) => mats.push(m),
            None => return Ok(None),
        }
    }
    Ok(Some(mats))
}

fn eval_f(inst: &VepInstance, x: &[f64], z: &[f64]) -> Result<Vec<f64>, ApproxError> {
    inst.f
        .eval(&EvalCtx { x, z, u: &[] })
        .map_err(|source| ApproxError::Problem(ProblemError::EvalAt { z: z.to_vec(), source }))
}

fn table_from_rows(rows: &Mat, dirs: &[Vec<f64>]) -> Vec<DirectionVerdict> {
    dirs.iter()
        .map(|d| {
            let u = unitize(d);
            let margin = rows_margin(rows, &u);
            DirectionVerdict { member: margin >= -MEMBER_TOL, direction: u, margin }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Inner cone
// ---------------------------------------------------------------------------

/// The inner approximation at `base`: directions of the feasible cone of
/// `K` whose derivative images stay in `C` for the whole parameter
/// sample.  Exact (stacked halfspaces) for linear families with
/// halfspace-representable `C`; sampled otherwise.
pub fn inner_cone(
    inst: &VepInstance,
    oracle: &EquiOracle<'_>,
    base: &[f64],
    dirs: &[Vec<f64>],
) -> Result<ApproxCone, ApproxError> {
    if inst.deriv.is_none() {
        return Err(ApproxError::MissingDerivative);
    }
    if !oracle.is_equilibrium(base)? {
        return Err(ApproxError::BaseNotEquilibrium { residual: inst.residual(base)?.value });
    }
    if let Some(df_rows) = derivative_halfspace_rows(inst)? {
        let w = polyhedral_tangent(&inst.k, base)?;
        let mut rows = df_rows;
        if let Some(wr) = w.halfspace_rows() {
            for r in wr.rows_iter() {
                rows.push_row(r);
            }
        }
        let rows = dedupe_normalized_rows(&rows);
        let table = table_from_rows(&rows, dirs);
        Ok(ApproxCone { notion: ConeNotion::Inner, exact: Some(ConvexCone::halfspaces(rows)), table })
    } else {
        inner_cone_sampled(inst, base, dirs)
    }
}

/// Stacked, deduplicated halfspace rows of the direction constraints
/// `Df(base, z) v ∈ C` over the parameter sample — the derivative part of
/// the inner cone, without the feasible-cone rows of `K`.  `None` when a
/// map is nonlinear or `C` has no halfspace form.
pub fn derivative_halfspace_rows(inst: &VepInstance) -> Result<Option<Mat>, ApproxError> {
    let family = inst.deriv.as_ref().ok_or(ApproxError::MissingDerivative)?;
    let zs = inst.z_sample();
    let (maps, ac) = match (linear_maps(family, zs)?, inst.c.halfspace_rows()) {
        (Some(m), Some(a)) => (m, a),
        _ => return Ok(None),
    };
    let mut rows = Mat::zeros(0, inst.n());
    for m in &maps {
        let prod = ac.matmul(m);
        for r in prod.rows_iter() {
            rows.push_row(r);
        }
    }
    Ok(Some(dedupe_normalized_rows(&rows)))
}

/// Sampled fallback for the inner cone; also used to cross-check the
/// exact path.  Feasibility w.r.t. `K` uses the radial membership test;
/// cone membership of the derivative images is checked per parameter.
pub fn inner_cone_sampled(
    inst: &VepInstance,
    base: &[f64],
    dirs: &[Vec<f64>],
) -> Result<ApproxCone, ApproxError> {
    let family = inst.deriv.as_ref().ok_or(ApproxError::MissingDerivative)?;
    let zs = inst.z_sample();
    let maps = zs
        .iter()
        .map(|z| family.map_at(z))
        .collect::<Result<Vec<_>, _>>()?;
    let ac = inst.c.halfspace_rows();
    let per: Vec<Result<DirectionVerdict, ApproxError>> = exec::map_slice(dirs, |d| {
        let u = unitize(d);
        let mut member = radial_cone_member(&inst.k, base, &u, &DEFAULT_EPS_GRID)?;
        let mut margin = match polyhedral_tangent(&inst.k, base)?.halfspace_rows() {
            Some(wr) => rows_margin(&wr, &u),
            None => f64::INFINITY,
        };
        for map in &maps {
            let y = map.apply(&u)?;
            let tol = MEMBER_TOL * (1.0 + norm(&y));
            if !inst.c.member(&y, tol)? {
                member = false;
            }
            let m = match &ac {
                Some(rows) => rows_margin(rows, &y),
                None => -inst.c.distance(&y)?.distance,
            };
            margin = margin.min(m);
            if margin < -0.1 {
                // Decisively outside; no need to scan the rest.
                member = false;
                break;
            }
        }
        Ok(DirectionVerdict { direction: u, member, margin })
    });
    let table = per.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ApproxCone { notion: ConeNotion::Inner, exact: None, table })
}

// ---------------------------------------------------------------------------
// Outer cone
// ---------------------------------------------------------------------------

/// The outer approximation at `base`: directions of `T(base, K)` whose
/// derivative images lie in the tangent cone of `C` at `f(base, z)`.
/// Parameters with `f(base, z)` interior to `C` are skipped (their
/// tangent cone is everything); vanishing values contribute `C` itself.
/// A value outside `C` aborts with that parameter as witness.
pub fn outer_cone(
    inst: &VepInstance,
    base: &[f64],
    dirs: &[Vec<f64>],
) -> Result<(ApproxCone, OuterMeta), ApproxError> {
    let family = inst.deriv.as_ref().ok_or(ApproxError::MissingDerivative)?;
    let tol_eq = inst.default_tol_eq(base)?;
    let tk = inst.k.tangent_cone_at(base)?;
    let zs = inst.z_sample();

    let mut meta = OuterMeta::default();
    let mut contributions: Vec<(usize, ConvexCone)> = Vec::new();
    for (i, z) in zs.iter().enumerate() {
        let y = eval_f(inst, base, z)?;
        let off = inst.c.distance(&y)?.distance;
        if off > tol_eq {
            return Err(ApproxError::ValueOutsideCone { z: z.clone(), distance: off });
        }
        if norm(&y) <= 1e-8 * (1.0 + norm(&y)) {
            meta.zero_values += 1;
            contributions.push((i, inst.c.clone()));
            continue;
        }
        if inst.c.interior_member(&y, 1e-6)? {
            meta.skipped_interior += 1;
            continue;
        }
        contributions.push((i, inst.c.tangent_cone_at(&y)?));
    }
    meta.contributing = contributions.len();

    // Exact path: every map linear and every contributed cone in
    // halfspace form.
    if let Some(maps) = linear_maps(family, zs)? {
        let mut rows = Mat::zeros(0, inst.n());
        let mut representable = true;
        for (i, tz) in &contributions {
            match tz.halfspace_rows() {
                Some(a) => {
                    let prod = a.matmul(&maps[*i]);
                    for r in prod.rows_iter() {
                        rows.push_row(r);
                    }
                }
                None => {
                    representable = false;
                    break;
                }
            }
        }
        if representable {
            if let Some(kr) = tk.halfspace_rows() {
                for r in kr.rows_iter() {
                    rows.push_row(r);
                }
            }
            let rows = dedupe_normalized_rows(&rows);
            let table = table_from_rows(&rows, dirs);
            let cone = ConvexCone::halfspaces(rows);
            return Ok((ApproxCone { notion: ConeNotion::Outer, exact: Some(cone), table }, meta));
        }
    }

    // Sampled path.
    let maps = zs
        .iter()
        .map(|z| family.map_at(z))
        .collect::<Result<Vec<_>, _>>()?;
    let per: Vec<Result<DirectionVerdict, ApproxError>> = exec::map_slice(dirs, |d| {
        let u = unitize(d);
        let mut member = tk.member(&u, MEMBER_TOL)?;
        let mut margin = match tk.halfspace_rows() {
            Some(kr) => rows_margin(&kr, &u),
            None => f64::INFINITY,
        };
        for (i, tz) in &contributions {
            let y = maps[*i].apply(&u)?;
            let tol = MEMBER_TOL * (1.0 + norm(&y));
            if !tz.member(&y, tol)? {
                member = false;
            }
            let m = match tz.halfspace_rows() {
                Some(rows) => rows_margin(&rows, &y),
                None => -tz.distance(&y)?.distance,
            };
            margin = margin.min(m);
            if margin < -0.1 {
                member = false;
                break;
            }
        }
        Ok(DirectionVerdict { direction: u, member, margin })
    });
    let table = per.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok((ApproxCone { notion: ConeNotion::Outer, exact: None, table }, meta))
}

// ---------------------------------------------------------------------------
// Homogenized direction problem
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct HomogenizedWitness {
    /// Unit direction in the inner cone.
    pub direction: Vec<f64>,
    /// Worst normalized constraint depth of the direction (0 on the
    /// boundary, positive strictly inside).
    pub margin: f64,
}

/// Find a direction of the inner cone with maximal constraint margin:
/// linear-polyhedral instances solve the margin LP exactly (with a
/// secondary ray search when the maximal margin is zero, distinguishing
/// "boundary directions exist" from "only the origin"); other families
/// fall back to scanning a direction grid.
pub fn homogenized_solve(
    inst: &VepInstance,
    base: &[f64],
    hint: Option<&[f64]>,
) -> Result<Option<HomogenizedWitness>, ApproxError> {
    let family = inst.deriv.as_ref().ok_or(ApproxError::MissingDerivative)?;
    let n = inst.n();
    let w = polyhedral_tangent(&inst.k, base)?;
    let zs = inst.z_sample();

    if let (Some(maps), Some(ac)) = (linear_maps(family, zs)?, inst.c.halfspace_rows()) {
        // Normalized v-space rows: depth of `M_z v` in `C` is the minimum
        // of `(a · M_z v)/|a|` over C's rows, so each row is `Mᵀa / |a|`.
        // Zero rows (zero maps) are kept — they pin the margin at zero.
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for m in &maps {
            for a in ac.rows_iter() {
                let len = norm(a);
                if len <= 1e-300 {
                    continue;
                }
                let mut b = vec![0.0; n];
                for (i, ai) in a.iter().enumerate() {
                    for (bj, mij) in b.iter_mut().zip(m.row(i)) {
                        *bj += ai * mij / len;
                    }
                }
                rows.push(b);
            }
        }
        if let Some(wr) = w.halfspace_rows() {
            for r in wr.rows_iter() {
                let len = norm(r);
                if len > 1e-300 {
                    rows.push(r.iter().map(|c| c / len).collect());
                }
            }
        }
        let dedup = dedupe_normalized_rows(&Mat::from_rows(rows.clone(), n));
        let margin_of = |v: &[f64]| -> f64 {
            let mut worst = f64::INFINITY;
            for b in &rows {
                worst = worst.min(dot(b, v));
            }
            if worst.is_finite() {
                worst
            } else {
                0.0
            }
        };

        // Margin LP: maximize s with b·v >= s per row, |v|_inf <= 1,
        // s <= 1.
        let mut lp_rows: Vec<(Vec<f64>, Rel, f64)> = Vec::new();
        for b in &rows {
            let mut r = b.clone();
            r.push(-1.0);
            lp_rows.push((r, Rel::Ge, 0.0));
        }
        for i in 0..n {
            let mut e = vec![0.0; n + 1];
            e[i] = 1.0;
            lp_rows.push((e.clone(), Rel::Le, 1.0));
            lp_rows.push((e, Rel::Ge, -1.0));
        }
        let mut es = vec![0.0; n + 1];
        es[n] = 1.0;
        lp_rows.push((es.clone(), Rel::Le, 1.0));
        let lp = Lp { n: n + 1, maximize: true, objective: es, rows: lp_rows };
        match lp::solve(&lp)? {
            LpOutcome::Optimal { x, value } if value > 1e-9 => {
                let v = unitize(&x[..n]);
                return Ok(Some(HomogenizedWitness { margin: margin_of(&v), direction: v }));
            }
            LpOutcome::Optimal { .. } => {
                // Zero maximal margin: look for any nonzero boundary ray.
                for i in 0..n {
                    for maximize_coord in [true, false] {
                        let mut obj = vec![0.0; n];
                        obj[i] = 1.0;
                        let mut ray_rows: Vec<(Vec<f64>, Rel, f64)> = Vec::new();
                        for b in dedup.rows_iter() {
                            ray_rows.push((b.to_vec(), Rel::Ge, 0.0));
                        }
                        for j in 0..n {
                            let mut e = vec![0.0; n];
                            e[j] = 1.0;
                            ray_rows.push((e.clone(), Rel::Le, 1.0));
                            ray_rows.push((e, Rel::Ge, -1.0));
                        }
                        let ray = Lp { n, maximize: maximize_coord, objective: obj, rows: ray_rows };
                        if let LpOutcome::Optimal { x, value } = lp::solve(&ray)? {
                            if value.abs() > 1e-7 {
                                let v = unitize(&x);
                                return Ok(Some(HomogenizedWitness {
                                    margin: margin_of(&v),
                                    direction: v,
                                }));
                            }
                        }
                    }
                }
                return Ok(None);
            }
            _ => return Ok(None),
        }
    }

    // Sampled fallback: scan sphere directions (plus the hint) for the
    // best worst-case depth.
    let mut cands = sphere_grid(n, 64);
    if let Some(h) = hint {
        if norm(h) > 1e-300 {
            cands.push(unitize(h));
        }
    }
    let maps = zs
        .iter()
        .map(|z| family.map_at(z))
        .collect::<Result<Vec<_>, _>>()?;
    let ac = inst.c.halfspace_rows();
    let w_rows = w.halfspace_rows();
    let mut best: Option<HomogenizedWitness> = None;
    for d in &cands {
        let u = unitize(d);
        let mut margin = match &w_rows {
            Some(wr) => rows_margin(wr, &u),
            None => f64::INFINITY,
        };
        for map in &maps {
            let y = map.apply(&u)?;
            let m = match &ac {
                Some(rows) => rows_margin(rows, &y),
                None => -inst.c.distance(&y)?.distance,
            };
            margin = margin.min(m);
            if margin < -0.1 {
                break;
            }
        }
        if !margin.is_finite() {
            margin = 0.0;
        }
        if best.as_ref().is_none_or(|b| margin > b.margin) {
            best = Some(HomogenizedWitness { direction: u, margin });
        }
    }
    Ok(best.filter(|b| b.margin >= -MEMBER_TOL))
}

// ---------------------------------------------------------------------------
// C-concavity
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CConcavityReport {
    pub passes: bool,
    pub worst_violation: f64,
    pub checked: usize,
}

/// Check superadditivity of the derivative maps relative to the cone:
/// `D(v1 + v2) - D(v1) - D(v2)` must stay in `C` over sampled parameters
/// and direction pairs.  Passing means the direction-feasibility set is a
/// convex cone.
pub fn c_concavity_check(
    family: &DerivativeFamily,
    cone: &ConvexCone,
    z_sample: &[Vec<f64>],
) -> Result<CConcavityReport, ApproxError> {
    let dirs = sphere_grid(family.input_dim(), 8);
    let step = (z_sample.len() / 64).max(1);
    let mut worst = 0.0_f64;
    let mut checked = 0usize;
    for z in z_sample.iter().step_by(step) {
        let map = family.map_at(z)?;
        let images: Vec<Vec<f64>> = dirs.iter().map(|d| map.apply(d)).collect::<Result<_, _>>()?;
        for i in 0..dirs.len() {
            for j in i..dirs.len() {
                let sum: Vec<f64> = dirs[i].iter().zip(&dirs[j]).map(|(a, b)| a + b).collect();
                let img_sum = map.apply(&sum)?;
                let gap: Vec<f64> = img_sum
                    .iter()
                    .zip(images[i].iter().zip(&images[j]))
                    .map(|(s, (a, b))| s - a - b)
                    .collect();
                worst = worst.max(cone.distance(&gap)?.distance);
                checked += 1;
            }
        }
    }
    let scale = 1e-7 * (1.0 + worst);
    Ok(CConcavityReport { passes: worst <= scale, worst_violation: worst, checked })
}

// ---------------------------------------------------------------------------
// Inclusion verification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub dir_count: usize,
    pub grid: TGrid,
    pub error_bound_radii: Vec<f64>,
    /// Re-run the inner cone at twice the sampling radius to quantify
    /// truncation sensitivity.
    pub sensitivity: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            dir_count: 64,
            grid: TGrid::default(),
            error_bound_radii: DEFAULT_ERROR_BOUND_RADII.to_vec(),
            sensitivity: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HypothesisChecks {
    /// `K` is polyhedral by construction.
    pub polyhedral_k: bool,
    /// `f(base, z)` vanishes over the whole parameter sample.
    pub f_vanishes: bool,
    pub max_f_norm: f64,
    /// Strict-differentiability probe consistent over the sample.
    pub strict_bdiff: bool,
    /// Sampled Lipschitz modulus of the derivative family over
    /// parameters — evidence, not certification.
    pub equicontinuity_modulus: f64,
    pub equicontinuity_evidence: bool,
    pub error_bound: ErrorBoundVerdict,
    /// Error-bound regularity established — gates assertion of the inner
    /// inclusion.
    pub inner_gate: bool,
    /// All exact-representation hypotheses hold: equality of the three
    /// cones is expected.
    pub all_pass: bool,
}

#[derive(Debug, Clone)]
pub struct InclusionCheck {
    pub name: &'static str,
    /// No determinate counterexample direction on the grid.
    pub holds_on_sample: bool,
    /// Whether the governing hypotheses were established, making a
    /// violation a hard failure rather than an informational note.
    pub asserted: bool,
    pub counterexamples: Vec<Vec<f64>>,
    pub strict: bool,
    pub strict_witnesses: Vec<Vec<f64>>,
    pub indeterminate: usize,
}

#[derive(Debug, Clone)]
pub struct CorollaryCheck {
    pub equal_on_grid: bool,
    pub mismatches: Vec<Vec<f64>>,
    /// Halfspace-level equality of inner and outer cones when both are
    /// exact.
    pub exact_cones_equal: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct SensitivityReport {
    pub radius: f64,
    pub doubled_radius: f64,
    pub inner_members: usize,
    pub inner_members_doubled: usize,
    pub witness_margin: Option<f64>,
    pub witness_margin_doubled: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub base: Vec<f64>,
    pub tol_eq: f64,
    pub cloud_size: usize,
    pub oracle_resolution: f64,
    pub z_sample_size: usize,
    pub inner: ApproxCone,
    pub outer: ApproxCone,
    pub outer_meta: OuterMeta,
    pub contingent: ConeEstimate,
    pub hypotheses: HypothesisChecks,
    pub inner_inclusion: InclusionCheck,
    pub outer_inclusion: InclusionCheck,
    pub corollary: Option<CorollaryCheck>,
    pub sensitivity: Option<SensitivityReport>,
}

const WITNESS_CAP: usize = 8;

/// Epsilon ladder for the differentiability probes, matched to the
/// resolving power of the default radius grid (the finest radius cannot
/// certify tighter levels).
pub const DIFF_EPS_GRID: [f64; 3] = [1e-1, 1e-2, 1e-3];

/// Sampled Lipschitz modulus of `u -> Df(base, z) u` across parameters.
pub fn equicontinuity_probe(
    family: &DerivativeFamily,
    zs: &[Vec<f64>],
) -> Result<f64, ApproxError> {
    let dirs = sphere_grid(family.input_dim(), 8);
    let step = (zs.len() / 128).max(1);
    let mut modulus = 0.0_f64;
    for z in zs.iter().step_by(step) {
        let map = family.map_at(z)?;
        let images: Vec<Vec<f64>> = dirs.iter().map(|d| map.apply(d)).collect::<Result<_, _>>()?;
        for i in 0..dirs.len() {
            for j in (i + 1)..dirs.len() {
                let du = norm(&sub(&dirs[i], &dirs[j]));
                if du <= 1e-12 {
                    continue;
                }
                modulus = modulus.max(norm(&sub(&images[i], &images[j])) / du);
            }
        }
    }
    Ok(modulus)
}

/// Run every hypothesis probe at `base`: vanishing of `f(base, ·)`,
/// strict differentiability, equicontinuity of the derivative family,
/// and the local error bound.  The flags decide which inclusions a
/// verification run may assert.
pub fn hypothesis_checks(
    inst: &VepInstance,
    oracle: &EquiOracle<'_>,
    base: &[f64],
    error_bound_radii: &[f64],
) -> Result<HypothesisChecks, ApproxError> {
    let family = inst.deriv.as_ref().ok_or(ApproxError::MissingDerivative)?;
    let zs = inst.z_sample();
    let mut max_f = 0.0_f64;
    for z in zs {
        max_f = max_f.max(norm(&eval_f(inst, base, z)?));
    }
    let f_vanishes = max_f <= oracle.tol_eq;
    let strict_step = (zs.len() / 128).max(1);
    let strict_sub: Vec<Vec<f64>> = zs.iter().step_by(strict_step).cloned().collect();
    let strict_bdiff = strictness_check(&inst.f, family, &strict_sub, &DIFF_EPS_GRID)?.consistent;
    let equicontinuity_modulus = equicontinuity_probe(family, zs)?;
    let equicontinuity_evidence = equicontinuity_modulus.is_finite();
    let error_bound = error_bound_probe(oracle, base, error_bound_radii)?.verdict;
    let inner_gate =
        matches!(error_bound, ErrorBoundVerdict::Holds | ErrorBoundVerdict::HoldsTrivially);
    Ok(HypothesisChecks {
        polyhedral_k: true,
        f_vanishes,
        max_f_norm: max_f,
        strict_bdiff,
        equicontinuity_modulus,
        equicontinuity_evidence,
        error_bound,
        inner_gate,
        all_pass: f_vanishes && strict_bdiff && equicontinuity_evidence && inner_gate,
    })
}

/// Verify the inclusion chain inner ⊆ contingent ⊆ outer on a shared
/// direction grid, with hypothesis probes deciding which inclusions are
/// asserted and whether cone equality is expected.
pub fn verify_inclusions(
    inst: &VepInstance,
    oracle: &EquiOracle<'_>,
    base: &[f64],
    opts: &VerifyOptions,
) -> Result<AnalysisReport, ApproxError> {
    if inst.deriv.is_none() {
        return Err(ApproxError::MissingDerivative);
    }
    let dirs = sphere_grid(inst.n(), opts.dir_count);
    let inner = inner_cone(inst, oracle, base, &dirs)?;
    let (outer, outer_meta) = outer_cone(inst, base, &dirs)?;
    let contingent = contingent_cone_sampled(oracle, base, &opts.grid, &dirs)?;

    let hypotheses = hypothesis_checks(inst, oracle, base, &opts.error_bound_radii)?;
    let zs = inst.z_sample();

    // Per-direction verdicts with an indeterminate guard band around the
    // contingent threshold.
    let rho = contingent.resolution;
    let indeterminate: Vec<bool> = contingent
        .directions
        .iter()
        .map(|d| (d.score - TAU_DIR).abs() < 2.0 * rho)
        .collect();
    let mut inner_cx = Vec::new();
    let mut inner_strict = Vec::new();
    let mut outer_cx = Vec::new();
    let mut outer_strict = Vec::new();
    let mut indet_count = 0usize;
    for (i, indet) in indeterminate.iter().enumerate() {
        let in_i = inner.table[i].member;
        let in_t = contingent.directions[i].member;
        let in_o = outer.table[i].member;
        if *indet {
            indet_count += 1;
            continue;
        }
        let d = &contingent.directions[i].direction;
        if in_i && !in_t {
            inner_cx.push(d.clone());
        }
        if in_t && !in_i {
            inner_strict.push(d.clone());
        }
        if in_t && !in_o {
            outer_cx.push(d.clone());
        }
        if in_o && !in_t {
            outer_strict.push(d.clone());
        }
    }
    inner_cx.truncate(WITNESS_CAP);
    inner_strict.truncate(WITNESS_CAP);
    outer_cx.truncate(WITNESS_CAP);
    outer_strict.truncate(WITNESS_CAP);
    let inner_inclusion = InclusionCheck {
        name: "inner-in-contingent",
        holds_on_sample: inner_cx.is_empty(),
        asserted: hypotheses.inner_gate,
        counterexamples: inner_cx,
        strict: !inner_strict.is_empty(),
        strict_witnesses: inner_strict,
        indeterminate: indet_count,
    };
    let outer_inclusion = InclusionCheck {
        name: "contingent-in-outer",
        holds_on_sample: outer_cx.is_empty(),
        asserted: hypotheses.equicontinuity_evidence,
        counterexamples: outer_cx,
        strict: !outer_strict.is_empty(),
        strict_witnesses: outer_strict,
        indeterminate: indet_count,
    };

    let corollary = if hypotheses.all_pass {
        let mut mismatches = Vec::new();
        for (i, indet) in indeterminate.iter().enumerate() {
            if *indet {
                continue;
            }
            let (a, b, c) =
                (inner.table[i].member, contingent.directions[i].member, outer.table[i].member);
            if a != b || b != c {
                mismatches.push(contingent.directions[i].direction.clone());
            }
        }
        mismatches.truncate(WITNESS_CAP);
        let exact_cones_equal = match (&inner.exact, &outer.exact) {
            (Some(a), Some(b)) => Some(cones_equal(a, b)?),
            _ => None,
        };
        Some(CorollaryCheck { equal_on_grid: mismatches.is_empty(), mismatches, exact_cones_equal })
    } else {
        None
    };

    let sensitivity = if opts.sensitivity {
        let doubled = VepInstance::new(
            inst.c.clone(),
            inst.k.clone(),
            inst.f.clone(),
            inst.deriv.clone(),
            SamplingConfig { radius: inst.sampling.radius * 2.0, ..inst.sampling.clone() },
        )?;
        let oracle2 = EquiOracle::build(&doubled, base)?;
        let inner2 = inner_cone(&doubled, &oracle2, base, &dirs)?;
        let witness = homogenized_solve(inst, base, None)?;
        let witness2 = homogenized_solve(&doubled, base, None)?;
        Some(SensitivityReport {
            radius: inst.sampling.radius,
            doubled_radius: doubled.sampling.radius,
            inner_members: inner.member_count(),
            inner_members_doubled: inner2.member_count(),
            witness_margin: witness.map(|w| w.margin),
            witness_margin_doubled: witness2.map(|w| w.margin),
        })
    } else {
        None
    };

    Ok(AnalysisReport {
        base: base.to_vec(),
        tol_eq: oracle.tol_eq,
        cloud_size: oracle.cloud().len(),
        oracle_resolution: oracle.resolution(),
        z_sample_size: zs.len(),
        inner,
        outer,
        outer_meta,
        contingent,
        hypotheses,
        inner_inclusion,
        outer_inclusion,
        corollary,
        sensitivity,
    })
}
