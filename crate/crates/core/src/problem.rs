//! Problem instances and the solution-set oracle.
//!
//! An instance is `(C, K, f)`: find `x` in the polyhedron `K` whose
//! bifunction values `f(x, z)` land in the ordering cone `C` for every
//! `z` in `K`.  The scalar residual
//! `nu(x) = sup_z dist(f(x, z), C)`
//! measures violation; its sup is approximated by a deterministic sample
//! of `K` (low-discrepancy points inside a ball, the vertices of a box
//! truncation, plus configured must-include points) and all reported
//! values are sample-sups.
//!
//! The solution set has no closed form, so [`EquiOracle`] represents it
//! by a certified point cloud (grid rejection plus residual-descent
//! polish).  Distances to the set are upper bounds witnessed by certified
//! equilibria; when the projection of the query onto `K` happens to be an
//! equilibrium the bound collapses to the exact distance.

use crate::cones::{ConeError, ConvexCone, Polyhedron};
use crate::deriv::{DerivativeFamily, DEFAULT_FD_STEPS};
use crate::exec;
use crate::expr::{EvalCtx, ExprError, ExprVector};
use crate::linalg::{dist, norm, sub};
use crate::sampling::{halton_point, into_box, sphere_grid};
use crate::tangent::SetOracle;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("evaluating f at z = {z:?}: {source}")]
    EvalAt { z: Vec<f64>, source: ExprError },
    #[error("ordering cone must be pointed")]
    NotPointed,
    #[error("{what}: expected {expected}, got {got}")]
    Arity { what: &'static str, expected: usize, got: usize },
    #[error("no equilibria found in sampling region")]
    NoEquilibria,
    #[error("reference point is not an equilibrium (residual {residual:.3e})")]
    BaseNotEquilibrium { residual: f64 },
    #[error("sigma must be positive")]
    InvalidSigma,
    #[error("instance has no derivative family")]
    MissingDerivative,
    #[error("configured sample point {z:?} lies outside K")]
    IncludeOutsideK { z: Vec<f64> },
}

/// Deterministic sampling parameters for the parameter grid over `K` and
/// the equilibrium cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    /// Ball radius capping the sampled region of `K`.
    pub radius: f64,
    /// Low-discrepancy point budget.
    pub count: usize,
    /// Seed recorded in reports (sampling itself is sequence-based).
    pub seed: u64,
    /// Points that must be part of the parameter sample (validated
    /// against `K`).
    pub include: Vec<Vec<f64>>,
    /// Restrict error-bound probe samples to `K` (the textbook setting).
    /// Instances whose feasible set consists entirely of equilibria can
    /// disable this to probe the bound from outside.
    pub restrict_error_bound_to_feasible: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            radius: 10.0,
            count: 512,
            seed: 0,
            include: Vec::new(),
            restrict_error_bound_to_feasible: true,
        }
    }
}

/// A vector equilibrium problem instance.
#[derive(Debug, Clone)]
pub struct VepInstance {
    n: usize,
    m: usize,
    pub c: ConvexCone,
    pub k: Polyhedron,
    pub f: ExprVector,
    pub deriv: Option<DerivativeFamily>,
    pub sampling: SamplingConfig,
    /// Frozen sample plus the index where the low-discrepancy (interior)
    /// portion starts.
    z_cache: std::sync::OnceLock<(Vec<Vec<f64>>, usize)>,
}

#[derive(Debug, Clone)]
pub struct Residual {
    pub value: f64,
    pub argmax_index: usize,
    pub argmax_z: Vec<f64>,
    pub sample_size: usize,
}

impl VepInstance {
    pub fn new(
        c: ConvexCone,
        k: Polyhedron,
        f: ExprVector,
        deriv: Option<DerivativeFamily>,
        sampling: SamplingConfig,
    ) -> Result<Self, ProblemError> {
        let n = k.dim();
        let m = c.dim();
        if f.len() != m {
            return Err(ProblemError::Arity { what: "bifunction components", expected: m, got: f.len() });
        }
        if f.max_x > n {
            return Err(ProblemError::Arity { what: "x variables", expected: n, got: f.max_x });
        }
        if f.max_z > n {
            return Err(ProblemError::Arity { what: "z variables", expected: n, got: f.max_z });
        }
        if f.max_u != 0 {
            return Err(ProblemError::Arity { what: "u variables", expected: 0, got: f.max_u });
        }
        if let Some(d) = &deriv {
            if d.input_dim() != n {
                return Err(ProblemError::Arity {
                    what: "derivative input dimension",
                    expected: n,
                    got: d.input_dim(),
                });
            }
            if d.output_dim() != m {
                return Err(ProblemError::Arity {
                    what: "derivative output dimension",
                    expected: m,
                    got: d.output_dim(),
                });
            }
        }
        if !c.is_pointed()? {
            return Err(ProblemError::NotPointed);
        }
        for z in &sampling.include {
            if z.len() != n {
                return Err(ProblemError::Arity { what: "include point", expected: n, got: z.len() });
            }
            if !k.contains(z, 1e-7) {
                return Err(ProblemError::IncludeOutsideK { z: z.clone() });
            }
        }
        Ok(VepInstance { n, m, c, k, f, deriv, sampling, z_cache: std::sync::OnceLock::new() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// The frozen parameter sample: box-truncation vertices inside the
    /// ball, then configured include points, then low-discrepancy points
    /// of `K` inside the ball.
    pub fn z_sample(&self) -> &[Vec<f64>] {
        &self.sample_parts().0
    }

    /// The low-discrepancy portion of the sample: points drawn inside
    /// `K` rather than vertices of the artificial box truncation or
    /// configured points, hence generically interior.
    pub fn interior_sample(&self) -> &[Vec<f64>] {
        let (sample, start) = self.sample_parts();
        &sample[*start..]
    }

    fn sample_parts(&self) -> &(Vec<Vec<f64>>, usize) {
        self.z_cache.get_or_init(|| {
            let cfg = &self.sampling;
            let r = cfg.radius;
            let cap = r * (1.0 + 1e-9);
            let mut sample: Vec<Vec<f64>> = Vec::with_capacity(cfg.count + 8);
            if let Some(verts) = self.k.vertices_in_box(r, 5000) {
                for v in verts {
                    if norm(&v) <= cap {
                        sample.push(v);
                    }
                }
            }
            for z in &cfg.include {
                if !sample.iter().any(|s| dist(s, z) <= 1e-12) {
                    sample.push(z.clone());
                }
            }
            let interior_start = sample.len();
            let center = vec![0.0; self.n];
            let mut index = 1u64;
            let budget = cfg.count as u64 * 200;
            let mut placed = 0usize;
            while placed < cfg.count && index <= budget {
                let p = into_box(&halton_point(index, self.n), &center, r);
                index += 1;
                if norm(&p) <= cap && self.k.contains(&p, 1e-9) {
                    sample.push(p);
                    placed += 1;
                }
            }
            (sample, interior_start)
        })
    }

    fn dist_to_cone(&self, y: &[f64]) -> f64 {
        self.c.distance(y).expect("ordering-cone projection converged").distance
    }

    /// Sample-sup residual with its attaining parameter.
    pub fn residual(&self, x: &[f64]) -> Result<Residual, ProblemError> {
        let zs = self.z_sample();
        let per_z: Vec<Result<f64, ProblemError>> = exec::map_slice(zs, |z| {
            let y = self
                .f
                .eval(&EvalCtx { x, z, u: &[] })
                .map_err(|source| ProblemError::EvalAt { z: z.clone(), source })?;
            Ok(self.dist_to_cone(&y))
        });
        let mut best = f64::NEG_INFINITY;
        let mut best_i = 0;
        for (i, r) in per_z.into_iter().enumerate() {
            let v = r?;
            if v > best {
                best = v;
                best_i = i;
            }
        }
        Ok(Residual {
            value: best.max(0.0),
            argmax_index: best_i,
            argmax_z: zs[best_i].clone(),
            sample_size: zs.len(),
        })
    }

    /// Early-exit test `nu(x) > threshold`, scanning the sample in order.
    pub fn residual_exceeds(&self, x: &[f64], threshold: f64) -> Result<bool, ProblemError> {
        let mut buf = Vec::with_capacity(self.m);
        for z in self.z_sample() {
            self.f
                .eval_into(&EvalCtx { x, z, u: &[] }, &mut buf)
                .map_err(|source| ProblemError::EvalAt { z: z.clone(), source })?;
            if self.dist_to_cone(&buf) > threshold {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Strict equilibrium test: feasibility plus residual at most `tol`.
    pub fn is_equilibrium(&self, x: &[f64], tol: f64) -> Result<bool, ProblemError> {
        if !self.k.contains(x, 1e-9) {
            return Ok(false);
        }
        Ok(!self.residual_exceeds(x, tol)?)
    }

    /// Scale-aware default equilibrium tolerance anchored at a reference
    /// point: `1e-7 (1 + |f(anchor, z0)|)` with `z0` the first sample.
    pub fn default_tol_eq(&self, anchor: &[f64]) -> Result<f64, ProblemError> {
        let zs = self.z_sample();
        let z0 = zs.first().cloned().unwrap_or_else(|| vec![0.0; self.n]);
        let y = self
            .f
            .eval(&EvalCtx { x: anchor, z: &z0, u: &[] })
            .map_err(|source| ProblemError::EvalAt { z: z0.clone(), source })?;
        Ok(1e-7 * (1.0 + norm(&y)))
    }
}

// ---------------------------------------------------------------------------
// Equilibrium oracle
// ---------------------------------------------------------------------------

/// Floor of the pattern-search step; doubles as the reported resolution
/// of cloud-backed distances.
const POLISH_FLOOR: f64 = 1e-8;

/// Certified sample cloud of the solution set with distance queries.
#[derive(Debug)]
pub struct EquiOracle<'a> {
    pub inst: &'a VepInstance,
    pub tol_eq: f64,
    cloud: Vec<Vec<f64>>,
    /// Measured width of the certification band: the largest probed step
    /// from a cloud point that stays certified while having strictly
    /// positive residual.  Zero when certification is razor sharp.
    band: std::sync::OnceLock<f64>,
}

impl<'a> EquiOracle<'a> {
    /// Build the cloud by rejection over the sampling grid (plus the
    /// anchor) and residual-descent polish of near misses.
    pub fn build(inst: &'a VepInstance, anchor: &[f64]) -> Result<Self, ProblemError> {
        let tol_eq = inst.default_tol_eq(anchor)?;
        let mut candidates: Vec<Vec<f64>> = Vec::new();
        if inst.k.contains(anchor, 1e-9) {
            candidates.push(anchor.to_vec());
        }
        candidates.extend(inst.z_sample().iter().cloned());
        let spacing = 2.0 * inst.sampling.radius / (inst.sampling.count as f64).powf(1.0 / inst.n as f64);
        let polish_band = (100.0 * tol_eq).max(0.05 * spacing * spacing);

        let mut cloud: Vec<Vec<f64>> = Vec::new();
        let push_unique = |cloud: &mut Vec<Vec<f64>>, p: Vec<f64>| {
            if !cloud.iter().any(|q| dist(q, &p) <= 1e-9) {
                cloud.push(p);
            }
        };
        for cand in candidates {
            if !inst.residual_exceeds(&cand, tol_eq)? {
                push_unique(&mut cloud, cand);
                continue;
            }
            if !inst.residual_exceeds(&cand, polish_band)? {
                if let Some(p) = polish_to_equilibrium(inst, &cand, tol_eq, spacing)? {
                    push_unique(&mut cloud, p);
                }
            }
        }
        if cloud.is_empty() {
            return Err(ProblemError::NoEquilibria);
        }
        Ok(EquiOracle { inst, tol_eq, cloud, band: std::sync::OnceLock::new() })
    }

    /// Rebuild from an exported point list, re-certifying every point.
    pub fn from_points(
        inst: &'a VepInstance,
        anchor: &[f64],
        points: Vec<Vec<f64>>,
    ) -> Result<Self, ProblemError> {
        let tol_eq = inst.default_tol_eq(anchor)?;
        let mut cloud = Vec::with_capacity(points.len());
        for p in points {
            if inst.is_equilibrium(&p, tol_eq)? {
                cloud.push(p);
            }
        }
        if cloud.is_empty() {
            return Err(ProblemError::NoEquilibria);
        }
        Ok(EquiOracle { inst, tol_eq, cloud, band: std::sync::OnceLock::new() })
    }

    /// Probe how far past the true solution set certification reaches:
    /// from a few cloud points, the largest coordinate step whose target
    /// is still certified (inside `K`, residual at most `tol_eq`) yet has
    /// strictly positive residual.  Region where the oracle cannot tell
    /// solutions from near-solutions.
    fn certification_band(&self) -> f64 {
        *self.band.get_or_init(|| self.certification_band_at(self.tol_eq, &self.cloud))
    }

    /// The band measurement above, parameterized over the certification
    /// tolerance and the points to probe from (first, middle, last).
    fn certification_band_at(&self, tol: f64, points: &[Vec<f64>]) -> f64 {
        let inst = self.inst;
        let n = inst.n();
        let spacing =
            2.0 * inst.sampling.radius / (inst.sampling.count as f64).powf(1.0 / n as f64);
        let mut probes: Vec<&Vec<f64>> = vec![&points[0]];
        if points.len() > 1 {
            probes.push(&points[points.len() - 1]);
            probes.push(&points[points.len() / 2]);
        }
        let mut band = 0.0_f64;
        for p in probes {
            for i in 0..n {
                for sign in [1.0, -1.0] {
                    let mut s = spacing.max(1e-3);
                    while s > POLISH_FLOOR {
                        if s > band {
                            let mut x = (*p).clone();
                            x[i] += sign * s;
                            if inst.k.contains(&x, 1e-9) {
                                let nu = inst
                                    .residual(&x)
                                    .map(|r| r.value)
                                    .unwrap_or(f64::INFINITY);
                                if nu > 0.0 && nu <= tol {
                                    band = s;
                                    break;
                                }
                            }
                        } else {
                            break;
                        }
                        s *= 0.5;
                    }
                }
            }
        }
        band
    }

    pub fn cloud(&self) -> &[Vec<f64>] {
        &self.cloud
    }

    pub fn is_equilibrium(&self, x: &[f64]) -> Result<bool, ProblemError> {
        self.inst.is_equilibrium(x, self.tol_eq)
    }

    /// Upper-bound distance to the solution set, witnessed by a certified
    /// equilibrium.  The witness search tries, in order: the query itself,
    /// its projection onto `K` (exact when certified, since
    /// `dist(x, K) <= dist(x, Equi)`), and the nearest cloud point refined
    /// by pattern search inside the certified set.
    pub fn dist_to_equi(&self, x: &[f64]) -> Result<f64, ProblemError> {
        let floor = self.resolution().max(POLISH_FLOOR * (1.0 + norm(x)));
        self.dist_to_certified(x, self.tol_eq, &self.cloud, floor)
    }

    /// Distance core shared by `dist_to_equi` and the error-bound probe:
    /// distance from `x` to the set certified at tolerance `tol`, seeded
    /// at the nearest of `seeds` (each of which must itself certify at
    /// `tol`) and refined by pattern search with step floor `floor`.
    fn dist_to_certified(
        &self,
        x: &[f64],
        tol: f64,
        seeds: &[Vec<f64>],
        floor: f64,
    ) -> Result<f64, ProblemError> {
        if self.inst.is_equilibrium(x, tol)? {
            return Ok(0.0);
        }
        let pk = self.inst.k.projection(x)?;
        if !self.inst.residual_exceeds(&pk.point, tol)? {
            return Ok(pk.distance);
        }
        let (mut at, mut best) = nearest_of(seeds, x);
        // Pattern search over certified equilibria, minimizing |x - q|.
        // The step floor stays above the certification band so the search
        // refines cloud discreteness without crawling into the region
        // where near-solutions certify as solutions.
        let n = self.inst.n;
        let mut h = (best * 0.5).max(1e-3);
        let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(2 * n + 1);
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[i] = s;
                dirs.push(e);
            }
        }
        while h > floor {
            // Most promising poll first: straight toward the query.
            let toward = sub(x, &at);
            let nt = norm(&toward);
            let mut improved = false;
            let mut polls = dirs.clone();
            if nt > 1e-12 {
                polls.insert(0, toward.iter().map(|c| c / nt).collect());
            }
            for d in &polls {
                let q: Vec<f64> = at.iter().zip(d).map(|(a, di)| a + h * di).collect();
                let cand = dist(x, &q);
                if cand < best - 1e-15
                    && self.inst.k.contains(&q, 1e-9)
                    && !self.inst.residual_exceeds(&q, tol)?
                {
                    at = q;
                    best = cand;
                    improved = true;
                    break;
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        Ok(best)
    }

    /// Reported spatial accuracy of distance answers: at least the
    /// pattern-search floor, widened to cover the measured certification
    /// band (the probe's halving ladder is accurate to a factor of two,
    /// hence the doubling).
    pub fn resolution(&self) -> f64 {
        (2.0 * self.certification_band()).max(POLISH_FLOOR * 10.0)
    }
}

/// Nearest point of a nonempty seed list, with its distance.
fn nearest_of(seeds: &[Vec<f64>], x: &[f64]) -> (Vec<f64>, f64) {
    let mut best = f64::INFINITY;
    let mut at = seeds[0].clone();
    for p in seeds {
        let d = dist(x, p);
        if d < best {
            best = d;
            at = p.clone();
        }
    }
    (at, best)
}

/// Compass descent on the residual from a near-miss candidate; returns a
/// certified equilibrium when the descent reaches the tolerance.
fn polish_to_equilibrium(
    inst: &VepInstance,
    start: &[f64],
    tol_eq: f64,
    spacing: f64,
) -> Result<Option<Vec<f64>>, ProblemError> {
    let n = inst.n();
    let mut at = start.to_vec();
    let mut val = inst.residual(&at)?.value;
    let mut h = spacing.max(1e-3);
    while h > 1e-9 && val > tol_eq {
        let mut improved = false;
        'polls: for i in 0..n {
            for s in [1.0, -1.0] {
                let mut q = at.clone();
                q[i] += s * h;
                if !inst.k.contains(&q, 1e-9) {
                    continue;
                }
                if !inst.residual_exceeds(&q, val)? {
                    let candidate = inst.residual(&q)?.value;
                    if candidate < val - 1e-18 {
                        at = q;
                        val = candidate;
                        improved = true;
                        break 'polls;
                    }
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    Ok(if val <= tol_eq { Some(at) } else { None })
}

impl SetOracle for EquiOracle<'_> {
    fn dim(&self) -> usize {
        self.inst.n()
    }
    fn contains(&self, x: &[f64]) -> bool {
        self.is_equilibrium(x).expect("residual evaluation total on instance domain")
    }
    fn distance(&self, x: &[f64]) -> f64 {
        self.dist_to_equi(x).expect("residual evaluation total on instance domain")
    }
    fn resolution(&self) -> f64 {
        EquiOracle::resolution(self)
    }
    fn label(&self) -> String {
        format!("equilibrium set (cloud of {})", self.cloud.len())
    }
}

// ---------------------------------------------------------------------------
// Error-bound probe
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorBoundVerdict {
    Holds,
    /// Every sampled point was an equilibrium: nothing to bound.
    HoldsTrivially,
    Fails,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct ErrorBoundRow {
    pub radius: f64,
    /// Largest observed `dist_to_equi / residual`; `None` when every
    /// sample at this radius was an equilibrium.
    pub kappa: Option<f64>,
    pub samples_used: usize,
    pub skipped_equilibria: usize,
}

#[derive(Debug, Clone)]
pub struct ErrorBoundReport {
    pub rows: Vec<ErrorBoundRow>,
    pub verdict: ErrorBoundVerdict,
}

pub const DEFAULT_ERROR_BOUND_RADII: [f64; 4] = [1.0, 1e-1, 1e-2, 1e-3];

/// Estimate the local error-bound modulus around a solution: for each
/// radius, the worst `dist / residual` over a sphere shell of samples
/// (restricted to `K` unless configured otherwise).
///
/// Shells whose residuals sit below the oracle's global tolerance would
/// read as all-equilibrium and yield no modulus, so each shell is probed
/// at a zoomed-in tolerance three decades below its smallest surviving
/// residual (capped by the global tolerance).  Distances are then taken
/// against the set certified at that zoom level, keeping the ratio
/// meaningful at every radius the caller asks for.
pub fn error_bound_probe(
    oracle: &EquiOracle<'_>,
    base: &[f64],
    radii: &[f64],
) -> Result<ErrorBoundReport, ProblemError> {
    let inst = oracle.inst;
    if !oracle.is_equilibrium(base)? {
        let r = inst.residual(base)?.value;
        return Err(ProblemError::BaseNotEquilibrium { residual: r });
    }
    let dirs = sphere_grid(inst.n(), 32);
    let mut rows = Vec::with_capacity(radii.len());
    for &radius in radii {
        let mut shell: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dirs.len());
        for d in &dirs {
            let x: Vec<f64> = base.iter().zip(d).map(|(b, di)| b + radius * di).collect();
            if inst.sampling.restrict_error_bound_to_feasible && !inst.k.contains(&x, 1e-9) {
                continue;
            }
            let res = inst.residual(&x)?.value;
            shell.push((x, res));
        }
        let max_res = shell.iter().fold(0.0_f64, |m, (_, r)| m.max(*r));
        // Residuals indistinguishable from zero at working precision.
        let machine = 1e-14 * (1.0 + max_res);
        let min_pos = shell
            .iter()
            .filter(|(_, r)| *r > machine)
            .fold(f64::INFINITY, |m, (_, r)| m.min(*r));
        if !min_pos.is_finite() {
            rows.push(ErrorBoundRow {
                radius,
                kappa: None,
                samples_used: 0,
                skipped_equilibria: shell.len(),
            });
            continue;
        }
        let mut tol_local = oracle.tol_eq.min(1e-3 * min_pos);
        // Witness seeds must re-certify at the zoom tolerance; if none of
        // the cloud does, relax the zoom to the best available witness.
        let seeds: Vec<Vec<f64>> = if tol_local >= oracle.tol_eq {
            oracle.cloud.clone()
        } else {
            let mut with_res: Vec<(f64, &Vec<f64>)> = Vec::with_capacity(oracle.cloud.len());
            for p in &oracle.cloud {
                with_res.push((inst.residual(p)?.value, p));
            }
            let certified: Vec<Vec<f64>> = with_res
                .iter()
                .filter(|(r, _)| *r <= tol_local)
                .map(|(_, p)| (*p).clone())
                .collect();
            if certified.is_empty() {
                let best = with_res
                    .iter()
                    .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                    .unwrap();
                tol_local = best.0 * (1.0 + 1e-9) + f64::MIN_POSITIVE;
                vec![best.1.clone()]
            } else {
                certified
            }
        };
        let band_local = if tol_local >= oracle.tol_eq {
            oracle.certification_band()
        } else {
            oracle.certification_band_at(tol_local, &seeds)
        };
        let guard = tol_local.max(machine);
        let mut kappa: Option<f64> = None;
        let mut used = 0usize;
        let mut skipped = 0usize;
        for (x, res) in &shell {
            if *res <= guard {
                skipped += 1;
                continue;
            }
            let floor = (2.0 * band_local).max(POLISH_FLOOR * (1.0 + norm(x)));
            let dist_e = oracle.dist_to_certified(x, tol_local, &seeds, floor)?;
            let ratio = dist_e / res;
            kappa = Some(kappa.map_or(ratio, |k: f64| k.max(ratio)));
            used += 1;
        }
        rows.push(ErrorBoundRow { radius, kappa, samples_used: used, skipped_equilibria: skipped });
    }
    let observed: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.kappa.map(|k| (r.radius, k)))
        .collect();
    let verdict = if observed.is_empty() {
        ErrorBoundVerdict::HoldsTrivially
    } else {
        // Order by decreasing radius.
        let mut by_radius = observed.clone();
        by_radius.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let k_max_radius = by_radius.first().unwrap().1;
        let k_min_radius = by_radius.last().unwrap().1;
        let monotone_growth = by_radius.windows(2).all(|w| w[1].1 > w[0].1);
        if k_min_radius <= 2.0 * k_max_radius {
            ErrorBoundVerdict::Holds
        } else if monotone_growth && k_min_radius > 10.0 * k_max_radius {
            ErrorBoundVerdict::Fails
        } else {
            ErrorBoundVerdict::Inconclusive
        }
    };
    Ok(ErrorBoundReport { rows, verdict })
}

// ---------------------------------------------------------------------------
// Sigma-condition probe
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SigmaWitness {
    pub x0: Vec<f64>,
    /// Best direction found in the unit sphere intersected with the
    /// feasible cone at `x0`, with its worst-case depth over the sample.
    pub direction: Option<Vec<f64>>,
    pub depth: f64,
}

#[derive(Debug, Clone)]
pub struct SigmaBoundCheck {
    pub samples: usize,
    /// Worst `dist_to_equi(x) - nu(x)/sigma` (should stay below the
    /// oracle resolution when the condition holds).
    pub worst_gap: f64,
}

#[derive(Debug, Clone)]
pub struct SigmaReport {
    pub sigma: f64,
    pub verdict: bool,
    pub witnesses: Vec<SigmaWitness>,
    pub bound: Option<SigmaBoundCheck>,
}

/// Probe the uniform-depth condition: every sampled non-equilibrium `x0`
/// must admit a unit direction `u0` in the feasible cone whose derivative
/// values sit at depth `sigma` inside `C` for the whole parameter sample.
/// Derivatives away from the family base are taken by finite differences
/// of `f`.  When the probe passes, the implied estimate
/// `dist(x, Equi) <= nu(x)/sigma` is spot-checked over the grid.
pub fn sigma_condition_probe(
    oracle: &EquiOracle<'_>,
    sigma: f64,
    x0_budget: usize,
) -> Result<SigmaReport, ProblemError> {
    let inst = oracle.inst;
    if sigma <= 0.0 {
        return Err(ProblemError::InvalidSigma);
    }
    if inst.deriv.is_none() {
        return Err(ProblemError::MissingDerivative);
    }
    let rows = inst
        .c
        .halfspace_rows()
        .ok_or(ConeError::NotHalfspaceRepresentable)
        .map_err(ProblemError::Cone)?;
    let row_norms: Vec<f64> = rows.rows_iter().map(norm).collect();
    let zs = inst.z_sample();

    // Non-equilibrium seeds drawn from the interior portion of the grid:
    // vertices of the box truncation sit on artificial faces whose
    // feasible cones exclude the useful directions.
    let mut x0s: Vec<Vec<f64>> = Vec::new();
    for cand in inst.interior_sample() {
        if x0s.len() >= x0_budget {
            break;
        }
        if inst.residual_exceeds(cand, oracle.tol_eq)? {
            x0s.push(cand.clone());
        }
    }

    let dirs = sphere_grid(inst.n(), 32);
    let mut witnesses = Vec::with_capacity(x0s.len());
    let mut verdict = true;
    for x0 in &x0s {
        let feasible_cone = inst.k.tangent_cone_at(x0)?;
        let f_base: Vec<Vec<f64>> = zs
            .iter()
            .map(|z| {
                inst.f
                    .eval(&EvalCtx { x: x0, z, u: &[] })
                    .map_err(|source| ProblemError::EvalAt { z: z.clone(), source })
            })
            .collect::<Result<_, _>>()?;
        let mut best_depth = f64::NEG_INFINITY;
        let mut best_dir: Option<Vec<f64>> = None;
        for u in &dirs {
            if !feasible_cone.member(u, 1e-9)? {
                continue;
            }
            // Worst-case depth of the derivative over the parameter
            // sample, with early exit once below the current best.
            let mut worst = f64::INFINITY;
            for (zi, z) in zs.iter().enumerate() {
                let d = fd_direction(inst, x0, z, u, &f_base[zi])?;
                let depth = if rows.rows == 0 {
                    f64::INFINITY
                } else {
                    let mut m = f64::INFINITY;
                    for (r, row) in rows.rows_iter().enumerate() {
                        let v = crate::linalg::dot(row, &d) / row_norms[r].max(1e-300);
                        m = m.min(v);
                    }
                    m
                };
                worst = worst.min(depth);
                if worst <= best_depth {
                    break;
                }
            }
            if worst > best_depth {
                best_depth = worst;
                best_dir = Some(u.clone());
            }
        }
        // Also demotes a NaN depth (no usable probe data).
        if best_depth < sigma || best_depth.is_nan() {
            verdict = false;
        }
        witnesses.push(SigmaWitness {
            x0: x0.clone(),
            direction: best_dir,
            depth: if best_depth.is_finite() { best_depth } else { 0.0 },
        });
    }
    if x0s.is_empty() {
        // Nothing to witness: condition is vacuously satisfied on the
        // sample.
        verdict = true;
    }

    let bound = if verdict {
        let mut worst_gap = f64::NEG_INFINITY;
        let mut samples = 0usize;
        for x in zs.iter().take(32) {
            let nu = inst.residual(x)?.value;
            if nu <= oracle.tol_eq {
                continue;
            }
            let d = oracle.dist_to_equi(x)?;
            worst_gap = worst_gap.max(d - nu / sigma);
            samples += 1;
        }
        Some(SigmaBoundCheck {
            samples,
            worst_gap: if worst_gap.is_finite() { worst_gap } else { 0.0 },
        })
    } else {
        None
    };
    Ok(SigmaReport { sigma, verdict, witnesses, bound })
}

/// Richardson finite-difference directional derivative with a cached
/// base value.
fn fd_direction(
    inst: &VepInstance,
    x0: &[f64],
    z: &[f64],
    u: &[f64],
    f_base: &[f64],
) -> Result<Vec<f64>, ProblemError> {
    let steps = &DEFAULT_FD_STEPS;
    let mut quots: Vec<Vec<f64>> = Vec::with_capacity(steps.len());
    let mut buf = Vec::new();
    for &t in steps.iter() {
        let xt: Vec<f64> = x0.iter().zip(u).map(|(b, d)| b + t * d).collect();
        inst.f
            .eval_into(&EvalCtx { x: &xt, z, u: &[] }, &mut buf)
            .map_err(|source| ProblemError::EvalAt { z: z.to_vec(), source })?;
        quots.push(buf.iter().zip(f_base).map(|(a, b)| (a - b) / t).collect());
    }
    let k = steps.len();
    let r = steps[k - 2] / steps[k - 1];
    Ok(quots[k - 1]
        .iter()
        .zip(&quots[k - 2])
        .map(|(fine, coarse)| (r * fine - coarse) / (r - 1.0))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    /// Quadratic two-component instance whose bifunction maps everything
    /// into the ordering cone: the solution set is all of `K`.
    fn quadratic_instance() -> VepInstance {
        let f = ExprVector::parse(
            "0.5*(-(1 - 1/(z1^2 + z2^2 + 1))*x1 + x2 + 1)^2; \
             0.5*((1 + 1/(z1^2 + z2^2 + 1))*x1 - x2 + 1)^2",
        )
        .unwrap();
        VepInstance::new(
            ConvexCone::orthant(2),
            Polyhedron::new(Mat::identity(2), vec![0.0, 0.0]).unwrap(),
            f,
            None,
            SamplingConfig::default(),
        )
        .unwrap()
    }

    /// Scalar rational instance with solution set `{0}`.
    fn scalar_instance() -> VepInstance {
        let f = ExprVector::parse("x1^2*z1/(z1^2 + 1)").unwrap();
        VepInstance::new(
            ConvexCone::orthant(1),
            Polyhedron::full_space(1),
            f,
            Some(DerivativeFamily::constant_linear(vec![0.0], Mat::zeros(1, 1))),
            SamplingConfig { include: vec![vec![-1.0]], ..SamplingConfig::default() },
        )
        .unwrap()
    }

    /// `f(x, z) = x` with `C = K` the orthant: every feasible point is a
    /// solution, and the residual equals the distance to the orthant.
    fn identity_instance() -> VepInstance {
        VepInstance::new(
            ConvexCone::orthant(2),
            Polyhedron::new(Mat::identity(2), vec![0.0, 0.0]).unwrap(),
            ExprVector::parse("x1; x2").unwrap(),
            None,
            SamplingConfig {
                restrict_error_bound_to_feasible: false,
                ..SamplingConfig::default()
            },
        )
        .unwrap()
    }

    /// Separable instance `f(x, z) = x - z` on the unit box: the only
    /// solution is the top corner `(1, 1)`.
    fn separable_box_instance() -> VepInstance {
        let k = Polyhedron::new(
            Mat::from_rows(
                vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
                2,
            ),
            vec![0.0, 0.0, -1.0, -1.0],
        )
        .unwrap();
        VepInstance::new(
            ConvexCone::orthant(2),
            k,
            ExprVector::parse("x1 - z1; x2 - z2").unwrap(),
            Some(DerivativeFamily::constant_linear(vec![1.0, 1.0], Mat::identity(2))),
            SamplingConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn z_sample_starts_with_capped_vertices() {
        let inst = quadratic_instance();
        let zs = inst.z_sample();
        // Vertices of the truncated orthant inside the ball: the corner
        // (10, 10) lies outside radius 10 and must be absent.
        assert!(zs.iter().any(|z| dist(z, &[0.0, 0.0]) <= 1e-9));
        assert!(zs.iter().any(|z| dist(z, &[10.0, 0.0]) <= 1e-9));
        assert!(zs.iter().any(|z| dist(z, &[0.0, 10.0]) <= 1e-9));
        assert!(!zs.iter().any(|z| dist(z, &[10.0, 10.0]) <= 1e-6));
        for z in zs {
            assert!(norm(z) <= 10.0 * (1.0 + 1e-9));
            assert!(inst.k.contains(z, 1e-7));
        }
        assert!(zs.len() >= 512);
    }

    #[test]
    fn residual_zero_when_values_stay_in_cone() {
        let inst = quadratic_instance();
        for x in [[0.0, 0.0], [1.0, 1.0], [0.3, 2.0], [-1.0, 4.0]] {
            let r = inst.residual(&x).unwrap();
            assert_eq!(r.value, 0.0, "x = {x:?}");
        }
    }

    #[test]
    fn scalar_residual_attained_at_included_point() {
        let inst = scalar_instance();
        // Independent brute force over the same frozen sample.
        let r = inst.residual(&[2.0]).unwrap();
        let mut brute = 0.0_f64;
        for z in inst.z_sample() {
            let y = 4.0 * z[0] / (z[0] * z[0] + 1.0);
            brute = brute.max((-y).max(0.0));
        }
        assert!((r.value - brute).abs() <= 1e-12);
        // The max of -z/(z^2+1) over the reals is 1/2 at z = -1, which the
        // sample contains by configuration: nu(2) = 4 * 1/2 = 2 exactly.
        assert!((r.value - 2.0).abs() <= 1e-12, "value {}", r.value);
        assert!((r.argmax_z[0] + 1.0).abs() <= 1e-12, "argmax {:?}", r.argmax_z);
    }

    #[test]
    fn equilibrium_membership() {
        let quad = quadratic_instance();
        let tol = quad.default_tol_eq(&[0.0, 0.0]).unwrap();
        assert!(quad.is_equilibrium(&[1.0, 1.0], tol).unwrap());
        assert!(!quad.is_equilibrium(&[-1.0, 0.0], tol).unwrap(), "outside K");

        let scalar = scalar_instance();
        let tol = scalar.default_tol_eq(&[0.0]).unwrap();
        assert!(scalar.is_equilibrium(&[0.0], tol).unwrap());
        assert!(!scalar.is_equilibrium(&[0.1], tol).unwrap());
        let r = scalar.residual(&[0.1]).unwrap();
        assert!((r.value - 0.005).abs() <= 1e-12, "residual {}", r.value);
    }

    #[test]
    fn cloud_points_are_certified() {
        let scalar = scalar_instance();
        let oracle = EquiOracle::build(&scalar, &[0.0]).unwrap();
        assert!(oracle.cloud().iter().any(|p| p[0].abs() <= 1e-9));
        for p in oracle.cloud() {
            assert!(scalar.is_equilibrium(p, oracle.tol_eq).unwrap());
            assert!(p[0].abs() <= 1e-3, "stray cloud point {p:?}");
        }

        let quad = quadratic_instance();
        let oracle = EquiOracle::build(&quad, &[0.0, 0.0]).unwrap();
        assert!(oracle.cloud().len() >= 100, "whole grid should certify");
        for p in oracle.cloud().iter().take(20) {
            assert!(quad.is_equilibrium(p, oracle.tol_eq).unwrap());
        }
    }

    #[test]
    fn distance_to_solution_set() {
        let quad = quadratic_instance();
        let oracle = EquiOracle::build(&quad, &[0.0, 0.0]).unwrap();
        // The solution set is the whole orthant, so the distance is the
        // orthant distance, witnessed exactly by the K-projection.
        let d = oracle.dist_to_equi(&[-1.0, 2.0]).unwrap();
        assert!((d - 1.0).abs() <= 1e-9, "got {d}");
        let inside = oracle.dist_to_equi(&[3.0, 4.0]).unwrap();
        assert_eq!(inside, 0.0);

        let scalar = scalar_instance();
        let oracle = EquiOracle::build(&scalar, &[0.0]).unwrap();
        let d = oracle.dist_to_equi(&[0.3]).unwrap();
        assert!((d - 0.3).abs() <= 1e-6, "got {d}");
        // Upper-bound semantics against any certified point.
        assert!(d <= dist(&[0.3], &oracle.cloud()[0]) + 1e-12);
    }

    #[test]
    fn enlarging_the_sample_never_shrinks_the_residual() {
        let small = VepInstance::new(
            ConvexCone::orthant(1),
            Polyhedron::full_space(1),
            ExprVector::parse("x1^2*z1/(z1^2 + 1)").unwrap(),
            None,
            SamplingConfig { count: 128, ..SamplingConfig::default() },
        )
        .unwrap();
        let large = VepInstance::new(
            ConvexCone::orthant(1),
            Polyhedron::full_space(1),
            ExprVector::parse("x1^2*z1/(z1^2 + 1)").unwrap(),
            None,
            SamplingConfig { count: 512, ..SamplingConfig::default() },
        )
        .unwrap();
        for x in [[0.5], [1.0], [2.0], [-1.3]] {
            let a = small.residual(&x).unwrap().value;
            let b = large.residual(&x).unwrap().value;
            assert!(a <= b + 1e-15, "sample growth shrank the residual at {x:?}");
        }
    }

    #[test]
    fn error_bound_trivial_when_everything_solves() {
        let quad = quadratic_instance();
        let oracle = EquiOracle::build(&quad, &[0.0, 0.0]).unwrap();
        let report =
            error_bound_probe(&oracle, &[0.0, 0.0], &DEFAULT_ERROR_BOUND_RADII).unwrap();
        assert_eq!(report.verdict, ErrorBoundVerdict::HoldsTrivially);
        for row in &report.rows {
            assert!(row.kappa.is_none());
        }
    }

    #[test]
    fn error_bound_fails_with_reciprocal_growth() {
        let scalar = scalar_instance();
        let oracle = EquiOracle::build(&scalar, &[0.0]).unwrap();
        let report = error_bound_probe(&oracle, &[0.0], &DEFAULT_ERROR_BOUND_RADII).unwrap();
        assert_eq!(report.verdict, ErrorBoundVerdict::Fails);
        // kappa(delta) tracks 2/delta: dist = |x| = delta, residual =
        // delta^2/2.
        for row in &report.rows {
            let k = row.kappa.expect("non-equilibria at every radius");
            assert!(
                (k * row.radius - 2.0).abs() <= 0.05,
                "kappa({}) = {k}, expected about {}",
                row.radius,
                2.0 / row.radius
            );
        }
    }

    #[test]
    fn error_bound_holds_with_unit_modulus() {
        let inst = identity_instance();
        let oracle = EquiOracle::build(&inst, &[0.0, 0.0]).unwrap();
        let report = error_bound_probe(&oracle, &[0.0, 0.0], &DEFAULT_ERROR_BOUND_RADII).unwrap();
        assert_eq!(report.verdict, ErrorBoundVerdict::Holds);
        for row in &report.rows {
            let k = row.kappa.expect("off-cone samples exist at every radius");
            assert!((k - 1.0).abs() <= 0.5, "kappa({}) = {k}", row.radius);
        }
    }

    #[test]
    fn sigma_probe_accepts_separable_instance() {
        let inst = separable_box_instance();
        let oracle = EquiOracle::build(&inst, &[1.0, 1.0]).unwrap();
        let report = sigma_condition_probe(&oracle, 0.5, 6).unwrap();
        assert!(report.verdict, "witnesses: {:?}", report.witnesses);
        for w in &report.witnesses {
            let u = w.direction.as_ref().expect("witness direction");
            // The witness points into the cone toward the solution corner.
            assert!(u[0] > 0.0 && u[1] > 0.0, "direction {u:?}");
            assert!(w.depth >= 0.5);
        }
        let bound = report.bound.expect("bound check runs when the probe passes");
        assert!(bound.samples > 0);
        assert!(bound.worst_gap <= oracle.resolution() + 1e-6, "gap {}", bound.worst_gap);
    }

    #[test]
    fn sigma_probe_rejects_zero_derivative_family() {
        let inst = scalar_instance();
        let oracle = EquiOracle::build(&inst, &[0.0]).unwrap();
        for sigma in [0.1, 0.5, 1.0] {
            let report = sigma_condition_probe(&oracle, sigma, 4).unwrap();
            assert!(!report.verdict, "sigma = {sigma}");
        }
    }

    #[test]
    fn sigma_probe_validates_inputs() {
        let inst = scalar_instance();
        let oracle = EquiOracle::build(&inst, &[0.0]).unwrap();
        assert!(matches!(
            sigma_condition_probe(&oracle, 0.0, 4),
            Err(ProblemError::InvalidSigma)
        ));
        let no_deriv = VepInstance::new(
            ConvexCone::orthant(1),
            Polyhedron::full_space(1),
            ExprVector::parse("x1^2*z1/(z1^2 + 1)").unwrap(),
            None,
            SamplingConfig { include: vec![vec![-1.0]], ..SamplingConfig::default() },
        )
        .unwrap();
        let oracle2 = EquiOracle::build(&no_deriv, &[0.0]).unwrap();
        assert!(matches!(
            sigma_condition_probe(&oracle2, 0.5, 4),
            Err(ProblemError::MissingDerivative)
        ));
    }

    #[test]
    fn instance_validation_rejects_bad_data() {
        // Non-pointed ordering cone.
        let halfplane = ConvexCone::halfspaces(Mat::from_rows(vec![vec![1.0, 0.0]], 2));
        let err = VepInstance::new(
            halfplane,
            Polyhedron::full_space(2),
            ExprVector::parse("x1; x2").unwrap(),
            None,
            SamplingConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ProblemError::NotPointed));
        // Include point outside K.
        let err = VepInstance::new(
            ConvexCone::orthant(2),
            Polyhedron::new(Mat::identity(2), vec![0.0, 0.0]).unwrap(),
            ExprVector::parse("x1; x2").unwrap(),
            None,
            SamplingConfig { include: vec![vec![-1.0, -1.0]], ..SamplingConfig::default() },
        )
        .unwrap_err();
        assert!(matches!(err, ProblemError::IncludeOutsideK { .. }));
        // Component count must match the cone dimension.
        let err = VepInstance::new(
            ConvexCone::orthant(2),
            Polyhedron::full_space(2),
            ExprVector::parse("x1").unwrap(),
            None,
            SamplingConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ProblemError::Arity { .. }));
    }

    #[test]
    fn exported_cloud_round_trips() {
        let scalar = scalar_instance();
        let oracle = EquiOracle::build(&scalar, &[0.0]).unwrap();
        let points: Vec<Vec<f64>> = oracle.cloud().to_vec();
        let rebuilt = EquiOracle::from_points(&scalar, &[0.0], points.clone()).unwrap();
        assert_eq!(rebuilt.cloud().len(), points.len());
        // Tampered points are re-certified away.
        let mut tampered = points;
        tampered.push(vec![5.0]);
        let filtered = EquiOracle::from_points(&scalar, &[0.0], tampered).unwrap();
        assert_eq!(filtered.cloud().len(), oracle.cloud().len());
    }
}
