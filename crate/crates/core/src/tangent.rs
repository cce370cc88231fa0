//! Tangent-cone machinery over membership/distance oracles.
//!
//! Four nested direction notions at a base point of a set `S`:
//!
//! * contingent: `liminf_{t -> 0} dist(base + t v, S) / t = 0`, realized
//!   as the minimum of the quotient over a geometric step grid;
//! * radial: arbitrarily small steps land exactly in `S`;
//! * feasible: a whole initial segment stays in `S`;
//! * inner: a whole initial segment of a ball of directions stays in `S`.
//!
//! Each notion has a membership test; the contingent notion additionally
//! produces a [`ConeEstimate`] scoring a full sphere grid of directions.
//! For polyhedra the radial and contingent cones coincide and are exact
//! (active rows), which the sampled estimators are cross-checked against.

use crate::cones::{ConeError, ConvexCone, Polyhedron};
use crate::exec;
use crate::linalg::norm;
use crate::sampling::{sphere_grid, TGrid};
use thiserror::Error;

/// Verdict threshold on liminf scores of unit directions.
pub const TAU_DIR: f64 = 0.05;

/// Initial-segment length used by the feasible/inner direction tests.
pub const FEASIBLE_SEGMENT: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TangentError {
    #[error("base point is not in the set `{label}` (distance {distance:.3e})")]
    BaseNotInSet { label: String, distance: f64 },
    #[error("direction must be nonzero")]
    ZeroDirection,
}

/// Membership/distance oracle for an arbitrary closed set.
pub trait SetOracle: Sync {
    fn dim(&self) -> usize;
    fn contains(&self, x: &[f64]) -> bool;
    /// Distance to the set (exact for polyhedra and cones; cloud-backed
    /// implementations return their best estimate).
    fn distance(&self, x: &[f64]) -> f64;
    /// Spatial resolution of `distance` answers; `0` for exact oracles.
    fn resolution(&self) -> f64 {
        0.0
    }
    fn label(&self) -> String;
}

/// Membership tolerance for exact-geometry oracles: tight and relative to
/// the query's scale, so that violations proportional to a small step are
/// never swallowed.
fn exact_contains_tol(x: &[f64]) -> f64 {
    1e-12 * (1.0 + norm(x))
}

impl SetOracle for Polyhedron {
    fn dim(&self) -> usize {
        Polyhedron::dim(self)
    }
    fn contains(&self, x: &[f64]) -> bool {
        Polyhedron::contains(self, x, exact_contains_tol(x))
    }
    fn distance(&self, x: &[f64]) -> f64 {
        self.projection(x).expect("polyhedral projection converged").distance
    }
    fn label(&self) -> String {
        format!("polyhedron[{} rows]", self.a.rows)
    }
}

impl SetOracle for ConvexCone {
    fn dim(&self) -> usize {
        ConvexCone::dim(self)
    }
    fn contains(&self, x: &[f64]) -> bool {
        self.member(x, exact_contains_tol(x)).expect("cone membership computable")
    }
    fn distance(&self, x: &[f64]) -> f64 {
        ConvexCone::distance(self, x).expect("cone projection converged").distance
    }
    fn label(&self) -> String {
        "cone".to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeNotion {
    Contingent,
    Radial,
    Feasible,
    Inner,
    Outer,
}

#[derive(Debug, Clone)]
pub struct DirectionScore {
    /// Unit direction.
    pub direction: Vec<f64>,
    /// `min` over the step grid of `dist(base + t v, S) / t`.
    pub score: f64,
    pub member: bool,
    /// The minimizing step was the finest grid level — the quotient may
    /// still be descending, so the score is an upper estimate.
    pub min_at_finest: bool,
}

#[derive(Debug, Clone)]
pub struct ConeEstimate {
    pub base: Vec<f64>,
    pub notion: ConeNotion,
    pub oracle_label: String,
    /// Resolution of the distance oracle backing the scores.
    pub resolution: f64,
    pub threshold: f64,
    pub directions: Vec<DirectionScore>,
}

impl ConeEstimate {
    pub fn members(&self) -> impl Iterator<Item = &DirectionScore> {
        self.directions.iter().filter(|d| d.member)
    }
}

/// Steps of the grid the oracle can actually resolve: distance answers
/// carry error up to the oracle resolution, so quotients at steps below
/// `2 resolution / threshold` are dominated by that error and dropped.
/// The coarsest level always survives.
fn usable_steps(oracle: &dyn SetOracle, grid: &TGrid) -> Vec<f64> {
    let all = grid.values();
    let rho = oracle.resolution();
    if rho <= 0.0 {
        return all;
    }
    let floor = 2.0 * rho / TAU_DIR;
    let kept: Vec<f64> = all.iter().copied().filter(|&t| t >= floor).collect();
    if kept.is_empty() {
        vec![all[0]]
    } else {
        kept
    }
}

/// Liminf score of one (not necessarily unit) direction: minimum over the
/// step grid of `dist(base + t v, S) / t`.  Positively homogeneous jointly
/// in `(v, grid)`: scoring `2v` on a halved grid doubles the score.
pub fn contingent_score(oracle: &dyn SetOracle, base: &[f64], v: &[f64], grid: &TGrid) -> (f64, bool) {
    let mut best = f64::INFINITY;
    let mut best_level = 0;
    let ts = usable_steps(oracle, grid);
    let mut at = vec![0.0; base.len()];
    for (j, &t) in ts.iter().enumerate() {
        for (i, (b, d)) in base.iter().zip(v).enumerate() {
            at[i] = b + t * d;
        }
        let q = oracle.distance(&at) / t;
        if q < best {
            best = q;
            best_level = j;
        }
    }
    (best, best_level == ts.len() - 1)
}

/// Score a sphere grid of directions against the contingent-cone quotient.
pub fn contingent_cone_sampled(
    oracle: &dyn SetOracle,
    base: &[f64],
    grid: &TGrid,
    dirs: &[Vec<f64>],
) -> Result<ConeEstimate, TangentError> {
    ensure_base(oracle, base)?;
    let scored = exec::map_slice(dirs, |d| {
        let n = norm(d);
        let unit: Vec<f64> = d.iter().map(|c| c / n).collect();
        let (score, min_at_finest) = contingent_score(oracle, base, &unit, grid);
        DirectionScore { direction: unit, score, member: score <= TAU_DIR, min_at_finest }
    });
    Ok(ConeEstimate {
        base: base.to_vec(),
        notion: ConeNotion::Contingent,
        oracle_label: oracle.label(),
        resolution: oracle.resolution(),
        threshold: TAU_DIR,
        directions: scored,
    })
}

/// Steps used by the radial membership test: a geometric ladder floored
/// where scale-relative membership tolerances still resolve a violation,
/// plus the equispaced sample points of the feasible-segment test so that
/// a feasible verdict implies a radial one by construction.
fn radial_steps() -> Vec<f64> {
    let mut ts: Vec<f64> = TGrid { t0: 1e-1, ratio: 0.5, levels: 27 }.values();
    for i in 1..32 {
        ts.push(FEASIBLE_SEGMENT * i as f64 / 32.0);
    }
    ts.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ts
}

/// Sample points of the feasible-segment test: equispaced plus geometric
/// steps inside `(0, FEASIBLE_SEGMENT]`.
fn feasible_steps() -> Vec<f64> {
    let mut ts = Vec::with_capacity(48);
    for i in 1..=32 {
        ts.push(FEASIBLE_SEGMENT * i as f64 / 32.0);
    }
    for i in 1..=16 {
        ts.push(FEASIBLE_SEGMENT * 0.5_f64.powi(i));
    }
    ts
}

/// Radial (weak feasible) membership: for every scale in `eps_grid` some
/// strictly smaller step lands exactly in the set.
pub fn radial_cone_member(
    oracle: &dyn SetOracle,
    base: &[f64],
    v: &[f64],
    eps_grid: &[f64],
) -> Result<bool, TangentError> {
    ensure_base(oracle, base)?;
    if norm(v) <= 1e-300 {
        return Err(TangentError::ZeroDirection);
    }
    let steps = radial_steps();
    let mut at = vec![0.0; base.len()];
    for &eps in eps_grid {
        let mut hit = false;
        for &t in steps.iter().filter(|&&t| t < eps) {
            for (i, (b, d)) in base.iter().zip(v).enumerate() {
                at[i] = b + t * d;
            }
            if oracle.contains(&at) {
                hit = true;
                break;
            }
        }
        if !hit {
            return Ok(false);
        }
    }
    Ok(true)
}

pub const DEFAULT_EPS_GRID: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// Feasible (radial inner) membership: the sampled initial segment
/// `(0, FEASIBLE_SEGMENT]` stays in the set.
pub fn feasible_direction_member(
    oracle: &dyn SetOracle,
    base: &[f64],
    v: &[f64],
) -> Result<bool, TangentError> {
    ensure_base(oracle, base)?;
    if norm(v) <= 1e-300 {
        return Err(TangentError::ZeroDirection);
    }
    let mut at = vec![0.0; base.len()];
    for t in feasible_steps() {
        for (i, (b, d)) in base.iter().zip(v).enumerate() {
            at[i] = b + t * d;
        }
        if !oracle.contains(&at) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Ball radii (relative to `|v|`) tried by the inner-direction test.
const INNER_BALL_RADII: [f64; 3] = [0.1, 0.05, 0.025];

/// Inner (interior displacement) membership: some ball of directions
/// around `v` passes the feasible-segment test in its entirety.
pub fn inner_direction_member(
    oracle: &dyn SetOracle,
    base: &[f64],
    v: &[f64],
) -> Result<bool, TangentError> {
    ensure_base(oracle, base)?;
    let nv = norm(v);
    if nv <= 1e-300 {
        return Err(TangentError::ZeroDirection);
    }
    let ball_dirs = sphere_grid(v.len(), 8);
    'radii: for &rho in &INNER_BALL_RADII {
        // The center direction itself is part of every ball.
        if !feasible_direction_member(oracle, base, v)? {
            return Ok(false);
        }
        for s in &ball_dirs {
            let u: Vec<f64> = v.iter().zip(s).map(|(c, p)| c + rho * nv * p).collect();
            if !feasible_direction_member(oracle, base, &u)? {
                continue 'radii;
            }
        }
        return Ok(true);
    }
    Ok(false)
}

/// Exact tangent (= radial) cone of a polyhedron: homogenized active rows.
pub fn polyhedral_tangent(poly: &Polyhedron, x: &[f64]) -> Result<ConvexCone, ConeError> {
    poly.tangent_cone_at(x)
}

fn ensure_base(oracle: &dyn SetOracle, base: &[f64]) -> Result<(), TangentError> {
    if oracle.contains(base) {
        Ok(())
    } else {
        Err(TangentError::BaseNotInSet {
            label: oracle.label(),
            distance: oracle.distance(base),
        })
    }
}
