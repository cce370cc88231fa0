//! Numerical analysis of strong vector equilibrium problems.
//!
//! A problem instance consists of a closed convex pointed ordering cone `C`,
//! a polyhedral feasible set `K = {x : Ax >= b}`, and a bifunction
//! `f(x, z)` given by expressions.  A point `x` is an equilibrium when
//! `f(x, z)` lands in `C` for every `z` in `K`; the solution set is probed
//! through a scalar residual (a sampled supremum of distances to `C`).
//!
//! On top of that the crate builds:
//!
//! * inner and outer conical approximations of the contingent cone to the
//!   solution set at a reference point, from a family of positively
//!   homogeneous directional derivatives of `f(., z)`;
//! * sampled tangent-cone estimators (contingent, radial, feasible, inner
//!   notions) driven by set oracles;
//! * hypothesis probes (uniform/strict differentiability of the family,
//!   equicontinuity, local error bounds) that decide whether the inclusion
//!   checks are asserted or merely reported;
//! * first-order necessary and sufficient optimality checks for minimizing
//!   a scalar objective over the solution set.
//!
//! Everything is deterministic: sampling uses low-discrepancy sequences and
//! a seeded RNG, and reports serialize to byte-stable JSON.

pub mod approx;
pub mod cones;
pub mod deriv;
pub mod exec;
pub mod expr;
pub mod linalg;
pub mod lp;
pub mod optimality;
pub mod problem;
pub mod registry;
pub mod report;
pub mod sampling;
pub mod tangent;

pub use cones::{ConvexCone, Polyhedron};
pub use expr::ExprVector;
pub use problem::{EquiOracle, SamplingConfig, VepInstance};
