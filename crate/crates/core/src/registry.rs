//! Built-in instance library with expected-result metadata.
//!
//! Each entry is a fully configured equilibrium problem (or a scalar
//! minimization over one) together with golden values at the entry's
//! pinned sampling grid: expected cones, strictness flags, residual laws,
//! error-bound behaviour, and optimality verdicts.  The golden values
//! come in two flavours where they differ — the exact value on the
//! default finite grid, and the limiting value as the parameter-ball
//! radius grows — so tests are pinned and deterministic.

use crate::cones::{ConvexCone, Polyhedron};
use crate::deriv::{DerivativeFamily, ScalarFn, Structure};
use crate::expr::ExprVector;
use crate::linalg::Mat;
use crate::optimality::{CondVerdict, LocalMinVerdict, MpvecInstance, SocVerdict};
use crate::problem::{SamplingConfig, VepInstance};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("unknown example {name:?}; available: {available}")]
    UnknownName { name: String, available: String },
}

/// A registry entry: either a plain equilibrium problem or a
/// minimization problem over one.
#[derive(Debug, Clone)]
pub enum Loaded {
    Vep(VepInstance),
    Mpvec(MpvecInstance),
}

impl Loaded {
    pub fn vep(&self) -> &VepInstance {
        match self {
            Loaded::Vep(v) => v,
            Loaded::Mpvec(m) => &m.vep,
        }
    }

    /// The entry's declared solution point.
    pub fn base(&self, golden: &GoldenVep) -> Vec<f64> {
        match self {
            Loaded::Vep(_) => golden.base.clone(),
            Loaded::Mpvec(m) => m.candidate.clone(),
        }
    }
}

/// Expected cone, storable as data.
#[derive(Debug, Clone)]
pub enum GoldenCone {
    Halfspaces(Vec<Vec<f64>>),
    FullSpace,
}

impl GoldenCone {
    pub fn build(&self, dim: usize) -> ConvexCone {
        match self {
            GoldenCone::Halfspaces(rows) => {
                ConvexCone::halfspaces(Mat::from_rows(rows.clone(), dim))
            }
            GoldenCone::FullSpace => ConvexCone::full_space(dim),
        }
    }
}

/// Expected analysis results for an equilibrium entry, pinned to the
/// entry's default sampling grid.
#[derive(Debug, Clone)]
pub struct GoldenVep {
    /// Declared solution point all cones are taken at.
    pub base: Vec<f64>,
    /// Parameter-ball radius the grid-pinned values assume.
    pub z_radius: f64,
    /// Inner approximation cone on the default grid.
    pub inner_grid: Option<GoldenCone>,
    /// Inner cone in the infinite-radius limit (when it differs).
    pub inner_limit: Option<GoldenCone>,
    /// Outer approximation cone.
    pub outer: Option<GoldenCone>,
    /// Inner inclusion strict on the sampled direction grid.
    pub inner_strict: Option<bool>,
    pub outer_strict: Option<bool>,
    /// The inner inclusion's hypotheses are expected to be established.
    pub inner_asserted: bool,
    pub outer_asserted: bool,
    /// Member count of the sampled solution-set contingent cone on a
    /// 360-direction grid.  Directions whose angular distance to the true
    /// cone is below the scoring threshold's resolution (`asin(tau)`)
    /// score as members and are included in this count.
    pub contingent_members_360: Option<usize>,
    /// Residual law `resid(x) = coeff * x^2` for one-dimensional entries.
    pub residual_quadratic_coeff: Option<f64>,
    /// The local error bound is expected to fail...
    pub error_bound_fails: Option<bool>,
    /// ...with modulus approximately `kappa_slope / delta`.
    pub kappa_slope: Option<f64>,
    /// Points that must be solutions / must not be.
    pub equilibria: Vec<Vec<f64>>,
    pub non_equilibria: Vec<Vec<f64>>,
}

/// Expected optimality verdicts for a minimization entry.
#[derive(Debug, Clone)]
pub struct GoldenMp {
    pub noc: CondVerdict,
    pub soc: SocVerdict,
    pub brute: LocalMinVerdict,
    pub brute_radius: f64,
}

pub const VEP_NAMES: [&str; 5] =
    ["ex31", "ex32", "identity-orthant", "separable-box", "halfline"];
pub const MP_NAMES: [&str; 7] = [
    "mp-ex31-sum",
    "mp-ex31-neg-sum",
    "mp-ex31-l1",
    "mp-ex31-neg-x1",
    "mp-ex32-l1",
    "mp-ex32-sq",
    "mp-separable",
];

pub fn example_names() -> Vec<&'static str> {
    VEP_NAMES.iter().chain(MP_NAMES.iter()).copied().collect()
}

pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "ex31" => {
            "planar quadratic family over the nonnegative quadrant; every feasible point \
             solves it and the inner cone at the origin is a thin wedge around the diagonal"
        }
        "ex32" => {
            "scalar sign-flipping family on the line; the origin is the only solution, the \
             residual is quadratically flat and the local error bound fails"
        }
        "identity-orthant" => {
            "identity map over the nonnegative quadrant; inner, contingent and outer cones \
             all coincide with the quadrant"
        }
        "separable-box" => {
            "separable affine family on the unit box; the top corner is the unique solution \
             and the inner cone collapses to the origin"
        }
        "halfline" => {
            "affine family on a half-line feasible set with empty tangent interior; the \
             decomposed dual test must fall back"
        }
        "mp-ex31-sum" => "increasing linear objective on the quadrant entry",
        "mp-ex31-neg-sum" => "decreasing linear objective on the quadrant entry",
        "mp-ex31-l1" => "l1-norm objective on the quadrant entry",
        "mp-ex31-neg-x1" => "first-coordinate descent objective on the quadrant entry",
        "mp-ex32-l1" => "absolute-value objective on the scalar entry",
        "mp-ex32-sq" => "squared objective on the scalar entry",
        "mp-separable" => "increasing linear objective on the unit-box entry",
        _ => return None,
    })
}

fn quadrant_instance() -> VepInstance {
    let f = ExprVector::parse(
        "0.5*(-(1 - 1/(z1^2 + z2^2 + 1))*x1 + x2 + 1)^2; \
         0.5*((1 + 1/(z1^2 + z2^2 + 1))*x1 - x2 + 1)^2",
    )
    .expect("static expression");
    let family = DerivativeFamily::matrix_entries(
        vec![0.0, 0.0],
        ExprVector::parse("-(1 - 1/(z1^2 + z2^2 + 1)); 1; 1 + 1/(z1^2 + z2^2 + 1); -1")
            .expect("static expression"),
        2,
        2,
    )
    .expect("well-formed family");
    VepInstance::new(
        ConvexCone::orthant(2),
        Polyhedron::new(Mat::identity(2), vec![0.0, 0.0]).expect("orthant rows"),
        f,
        Some(family),
        SamplingConfig::default(),
    )
    .expect("static instance")
}

fn scalar_instance() -> VepInstance {
    VepInstance::new(
        ConvexCone::orthant(1),
        Polyhedron::full_space(1),
        ExprVector::parse("x1^2*z1/(z1^2 + 1)").expect("static expression"),
        Some(DerivativeFamily::constant_linear(vec![0.0], Mat::zeros(1, 1))),
        SamplingConfig { include: vec![vec![-1.0]], ..SamplingConfig::default() },
    )
    .expect("static instance")
}

fn identity_instance() -> VepInstance {
    VepInstance::new(
        ConvexCone::orthant(2),
        Polyhedron::new(Mat::identity(2), vec![0.0, 0.0]).expect("orthant rows"),
        ExprVector::parse("x1; x2").expect("static expression"),
        Some(DerivativeFamily::constant_linear(vec![0.0, 0.0], Mat::identity(2))),
        SamplingConfig { restrict_error_bound_to_feasible: false, ..SamplingConfig::default() },
    )
    .expect("static instance")
}

fn separable_instance() -> VepInstance {
    let rows = Mat::from_rows(
        vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
        2,
    );
    VepInstance::new(
        ConvexCone::orthant(2),
        Polyhedron::new(rows, vec![0.0, 0.0, -1.0, -1.0]).expect("box rows"),
        ExprVector::parse("x1 - z1; x2 - z2").expect("static expression"),
        Some(DerivativeFamily::constant_linear(vec![1.0, 1.0], Mat::identity(2))),
        SamplingConfig::default(),
    )
    .expect("static instance")
}

fn halfline_instance() -> VepInstance {
    let rows = Mat::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]], 2);
    VepInstance::new(
        ConvexCone::orthant(2),
        Polyhedron::new(rows, vec![0.0, 0.0, 0.0]).expect("half-line rows"),
        ExprVector::parse("x1; x2").expect("static expression"),
        Some(DerivativeFamily::constant_linear(vec![0.0, 0.0], Mat::identity(2))),
        SamplingConfig::default(),
    )
    .expect("static instance")
}

fn mp(vep: VepInstance, obj: &str, structure: Structure, at: Vec<f64>) -> MpvecInstance {
    MpvecInstance::new(vep, ScalarFn::parse(obj, structure).expect("static objective"), at)
        .expect("static entry")
}

pub fn load_example(name: &str) -> Result<Loaded, RegistryError> {
    let loaded = match name {
        "ex31" => Loaded::Vep(quadrant_instance()),
        "ex32" => Loaded::Vep(scalar_instance()),
        "identity-orthant" => Loaded::Vep(identity_instance()),
        "separable-box" => Loaded::Vep(separable_instance()),
        "halfline" => Loaded::Vep(halfline_instance()),
        "mp-ex31-sum" => {
            Loaded::Mpvec(mp(quadrant_instance(), "x1 + x2", Structure::Smooth, vec![0.0, 0.0]))
        }
        "mp-ex31-neg-sum" => {
            Loaded::Mpvec(mp(quadrant_instance(), "-x1 - x2", Structure::Smooth, vec![0.0, 0.0]))
        }
        "mp-ex31-l1" => Loaded::Mpvec(mp(
            quadrant_instance(),
            "abs(x1) + abs(x2)",
            Structure::Convex,
            vec![0.0, 0.0],
        )),
        "mp-ex31-neg-x1" => {
            Loaded::Mpvec(mp(quadrant_instance(), "-x1", Structure::Smooth, vec![0.0, 0.0]))
        }
        "mp-ex32-l1" => {
            Loaded::Mpvec(mp(scalar_instance(), "abs(x1)", Structure::Convex, vec![0.0]))
        }
        "mp-ex32-sq" => Loaded::Mpvec(mp(scalar_instance(), "x1^2", Structure::Smooth, vec![0.0])),
        "mp-separable" => {
            Loaded::Mpvec(mp(separable_instance(), "x1 + x2", Structure::Smooth, vec![1.0, 1.0]))
        }
        _ => {
            return Err(RegistryError::UnknownName {
                name: name.to_string(),
                available: example_names().join(", "),
            })
        }
    };
    Ok(loaded)
}

/// Golden expectations for the equilibrium entries (including the inner
/// problem of each minimization entry: look up by the part after `mp-`
/// as needed).
pub fn golden_vep(name: &str) -> Option<GoldenVep> {
    let orthant2 = || GoldenCone::Halfspaces(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    Some(match name {
        "ex31" => {
            // On a radius-R grid the wedge slopes are 1 -+ 1/(R^2+1);
            // they close onto the diagonal as R grows.
            let lo = 1.0 - 1.0 / 101.0;
            let hi = 1.0 + 1.0 / 101.0;
            GoldenVep {
                base: vec![0.0, 0.0],
                z_radius: 10.0,
                inner_grid: Some(GoldenCone::Halfspaces(vec![
                    vec![1.0, 0.0],
                    vec![0.0, 1.0],
                    vec![-lo, 1.0],
                    vec![hi, -1.0],
                ])),
                inner_limit: Some(GoldenCone::Halfspaces(vec![
                    vec![1.0, 0.0],
                    vec![0.0, 1.0],
                    vec![-1.0, 1.0],
                    vec![1.0, -1.0],
                ])),
                outer: Some(orthant2()),
                inner_strict: Some(true),
                outer_strict: Some(false),
                inner_asserted: true,
                outer_asserted: true,
                // 91 quadrant directions plus the four (one and two degrees
                // past each edge) inside the scoring resolution band.
                contingent_members_360: Some(95),
                residual_quadratic_coeff: None,
                error_bound_fails: Some(false),
                kappa_slope: None,
                equilibria: vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![3.0, 0.5]],
                non_equilibria: vec![vec![-1.0, 0.0], vec![0.5, -0.25]],
            }
        }
        "ex32" => GoldenVep {
            base: vec![0.0],
            z_radius: 10.0,
            inner_grid: Some(GoldenCone::FullSpace),
            inner_limit: Some(GoldenCone::FullSpace),
            outer: Some(GoldenCone::FullSpace),
            inner_strict: None,
            outer_strict: Some(true),
            inner_asserted: false,
            outer_asserted: true,
            contingent_members_360: Some(0),
            residual_quadratic_coeff: Some(0.5),
            error_bound_fails: Some(true),
            kappa_slope: Some(2.0),
            equilibria: vec![vec![0.0]],
            non_equilibria: vec![vec![0.5], vec![-1.0]],
        },
        "identity-orthant" => GoldenVep {
            base: vec![0.0, 0.0],
            z_radius: 10.0,
            inner_grid: Some(orthant2()),
            inner_limit: Some(orthant2()),
            outer: Some(orthant2()),
            inner_strict: Some(false),
            outer_strict: Some(false),
            inner_asserted: true,
            outer_asserted: true,
            // 91 quadrant directions plus the four inside the scoring
            // resolution band, as for the quadratic quadrant instance.
            contingent_members_360: Some(95),
            residual_quadratic_coeff: None,
            error_bound_fails: Some(false),
            kappa_slope: None,
            equilibria: vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            non_equilibria: vec![vec![-1.0, -1.0]],
        },
        "separable-box" => GoldenVep {
            base: vec![1.0, 1.0],
            z_radius: 10.0,
            inner_grid: Some(GoldenCone::Halfspaces(vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![-1.0, 0.0],
                vec![0.0, -1.0],
            ])),
            inner_limit: None,
            // At the top corner the feasible tangent is the negative
            // quadrant, so the outer cone collapses to the origin too.
            outer: Some(GoldenCone::Halfspaces(vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![-1.0, 0.0],
                vec![0.0, -1.0],
            ])),
            inner_strict: Some(false),
            outer_strict: Some(false),
            inner_asserted: true,
            outer_asserted: true,
            contingent_members_360: Some(0),
            residual_quadratic_coeff: None,
            error_bound_fails: Some(false),
            kappa_slope: None,
            equilibria: vec![vec![1.0, 1.0]],
            non_equilibria: vec![vec![0.0, 0.0], vec![0.5, 1.0]],
        },
        "halfline" => GoldenVep {
            base: vec![0.0, 0.0],
            z_radius: 10.0,
            inner_grid: Some(GoldenCone::Halfspaces(vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
            ])),
            inner_limit: None,
            outer: Some(GoldenCone::Halfspaces(vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
            ])),
            inner_strict: Some(false),
            outer_strict: Some(false),
            inner_asserted: true,
            outer_asserted: true,
            contingent_members_360: Some(1),
            residual_quadratic_coeff: None,
            error_bound_fails: Some(false),
            kappa_slope: None,
            equilibria: vec![vec![0.0, 0.0], vec![5.0, 0.0]],
            non_equilibria: vec![vec![0.0, 1.0], vec![-1.0, 0.0]],
        },
        _ => return None,
    })
}

pub fn golden_mp(name: &str) -> Option<GoldenMp> {
    Some(match name {
        "mp-ex31-sum" => GoldenMp {
            noc: CondVerdict::Holds,
            soc: SocVerdict::Holds,
            brute: LocalMinVerdict::StrictLocalMin,
            brute_radius: 5.0,
        },
        "mp-ex31-neg-sum" => GoldenMp {
            noc: CondVerdict::Violated,
            soc: SocVerdict::Fails,
            brute: LocalMinVerdict::NotLocalMin,
            brute_radius: 5.0,
        },
        "mp-ex31-l1" => GoldenMp {
            noc: CondVerdict::Vacuous,
            soc: SocVerdict::Holds,
            brute: LocalMinVerdict::StrictLocalMin,
            brute_radius: 5.0,
        },
        "mp-ex31-neg-x1" => GoldenMp {
            noc: CondVerdict::Violated,
            soc: SocVerdict::Fails,
            brute: LocalMinVerdict::NotLocalMin,
            brute_radius: 5.0,
        },
        "mp-ex32-l1" => GoldenMp {
            noc: CondVerdict::Vacuous,
            soc: SocVerdict::CannotHold,
            brute: LocalMinVerdict::StrictLocalMin,
            brute_radius: 1.0,
        },
        "mp-ex32-sq" => GoldenMp {
            noc: CondVerdict::Holds,
            soc: SocVerdict::CannotHold,
            brute: LocalMinVerdict::StrictLocalMin,
            brute_radius: 1.0,
        },
        "mp-separable" => GoldenMp {
            noc: CondVerdict::Holds,
            soc: SocVerdict::Holds,
            brute: LocalMinVerdict::StrictLocalMin,
            brute_radius: 5.0,
        },
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::{inner_cone, outer_cone};
    use crate::cones::cones_equal;
    use crate::optimality::{local_min_brute, noc_check, soc_check};
    use crate::problem::EquiOracle;
    use crate::sampling::sphere_grid;

    #[test]
    fn every_name_loads_and_every_loader_is_named() {
        for name in example_names() {
            let loaded = load_example(name).unwrap();
            assert!(describe(name).is_some(), "{name} lacks a description");
            match &loaded {
                Loaded::Vep(_) => assert!(golden_vep(name).is_some(), "{name} lacks goldens"),
                Loaded::Mpvec(_) => assert!(golden_mp(name).is_some(), "{name} lacks goldens"),
            }
        }
        assert!(matches!(
            load_example("nope"),
            Err(RegistryError::UnknownName { .. })
        ));
    }

    #[test]
    fn declared_points_are_solutions_and_counterexamples_are_not() {
        for name in VEP_NAMES {
            let Loaded::Vep(inst) = load_example(name).unwrap() else { unreachable!() };
            let golden = golden_vep(name).unwrap();
            let oracle = EquiOracle::build(&inst, &golden.base).unwrap();
            for p in &golden.equilibria {
                assert!(oracle.is_equilibrium(p).unwrap(), "{name}: {p:?} must solve");
            }
            for p in &golden.non_equilibria {
                assert!(!oracle.is_equilibrium(p).unwrap(), "{name}: {p:?} must not solve");
            }
        }
    }

    #[test]
    fn golden_cones_match_recomputation() {
        let dirs2 = sphere_grid(2, 32);
        let dirs1 = sphere_grid(1, 2);
        for name in VEP_NAMES {
            let Loaded::Vep(inst) = load_example(name).unwrap() else { unreachable!() };
            let golden = golden_vep(name).unwrap();
            let dirs = if inst.n() == 1 { &dirs1 } else { &dirs2 };
            let oracle = EquiOracle::build(&inst, &golden.base).unwrap();
            if let Some(expected) = &golden.inner_grid {
                let got = inner_cone(&inst, &oracle, &golden.base, dirs).unwrap();
                let exact = got.exact.expect("registry entries have exact inner cones");
                assert!(
                    cones_equal(&exact, &expected.build(inst.n())).unwrap(),
                    "{name}: inner cone mismatch"
                );
            }
            if let Some(expected) = &golden.outer {
                let (got, _) = outer_cone(&inst, &golden.base, dirs).unwrap();
                let exact = got.exact.expect("registry entries have exact outer cones");
                assert!(
                    cones_equal(&exact, &expected.build(inst.n())).unwrap(),
                    "{name}: outer cone mismatch"
                );
            }
        }
    }

    #[test]
    fn quadrant_wedge_narrows_toward_the_diagonal_limit() {
        let golden = golden_vep("ex31").unwrap();
        let grid = golden.inner_grid.unwrap();
        let limit = golden.inner_limit.unwrap();
        let (GoldenCone::Halfspaces(g), GoldenCone::Halfspaces(l)) = (&grid, &limit) else {
            panic!("wedge entries are halfspace data");
        };
        // Grid slopes straddle the limit slope 1 at distance 1/(R^2+1).
        assert!((g[2][0] + (1.0 - 1.0 / 101.0)).abs() <= 1e-15);
        assert!((g[3][0] - (1.0 + 1.0 / 101.0)).abs() <= 1e-15);
        assert_eq!(l[2], vec![-1.0, 1.0]);
        assert_eq!(l[3], vec![1.0, -1.0]);
        // The limit cone contains the diagonal and the grid cone
        // contains the limit cone.
        let gc = grid.build(2);
        let lc = limit.build(2);
        let diag = [std::f64::consts::FRAC_1_SQRT_2; 2];
        assert!(lc.member(&diag, 1e-12).unwrap());
        assert!(gc.member(&diag, 1e-12).unwrap());
        assert!(!gc.member(&[1.0, 0.0], 1e-9).unwrap());
    }

    #[test]
    fn scalar_residual_follows_the_quadratic_law() {
        let Loaded::Vep(inst) = load_example("ex32").unwrap() else { unreachable!() };
        let coeff = golden_vep("ex32").unwrap().residual_quadratic_coeff.unwrap();
        for x in [0.1, 0.5, 1.0, 2.0] {
            let r = inst.residual(&[x]).unwrap().value;
            let expected = coeff * x * x;
            assert!(
                (r - expected).abs() <= 1e-9 * (1.0 + expected),
                "residual({x}) = {r}, expected {expected}"
            );
        }
    }

    #[test]
    fn optimality_goldens_match_recomputation() {
        for name in MP_NAMES {
            let Loaded::Mpvec(m) = load_example(name).unwrap() else { unreachable!() };
            let golden = golden_mp(name).unwrap();
            let oracle = m.oracle().unwrap();
            let noc = noc_check(&m, &oracle).unwrap();
            assert_eq!(noc.verdict, golden.noc, "{name}: dual necessary condition");
            let soc = soc_check(&m, &oracle).unwrap();
            assert_eq!(soc.verdict, golden.soc, "{name}: sufficient condition");
            let brute = local_min_brute(&m, &oracle, golden.brute_radius, 1).unwrap();
            assert_eq!(brute.verdict, golden.brute, "{name}: ground truth");
        }
    }
}
