//! Generalized derivatives.
//!
//! * [`PHMap`]: a continuous positively homogeneous map `u -> H(u)`, the
//!   value of a bifunction's directional derivative at one parameter `z`.
//! * [`DerivativeFamily`]: the whole collection `z -> H_z` at a base point,
//!   built analytically (matrix or direction expressions), by construction
//!   rules (separable / factorable / composition with a smooth outer map),
//!   or from one-sided finite differences.
//! * Uniformity and strictness diagnostics: sampled versions of the
//!   "sup over z of the linearization quotient shrinks with the radius"
//!   statements, reported as (epsilon, delta) tables with witnesses.
//! * Dini and Dini–Hadamard directional derivatives of scalar functions on
//!   a shared geometric step grid, plus upper/regular subdifferential
//!   membership tests driven by them (with exact paths for tagged
//!   structure).

use crate::exec;
use crate::expr::{EvalCtx, ExprError, ExprVector};
use crate::linalg::{dot, norm, sub, Mat};
use crate::sampling::{ball_around, sphere_grid, TGrid};
use thiserror::Error;

pub const DEFAULT_FD_STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Relative dispersion above which a finite-difference derivative is
/// flagged as unreliable.
pub const FD_DISPERSION_LIMIT: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum DerivError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("direction must be nonzero")]
    ZeroDirection,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("map is not positively homogeneous (relative defect {defect:.3e})")]
    NotHomogeneous { defect: f64 },
    #[error("scalar function must have exactly one component, got {got}")]
    NotScalar { got: usize },
}

// ---------------------------------------------------------------------------
// Positively homogeneous maps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum PHKind {
    /// `u -> M u`.
    Linear(Mat),
    /// Expressions in `u` (with the parameter value pinned): `u -> e(u; z)`.
    Expression { exprs: ExprVector, z: Vec<f64> },
    /// One-sided finite differences of a bifunction at a base point.
    FiniteDiff { f: ExprVector, base: Vec<f64>, z: Vec<f64> },
    /// `u -> factor * inner(u)`.
    Scaled { factor: f64, inner: Box<PHMap> },
    /// `u -> L * inner(u)`.
    Composed { left: Mat, inner: Box<PHMap> },
}

/// A continuous positively homogeneous map between fixed dimensions.
#[derive(Debug, Clone)]
pub struct PHMap {
    pub input_dim: usize,
    pub output_dim: usize,
    pub kind: PHKind,
}

impl PHMap {
    pub fn linear(m: Mat) -> Self {
        PHMap { input_dim: m.cols, output_dim: m.rows, kind: PHKind::Linear(m) }
    }

    pub fn expression(exprs: ExprVector, input_dim: usize, z: Vec<f64>) -> Self {
        let output_dim = exprs.len();
        PHMap { input_dim, output_dim, kind: PHKind::Expression { exprs, z } }
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>, DerivError> {
        if u.len() != self.input_dim {
            return Err(DerivError::DimMismatch { expected: self.input_dim, got: u.len() });
        }
        match &self.kind {
            PHKind::Linear(m) => Ok(m.matvec(u)),
            PHKind::Expression { exprs, z } => {
                let ctx = EvalCtx { x: &[], z, u };
                Ok(exprs.eval(&ctx)?)
            }
            PHKind::FiniteDiff { f, base, z } => {
                if norm(u) <= 1e-300 {
                    return Ok(vec![0.0; self.output_dim]);
                }
                let est = fd_bderivative(f, base, z, u, &DEFAULT_FD_STEPS)?;
                Ok(est.value)
            }
            PHKind::Scaled { factor, inner } => {
                let mut v = inner.apply(u)?;
                for c in v.iter_mut() {
                    *c *= factor;
                }
                Ok(v)
            }
            PHKind::Composed { left, inner } => {
                let v = inner.apply(u)?;
                Ok(left.matvec(&v))
            }
        }
    }

    /// Flatten to a single matrix when the structure is linear all the way
    /// down.  `None` for expression- or difference-backed maps.
    pub fn as_linear(&self) -> Option<Mat> {
        match &self.kind {
            PHKind::Linear(m) => Some(m.clone()),
            PHKind::Expression { .. } | PHKind::FiniteDiff { .. } => None,
            PHKind::Scaled { factor, inner } => {
                let mut m = inner.as_linear()?;
                for v in m.data.iter_mut() {
                    *v *= factor;
                }
                Some(m)
            }
            PHKind::Composed { left, inner } => {
                let m = inner.as_linear()?;
                Some(left.matmul(&m))
            }
        }
    }

    /// Worst relative deviation from positive homogeneity over the given
    /// directions and scalings `t in {0.5, 2, 10}`; also checks `H(0) = 0`.
    pub fn homogeneity_defect(&self, dirs: &[Vec<f64>]) -> Result<f64, DerivError> {
        let mut worst = 0.0_f64;
        let at_zero = self.apply(&vec![0.0; self.input_dim])?;
        worst = worst.max(norm(&at_zero));
        for u in dirs {
            let hu = self.apply(u)?;
            for t in [0.5, 2.0, 10.0] {
                let tu: Vec<f64> = u.iter().map(|v| v * t).collect();
                let htu = self.apply(&tu)?;
                let expect: Vec<f64> = hu.iter().map(|v| v * t).collect();
                let dev = dist_slice(&htu, &expect) / (1.0 + norm(&expect));
                worst = worst.max(dev);
            }
        }
        Ok(worst)
    }
}

fn dist_slice(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b))
}

// ---------------------------------------------------------------------------
// Derivative families
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone)]
enum FamilyKind {
    /// Parameter-independent map (separable bifunctions).
    Constant(PHMap),
    /// `output_dim * input_dim` expressions in `z`, row-major: each `z`
    /// yields a matrix.
    MatrixEntries(ExprVector),
    /// `output_dim` expressions in `(u, z)` jointly.
    Directional(ExprVector),
    /// Finite differences of the bifunction itself.
    FiniteDiff { f: ExprVector },
    /// `alpha(z) * inner(u)` (factorable bifunctions).
    Scaled { alpha: ExprVector, inner: PHMap },
    /// `grad outer(inner_value(base, z)) o inner family` (composition with
    /// a smooth outer map).
    Composed { outer: ExprVector, inner_value: ExprVector, inner: Box<DerivativeFamily> },
}

/// The family `{ z -> H_z }` of directional-derivative maps of a
/// bifunction at a fixed base point.
#[derive(Debug, Clone)]
pub struct DerivativeFamily {
    base: Vec<f64>,
    input_dim: usize,
    output_dim: usize,
    provenance: Provenance,
    kind: FamilyKind,
}

impl DerivativeFamily {
    /// Separable rule: the family is a single parameter-independent map.
    pub fn constant(base: Vec<f64>, map: PHMap) -> Self {
        let (n, m) = (map.input_dim, map.output_dim);
        DerivativeFamily {
            base,
            input_dim: n,
            output_dim: m,
            provenance: Provenance::Analytic,
            kind: FamilyKind::Constant(map),
        }
    }

    pub fn constant_linear(base: Vec<f64>, m: Mat) -> Self {
        Self::constant(base, PHMap::linear(m))
    }

    /// Matrix family given entrywise as expressions in `z` (row-major,
    /// `output_dim * input_dim` components).
    pub fn matrix_entries(
        base: Vec<f64>,
        entries: ExprVector,
        output_dim: usize,
        input_dim: usize,
    ) -> Result<Self, DerivError> {
        if entries.len() != output_dim * input_dim {
            return Err(DerivError::DimMismatch {
                expected: output_dim * input_dim,
                got: entries.len(),
            });
        }
        Ok(DerivativeFamily {
            base,
            input_dim,
            output_dim,
            provenance: Provenance::Analytic,
            kind: FamilyKind::MatrixEntries(entries),
        })
    }

    /// Family given directly as expressions in `(u, z)`.
    pub fn directional(base: Vec<f64>, exprs: ExprVector, input_dim: usize) -> Self {
        let output_dim = exprs.len();
        DerivativeFamily {
            base,
            input_dim,
            output_dim,
            provenance: Provenance::Analytic,
            kind: FamilyKind::Directional(exprs),
        }
    }

    /// Finite-difference family of the bifunction `f(x, z)` at `base`.
    pub fn finite_difference(base: Vec<f64>, f: ExprVector) -> Self {
        let input_dim = base.len();
        let output_dim = f.len();
        DerivativeFamily {
            base,
            input_dim,
            output_dim,
            provenance: Provenance::FiniteDifference,
            kind: FamilyKind::FiniteDiff { f },
        }
    }

    /// Factorable rule `f(x,z) = alpha(z) g(x)`: the family scales one map
    /// by the scalar expression `alpha`.
    pub fn factorable(
        base: Vec<f64>,
        alpha: ExprVector,
        inner: PHMap,
    ) -> Result<Self, DerivError> {
        if alpha.len() != 1 {
            return Err(DerivError::NotScalar { got: alpha.len() });
        }
        let (n, m) = (inner.input_dim, inner.output_dim);
        Ok(DerivativeFamily {
            base,
            input_dim: n,
            output_dim: m,
            provenance: Provenance::Analytic,
            kind: FamilyKind::Scaled { alpha, inner },
        })
    }

    /// Composition rule `(g o f)`: outer map `g` (expressions in `x`,
    /// differentiated numerically at `f(base, z)`) composed with the inner
    /// family.  `inner_value` must evaluate the inner bifunction.
    pub fn composition(
        outer: ExprVector,
        inner_value: ExprVector,
        inner: DerivativeFamily,
    ) -> Self {
        let base = inner.base.clone();
        let input_dim = inner.input_dim;
        let output_dim = outer.len();
        DerivativeFamily {
            base,
            input_dim,
            output_dim,
            provenance: inner.provenance,
            kind: FamilyKind::Composed { outer, inner_value, inner: Box::new(inner) },
        }
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Row-major entry expressions (`output_dim * input_dim` strings)
    /// when the family is a parameter-expression matrix or a constant
    /// linear map; `None` for shapes with no such representation.  The
    /// strings re-parse to equivalent expressions, so families built
    /// from them behave identically.
    pub fn matrix_entry_sources(&self) -> Option<Vec<String>> {
        match &self.kind {
            FamilyKind::MatrixEntries(entries) => {
                Some(entries.components.iter().map(|c| c.to_string()).collect())
            }
            FamilyKind::Constant(PHMap { kind: PHKind::Linear(m), .. }) => {
                Some(m.data.iter().map(|v| format!("{v}")).collect())
            }
            _ => None,
        }
    }

    /// Materialize the map at one parameter value.
    pub fn map_at(&self, z: &[f64]) -> Result<PHMap, DerivError> {
        match &self.kind {
            FamilyKind::Constant(map) => Ok(map.clone()),
            FamilyKind::MatrixEntries(entries) => {
                let ctx = EvalCtx { x: &self.base, z, u: &[] };
                let flat = entries.eval(&ctx)?;
                let mut m = Mat::zeros(self.output_dim, self.input_dim);
                m.data.copy_from_slice(&flat);
                Ok(PHMap::linear(m))
            }
            FamilyKind::Directional(exprs) => {
                Ok(PHMap::expression(exprs.clone(), self.input_dim, z.to_vec()))
            }
            FamilyKind::FiniteDiff { f } => Ok(PHMap {
                input_dim: self.input_dim,
                output_dim: self.output_dim,
                kind: PHKind::FiniteDiff { f: f.clone(), base: self.base.clone(), z: z.to_vec() },
            }),
            FamilyKind::Scaled { alpha, inner } => {
                let ctx = EvalCtx { x: &self.base, z, u: &[] };
                let factor = alpha.eval_component(0, &ctx)?;
                Ok(PHMap {
                    input_dim: self.input_dim,
                    output_dim: self.output_dim,
                    kind: PHKind::Scaled { factor, inner: Box::new(inner.clone()) },
                })
            }
            FamilyKind::Composed { outer, inner_value, inner } => {
                let ctx = EvalCtx { x: &self.base, z, u: &[] };
                let y = inner_value.eval(&ctx)?;
                let jac = fd_jacobian(outer, &y)?;
                let inner_map = inner.map_at(z)?;
                Ok(PHMap {
                    input_dim: self.input_dim,
                    output_dim: self.output_dim,
                    kind: PHKind::Composed { left: jac, inner: Box::new(inner_map) },
                })
            }
        }
    }

    /// Bound on `|alpha(z)|` over the sample for factorable families;
    /// `None` for other kinds.  Callers may warn when the bound is huge.
    pub fn alpha_bound(&self, z_sample: &[Vec<f64>]) -> Result<Option<f64>, DerivError> {
        match &self.kind {
            FamilyKind::Scaled { alpha, .. } => {
                let mut worst = 0.0_f64;
                for z in z_sample {
                    let ctx = EvalCtx { x: &self.base, z, u: &[] };
                    worst = worst.max(alpha.eval_component(0, &ctx)?.abs());
                }
                Ok(Some(worst))
            }
            _ => Ok(None),
        }
    }
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FdEstimate {
    pub value: Vec<f64>,
    /// Relative disagreement between successive extrapolations.
    pub dispersion: f64,
    /// Set when the dispersion exceeds [`FD_DISPERSION_LIMIT`]: the
    /// function may not be directionally differentiable here.
    pub flagged: bool,
}

/// One-sided difference quotients `(f(base + t u, z) - f(base, z)) / t`
/// over the given steps, Richardson-extrapolated assuming an `O(t)` error
/// term.
pub fn fd_bderivative(
    f: &ExprVector,
    base: &[f64],
    z: &[f64],
    u: &[f64],
    steps: &[f64],
) -> Result<FdEstimate, DerivError> {
    if norm(u) <= 1e-300 {
        return Err(DerivError::ZeroDirection);
    }
    assert!(steps.len() >= 2, "need at least two steps to extrapolate");
    let f0 = f.eval(&EvalCtx { x: base, z, u: &[] })?;
    let mut quotients: Vec<Vec<f64>> = Vec::with_capacity(steps.len());
    for &t in steps {
        let xt: Vec<f64> = base.iter().zip(u).map(|(b, d)| b + t * d).collect();
        let ft = f.eval(&EvalCtx { x: &xt, z, u: &[] })?;
        quotients.push(ft.iter().zip(&f0).map(|(a, b)| (a - b) / t).collect());
    }
    // Richardson with the known step ratio r: q(t) = L + C t + o(t) gives
    // L ~ (r q(t/r) - q(t)) / (r - 1) for each consecutive pair.
    let mut extrapolated: Vec<Vec<f64>> = Vec::with_capacity(steps.len() - 1);
    for i in 0..steps.len() - 1 {
        let r = steps[i] / steps[i + 1];
        let l: Vec<f64> = quotients[i + 1]
            .iter()
            .zip(&quotients[i])
            .map(|(fine, coarse)| (r * fine - coarse) / (r - 1.0))
            .collect();
        extrapolated.push(l);
    }
    let value = extrapolated.last().unwrap().clone();
    let mut dispersion = 0.0_f64;
    for l in &extrapolated {
        dispersion = dispersion.max(dist_slice(l, &value) / (1.0 + norm(&value)));
    }
    let flagged = dispersion > FD_DISPERSION_LIMIT;
    Ok(FdEstimate { value, dispersion, flagged })
}

/// Central-difference Jacobian of `g` (expressions in `x`) at `at`.
pub fn fd_jacobian(g: &ExprVector, at: &[f64]) -> Result<Mat, DerivError> {
    let m = g.len();
    let p = at.len();
    let mut jac = Mat::zeros(m, p);
    for j in 0..p {
        let h = 1e-6 * (1.0 + at[j].abs());
        let mut plus = at.to_vec();
        plus[j] += h;
        let mut minus = at.to_vec();
        minus[j] -= h;
        let fp = g.eval(&EvalCtx { x: &plus, z: &[], u: &[] })?;
        let fm = g.eval(&EvalCtx { x: &minus, z: &[], u: &[] })?;
        for i in 0..m {
            jac.data[i * p + j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

// ---------------------------------------------------------------------------
// Uniformity / strictness diagnostics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct QuotientWitness {
    pub z: Vec<f64>,
    pub x1: Vec<f64>,
    /// Present for strictness checks (pairwise quotients).
    pub x2: Option<Vec<f64>>,
    pub quotient: f64,
}

#[derive(Debug, Clone)]
pub struct EpsDelta {
    pub eps: f64,
    /// Largest sampled radius below which the quotient stays under `eps`
    /// at every finer level; `None` when even the finest level exceeds it.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DiffReport {
    pub eps_delta: Vec<EpsDelta>,
    /// `(radius, sampled sup of the quotient at that radius)`.
    pub sup_by_delta: Vec<(f64, f64)>,
    pub worst: Option<QuotientWitness>,
    /// Every epsilon admitted a positive delta.
    pub consistent: bool,
}

/// Sampled check of "the sup over `z` of the linearization quotient at
/// radius `delta` shrinks below every epsilon": for each radius in the
/// shared geometric grid, takes the sup of
/// `|f(x,z) - f(base,z) - H_z(x - base)| / |x - base|`
/// over the z-sample and a sphere of `x` values, then extracts the
/// (epsilon, delta) table.
pub fn uniformity_check(
    f: &ExprVector,
    family: &DerivativeFamily,
    z_sample: &[Vec<f64>],
    eps_grid: &[f64],
) -> Result<DiffReport, DerivError> {
    // Per radius: the sup quotient and its witness point.
    type LevelSups = Vec<(f64, Vec<f64>)>;
    let n = family.input_dim;
    let base = family.base.clone();
    let dirs = sphere_grid(n, 16);
    let deltas = TGrid::default().values();
    let per_z: Vec<Result<LevelSups, DerivError>> = exec::map_slice(z_sample, |z| {
        let map = family.map_at(z)?;
        let f_base = f.eval(&EvalCtx { x: &base, z, u: &[] })?;
        let mut sups = Vec::with_capacity(deltas.len());
        for &delta in &deltas {
            let mut sup = 0.0_f64;
            let mut at = vec![0.0; n];
            for d in &dirs {
                for (i, (b, dir)) in base.iter().zip(d).enumerate() {
                    at[i] = b + delta * dir;
                }
                let fx = f.eval(&EvalCtx { x: &at, z, u: &[] })?;
                let step: Vec<f64> = d.iter().map(|c| c * delta).collect();
                let lin = map.apply(&step)?;
                let mut err = 0.0;
                for i in 0..fx.len() {
                    let r = fx[i] - f_base[i] - lin[i];
                    err += r * r;
                }
                let q = err.sqrt() / delta;
                if q > sup {
                    sup = q;
                    // direction retained through the witness step below
                }
            }
            sups.push((sup, Vec::new()));
        }
        Ok(sups)
    });

    let mut sup_by_delta: Vec<(f64, f64)> = deltas.iter().map(|&d| (d, 0.0)).collect();
    let mut worst: Option<QuotientWitness> = None;
    for (zi, res) in per_z.into_iter().enumerate() {
        let sups = res?;
        for (j, (s, _)) in sups.iter().enumerate() {
            if *s > sup_by_delta[j].1 {
                sup_by_delta[j].1 = *s;
                if j == deltas.len() - 1 {
                    worst = Some(QuotientWitness {
                        z: z_sample[zi].clone(),
                        x1: base.clone(),
                        x2: None,
                        quotient: *s,
                    });
                }
            }
        }
    }
    Ok(finish_report(sup_by_delta, eps_grid, worst))
}

/// Pairwise (strict) version of [`uniformity_check`]: quotients over pairs
/// `x1 != x2` drawn from spheres of radius `delta` and `delta/2`.
pub fn strictness_check(
    f: &ExprVector,
    family: &DerivativeFamily,
    z_sample: &[Vec<f64>],
    eps_grid: &[f64],
) -> Result<DiffReport, DerivError> {
    let n = family.input_dim;
    let base = family.base.clone();
    let dirs = sphere_grid(n, 8);
    let deltas = TGrid::default().values();
    let per_z: Vec<Result<Vec<f64>, DerivError>> = exec::map_slice(z_sample, |z| {
        let map = family.map_at(z)?;
        let mut sups = Vec::with_capacity(deltas.len());
        for &delta in &deltas {
            let mut points: Vec<Vec<f64>> = Vec::with_capacity(2 * dirs.len());
            for d in &dirs {
                for scale in [1.0, 0.5] {
                    points.push(
                        base.iter().zip(d).map(|(b, dir)| b + scale * delta * dir).collect(),
                    );
                }
            }
            let values: Vec<Vec<f64>> = points
                .iter()
                .map(|p| f.eval(&EvalCtx { x: p, z, u: &[] }))
                .collect::<Result<_, _>>()?;
            let mut sup = 0.0_f64;
            for i in 0..points.len() {
                for j in (i + 1)..points.len() {
                    let step = sub(&points[i], &points[j]);
                    let gap = norm(&step);
                    if gap <= 1e-12 {
                        continue;
                    }
                    let lin = map.apply(&step)?;
                    let mut err = 0.0;
                    for c in 0..values[i].len() {
                        let r = values[i][c] - values[j][c] - lin[c];
                        err += r * r;
                    }
                    sup = sup.max(err.sqrt() / gap);
                }
            }
            sups.push(sup);
        }
        Ok(sups)
    });

    let mut sup_by_delta: Vec<(f64, f64)> = deltas.iter().map(|&d| (d, 0.0)).collect();
    let mut worst_z = None;
    for (zi, res) in per_z.into_iter().enumerate() {
        let sups = res?;
        for (j, s) in sups.iter().enumerate() {
            if *s > sup_by_delta[j].1 {
                sup_by_delta[j].1 = *s;
                if j == deltas.len() - 1 {
                    worst_z = Some((zi, *s));
                }
            }
        }
    }
    let worst = worst_z.map(|(zi, q)| QuotientWitness {
        z: z_sample[zi].clone(),
        x1: base.clone(),
        x2: Some(base.clone()),
        quotient: q,
    });
    Ok(finish_report(sup_by_delta, eps_grid, worst))
}

fn finish_report(
    sup_by_delta: Vec<(f64, f64)>,
    eps_grid: &[f64],
    worst: Option<QuotientWitness>,
) -> DiffReport {
    // Radii are listed largest first; delta(eps) is the largest radius
    // from which every finer level stays under eps.
    let levels = sup_by_delta.len();
    let mut suffix_max = vec![0.0_f64; levels];
    let mut running = 0.0_f64;
    for j in (0..levels).rev() {
        running = running.max(sup_by_delta[j].1);
        suffix_max[j] = running;
    }
    let mut eps_delta = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let delta = (0..levels)
            .find(|&j| suffix_max[j] < eps)
            .map(|j| sup_by_delta[j].0);
        eps_delta.push(EpsDelta { eps, delta });
    }
    let consistent = eps_delta.iter().all(|e| e.delta.is_some());
    DiffReport { eps_delta, sup_by_delta, worst, consistent }
}

// ---------------------------------------------------------------------------
// Scalar functions, Dini derivatives, subdifferentials
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    Smooth,
    Convex,
    Concave,
    Generic,
}

/// A scalar objective with an optional structure tag that unlocks exact
/// subdifferential tests.
#[derive(Debug, Clone)]
pub struct ScalarFn {
    pub expr: ExprVector,
    pub structure: Structure,
}

impl ScalarFn {
    pub fn new(expr: ExprVector, structure: Structure) -> Result<Self, DerivError> {
        if expr.len() != 1 {
            return Err(DerivError::NotScalar { got: expr.len() });
        }
        Ok(ScalarFn { expr, structure })
    }

    pub fn parse(src: &str, structure: Structure) -> Result<Self, DerivError> {
        Self::new(ExprVector::parse(src)?, structure)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, DerivError> {
        Ok(self.expr.eval_component(0, &EvalCtx { x, z: &[], u: &[] })?)
    }

    /// Central-difference gradient.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, DerivError> {
        let jac = fd_jacobian(&self.expr, x)?;
        Ok(jac.row(0).to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiniMode {
    DiniUpper,
    DiniLower,
    DhUpper,
    DhLower,
}

#[derive(Debug, Clone)]
pub struct DiniEstimate {
    pub value: f64,
    /// Aggregated quotient at each step level (coarsest first).
    pub per_level: Vec<f64>,
    /// Spread of the tail levels actually used for the estimate.
    pub spread: f64,
    pub unstable: bool,
}

/// Directional derivative estimates of Dini type on the shared step grid.
///
/// Dini modes look along the ray `base + t w`; the Dini–Hadamard modes
/// additionally perturb the direction within a ball of radius `10 t`
/// (which always contains `w` itself, so the four estimates are chained:
/// lower DH <= lower Dini <= upper Dini <= upper DH by construction).
pub fn dini_derivative(
    fun: &ScalarFn,
    base: &[f64],
    w: &[f64],
    mode: DiniMode,
) -> Result<DiniEstimate, DerivError> {
    if norm(w) <= 1e-300 {
        return Err(DerivError::ZeroDirection);
    }
    let f0 = fun.eval(base)?;
    let grid = TGrid::default().values();
    let upper = matches!(mode, DiniMode::DiniUpper | DiniMode::DhUpper);
    let hadamard = matches!(mode, DiniMode::DhUpper | DiniMode::DhLower);
    let mut per_level = Vec::with_capacity(grid.len());
    for &t in &grid {
        let dirs: Vec<Vec<f64>> = if hadamard {
            ball_around(w, 10.0 * t, 16)
        } else {
            vec![w.to_vec()]
        };
        let mut agg: Option<f64> = None;
        for u in &dirs {
            let xt: Vec<f64> = base.iter().zip(u).map(|(b, d)| b + t * d).collect();
            let q = (fun.eval(&xt)? - f0) / t;
            agg = Some(match agg {
                None => q,
                Some(a) => {
                    if upper {
                        a.max(q)
                    } else {
                        a.min(q)
                    }
                }
            });
        }
        per_level.push(agg.unwrap());
    }
    let tail = &per_level[per_level.len() - TGrid::TAIL..];
    let value = if upper {
        tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    } else {
        tail.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let spread = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let unstable = spread > 1e-2 * (1.0 + value.abs());
    Ok(DiniEstimate { value, per_level, spread, unstable })
}

/// All four Dini-type estimates on the shared grid, in chain order
/// `[lower DH, lower Dini, upper Dini, upper DH]`.
pub fn dini_all(fun: &ScalarFn, base: &[f64], w: &[f64]) -> Result<[f64; 4], DerivError> {
    Ok([
        dini_derivative(fun, base, w, DiniMode::DhLower)?.value,
        dini_derivative(fun, base, w, DiniMode::DiniLower)?.value,
        dini_derivative(fun, base, w, DiniMode::DiniUpper)?.value,
        dini_derivative(fun, base, w, DiniMode::DhUpper)?.value,
    ])
}

const SUBDIFF_SLACK: f64 = 1e-6;

/// Is `v` in the upper subdifferential at `base`?  `<v, w>` must dominate
/// the upper Dini–Hadamard derivative in every sampled direction; smooth
/// and concave tags switch to exact tests.
pub fn upper_subdiff_member(
    fun: &ScalarFn,
    base: &[f64],
    v: &[f64],
    sphere: &[Vec<f64>],
) -> Result<bool, DerivError> {
    match fun.structure {
        Structure::Smooth => {
            let g = fun.gradient(base)?;
            Ok(dist_slice(v, &g) <= SUBDIFF_SLACK * (1.0 + norm(&g)))
        }
        Structure::Concave => {
            // Superdifferential inequality on sampled rays.
            let f0 = fun.eval(base)?;
            for w in sphere {
                for rho in [1e-3, 1e-2, 1e-1, 1.0] {
                    let y: Vec<f64> = base.iter().zip(w).map(|(b, d)| b + rho * d).collect();
                    let lhs = fun.eval(&y)?;
                    let rhs = f0 + rho * dot(v, w);
                    if lhs > rhs + 1e-9 * (1.0 + lhs.abs()) {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
        _ => {
            for w in sphere {
                let dh = dini_derivative(fun, base, w, DiniMode::DhUpper)?.value;
                if dot(v, w) < dh - SUBDIFF_SLACK {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// Is `v` in the regular (Fréchet) subdifferential at `base`?  Mirror of
/// [`upper_subdiff_member`]: `<v, w>` must stay below the lower
/// Dini–Hadamard derivative; smooth and convex tags switch to exact tests.
pub fn regular_subdiff_member(
    fun: &ScalarFn,
    base: &[f64],
    v: &[f64],
    sphere: &[Vec<f64>],
) -> Result<bool, DerivError> {
    match fun.structure {
        Structure::Smooth => {
            let g = fun.gradient(base)?;
            Ok(dist_slice(v, &g) <= SUBDIFF_SLACK * (1.0 + norm(&g)))
        }
        Structure::Convex => {
            // Subgradient inequality on sampled rays.
            let f0 = fun.eval(base)?;
            for w in sphere {
                for rho in [1e-3, 1e-2, 1e-1, 1.0] {
                    let y: Vec<f64> = base.iter().zip(w).map(|(b, d)| b + rho * d).collect();
                    let lhs = fun.eval(&y)?;
                    let rhs = f0 + rho * dot(v, w);
                    if lhs < rhs - 1e-9 * (1.0 + lhs.abs()) {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
        _ => {
            for w in sphere {
                let dh = dini_derivative(fun, base, w, DiniMode::DhLower)?.value;
                if dot(v, w) > dh + SUBDIFF_SLACK {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// Candidate subgradients harvested from finite-difference gradients near
/// `base`: the gradient at `base`, gradients at small offsets along the
/// sampled directions, their centroid, and the origin.  Callers filter
/// through the membership tests.
pub fn subdiff_candidates(
    fun: &ScalarFn,
    base: &[f64],
    sphere: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, DerivError> {
    let t = 1e-4 * (1.0 + norm(base));
    let mut raw: Vec<Vec<f64>> = Vec::new();
    if let Ok(g) = fun.gradient(base) {
        if g.iter().all(|c| c.is_finite()) {
            raw.push(g);
        }
    }
    for w in sphere {
        let at: Vec<f64> = base.iter().zip(w).map(|(b, d)| b + t * d).collect();
        if let Ok(g) = fun.gradient(&at) {
            if g.iter().all(|c| c.is_finite()) {
                raw.push(g);
            }
        }
    }
    let mut unique: Vec<Vec<f64>> = Vec::new();
    for g in raw {
        if !unique.iter().any(|u| dist_slice(u, &g) <= 1e-6) {
            unique.push(g);
        }
    }
    if !unique.is_empty() {
        let n = base.len();
        let mut centroid = vec![0.0; n];
        for g in &unique {
            for (c, gi) in centroid.iter_mut().zip(g) {
                *c += gi;
            }
        }
        for c in centroid.iter_mut() {
            *c /= unique.len() as f64;
        }
        if !unique.iter().any(|u| dist_slice(u, &centroid) <= 1e-6) {
            unique.push(centroid);
        }
    }
    let zero = vec![0.0; base.len()];
    if !unique.iter().any(|u| dist_slice(u, &zero) <= 1e-6) {
        unique.push(zero);
    }
    Ok(unique)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ExprVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ev(src: &str) -> ExprVector {
        ExprVector::parse(src).unwrap()
    }

    /// The rational-coefficient quadratic bifunction used across the test
    /// suite: both components are squared affine forms whose slopes vary
    /// with `1 / (|z|^2 + 1)`.
    fn wedge_bifunction() -> ExprVector {
        ev("0.5*(-(1 - 1/(z1^2 + z2^2 + 1))*x1 + x2 + 1)^2; \
            0.5*((1 + 1/(z1^2 + z2^2 + 1))*x1 - x2 + 1)^2")
    }

    fn wedge_matrix_family() -> DerivativeFamily {
        DerivativeFamily::matrix_entries(
            vec![0.0, 0.0],
            ev("-(1 - 1/(z1^2 + z2^2 + 1)); 1; 1 + 1/(z1^2 + z2^2 + 1); -1"),
            2,
            2,
        )
        .unwrap()
    }

    #[test]
    fn fd_linear_family_matches_matrix_action() {
        let f = ev("1.5*x1 - 0.25*x2; 0.75*x1 + 2*x2");
        let m = Mat::from_rows(vec![vec![1.5, -0.25], vec![0.75, 2.0]], 2);
        for u in sphere_grid(2, 12) {
            let est = fd_bderivative(&f, &[0.3, -0.4], &[], &u, &DEFAULT_FD_STEPS).unwrap();
            let expect = m.matvec(&u);
            assert!(dist_slice(&est.value, &expect) <= 1e-6, "u = {u:?}");
            assert!(!est.flagged);
        }
    }

    #[test]
    fn fd_quadratic_composition_at_origin() {
        // At the origin with z = 0 the slopes are m- = 0, m+ = 2, so the
        // derivative in direction (1, 0) is (0, 2).
        let f = wedge_bifunction();
        let est =
            fd_bderivative(&f, &[0.0, 0.0], &[0.0, 0.0], &[1.0, 0.0], &DEFAULT_FD_STEPS).unwrap();
        assert!(dist_slice(&est.value, &[0.0, 2.0]) <= 1e-6, "got {:?}", est.value);
        assert!(!est.flagged, "dispersion {}", est.dispersion);
    }

    #[test]
    fn fd_scalar_quadratic_derivative_vanishes() {
        // f(x, z) = z x^2 / 2 has zero derivative in x at the origin for
        // every parameter value.
        let f = ev("z1*x1^2/2");
        for z in [-1.0, 0.5, 2.0] {
            for u in [1.0, -1.0] {
                let est = fd_bderivative(&f, &[0.0], &[z], &[u], &DEFAULT_FD_STEPS).unwrap();
                assert!(est.value[0].abs() <= 1e-8, "z={z} u={u} got {:?}", est.value);
            }
        }
    }

    #[test]
    fn fd_separable_matches_analytic_gradient() {
        let f = ev("x1^2 + z1; x1*x2 + z2");
        let base = [0.3, 0.7];
        // Jacobian of (x1^2, x1 x2) at base.
        let jac = Mat::from_rows(vec![vec![0.6, 0.0], vec![0.7, 0.3]], 2);
        for u in sphere_grid(2, 8) {
            let est = fd_bderivative(&f, &base, &[5.0, -3.0], &u, &DEFAULT_FD_STEPS).unwrap();
            assert!(dist_slice(&est.value, &jac.matvec(&u)) <= 1e-6);
        }
    }

    #[test]
    fn family_maps_are_positively_homogeneous() {
        let dirs = sphere_grid(2, 8);
        let fam = wedge_matrix_family();
        for z in [[0.0, 0.0], [3.0, 4.0], [10.0, 0.0]] {
            let map = fam.map_at(&z).unwrap();
            assert!(map.homogeneity_defect(&dirs).unwrap() <= 1e-9);
        }
        let dir_fam = DerivativeFamily::directional(
            vec![0.0, 0.0],
            ev("z1*abs(u1); max(u1, u2)"),
            2,
        );
        let map = dir_fam.map_at(&[2.0, 1.0]).unwrap();
        assert!(map.homogeneity_defect(&dirs).unwrap() <= 1e-9);
    }

    #[test]
    fn uniformity_consistent_for_matrix_family() {
        let f = wedge_bifunction();
        let fam = wedge_matrix_family();
        let zs: Vec<Vec<f64>> = vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![3.0, 4.0],
            vec![10.0, 0.0],
            vec![0.0, 10.0],
        ];
        let report = uniformity_check(&f, &fam, &zs, &[1e-1, 1e-2, 1e-3]).unwrap();
        assert!(report.consistent, "table: {:?}", report.eps_delta);
        // Suprema shrink with the radius (quadratic remainder).
        let first = report.sup_by_delta.first().unwrap().1;
        let last = report.sup_by_delta.last().unwrap().1;
        assert!(last < first * 0.1, "sups {first} -> {last}");
    }

    #[test]
    fn uniformity_rejects_wrong_derivative() {
        // Claiming the identity as derivative of f(x,z) = z x^2 / 2 at 0
        // leaves a quotient near 1 at every radius.
        let f = ev("z1*x1^2/2");
        let fam = DerivativeFamily::constant_linear(vec![0.0], Mat::identity(1));
        let zs: Vec<Vec<f64>> = vec![vec![-1.0], vec![0.5], vec![2.0]];
        let report = uniformity_check(&f, &fam, &zs, &[1e-1, 1e-2, 1e-3]).unwrap();
        assert!(!report.consistent);
        let last = report.sup_by_delta.last().unwrap().1;
        assert!((last - 1.0).abs() < 0.05, "expected quotient near 1, got {last}");
    }

    #[test]
    fn strictness_consistent_for_zero_family() {
        let f = ev("z1*x1^2/2");
        let fam = DerivativeFamily::constant_linear(vec![0.0], Mat::zeros(1, 1));
        let zs: Vec<Vec<f64>> = vec![vec![-1.0], vec![0.5], vec![2.0]];
        let report = strictness_check(&f, &fam, &zs, &[1e-1, 1e-2, 1e-3]).unwrap();
        assert!(report.consistent, "table: {:?}", report.eps_delta);
    }

    #[test]
    fn strictness_fails_on_kink() {
        // f(x) = |x| with claimed derivative u -> u: pairs straddling the
        // origin keep the pairwise quotient at 1.
        let f = ev("abs(x1)");
        let fam = DerivativeFamily::constant_linear(vec![0.0], Mat::identity(1));
        let report = strictness_check(&f, &fam, &[vec![0.0]], &[1e-1, 1e-2, 1e-3]).unwrap();
        assert!(!report.consistent);
        let last = report.sup_by_delta.last().unwrap().1;
        assert!(last > 0.9, "expected a stuck pairwise quotient, got {last}");
    }

    #[test]
    fn strictness_zero_quotient_for_linear() {
        let f = ev("2*x1 - x2 + z1; x1 + x2");
        let fam = DerivativeFamily::constant_linear(
            vec![0.0, 0.0],
            Mat::from_rows(vec![vec![2.0, -1.0], vec![1.0, 1.0]], 2),
        );
        let report = strictness_check(&f, &fam, &[vec![1.0, 2.0]], &[1e-1, 1e-2]).unwrap();
        assert!(report.consistent);
        for (_, s) in &report.sup_by_delta {
            assert!(*s <= 1e-9);
        }
    }

    #[test]
    fn separable_family_is_parameter_independent() {
        let fam = DerivativeFamily::constant_linear(
            vec![0.0, 0.0],
            Mat::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]], 2),
        );
        let a = fam.map_at(&[0.0, 0.0]).unwrap().as_linear().unwrap();
        let b = fam.map_at(&[9.0, -9.0]).unwrap().as_linear().unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn factorable_rule_with_vanishing_inner_derivative() {
        // f(x, z) = g(x) / (z^2 + 1) with g(x) = x^2: since Dg(0) = 0 the
        // whole family is zero.
        let alpha = ev("1/(z1^2 + 1)");
        let inner = PHMap::linear(Mat::zeros(1, 1));
        let fam = DerivativeFamily::factorable(vec![0.0], alpha, inner).unwrap();
        for z in [[0.0], [1.0], [-3.0]] {
            let map = fam.map_at(&z).unwrap();
            assert_eq!(map.apply(&[1.0]).unwrap(), vec![0.0]);
        }
        let bound = fam.alpha_bound(&[vec![0.0], vec![2.0]]).unwrap().unwrap();
        assert!((bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn composition_rule_reproduces_matrix_family() {
        // outer(y) = (y1^2/2, y2^2/2), inner value at the origin is (1, 1),
        // so the outer Jacobian is the identity there and the composed
        // family equals the inner matrix family.
        let outer = ev("0.5*x1^2; 0.5*x2^2");
        let inner_value = ev(
            "-(1 - 1/(z1^2 + z2^2 + 1))*x1 + x2 + 1; (1 + 1/(z1^2 + z2^2 + 1))*x1 - x2 + 1",
        );
        let composed =
            DerivativeFamily::composition(outer, inner_value, wedge_matrix_family());
        for z in [[0.0, 0.0], [3.0, 4.0]] {
            let got = composed.map_at(&z).unwrap().as_linear().unwrap();
            let expect = wedge_matrix_family().map_at(&z).unwrap().as_linear().unwrap();
            for (g, e) in got.data.iter().zip(&expect.data) {
                assert!((g - e).abs() <= 1e-6, "z = {z:?}: {g} vs {e}");
            }
        }
    }

    #[test]
    fn dini_lower_of_l1_norm() {
        let fun = ScalarFn::parse("abs(x1) + abs(x2)", Structure::Convex).unwrap();
        let est = dini_derivative(&fun, &[0.0, 0.0], &[1.0, 1.0], DiniMode::DiniLower).unwrap();
        assert!((est.value - 2.0).abs() <= 1e-9, "got {}", est.value);
        assert!(!est.unstable);
    }

    #[test]
    fn dini_upper_of_negated_abs() {
        let fun = ScalarFn::parse("-abs(x1)", Structure::Concave).unwrap();
        let est = dini_derivative(&fun, &[0.0], &[1.0], DiniMode::DiniUpper).unwrap();
        assert!((est.value + 1.0).abs() <= 1e-9, "got {}", est.value);
    }

    #[test]
    fn dini_modes_agree_for_smooth_functions() {
        let fun = ScalarFn::parse("x1^2 + 0.5*x2", Structure::Smooth).unwrap();
        let base = [1.0, 2.0];
        let w = [0.6, 0.8];
        let expect = 2.0 * 1.0 * 0.6 + 0.5 * 0.8; // <grad, w>
        let [dhl, dl, du, dhu] = dini_all(&fun, &base, &w).unwrap();
        assert!((dl - expect).abs() <= 1e-3, "lower {dl}");
        assert!((du - expect).abs() <= 1e-3, "upper {du}");
        assert!((dhl - expect).abs() <= 5e-2, "dh lower {dhl}");
        assert!((dhu - expect).abs() <= 5e-2, "dh upper {dhu}");
    }

    #[test]
    fn dini_chain_property() {
        let pool = [
            "abs(x1) + abs(x2)",
            "-abs(x1) - abs(x2)",
            "min(x1, x2)",
            "max(x1, -x2)",
            "x1^2 - x2",
            "abs(x1) - abs(x2)",
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..1000 {
            let fun = ScalarFn::parse(pool[trial % pool.len()], Structure::Generic).unwrap();
            let base = if trial % 2 == 0 { vec![0.0, 0.0] } else { vec![0.3, -0.2] };
            let w = loop {
                let cand = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                if norm(&cand) > 0.1 {
                    break cand;
                }
            };
            let [dhl, dl, du, dhu] = dini_all(&fun, &base, &w).unwrap();
            assert!(
                dhl <= dl + 1e-12 && dl <= du + 1e-12 && du <= dhu + 1e-12,
                "chain broken for {} at {base:?} along {w:?}: {dhl} {dl} {du} {dhu}",
                pool[trial % pool.len()]
            );
        }
    }

    #[test]
    fn smooth_subdifferentials_are_the_gradient() {
        let fun = ScalarFn::parse("2*x1 - x2", Structure::Smooth).unwrap();
        let sphere = sphere_grid(2, 16);
        let grad = [2.0, -1.0];
        assert!(upper_subdiff_member(&fun, &[0.0, 0.0], &grad, &sphere).unwrap());
        assert!(regular_subdiff_member(&fun, &[0.0, 0.0], &grad, &sphere).unwrap());
        let off = [2.1, -1.0];
        assert!(!upper_subdiff_member(&fun, &[0.0, 0.0], &off, &sphere).unwrap());
        assert!(!regular_subdiff_member(&fun, &[0.0, 0.0], &off, &sphere).unwrap());
    }

    #[test]
    fn l1_regular_subdifferential_is_the_unit_box() {
        let fun = ScalarFn::parse("abs(x1) + abs(x2)", Structure::Convex).unwrap();
        let sphere = sphere_grid(2, 16);
        assert!(regular_subdiff_member(&fun, &[0.0, 0.0], &[1.0, 1.0], &sphere).unwrap());
        assert!(regular_subdiff_member(&fun, &[0.0, 0.0], &[0.0, 0.0], &sphere).unwrap());
        assert!(!regular_subdiff_member(&fun, &[0.0, 0.0], &[1.5, 0.0], &sphere).unwrap());
    }

    #[test]
    fn l1_upper_subdifferential_is_empty() {
        // Convex and nondifferentiable at the origin: no upper subgradient.
        let fun = ScalarFn::parse("abs(x1) + abs(x2)", Structure::Convex).unwrap();
        let sphere = sphere_grid(2, 16);
        for v in [[0.0, 0.0], [1.0, 1.0], [-1.0, 0.5]] {
            assert!(!upper_subdiff_member(&fun, &[0.0, 0.0], &v, &sphere).unwrap(), "v = {v:?}");
        }
    }

    #[test]
    fn negated_l1_upper_subdifferential_contains_zero() {
        let fun = ScalarFn::parse("-abs(x1) - abs(x2)", Structure::Concave).unwrap();
        let sphere = sphere_grid(2, 16);
        assert!(upper_subdiff_member(&fun, &[0.0, 0.0], &[0.0, 0.0], &sphere).unwrap());
        // And its regular subdifferential is empty (mirror case).
        assert!(!regular_subdiff_member(&fun, &[0.0, 0.0], &[0.0, 0.0], &sphere).unwrap());
        assert!(!regular_subdiff_member(&fun, &[0.0, 0.0], &[1.0, 0.0], &sphere).unwrap());
    }

    #[test]
    fn candidates_for_l1_cover_sign_patterns_and_zero() {
        let fun = ScalarFn::parse("abs(x1) + abs(x2)", Structure::Convex).unwrap();
        let sphere = sphere_grid(2, 16);
        let cands = subdiff_candidates(&fun, &[0.0, 0.0], &sphere).unwrap();
        let zero = vec![0.0, 0.0];
        assert!(cands.iter().any(|c| dist_slice(c, &zero) <= 1e-6));
        assert!(cands.iter().any(|c| dist_slice(c, &[1.0, 1.0]) <= 1e-4));
        assert!(cands.iter().any(|c| dist_slice(c, &[-1.0, -1.0]) <= 1e-4));
        // Filtering through the membership test keeps only actual
        // subgradients.
        let kept: Vec<_> = cands
            .iter()
            .filter(|c| regular_subdiff_member(&fun, &[0.0, 0.0], c, &sphere).unwrap())
            .collect();
        assert!(!kept.is_empty());
        for c in kept {
            assert!(c.iter().all(|ci| ci.abs() <= 1.0 + 1e-6), "outside box: {c:?}");
        }
    }

    #[test]
    fn fd_family_map_applies_differences() {
        let f = wedge_bifunction();
        let fam = DerivativeFamily::finite_difference(vec![0.0, 0.0], f);
        assert_eq!(fam.provenance(), Provenance::FiniteDifference);
        let map = fam.map_at(&[0.0, 0.0]).unwrap();
        let v = map.apply(&[1.0, 0.0]).unwrap();
        assert!(dist_slice(&v, &[0.0, 2.0]) <= 1e-6);
        assert!(map.as_linear().is_none());
        assert_eq!(map.apply(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }
}
