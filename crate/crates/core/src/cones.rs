//! Closed convex cones and polyhedral sets.
//!
//! Cones carry one of three representations: the nonnegative orthant, an
//! intersection of homogeneous halfspaces `{v : Av >= 0}`, or a finitely
//! generated cone `{G lambda : lambda >= 0}` (columns of `G` are the
//! generators).  The empty row/column cases encode the full space and the
//! origin respectively, so duality stays total:
//!
//! * `Halfspaces(A)`  ->  `Generators(-A^T)`   (negative polar)
//! * `Generators(G)`  ->  `Halfspaces(-G^T)`
//! * `Orthant`        ->  `Generators(-I)`
//!
//! Distances are exact projections: componentwise clamping for the orthant,
//! a primal active-set least-distance solve for halfspace systems, and
//! nonnegative least squares for generated cones.  Membership of halfspace
//! cones is the direct row test with a relative tolerance; implication
//! between halfspace cones goes through a small linear program, making
//! set-level comparisons independent of redundant rows.

use crate::linalg::{self, dist, dot, norm, Mat};
use crate::lp::{self, Lp, LpError, LpOutcome, Rel};
use thiserror::Error;

/// Row-activity tolerance `1e-8 * (1 + |y|)` used when homogenizing
/// constraints at a point.
pub fn active_tolerance(y: &[f64]) -> f64 {
    1e-8 * (1.0 + norm(y))
}

#[derive(Debug, Error)]
pub enum ConeError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("operation needs a halfspace representation; convert the generated cone first")]
    NotHalfspaceRepresentable,
    #[error("point lies outside the cone (distance {distance:.3e})")]
    PointNotInCone { distance: f64 },
    #[error("polyhedron is empty (infeasible constraint system)")]
    EmptySet,
    #[error("{what} did not converge within the iteration cap")]
    NoConvergence { what: &'static str },
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConeRep {
    Orthant,
    /// `{v : rows * v >= 0}`; zero rows mean the full space.
    Halfspaces(Mat),
    /// Columns generate the cone; zero columns mean `{0}`.
    Generators(Mat),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexCone {
    dim: usize,
    rep: ConeRep,
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub point: Vec<f64>,
    pub distance: f64,
}

impl ConvexCone {
    pub fn orthant(dim: usize) -> Self {
        ConvexCone { dim, rep: ConeRep::Orthant }
    }

    pub fn halfspaces(rows: Mat) -> Self {
        let dim = rows.cols;
        ConvexCone { dim, rep: ConeRep::Halfspaces(rows) }
    }

    pub fn generators(cols: Mat) -> Self {
        let dim = cols.rows;
        ConvexCone { dim, rep: ConeRep::Generators(cols) }
    }

    pub fn full_space(dim: usize) -> Self {
        ConvexCone::halfspaces(Mat::zeros(0, dim))
    }

    pub fn origin_only(dim: usize) -> Self {
        ConvexCone::generators(Mat::zeros(dim, 0))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rep(&self) -> &ConeRep {
        &self.rep
    }

    /// Halfspace rows when the representation admits them (the orthant
    /// materializes as the identity).
    pub fn halfspace_rows(&self) -> Option<Mat> {
        match &self.rep {
            ConeRep::Orthant => Some(Mat::identity(self.dim)),
            ConeRep::Halfspaces(a) => Some(a.clone()),
            ConeRep::Generators(_) => None,
        }
    }

    pub fn is_full_space(&self) -> bool {
        matches!(&self.rep, ConeRep::Halfspaces(a) if a.rows == 0)
    }

    /// Membership within `tol` (a bound on the normalized constraint
    /// violation, or on the Euclidean distance for generated cones).
    pub fn member(&self, v: &[f64], tol: f64) -> Result<bool, ConeError> {
        self.check_dim(v)?;
        match &self.rep {
            ConeRep::Orthant => Ok(v.iter().all(|&c| c >= -tol)),
            ConeRep::Halfspaces(a) => Ok(a.rows_iter().all(|row| {
                let nr = norm(row);
                nr <= 1e-14 || dot(row, v) / nr >= -tol
            })),
            ConeRep::Generators(_) => Ok(self.distance(v)?.distance <= tol),
        }
    }

    /// Euclidean projection onto the cone.
    pub fn distance(&self, v: &[f64]) -> Result<Projection, ConeError> {
        self.check_dim(v)?;
        match &self.rep {
            ConeRep::Orthant => {
                let point: Vec<f64> = v.iter().map(|&c| c.max(0.0)).collect();
                let distance = dist(&point, v);
                Ok(Projection { point, distance })
            }
            ConeRep::Halfspaces(a) => {
                let zero = vec![0.0; self.dim];
                project_onto_rows(a, &vec![0.0; a.rows], v, &zero)
            }
            ConeRep::Generators(g) => {
                if g.cols == 0 {
                    let point = vec![0.0; self.dim];
                    let distance = norm(v);
                    return Ok(Projection { point, distance });
                }
                let (_, point) = nnls(g, v)?;
                let distance = dist(&point, v);
                Ok(Projection { point, distance })
            }
        }
    }

    /// Negative polar cone `{u : <u, c> <= 0 for all c in the cone}`.
    pub fn dual(&self) -> ConvexCone {
        match &self.rep {
            ConeRep::Orthant => {
                let mut g = Mat::identity(self.dim);
                for v in g.data.iter_mut() {
                    *v = -*v;
                }
                ConvexCone::generators(g)
            }
            ConeRep::Halfspaces(a) => {
                let mut t = a.transpose(); // dim x rows, columns are the a_i
                for v in t.data.iter_mut() {
                    *v = -*v;
                }
                ConvexCone::generators(t)
            }
            ConeRep::Generators(g) => {
                let mut t = g.transpose(); // cols x dim, rows are the g_j
                for v in t.data.iter_mut() {
                    *v = -*v;
                }
                ConvexCone { dim: self.dim, rep: ConeRep::Halfspaces(t) }
            }
        }
    }

    /// Contingent cone to this cone at one of its points: the halfspace
    /// rows active at `y`.  Requires a halfspace representation.
    pub fn tangent_cone_at(&self, y: &[f64]) -> Result<ConvexCone, ConeError> {
        self.check_dim(y)?;
        let rows = self.halfspace_rows().ok_or(ConeError::NotHalfspaceRepresentable)?;
        let memb_tol = 1e-7 * (1.0 + norm(y));
        if !self.member(y, memb_tol)? {
            let d = self.distance(y)?;
            return Err(ConeError::PointNotInCone { distance: d.distance });
        }
        let tol = active_tolerance(y);
        let mut active = Mat::zeros(0, self.dim);
        for row in rows.rows_iter() {
            let nr = norm(row);
            if nr <= 1e-14 {
                continue;
            }
            if (dot(row, y) / nr).abs() <= tol {
                active.push_row(row);
            }
        }
        Ok(ConvexCone::halfspaces(active))
    }

    /// Strict membership with a relative margin: every normalized row value
    /// of `v` stays at or above `margin * |v|`.
    pub fn interior_member(&self, v: &[f64], margin: f64) -> Result<bool, ConeError> {
        self.check_dim(v)?;
        let rows = self.halfspace_rows().ok_or(ConeError::NotHalfspaceRepresentable)?;
        let nv = norm(v);
        if rows.rows == 0 {
            return Ok(true);
        }
        if nv <= 1e-14 {
            // The origin is interior only for the full space.
            return Ok(false);
        }
        let ok = rows.rows_iter().all(|row| {
            let nr = norm(row);
            nr <= 1e-14 || dot(row, v) / nr >= margin * nv
        });
        Ok(ok)
    }

    /// Pointedness check (`cone ∩ -cone = {0}`) certified by small linear
    /// programs rather than a rank computation.
    pub fn is_pointed(&self) -> Result<bool, ConeError> {
        match &self.rep {
            ConeRep::Orthant => Ok(true),
            ConeRep::Halfspaces(a) => {
                // Non-pointed iff some nonzero v has Av = 0.
                let d = self.dim;
                let mut rows: Vec<(Vec<f64>, Rel, f64)> = Vec::new();
                for r in a.rows_iter() {
                    rows.push((r.to_vec(), Rel::Ge, 0.0));
                    rows.push((r.iter().map(|v| -v).collect(), Rel::Ge, 0.0));
                }
                for j in 0..d {
                    let mut e = vec![0.0; d];
                    e[j] = 1.0;
                    rows.push((e.clone(), Rel::Le, 1.0));
                    for v in e.iter_mut() {
                        *v = -*v;
                    }
                    rows.push((e, Rel::Le, 1.0));
                }
                for j in 0..d {
                    for sign in [1.0, -1.0] {
                        let mut obj = vec![0.0; d];
                        obj[j] = sign;
                        let lp = Lp { n: d, maximize: true, objective: obj, rows: rows.clone() };
                        if let LpOutcome::Optimal { value, .. } = lp::solve(&lp)? {
                            if value > 1e-7 {
                                return Ok(false);
                            }
                        }
                    }
                }
                Ok(true)
            }
            ConeRep::Generators(g) => {
                // Non-pointed iff some nonnegative combination of the
                // generators cancels while using a nonzero generator.
                for i in 0..g.cols {
                    let col = g.col(i);
                    if norm(&col) <= 1e-12 {
                        continue;
                    }
                    let mut rows: Vec<(Vec<f64>, Rel, f64)> = Vec::new();
                    for r in 0..g.rows {
                        let coeffs: Vec<f64> =
                            (0..g.cols).map(|c| g.data[r * g.cols + c]).collect();
                        rows.push((coeffs, Rel::Eq, 0.0));
                    }
                    for j in 0..g.cols {
                        let mut e = vec![0.0; g.cols];
                        e[j] = 1.0;
                        rows.push((e, Rel::Ge, 0.0));
                    }
                    let mut pin = vec![0.0; g.cols];
                    pin[i] = 1.0;
                    rows.push((pin, Rel::Eq, 1.0));
                    if lp::feasible_point(g.cols, &rows)?.is_some() {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }

    fn check_dim(&self, v: &[f64]) -> Result<(), ConeError> {
        if v.len() != self.dim {
            Err(ConeError::DimMismatch { expected: self.dim, got: v.len() })
        } else {
            Ok(())
        }
    }
}

/// Intersection of halfspace-representable cones: stacked rows, with zero
/// rows pruned and duplicates (after normalization) removed.
pub fn cone_intersection(cones: &[&ConvexCone]) -> Result<ConvexCone, ConeError> {
    assert!(!cones.is_empty());
    let dim = cones[0].dim();
    let mut rows = Mat::zeros(0, dim);
    for c in cones {
        if c.dim() != dim {
            return Err(ConeError::DimMismatch { expected: dim, got: c.dim() });
        }
        let m = c.halfspace_rows().ok_or(ConeError::NotHalfspaceRepresentable)?;
        for r in m.rows_iter() {
            rows.push_row(r);
        }
    }
    Ok(ConvexCone::halfspaces(dedupe_normalized_rows(&rows)))
}

/// Normalize rows to unit length, dropping zero rows and duplicates.
pub fn dedupe_normalized_rows(rows: &Mat) -> Mat {
    let mut out = Mat::zeros(0, rows.cols);
    for r in rows.rows_iter() {
        let nr = norm(r);
        if nr <= 1e-14 {
            continue;
        }
        let unit: Vec<f64> = r.iter().map(|v| v / nr).collect();
        let dup = out.rows_iter().any(|seen| dist(seen, &unit) <= 1e-12);
        if !dup {
            out.push_row(&unit);
        }
    }
    out
}

/// Does every `v` with `rows * v >= 0` also satisfy `<target, v> >= 0`?
/// Decided exactly (for polyhedral data) by minimizing `<target, v>` over
/// the cone boxed to `|v|_inf <= 1`.
pub fn rows_imply(rows: &Mat, target: &[f64], tol: f64) -> Result<bool, ConeError> {
    let d = rows.cols;
    assert_eq!(target.len(), d);
    let mut constraints: Vec<(Vec<f64>, Rel, f64)> = Vec::with_capacity(rows.rows + 2 * d);
    for r in rows.rows_iter() {
        constraints.push((r.to_vec(), Rel::Ge, 0.0));
    }
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        constraints.push((e.clone(), Rel::Le, 1.0));
        for v in e.iter_mut() {
            *v = -*v;
        }
        constraints.push((e, Rel::Le, 1.0));
    }
    let lp = Lp { n: d, maximize: false, objective: target.to_vec(), rows: constraints };
    match lp::solve(&lp)? {
        LpOutcome::Optimal { value, .. } => Ok(value >= -tol),
        LpOutcome::Unbounded => Ok(false),
        LpOutcome::Infeasible => unreachable!("boxed cone always contains 0"),
    }
}

/// Set equality of two halfspace-representable cones, robust to redundant
/// rows: mutual implication of every row.
pub fn cones_equal(a: &ConvexCone, b: &ConvexCone) -> Result<bool, ConeError> {
    let ra = a.halfspace_rows().ok_or(ConeError::NotHalfspaceRepresentable)?;
    let rb = b.halfspace_rows().ok_or(ConeError::NotHalfspaceRepresentable)?;
    let ra = dedupe_normalized_rows(&ra);
    let rb = dedupe_normalized_rows(&rb);
    for r in rb.rows_iter() {
        if !rows_imply(&ra, r, 1e-7)? {
            return Ok(false);
        }
    }
    for r in ra.rows_iter() {
        if !rows_imply(&rb, r, 1e-7)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `{Av >= 0} ⊆ {Bv >= 0}`?
pub fn cone_contains(outer_of: &ConvexCone, inner_of: &ConvexCone) -> Result<bool, ConeError> {
    // inner_of ⊆ outer_of: every row of outer_of is implied by inner_of's rows.
    let ra = inner_of.halfspace_rows().ok_or(ConeError::NotHalfspaceRepresentable)?;
    let rb = outer_of.halfspace_rows().ok_or(ConeError::NotHalfspaceRepresentable)?;
    for r in rb.rows_iter() {
        if norm(r) <= 1e-14 {
            continue;
        }
        if !rows_imply(&ra, r, 1e-7)? {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Polyhedra
// ---------------------------------------------------------------------------

/// `{x : Ax >= b}` with a cached feasible point (nonemptiness is certified
/// at construction).
#[derive(Debug, Clone)]
pub struct Polyhedron {
    pub a: Mat,
    pub b: Vec<f64>,
    feasible: Vec<f64>,
}

impl Polyhedron {
    pub fn new(a: Mat, b: Vec<f64>) -> Result<Self, ConeError> {
        assert_eq!(a.rows, b.len(), "constraint matrix and rhs disagree");
        let n = a.cols;
        let rows: Vec<(Vec<f64>, Rel, f64)> = a
            .rows_iter()
            .zip(&b)
            .map(|(r, &rhs)| (r.to_vec(), Rel::Ge, rhs))
            .collect();
        let feasible = lp::feasible_point(n, &rows)?.ok_or(ConeError::EmptySet)?;
        Ok(Polyhedron { a, b, feasible })
    }

    /// All of `R^n`.
    pub fn full_space(n: usize) -> Self {
        Polyhedron { a: Mat::zeros(0, n), b: Vec::new(), feasible: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.a.cols
    }

    pub fn feasible_point(&self) -> &[f64] {
        &self.feasible
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.a.rows_iter().zip(&self.b).all(|(r, &rhs)| {
            let nr = norm(r).max(1e-14);
            (dot(r, x) - rhs) / nr >= -tol
        })
    }

    pub fn projection(&self, v: &[f64]) -> Result<Projection, ConeError> {
        if self.contains(v, 1e-12) {
            return Ok(Projection { point: v.to_vec(), distance: 0.0 });
        }
        project_onto_rows(&self.a, &self.b, v, &self.feasible)
    }

    /// Indices of rows active at `x` (relative tolerance on normalized
    /// residuals).
    pub fn active_rows(&self, x: &[f64]) -> Vec<usize> {
        let tol = active_tolerance(x);
        (0..self.a.rows)
            .filter(|&i| {
                let r = self.a.row(i);
                let nr = norm(r).max(1e-14);
                ((dot(r, x) - self.b[i]) / nr).abs() <= tol
            })
            .collect()
    }

    /// Tangent (= radial, by polyhedrality) cone at a feasible point:
    /// the active rows, homogenized.
    pub fn tangent_cone_at(&self, x: &[f64]) -> Result<ConvexCone, ConeError> {
        if !self.contains(x, 1e-7) {
            let p = self.projection(x)?;
            return Err(ConeError::PointNotInCone { distance: p.distance });
        }
        let mut rows = Mat::zeros(0, self.dim());
        for i in self.active_rows(x) {
            rows.push_row(self.a.row(i));
        }
        Ok(ConvexCone::halfspaces(dedupe_normalized_rows(&rows)))
    }

    /// Normal cone at a feasible point: generated by the negated active rows.
    pub fn normal_cone_at(&self, x: &[f64]) -> Result<ConvexCone, ConeError> {
        if !self.contains(x, 1e-7) {
            let p = self.projection(x)?;
            return Err(ConeError::PointNotInCone { distance: p.distance });
        }
        let active = self.active_rows(x);
        let mut cols = Mat::zeros(self.dim(), active.len());
        for (j, &i) in active.iter().enumerate() {
            for d in 0..self.dim() {
                cols.data[d * active.len() + j] = -self.a.data[i * self.a.cols + d];
            }
        }
        Ok(ConvexCone::generators(cols))
    }

    /// Vertices of the truncation `self ∩ [-radius, radius]^n`, found by
    /// enumerating basis subsets.  Returns `None` when the combination
    /// count exceeds `cap`.
    pub fn vertices_in_box(&self, radius: f64, cap: usize) -> Option<Vec<Vec<f64>>> {
        let n = self.dim();
        if n == 0 {
            return Some(Vec::new());
        }
        let mut rows: Vec<(Vec<f64>, f64)> = self
            .a
            .rows_iter()
            .zip(&self.b)
            .map(|(r, &rhs)| (r.to_vec(), rhs))
            .collect();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            rows.push((e.clone(), -radius)); // x_j >= -radius
            for v in e.iter_mut() {
                *v = -*v;
            }
            rows.push((e, -radius)); // -x_j >= -radius
        }
        let k = rows.len();
        if binomial(k, n) > cap {
            return None;
        }
        let mut verts: Vec<Vec<f64>> = Vec::new();
        let mut combo: Vec<usize> = (0..n).collect();
        loop {
            let m = Mat::from_rows(combo.iter().map(|&i| rows[i].0.clone()).collect(), n);
            let rhs: Vec<f64> = combo.iter().map(|&i| rows[i].1).collect();
            if let Some(x) = linalg::solve_square(&m, &rhs) {
                let feas = rows.iter().all(|(r, rhs)| {
                    let nr = norm(r).max(1e-14);
                    (dot(r, &x) - rhs) / nr >= -1e-7
                });
                if feas && !verts.iter().any(|v| dist(v, &x) <= 1e-8) {
                    verts.push(x);
                }
            }
            // next combination
            let mut i = n;
            loop {
                if i == 0 {
                    return Some(verts);
                }
                i -= 1;
                if combo[i] + (n - i) < k {
                    combo[i] += 1;
                    for j in (i + 1)..n {
                        combo[j] = combo[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut acc: usize = 1;
    for i in 0..k.min(n - k) {
        acc = acc.saturating_mul(n - i) / (i + 1);
        if acc > 1_000_000 {
            return usize::MAX;
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Least-distance solvers
// ---------------------------------------------------------------------------

/// Project `v` onto `{x : Ax >= b}` by a primal active-set method starting
/// from the feasible point `x0`.  The working-set equality subproblems are
/// solved through the Gram system, tolerating dependent rows.
fn project_onto_rows(a: &Mat, b: &[f64], v: &[f64], x0: &[f64]) -> Result<Projection, ConeError> {
    let d = a.cols;
    let cap = 100 * d.max(1);
    let scale = 1.0 + norm(v) + b.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let tol = 1e-9 * scale;

    if a.rows == 0 {
        return Ok(Projection { point: v.to_vec(), distance: 0.0 });
    }

    let mut x = x0.to_vec();
    let mut working: Vec<usize> = Vec::new();
    for _ in 0..cap {
        // Equality-constrained least distance on the working set:
        // x* = v + A_W^T mu with (A_W A_W^T) mu = b_W - A_W v.
        let k = working.len();
        let mut xstar = v.to_vec();
        let mut mu = Vec::new();
        if k > 0 {
            let mut gram = Mat::zeros(k, k);
            let mut rhs = vec![0.0; k];
            for (i, &wi) in working.iter().enumerate() {
                for (j, &wj) in working.iter().enumerate() {
                    gram.data[i * k + j] = dot(a.row(wi), a.row(wj));
                }
                rhs[i] = b[wi] - dot(a.row(wi), v);
            }
            mu = linalg::solve_psd_consistent(&gram, &rhs);
            for (i, &wi) in working.iter().enumerate() {
                for (c, av) in xstar.iter_mut().zip(a.row(wi)) {
                    *c += mu[i] * av;
                }
            }
        }

        // Feasible?
        let mut worst = 0.0_f64;
        for (i, bi) in b.iter().enumerate() {
            let viol = bi - dot(a.row(i), &xstar);
            worst = worst.max(viol);
        }
        if worst <= tol {
            // KKT: nonnegative multipliers.
            match mu
                .iter()
                .enumerate()
                .filter(|(_, &m)| m < -tol)
                .min_by(|(i, a), (j, b)| a.partial_cmp(b).unwrap().then(i.cmp(j)))
            {
                None => {
                    let distance = dist(&xstar, v);
                    return Ok(Projection { point: xstar, distance });
                }
                Some((drop_idx, _)) => {
                    working.remove(drop_idx);
                    continue;
                }
            }
        }

        // Step from x toward x* until a constraint blocks.
        let dir: Vec<f64> = xstar.iter().zip(&x).map(|(s, c)| s - c).collect();
        let mut alpha = 1.0_f64;
        let mut blocking = None;
        for (i, bi) in b.iter().enumerate() {
            if working.contains(&i) {
                continue;
            }
            let along = dot(a.row(i), &dir);
            if along < -1e-12 {
                let slackness = dot(a.row(i), &x) - bi;
                let limit = (slackness / -along).max(0.0);
                if limit < alpha - 1e-15 {
                    alpha = limit;
                    blocking = Some(i);
                } else if blocking.is_none() && limit <= alpha + 1e-15 && limit < 1.0 {
                    blocking = Some(i);
                }
            }
        }
        for (c, step) in x.iter_mut().zip(&dir) {
            *c += alpha * step;
        }
        match blocking {
            Some(i) => working.push(i),
            None => {
                // Full step reached x*, yet x* was infeasible: numerically
                // stuck; accept the current feasible iterate.
                let distance = dist(&x, v);
                return Ok(Projection { point: x, distance });
            }
        }
    }
    Err(ConeError::NoConvergence { what: "active-set projection" })
}

/// Lawson–Hanson nonnegative least squares: minimize `|G lambda - v|` over
/// `lambda >= 0`.  Returns the coefficients and the fitted point.
fn nnls(g: &Mat, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>), ConeError> {
    let k = g.cols;
    let cap = 100 * k.max(g.rows).max(1);
    let gt = g.transpose();
    let mut lambda = vec![0.0; k];
    let mut passive = vec![false; k];
    let scale = 1.0 + norm(v);

    let fitted = |lam: &[f64]| -> Vec<f64> { g.matvec(lam) };

    let mut outer = 0;
    loop {
        outer += 1;
        if outer > cap {
            return Err(ConeError::NoConvergence { what: "nonnegative least squares" });
        }
        let res: Vec<f64> = v.iter().zip(fitted(&lambda)).map(|(a, b)| a - b).collect();
        let grad = gt.matvec(&res);
        let mut enter = None;
        let mut best = 1e-10 * scale;
        for (i, &w) in grad.iter().enumerate() {
            if !passive[i] && w > best {
                best = w;
                enter = Some(i);
            }
        }
        let Some(enter) = enter else {
            let point = fitted(&lambda);
            return Ok((lambda, point));
        };
        passive[enter] = true;

        loop {
            // Unconstrained least squares on the passive set.
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let m = idx.len();
            let mut gram = Mat::zeros(m, m);
            let mut rhs = vec![0.0; m];
            for (r, &ir) in idx.iter().enumerate() {
                for (c, &ic) in idx.iter().enumerate() {
                    gram.data[r * m + c] = dot(&g.col(ir), &g.col(ic));
                }
                rhs[r] = dot(&g.col(ir), v);
            }
            let s = linalg::solve_psd_consistent(&gram, &rhs);
            if s.iter().all(|&si| si >= -1e-12) {
                for (pos, &i) in idx.iter().enumerate() {
                    lambda[i] = s[pos].max(0.0);
                }
                break;
            }
            // Interpolate back to the boundary and drop a variable.
            let mut alpha = 1.0_f64;
            for (pos, &i) in idx.iter().enumerate() {
                if s[pos] < 0.0 {
                    let denom = lambda[i] - s[pos];
                    if denom > 1e-300 {
                        alpha = alpha.min(lambda[i] / denom);
                    }
                }
            }
            for (pos, &i) in idx.iter().enumerate() {
                lambda[i] += alpha * (s[pos] - lambda[i]);
                if lambda[i] <= 1e-12 {
                    lambda[i] = 0.0;
                    passive[i] = false;
                }
            }
            outer += 1;
            if outer > cap {
                return Err(ConeError::NoConvergence { what: "nonnegative least squares" });
            }
        }
    }
}
