//! Dense two-phase simplex for small linear programs.
//!
//! Variables are free (split internally into nonnegative pairs); constraint
//! rows may be `<=`, `>=`, or `=`.  Pivoting follows Bland's rule throughout,
//! which makes the solver deterministic and immune to cycling at the cost of
//! a few extra pivots — the right trade at the problem sizes used here.
//!
//! Homogeneous `>=` rows with zero right-hand side are flipped to `<=` form
//! during preprocessing so they need no artificial variable; the many
//! cone-membership programs in this crate then solve without a phase 1.

use thiserror::Error;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Lp {
    /// Number of (free) decision variables.
    pub n: usize,
    pub maximize: bool,
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Rel, f64)>,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("simplex iteration limit reached ({0} pivots)")]
    IterationLimit(usize),
    #[error("objective length {got} does not match variable count {expect}")]
    BadObjective { got: usize, expect: usize },
    #[error("constraint row {row} has length {got}, expected {expect}")]
    BadRow { row: usize, got: usize, expect: usize },
}

struct Tableau {
    cols: usize, // total columns excluding rhs
    rhs_col: usize,
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    alive: Vec<bool>,
    art_start: usize, // first artificial column (= cols when none)
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.rows[r][c];
        let inv = 1.0 / piv;
        for v in self.rows[r].iter_mut() {
            *v *= inv;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || !self.alive[i] {
                continue;
            }
            let factor = row[c];
            if factor == 0.0 {
                continue;
            }
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
            row[c] = 0.0; // exact
        }
        self.basis[r] = c;
    }

    /// Reduced costs for cost vector `c` over all columns, given the basis.
    fn reduced_costs(&self, c: &[f64]) -> Vec<f64> {
        let mut r = c.to_vec();
        for (i, row) in self.rows.iter().enumerate() {
            if !self.alive[i] {
                continue;
            }
            let cb = c[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            for j in 0..self.cols {
                r[j] -= cb * row[j];
            }
        }
        r
    }

    /// One simplex phase minimizing cost vector `c`.  Columns at or past
    /// `col_limit` never enter.  Returns `Ok(true)` on optimality, `Ok(false)`
    /// on unboundedness.
    fn run(&mut self, c: &[f64], col_limit: usize, cap: &mut usize) -> Result<bool, LpError> {
        loop {
            let red = self.reduced_costs(c);
            // Bland: smallest-index improving column.
            let mut enter = None;
            for (j, rj) in red.iter().enumerate().take(col_limit) {
                if *rj < -EPS {
                    enter = Some(j);
                    break;
                }
            }
            let Some(enter) = enter else { return Ok(true) };
            // Ratio test; ties broken by smallest basic variable index.
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                if !self.alive[i] {
                    continue;
                }
                let a = self.rows[i][enter];
                if a > EPS {
                    let ratio = self.rows[i][self.rhs_col] / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - EPS
                                || (ratio < lr + EPS && self.basis[i] < self.basis[li])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((leave, _)) = leave else { return Ok(false) };
            self.pivot(leave, enter);
            if *cap == 0 {
                return Err(LpError::IterationLimit(0));
            }
            *cap -= 1;
        }
    }
}

pub fn solve(lp: &Lp) -> Result<LpOutcome, LpError> {
    let n = lp.n;
    if lp.objective.len() != n {
        return Err(LpError::BadObjective { got: lp.objective.len(), expect: n });
    }
    for (i, (coeffs, _, _)) in lp.rows.iter().enumerate() {
        if coeffs.len() != n {
            return Err(LpError::BadRow { row: i, got: coeffs.len(), expect: n });
        }
    }

    // Normalize rows: rhs >= 0, and homogeneous `>=` rows become `<=`.
    let mut rows: Vec<(Vec<f64>, Rel, f64)> = Vec::with_capacity(lp.rows.len());
    for (coeffs, rel, rhs) in &lp.rows {
        let (mut coeffs, mut rel, mut rhs) = (coeffs.clone(), *rel, *rhs);
        if rhs < 0.0 {
            for v in coeffs.iter_mut() {
                *v = -*v;
            }
            rhs = -rhs;
            rel = match rel {
                Rel::Le => Rel::Ge,
                Rel::Ge => Rel::Le,
                Rel::Eq => Rel::Eq,
            };
        }
        if rel == Rel::Ge && rhs <= EPS {
            for v in coeffs.iter_mut() {
                *v = -*v;
            }
            rhs = 0.0;
            rel = Rel::Le;
        }
        rows.push((coeffs, rel, rhs));
    }

    let m = rows.len();
    let n_split = 2 * n;
    let n_slack = rows
        .iter()
        .filter(|(_, rel, _)| matches!(rel, Rel::Le | Rel::Ge))
        .count();
    let n_art = rows
        .iter()
        .filter(|(_, rel, _)| matches!(rel, Rel::Ge | Rel::Eq))
        .count();
    let cols = n_split + n_slack + n_art;
    let rhs_col = cols;

    let mut tab = Tableau {
        cols,
        rhs_col,
        rows: vec![vec![0.0; cols + 1]; m],
        basis: vec![0; m],
        alive: vec![true; m],
        art_start: n_split + n_slack,
    };

    let mut slack_idx = n_split;
    let mut art_idx = tab.art_start;
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        let row = &mut tab.rows[i];
        for j in 0..n {
            row[j] = coeffs[j];
            row[n + j] = -coeffs[j];
        }
        row[rhs_col] = *rhs;
        match rel {
            Rel::Le => {
                row[slack_idx] = 1.0;
                tab.basis[i] = slack_idx;
                slack_idx += 1;
            }
            Rel::Ge => {
                row[slack_idx] = -1.0;
                slack_idx += 1;
                row[art_idx] = 1.0;
                tab.basis[i] = art_idx;
                art_idx += 1;
            }
            Rel::Eq => {
                row[art_idx] = 1.0;
                tab.basis[i] = art_idx;
                art_idx += 1;
            }
        }
    }

    let mut cap = 2000 + 50 * (m + cols);
    let scale = rows.iter().fold(1.0_f64, |s, (_, _, r)| s.max(r.abs()));

    if n_art > 0 {
        let mut c1 = vec![0.0; cols];
        for c in c1.iter_mut().skip(tab.art_start) {
            *c = 1.0;
        }
        let optimal = tab.run(&c1, cols, &mut cap)?;
        debug_assert!(optimal, "phase 1 is always bounded below by zero");
        let phase1: f64 = (0..m)
            .filter(|&i| tab.alive[i] && tab.basis[i] >= tab.art_start)
            .map(|i| tab.rows[i][rhs_col])
            .sum();
        if phase1 > 1e-7 * (1.0 + scale) {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive remaining artificials out of the basis (they sit at zero).
        for i in 0..m {
            if !tab.alive[i] || tab.basis[i] < tab.art_start {
                continue;
            }
            let mut pivot_col = None;
            for j in 0..tab.art_start {
                if tab.rows[i][j].abs() > EPS {
                    pivot_col = Some(j);
                    break;
                }
            }
            match pivot_col {
                Some(j) => tab.pivot(i, j),
                None => tab.alive[i] = false, // redundant row
            }
        }
    }

    // Phase 2: minimize (negated objective when maximizing).
    let mut c2 = vec![0.0; cols];
    for j in 0..n {
        let cj = if lp.maximize { -lp.objective[j] } else { lp.objective[j] };
        c2[j] = cj;
        c2[n + j] = -cj;
    }
    // Artificial columns are barred from entering via `col_limit`.
    let optimal = tab.run(&c2, tab.art_start, &mut cap)?;
    if !optimal {
        return Ok(LpOutcome::Unbounded);
    }

    let mut split = vec![0.0; cols];
    for i in 0..m {
        if tab.alive[i] {
            split[tab.basis[i]] = tab.rows[i][rhs_col];
        }
    }
    let x: Vec<f64> = (0..n).map(|j| split[j] - split[n + j]).collect();
    let value: f64 = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    Ok(LpOutcome::Optimal { x, value })
}

/// Convenience: is the system `{rows}` feasible for some x?
pub fn feasible_point(n: usize, rows: &[(Vec<f64>, Rel, f64)]) -> Result<Option<Vec<f64>>, LpError> {
    let lp = Lp { n, maximize: false, objective: vec![0.0; n], rows: rows.to_vec() };
    Ok(match solve(&lp)? {
        LpOutcome::Optimal { x, .. } => Some(x),
        LpOutcome::Infeasible => None,
        LpOutcome::Unbounded => unreachable!("constant objective cannot be unbounded"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimum(lp: &Lp) -> (Vec<f64>, f64) {
        match solve(lp).unwrap() {
            LpOutcome::Optimal { x, value } => (x, value),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn maximize_in_box() {
        // max x+y s.t. x<=2, y<=3, x+y<=4
        let lp = Lp {
            n: 2,
            maximize: true,
            objective: vec![1.0, 1.0],
            rows: vec![
                (vec![1.0, 0.0], Rel::Le, 2.0),
                (vec![0.0, 1.0], Rel::Le, 3.0),
                (vec![1.0, 1.0], Rel::Le, 4.0),
            ],
        };
        let (_, v) = optimum(&lp);
        assert!((v - 4.0).abs() < 1e-8);
    }

    #[test]
    fn infeasible_detected() {
        let lp = Lp {
            n: 1,
            maximize: false,
            objective: vec![0.0],
            rows: vec![
                (vec![1.0], Rel::Ge, 2.0),
                (vec![1.0], Rel::Le, 1.0),
            ],
        };
        assert!(matches!(solve(&lp).unwrap(), LpOutcome::Infeasible));
    }

    #[test]
    fn unbounded_detected() {
        let lp = Lp {
            n: 1,
            maximize: true,
            objective: vec![1.0],
            rows: vec![(vec![1.0], Rel::Ge, 0.0)],
        };
        assert!(matches!(solve(&lp).unwrap(), LpOutcome::Unbounded));
    }

    #[test]
    fn equality_rows_and_negative_vars() {
        // min x1 + x2 s.t. x1 + x2 = -1, x1 - x2 = 3  => x = (1, -2), value -1.
        let lp = Lp {
            n: 2,
            maximize: false,
            objective: vec![1.0, 1.0],
            rows: vec![
                (vec![1.0, 1.0], Rel::Eq, -1.0),
                (vec![1.0, -1.0], Rel::Eq, 3.0),
            ],
        };
        let (x, v) = optimum(&lp);
        assert!((x[0] - 1.0).abs() < 1e-8);
        assert!((x[1] + 2.0).abs() < 1e-8);
        assert!((v + 1.0).abs() < 1e-8);
    }

    #[test]
    fn homogeneous_ge_rows_need_no_phase_one() {
        // max s s.t. v1 - s >= 0, v2 - s >= 0, v1 <= 1, v2 <= 1  (vars v1,v2,s)
        let lp = Lp {
            n: 3,
            maximize: true,
            objective: vec![0.0, 0.0, 1.0],
            rows: vec![
                (vec![1.0, 0.0, -1.0], Rel::Ge, 0.0),
                (vec![0.0, 1.0, -1.0], Rel::Ge, 0.0),
                (vec![1.0, 0.0, 0.0], Rel::Le, 1.0),
                (vec![0.0, 1.0, 0.0], Rel::Le, 1.0),
            ],
        };
        let (x, v) = optimum(&lp);
        assert!((v - 1.0).abs() < 1e-8);
        assert!((x[2] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn degenerate_cycling_guard() {
        // Classic Beale-style degeneracy; Bland's rule must terminate.
        let lp = Lp {
            n: 4,
            maximize: false,
            objective: vec![-0.75, 150.0, -0.02, 6.0],
            rows: vec![
                (vec![0.25, -60.0, -0.04, 9.0], Rel::Le, 0.0),
                (vec![0.5, -90.0, -0.02, 3.0], Rel::Le, 0.0),
                (vec![0.0, 0.0, 1.0, 0.0], Rel::Le, 1.0),
                (vec![1.0, 0.0, 0.0, 0.0], Rel::Ge, 0.0),
                (vec![0.0, 1.0, 0.0, 0.0], Rel::Ge, 0.0),
                (vec![0.0, 0.0, 1.0, 0.0], Rel::Ge, 0.0),
                (vec![0.0, 0.0, 0.0, 1.0], Rel::Ge, 0.0),
            ],
        };
        let (_, v) = optimum(&lp);
        assert!((v + 0.05).abs() < 1e-6, "value {v}");
    }

    #[test]
    fn feasibility_helper() {
        let rows = vec![
            (vec![1.0, 0.0], Rel::Ge, 1.0),
            (vec![0.0, 1.0], Rel::Ge, 1.0),
            (vec![1.0, 1.0], Rel::Le, 3.0),
        ];
        let p = feasible_point(2, &rows).unwrap().unwrap();
        assert!(p[0] >= 1.0 - 1e-9 && p[1] >= 1.0 - 1e-9 && p[0] + p[1] <= 3.0 + 1e-9);
        let rows_bad = vec![
            (vec![1.0, 0.0], Rel::Ge, 2.0),
            (vec![1.0, 0.0], Rel::Le, 1.0),
        ];
        assert!(feasible_point(2, &rows_bad).unwrap().is_none());
    }
}
