//! Small dense vectors and matrices.
//!
//! Everything in this crate works at "desk scale" (a handful of variables,
//! at most a few thousand constraint rows), so the representation is a plain
//! row-major `Vec<f64>` and the solvers are direct eliminations.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Normalize to unit Euclidean length; `None` for (near-)zero input.
pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n <= 1e-300 {
        None
    } else {
        Some(scale(a, 1.0 / n))
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from explicit rows; all rows must share a length (`cols` is
    /// taken from the first row, or pass `cols` for an empty list).
    pub fn from_rows(rows: Vec<Vec<f64>>, cols: usize) -> Self {
        let r = rows.len();
        let mut data = Vec::with_capacity(r * cols);
        for row in &rows {
            assert_eq!(row.len(), cols, "ragged matrix rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols, data }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }
}

/// Solve a square system `a x = rhs` by Gaussian elimination with partial
/// pivoting.  Returns `None` when the matrix is singular to tolerance.
pub fn solve_square(a: &Mat, rhs: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(a.rows, a.cols);
    assert_eq!(rhs.len(), a.rows);
    let n = a.rows;
    let mut m = a.data.clone();
    let mut b = rhs.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut imax, mut vmax) = (k, 0.0_f64);
        for i in k..n {
            let v = m[perm[i] * n + k].abs();
            if v > vmax {
                vmax = v;
                imax = i;
            }
        }
        if vmax <= 1e-12 {
            return None;
        }
        perm.swap(k, imax);
        let pk = perm[k];
        for &pi in perm.iter().skip(k + 1) {
            let factor = m[pi * n + k] / m[pk * n + k];
            if factor == 0.0 {
                continue;
            }
            for j in k..n {
                m[pi * n + j] -= factor * m[pk * n + j];
            }
            b[pi] -= factor * b[pk];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let pk = perm[k];
        let mut s = b[pk];
        for j in (k + 1)..n {
            s -= m[pk * n + j] * x[j];
        }
        x[k] = s / m[pk * n + k];
    }
    Some(x)
}

/// Solve a symmetric positive semidefinite system `g x = rhs` that is known
/// to be consistent (rhs in the range of `g`), tolerating rank deficiency:
/// columns whose pivot falls below tolerance get a zero coefficient.
pub fn solve_psd_consistent(g: &Mat, rhs: &[f64]) -> Vec<f64> {
    assert_eq!(g.rows, g.cols);
    let n = g.rows;
    let mut m = g.data.clone();
    let mut b = rhs.to_vec();
    let scale_ref = (0..n)
        .map(|i| m[i * n + i].abs())
        .fold(1e-300, f64::max);
    let tol = 1e-12 * scale_ref;
    let mut pivoted = vec![false; n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for _ in 0..n {
        // Diagonal pivoting: largest remaining diagonal entry.
        let mut best = None;
        let mut bestv = tol;
        for i in 0..n {
            if !pivoted[i] && m[i * n + i] > bestv {
                bestv = m[i * n + i];
                best = Some(i);
            }
        }
        let Some(p) = best else { break };
        pivoted[p] = true;
        order.push(p);
        for i in 0..n {
            if pivoted[i] || i == p {
                continue;
            }
            let factor = m[i * n + p] / m[p * n + p];
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                m[i * n + j] -= factor * m[p * n + j];
            }
            b[i] -= factor * b[p];
        }
    }
    // Back substitution over the pivoted subset (in reverse pivot order).
    let mut x = vec![0.0; n];
    for &p in order.iter().rev() {
        let mut s = b[p];
        for j in 0..n {
            if j != p {
                s -= m[p * n + j] * x[j];
            }
        }
        x[p] = s / m[p * n + p];
    }
    x
}
