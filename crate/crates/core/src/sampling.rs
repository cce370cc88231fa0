//! Deterministic sampling primitives: Halton low-discrepancy sequences,
//! quasi-uniform direction grids on the unit sphere, and box grids.
//!
//! Everything here is a pure function of its arguments, so any two runs
//! produce identical samples — the backbone of reproducible reports.

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical-inverse of `index` in the given base, in (0, 1).
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut inv = 0.0;
    let mut frac = 1.0 / base as f64;
    while index > 0 {
        inv += (index % base) as f64 * frac;
        index /= base;
        frac /= base as f64;
    }
    inv
}

/// The `index`-th point (1-based) of the Halton sequence in `[0,1)^dim`.
pub fn halton_point(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "Halton sampler supports up to {} dimensions", PRIMES.len());
    (0..dim).map(|d| radical_inverse(index, PRIMES[d])).collect()
}

/// Map a `[0,1)^dim` point into the box `center ± radius` (componentwise).
pub fn into_box(unit: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    unit.iter()
        .zip(center)
        .map(|(t, c)| c - radius + 2.0 * radius * t)
        .collect()
}

/// Quasi-uniform unit directions.
///
/// * 1-D: `[+1], [-1]`;
/// * 2-D: `count` equally spaced angles starting at `(1, 0)`;
/// * higher dimensions: Gaussian samples driven by the Halton sequence
///   (Box–Muller), normalized, with `±e_i` prepended so that the axes are
///   always represented.
pub fn sphere_grid(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![theta.cos(), theta.sin()]
            })
            .collect(),
        _ => {
            let mut dirs = Vec::with_capacity(count);
            for i in 0..dim {
                for s in [1.0, -1.0] {
                    let mut e = vec![0.0; dim];
                    e[i] = s;
                    dirs.push(e);
                }
            }
            let mut index = 1u64;
            while dirs.len() < count {
                let mut v = Vec::with_capacity(dim);
                // Two uniform coordinates per Gaussian pair.
                let mut d = 0;
                while d < dim {
                    let u1 = radical_inverse(index, PRIMES[(2 * d) % PRIMES.len()]).max(1e-12);
                    let u2 = radical_inverse(index, PRIMES[(2 * d + 1) % PRIMES.len()]);
                    let r = (-2.0 * u1.ln()).sqrt();
                    let a = 2.0 * std::f64::consts::PI * u2;
                    v.push(r * a.cos());
                    if d + 1 < dim {
                        v.push(r * a.sin());
                    }
                    d += 2;
                }
                index += 1;
                let n = crate::linalg::norm(&v);
                if n > 1e-9 {
                    dirs.push(v.iter().map(|c| c / n).collect());
                }
            }
            dirs
        }
    }
}

/// Perturbation directions for ball around a center direction: the center
/// itself plus `count` sphere directions scaled by `radius`.
pub fn ball_around(center: &[f64], radius: f64, count: usize) -> Vec<Vec<f64>> {
    let mut out = vec![center.to_vec()];
    for d in sphere_grid(center.len(), count) {
        out.push(center.iter().zip(&d).map(|(c, p)| c + radius * p).collect());
    }
    out
}

/// Geometric grid of step lengths `t0 * ratio^j`, shared by every limit
/// estimator in the crate so that chained quantities (lower vs upper
/// derivatives, nested cone notions) are compared on identical samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TGrid {
    pub t0: f64,
    pub ratio: f64,
    pub levels: usize,
}

impl Default for TGrid {
    fn default() -> Self {
        TGrid { t0: 1e-1, ratio: 0.5, levels: 12 }
    }
}

impl TGrid {
    pub fn values(&self) -> Vec<f64> {
        (0..self.levels).map(|j| self.t0 * self.ratio.powi(j as i32)).collect()
    }

    /// Number of trailing levels used when estimating a limit.
    pub const TAIL: usize = 4;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;

    #[test]
    fn radical_inverse_base2_prefix() {
        // 1 -> 0.5, 2 -> 0.25, 3 -> 0.75 in base 2.
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn halton_points_fill_unit_box() {
        let pts: Vec<_> = (1..=128).map(|i| halton_point(i, 2)).collect();
        assert!(pts.iter().all(|p| p.iter().all(|&c| (0.0..1.0).contains(&c))));
        // Low discrepancy: every quadrant of the unit square is hit.
        for (qx, qy) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let hit = pts.iter().any(|p| {
                (p[0] * 2.0) as usize == qx && (p[1] * 2.0) as usize == qy
            });
            assert!(hit);
        }
    }

    #[test]
    fn sphere_grid_has_unit_directions() {
        for dim in [1, 2, 3, 4] {
            let dirs = sphere_grid(dim, 32);
            assert!(dirs.len() >= 2);
            for d in &dirs {
                assert!((norm(d) - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sphere_grid_2d_includes_axes() {
        let dirs = sphere_grid(2, 360);
        assert_eq!(dirs.len(), 360);
        assert!(dirs.iter().any(|d| (d[0] - 1.0).abs() < 1e-12));
        assert!(dirs.iter().any(|d| (d[1] - 1.0).abs() < 1e-12));
        assert!(dirs.iter().any(|d| (d[0] + 1.0).abs() < 1e-12));
    }

    #[test]
    fn deterministic_across_calls() {
        assert_eq!(sphere_grid(3, 64), sphere_grid(3, 64));
        assert_eq!(halton_point(77, 3), halton_point(77, 3));
    }
}
