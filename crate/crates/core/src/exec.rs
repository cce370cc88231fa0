//! Execution strategy for the data-parallel inner loops.
//!
//! With the default `parallel` feature the heavy sweeps (residual over the
//! z-sample, direction scoring, cloud construction) fan out over a rayon
//! pool; without it they run as plain iterator chains.  `force_sequential`
//! additionally disables the parallel path at runtime for the current
//! thread, which is how the benchmark suite compares both strategies inside
//! one compiled binary.
//!
//! Outputs are collected in input order and reductions are performed
//! sequentially afterwards, so results are bit-identical regardless of the
//! strategy or thread count.

use std::cell::Cell;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

thread_local! {
    static FORCE_SEQ: Cell<bool> = const { Cell::new(false) };
}

/// Run `f` with the parallel path disabled on this thread.
pub fn force_sequential<R>(f: impl FnOnce() -> R) -> R {
    FORCE_SEQ.with(|c| {
        let prev = c.replace(true);
        let out = f();
        c.set(prev);
        out
    })
}

/// Whether a map dispatched from this thread would use the rayon pool.
pub fn parallelism_active() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQ.with(Cell::get)
}

/// Order-preserving map over a slice, parallel when available.
pub fn map_slice<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        if parallelism_active() {
            return items.par_iter().map(&f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Order-preserving map over an index range, parallel when available.
pub fn map_range<U: Send>(n: usize, f: impl Fn(usize) -> U + Sync) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        if parallelism_active() {
            return (0..n).into_par_iter().map(&f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Deterministic argmax over mapped values: ties resolve to the smallest
/// index, independent of evaluation order.
pub fn argmax_by<T: Sync>(items: &[T], score: impl Fn(&T) -> f64 + Sync) -> Option<(usize, f64)> {
    let scores = map_slice(items, score);
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        match best {
            Some((_, bs)) if s <= bs => {}
            _ => best = Some((i, s)),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let xs: Vec<usize> = (0..1000).collect();
        let ys = map_slice(&xs, |x| x * 2);
        assert_eq!(ys, (0..1000).map(|x| x * 2).collect::<Vec<_>>());
        let zs = map_range(100, |i| i + 1);
        assert_eq!(zs[0], 1);
        assert_eq!(zs[99], 100);
    }

    #[test]
    fn forced_sequential_matches_parallel() {
        let xs: Vec<f64> = (0..512).map(|i| (i as f64).sin()).collect();
        let par = map_slice(&xs, |x| x.cos());
        let seq = force_sequential(|| map_slice(&xs, |x| x.cos()));
        assert_eq!(par, seq);
        assert!(!force_sequential(parallelism_active));
    }

    #[test]
    fn argmax_breaks_ties_to_smallest_index() {
        let xs = [1.0, 3.0, 3.0, 2.0];
        let (i, v) = argmax_by(&xs, |x| *x).unwrap();
        assert_eq!(i, 1);
        assert_eq!(v, 3.0);
    }
}
