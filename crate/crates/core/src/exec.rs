//! Execution strategy for the data-parallel loops.
//!
//! Every parallel loop in the crate is expressed as an indexed map whose
//! output is collected in index order, so the result is identical whether it
//! ran on one worker or many.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How data-parallel work is scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Exec {
    /// Plain iteration on the calling thread.
    Sequential,
    /// Rayon work-stealing when the `parallel` feature is compiled in,
    /// otherwise identical to [`Exec::Sequential`].
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// True when this strategy actually fans out to a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Evaluates `f(0..n)` and returns the results in index order.
    pub fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    /// Splits `0..n` into fixed-size blocks, folds each block independently
    /// with `fold`, and combines the block accumulators in block order.
    ///
    /// Block boundaries depend only on `n` and `block`, never on the number of
    /// workers.
    pub fn fold_blocks<A, I, F, R>(self, n: usize, block: usize, init: I, fold: F, mut reduce: R) -> A
    where
        A: Send,
        I: Fn() -> A + Sync + Send,
        F: Fn(&mut A, usize) + Sync + Send,
        R: FnMut(A, A) -> A,
    {
        let block = block.max(1);
        let blocks = n.div_ceil(block);
        let partials = self.map_indexed(blocks, |b| {
            let mut acc = init();
            let start = b * block;
            let end = (start + block).min(n);
            for i in start..end {
                fold(&mut acc, i);
            }
            acc
        });
        partials.into_iter().fold(init(), |a, b| reduce(a, b))
    }
}
