//! Data-parallel map helper with a sequential fallback.
//!
//! Per-item work (rollouts, trajectory evaluation, generation, lemma
//! trials) is pure, and all reductions happen afterwards in input order, so
//! output is identical whatever the worker count. With the `parallel`
//! feature disabled the crate compiles without rayon and everything runs
//! sequentially.

/// Executes order-preserving maps either sequentially or on a rayon pool.
#[derive(Debug)]
pub enum Executor {
    Sequential,
    #[cfg(feature = "parallel")]
    Pool(rayon::ThreadPool),
}

impl Executor {
    /// `workers <= 1` selects the sequential path. Without the `parallel`
    /// feature any worker count is sequential.
    pub fn new(workers: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            if workers > 1 {
                if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                    return Executor::Pool(pool);
                }
            }
            Executor::Sequential
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = workers;
            Executor::Sequential
        }
    }

    pub fn workers(&self) -> usize {
        match self {
            Executor::Sequential => 1,
            #[cfg(feature = "parallel")]
            Executor::Pool(pool) => pool.current_num_threads(),
        }
    }

    /// Order-preserving map over a slice.
    pub fn map_indexed<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(usize, &T) -> U + Sync,
    {
        match self {
            Executor::Sequential => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            #[cfg(feature = "parallel")]
            Executor::Pool(pool) => {
                use rayon::prelude::*;
                pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect())
            }
        }
    }
}

impl Default for Executor {
    fn default() -> Self {
        Executor::Sequential
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let items: Vec<u64> = (0..100).collect();
        let seq = Executor::new(1).map_indexed(&items, |i, x| i as u64 * 1000 + x * x);
        let par = Executor::new(4).map_indexed(&items, |i, x| i as u64 * 1000 + x * x);
        assert_eq!(seq, par);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn pool_reports_workers() {
        assert!(Executor::new(3).workers() >= 1);
        assert_eq!(Executor::new(1).workers(), 1);
    }
}
