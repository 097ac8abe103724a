//! Fan-out over independent sequences.
//!
//! Results are always returned in input order, so reductions done by the
//! caller see the same operand order whether the work ran on one thread or
//! many.

use crate::error::Result;

#[derive(Debug)]
pub struct Executor {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    /// `workers <= 1`, or a build without the `parallel` feature, runs
    /// everything on the calling thread.
    pub fn new(workers: usize) -> Result<Self> {
        #[cfg(feature = "parallel")]
        {
            let pool = if workers > 1 {
                Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(workers)
                        .build()
                        .map_err(|e| crate::error::GruweError::Internal(format!("thread pool: {e}")))?,
                )
            } else {
                None
            };
            Ok(Executor { pool })
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = workers;
            Ok(Executor {})
        }
    }

    pub fn sequential() -> Self {
        Executor {
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    /// `f` applied to every item, results in item order.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect());
        }
        items.iter().enumerate().map(|(i, x)| f(i, x)).collect()
    }

    /// Like [`Executor::map`] but stops at the first error (by item order).
    pub fn try_map<T, R, F>(&self, items: &[T], f: F) -> Result<Vec<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> Result<R> + Sync + Send,
    {
        self.map(items, f).into_iter().collect()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Executor::sequential()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::GruweError;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Executor::sequential().map(&items, |i, x| (i as u64) * 1000 + x);
        let par = Executor::new(4).unwrap().map(&items, |i, x| (i as u64) * 1000 + x);
        assert_eq!(seq, par);
    }

    #[test]
    fn first_error_wins() {
        let items: Vec<usize> = (0..100).collect();
        let r = Executor::new(3).unwrap().try_map(&items, |_, &x| {
            if x % 10 == 7 {
                Err(GruweError::Data(format!("bad {x}")))
            } else {
                Ok(x)
            }
        });
        match r {
            Err(GruweError::Data(m)) => assert_eq!(m, "bad 7"),
            other => panic!("{other:?}"),
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn worker_count() {
        assert!(!Executor::new(1).unwrap().is_parallel());
        assert!(Executor::new(2).unwrap().is_parallel());
    }
}
