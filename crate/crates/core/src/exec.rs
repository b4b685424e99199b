//! Execution strategy for the data-parallel stages.
//!
//! With the `parallel` feature (default) [`Exec::Parallel`] maps over rayon's
//! current thread pool; without it every strategy runs sequentially. Output
//! order always follows input order.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    /// Runs `f` on a dedicated pool of `workers` threads (parallel builds only).
    pub fn install<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
        #[cfg(feature = "parallel")]
        {
            match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
                Ok(pool) => pool.install(f),
                Err(_) => f(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = workers;
            f()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_strategies_preserve_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Exec::Sequential.map(&items, |x| x * x);
        let par = Exec::Parallel.map(&items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(Exec::install(3, || Exec::Parallel.map(&items, |x| x + 1))[999], 1000);
    }
}
