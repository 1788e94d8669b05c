//! Worker-count dispatch. One worker means a plain in-order loop on the
//! calling thread; anything above one uses a dedicated rayon pool. Every
//! call site writes results into index-addressed slots, so the output is
//! identical regardless of worker count; with one worker it is also
//! bit-identical to fully sequential execution by construction.

#[cfg(feature = "parallel")]
use std::sync::Arc;

#[derive(Clone)]
pub struct Parallelism {
    workers: usize,
    #[cfg(feature = "parallel")]
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Parallelism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Parallelism").field("workers", &self.workers).finish()
    }
}

impl Default for Parallelism {
    fn default() -> Self {
        Self::serial()
    }
}

impl Parallelism {
    pub fn serial() -> Self {
        Parallelism {
            workers: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// `workers == 0` picks the machine's parallelism; 1 stays serial.
    pub fn new(workers: usize) -> Self {
        let workers = if workers == 0 {
            std::thread::available_parallelism().map_or(1, |p| p.get())
        } else {
            workers
        };
        #[cfg(feature = "parallel")]
        {
            let pool = (workers > 1).then(|| {
                Arc::new(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(workers)
                        .build()
                        .expect("thread pool"),
                )
            });
            Parallelism { workers, pool }
        }
        #[cfg(not(feature = "parallel"))]
        Parallelism { workers: 1 }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Evaluate `f(0..len)` and collect the results in index order.
    pub fn map_indexed<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| (0..len).into_par_iter().map(&f).collect());
        }
        (0..len).map(f).collect()
    }
}
