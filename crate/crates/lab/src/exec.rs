use gneiting_core::cyclic::{BatchExecutor, BatchSums};
use rayon::prelude::*;

/// Runs batches on the current rayon pool; output order follows batch index.
pub struct RayonExecutor;

impl BatchExecutor for RayonExecutor {
    fn run(&self, n: usize, f: &(dyn Fn(usize) -> BatchSums + Sync)) -> Vec<BatchSums> {
        (0..n).into_par_iter().map(f).collect()
    }
}

/// Thread pool sized by `GNEITING_THREADS`, then `requested`, then the hardware.
pub fn build_pool(requested: Option<usize>) -> rayon::ThreadPool {
    let env = std::env::var("GNEITING_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
    let n = env.or(requested).unwrap_or(0);
    rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool")
}
