//! Parallel trial execution on a dedicated rayon pool.

use std::ops::Range;

use coexsim_core::engine::{LinkSimulator, TrialExecutor};
use rayon::prelude::*;

/// Fans each batch of trials out over a fixed number of threads. Outcomes
/// come back in trial order, so estimates do not depend on the pool size.
pub struct PoolExecutor {
    pool: rayon::ThreadPool,
}

impl PoolExecutor {
    pub fn new(workers: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .thread_name(|i| format!("coexsim-worker-{i}"))
            .build()?;
        Ok(PoolExecutor { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl TrialExecutor for PoolExecutor {
    fn run_trials(&self, sim: &LinkSimulator, trials: Range<u64>) -> coexsim_core::Result<Vec<bool>> {
        let start = trials.start;
        let n = (trials.end - trials.start) as usize;
        self.pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|i| sim.run_packet(start + i as u64))
                .collect()
        })
    }
}
