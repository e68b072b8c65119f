//! Thread-pool implementation of [`SeedRunner`].

use parahom_core::exec::SeedRunner;
use rayon::prelude::*;

use crate::error::{AppError, AppResult};

pub const THREADS_ENV: &str = "PARAHOM_THREADS";

/// Runs seeds on a dedicated rayon pool; results come back in seed order, so
/// the thread count never changes any output.
pub struct RayonRunner {
    pool: rayon::ThreadPool,
}

impl RayonRunner {
    pub fn new(threads: usize) -> AppResult<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| AppError::config(format!("thread pool: {e}")))?;
        Ok(RayonRunner { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl SeedRunner for RayonRunner {
    fn run<T, F>(&self, seeds: &[u64], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool.install(|| seeds.par_iter().map(|&s| f(s)).collect())
    }
}

/// `PARAHOM_THREADS` wins over the command line; 0 or absent means all cores.
pub fn resolve_threads(cli: Option<usize>, env: Option<&str>) -> AppResult<usize> {
    let from_env = match env {
        Some(s) if !s.trim().is_empty() => Some(
            s.trim()
                .parse::<usize>()
                .map_err(|_| AppError::config(format!("{THREADS_ENV} must be a non-negative integer, got {s:?}")))?,
        ),
        _ => None,
    };
    let n = from_env.or(cli).unwrap_or(0);
    Ok(if n == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        n
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use parahom_core::exec::Sequential;

    #[test]
    fn order_matches_sequential() {
        let seeds: Vec<u64> = (0..50).collect();
        let r = RayonRunner::new(3).unwrap();
        let f = |s: u64| s.wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 7;
        assert_eq!(r.run(&seeds, f), Sequential.run(&seeds, f));
    }

    #[test]
    fn env_overrides_flag() {
        assert_eq!(resolve_threads(Some(4), Some("2")).unwrap(), 2);
        assert_eq!(resolve_threads(Some(4), None).unwrap(), 4);
        assert!(resolve_threads(None, Some("x")).is_err());
    }
}
