//! Seed-level fan-out with deterministic, seed-ordered results.

use alloc::vec::Vec;

/// Runs one pure job per seed. Implementations may run jobs concurrently but
/// must return results in the order of `seeds`.
pub trait SeedRunner: Sync {
    fn run<T, F>(&self, seeds: &[u64], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl SeedRunner for Sequential {
    fn run<T, F>(&self, seeds: &[u64], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        seeds.iter().map(|&s| f(s)).collect()
    }
}

impl<R: SeedRunner> SeedRunner for &R {
    fn run<T, F>(&self, seeds: &[u64], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        (**self).run(seeds, f)
    }
}
