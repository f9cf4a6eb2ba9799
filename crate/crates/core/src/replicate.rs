//! Replicate-indexed fan-out.
//!
//! Each replicate gets the seed `split(master, index)`. Work runs on the
//! current rayon pool and results come back in index order, so aggregates do
//! not depend on the thread count.

use rayon::prelude::*;

use crate::rng;

pub fn map<T, F>(master: u64, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    (0..count)
        .into_par_iter()
        .map(|i| f(i, rng::split(master, i as u64)))
        .collect()
}

pub fn try_map<T, E, F>(master: u64, count: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize, u64) -> Result<T, E> + Sync + Send,
{
    (0..count)
        .into_par_iter()
        .map(|i| f(i, rng::split(master, i as u64)))
        .collect()
}

/// Runs `f` on a dedicated pool with `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let f = |i: usize, seed: u64| seed.wrapping_mul(i as u64 + 1);
        let one = with_threads(1, || map(9, 500, f));
        let four = with_threads(4, || map(9, 500, f));
        assert_eq!(one, four);
    }
}
