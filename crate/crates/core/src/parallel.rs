//! Deterministic fork-join over independent random streams.
//!
//! Work of `count` items is cut into batches of [`BATCH`] items. Batch `b`
//! draws from the ChaCha8 stream `(seed, b)`, so its output depends only on
//! the seed and its index, never on which thread ran it. Results come back in
//! batch order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const BATCH: usize = 4096;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "SCATTERLAB_WORKERS";

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `f(rng, batch_index, batch_len)` for every batch, in parallel.
pub fn map_batches<T, F>(count: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize, usize) -> T + Sync,
{
    let batches = count.div_ceil(BATCH);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let len = BATCH.min(count - b * BATCH);
            let mut rng = stream_rng(seed, b as u64);
            f(&mut rng, b, len)
        })
        .collect()
}

/// Runs `f` inside a dedicated pool of `workers` threads (or the global pool
/// when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> crate::Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| crate::Error::Config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
