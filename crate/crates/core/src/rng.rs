//! Deterministic partitioned random streams.
//!
//! The sample index space `0..count` is cut into fixed-size partitions.
//! Partition `k` draws from its own ChaCha stream keyed by `(seed, purpose,
//! k)`, and partition results are merged in index order, so the output does
//! not depend on how many threads ran the partitions.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples per partition.
pub const PARTITION: usize = 256;

/// Purpose tags keep streams of different operations apart under one seed.
pub mod purpose {
    pub const PRODUCTS: u64 = 1;
    pub const LYAPUNOV: u64 = 2;
    pub const BIRKHOFF: u64 = 3;
    pub const STATIONARY: u64 = 4;
    pub const REGULARITY: u64 = 5;
    pub const GENERICITY: u64 = 6;
    pub const DIOPHANTINE: u64 = 7;
    pub const CONVOLUTION: u64 = 8;
    pub const GREEN: u64 = 9;
    pub const PROBES: u64 = 10;
    pub const LAZY: u64 = 11;
    pub const LEMMAS: u64 = 12;
}

pub fn stream(seed: u64, purpose: u64, partition: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&purpose.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(partition);
    rng
}

pub fn partitions(count: usize) -> Vec<Range<usize>> {
    (0..count.div_ceil(PARTITION)).map(|k| k * PARTITION..((k + 1) * PARTITION).min(count)).collect()
}

/// Runs `f` on every partition in parallel and returns the results in
/// partition order.
pub fn map_partitions<T, F>(count: usize, seed: u64, purpose: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, Range<usize>) -> T + Sync,
{
    partitions(count)
        .into_par_iter()
        .enumerate()
        .map(|(k, range)| {
            let mut rng = stream(seed, purpose, k as u64);
            f(&mut rng, range)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn partitions_cover_range() {
        let p = partitions(600);
        assert_eq!(p.len(), 3);
        assert_eq!(p[2], 512..600);
        assert!(partitions(0).is_empty());
    }

    #[test]
    fn thread_count_does_not_matter() {
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| map_partitions(2000, 7, 1, |rng, r| r.map(|_| rng.gen::<u64>()).collect::<Vec<_>>()))
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn purposes_are_independent() {
        let a: u64 = stream(1, 1, 0).gen();
        let b: u64 = stream(1, 2, 0).gen();
        let c: u64 = stream(1, 1, 1).gen();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
