//! Indexed random streams.
//!
//! Every replica draws from its own ChaCha stream keyed by `(seed, index)`,
//! so results do not depend on how replicas are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RandomStream = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stream index for replica `replica` of experiment block `block`.
pub fn block_index(block: u32, replica: u32) -> u64 {
    (u64::from(block) << 32) | u64::from(replica)
}

/// Maps `f` over `0..n` replica indices, in parallel when the `parallel`
/// feature is on. Output order always follows the index.
pub fn map_replicas<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
