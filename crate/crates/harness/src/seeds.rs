//! Per-replicate random streams.
//!
//! Every replicate draws from ChaCha streams keyed by `(master, replicate,
//! purpose)`, so results do not depend on which worker ran which replicate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; distinct purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Gaussian noise. Kept apart so scenarios differing only in layout
    /// share noise across a sweep.
    Noise = 0,
    /// Non-null placement and other geometry.
    Layout = 1,
    /// Randomness inside a method (tie breaks, preorders).
    Method = 2,
}

pub fn stream(master: u64, replicate: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(replicate.wrapping_mul(4).wrapping_add(purpose as u64));
    rng
}
