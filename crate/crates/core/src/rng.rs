//! Deterministic RNG streams.
//!
//! Every run hangs off a single master seed. Independent units of work
//! (trials, folds, runs) get their own ChaCha stream derived from
//! `(master seed, stream index)` so that parallel and serial schedules
//! produce identical results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for stream `stream` of master seed `seed`.
pub fn derive_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.into());
    rng
}

/// The root stream of a master seed.
pub fn master_rng(seed: u64) -> ChaCha8Rng {
    derive_rng(seed, 0)
}
