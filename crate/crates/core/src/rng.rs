//! Seeding convention shared by all simulations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for replica `replica` of a run seeded with `seed`.
///
/// Replicas share the key and differ in the ChaCha stream, so streams never overlap.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}
