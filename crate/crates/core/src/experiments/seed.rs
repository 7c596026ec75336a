//! Counter-based stream derivation.
//!
//! The stream for `(repetition, cell, sample)` is a ChaCha8 generator keyed
//! by the 256-bit word `master_seed || repetition || cell || sample`, each
//! part little-endian. Distinct tuples give distinct keys, so no two work
//! items ever share a stream and results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream(master_seed: u64, repetition: u64, cell: u64, sample: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key
        .chunks_exact_mut(8)
        .zip([master_seed, repetition, cell, sample])
    {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
