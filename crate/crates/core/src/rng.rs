//! Reproducible random streams keyed by `(root seed, role, index)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Data generation for one simulation run.
pub const ROLE_DATA: u64 = 1;
/// Root seed of the bootstrap inside one simulation run.
pub const ROLE_RUN_BOOT: u64 = 2;
/// One bootstrap replication.
pub const ROLE_REPLICATION: u64 = 3;

/// Independent ChaCha stream; the index selects the stream, so every task can
/// build its generator without reference to any other.
pub fn stream(root: u64, role: u64, index: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&root.to_le_bytes());
    seed[8..16].copy_from_slice(&role.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(index);
    rng
}

/// A fresh 64-bit seed from a stream.
pub fn derive_seed(root: u64, role: u64, index: u64) -> u64 {
    stream(root, role, index).next_u64()
}
