//! Labeled seed derivation.
//!
//! Every experiment fans its randomness out from one master seed through
//! fixed labels ("gen", "oracle", "schedule", "attack:<i>"), so each
//! sub-experiment is independently reproducible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

const DERIVE_TAG: &[u8] = b"obfcon-seed-derive-v1";

pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(DERIVE_TAG);
    h.update(master.to_be_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_be_bytes(digest[..8].try_into().unwrap())
}

/// A deterministic random stream for the given master seed and label.
pub fn stream(master: u64, label: &str) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(master, label))
}
