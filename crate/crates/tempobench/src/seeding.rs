//! Deterministic seed derivation.
//!
//! Every random stage draws from a ChaCha stream whose seed is derived from
//! the master seed, a stage tag, and a counter:
//!
//! ```text
//! stage_seed = first 8 bytes of SHA-256(master_le || tag || counter_le)
//! ```
//!
//! The scheme lets any stage (or any single video) be re-run in isolation
//! with the exact randomness it saw inside the full pipeline.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Derive a child seed from `(master, tag, counter)`.
pub fn derive_seed(master: u64, tag: &str, counter: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(tag.as_bytes());
    h.update(counter.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().unwrap())
}

/// RNG for a derived stage seed.
pub fn stage_rng(master: u64, tag: &str, counter: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(master, tag, counter))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_tag_sensitive() {
        assert_eq!(derive_seed(7, "chains", 0), derive_seed(7, "chains", 0));
        assert_ne!(derive_seed(7, "chains", 0), derive_seed(7, "chains", 1));
        assert_ne!(derive_seed(7, "chains", 0), derive_seed(7, "gaps", 0));
        assert_ne!(derive_seed(7, "chains", 0), derive_seed(8, "chains", 0));
    }
}
