//! Seed derivation. Every stochastic call in the crate takes an explicit
//! generator; independent streams are split off a master seed by hashing the
//! seed together with a list of integer labels.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Stable 64-bit seed for `(master, labels...)`.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for l in labels {
        hasher.update(l.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream(master: u64, labels: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(master, labels))
}

pub fn from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Label for a float-valued coordinate (exact bit pattern).
pub fn float_label(x: f64) -> u64 {
    x.to_bits()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, &[1, 2]).random();
        let b: u64 = stream(7, &[1, 2]).random();
        let c: u64 = stream(7, &[2, 1]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(derive_seed(7, &[]), derive_seed(8, &[]));
    }
}
