//! Deterministic random-number substreams.
//!
//! A master seed fans out into independent ChaCha streams keyed by a label and
//! a list of indices, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn label_hash(label: &str) -> u64 {
    // FNV-1a
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Derive a 32-byte seed from `(master, label, indices)`.
pub fn derive_seed(master: u64, label: &str, indices: &[u64]) -> [u8; 32] {
    let mut h = splitmix64(master ^ label_hash(label));
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        h = splitmix64(h);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    seed
}

pub fn substream(master: u64, label: &str, indices: &[u64]) -> Rng {
    Rng::from_seed(derive_seed(master, label, indices))
}
