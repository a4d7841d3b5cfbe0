//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream derived from a
//! root seed and a path of integer keys, so results never depend on thread
//! scheduling or on how many draws some unrelated component made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `seed` with `path` into a 64-bit stream key.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    let mut h = splitmix(seed);
    for &p in path {
        h = splitmix(h ^ splitmix(p.wrapping_add(0xD1B5_4A32_D192_ED03)));
    }
    h
}

/// Independent stream for `(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(seed, path))
}

/// Path tags so that streams for different purposes never collide.
pub mod tag {
    pub const INSTANCE: u64 = 1;
    pub const SIGMA: u64 = 2;
    pub const TRIPLET: u64 = 3;
    pub const FVI: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
    pub const PERTURB: u64 = 6;
    pub const SCENARIO: u64 = 7;
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
        let d: u64 = stream(8, &[1, 2]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
