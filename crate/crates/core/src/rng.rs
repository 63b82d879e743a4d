//! Named random substreams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic generator for `(seed, name, index)`. Distinct names or
/// indices give independent streams, so e.g. sampling for update 17 does not
/// depend on how many draws initialisation consumed.
pub fn substream(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    let key = splitmix(splitmix(seed ^ fnv1a(name.as_bytes())).wrapping_add(index));
    ChaCha8Rng::seed_from_u64(key)
}
