//! Deterministic seed derivation.
//!
//! Every random stream in the crate is keyed by a root seed plus a short
//! path of labels and indices, so results never depend on evaluation order.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over `bytes`.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Child seed of `root` for a string key.
pub fn derive(root: u64, key: &str) -> u64 {
    splitmix64(root ^ splitmix64(fnv1a64(key.as_bytes())))
}

/// Child seed of `root` for an integer index.
pub fn derive_index(root: u64, index: u64) -> u64 {
    splitmix64(root.wrapping_add(splitmix64(index ^ GOLDEN)))
}
