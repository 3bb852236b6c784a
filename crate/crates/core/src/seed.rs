//! Seed derivation.
//!
//! Every random stream in the crate descends from one root seed. A child
//! seed is `splitmix64(root ^ fnv1a64(label) ^ splitmix64(index))`, so new
//! labels never perturb the streams of existing ones.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// One round of the SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a over the UTF-8 bytes of `s`.
pub fn fnv1a64(s: &str) -> u64 {
    s.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Child seed for a named stage.
pub fn derive(root: u64, label: &str) -> u64 {
    derive_indexed(root, label, 0)
}

/// Child seed for the `index`-th member of a named stage (e.g. a fold).
pub fn derive_indexed(root: u64, label: &str, index: u64) -> u64 {
    splitmix64(root ^ fnv1a64(label) ^ splitmix64(index))
}
