//! Stable, platform-independent hashing used for every seeded partition
//! (tuning split, CV folds, explanation samples).

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Hash of a borrower id under a seed. Identical inputs give identical output
/// on every platform and in every run.
#[inline]
pub fn keyed(id: u64, seed: u64) -> u64 {
    mix64(id ^ mix64(seed ^ 0xA076_1D64_78BD_642F))
}

/// Hash mapped to the unit interval [0, 1).
#[inline]
pub fn unit(id: u64, seed: u64) -> f64 {
    (keyed(id, seed) >> 11) as f64 / (1u64 << 53) as f64
}
