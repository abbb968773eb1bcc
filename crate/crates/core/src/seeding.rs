//! Deterministic per-trial seed derivation.
//!
//! `trial_seed(stream_seed(master, tag), i)` is a pure function of the
//! master seed, a stream tag and the trial index, so a trial's random
//! stream does not depend on which worker runs it.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a.
pub fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// `splitmix64(master ^ splitmix64(fnv1a(tag)))`.
pub fn stream_seed(master: u64, tag: &str) -> u64 {
    splitmix64(master ^ splitmix64(fnv1a(tag)))
}

/// `splitmix64(stream + (index + 1)·φ)` with φ = 0x9E3779B97F4A7C15.
pub fn trial_seed(stream: u64, index: u64) -> u64 {
    splitmix64(stream.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}
