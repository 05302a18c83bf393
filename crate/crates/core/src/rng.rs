//! Deterministic counter-based stream splitting.
//!
//! Every stream is keyed by `(root seed, purpose tag, path index, lane)`, so a
//! path can be regenerated exactly for common-random-number comparisons, and
//! the draws for one Fourier mode do not depend on how many modes are kept.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    Noise = 1,
    Regression = 2,
    Probe = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(root: u64, tag: StreamTag, path: u64, lane: u64) -> ChaCha8Rng {
    let mut state = splitmix64(root ^ splitmix64(tag as u64));
    state = splitmix64(state ^ path);
    state = splitmix64(state ^ lane.rotate_left(17));
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, StreamTag::Noise, 3, 1).random();
        let b: u64 = stream(7, StreamTag::Noise, 3, 1).random();
        let c: u64 = stream(7, StreamTag::Noise, 4, 1).random();
        let d: u64 = stream(7, StreamTag::Noise, 3, 2).random();
        let e: u64 = stream(7, StreamTag::Probe, 3, 1).random();
        assert_eq!(a, b);
        assert!(a != c && a != d && a != e && c != d);
    }
}
