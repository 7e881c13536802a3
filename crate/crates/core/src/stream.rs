//! Deterministic random substreams.
//!
//! Every random quantity is drawn from a ChaCha8 stream identified by
//! `(master seed, purpose, drop index, realization index)`. The purpose and
//! drop select the 64-bit ChaCha stream id and the realization selects a
//! disjoint window of the keystream, so no generator state is ever shared
//! between units of work and results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. Scenarios deliberately do not enter the
/// key, so sweeps over UE separation share their random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    PathAngles = 1,
    Fading = 2,
    LinkGain = 3,
    Placement = 4,
    /// Free-form test and oracle instances.
    Instance = 5,
}

const DROP_BITS: u32 = 56;
/// Keystream words reserved for one realization (2^40 32-bit words).
const REALIZATION_WINDOW: u32 = 40;

/// # Panics
/// If `drop` needs more than 56 bits.
pub fn substream(seed: u64, purpose: Purpose, drop: u64, realization: u64) -> ChaCha8Rng {
    assert!(drop < (1u64 << DROP_BITS), "drop index out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << DROP_BITS) | drop);
    rng.set_word_pos(u128::from(realization) << REALIZATION_WINDOW);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn same_key_same_stream() {
        let a = substream(7, Purpose::Fading, 3, 11).next_u64();
        let b = substream(7, Purpose::Fading, 3, 11).next_u64();
        assert_eq!(a, b);
    }

    #[test]
    fn keys_are_separated() {
        let base = substream(7, Purpose::Fading, 3, 11).next_u64();
        assert_ne!(base, substream(8, Purpose::Fading, 3, 11).next_u64());
        assert_ne!(base, substream(7, Purpose::PathAngles, 3, 11).next_u64());
        assert_ne!(base, substream(7, Purpose::Fading, 4, 11).next_u64());
        assert_ne!(base, substream(7, Purpose::Fading, 3, 12).next_u64());
    }
}
