//! Counter-based random streams.
//!
//! A stream is the ChaCha8 keystream keyed by `(seed, trajectory)` with a
//! 64-bit stream id built from a channel tag and an optional mode key.
//! Streams are independent of the order in which they are opened, so two
//! runs that ask for the same `(seed, trajectory, channel, mode)` see the
//! same numbers regardless of cutoff, step size or thread schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::basis::WaveVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Channel {
    Wiener = 1,
    JumpTimes = 2,
    Marks = 3,
    /// Brownian bridge refinements inside steps split by a jump.
    Bridge = 4,
    /// Corpora and initial data used by property suites.
    Auxiliary = 5,
}

/// Identifies a stream family: one per trajectory of one experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub trajectory: u64,
}

impl StreamKey {
    pub fn new(seed: u64, trajectory: u64) -> Self {
        Self { seed, trajectory }
    }

    pub fn stream(&self, channel: Channel, mode: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.trajectory.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(((channel as u64) << 56) | (mode & MODE_MASK));
        rng
    }
}

const MODE_MASK: u64 = (1 << 56) - 1;

/// Stable key for one real Wiener coordinate: wavevector components,
/// polarization slot and cosine/sine part.
pub fn mode_key(k: &WaveVector, pol: usize, part: usize) -> u64 {
    let mut key = 0u64;
    for c in k.0 {
        key = (key << 8) | ((c + 128) as u64 & 0xff);
    }
    (key << 2) | ((pol as u64 & 1) << 1) | (part as u64 & 1)
}
