//! Counter-based random streams.
//!
//! Every trial draws from its own ChaCha8 stream addressed by
//! `(seed, trial)`, so a trial's randomness does not depend on which other
//! trials ran, in which order, or on which thread.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random stream of one trial.
#[derive(Clone, Debug)]
pub struct TrialRng {
    inner: ChaCha8Rng,
    seed: u64,
    trial: u64,
}

impl TrialRng {
    pub fn new(seed: u64, trial: u64) -> Self {
        StreamFactory::new(seed).trial(trial)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trial(&self) -> u64 {
        self.trial
    }
}

impl RngCore for TrialRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// Keyed generator that hands out per-trial streams without re-running the
/// key schedule.
#[derive(Clone, Debug)]
pub struct StreamFactory {
    base: ChaCha8Rng,
    seed: u64,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trial(&self, trial: u64) -> TrialRng {
        let mut inner = self.base.clone();
        inner.set_stream(trial);
        inner.set_word_pos(0);
        TrialRng {
            inner,
            seed: self.seed,
            trial,
        }
    }
}

/// Derives an independent seed for a named sub-experiment (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, domain: u64) -> u64 {
    let mut z = seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
