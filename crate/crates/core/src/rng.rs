//! Counter-based random streams.
//!
//! Every random decision in the simulator is addressed by a key
//! `(seed, round, stream, purpose)`. The `i`-th word of a stream is a pure
//! function of the key and `i`, so decisions for different edges of the same
//! round can be drawn in any order (or in parallel) with identical results.
//!
//! The word function is the SplitMix64 output mix applied to
//! `key + i * GOLDEN_GAMMA`, i.e. a SplitMix64 sequence whose starting state
//! is derived from the key.

use rand::RngCore;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// What a stream is used for. Distinct purposes never share words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    /// Orientation of a matched edge (who receives the ceiling).
    Orientation = 1,
    /// Sibling swaps of the height-sensitive shuffling step.
    Shuffle = 2,
    /// Node proposals of the random matching scheme.
    Proposal = 3,
    /// Edge pick of the asynchronous model.
    AsyncEdge = 4,
    /// Per-trial seed derivation.
    Trial = 5,
    /// Schedule seed derivation.
    Schedule = 6,
}

#[inline(always)]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds the key components into a single 64-bit stream origin.
#[inline]
pub fn stream_origin(seed: u64, round: u64, stream: u64, purpose: Purpose) -> u64 {
    let mut h = mix64(seed ^ 0x6A09_E667_F3BC_C909);
    h = mix64(h ^ round.wrapping_mul(GOLDEN_GAMMA));
    h = mix64(h ^ stream.wrapping_add(0x3C6E_F372_FE94_F82B));
    mix64(h ^ (purpose as u64).wrapping_mul(0xA54F_F53A_5F1D_36F1))
}

/// Derives an independent 64-bit seed, e.g. one per trial.
pub fn derive_seed(seed: u64, index: u64, purpose: Purpose) -> u64 {
    stream_origin(seed, index, 0, purpose)
}

/// Canonical stream id for the edge `{u, v}` with `u < v`.
#[inline(always)]
pub fn edge_stream(u: usize, v: usize) -> u64 {
    debug_assert!(u < v);
    ((u as u64) << 32) | v as u64
}

/// Random stream addressed by `(seed, round, stream, purpose)`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    origin: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, round: u64, stream: u64, purpose: Purpose) -> Self {
        Self {
            origin: stream_origin(seed, round, stream, purpose),
            counter: 0,
        }
    }

    /// The `index`-th word of this stream, independent of the cursor.
    #[inline(always)]
    pub fn word(&self, index: u64) -> u64 {
        mix64(
            self.origin
                .wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)),
        )
    }

    #[inline(always)]
    pub fn next_word(&mut self) -> u64 {
        let w = self.word(self.counter);
        self.counter += 1;
        w
    }

    /// A fair coin.
    #[inline(always)]
    pub fn coin(&mut self) -> bool {
        self.next_word() >> 63 == 1
    }

    /// Uniform integer in `0..bound` by Lemire's multiply-shift with rejection.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let m = (self.next_word() as u128) * (bound as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Cursor over the individual bits of this stream.
    pub fn bits(self) -> BitStream {
        BitStream {
            rng: self,
            buffer: 0,
            left: 0,
        }
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_word() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_word()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let w = self.next_word().to_le_bytes();
            chunk.copy_from_slice(&w[..chunk.len()]);
        }
    }
}

/// Fair bits consumed one at a time from a [`CounterRng`].
#[derive(Debug, Clone)]
pub struct BitStream {
    rng: CounterRng,
    buffer: u64,
    left: u32,
}

impl BitStream {
    #[inline(always)]
    pub fn bit(&mut self) -> bool {
        if self.left == 0 {
            self.buffer = self.rng.next_word();
            self.left = 64;
        }
        let b = self.buffer & 1 == 1;
        self.buffer >>= 1;
        self.left -= 1;
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_are_random_access() {
        let mut a = CounterRng::new(7, 3, 11, Purpose::Shuffle);
        let b = CounterRng::new(7, 3, 11, Purpose::Shuffle);
        for i in 0..16 {
            assert_eq!(a.next_word(), b.word(i));
        }
    }

    #[test]
    fn keys_separate_streams() {
        let base = CounterRng::new(1, 2, 3, Purpose::Orientation).word(0);
        assert_ne!(base, CounterRng::new(2, 2, 3, Purpose::Orientation).word(0));
        assert_ne!(base, CounterRng::new(1, 3, 3, Purpose::Orientation).word(0));
        assert_ne!(base, CounterRng::new(1, 2, 4, Purpose::Orientation).word(0));
        assert_ne!(base, CounterRng::new(1, 2, 3, Purpose::Shuffle).word(0));
    }

    #[test]
    fn coin_is_roughly_fair() {
        let mut heads = 0u32;
        let trials = 200_000u32;
        for r in 0..trials {
            if CounterRng::new(42, r as u64, 0, Purpose::Orientation).coin() {
                heads += 1;
            }
        }
        let p = heads as f64 / trials as f64;
        // 5 sigma of a fair coin at this sample size
        assert!(
            (p - 0.5).abs() < 5.0 * (0.25 / trials as f64).sqrt(),
            "p = {p}"
        );
    }

    #[test]
    fn below_stays_in_range_and_covers_it() {
        let mut rng = CounterRng::new(9, 0, 0, Purpose::Proposal);
        let mut seen = [0u32; 7];
        for _ in 0..7_000 {
            let x = rng.below(7) as usize;
            seen[x] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800), "{seen:?}");
    }

    #[test]
    fn bit_stream_uses_all_bits() {
        let rng = CounterRng::new(5, 5, 5, Purpose::Shuffle);
        let w = rng.word(0);
        let mut bits = rng.bits();
        for i in 0..64 {
            assert_eq!(bits.bit(), (w >> i) & 1 == 1);
        }
    }
}
