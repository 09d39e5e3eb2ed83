//! Replayable random streams keyed by `(seed, replica)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BUF: usize = 256;

/// ChaCha8 keyed by `seed`, with the replica id as the stream number. The
/// output is a pure function of `(seed, replica, counter)`.
///
/// Words are pulled from the generator in blocks so that the simulator can
/// peek at the next word and decide afterwards whether to consume it.
#[derive(Clone)]
pub struct RngStream {
    seed: u64,
    replica: u64,
    rng: ChaCha8Rng,
    buf: [u32; BUF],
    pos: usize,
}

impl std::fmt::Debug for RngStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RngStream")
            .field("seed", &self.seed)
            .field("replica", &self.replica)
            .field("counter", &self.counter())
            .finish()
    }
}

impl RngStream {
    pub fn new(seed: u64, replica: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replica);
        Self { seed, replica, rng, buf: [0; BUF], pos: BUF }
    }

    /// Stream positioned at 32-bit word `counter`.
    pub fn at(seed: u64, replica: u64, counter: u128) -> Self {
        let mut s = Self::new(seed, replica);
        s.rng.set_word_pos(counter);
        s
    }

    #[inline]
    fn refill(&mut self) {
        self.rng.fill(&mut self.buf[..]);
        self.pos = 0;
    }

    /// The next word, without consuming it.
    #[inline]
    pub fn peek_u32(&mut self) -> u32 {
        if self.pos == BUF {
            self.refill();
        }
        self.buf[self.pos]
    }

    /// Consumes `k <= 1` peeked words.
    #[inline]
    pub fn advance(&mut self, k: usize) {
        self.pos += k;
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replica(&self) -> u64 {
        self.replica
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos() - (BUF - self.pos) as u128
    }

    #[inline]
    pub fn next_u32(&mut self) -> u32 {
        let w = self.peek_u32();
        self.pos += 1;
        w
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        let hi = (self.next_u32() as u64) << 32;
        let w = hi | self.next_u32() as u64;
        (w >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `0..n` (`n >= 1`).
    pub fn below(&mut self, n: usize) -> usize {
        (self.uniform() * n as f64) as usize
    }
}
