//! Counter-based random streams.
//!
//! Every stream is a ChaCha12 keystream. The key is derived from the run seed
//! and a purpose tag; the worker id selects the 64-bit ChaCha stream. Draw
//! `n` of stream `(seed, worker, purpose)` is therefore a fixed function of
//! those four values, independent of thread scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// What a stream is used for. Distinct purposes get distinct keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Per-worker minibatch sampling.
    Sampling,
    /// Synthetic dataset or problem generation.
    Dataset,
    /// Probe points for constant estimation.
    Probe,
    Other(u64),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Sampling => 0x5341_4d50,
            Purpose::Dataset => 0x4441_5441,
            Purpose::Probe => 0x5052_4f42,
            Purpose::Other(t) => t ^ 0x4f54_4852_0000_0000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub seed: u64,
    pub worker: u64,
    pub purpose: Purpose,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A replayable random stream identified by `(seed, worker, purpose)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    id: StreamId,
    inner: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, worker: u64, purpose: Purpose) -> Self {
        let id = StreamId { seed, worker, purpose };
        let mut state = seed ^ purpose.tag().rotate_left(17);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut inner = ChaCha12Rng::from_seed(key);
        inner.set_stream(worker);
        RngStream { id, inner }
    }

    pub fn id(&self) -> StreamId {
        self.id
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Restarts the stream from its first draw.
    pub fn rewind(&mut self) {
        *self = RngStream::new(self.id.seed, self.id.worker, self.id.purpose);
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
