use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A named randomness stream.
///
/// Draws come from ChaCha8 keyed by `seed` with its 64-bit stream counter set
/// to `stream`, so a `(seed, stream)` pair yields the same sequence on every
/// platform. Parallel workers never share a stream: each takes a
/// [`substream`](RngStream::substream) of its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// The `index`-th child stream. Children of distinct parents are keyed
    /// differently, so nested fan-out never reuses a sequence.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream {
            seed: splitmix64(self.seed ^ splitmix64(self.stream.wrapping_add(0x5851_f42d_4c95_7f2d))),
            stream: index,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draws(s: RngStream, n: usize) -> Vec<u64> {
        let mut rng = s.rng();
        (0..n).map(|_| rng.random()).collect()
    }

    #[test]
    fn same_stream_same_sequence() {
        assert_eq!(draws(RngStream::new(7, 3), 16), draws(RngStream::new(7, 3), 16));
    }

    #[test]
    fn streams_and_children_differ() {
        let base = RngStream::new(7, 3);
        assert_ne!(draws(base, 4), draws(RngStream::new(7, 4), 4));
        assert_ne!(draws(base.substream(0), 4), draws(base.substream(1), 4));
        assert_ne!(draws(base.substream(0), 4), draws(RngStream::new(7, 4).substream(0), 4));
    }

    #[test]
    fn pinned_first_draw() {
        // Guards against an accidental change of generator.
        let mut a = RngStream::new(0, 0).rng();
        let mut b = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }
}
