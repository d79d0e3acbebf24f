//! Named random substreams derived from a single master seed.
//!
//! Each consumer of randomness (population init, projection, per-individual mutation noise,
//! per-individual episode seeds) draws from its own generator, so results do not depend on
//! the order in which individuals are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Init,
    Projection,
    Mutation { step: usize, index: usize },
    Episode { step: usize, index: usize },
    Run { index: usize },
    LandscapeScale,
}

impl Stream {
    fn words(self) -> (u64, u64, u64) {
        match self {
            Stream::Init => (1, 0, 0),
            Stream::Projection => (2, 0, 0),
            Stream::Mutation { step, index } => (3, step as u64, index as u64),
            Stream::Episode { step, index } => (4, step as u64, index as u64),
            Stream::Run { index } => (5, index as u64, 0),
            Stream::LandscapeScale => (6, 0, 0),
        }
    }

    /// Human-readable label stored in traces.
    pub fn label(self) -> String {
        match self {
            Stream::Init => "init".into(),
            Stream::Projection => "projection".into(),
            Stream::Mutation { step, index } => format!("mutation[{step}][{index}]"),
            Stream::Episode { step, index } => format!("episodes[{step}][{index}]"),
            Stream::Run { index } => format!("run[{index}]"),
            Stream::LandscapeScale => "landscape_scale".into(),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the named substream.
pub fn substream_seed(master: u64, stream: Stream) -> u64 {
    let (tag, a, b) = stream.words();
    let mut h = splitmix64(master);
    h = splitmix64(h ^ tag);
    h = splitmix64(h ^ a);
    splitmix64(h ^ b)
}

pub fn stream_rng(master: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master, stream))
}
