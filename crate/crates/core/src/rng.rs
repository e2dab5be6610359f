//! Seeded random streams.
//!
//! Every stochastic consumer draws from its own ChaCha8 stream. A stream's
//! seed is the first 32 bytes of `SHA-256("alae-stream" || root_seed_le ||
//! name)`, so streams are independent of each other and of the order in
//! which they are created. Stream positions are saved in checkpoints.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use alae_autodiff::{Array, Float};

/// Parameter initialization.
pub const INIT: &str = "init";
/// Prior draws for the three training steps.
pub const PRIOR: &str = "prior";
/// Style-mixing decisions.
pub const MIXING: &str = "mixing";
/// Generator noise maps.
pub const NOISE: &str = "noise";
/// Data split and batch order.
pub const DATA: &str = "data";
/// Evaluation and artifact emission.
pub const EVAL: &str = "eval";

pub fn stream_seed(root: u64, name: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"alae-stream");
    h.update(root.to_le_bytes());
    h.update(name.as_bytes());
    h.finalize().into()
}

pub fn stream(root: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(stream_seed(root, name))
}

/// A 64-bit sub-seed derived the same way (used for seeding components
/// that take integer seeds, such as the batch iterator).
pub fn sub_seed(root: u64, name: &str) -> u64 {
    let s = stream_seed(root, name);
    u64::from_le_bytes(s[..8].try_into().unwrap())
}

/// The full set of training streams for one root seed.
#[derive(Clone, Debug)]
pub struct RngStreams {
    pub root: u64,
    pub init: ChaCha8Rng,
    pub prior: ChaCha8Rng,
    pub mixing: ChaCha8Rng,
    pub noise: ChaCha8Rng,
}

/// Initializes every training stream from one root seed.
pub fn seed_all(root: u64) -> RngStreams {
    RngStreams {
        root,
        init: stream(root, INIT),
        prior: stream(root, PRIOR),
        mixing: stream(root, MIXING),
        noise: stream(root, NOISE),
    }
}

/// Serializable position of a ChaCha stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamState {
    pub name: String,
    pub seed: [u8; 32],
    pub word_pos: u128,
}

impl StreamState {
    pub fn capture(name: &str, rng: &ChaCha8Rng) -> Self {
        StreamState {
            name: name.to_string(),
            seed: rng.get_seed(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

impl RngStreams {
    pub fn capture(&self) -> Vec<StreamState> {
        vec![
            StreamState::capture(INIT, &self.init),
            StreamState::capture(PRIOR, &self.prior),
            StreamState::capture(MIXING, &self.mixing),
            StreamState::capture(NOISE, &self.noise),
        ]
    }

    /// Rebuilds the streams from captured states; `None` when a stream is
    /// missing.
    pub fn restore(root: u64, states: &[StreamState]) -> Option<Self> {
        let find = |name: &str| states.iter().find(|s| s.name == name).map(StreamState::restore);
        Some(RngStreams {
            root,
            init: find(INIT)?,
            prior: find(PRIOR)?,
            mixing: find(MIXING)?,
            noise: find(NOISE)?,
        })
    }
}

/// Standard normal array of the given shape.
pub fn normal_array<T: Float>(shape: &[usize], rng: &mut ChaCha8Rng) -> Array<T> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            T::from_f64(v)
        })
        .collect();
    Array::from_vec(shape.to_vec(), data)
}
