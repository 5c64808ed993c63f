//! Counter-based random number streams.
//!
//! Every random draw in the crate comes from a [`RngStream`]: a ChaCha8
//! generator addressed by `(seed, stream id, word position)`. Stream ids
//! are derived deterministically from a path of integer tags (step index,
//! phase, particle index, ...), so any unit of work can be handed its own
//! independent stream. Work split across threads draws from the same
//! per-particle streams it would use serially, which is what makes
//! single-threaded and multi-threaded runs bit-identical.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal, StandardUniform, StudentT};

/// Phase tags used when deriving per-task streams. Kept in one place so
/// no two call sites can collide on the same path.
pub mod tag {
    /// Sampling the initial particle cloud.
    pub const INIT: u64 = 0x01;
    /// Resampling decisions (one stream per step, shared by all particles).
    pub const RESAMPLE: u64 = 0x02;
    /// Proposal noise in the final filtering pass (per particle).
    pub const PROPOSE: u64 = 0x03;
    /// Ancestor draws inside the gradient loop (per SGD iteration).
    pub const SGD_ANCESTOR: u64 = 0x04;
    /// Reparameterisation noise inside the gradient loop (per iteration, per particle).
    pub const SGD_EPS: u64 = 0x05;
    /// Data generation.
    pub const SIMULATE: u64 = 0x06;
    /// Monte Carlo reference computations in tests/diagnostics.
    pub const MONTE_CARLO: u64 = 0x07;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a path of tags into a single stream id.
pub fn stream_id(path: &[u64]) -> u64 {
    let mut acc = 0x5851_F42D_4C95_7F2Du64;
    for &p in path {
        acc = splitmix64(acc ^ splitmix64(p));
    }
    acc
}

/// A seekable random stream: ChaCha8 keyed by `seed`, on channel `stream`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    /// Root stream for a run.
    pub fn root(seed: u64) -> Self {
        RngStream::new(seed, 0)
    }

    /// A fresh stream under the same seed, addressed by `path` relative to
    /// this stream's id. Derivation is pure: it does not consume from or
    /// advance `self`.
    pub fn derive(&self, path: &[u64]) -> RngStream {
        let mut full = Vec::with_capacity(path.len() + 1);
        full.push(self.stream);
        full.extend_from_slice(path);
        RngStream::new(self.seed, stream_id(&full))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Current position in 32-bit words since the start of the stream.
    pub fn word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Rewinds or fast-forwards to an absolute word position.
    pub fn set_word_pos(&mut self, pos: u128) {
        self.rng.set_word_pos(pos);
    }

    /// Uniform draw in [0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        StandardUniform.sample(&mut self.rng)
    }

    /// Standard normal draw.
    pub fn next_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = self.next_normal();
        }
    }

    /// Student-t draw with `dof` degrees of freedom (unit scale).
    pub fn next_student_t(&mut self, dof: f64) -> f64 {
        StudentT::new(dof).expect("dof > 0").sample(&mut self.rng)
    }

    /// Poisson draw with the given rate.
    pub fn next_poisson(&mut self, rate: f64) -> u64 {
        let x: f64 = Poisson::new(rate).expect("rate > 0").sample(&mut self.rng);
        x as u64
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}
