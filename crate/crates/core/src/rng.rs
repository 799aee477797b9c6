//! Deterministic random-number substreams.
//!
//! Every stochastic quantity in the simulator is drawn from a substream
//! derived from one master 64-bit seed plus a purpose tag and up to two
//! indices. Substreams are independent ChaCha streams, so Monte-Carlo
//! trials can run in parallel without sharing generator state.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// What a substream is used for. Each purpose gets statistically
/// independent draws even at the same indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Source information bits for one frame.
    Bits,
    /// Per-frame channel realization.
    ChannelDraw,
    /// One channel realization shared by a whole training run.
    StaticChannel,
    /// Additive receiver noise.
    Noise,
    /// Channel-estimation error.
    CsirError,
    /// Per-record SNR selection during dataset generation.
    SnrDraw,
    /// Epoch shuffling of training records.
    Shuffle,
    /// Network weight initialization.
    WeightInit,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Bits => 1,
            Purpose::ChannelDraw => 2,
            Purpose::StaticChannel => 3,
            Purpose::Noise => 4,
            Purpose::CsirError => 5,
            Purpose::SnrDraw => 6,
            Purpose::Shuffle => 7,
            Purpose::WeightInit => 8,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the substream identified by `(seed, purpose, a, b)`.
pub fn substream(seed: u64, purpose: Purpose, a: u64, b: u64) -> ChaCha12Rng {
    let mut state = seed;
    splitmix64(&mut state);
    for v in [purpose.tag(), a, b] {
        state ^= v.wrapping_mul(0xd134_2543_de82_ef95);
        splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        let mixed = splitmix64(&mut state);
        chunk.copy_from_slice(&mixed.to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// One pair of independent standard normals via the Marsaglia polar method.
pub fn standard_normal_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    loop {
        let u = 2.0 * rng.gen::<f64>() - 1.0;
        let v = 2.0 * rng.gen::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            let f = (-2.0 * s.ln() / s).sqrt();
            return (u * f, v * f);
        }
    }
}

/// Circularly-symmetric complex Gaussian with E|z|^2 = `variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let (a, b) = standard_normal_pair(rng);
    let scale = (variance / 2.0).sqrt();
    Complex64::new(a * scale, b * scale)
}
