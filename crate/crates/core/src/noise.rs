//! Counter-based Gaussian noise.
//!
//! Every draw is a pure function of `(seed, particle id, step index)`: the
//! ChaCha stream is selected by the particle id and the word position by the
//! step index, and each step consumes exactly two 64-bit words through a
//! Box–Muller transform. Results are therefore independent of how particles
//! are scheduled across workers.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::Vec2;

/// A pair of independent standard normal samples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseDraw {
    pub xi: Vec2,
}

impl NoiseDraw {
    pub const ZERO: NoiseDraw = NoiseDraw { xi: [0.0, 0.0] };

    pub fn new(xi: Vec2) -> Self {
        NoiseDraw { xi }
    }

    pub fn max_abs(&self) -> f64 {
        self.xi[0].abs().max(self.xi[1].abs())
    }
}

/// u32 words consumed per draw (two u64 values).
const WORDS_PER_DRAW: u128 = 4;

#[derive(Debug, Clone)]
pub struct NoiseStream {
    seed: u64,
    base: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        NoiseStream {
            seed,
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The draw used by particle `id` at step `step`.
    pub fn draw(&self, id: u64, step: u64) -> NoiseDraw {
        let mut rng = self.base.clone();
        rng.set_stream(id);
        rng.set_word_pos(step as u128 * WORDS_PER_DRAW);
        let a = rng.next_u64();
        let b = rng.next_u64();
        NoiseDraw { xi: box_muller(a, b) }
    }

    /// Draws for steps `first..first + count` of particle `id`, in order.
    pub fn draws(&self, id: u64, first: u64, count: usize) -> Vec<NoiseDraw> {
        let mut rng = self.base.clone();
        rng.set_stream(id);
        rng.set_word_pos(first as u128 * WORDS_PER_DRAW);
        (0..count)
            .map(|_| {
                let a = rng.next_u64();
                let b = rng.next_u64();
                NoiseDraw { xi: box_muller(a, b) }
            })
            .collect()
    }
}

/// Sums consecutive groups of `ratio` fine draws and rescales by `1/√ratio`,
/// giving coarse-step draws that share the same Brownian path.
pub fn coarsen(fine: &[NoiseDraw], ratio: usize) -> Vec<NoiseDraw> {
    assert!(ratio >= 1 && fine.len().is_multiple_of(ratio), "fine draws must split into groups of {ratio}");
    let s = 1.0 / (ratio as f64).sqrt();
    fine.chunks_exact(ratio)
        .map(|group| {
            let mut acc = [0.0, 0.0];
            for d in group {
                acc[0] += d.xi[0];
                acc[1] += d.xi[1];
            }
            NoiseDraw { xi: [s * acc[0], s * acc[1]] }
        })
        .collect()
}

#[inline]
fn box_muller(a: u64, b: u64) -> Vec2 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    // u1 in (0, 1], u2 in [0, 1)
    let u1 = ((a >> 11) as f64 + 1.0) * SCALE;
    let u2 = (b >> 11) as f64 * SCALE;
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    [r * c, r * s]
}
