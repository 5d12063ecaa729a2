//! Counter-addressed random streams.
//!
//! Every random draw in the crate is addressed by `(key, stream, index)`:
//! the key comes from a master seed (optionally refined with [`CounterRng::derive`]),
//! the stream selects a ChaCha8 stream id and the index selects a fixed
//! four-word slot inside that stream. A draw therefore does not depend on
//! generation order or thread count, which is what makes parallel probe and
//! noise generation bit-reproducible.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS_PER_SLOT: u128 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self {
            key: splitmix64(seed),
        }
    }

    /// Child generator whose streams are independent of the parent's.
    pub fn derive(&self, tag: u64) -> Self {
        Self {
            key: splitmix64(self.key ^ splitmix64(tag.wrapping_add(0x5bd1_e995))),
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Sequential cursor over `stream`, positioned at slot `start`.
    pub fn cursor(&self, stream: u64, start: u64) -> Cursor {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(stream);
        rng.set_word_pos(start as u128 * WORDS_PER_SLOT);
        Cursor { rng }
    }

    pub fn complex_normal(&self, stream: u64, index: u64) -> Complex64 {
        self.cursor(stream, index).complex_normal()
    }

    pub fn phase(&self, stream: u64, index: u64) -> Complex64 {
        self.cursor(stream, index).phase()
    }

    pub fn uniform(&self, stream: u64, index: u64) -> f64 {
        self.cursor(stream, index).uniform()
    }
}

/// Reads consecutive four-word slots of one ChaCha8 stream.
pub struct Cursor {
    rng: ChaCha8Rng,
}

impl Cursor {
    fn slot(&mut self) -> (u64, u64) {
        (self.rng.next_u64(), self.rng.next_u64())
    }

    /// Circular complex normal with unit variance (re, im each N(0, 1/2)).
    pub fn complex_normal(&mut self) -> Complex64 {
        let (a, b) = self.slot();
        let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let r = (-u1.ln()).sqrt();
        Complex64::from_polar(r, TAU * u2)
    }

    /// Unit-modulus sample with phase uniform on [0, 2π).
    pub fn phase(&mut self) -> Complex64 {
        let (_, b) = self.slot();
        let u = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let (s, c) = (TAU * u).sin_cos();
        Complex64::new(c, s)
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        let (a, _) = self.slot();
        (a >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard real normal (the real part of a unit complex normal, rescaled).
    pub fn normal(&mut self) -> f64 {
        self.complex_normal().re * std::f64::consts::SQRT_2
    }
}
