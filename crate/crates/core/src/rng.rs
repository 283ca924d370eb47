//! Seeded randomness.
//!
//! Every random draw in the crate goes through an explicit `SimRng`. Parallel
//! work derives one child stream per task with [`split`]: the child is the
//! ChaCha8 generator seeded from the root seed with its stream id set to
//! `index + 1`. Stream 0 is reserved for the root itself, so children never
//! alias the parent sequence and results do not depend on scheduling order.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMat, CVec};

pub type SimRng = ChaCha8Rng;

pub fn from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent child stream `index` of `root`.
pub fn split(root: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(index.wrapping_add(1));
    rng
}

/// Derives a fresh 64-bit seed from a generator.
pub fn next_seed<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    rng.random()
}

/// One draw from CN(0, 1).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    // row-major fill so the draw order matches the dataset layout
    let mut m = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = complex_gaussian(rng);
        }
    }
    m
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVec {
    CVec::from_fn(len, |_, _| complex_gaussian(rng))
}

/// Uniform phases on `[0, 2π)` as unit-modulus entries.
pub fn random_phases<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVec {
    CVec::from_fn(len, |_, _| {
        let phi = rng.random::<f64>() * std::f64::consts::TAU;
        C64::from_polar(1.0, phi)
    })
}
