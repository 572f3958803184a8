//! Seeded random streams. Every stochastic operation in the crate draws from
//! a [`SeededRng`], so identical seeds give bit-identical results on every
//! platform.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::tensor::{Real, Tensor};

#[derive(Clone, Debug)]
pub struct SeededRng(ChaCha8Rng);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// A stream keyed by `(seed, stream)`, independent of other stream ids.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self(rng)
    }

    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    pub fn normal_tensor<T: Real>(&mut self, shape: &[usize]) -> Tensor<T> {
        Tensor::from_fn(shape, |_| T::cst(self.normal()))
    }

    /// Normal draws scaled by `std`.
    pub fn normal_tensor_std<T: Real>(&mut self, shape: &[usize], std: f64) -> Tensor<T> {
        Tensor::from_fn(shape, |_| T::cst(std * self.normal()))
    }

    pub fn uniform_tensor<T: Real>(&mut self, shape: &[usize], lo: f64, hi: f64) -> Tensor<T> {
        Tensor::from_fn(shape, |_| T::cst(lo + (hi - lo) * self.uniform()))
    }

    pub fn shuffle<V>(&mut self, items: &mut [V]) {
        items.shuffle(&mut self.0);
    }
}
