//! Parameter initialization.

use rand::Rng;

use crate::scalar::{lit, Scalar};

/// Xavier-uniform weights for a `fan_in x fan_out` matrix.
pub fn xavier_uniform<T: Scalar, R: Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> Vec<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..fan_in * fan_out)
        .map(|_| lit::<T>((rng.random::<f64>() * 2.0 - 1.0) * limit))
        .collect()
}

/// Zero-initialized bias vector.
pub fn zeros<T: Scalar>(n: usize) -> Vec<T> {
    vec![T::zero(); n]
}
