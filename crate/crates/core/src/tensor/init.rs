use rand::Rng;

use super::{Real, Tensor};
use crate::{Error, Result};

/// Glorot-uniform initialization: entries uniform in `±sqrt(6 / (fan_in + fan_out))`.
///
/// For a `rows × cols` matrix `fan_in = rows`, `fan_out = cols`; a vector of
/// length `n` uses `fan_in = 1, fan_out = n`.
pub fn xavier_init<S: Real, R: Rng>(shape: &[usize], rng: &mut R) -> Result<Tensor<S>> {
    let (fan_in, fan_out) = match shape {
        [n] => (1, *n),
        [r, c] => (*r, *c),
        _ => {
            return Err(Error::Shape {
                op: "xavier_init",
                left: shape.to_vec(),
                right: vec![],
            })
        }
    };
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| S::of(rng.random_range(-bound..bound))).collect();
    Tensor::new(shape.to_vec(), data)
}
