//! Salt-and-pepper corruption of binary vectors.
//!
//! Each bit is flipped independently with probability `sigma`: the corrupted
//! vector is `(x + e) mod 2` with `e_i ~ Bernoulli(sigma)` i.i.d.

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;

/// Noise level plus the seed that makes its application reproducible.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        validate_sigma(sigma)?;
        Ok(NoiseSpec { sigma, seed })
    }

    pub fn apply(&self, x: &BitVector) -> BitVector {
        let mut rng = rng::seeded(self.seed);
        // spec construction guarantees sigma is valid
        apply_noise(x, self.sigma, &mut rng).expect("validated sigma")
    }
}

pub(crate) fn validate_sigma(sigma: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&sigma) || !sigma.is_finite() {
        return Err(Error::invalid(format!(
            "noise level {sigma} outside [0, 0.5]"
        )));
    }
    Ok(())
}

/// Flip each bit of `x` independently with probability `sigma`.
pub fn apply_noise(x: &BitVector, sigma: f64, rng: &mut impl Rng) -> Result<BitVector> {
    validate_sigma(sigma)?;
    BitVector::new(
        x.iter()
            .map(|&b| if rng.gen_bool(sigma) { 1 - b } else { b })
            .collect(),
    )
}
