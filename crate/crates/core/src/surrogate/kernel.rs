use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Isotropic squared-exponential kernel with observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub lengthscale: f64,
    /// σ0², the prior variance k(x, x). At most 1.
    #[serde(default = "one")]
    pub signal_variance: f64,
    /// σ², variance of the Gaussian observation noise.
    #[serde(default)]
    pub noise_variance: f64,
}

fn one() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn new(lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        let k = Self {
            lengthscale,
            signal_variance,
            noise_variance,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            return Err(Error::invalid(format!(
                "lengthscale must be positive, got {}",
                self.lengthscale
            )));
        }
        if !(self.signal_variance > 0.0 && self.signal_variance <= 1.0) {
            return Err(Error::invalid(format!(
                "signal variance must lie in (0, 1], got {}",
                self.signal_variance
            )));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance must be nonnegative, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        self.signal_variance * (-0.5 * sq / (self.lengthscale * self.lengthscale)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_is_signal_variance_and_symmetric() {
        let k = KernelSpec::new(0.2, 0.7, 0.01).unwrap();
        assert_eq!(k.eval(&[0.3], &[0.3]), 0.7);
        assert_eq!(
            k.eval(&[0.1, 0.4], &[0.9, 0.2]),
            k.eval(&[0.9, 0.2], &[0.1, 0.4])
        );
        let expected = 0.7 * (-0.5_f64 * 0.04 / 0.04).exp();
        assert!((k.eval(&[0.0], &[0.2]) - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(KernelSpec::new(0.0, 1.0, 0.0).is_err());
        assert!(KernelSpec::new(0.1, 1.5, 0.0).is_err());
        assert!(KernelSpec::new(0.1, 1.0, -1.0).is_err());
    }
}
