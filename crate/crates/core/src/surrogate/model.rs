use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{cholesky_with_jitter, FeaturePosterior, GpPosterior, History, KernelSpec, RffMap};
use crate::domain::Domain;
use crate::{Error, Result};

/// How a local Thompson-sampling function is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TsMode {
    /// Draw weights from the feature posterior with inflated covariance and
    /// evaluate φ(x)ᵀω over the grid.
    #[default]
    Rff,
    /// Draw the exact GP posterior jointly over the grid. Grids larger than
    /// `max_grid` are rejected.
    Exact { max_grid: usize },
}

/// Exploration multiplier β_t applied to the posterior standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BetaSchedule {
    Constant {
        value: f64,
    },
    /// β_t = B + σ·√(2(γ̂_{t−1} + 1 + ln(4/δ))) with γ̂_t = (ln(t+1))^{D+1}.
    Theory {
        rkhs_bound: f64,
        noise_std: f64,
        delta: f64,
        dims: usize,
    },
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule::Constant { value: 1.0 }
    }
}

impl BetaSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BetaSchedule::Constant { value } if value > 0.0 && value.is_finite() => Ok(()),
            BetaSchedule::Constant { value } => Err(Error::invalid(format!(
                "constant β must be positive, got {value}"
            ))),
            BetaSchedule::Theory {
                rkhs_bound,
                noise_std,
                delta,
                dims,
            } => {
                if rkhs_bound < 0.0 || noise_std < 0.0 || !(delta > 0.0 && delta < 1.0) || dims == 0
                {
                    Err(Error::invalid(
                        "theory β needs B ≥ 0, σ ≥ 0, δ in (0, 1) and D ≥ 1",
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Information-gain proxy for the SE kernel.
    pub fn gamma_hat(t: u32, dims: usize) -> f64 {
        ((t as f64) + 1.0).ln().powi(dims as i32 + 1)
    }

    pub fn beta(&self, t: u32) -> f64 {
        match *self {
            BetaSchedule::Constant { value } => value,
            BetaSchedule::Theory {
                rkhs_bound,
                noise_std,
                delta,
                dims,
            } => {
                let gamma = Self::gamma_hat(t.saturating_sub(1), dims);
                rkhs_bound + noise_std * (2.0 * (gamma + 1.0 + (4.0 / delta).ln())).sqrt()
            }
        }
    }
}

/// One agent's surrogate: its observation history plus the feature posterior
/// kept in sync with it.
#[derive(Debug, Clone)]
pub struct LocalModel {
    kernel: KernelSpec,
    lambda: f64,
    history: History,
    posterior: FeaturePosterior,
}

impl LocalModel {
    pub fn new(kernel: KernelSpec, rff: &RffMap, lambda: f64) -> Result<Self> {
        Ok(Self {
            kernel,
            lambda,
            history: History::new(),
            posterior: FeaturePosterior::prior(rff.len(), lambda)?,
        })
    }

    /// Records `(x, y)`; `phi` must be φ(x).
    pub fn observe(&mut self, x: &[f64], phi: &[f64], y: f64) {
        self.history.push(x, y);
        self.posterior.update(phi, y);
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn posterior(&self) -> &FeaturePosterior {
        &self.posterior
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// A fresh ω ~ N(ν, λΣ⁻¹) to send to the server.
    pub fn sample_omega<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        self.posterior.sample_omega(1.0, rng)
    }

    /// Samples a function from the posterior with variance inflated by β²
    /// and returns its values on every grid point.
    pub fn sample_ts_function<R: Rng + ?Sized>(
        &self,
        beta: f64,
        domain: &Domain,
        grid_features: &DMatrix<f64>,
        mode: TsMode,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if !(beta > 0.0) {
            return Err(Error::invalid(format!("β must be positive, got {beta}")));
        }
        match mode {
            TsMode::Rff => {
                let omega = self.posterior.sample_omega(beta, rng);
                Ok((grid_features * omega).as_slice().to_vec())
            }
            TsMode::Exact { max_grid } => {
                if domain.len() > max_grid {
                    return Err(Error::invalid(format!(
                        "exact Thompson sampling over {} points exceeds the cap of {max_grid}",
                        domain.len()
                    )));
                }
                let gp = GpPosterior::fit(&self.history, &self.kernel, self.lambda)?;
                sample_joint(&gp, beta, domain, self.kernel.signal_variance, rng)
            }
        }
    }
}

/// One joint draw from N(μ, β²Σ) over every grid point.
pub(crate) fn sample_joint<R: Rng + ?Sized>(
    gp: &GpPosterior,
    beta: f64,
    domain: &Domain,
    signal_variance: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let points: Vec<&[f64]> = domain.points().collect();
    let (mean, cov) = gp.joint(&points);
    let (chol, _) = cholesky_with_jitter(&(cov * (beta * beta)), 1e-10 * signal_variance)?;
    let n = points.len();
    let eps = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    Ok((mean + chol.l() * eps).as_slice().to_vec())
}
