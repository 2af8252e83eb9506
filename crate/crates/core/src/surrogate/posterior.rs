use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{KernelSpec, RffMap};
use crate::{Error, Result};

/// Append-only record of queried inputs and their noisy outputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: &[f64], y: f64) {
        self.inputs.push(x.to_vec());
        self.outputs.push(y);
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "regularizer λ must be positive, got {lambda}"
        )))
    }
}

/// Exact GP posterior with regularizer λ:
///
/// μ(x) = k(x)ᵀ(K + λI)⁻¹y,  σ²(x, x') = k(x, x') − k(x)ᵀ(K + λI)⁻¹k(x').
#[derive(Debug, Clone)]
pub struct GpPosterior<K = KernelSpec> {
    kernel: K,
    inputs: Vec<Vec<f64>>,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
}

/// Anything that can act as a covariance function.
pub trait Covariance {
    fn cov(&self, x: &[f64], y: &[f64]) -> f64;
}

impl Covariance for KernelSpec {
    fn cov(&self, x: &[f64], y: &[f64]) -> f64 {
        self.eval(x, y)
    }
}

impl Covariance for RffMap {
    fn cov(&self, x: &[f64], y: &[f64]) -> f64 {
        self.approx_kernel(x, y)
    }
}

impl<K: Covariance + Clone> GpPosterior<K> {
    pub fn fit(history: &History, kernel: &K, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let n = history.len();
        let inputs = history.inputs().to_vec();
        if n == 0 {
            return Ok(Self {
                kernel: kernel.clone(),
                inputs,
                chol: None,
                alpha: DVector::zeros(0),
            });
        }
        let gram = DMatrix::from_fn(n, n, |i, j| {
            kernel.cov(&inputs[i], &inputs[j]) + if i == j { lambda } else { 0.0 }
        });
        let chol = Cholesky::new(gram)
            .ok_or_else(|| Error::Numeric("K + λI is not positive definite".to_string()))?;
        let alpha = chol.solve(&DVector::from_column_slice(history.outputs()));
        Ok(Self {
            kernel: kernel.clone(),
            inputs,
            chol: Some(chol),
            alpha,
        })
    }

    fn cross(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.inputs.len(),
            self.inputs.iter().map(|xi| self.kernel.cov(x, xi)),
        )
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        if self.inputs.is_empty() {
            return 0.0;
        }
        self.cross(x).dot(&self.alpha)
    }

    pub fn covariance(&self, x: &[f64], y: &[f64]) -> f64 {
        let prior = self.kernel.cov(x, y);
        match &self.chol {
            None => prior,
            Some(c) => {
                let kx = self.cross(x);
                let ky = self.cross(y);
                prior - kx.dot(&c.solve(&ky))
            }
        }
    }

    pub fn variance(&self, x: &[f64]) -> f64 {
        self.covariance(x, x).max(0.0)
    }

    /// Posterior mean vector and covariance matrix over a set of points.
    pub fn joint(&self, points: &[&[f64]]) -> (DVector<f64>, DMatrix<f64>) {
        let m = points.len();
        let mean = DVector::from_iterator(m, points.iter().map(|x| self.mean(x)));
        let mut cov = DMatrix::from_fn(m, m, |i, j| self.kernel.cov(points[i], points[j]));
        if let Some(c) = &self.chol {
            let n = self.inputs.len();
            let cross = DMatrix::from_fn(n, m, |i, j| self.kernel.cov(&self.inputs[i], points[j]));
            let v = c
                .l()
                .solve_lower_triangular(&cross)
                .expect("Cholesky factor is nonsingular");
            cov -= v.transpose() * v;
        }
        (mean, cov)
    }
}

/// Bayesian linear model over random Fourier features:
///
/// Σ = ΦᵀΦ + λI,  ν = Σ⁻¹Φᵀy,  weights ~ N(ν, λΣ⁻¹).
///
/// Σ is held as its Cholesky factor and updated in place (rank one) as
/// observations arrive.
#[derive(Debug, Clone)]
pub struct FeaturePosterior {
    lambda: f64,
    chol: Cholesky<f64, Dyn>,
    phi_t_y: DVector<f64>,
    nu: DVector<f64>,
    observations: usize,
}

impl FeaturePosterior {
    /// Prior: Σ = λI, ν = 0.
    pub fn prior(num_features: usize, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let chol = Cholesky::new(DMatrix::from_diagonal_element(
            num_features,
            num_features,
            lambda,
        ))
        .expect("λI is positive definite");
        Ok(Self {
            lambda,
            chol,
            phi_t_y: DVector::zeros(num_features),
            nu: DVector::zeros(num_features),
            observations: 0,
        })
    }

    /// Batch fit from a full history.
    pub fn fit(history: &History, rff: &RffMap, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let m = rff.len();
        let mut sigma = DMatrix::from_diagonal_element(m, m, lambda);
        let mut phi_t_y = DVector::zeros(m);
        let mut phi = DVector::zeros(m);
        for (x, &y) in history.inputs().iter().zip(history.outputs()) {
            rff.features_into(x, phi.as_mut_slice());
            sigma.ger(1.0, &phi, &phi, 1.0);
            phi_t_y.axpy(y, &phi, 1.0);
        }
        let chol = Cholesky::new(sigma)
            .ok_or_else(|| Error::Numeric("ΦᵀΦ + λI is not positive definite".to_string()))?;
        let nu = chol.solve(&phi_t_y);
        Ok(Self {
            lambda,
            chol,
            phi_t_y,
            nu,
            observations: history.len(),
        })
    }

    /// Adds one observation with features `phi` and output `y`.
    pub fn update(&mut self, phi: &[f64], y: f64) {
        let v = DVector::from_column_slice(phi);
        self.chol.rank_one_update(&v, 1.0);
        self.phi_t_y.axpy(y, &v, 1.0);
        self.nu = self.chol.solve(&self.phi_t_y);
        self.observations += 1;
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn num_features(&self) -> usize {
        self.nu.len()
    }

    pub fn observations(&self) -> usize {
        self.observations
    }

    pub fn nu(&self) -> &DVector<f64> {
        &self.nu
    }

    /// Σ reconstructed from its factor.
    pub fn precision(&self) -> DMatrix<f64> {
        let l = self.chol.l();
        &l * l.transpose()
    }

    /// Weight covariance λΣ⁻¹.
    pub fn weight_covariance(&self) -> DMatrix<f64> {
        self.chol.inverse() * self.lambda
    }

    pub fn mean(&self, phi: &[f64]) -> f64 {
        self.nu.iter().zip(phi).map(|(a, b)| a * b).sum()
    }

    /// λ·φᵀΣ⁻¹φ.
    pub fn variance(&self, phi: &[f64]) -> f64 {
        let v = DVector::from_column_slice(phi);
        self.lambda * v.dot(&self.chol.solve(&v))
    }

    /// Draws ω ~ N(ν, scale²·λΣ⁻¹). `scale = 0` returns ν exactly.
    pub fn sample_omega<R: Rng + ?Sized>(&self, scale: f64, rng: &mut R) -> DVector<f64> {
        let m = self.nu.len();
        let eps = DVector::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
        if scale == 0.0 {
            return self.nu.clone();
        }
        // Σ = LLᵀ, so L⁻ᵀε has covariance Σ⁻¹.
        let z = self
            .chol
            .l_dirty()
            .tr_solve_lower_triangular(&eps)
            .expect("Cholesky factor is nonsingular");
        &self.nu + z * (scale * self.lambda.sqrt())
    }
}
