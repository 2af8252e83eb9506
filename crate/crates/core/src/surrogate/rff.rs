use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::KernelSpec;
use crate::domain::Domain;
use crate::rng::{stream, Stream};
use crate::{Error, Result};

/// How frequencies are turned into features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureVariant {
    /// `M/2` frequencies, each contributing a cosine and a sine. The squared
    /// feature norm equals σ0² at every input.
    #[default]
    Paired,
    /// `M` frequencies with uniform random phases, `√(2/M)·cos(wᵀx + b)`.
    CosinePhase,
}

/// Everything needed to regenerate a feature map bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RffSpec {
    pub seed: u64,
    pub num_features: usize,
    pub dims: usize,
    pub lengthscale: f64,
    pub signal_variance: f64,
    #[serde(default)]
    pub variant: FeatureVariant,
}

/// Random Fourier feature map shared by every agent.
///
/// Serializes as its [`RffSpec`]; deserializing redraws the frequencies from
/// the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "RffSpec", try_from = "RffSpec")]
pub struct RffMap {
    spec: RffSpec,
    /// Row-major `rows × dims`.
    frequencies: Vec<f64>,
    /// Empty for the paired variant.
    phases: Vec<f64>,
    scale: f64,
}

impl From<RffMap> for RffSpec {
    fn from(m: RffMap) -> Self {
        m.spec
    }
}

impl TryFrom<RffSpec> for RffMap {
    type Error = Error;

    fn try_from(spec: RffSpec) -> Result<Self> {
        Self::from_spec(spec)
    }
}

impl RffMap {
    /// Draws `num_features` features for the SE kernel in `dims` dimensions.
    pub fn sample(
        kernel: &KernelSpec,
        num_features: usize,
        dims: usize,
        seed: u64,
        variant: FeatureVariant,
    ) -> Result<Self> {
        Self::from_spec(RffSpec {
            seed,
            num_features,
            dims,
            lengthscale: kernel.lengthscale,
            signal_variance: kernel.signal_variance,
            variant,
        })
    }

    pub fn from_spec(spec: RffSpec) -> Result<Self> {
        if spec.num_features < 2 || !spec.num_features.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "feature count must be even and at least 2, got {}",
                spec.num_features
            )));
        }
        if spec.dims == 0 {
            return Err(Error::invalid(
                "feature map needs at least one input dimension",
            ));
        }
        KernelSpec::new(spec.lengthscale, spec.signal_variance, 0.0)?;

        let mut rng = stream(spec.seed, Stream::Features, &[]);
        let rows = match spec.variant {
            FeatureVariant::Paired => spec.num_features / 2,
            FeatureVariant::CosinePhase => spec.num_features,
        };
        let frequencies = (0..rows * spec.dims)
            .map(|_| rng.sample::<f64, _>(StandardNormal) / spec.lengthscale)
            .collect();
        let (phases, scale) = match spec.variant {
            FeatureVariant::Paired => (Vec::new(), (1.0 / rows as f64).sqrt()),
            FeatureVariant::CosinePhase => (
                (0..rows)
                    .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
                    .collect(),
                (2.0 / rows as f64).sqrt(),
            ),
        };
        Ok(Self {
            spec,
            frequencies,
            phases,
            scale: scale * spec.signal_variance.sqrt(),
        })
    }

    pub fn spec(&self) -> &RffSpec {
        &self.spec
    }

    /// Feature dimension `M`.
    pub fn len(&self) -> usize {
        self.spec.num_features
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dims(&self) -> usize {
        self.spec.dims
    }

    fn projection(&self, row: usize, x: &[f64]) -> f64 {
        let w = &self.frequencies[row * self.spec.dims..(row + 1) * self.spec.dims];
        w.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Writes φ(x) into `out`, which must have length `M`.
    pub fn features_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.spec.dims);
        debug_assert_eq!(out.len(), self.spec.num_features);
        match self.spec.variant {
            FeatureVariant::Paired => {
                let half = self.spec.num_features / 2;
                for j in 0..half {
                    let (s, c) = self.projection(j, x).sin_cos();
                    out[j] = self.scale * c;
                    out[half + j] = self.scale * s;
                }
            }
            FeatureVariant::CosinePhase => {
                for (j, slot) in out.iter_mut().enumerate() {
                    *slot = self.scale * (self.projection(j, x) + self.phases[j]).cos();
                }
            }
        }
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.spec.num_features];
        self.features_into(x, &mut out);
        out
    }

    /// `|X| × M` matrix whose row `id` is φ of grid point `id`.
    pub fn feature_matrix(&self, domain: &Domain) -> DMatrix<f64> {
        let m = self.spec.num_features;
        let mut buf = vec![0.0; m];
        let mut out = DMatrix::zeros(domain.len(), m);
        for (id, x) in domain.points().enumerate() {
            self.features_into(x, &mut buf);
            for (j, &v) in buf.iter().enumerate() {
                out[(id, j)] = v;
            }
        }
        out
    }

    /// The approximated kernel φ(x)ᵀφ(y).
    pub fn approx_kernel(&self, x: &[f64], y: &[f64]) -> f64 {
        self.features(x)
            .iter()
            .zip(self.features(y))
            .map(|(a, b)| a * b)
            .sum()
    }
}
