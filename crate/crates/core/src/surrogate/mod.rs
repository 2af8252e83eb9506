//! Gaussian-process surrogates for Thompson sampling.
//!
//! Two routes to the same posterior are kept side by side: the exact GP
//! posterior under the SE kernel ([`GpPosterior`]) and the Bayesian linear
//! model over shared random Fourier features ([`FeaturePosterior`]). Agents
//! run on the feature route, because the sampled weight vector is what they
//! send to the server; the exact route backs cross-checks and small-grid
//! exact Thompson sampling.

mod kernel;
mod linalg;
mod model;
mod posterior;
mod rff;

pub use kernel::KernelSpec;
pub use model::{BetaSchedule, LocalModel, TsMode};
pub use posterior::{FeaturePosterior, GpPosterior, History};
pub use rff::{FeatureVariant, RffMap, RffSpec};

pub(crate) use linalg::cholesky_with_jitter;
