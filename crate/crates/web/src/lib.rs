//! Browser bindings for three small pieces of the library: the privacy-loss
//! curve, a one-dimensional posterior draw and the sub-region weight
//! schedule. Every export returns a flat `Float64Array`.

use dpfts::accountant::{delta_default, PrivacyLedger, DEFAULT_MAX_ORDER};
use dpfts::domain::{Assignment, Domain};
use dpfts::rng::{derive_seed, stream, Stream};
use dpfts::surrogate::{FeatureVariant, KernelSpec, LocalModel, RffMap, TsMode};
use dpfts::weights::{WeightMode, WeightSchedule};
use wasm_bindgen::prelude::*;

fn js_err(e: dpfts::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// ε after each of rounds `1..=rounds`, with δ = N^(−1.1).
pub fn epsilon_curve(q: f64, z: f64, agents: usize, rounds: u32) -> dpfts::Result<Vec<f64>> {
    let mut ledger = PrivacyLedger::new(q, z, delta_default(agents), DEFAULT_MAX_ORDER)?;
    Ok((0..rounds)
        .map(|_| {
            ledger.record_round();
            ledger.epsilon()
        })
        .collect())
}

#[wasm_bindgen(js_name = privacyCurve)]
pub fn privacy_curve(q: f64, z: f64, agents: usize, rounds: u32) -> Result<Vec<f64>, JsError> {
    epsilon_curve(q, z, agents, rounds).map_err(js_err)
}

/// Posterior on `points` grid points of [0, 1] from observations `(xs, ys)`.
/// Returns four consecutive blocks: mean, mean − 2σ, mean + 2σ and one
/// Thompson sample.
#[allow(clippy::too_many_arguments)]
pub fn posterior_bands(
    xs: &[f64],
    ys: &[f64],
    points: usize,
    lengthscale: f64,
    features: usize,
    noise: f64,
    beta: f64,
    seed: u64,
) -> dpfts::Result<Vec<f64>> {
    if xs.len() != ys.len() {
        return Err(dpfts::Error::InvalidArgument(
            "xs and ys must have the same length".into(),
        ));
    }
    let kernel = KernelSpec::new(lengthscale, 1.0, noise)?;
    let rff = RffMap::sample(
        &kernel,
        features,
        1,
        derive_seed(seed, Stream::Features, &[]),
        FeatureVariant::Paired,
    )?;
    let domain = Domain::unit_interval(points)?;
    let mut model = LocalModel::new(kernel, &rff, noise.max(1e-6))?;
    for (&x, &y) in xs.iter().zip(ys) {
        model.observe(&[x], &rff.features(&[x]), y);
    }
    let mut out = Vec::with_capacity(4 * points);
    let post = model.posterior();
    let phis: Vec<Vec<f64>> = domain.points().map(|p| rff.features(p)).collect();
    let mean: Vec<f64> = phis.iter().map(|p| post.mean(p)).collect();
    let sd: Vec<f64> = phis
        .iter()
        .map(|p| post.variance(p).max(0.0).sqrt())
        .collect();
    out.extend(&mean);
    out.extend(mean.iter().zip(&sd).map(|(m, s)| m - 2.0 * s));
    out.extend(mean.iter().zip(&sd).map(|(m, s)| m + 2.0 * s));
    let g = rff.feature_matrix(&domain);
    let mut rng = stream(seed, Stream::Agent, &[0]);
    out.extend(model.sample_ts_function(beta, &domain, &g, TsMode::Rff, &mut rng)?);
    Ok(out)
}

#[wasm_bindgen(js_name = posteriorSample)]
#[allow(clippy::too_many_arguments)]
pub fn posterior_sample(
    xs: Vec<f64>,
    ys: Vec<f64>,
    points: usize,
    lengthscale: f64,
    features: usize,
    noise: f64,
    beta: f64,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    posterior_bands(
        &xs,
        &ys,
        points,
        lengthscale,
        features,
        noise,
        beta,
        seed as u64,
    )
    .map_err(js_err)
}

/// Weight an agent gets in its own sub-region and in another one, for each
/// round `0..=rounds` of the synthetic schedule. Returns the two series one
/// after the other.
pub fn weight_series(
    agents: usize,
    regions: usize,
    rounds: u32,
    mode: &str,
) -> dpfts::Result<Vec<f64>> {
    let mode = match mode {
        "adaptive" => WeightMode::Adaptive,
        "fixed-temperature" => WeightMode::FixedTemperature,
        "uniform" => WeightMode::Uniform,
        other => {
            return Err(dpfts::Error::InvalidArgument(format!(
                "unknown weight mode '{other}'"
            )))
        }
    };
    let schedule = WeightSchedule::synthetic().with_mode(mode);
    let assignment = Assignment::random(agents, regions, &mut stream(0, Stream::Assignment, &[]))?;
    let own_region = assignment.region_of_agent(0);
    let other = (own_region + 1) % regions;
    let mut inside = Vec::with_capacity(rounds as usize + 1);
    let mut outside = Vec::with_capacity(rounds as usize + 1);
    for t in 0..=rounds {
        let w = schedule.weights(&assignment, t);
        inside.push(w.get(own_region, 0));
        outside.push(if regions > 1 {
            w.get(other, 0)
        } else {
            w.get(own_region, 0)
        });
    }
    inside.extend(outside);
    Ok(inside)
}

#[wasm_bindgen(js_name = weightSchedule)]
pub fn weight_schedule(
    agents: usize,
    regions: usize,
    rounds: u32,
    mode: &str,
) -> Result<Vec<f64>, JsError> {
    weight_series(agents, regions, rounds, mode).map_err(js_err)
}
