//! The server-side subsampled Gaussian mechanism.
//!
//! Per round the server keeps each agent independently with probability `q`,
//! clips every kept vector to norm `S/√P`, forms one weighted sum per
//! sub-region scaled by `1/q`, and adds isotropic Gaussian noise with standard
//! deviation `z·φ_max·S/q` to every coordinate of every region vector.
//!
//! Viewed as one joint vector of length `P·M`, agent `n` contributes
//! `(N·φ⁽ⁱ⁾ₙ·ω̂ₙ)ᵢ`, whose norm is at most `N·φ_max·S`. The noise above is
//! `z` times that sensitivity after the `1/(qN)` averaging, so the accountant
//! can treat the round as a unit-sensitivity subsampled Gaussian mechanism.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, Stream};
use crate::weights::WeightMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpParams {
    /// Subsampling probability.
    pub q: f64,
    /// Noise multiplier.
    pub z: f64,
    /// Clipping threshold S for the joint vector. `f64::INFINITY` disables
    /// clipping.
    #[serde(with = "infinite_as_null")]
    pub clip: f64,
    /// Number of sub-regions P.
    pub regions: usize,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl DpParams {
    /// No subsampling, no clipping, no noise.
    pub fn disabled(regions: usize) -> Self {
        Self {
            q: 1.0,
            z: 0.0,
            clip: f64::INFINITY,
            regions,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.q > 0.0 && self.q <= 1.0) {
            problems.push(format!("q must lie in (0, 1], got {}", self.q));
        }
        if !(self.z >= 0.0 && self.z.is_finite()) {
            problems.push(format!("z must be nonnegative, got {}", self.z));
        }
        if !(self.clip > 0.0) {
            problems.push(format!(
                "clipping threshold S must be positive, got {}",
                self.clip
            ));
        }
        if self.regions == 0 {
            problems.push("P must be at least 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(problems.join("; ")))
        }
    }

    /// Per-vector norm bound S/√P.
    pub fn per_vector_bound(&self) -> f64 {
        self.clip / (self.regions as f64).sqrt()
    }
}

/// The server's output for one round: one vector per sub-region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Broadcast {
    pub round: u32,
    pub per_region: Vec<Vec<f64>>,
}

/// Flat wire layout used in logs.
#[derive(Debug, Serialize, Deserialize)]
pub struct BroadcastRecord {
    pub round: u32,
    pub regions: usize,
    pub features: usize,
    pub data: Vec<f64>,
}

impl Broadcast {
    pub fn regions(&self) -> usize {
        self.per_region.len()
    }

    pub fn features(&self) -> usize {
        self.per_region.first().map_or(0, Vec::len)
    }

    pub fn region(&self, i: usize) -> &[f64] {
        &self.per_region[i]
    }

    pub fn to_record(&self) -> BroadcastRecord {
        BroadcastRecord {
            round: self.round,
            regions: self.regions(),
            features: self.features(),
            data: self.per_region.concat(),
        }
    }

    pub fn from_record(r: &BroadcastRecord) -> Result<Self> {
        if r.regions * r.features != r.data.len() || r.features == 0 {
            return Err(Error::Format(format!(
                "broadcast record claims {}x{} values but carries {}",
                r.regions,
                r.features,
                r.data.len()
            )));
        }
        Ok(Self {
            round: r.round,
            per_region: r.data.chunks(r.features).map(<[f64]>::to_vec).collect(),
        })
    }
}

/// Which received vectors exceeded the per-vector bound.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClipStats {
    pub clipped: Vec<usize>,
    pub received: usize,
}

impl ClipStats {
    pub fn fraction(&self) -> f64 {
        if self.received == 0 {
            0.0
        } else {
            self.clipped.len() as f64 / self.received as f64
        }
    }
}

/// Bernoulli(q) selection of agent indices, in increasing order.
pub fn subsample<R: Rng + ?Sized>(agents: usize, q: f64, rng: &mut R) -> Vec<usize> {
    if q >= 1.0 {
        return (0..agents).collect();
    }
    (0..agents).filter(|_| rng.random::<f64>() < q).collect()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// ω / max(1, ‖ω‖/(S/√P)).
pub fn clip(omega: &[f64], clip: f64, regions: usize) -> Vec<f64> {
    let bound = clip / (regions as f64).sqrt();
    let norm = l2_norm(omega);
    if norm <= bound {
        omega.to_vec()
    } else {
        let s = bound / norm;
        omega.iter().map(|x| x * s).collect()
    }
}

/// z·φ_max·S/q.
pub fn noise_std(params: &DpParams, phi_max: f64) -> Result<f64> {
    if !(params.q > 0.0) {
        return Err(Error::invalid("subsampling probability q must be positive"));
    }
    if params.z == 0.0 {
        return Ok(0.0);
    }
    Ok(params.z * phi_max * params.clip / params.q)
}

/// Runs the mechanism over the vectors of every agent (`received[n]` is
/// agent `n`'s vector) for the already drawn subset `selected`.
///
/// One seed is drawn from `rng`; noise for region `i` then comes from its own
/// stream derived from that seed and `i`, so the result does not depend on how
/// regions are scheduled.
pub fn aggregate<R: Rng + ?Sized>(
    round: u32,
    received: &[Vec<f64>],
    selected: &[usize],
    weights: &WeightMatrix,
    params: &DpParams,
    rng: &mut R,
) -> Result<(Broadcast, ClipStats)> {
    params.validate()?;
    let noise_seed: u64 = rng.random();
    let m = received
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::invalid("no agent vectors received"))?;
    if let Some((n, v)) = received.iter().enumerate().find(|(_, v)| v.len() != m) {
        return Err(Error::invalid(format!(
            "agent {n} sent a vector of length {}, expected {m}",
            v.len()
        )));
    }
    if weights.regions() != params.regions || weights.agents() != received.len() {
        return Err(Error::invalid(format!(
            "weight matrix is {}x{}, expected {}x{}",
            weights.regions(),
            weights.agents(),
            params.regions,
            received.len()
        )));
    }
    if let Some(&bad) = selected.iter().find(|&&n| n >= received.len()) {
        return Err(Error::invalid(format!(
            "selected agent {bad} was never received"
        )));
    }

    let bound = params.per_vector_bound();
    let clipped_set = received
        .iter()
        .enumerate()
        .filter_map(|(n, v)| (l2_norm(v) > bound).then_some(n))
        .collect();
    let stats = ClipStats {
        clipped: clipped_set,
        received: received.len(),
    };

    let hats: Vec<(usize, Vec<f64>)> = selected
        .iter()
        .map(|&n| (n, clip(&received[n], params.clip, params.regions)))
        .collect();
    let sd = noise_std(params, weights.max())?;

    let per_region = (0..params.regions)
        .map(|i| {
            let mut acc = vec![0.0; m];
            for (n, hat) in &hats {
                let w = weights.get(i, *n) / params.q;
                for (a, h) in acc.iter_mut().zip(hat) {
                    *a += w * h;
                }
            }
            if sd > 0.0 {
                let mut rng = stream(noise_seed, Stream::RegionNoise, &[i as u64]);
                for a in acc.iter_mut() {
                    *a += sd * rng.sample::<f64, _>(StandardNormal);
                }
            }
            acc
        })
        .collect();

    Ok((Broadcast { round, per_region }, stats))
}
