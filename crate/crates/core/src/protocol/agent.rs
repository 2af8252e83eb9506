use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Partition};
use crate::mechanism::Broadcast;
use crate::objectives::{NoiseModel, Suite};
use crate::surrogate::{KernelSpec, LocalModel, RffMap, TsMode};
use crate::{Error, Result};

/// How an agent picked its query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Init,
    LocalTs,
    Broadcast,
    PostCutoff,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Init => "init",
            Branch::LocalTs => "local-ts",
            Branch::Broadcast => "broadcast",
            Branch::PostCutoff => "post-cutoff",
        }
    }
}

/// Grid, features and objective shared read-only by every agent of a run.
#[derive(Debug)]
pub struct Environment<'a> {
    pub domain: &'a Domain,
    pub partition: &'a Partition,
    pub rff: &'a RffMap,
    pub suite: &'a Suite,
    pub noise: NoiseModel,
    /// φ(x) for every grid point, one row per point.
    features: DMatrix<f64>,
    /// Same values, row-major.
    rows: Vec<f64>,
}

impl<'a> Environment<'a> {
    pub fn new(
        domain: &'a Domain,
        partition: &'a Partition,
        rff: &'a RffMap,
        suite: &'a Suite,
        noise: NoiseModel,
    ) -> Result<Self> {
        if suite.grid_size() != domain.len() {
            return Err(Error::invalid(format!(
                "objective suite covers {} grid points but the domain has {}",
                suite.grid_size(),
                domain.len()
            )));
        }
        if rff.dims() != domain.dims() {
            return Err(Error::invalid("feature map and domain dimensions differ"));
        }
        let features = rff.feature_matrix(domain);
        let rows = features.transpose().as_slice().to_vec();
        Ok(Self {
            domain,
            partition,
            rff,
            suite,
            noise,
            features,
            rows,
        })
    }

    pub fn feature_matrix(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn phi(&self, id: usize) -> &[f64] {
        let m = self.rff.len();
        &self.rows[id * m..(id + 1) * m]
    }

    /// φ(x)ᵀω⁽ⁱ⁽ˣ⁾⁾ for every grid point: each point is scored with the vector
    /// of the sub-region containing it.
    pub fn broadcast_scores(&self, broadcast: &Broadcast) -> Result<Vec<f64>> {
        if broadcast.regions() != self.partition.len() || broadcast.features() != self.rff.len() {
            return Err(Error::invalid(format!(
                "broadcast has {} regions of {} features, expected {} of {}",
                broadcast.regions(),
                broadcast.features(),
                self.partition.len(),
                self.rff.len()
            )));
        }
        Ok((0..self.domain.len())
            .map(|id| {
                let w = broadcast.region(self.partition.region_of_point(id));
                self.phi(id).iter().zip(w).map(|(a, b)| a * b).sum()
            })
            .collect())
    }

    /// Grid id maximizing the reconstructed function.
    pub fn broadcast_argmax(&self, broadcast: &Broadcast) -> Result<usize> {
        Ok(argmax(&self.broadcast_scores(broadcast)?))
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Local TS when `r ≤ p_t` or past the cutoff, broadcast otherwise. One
/// uniform is always consumed.
pub fn draw_branch<R: Rng + ?Sized>(t: u32, p: f64, cutoff: Option<u32>, rng: &mut R) -> Branch {
    let r: f64 = rng.random();
    if cutoff.is_some_and(|c| t > c) {
        Branch::PostCutoff
    } else if r <= p {
        Branch::LocalTs
    } else {
        Branch::Broadcast
    }
}

/// One evaluated query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Query {
    pub grid_id: usize,
    pub value: f64,
    pub y: f64,
    pub branch: Branch,
}

/// Per-round inputs common to all agents.
#[derive(Debug, Clone, Copy)]
pub struct StepInputs {
    pub round: u32,
    pub p: f64,
    pub cutoff: Option<u32>,
    pub beta: f64,
    pub ts_mode: TsMode,
    /// Argmax of the previous round's broadcast, if one was released.
    pub broadcast_pick: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Agent {
    id: usize,
    region: usize,
    model: LocalModel,
}

impl Agent {
    /// Queries `n_init` distinct grid points drawn uniformly from the
    /// agent's sub-region (or from the whole grid).
    #[allow(clippy::too_many_arguments)]
    pub fn init<R: Rng + ?Sized>(
        id: usize,
        region: usize,
        env: &Environment<'_>,
        kernel: KernelSpec,
        lambda: f64,
        n_init: usize,
        full_domain: bool,
        rng: &mut R,
    ) -> Result<(Self, Vec<Query>)> {
        let candidates: Vec<usize> = if full_domain {
            (0..env.domain.len()).collect()
        } else {
            env.partition.points_in(region)
        };
        if candidates.len() < n_init {
            return Err(Error::invalid(format!(
                "region {region} holds {} grid points, fewer than the {n_init} initial queries",
                candidates.len()
            )));
        }
        let mut agent = Self {
            id,
            region,
            model: LocalModel::new(kernel, env.rff, lambda)?,
        };
        let picks = index::sample(rng, candidates.len(), n_init);
        let mut queries = Vec::with_capacity(n_init);
        for k in picks.iter() {
            queries.push(agent.query(env, candidates[k], Branch::Init, rng)?);
        }
        Ok((agent, queries))
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn region(&self) -> usize {
        self.region
    }

    pub fn model(&self) -> &LocalModel {
        &self.model
    }

    fn query<R: Rng + ?Sized>(
        &mut self,
        env: &Environment<'_>,
        grid_id: usize,
        branch: Branch,
        rng: &mut R,
    ) -> Result<Query> {
        let e = env.suite.evaluate(self.id, grid_id, &env.noise, rng)?;
        self.model
            .observe(env.domain.point(grid_id), env.phi(grid_id), e.y);
        Ok(Query {
            grid_id,
            value: e.value,
            y: e.y,
            branch,
        })
    }

    /// Picks, evaluates and records one query for round `t ≥ 1`.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        env: &Environment<'_>,
        inputs: &StepInputs,
        rng: &mut R,
    ) -> Result<Query> {
        let branch = draw_branch(inputs.round, inputs.p, inputs.cutoff, rng);
        let grid_id = match branch {
            Branch::LocalTs | Branch::PostCutoff => {
                let f = self.model.sample_ts_function(
                    inputs.beta,
                    env.domain,
                    env.feature_matrix(),
                    inputs.ts_mode,
                    rng,
                )?;
                argmax(&f)
            }
            Branch::Broadcast => inputs.broadcast_pick.ok_or_else(|| {
                Error::invalid(format!(
                    "agent {} took the broadcast branch at round {} but no broadcast exists",
                    self.id, inputs.round
                ))
            })?,
            Branch::Init => unreachable!("draw_branch never yields Init"),
        };
        self.query(env, grid_id, branch, rng)
    }

    /// ω ~ N(ν, λΣ⁻¹) to send to the server.
    pub fn omega<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.model.sample_omega(rng).as_slice().to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn argmax_prefers_lowest_id() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[5.0]), 0);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn certain_local_and_cutoff() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(draw_branch(3, 1.0, None, &mut rng), Branch::LocalTs);
            assert_eq!(draw_branch(6, 0.0, Some(5), &mut rng), Branch::PostCutoff);
        }
    }

    #[test]
    fn labels() {
        assert_eq!(Branch::PostCutoff.as_str(), "post-cutoff");
        assert_eq!(
            serde_json::to_string(&Branch::LocalTs).unwrap(),
            "\"local-ts\""
        );
    }
}
