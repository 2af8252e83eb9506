use rayon::prelude::*;
use serde::Serialize;

use super::agent::{Agent, Branch, Environment, StepInputs};
use super::schedule::PSchedule;
use crate::accountant::PrivacyLedger;
use crate::domain::{Assignment, Domain, Partition};
use crate::mechanism::{aggregate, subsample, Broadcast, ClipStats, DpParams};
use crate::objectives::{NoiseModel, Suite};
use crate::rng::{derive_seed, stream, Stream};
use crate::surrogate::{BetaSchedule, FeatureVariant, KernelSpec, RffMap, TsMode};
use crate::weights::WeightSchedule;
use crate::{Error, Result};

/// Everything the protocol needs besides the problem instance and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub rounds: u32,
    pub n_init: usize,
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub features: usize,
    pub feature_variant: FeatureVariant,
    pub beta: BetaSchedule,
    pub ts_mode: TsMode,
    pub p_schedule: PSchedule,
    /// Last round in which agents may use a broadcast; `None` is unbounded.
    pub cutoff: Option<u32>,
    pub weights: WeightSchedule,
    pub dp: DpParams,
    /// `false` runs agents in isolation: no aggregation, no broadcast.
    pub server: bool,
    pub full_domain_init: bool,
    pub delta: f64,
    pub max_order: u32,
}

impl ProtocolConfig {
    /// Whether the server aggregates after round `t`. The output is only
    /// useful if some round `t + 1 ≤ min(T, t_cut)` can consume it.
    pub fn aggregates_after(&self, t: u32) -> bool {
        let last_consumer = self.cutoff.map_or(self.rounds, |c| c.min(self.rounds));
        self.server && t < last_consumer
    }

    /// Number of mechanism invocations in a full run.
    pub fn releases(&self) -> u32 {
        (0..=self.rounds)
            .filter(|&t| self.aggregates_after(t))
            .count() as u32
    }
}

/// Grid, partition, objectives and noise for a run.
#[derive(Debug, Clone)]
pub struct Problem {
    pub domain: Domain,
    pub partition: Partition,
    pub suite: Suite,
    pub noise: NoiseModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub agent: usize,
    pub round: u32,
    pub branch: Branch,
    pub grid_id: usize,
    pub f_value: f64,
    pub y: f64,
    pub simple_regret: f64,
    pub cum_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: u32,
    /// `None` for the initialization round.
    pub p: Option<f64>,
    pub p_clamped: bool,
    /// Clip statistics of the aggregation run after this round, if any.
    pub clip: Option<ClipStats>,
    /// Agents kept by subsampling.
    pub selected: usize,
    /// Privacy loss after this round.
    pub epsilon: f64,
}

impl RoundRecord {
    pub fn aggregated(&self) -> bool {
        self.clip.is_some()
    }
}

/// Output of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub seed: u64,
    pub agents: usize,
    /// Initialization rows (round 0) then one row per agent per round,
    /// agent-ordered within each round.
    pub rows: Vec<TraceRow>,
    pub rounds: Vec<RoundRecord>,
    /// `broadcasts[k]` was produced after round `broadcasts[k].round`.
    pub broadcasts: Vec<Broadcast>,
}

impl RunTrace {
    pub fn final_epsilon(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.epsilon)
    }

    pub fn round(&self, t: u32) -> &RoundRecord {
        &self.rounds[t as usize]
    }

    /// Mean clip fraction over rounds that aggregated.
    pub fn mean_clip_fraction(&self) -> Option<f64> {
        let f: Vec<f64> = self
            .rounds
            .iter()
            .filter_map(|r| r.clip.as_ref().map(ClipStats::fraction))
            .collect();
        (!f.is_empty()).then(|| f.iter().sum::<f64>() / f.len() as f64)
    }

    /// Rows of round `t` (one per agent, except round 0).
    pub fn rows_at(&self, t: u32) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(move |r| r.round == t)
    }
}

/// Running regret bookkeeping for one agent.
#[derive(Debug, Clone, Copy)]
struct Regret {
    optimum: f64,
    best: f64,
    cumulative: f64,
}

impl Regret {
    fn row(&mut self, agent: usize, round: u32, q: &super::agent::Query) -> TraceRow {
        self.best = self.best.max(q.value);
        if round > 0 {
            self.cumulative += self.optimum - q.value;
        }
        TraceRow {
            agent,
            round,
            branch: q.branch,
            grid_id: q.grid_id,
            f_value: q.value,
            y: q.y,
            simple_regret: self.optimum - self.best,
            cum_regret: self.cumulative,
        }
    }
}

fn check(cfg: &ProtocolConfig, problem: &Problem) -> Result<()> {
    if problem.partition.len() != cfg.dp.regions {
        return Err(Error::invalid(format!(
            "partition has {} regions but P = {}",
            problem.partition.len(),
            cfg.dp.regions
        )));
    }
    if problem.suite.agents() == 0 {
        return Err(Error::invalid("no agents"));
    }
    if !cfg.server && cfg.rounds > 0 {
        for t in 1..=cfg.rounds {
            if cfg.p_schedule.p(t)?.p < 1.0 && !cfg.cutoff.is_some_and(|c| t > c) {
                return Err(Error::invalid(format!(
                    "without a server p_t must be 1, but p_{t} < 1"
                )));
            }
        }
    }
    Ok(())
}

/// Ledger for the configured mechanism, before any release.
pub fn fresh_ledger(cfg: &ProtocolConfig) -> Result<PrivacyLedger> {
    if cfg.server {
        PrivacyLedger::new(cfg.dp.q, cfg.dp.z, cfg.delta, cfg.max_order)
    } else {
        PrivacyLedger::new(0.0, 1.0, cfg.delta, cfg.max_order)
    }
}

/// Runs the initialization round and `T` rounds for one seed. Agents within
/// a round run on the current rayon pool; the result does not depend on its
/// size.
pub fn run_seed(
    cfg: &ProtocolConfig,
    problem: &Problem,
    ledger: &PrivacyLedger,
    seed: u64,
) -> Result<RunTrace> {
    check(cfg, problem)?;
    let n = problem.suite.agents();
    let rff = RffMap::sample(
        &cfg.kernel,
        cfg.features,
        problem.domain.dims(),
        derive_seed(seed, Stream::Features, &[]),
        cfg.feature_variant,
    )?;
    let env = Environment::new(
        &problem.domain,
        &problem.partition,
        &rff,
        &problem.suite,
        problem.noise,
    )?;
    let assignment = Assignment::random(
        n,
        cfg.dp.regions,
        &mut stream(seed, Stream::Assignment, &[]),
    )?;
    let mut ledger = ledger.clone();
    let mut regrets: Vec<Regret> = (0..n)
        .map(|a| Regret {
            optimum: problem.suite.optimum(a),
            best: f64::NEG_INFINITY,
            cumulative: 0.0,
        })
        .collect();

    let mut rows = Vec::with_capacity(n * (cfg.n_init + cfg.rounds as usize));
    let mut rounds = Vec::with_capacity(cfg.rounds as usize + 1);
    let mut broadcasts = Vec::new();

    let init: Vec<(Agent, Vec<super::agent::Query>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut rng = stream(seed, Stream::Agent, &[a as u64, 0]);
            let (agent, queries) = Agent::init(
                a,
                assignment.region_of_agent(a),
                &env,
                cfg.kernel,
                cfg.lambda,
                cfg.n_init,
                cfg.full_domain_init,
                &mut rng,
            )?;
            let omega = agent.omega(&mut rng);
            Ok((agent, queries, omega))
        })
        .collect::<Result<_>>()?;
    let mut agents = Vec::with_capacity(n);
    let mut omegas = Vec::with_capacity(n);
    for (agent, queries, omega) in init {
        for q in &queries {
            rows.push(regrets[agent.id()].row(agent.id(), 0, q));
        }
        agents.push(agent);
        omegas.push(omega);
    }

    let mut latest: Option<Broadcast> = None;
    for t in 0..=cfg.rounds {
        let mut p = None;
        let mut p_clamped = false;
        if t > 0 {
            let pv = cfg.p_schedule.p(t)?;
            p = Some(pv.p);
            p_clamped = pv.clamped;
            let pick = match &latest {
                Some(b) if b.round + 1 == t => Some(env.broadcast_argmax(b)?),
                _ => None,
            };
            let inputs = StepInputs {
                round: t,
                p: pv.p,
                cutoff: cfg.cutoff,
                beta: cfg.beta.beta(t),
                ts_mode: cfg.ts_mode,
                broadcast_pick: pick,
            };
            let results: Vec<(super::agent::Query, Vec<f64>)> = agents
                .par_iter_mut()
                .map(|agent| {
                    let mut rng = stream(seed, Stream::Agent, &[agent.id() as u64, t as u64]);
                    let q = agent.step(&env, &inputs, &mut rng)?;
                    let omega = agent.omega(&mut rng);
                    Ok((q, omega))
                })
                .collect::<Result<_>>()?;
            for (a, (q, omega)) in results.into_iter().enumerate() {
                rows.push(regrets[a].row(a, t, &q));
                omegas[a] = omega;
            }
        }

        let mut clip = None;
        let mut selected = 0;
        if cfg.aggregates_after(t) {
            let mut rng = stream(seed, Stream::Server, &[t as u64]);
            let subset = subsample(n, cfg.dp.q, &mut rng);
            let weights = cfg.weights.weights(&assignment, t);
            let (b, stats) = aggregate(t, &omegas, &subset, &weights, &cfg.dp, &mut rng)?;
            ledger.record_round();
            selected = subset.len();
            clip = Some(stats);
            broadcasts.push(b.clone());
            latest = Some(b);
        }
        rounds.push(RoundRecord {
            round: t,
            p,
            p_clamped,
            clip,
            selected,
            epsilon: ledger.epsilon(),
        });
    }

    Ok(RunTrace {
        seed,
        agents: n,
        rows,
        rounds,
        broadcasts,
    })
}

/// Worker count from `DPFTS_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("DPFTS_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n| n > 0)
}

/// Runs every seed on a pool of `threads` workers (rayon's default when
/// `None`). Traces come back in seed order.
pub fn run(
    cfg: &ProtocolConfig,
    problem: &Problem,
    seeds: &[u64],
    threads: Option<usize>,
) -> Result<Vec<RunTrace>> {
    let ledger = fresh_ledger(cfg)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| run_seed(cfg, problem, &ledger, s))
            .collect()
    })
}
