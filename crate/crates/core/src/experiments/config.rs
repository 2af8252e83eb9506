use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::accountant::{delta_default, DEFAULT_MAX_ORDER};
use crate::domain::{Domain, GridSize, Partition};
use crate::mechanism::DpParams;
use crate::objectives::{NoiseModel, Suite};
use crate::protocol::{PSchedule, Problem, ProtocolConfig};
use crate::surrogate::{BetaSchedule, FeatureVariant, KernelSpec, TsMode};
use crate::weights::{WeightMode, WeightSchedule};
use crate::{Error, Result};

/// Algorithm presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Ts,
    Fts,
    FtsDe,
    DpFts,
    DpFtsDe,
}

impl Algo {
    pub const ALL: [Algo; 5] = [Algo::Ts, Algo::Fts, Algo::FtsDe, Algo::DpFts, Algo::DpFtsDe];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Ts => "TS",
            Algo::Fts => "FTS",
            Algo::FtsDe => "FTS-DE",
            Algo::DpFts => "DP-FTS",
            Algo::DpFtsDe => "DP-FTS-DE",
        }
    }

    fn private(self) -> bool {
        matches!(self, Algo::DpFts | Algo::DpFtsDe)
    }

    fn single_region(self) -> bool {
        matches!(self, Algo::Ts | Algo::Fts | Algo::DpFts)
    }
}

/// Single-flag overrides used to isolate parts of the method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// Every weight is 1/N in every round.
    UniformWeights,
    /// Initial points come from the whole grid instead of the agent's region.
    FullDomainInit,
    /// Softmax temperature fixed at 1.
    FixedTemperature,
}

impl std::str::FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
            Error::invalid(format!(
                "unknown ablation '{s}' (expected uniform-weights, full-domain-init or fixed-temperature)"
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub bounds: Vec<(f64, f64)>,
    /// Total number of grid points (spread evenly over dimensions).
    pub points: usize,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            bounds: vec![(0.0, 1.0)],
            points: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    Synthetic {
        lengthscale: f64,
        d: f64,
        seed: u64,
    },
    Heterogeneous {
        alpha: f64,
        lengthscale: f64,
        seed: u64,
    },
    File {
        path: PathBuf,
    },
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig::Synthetic {
            lengthscale: 0.03,
            d: 0.02,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// File stem; defaults to the algorithm name in lowercase.
    #[serde(default)]
    pub name: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            name: None,
        }
    }
}

/// A complete experiment description; the JSON form of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algo: Algo,
    pub agents: usize,
    pub regions: usize,
    pub features: usize,
    pub rounds: u32,
    pub n_init: usize,
    pub domain: DomainConfig,
    pub objective: ObjectiveConfig,
    pub kernel: KernelSpec,
    pub feature_variant: FeatureVariant,
    pub noise: NoiseModel,
    /// Posterior regularizer; defaults to the noise variance.
    pub lambda: Option<f64>,
    pub dp: DpSettings,
    pub p_schedule: PSchedule,
    pub cutoff: Option<u32>,
    pub weights: WeightSchedule,
    pub beta: BetaSchedule,
    pub ts_mode: TsMode,
    pub ablation: Option<Ablation>,
    /// Defaults to N^(−1.1).
    pub delta: Option<f64>,
    pub max_order: u32,
    pub seeds: Vec<u64>,
    pub output: OutputConfig,
}

/// Mechanism settings; `clip = null` means no clipping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpSettings {
    pub q: f64,
    pub z: f64,
    pub clip: Option<f64>,
}

impl DpSettings {
    pub fn disabled() -> Self {
        Self {
            q: 1.0,
            z: 0.0,
            clip: None,
        }
    }

    pub fn clip_value(&self) -> f64 {
        self.clip.unwrap_or(f64::INFINITY)
    }
}

impl Default for DpSettings {
    fn default() -> Self {
        Self {
            q: 0.25,
            z: 1.0,
            clip: Some(11.0),
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::synthetic(Algo::DpFtsDe, 2)
    }
}

impl ExperimentConfig {
    /// Synthetic-suite defaults: 200 agents on a 1000-point unit grid,
    /// M = 50, T = 40, N_init = 10, 5 seeds. DP presets use q = 0.25, z = 1
    /// and S = 11 (S = 8 for a single region).
    pub fn synthetic(algo: Algo, regions: usize) -> Self {
        let regions = if algo.single_region() { 1 } else { regions };
        let dp = if algo.private() {
            DpSettings {
                clip: Some(if regions == 1 { 8.0 } else { 11.0 }),
                ..DpSettings::default()
            }
        } else {
            DpSettings::disabled()
        };
        let p_schedule = if algo == Algo::Ts {
            PSchedule::Constant { value: 1.0 }
        } else {
            PSchedule::InvSqrt
        };
        Self {
            algo,
            agents: 200,
            regions,
            features: 50,
            rounds: 40,
            n_init: 10,
            domain: DomainConfig::default(),
            objective: ObjectiveConfig::default(),
            kernel: KernelSpec {
                lengthscale: 0.03,
                signal_variance: 1.0,
                noise_variance: 0.01,
            },
            feature_variant: FeatureVariant::default(),
            noise: NoiseModel::default(),
            lambda: None,
            dp,
            p_schedule,
            cutoff: None,
            weights: WeightSchedule::synthetic(),
            beta: BetaSchedule::default(),
            ts_mode: TsMode::default(),
            ablation: None,
            delta: None,
            max_order: DEFAULT_MAX_ORDER,
            seeds: (0..5).collect(),
            output: OutputConfig::default(),
        }
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        self.ablation = Some(ablation);
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Config(v) => Error::Config(
                v.into_iter()
                    .map(|m| format!("{}: {m}", path.display()))
                    .collect(),
            ),
            other => other,
        })?;
        if let ObjectiveConfig::File { path: p } = &mut cfg.objective {
            if p.is_relative() {
                if let Some(parent) = path.parent() {
                    *p = parent.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or(self.noise.variance)
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or_else(|| delta_default(self.agents))
    }

    /// Stem for output files.
    pub fn name(&self) -> String {
        self.output
            .name
            .clone()
            .unwrap_or_else(|| self.algo.name().to_lowercase())
    }

    /// Checks every field and preset constraint, reporting all problems.
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        let mut push = |r: Result<()>| match r {
            Ok(()) => {}
            Err(Error::InvalidArgument(m)) => p.push(m),
            Err(e) => p.push(e.to_string()),
        };
        if self.agents == 0 {
            push(Err(Error::invalid("agents must be at least 1")));
        }
        if self.regions == 0 {
            push(Err(Error::invalid("regions must be at least 1")));
        }
        if self.features < 2 || self.features % 2 == 1 {
            push(Err(Error::invalid(format!(
                "features must be even and at least 2, got {}",
                self.features
            ))));
        }
        if self.rounds == 0 {
            push(Err(Error::invalid("rounds must be at least 1")));
        }
        if self.seeds.is_empty() {
            push(Err(Error::invalid("at least one seed is required")));
        }
        if self.domain.bounds.is_empty() {
            push(Err(Error::invalid("domain needs at least one dimension")));
        }
        if self.domain.points == 0 {
            push(Err(Error::invalid("domain needs at least one grid point")));
        }
        if self.max_order == 0 {
            push(Err(Error::invalid("max_order must be at least 1")));
        }
        push(self.kernel.validate());
        push(self.noise.validate());
        let lambda = self.lambda();
        if !(lambda > 0.0 && lambda.is_finite()) {
            push(Err(Error::invalid(format!(
                "lambda must be positive, got {lambda} (set it explicitly when the noise variance is 0)"
            ))));
        }
        push(self.dp_params().validate());
        push(self.p_schedule.validate());
        push(self.weights.validate());
        push(self.beta.validate());
        let delta = self.delta();
        if !(delta > 0.0 && delta < 1.0) {
            push(Err(Error::invalid(format!(
                "delta must lie in (0, 1), got {delta} (set it explicitly when N = 1)"
            ))));
        }
        if let TsMode::Exact { max_grid } = self.ts_mode {
            if self.domain.points > max_grid {
                push(Err(Error::invalid(format!(
                    "exact Thompson sampling is capped at {max_grid} points but the grid has {}",
                    self.domain.points
                ))));
            }
        }
        match &self.objective {
            ObjectiveConfig::Synthetic { lengthscale, d, .. } => {
                if !(*lengthscale > 0.0) {
                    push(Err(Error::invalid(
                        "objective lengthscale must be positive",
                    )));
                }
                if !(*d >= 0.0 && d.is_finite()) {
                    push(Err(Error::invalid(
                        "objective perturbation d must be non-negative",
                    )));
                }
            }
            ObjectiveConfig::Heterogeneous {
                alpha, lengthscale, ..
            } => {
                if !(0.0..=1.0).contains(alpha) {
                    push(Err(Error::invalid(format!(
                        "alpha must lie in [0, 1], got {alpha}"
                    ))));
                }
                if !(*lengthscale > 0.0) {
                    push(Err(Error::invalid(
                        "objective lengthscale must be positive",
                    )));
                }
            }
            ObjectiveConfig::File { .. } => {}
        }
        for v in self.preset_violations() {
            push(Err(Error::invalid(v)));
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    fn preset_violations(&self) -> Vec<String> {
        let name = self.algo.name();
        let mut v = Vec::new();
        if self.algo == Algo::Ts {
            let all_local =
                (1..=self.rounds).all(|t| self.p_schedule.raw(t).is_ok_and(|p| p >= 1.0));
            if !all_local {
                v.push(format!("{name} requires p_t = 1 in every round"));
            }
        }
        if self.algo.single_region() && self.regions != 1 {
            v.push(format!("{name} requires P = 1, got {}", self.regions));
        }
        if matches!(self.algo, Algo::Fts | Algo::FtsDe) {
            if self.dp.q != 1.0 {
                v.push(format!("{name} requires q = 1, got {}", self.dp.q));
            }
            if self.dp.z != 0.0 {
                v.push(format!("{name} requires z = 0, got {}", self.dp.z));
            }
            if self.dp.clip.is_some() {
                v.push(format!("{name} requires no clipping (clip = null)"));
            }
        }
        v
    }

    pub fn dp_params(&self) -> DpParams {
        DpParams {
            q: self.dp.q,
            z: self.dp.z,
            clip: self.dp.clip_value(),
            regions: self.regions,
        }
    }

    /// Protocol settings after applying the ablation.
    pub fn protocol(&self) -> ProtocolConfig {
        let mut weights = self.weights.clone();
        match self.ablation {
            Some(Ablation::UniformWeights) => weights.mode = WeightMode::Uniform,
            Some(Ablation::FixedTemperature) => weights.mode = WeightMode::FixedTemperature,
            _ => {}
        }
        ProtocolConfig {
            rounds: self.rounds,
            n_init: self.n_init,
            kernel: self.kernel,
            lambda: self.lambda(),
            features: self.features,
            feature_variant: self.feature_variant,
            beta: self.beta,
            ts_mode: self.ts_mode,
            p_schedule: self.p_schedule.clone(),
            cutoff: self.cutoff,
            weights,
            dp: self.dp_params(),
            server: self.algo != Algo::Ts,
            full_domain_init: self.ablation == Some(Ablation::FullDomainInit),
            delta: self.delta(),
            max_order: self.max_order,
        }
    }

    pub fn build_domain(&self) -> Result<Domain> {
        let dims = self.domain.bounds.len();
        if dims <= 1 {
            return Domain::grid(&self.domain.bounds, GridSize::Total(self.domain.points));
        }
        let side = (self.domain.points as f64).powf(1.0 / dims as f64).round() as usize;
        if side.checked_pow(dims as u32) != Some(self.domain.points) {
            return Err(Error::Config(vec![format!(
                "{} grid points cannot be spread evenly over {dims} dimensions",
                self.domain.points
            )]));
        }
        Domain::grid(&self.domain.bounds, GridSize::PerDim(side))
    }

    pub fn build_suite(&self, domain: &Domain) -> Result<Suite> {
        let suite = match &self.objective {
            ObjectiveConfig::Synthetic {
                lengthscale,
                d,
                seed,
            } => Suite::synthetic(domain, self.agents, *lengthscale, *d, *seed)?,
            ObjectiveConfig::Heterogeneous {
                alpha,
                lengthscale,
                seed,
            } => Suite::heterogeneous(domain, self.agents, *alpha, *lengthscale, *seed)?,
            ObjectiveConfig::File { path } => Suite::load(path)?,
        };
        if suite.agents() != self.agents || suite.grid_size() != domain.len() {
            return Err(Error::Config(vec![format!(
                "objective suite is {} agents x {} points but the config needs {} x {}",
                suite.agents(),
                suite.grid_size(),
                self.agents,
                domain.len()
            )]));
        }
        Ok(suite)
    }

    /// Grid, partition and objective suite for this configuration.
    pub fn build_problem(&self) -> Result<Problem> {
        let domain = self.build_domain()?;
        let suite = self.build_suite(&domain)?;
        self.problem_with(domain, suite)
    }

    pub(crate) fn problem_with(&self, domain: Domain, suite: Suite) -> Result<Problem> {
        let partition = Partition::new(&domain, self.regions)
            .map_err(|e| Error::Config(vec![e.to_string()]))?;
        Ok(Problem {
            domain,
            partition,
            suite,
            noise: self.noise,
        })
    }
}
