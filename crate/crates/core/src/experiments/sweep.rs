use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{mean_clip_fraction, regret_curve, RegretKind};
use super::{run_with_problem, ExperimentConfig};
use crate::{Error, Result};

/// Values to try for each mechanism parameter; absent axes keep the base
/// configuration's value. `clip` entries may be `null` for no clipping.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    #[serde(default)]
    pub z: Option<Vec<f64>>,
    #[serde(default)]
    pub clip: Option<Vec<Option<f64>>>,
    #[serde(default)]
    pub regions: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub q: f64,
    pub z: f64,
    pub clip: Option<f64>,
    pub regions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub epsilon: f64,
    pub mean_clip_fraction: Option<f64>,
    pub final_simple_mean: f64,
    pub final_simple_stderr: f64,
    pub final_cum_mean: f64,
    pub final_cum_stderr: f64,
}

impl SweepGrid {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))
    }

    /// Cartesian product in (q, z, clip, regions) order, last axis fastest.
    pub fn points(&self, base: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
        fn axis<T: Clone>(name: &str, v: &Option<Vec<T>>, default: T) -> Result<Vec<T>> {
            match v {
                Some(v) if v.is_empty() => {
                    Err(Error::Config(vec![format!("sweep axis '{name}' is empty")]))
                }
                Some(v) => Ok(v.clone()),
                None => Ok(vec![default]),
            }
        }
        let qs = axis("q", &self.q, base.dp.q)?;
        let zs = axis("z", &self.z, base.dp.z)?;
        let clips = axis("clip", &self.clip, base.dp.clip)?;
        let ps = axis("regions", &self.regions, base.regions)?;
        let mut out = Vec::new();
        for &q in &qs {
            for &z in &zs {
                for &clip in &clips {
                    for &regions in &ps {
                        out.push(SweepPoint {
                            q,
                            z,
                            clip,
                            regions,
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

impl SweepPoint {
    pub fn apply(&self, base: &ExperimentConfig) -> ExperimentConfig {
        let mut c = base.clone();
        c.dp.q = self.q;
        c.dp.z = self.z;
        c.dp.clip = self.clip;
        c.regions = self.regions;
        c
    }
}

/// Runs every grid point; configs are validated up front so a bad point
/// fails before any work starts.
pub fn sweep(
    base: &ExperimentConfig,
    grid: &SweepGrid,
    threads: Option<usize>,
) -> Result<Vec<SweepRow>> {
    let points = grid.points(base)?;
    let configs: Vec<ExperimentConfig> = points.iter().map(|p| p.apply(base)).collect();
    let mut problems = Vec::new();
    for (p, c) in points.iter().zip(&configs) {
        if let Err(e) = c.validate() {
            let msgs = match e {
                Error::Config(v) => v,
                other => vec![other.to_string()],
            };
            problems
                .extend(msgs.into_iter().map(|m| {
                    format!("q={} z={} clip={:?} P={}: {m}", p.q, p.z, p.clip, p.regions)
                }));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let domain = base.build_domain()?;
    let suite = base.build_suite(&domain)?;
    let mut rows = Vec::with_capacity(points.len());
    for (point, cfg) in points.into_iter().zip(configs) {
        let problem = cfg.problem_with(domain.clone(), suite.clone())?;
        let result = run_with_problem(&cfg, &problem, threads)?;
        let s = regret_curve(&result.traces, RegretKind::Simple);
        let c = regret_curve(&result.traces, RegretKind::Cumulative);
        let (sl, cl) = (s.last().expect("rounds"), c.last().expect("rounds"));
        log::info!(
            "sweep point q={} z={} clip={:?} P={} done",
            point.q,
            point.z,
            point.clip,
            point.regions
        );
        rows.push(SweepRow {
            point,
            epsilon: result.traces.first().map_or(0.0, |t| t.final_epsilon()),
            mean_clip_fraction: mean_clip_fraction(&result.traces),
            final_simple_mean: sl.mean,
            final_simple_stderr: sl.stderr,
            final_cum_mean: cl.mean,
            final_cum_stderr: cl.stderr,
        });
    }
    Ok(rows)
}

pub const SWEEP_HEADER: &str = "q,z,clip,regions,epsilon,mean_clip_fraction,final_simple_mean,final_simple_stderr,final_cum_mean,final_cum_stderr";

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.point.q,
            r.point.z,
            r.point.clip.map_or("inf".to_string(), |c| c.to_string()),
            r.point.regions,
            r.epsilon,
            r.mean_clip_fraction
                .map(|f| f.to_string())
                .unwrap_or_default(),
            r.final_simple_mean,
            r.final_simple_stderr,
            r.final_cum_mean,
            r.final_cum_stderr
        )?;
    }
    w.flush()
}
