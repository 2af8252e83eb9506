use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::metrics::{mean_clip_fraction, regret_curve, CurvePoint, RegretKind};
use super::ExperimentResult;
use crate::protocol::RunTrace;
use crate::{Error, Result};

pub const TRACE_HEADER: &str =
    "algo,seed,agent,round,branch,grid_id,f_value,y,simple_regret,cum_regret,clip_fraction,epsilon";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per query. `clip_fraction` is that round's aggregation (empty when
/// the server did not aggregate) and `epsilon` the loss after the round.
pub fn write_trace_csv<W: Write>(algo: &str, traces: &[RunTrace], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for trace in traces {
        for r in &trace.rows {
            let round = trace.round(r.round);
            writeln!(
                w,
                "{algo},{},{},{},{},{},{},{},{},{},{},{}",
                trace.seed,
                r.agent,
                r.round,
                r.branch.as_str(),
                r.grid_id,
                r.f_value,
                r.y,
                r.simple_regret,
                r.cum_regret,
                fmt_opt(round.clip.as_ref().map(|c| c.fraction())),
                round.epsilon
            )?;
        }
    }
    w.flush()
}

pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "round,mean,stderr")?;
    for p in curve {
        writeln!(w, "{},{},{}", p.round, p.mean, p.stderr)?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
}

impl From<&CurvePoint> for Stat {
    fn from(p: &CurvePoint) -> Self {
        Self {
            mean: p.mean,
            stderr: p.stderr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_simple_regret: f64,
    pub final_cum_regret: f64,
    pub epsilon: f64,
    pub mean_clip_fraction: Option<f64>,
    pub releases: usize,
    /// Rounds whose p_t was raised to the floor.
    pub clamped_rounds: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub algo: String,
    pub agents: usize,
    pub regions: usize,
    pub rounds: u32,
    pub delta: f64,
    pub epsilon: f64,
    pub mean_clip_fraction: Option<f64>,
    pub final_simple_regret: Stat,
    pub final_cum_regret: Stat,
    pub seeds: Vec<SeedSummary>,
}

impl Summary {
    pub fn from_result(result: &ExperimentResult) -> Self {
        let cfg = &result.config;
        let traces = &result.traces;
        let simple = regret_curve(traces, RegretKind::Simple);
        let cum = regret_curve(traces, RegretKind::Cumulative);
        let last = |c: &[CurvePoint]| {
            c.last().map(Stat::from).unwrap_or(Stat {
                mean: f64::NAN,
                stderr: f64::NAN,
            })
        };
        let seeds = traces
            .iter()
            .map(|t| {
                let one = std::slice::from_ref(t);
                let fs = regret_curve(one, RegretKind::Simple);
                let fc = regret_curve(one, RegretKind::Cumulative);
                SeedSummary {
                    seed: t.seed,
                    final_simple_regret: fs.last().map_or(f64::NAN, |p| p.mean),
                    final_cum_regret: fc.last().map_or(f64::NAN, |p| p.mean),
                    epsilon: t.final_epsilon(),
                    mean_clip_fraction: t.mean_clip_fraction(),
                    releases: t.broadcasts.len(),
                    clamped_rounds: t
                        .rounds
                        .iter()
                        .filter(|r| r.p_clamped)
                        .map(|r| r.round)
                        .collect(),
                }
            })
            .collect();
        Self {
            algo: cfg.algo.name().to_string(),
            agents: cfg.agents,
            regions: cfg.regions,
            rounds: cfg.rounds,
            delta: cfg.delta(),
            epsilon: traces.first().map_or(0.0, RunTrace::final_epsilon),
            mean_clip_fraction: mean_clip_fraction(traces),
            final_simple_regret: last(&simple),
            final_cum_regret: last(&cum),
            seeds,
        }
    }
}

/// Paths written by [`emit`].
#[derive(Debug, Clone, PartialEq)]
pub struct Emitted {
    pub trace: PathBuf,
    pub curve: PathBuf,
    pub cum_curve: PathBuf,
    pub summary: PathBuf,
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| Error::io(path, e))
}

/// Writes `<name>.csv`, `<name>_curve.csv` (simple regret),
/// `<name>_cum_curve.csv` and `<name>_summary.json` under the output
/// directory. Output depends only on the result, so re-emitting is
/// byte-identical.
pub fn emit(result: &ExperimentResult) -> Result<Emitted> {
    let dir = &result.config.output.dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = result.config.name();
    let out = Emitted {
        trace: dir.join(format!("{name}.csv")),
        curve: dir.join(format!("{name}_curve.csv")),
        cum_curve: dir.join(format!("{name}_cum_curve.csv")),
        summary: dir.join(format!("{name}_summary.json")),
    };
    let algo = result.config.algo.name();
    write_file(&out.trace, |w| write_trace_csv(algo, &result.traces, w))?;
    write_file(&out.curve, |w| {
        write_curve_csv(&regret_curve(&result.traces, RegretKind::Simple), w)
    })?;
    write_file(&out.cum_curve, |w| {
        write_curve_csv(&regret_curve(&result.traces, RegretKind::Cumulative), w)
    })?;
    let summary = serde_json::json!({
        "summary": Summary::from_result(result),
        "config": result.config,
    });
    write_file(&out.summary, |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        writeln!(w)
    })?;
    Ok(out)
}
