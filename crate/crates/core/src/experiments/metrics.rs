use serde::Serialize;

use crate::protocol::RunTrace;

/// Which regret column to aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegretKind {
    Simple,
    Cumulative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub round: u32,
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Regret of every (seed, agent) trajectory at the end of round `t`.
pub fn regrets_at(traces: &[RunTrace], t: u32, kind: RegretKind) -> Vec<f64> {
    let mut out = Vec::new();
    for trace in traces {
        let mut last = vec![None; trace.agents];
        for row in trace.rows.iter().filter(|r| r.round == t) {
            last[row.agent] = Some(match kind {
                RegretKind::Simple => row.simple_regret,
                RegretKind::Cumulative => row.cum_regret,
            });
        }
        out.extend(last.into_iter().flatten());
    }
    out
}

/// Mean ± standard error over all agents and seeds for every round.
pub fn regret_curve(traces: &[RunTrace], kind: RegretKind) -> Vec<CurvePoint> {
    let rounds = traces.iter().map(|t| t.rounds.len()).max().unwrap_or(0) as u32;
    (0..rounds)
        .map(|t| {
            let v = regrets_at(traces, t, kind);
            let (mean, stderr) = mean_stderr(&v);
            CurvePoint {
                round: t,
                mean,
                stderr,
                count: v.len(),
            }
        })
        .collect()
}

/// Mean clip fraction over all aggregating rounds of all seeds.
pub fn mean_clip_fraction(traces: &[RunTrace]) -> Option<f64> {
    let per_seed: Vec<f64> = traces
        .iter()
        .filter_map(RunTrace::mean_clip_fraction)
        .collect();
    (!per_seed.is_empty()).then(|| per_seed.iter().sum::<f64>() / per_seed.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stderr_of_known_sample() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[7.0]), (7.0, 0.0));
        assert!(mean_stderr(&[]).0.is_nan());
    }
}
