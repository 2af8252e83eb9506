//! Objective suites: one value table per agent over a shared grid.
//!
//! Synthetic suites draw a single GP sample, rescale it to [0, 1] and give
//! every agent its own copy with each grid value shifted by ±d. Heterogeneous
//! suites mix that base function with independent GP samples. Either kind,
//! or an externally produced table, can be saved to and loaded from a plain
//! text file whose first line is a JSON header.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::rng::{stream, Stream};
use crate::surrogate::{cholesky_with_jitter, KernelSpec};
use crate::{Error, Result};

/// Observation noise ζ ~ N(0, σ²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub variance: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { variance: 0.01 }
    }
}

impl NoiseModel {
    pub fn new(variance: f64) -> Result<Self> {
        let n = Self { variance };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variance >= 0.0 && self.variance.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "noise variance must be non-negative, got {}",
                self.variance
            )))
        }
    }
}

/// The first line of a suite file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteHeader {
    pub grid_size: usize,
    pub agents: usize,
    pub seed: u64,
    /// Perturbation magnitude (0 for heterogeneous or external tables).
    pub d: f64,
}

/// True value and noisy observation at one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    header: SuiteHeader,
    /// Shared base function when the suite was generated here.
    base: Option<Vec<f64>>,
    /// `values[n][id]`
    values: Vec<Vec<f64>>,
    optima: Vec<f64>,
}

fn gp_sampler(domain: &Domain, lengthscale: f64) -> Result<DMatrix<f64>> {
    if domain.is_empty() {
        return Err(Error::invalid("objective grid is empty"));
    }
    let first = domain.point(0);
    if domain.points().all(|p| p == first) {
        return Err(Error::invalid(
            "objective grid is degenerate: all points coincide",
        ));
    }
    let kernel = KernelSpec::new(lengthscale, 1.0, 0.0)?;
    let n = domain.len();
    let k = DMatrix::from_fn(n, n, |i, j| kernel.eval(domain.point(i), domain.point(j)));
    let (chol, _) = cholesky_with_jitter(&k, 1e-10)?;
    Ok(chol.l())
}

/// One GP draw on the grid rescaled so that min = 0 and max = 1.
fn normalized_sample<R: Rng + ?Sized>(l: &DMatrix<f64>, rng: &mut R) -> Result<Vec<f64>> {
    let n = l.nrows();
    let eps = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let f = l * eps;
    let lo = f.min();
    let hi = f.max();
    if !(hi > lo) {
        return Err(Error::Numeric("GP sample is constant on the grid".into()));
    }
    Ok(f.iter().map(|v| (v - lo) / (hi - lo)).collect())
}

fn column_max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

impl Suite {
    /// Builds a suite from per-agent value tables (`values[n][id]`).
    pub fn from_values(header: SuiteHeader, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != header.agents {
            return Err(Error::Format(format!(
                "header declares {} agents but {} value tables were given",
                header.agents,
                values.len()
            )));
        }
        if header.agents == 0 || header.grid_size == 0 {
            return Err(Error::Format(
                "suite needs at least one agent and one grid point".into(),
            ));
        }
        for (n, row) in values.iter().enumerate() {
            if row.len() != header.grid_size {
                return Err(Error::Format(format!(
                    "agent {n} has {} values, expected {}",
                    row.len(),
                    header.grid_size
                )));
            }
            if let Some(id) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Format(format!(
                    "non-finite value for agent {n} at id {id}"
                )));
            }
        }
        let optima = values.iter().map(|r| column_max(r)).collect();
        Ok(Self {
            header,
            base: None,
            values,
            optima,
        })
    }

    /// Shared base function plus ±d sign noise per agent and grid point.
    pub fn synthetic(
        domain: &Domain,
        agents: usize,
        lengthscale: f64,
        d: f64,
        seed: u64,
    ) -> Result<Self> {
        if agents == 0 {
            return Err(Error::invalid("suite needs at least one agent"));
        }
        if !(d >= 0.0 && d.is_finite()) {
            return Err(Error::invalid(format!(
                "perturbation d must be non-negative, got {d}"
            )));
        }
        let l = gp_sampler(domain, lengthscale)?;
        let base = normalized_sample(&l, &mut stream(seed, Stream::Objective, &[0]))?;
        let values = (0..agents)
            .map(|n| {
                let mut rng = stream(seed, Stream::Objective, &[1, n as u64]);
                base.iter()
                    .map(|&f| if rng.random::<bool>() { f + d } else { f - d })
                    .collect()
            })
            .collect();
        let header = SuiteHeader {
            grid_size: domain.len(),
            agents,
            seed,
            d,
        };
        let mut suite = Self::from_values(header, values)?;
        suite.base = Some(base);
        Ok(suite)
    }

    /// f^n = α·f^n_indep + (1 − α)·f_base with every GP draw normalized first.
    pub fn heterogeneous(
        domain: &Domain,
        agents: usize,
        alpha: f64,
        lengthscale: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("α must lie in [0, 1], got {alpha}")));
        }
        if agents == 0 {
            return Err(Error::invalid("suite needs at least one agent"));
        }
        let l = gp_sampler(domain, lengthscale)?;
        let base = normalized_sample(&l, &mut stream(seed, Stream::Objective, &[0]))?;
        let values = (0..agents)
            .map(|n| {
                let own =
                    normalized_sample(&l, &mut stream(seed, Stream::Objective, &[2, n as u64]))?;
                Ok(own
                    .iter()
                    .zip(&base)
                    .map(|(fi, fb)| alpha * fi + (1.0 - alpha) * fb)
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let header = SuiteHeader {
            grid_size: domain.len(),
            agents,
            seed,
            d: 0.0,
        };
        let mut suite = Self::from_values(header, values)?;
        suite.base = Some(base);
        Ok(suite)
    }

    pub fn header(&self) -> &SuiteHeader {
        &self.header
    }

    pub fn agents(&self) -> usize {
        self.header.agents
    }

    pub fn grid_size(&self) -> usize {
        self.header.grid_size
    }

    pub fn base(&self) -> Option<&[f64]> {
        self.base.as_deref()
    }

    pub fn values(&self, agent: usize) -> &[f64] {
        &self.values[agent]
    }

    pub fn value(&self, agent: usize, id: usize) -> Result<f64> {
        self.values
            .get(agent)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "agent {agent} out of range (suite has {})",
                    self.agents()
                ))
            })?
            .get(id)
            .copied()
            .ok_or_else(|| {
                Error::invalid(format!(
                    "grid id {id} out of range (grid has {})",
                    self.grid_size()
                ))
            })
    }

    /// max_x f^n(x)
    pub fn optimum(&self, agent: usize) -> f64 {
        self.optima[agent]
    }

    /// Queries agent `n` at grid point `id`; `value` is the noiseless f^n(x).
    pub fn evaluate<R: Rng + ?Sized>(
        &self,
        agent: usize,
        id: usize,
        noise: &NoiseModel,
        rng: &mut R,
    ) -> Result<Evaluation> {
        let value = self.value(agent, id)?;
        let zeta = if noise.variance > 0.0 {
            noise.variance.sqrt() * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        Ok(Evaluation {
            value,
            y: value + zeta,
        })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::Format(format!("writing suite: {e}"));
        writeln!(w, "{}", serde_json::to_string(&self.header)?).map_err(io)?;
        let mut line = String::new();
        for id in 0..self.grid_size() {
            line.clear();
            line.push_str(&id.to_string());
            for row in &self.values {
                line.push(' ');
                line.push_str(&row[id].to_string());
            }
            writeln!(w, "{line}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file))
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Parses a suite file. Every id in `0..grid_size` must appear exactly
    /// once; values outside [0, 1] are accepted with a warning.
    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Format("empty suite file".into()))?
            .map_err(|e| Error::Format(e.to_string()))?;
        let header: SuiteHeader = serde_json::from_str(&first)
            .map_err(|e| Error::Format(format!("bad suite header: {e}")))?;
        let mut values = vec![vec![f64::NAN; header.grid_size]; header.agents];
        let mut seen = vec![false; header.grid_size];
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Format(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let lineno = lineno + 2;
            let mut fields = line.split_whitespace();
            let id: usize = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Format(format!("line {lineno}: expected a grid id")))?;
            if id >= header.grid_size {
                return Err(Error::Format(format!(
                    "line {lineno}: grid id {id} exceeds grid size {}",
                    header.grid_size
                )));
            }
            if std::mem::replace(&mut seen[id], true) {
                return Err(Error::Format(format!(
                    "line {lineno}: duplicate grid id {id}"
                )));
            }
            let row: Vec<f64> = fields
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("line {lineno}: {e}")))?;
            if row.len() != header.agents {
                return Err(Error::Format(format!(
                    "line {lineno}: expected {} values, found {}",
                    header.agents,
                    row.len()
                )));
            }
            for (n, v) in row.into_iter().enumerate() {
                values[n][id] = v;
            }
        }
        if let Some(id) = seen.iter().position(|s| !s) {
            return Err(Error::Format(format!("suite file is missing grid id {id}")));
        }
        let outside = values
            .iter()
            .flatten()
            .filter(|v| !(0.0..=1.0).contains(*v))
            .count();
        if outside > 0 {
            log::warn!("{outside} suite values lie outside [0, 1]; loaded unchanged");
        }
        Self::from_values(header, values)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(file).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Domain {
        Domain::unit_interval(200).unwrap()
    }

    #[test]
    fn synthetic_is_normalized_and_perturbed() {
        let s = Suite::synthetic(&grid(), 20, 0.03, 0.02, 7).unwrap();
        let base = s.base().unwrap();
        assert_eq!(base.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(column_max(base), 1.0);
        for n in 0..20 {
            for (v, b) in s.values(n).iter().zip(base) {
                assert!(((v - b).abs() - 0.02).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_perturbation_shares_base() {
        let s = Suite::synthetic(&grid(), 5, 0.03, 0.0, 1).unwrap();
        for n in 0..5 {
            assert_eq!(s.values(n), s.base().unwrap());
        }
    }

    #[test]
    fn same_seed_same_suite() {
        let a = Suite::synthetic(&grid(), 4, 0.05, 0.02, 3).unwrap();
        let b = Suite::synthetic(&grid(), 4, 0.05, 0.02, 3).unwrap();
        assert_eq!(a, b);
        let c = Suite::synthetic(&grid(), 4, 0.05, 0.02, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_grid_rejected() {
        let d = Domain::from_points(&[(0.0, 1.0)], &[vec![0.5], vec![0.5]]).unwrap();
        assert!(Suite::synthetic(&d, 2, 0.03, 0.02, 0).is_err());
    }

    #[test]
    fn heterogeneous_endpoints() {
        let same = Suite::heterogeneous(&grid(), 6, 0.0, 0.05, 2).unwrap();
        for n in 1..6 {
            assert_eq!(same.values(n), same.values(0));
        }
        let indep = Suite::heterogeneous(&grid(), 6, 1.0, 0.05, 2).unwrap();
        assert_ne!(indep.values(0), indep.values(1));
        assert!(Suite::heterogeneous(&grid(), 6, 1.5, 0.05, 2).is_err());
    }

    #[test]
    fn noiseless_evaluation_returns_truth() {
        let s = Suite::synthetic(&grid(), 2, 0.03, 0.02, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = s
            .evaluate(1, 17, &NoiseModel::new(0.0).unwrap(), &mut rng)
            .unwrap();
        assert_eq!(e.y, e.value);
        assert_eq!(e.value, s.values(1)[17]);
        assert!(s.evaluate(2, 0, &NoiseModel::default(), &mut rng).is_err());
        assert!(s
            .evaluate(0, 200, &NoiseModel::default(), &mut rng)
            .is_err());
    }

    #[test]
    fn file_round_trip_is_exact() {
        let s = Suite::synthetic(&grid(), 3, 0.03, 0.02, 11).unwrap();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        let back = Suite::read_from(buf.as_slice()).unwrap();
        for n in 0..3 {
            assert_eq!(back.values(n), s.values(n));
        }
        assert_eq!(back.header(), s.header());
    }

    #[test]
    fn missing_id_is_named() {
        let text = "{\"grid_size\":3,\"agents\":1,\"seed\":0,\"d\":0.0}\n0 0.1\n2 0.3\n";
        let err = Suite::read_from(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("missing grid id 1"), "{err}");
    }

    #[test]
    fn out_of_range_values_load() {
        let text = "{\"grid_size\":2,\"agents\":2,\"seed\":0,\"d\":0.0}\n1 1.5 0.2\n0 -0.3 0.4\n";
        let s = Suite::read_from(text.as_bytes()).unwrap();
        assert_eq!(s.values(0), &[-0.3, 1.5]);
        assert_eq!(s.optimum(1), 0.4);
    }

    #[test]
    fn malformed_rows_rejected() {
        let h = "{\"grid_size\":2,\"agents\":2,\"seed\":0,\"d\":0.0}\n";
        assert!(Suite::read_from(format!("{h}0 0.1\n1 0.2 0.3\n").as_bytes()).is_err());
        assert!(Suite::read_from(format!("{h}0 0.1 x\n1 0.2 0.3\n").as_bytes()).is_err());
        assert!(Suite::read_from(format!("{h}0 0.1 0.1\n0 0.2 0.3\n").as_bytes()).is_err());
        assert!(Suite::read_from("not json\n".as_bytes()).is_err());
    }
}
