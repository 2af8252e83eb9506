//! Per-sub-region agent weights.
//!
//! For sub-region `i` agent `n` receives
//!
//! ```text
//! φ⁽ⁱ⁾ₙ = exp((a·Iₙ⁽ⁱ⁾ + 1)/T) / Σₘ exp((a·Iₘ⁽ⁱ⁾ + 1)/T)
//! ```
//!
//! where `Iₙ⁽ⁱ⁾` is 1 when agent `n` explores region `i`. The temperature
//! follows `T_t = a/(a_t − 1)` for a piecewise-linear `a_t` that starts at
//! `a + 1` and decays to 1, where the weights become exactly uniform.

use serde::{Deserialize, Serialize};

use crate::domain::Assignment;
use crate::{Error, Result};

/// Shape of the `a_t` sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    /// Hold `start` for rounds `1..=hold`, then step linearly down to 1 over
    /// the next `decay` rounds (both ends included), then stay at 1.
    Linear { start: f64, hold: u32, decay: u32 },
    /// Explicit `(round, a_t)` breakpoints, linearly interpolated, clamped at
    /// both ends.
    Breakpoints { points: Vec<(u32, f64)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// Temperature follows the profile.
    #[default]
    Adaptive,
    /// Temperature pinned at 1 for every round.
    FixedTemperature,
    /// Every weight is 1/N regardless of assignment.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSchedule {
    /// Sharpness constant `a`.
    pub a: f64,
    pub profile: Profile,
    #[serde(default)]
    pub mode: WeightMode,
}

/// Softmax temperature; `Infinite` means uniform weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Finite(f64),
    Infinite,
}

impl WeightSchedule {
    /// Hold for 5 rounds, reach 1 at round 10.
    pub fn synthetic() -> Self {
        Self {
            a: 15.0,
            profile: Profile::Linear {
                start: 16.0,
                hold: 5,
                decay: 5,
            },
            mode: WeightMode::Adaptive,
        }
    }

    /// Hold for 10 rounds, reach 1 at round 40.
    pub fn real_world() -> Self {
        Self {
            a: 15.0,
            profile: Profile::Linear {
                start: 16.0,
                hold: 10,
                decay: 30,
            },
            mode: WeightMode::Adaptive,
        }
    }

    pub fn with_mode(mut self, mode: WeightMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::invalid(format!(
                "weight sharpness a must be positive, got {}",
                self.a
            )));
        }
        match &self.profile {
            Profile::Linear { start, .. } if *start >= 1.0 && start.is_finite() => Ok(()),
            Profile::Linear { start, .. } => Err(Error::invalid(format!(
                "a_t profile must start at or above 1, got {start}"
            ))),
            Profile::Breakpoints { points } => {
                if points.is_empty() {
                    return Err(Error::invalid("breakpoint profile is empty"));
                }
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 || w[1].1 > w[0].1 {
                        return Err(Error::invalid(
                            "breakpoints must have increasing rounds and nonincreasing a_t",
                        ));
                    }
                }
                if points.iter().any(|&(_, v)| !(v >= 1.0 && v.is_finite())) {
                    return Err(Error::invalid("breakpoint a_t values must be at least 1"));
                }
                Ok(())
            }
        }
    }

    /// The `a_t` value at round `t ≥ 1`.
    pub fn a_t(&self, t: u32) -> f64 {
        match &self.profile {
            Profile::Linear { start, hold, decay } => {
                if t <= *hold {
                    *start
                } else if t > hold + decay || *decay <= 1 {
                    1.0
                } else {
                    let step = (t - hold - 1) as f64 / (*decay - 1) as f64;
                    start - (start - 1.0) * step
                }
            }
            Profile::Breakpoints { points } => {
                let (first, last) = (points[0], points[points.len() - 1]);
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let k = points.windows(2).position(|w| t < w[1].0).unwrap_or(0);
                let ((t0, v0), (t1, v1)) = (points[k], points[k + 1]);
                v0 + (v1 - v0) * (t - t0) as f64 / (t1 - t0) as f64
            }
        }
    }

    pub fn temperature(&self, t: u32) -> Temperature {
        match self.mode {
            WeightMode::FixedTemperature => Temperature::Finite(1.0),
            WeightMode::Uniform => Temperature::Infinite,
            WeightMode::Adaptive => {
                let at = self.a_t(t);
                if at <= 1.0 {
                    Temperature::Infinite
                } else {
                    Temperature::Finite(self.a / (at - 1.0))
                }
            }
        }
    }

    pub fn weights(&self, assignment: &Assignment, t: u32) -> WeightMatrix {
        WeightMatrix::softmax(assignment, self.a, self.temperature(t))
    }
}

/// `P` rows of `N` agent weights, each row summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: Vec<Vec<f64>>,
    max: f64,
}

impl WeightMatrix {
    pub fn uniform(regions: usize, agents: usize) -> Self {
        let w = 1.0 / agents as f64;
        Self {
            rows: vec![vec![w; agents]; regions],
            max: w,
        }
    }

    pub fn softmax(assignment: &Assignment, a: f64, temperature: Temperature) -> Self {
        let (p, n) = (assignment.regions(), assignment.agents());
        let temp = match temperature {
            Temperature::Infinite => return Self::uniform(p, n),
            Temperature::Finite(t) => t,
        };
        // Only two logits occur per row: (a + 1)/T for assigned agents and
        // 1/T for the rest. Subtracting the larger keeps exp() in range.
        let rows: Vec<Vec<f64>> = (0..p)
            .map(|i| {
                let logits: Vec<f64> = (0..n)
                    .map(|agent| {
                        let ind = if assignment.is_assigned(agent, i) {
                            1.0
                        } else {
                            0.0
                        };
                        (a * ind + 1.0) / temp
                    })
                    .collect();
                let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
                let total: f64 = exps.iter().sum();
                exps.into_iter().map(|e| e / total).collect()
            })
            .collect();
        let max = rows.iter().flatten().copied().fold(0.0, f64::max);
        Self { rows, max }
    }

    /// Builds from explicit rows. Each row must be a probability vector.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || n == 0 {
            return Err(Error::invalid("weight matrix must be nonempty"));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::invalid(format!(
                    "weight row {i} has {} entries, expected {n}",
                    r.len()
                )));
            }
            let s: f64 = r.iter().sum();
            if r.iter().any(|&w| w < 0.0) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "weight row {i} is not a probability vector"
                )));
            }
        }
        let max = rows.iter().flatten().copied().fold(0.0, f64::max);
        Ok(Self { rows, max })
    }

    pub fn regions(&self) -> usize {
        self.rows.len()
    }

    pub fn agents(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, region: usize) -> &[f64] {
        &self.rows[region]
    }

    pub fn get(&self, region: usize, agent: usize) -> f64 {
        self.rows[region][agent]
    }

    /// φ_max, the largest entry.
    pub fn max(&self) -> f64 {
        self.max
    }
}
