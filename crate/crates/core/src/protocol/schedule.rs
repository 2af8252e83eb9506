use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Smallest probability of running local Thompson sampling.
pub const P_MIN: f64 = 1e-6;

/// Probability `p_t` that an agent runs local Thompson sampling at round `t`
/// instead of using the server broadcast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PSchedule {
    /// 1 − p_t = 1/√t
    InvSqrt,
    /// 1 − p_t = 1/t
    Inv,
    /// 1 − p_t = 1/t²
    InvSquare,
    Constant {
        value: f64,
    },
    /// `values[t − 1]`, holding the last entry afterwards.
    Table {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PValue {
    pub p: f64,
    /// Raised to `P_MIN` from a smaller raw value.
    pub clamped: bool,
}

impl PSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        match self {
            PSchedule::Constant { value } if !ok(*value) => Err(Error::invalid(format!(
                "constant p_t must lie in [0, 1], got {value}"
            ))),
            PSchedule::Table { values } if values.is_empty() => {
                Err(Error::invalid("p_t table is empty"))
            }
            PSchedule::Table { values } => match values.iter().find(|v| !ok(**v)) {
                Some(v) => Err(Error::invalid(format!(
                    "p_t table entry {v} is outside [0, 1]"
                ))),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Unclamped formula value.
    pub fn raw(&self, t: u32) -> Result<f64> {
        if t == 0 {
            return Err(Error::invalid("p_t is defined for rounds t ≥ 1"));
        }
        let tf = t as f64;
        Ok(match self {
            PSchedule::InvSqrt => 1.0 - 1.0 / tf.sqrt(),
            PSchedule::Inv => 1.0 - 1.0 / tf,
            PSchedule::InvSquare => 1.0 - 1.0 / (tf * tf),
            PSchedule::Constant { value } => *value,
            PSchedule::Table { values } => *values
                .get(t as usize - 1)
                .or(values.last())
                .ok_or_else(|| Error::invalid("p_t table is empty"))?,
        })
    }

    pub fn p(&self, t: u32) -> Result<PValue> {
        let raw = self.raw(t)?;
        Ok(if raw < P_MIN {
            PValue {
                p: P_MIN,
                clamped: true,
            }
        } else {
            PValue {
                p: raw,
                clamped: false,
            }
        })
    }
}
