//! Moments accountant for the subsampled Gaussian mechanism.
//!
//! With μ₀ = N(0, z²), μ₁ = N(1, z²) and the mixture μ = (1 − q)μ₀ + qμ₁, the
//! log moment of order `m` for one round is
//!
//! ```text
//! α(m) = ln max( E_{μ₀}[(μ₀/μ)^m], E_{μ}[(μ/μ₀)^m] ).
//! ```
//!
//! Rounds compose additively in α, and the tail bound gives
//! `ε = min_m (T·α(m) + ln(1/δ)) / m` over integer orders.
//!
//! Both expectations are one-dimensional integrals evaluated with adaptive
//! Gauss–Kronrod quadrature on the log-integrand shifted by its maximum, so
//! moments as large as e^8000 are handled without overflow.

use serde::Serialize;

use crate::{Error, Result};

/// Highest moment order tried by default.
pub const DEFAULT_MAX_ORDER: u32 = 64;

/// δ = N^(−1.1).
pub fn delta_default(agents: usize) -> f64 {
    (agents as f64).powf(-1.1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Initial equal-width panels across the integration range.
    pub panels: usize,
    /// Relative tolerance on each integral.
    pub rel_tol: f64,
    /// Cap on adaptive bisections.
    pub max_splits: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            panels: 64,
            rel_tol: 1e-10,
            max_splits: 20_000,
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// (Kronrod estimate, |Kronrod − Gauss|) on [a, b].
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive integration: keep bisecting the panel with the largest
/// error estimate until the summed error drops below `rel_tol·|total|`.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, opts: &QuadratureOptions) -> Result<f64> {
    let width = (b - a) / opts.panels as f64;
    let mut panels: Vec<(f64, f64, f64, f64)> = (0..opts.panels)
        .map(|k| {
            let lo = a + width * k as f64;
            let hi = if k + 1 == opts.panels { b } else { lo + width };
            let (v, e) = gk15(&f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    for _ in 0..opts.max_splits {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= opts.rel_tol * total.abs() {
            return Ok(total);
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one panel");
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    Err(Error::Numeric(format!(
        "quadrature did not reach relative tolerance {:e} within {} splits",
        opts.rel_tol, opts.max_splits
    )))
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let hi = a.max(b);
    hi + (-(a - b).abs()).exp().ln_1p()
}

/// ln ∫ exp(g(x)) dx over [a, b], shifting by the sampled maximum of g.
fn log_integral(g: impl Fn(f64) -> f64, a: f64, b: f64, opts: &QuadratureOptions) -> Result<f64> {
    let probes = 8 * opts.panels * 15;
    let shift = (0..=probes)
        .map(|k| g(a + (b - a) * k as f64 / probes as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    let value = integrate(|x| (g(x) - shift).exp(), a, b, opts)?;
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::Numeric(format!(
            "log-moment integral evaluated to {value}"
        )));
    }
    Ok(shift + value.ln())
}

fn check_inputs(q: f64, z: f64, order: u32) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("q must lie in [0, 1], got {q}")));
    }
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::invalid(format!(
            "noise multiplier z must be positive, got {z}"
        )));
    }
    if order == 0 {
        return Err(Error::invalid("moment order must be at least 1"));
    }
    Ok(())
}

/// α(m) for one invocation at sampling rate `q` and noise multiplier `z`.
pub fn log_moment(q: f64, z: f64, order: u32) -> Result<f64> {
    log_moment_with(q, z, order, &QuadratureOptions::default())
}

pub fn log_moment_with(q: f64, z: f64, order: u32, opts: &QuadratureOptions) -> Result<f64> {
    check_inputs(q, z, order)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    let m = order as f64;
    let inv2z2 = 1.0 / (2.0 * z * z);
    let norm = -(z * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let log_mu0 = move |x: f64| norm - x * x * inv2z2;
    let log_mu1 = move |x: f64| norm - (x - 1.0) * (x - 1.0) * inv2z2;
    let log_keep = if q < 1.0 {
        (-q).ln_1p()
    } else {
        f64::NEG_INFINITY
    };
    let log_q = q.ln();
    let log_mu = move |x: f64| log_add_exp(log_keep + log_mu0(x), log_q + log_mu1(x));

    // For q = 1 the two integrands are Gaussians centred at −m and m + 1, so
    // the range has to reach past both.
    let reach = (m + 1.0) + (20.0 + m) * z;
    let e1 = log_integral(
        |x| {
            let l0 = log_mu0(x);
            l0 + m * (l0 - log_mu(x))
        },
        -reach,
        reach,
        opts,
    )?;
    let e2 = log_integral(
        |x| {
            let l = log_mu(x);
            l + m * (l - log_mu0(x))
        },
        -reach,
        reach,
        opts,
    )?;
    Ok(e1.max(e2).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrivacyLoss {
    pub epsilon: f64,
    /// Minimizing moment order; `None` when nothing was released.
    pub order: Option<u32>,
}

/// Minimizes (T·α(m) + ln(1/δ))/m over m = 1..=max_order given precomputed α.
fn tail_bound(alphas: &[f64], rounds: u64, delta: f64) -> PrivacyLoss {
    let log_inv_delta = -delta.ln();
    alphas
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let m = (k + 1) as f64;
            PrivacyLoss {
                epsilon: (rounds as f64 * a + log_inv_delta) / m,
                order: Some(k as u32 + 1),
            }
        })
        .min_by(|a, b| a.epsilon.total_cmp(&b.epsilon))
        .expect("at least one order")
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("δ must lie in (0, 1), got {delta}")))
    }
}

/// Privacy loss after `rounds` invocations.
pub fn epsilon(q: f64, z: f64, rounds: u64, delta: f64, max_order: u32) -> Result<PrivacyLoss> {
    check_delta(delta)?;
    check_inputs(q, z, max_order.max(1))?;
    if max_order == 0 {
        return Err(Error::invalid("max moment order must be at least 1"));
    }
    if rounds == 0 || q == 0.0 {
        return Ok(PrivacyLoss {
            epsilon: 0.0,
            order: None,
        });
    }
    let alphas = (1..=max_order)
        .map(|m| log_moment(q, z, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(tail_bound(&alphas, rounds, delta))
}

/// Running privacy loss of a training run: one entry per released broadcast.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyLedger {
    q: f64,
    z: f64,
    delta: f64,
    rounds: u64,
    /// α(1..=max_order); empty when z = 0 (no privacy).
    alphas: Vec<f64>,
}

impl PrivacyLedger {
    /// A ledger for mechanism parameters `(q, z)`. With `z = 0` every release
    /// makes the loss infinite.
    pub fn new(q: f64, z: f64, delta: f64, max_order: u32) -> Result<Self> {
        check_delta(delta)?;
        if max_order == 0 {
            return Err(Error::invalid("max moment order must be at least 1"));
        }
        let alphas = if z == 0.0 {
            Vec::new()
        } else {
            (1..=max_order)
                .map(|m| log_moment(q, z, m))
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Self {
            q,
            z,
            delta,
            rounds: 0,
            alphas,
        })
    }

    /// Charges one mechanism invocation.
    pub fn record_round(&mut self) {
        self.rounds += 1;
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn params(&self) -> (f64, f64) {
        (self.q, self.z)
    }

    pub fn loss(&self) -> PrivacyLoss {
        if self.rounds == 0 || self.q == 0.0 {
            return PrivacyLoss {
                epsilon: 0.0,
                order: None,
            };
        }
        if self.alphas.is_empty() {
            return PrivacyLoss {
                epsilon: f64::INFINITY,
                order: None,
            };
        }
        tail_bound(&self.alphas, self.rounds, self.delta)
    }

    pub fn epsilon(&self) -> f64 {
        self.loss().epsilon
    }
}
