//! Windowed expectation, conditional expectation, dependency (sDep) and
//! covariance (sCov) over pairs of binary traces.
//!
//! For a window `[u, v)` with power-of-sine weights `w`, the expectation of
//! a trace is `Σ w(t)·f(t) / Σ w`. A pair `(x, y)` at shift `δ` pairs `x(t)`
//! with `y(t + δ)`:
//!
//! ```text
//! sDep = max(0, 1 - E[x]·E[y] / E[x·y])
//! sCov = max(0, 4·(E[x·y] - E[x]·E[y]))
//! ```
//!
//! Both land in `[0, 1]` for binary inputs; a link is significant when both
//! exceed their thresholds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{weighted_sum_sparse, window_bits};
use crate::trace_model::{BinTrace, WindowSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("window [{u}, {v}) is too small: at least 3 cycles required")]
    WindowTooSmall { u: usize, v: usize },
    #[error("window exponent must be finite and >= 0, got {0}")]
    BadAlpha(f64),
    #[error("threshold {name} must be finite and >= 0, got {value}")]
    BadThreshold { name: &'static str, value: f64 },
}

/// Builds the window `[u, v)` with weights `sin^α(kπ / (v - u - 1))`.
///
/// `alpha = 0` gives the rectangular window (every weight 1, endpoints
/// included).
pub fn window_weights(u: usize, v: usize, alpha: f64) -> Result<WindowSpec, MeasureError> {
    if v < u || v - u < 3 {
        return Err(MeasureError::WindowTooSmall { u, v });
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(MeasureError::BadAlpha(alpha));
    }
    let n = v - u;
    let denom = (n - 1) as f64;
    let weights: Vec<f64> = (0..n)
        .map(|k| {
            if alpha == 0.0 {
                return 1.0;
            }
            // fold onto the first half so w(k) == w(n-1-k) bit for bit
            let k = k.min(n - 1 - k) as f64;
            (k * std::f64::consts::PI / denom).sin().powf(alpha)
        })
        .collect();
    let weight_sum = weights.iter().sum();
    Ok(WindowSpec {
        u,
        v,
        alpha,
        weights,
        weight_sum,
    })
}

#[inline]
pub(crate) fn normalize(weighted: f64, weight_sum: f64) -> f64 {
    (weighted / weight_sum).clamp(0.0, 1.0)
}

/// Weighted expectation of `trace` shifted by `delta` over `window`.
pub fn expectation(trace: &BinTrace, window: &WindowSpec, delta: i64) -> f64 {
    let acc: f64 = window
        .weights
        .iter()
        .enumerate()
        .filter(|&(k, _)| trace.shifted_sample((window.u + k) as i64, delta) == 1)
        .map(|(_, w)| w)
        .sum();
    normalize(acc, window.weight_sum)
}

/// `E[x | y] = E[x·y] / E[y]`, undefined when `E[y] = 0`.
pub fn cond_expectation(ex_xy: f64, ex_y: f64) -> Option<f64> {
    if ex_y > 0.0 {
        Some((ex_xy / ex_y).clamp(0.0, 1.0))
    } else {
        None
    }
}

/// Thresholded dependency. Zero whenever `E[x·y] = 0`.
pub fn dep(ex_x: f64, ex_y: f64, ex_xy: f64) -> f64 {
    if ex_xy <= 0.0 {
        return 0.0;
    }
    let phi = 1.0 - (ex_x * ex_y) / ex_xy;
    phi.clamp(0.0, 1.0)
}

/// Thresholded covariance, scaled by 4 onto `[0, 1]`.
pub fn cov(ex_x: f64, ex_y: f64, ex_xy: f64) -> f64 {
    (4.0 * (ex_xy - ex_x * ex_y)).clamp(0.0, 1.0)
}

/// Everything known about one `(x, y⟨δ⟩)` link in one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub ex_x: f64,
    pub ex_y: f64,
    pub ex_xy: f64,
    pub dep: f64,
    pub cov: f64,
    /// `None` when `E[y] = 0`.
    pub cond_ex: Option<f64>,
}

impl PairMetrics {
    pub fn from_expectations(ex_x: f64, ex_y: f64, ex_xy: f64) -> Self {
        PairMetrics {
            ex_x,
            ex_y,
            ex_xy,
            dep: dep(ex_x, ex_y, ex_xy),
            cov: cov(ex_x, ex_y, ex_xy),
            cond_ex: cond_expectation(ex_xy, ex_y),
        }
    }

    /// Ranking score used to pick one shift per relation.
    #[inline]
    pub fn strength(&self) -> f64 {
        self.dep * self.cov
    }
}

/// Metrics for `x(t)` against `y(t + delta)` over `window`.
///
/// `x` is never shifted. Samples of `y` that fall outside its record read
/// as 0.
pub fn pair_metrics(x: &BinTrace, y: &BinTrace, window: &WindowSpec, delta: i64) -> PairMetrics {
    let start = window.u as i64;
    let xw = window_bits(x, start, window.len());
    let yw = window_bits(y, start + delta, window.len());
    let both: Vec<u64> = xw.iter().zip(&yw).map(|(a, b)| a & b).collect();
    let sum = window.weight_sum;
    PairMetrics::from_expectations(
        normalize(weighted_sum_sparse(&xw, &window.weights), sum),
        normalize(weighted_sum_sparse(&yw, &window.weights), sum),
        normalize(weighted_sum_sparse(&both, &window.weights), sum),
    )
}

/// Minimum sDep and sCov a link must strictly exceed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Thresholds {
    pub dep: f64,
    pub cov: f64,
}

impl Thresholds {
    pub fn new(dep: f64, cov: f64) -> Result<Self, MeasureError> {
        for (name, value) in [("eps_dep", dep), ("eps_cov", cov)] {
            if !value.is_finite() || value < 0.0 {
                return Err(MeasureError::BadThreshold { name, value });
            }
        }
        Ok(Thresholds { dep, cov })
    }
}

pub fn significant(m: &PairMetrics, eps: &Thresholds) -> bool {
    m.dep > eps.dep && m.cov > eps.cov
}
