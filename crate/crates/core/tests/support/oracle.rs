//! Direct-summation reference for the windowed measures.
//!
//! Works on plain `Vec<u8>` samples and re-derives everything from the
//! definitions: the window is evaluated term by term, implied forms are
//! computed per sample, and sDep goes through the conditional expectation
//! `(E[x|y] - E[x]) / E[x|y]` rather than the product form.

#![allow(dead_code)]

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Level,
    Reflect,
    Rise,
    Fall,
}

pub const KINDS: [Kind; 4] = [Kind::Level, Kind::Reflect, Kind::Rise, Kind::Fall];

/// Sample of an implied form at `t`; zero outside the trace.
pub fn sample(bits: &[u8], kind: Kind, t: i64) -> f64 {
    if t < 0 || t >= bits.len() as i64 {
        return 0.0;
    }
    let t = t as usize;
    let now = bits[t] == 1;
    let before = t > 0 && bits[t - 1] == 1;
    let on = match kind {
        Kind::Level => now,
        Kind::Reflect => !now,
        Kind::Rise => t > 0 && now && !before,
        Kind::Fall => t > 0 && !now && before,
    };
    if on {
        1.0
    } else {
        0.0
    }
}

pub fn weight(k: usize, n: usize, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 1.0;
    }
    // sin(0) and sin(π) are exactly zero; the floating-point sin(π) is not
    if k == 0 || k == n - 1 {
        return 0.0;
    }
    let s = (k as f64 * PI / (n - 1) as f64).sin().max(0.0);
    s.powf(alpha)
}

pub struct Oracle {
    pub ex_x: f64,
    pub ex_y: f64,
    pub ex_xy: f64,
    pub cond_ex: Option<f64>,
    pub raw_cov: f64,
    pub dep: f64,
    pub cov: f64,
}

/// Expectation of `kind` of `bits` over `[u, v)` with `y` read `delta` later.
pub fn expectation(bits: &[u8], kind: Kind, u: usize, v: usize, alpha: f64, delta: i64) -> f64 {
    let n = v - u;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..n {
        let w = weight(k, n, alpha);
        num += w * sample(bits, kind, (u + k) as i64 + delta);
        den += w;
    }
    num / den
}

#[allow(clippy::too_many_arguments)]
pub fn pair(x: &[u8], kx: Kind, y: &[u8], ky: Kind, u: usize, v: usize, alpha: f64, delta: i64) -> Oracle {
    let n = v - u;
    let (mut sx, mut sy, mut sxy, mut den) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..n {
        let t = (u + k) as i64;
        let w = weight(k, n, alpha);
        let a = sample(x, kx, t);
        let b = sample(y, ky, t + delta);
        sx += w * a;
        sy += w * b;
        sxy += w * a * b;
        den += w;
    }
    let (ex_x, ex_y, ex_xy) = (sx / den, sy / den, sxy / den);
    let cond_ex = if ex_y == 0.0 { None } else { Some(ex_xy / ex_y) };
    let dep = match cond_ex {
        Some(c) if c > 0.0 => ((c - ex_x) / c).max(0.0),
        _ => 0.0,
    };
    let raw_cov = ex_xy - ex_x * ex_y;
    Oracle {
        ex_x,
        ex_y,
        ex_xy,
        cond_ex,
        raw_cov,
        dep,
        cov: (4.0 * raw_cov).max(0.0),
    }
}
