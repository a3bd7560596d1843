//! Mapping from a point in `[0, 1]²` to an 8-bit RGB colour.
//!
//! With radius `r = √(a² + b²)` and angle `φ = arctan(b / a)`:
//!
//! ```text
//! θ     = (1 - r / √2)^γ
//! red   = ⌊255·θ⌋
//! green = ⌊255·θ^(max(0, π/4 - φ) + 1)⌋
//! blue  = ⌊255·θ^(max(0, φ - π/4) + 1)⌋
//! ```
//!
//! The origin is white, `(1, 1)` is black, the diagonal is grey, and points
//! below or above the diagonal lean magenta or yellow respectively.

use std::f64::consts::{FRAC_PI_4, SQRT_2};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ColorError {
    #[error("colourspace input {name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("colourspace gamma must be finite and > 0, got {0}")]
    BadGamma(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgb8 {
    pub red: u8,
    pub green: u8,
    pub blue: u8,
}

impl Rgb8 {
    pub const WHITE: Rgb8 = Rgb8 {
        red: 255,
        green: 255,
        blue: 255,
    };
    pub const BLACK: Rgb8 = Rgb8 {
        red: 0,
        green: 0,
        blue: 0,
    };
}

/// `#rrggbb`
impl fmt::Display for Rgb8 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02x}{:02x}{:02x}", self.red, self.green, self.blue)
    }
}

#[inline]
fn channel(v: f64) -> u8 {
    (255.0 * v).floor().clamp(0.0, 255.0) as u8
}

pub fn map2d(a: f64, b: f64, gamma: f64) -> Result<Rgb8, ColorError> {
    for (name, value) in [("a", a), ("b", b)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(ColorError::OutOfRange { name, value });
        }
    }
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(ColorError::BadGamma(gamma));
    }
    let base = (1.0 - a.hypot(b) / SQRT_2).max(0.0);
    let theta = base.powf(gamma);
    // Angular distance from the diagonal, computed from the ordered pair so
    // that swapping a and b swaps green and blue exactly. Equals π/4 - φ
    // below the diagonal and φ - π/4 above it; a = 0 gives φ = π/2.
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let off_diagonal = if lo == hi { 0.0 } else { FRAC_PI_4 - lo.atan2(hi) };
    let (green_exp, blue_exp) = if a > b {
        (off_diagonal + 1.0, 1.0)
    } else {
        (1.0, off_diagonal + 1.0)
    };
    Ok(Rgb8 {
        red: channel(theta),
        green: channel(theta.powf(green_exp)),
        blue: channel(theta.powf(blue_exp)),
    })
}
