//! Contact regularization profile `χ`.
//!
//! `χ(x) = x²/2` below the ground and `0` above it. It is C¹; the optional
//! mollified variant blends the two branches with a quintic smoothstep on
//! `(-w, w)`, which makes it C² while agreeing exactly outside that band.

use serde::{Deserialize, Serialize};

use crate::dual::Scalar;

pub const DEFAULT_MOLLIFIER_WIDTH: f64 = 1e-3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmoothingProfile {
    #[default]
    RawC1,
    Mollified {
        width: f64,
    },
}

impl SmoothingProfile {
    pub fn mollified() -> Self {
        SmoothingProfile::Mollified { width: DEFAULT_MOLLIFIER_WIDTH }
    }

    /// Width of the band where the profile may differ from the raw one.
    pub fn width(&self) -> f64 {
        match *self {
            SmoothingProfile::RawC1 => 0.0,
            SmoothingProfile::Mollified { width } => width,
        }
    }
}

// Quintic smoothstep on [0, 1] and its derivatives.
#[inline]
fn smoothstep(t: f64) -> (f64, f64, f64) {
    let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    let ds = 30.0 * t * t * (1.0 - t) * (1.0 - t);
    let d2s = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
    (s, ds, d2s)
}

pub fn chi(x: f64, profile: SmoothingProfile) -> f64 {
    match profile {
        SmoothingProfile::RawC1 => {
            if x < 0.0 {
                0.5 * x * x
            } else {
                0.0
            }
        }
        SmoothingProfile::Mollified { width } => {
            if x <= -width {
                0.5 * x * x
            } else if x >= width {
                0.0
            } else {
                let (s, _, _) = smoothstep((x + width) / (2.0 * width));
                (1.0 - s) * 0.5 * x * x
            }
        }
    }
}

pub fn chi_prime(x: f64, profile: SmoothingProfile) -> f64 {
    match profile {
        SmoothingProfile::RawC1 => {
            if x < 0.0 {
                x
            } else {
                0.0
            }
        }
        SmoothingProfile::Mollified { width } => {
            if x <= -width {
                x
            } else if x >= width {
                0.0
            } else {
                let (s, ds, _) = smoothstep((x + width) / (2.0 * width));
                (1.0 - s) * x - ds / (2.0 * width) * 0.5 * x * x
            }
        }
    }
}

/// Second derivative of `χ`; for the raw profile the one-sided value at 0 is 0.
pub fn chi_second(x: f64, profile: SmoothingProfile) -> f64 {
    match profile {
        SmoothingProfile::RawC1 => {
            if x < 0.0 {
                1.0
            } else {
                0.0
            }
        }
        SmoothingProfile::Mollified { width } => {
            if x <= -width {
                1.0
            } else if x >= width {
                0.0
            } else {
                let k = 1.0 / (2.0 * width);
                let (s, ds, d2s) = smoothstep((x + width) * k);
                (1.0 - s) - 2.0 * ds * k * x - d2s * k * k * 0.5 * x * x
            }
        }
    }
}

/// `χ` over any [`Scalar`], so derivatives of the reduced potential come out exactly.
pub fn chi_generic<S: Scalar>(x: S, profile: SmoothingProfile) -> S {
    let r = x.re();
    match profile {
        SmoothingProfile::RawC1 => {
            if r < 0.0 {
                (x * x).scale(0.5)
            } else {
                S::from_f64(0.0)
            }
        }
        SmoothingProfile::Mollified { width } => {
            if r <= -width {
                (x * x).scale(0.5)
            } else if r >= width {
                S::from_f64(0.0)
            } else {
                let t = (x + S::from_f64(width)).scale(1.0 / (2.0 * width));
                let s = t * t * t * (S::from_f64(10.0) - t.scale(15.0) + (t * t).scale(6.0));
                (S::from_f64(1.0) - s) * (x * x).scale(0.5)
            }
        }
    }
}
