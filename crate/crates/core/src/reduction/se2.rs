//! The planar Euclidean group, stored as `(φ, x, y)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Rotation by `phi` followed by translation by `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Se2 {
    pub phi: f64,
    pub x: f64,
    pub y: f64,
}

/// Angle representative in `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

impl Se2 {
    pub const IDENTITY: Se2 = Se2 { phi: 0.0, x: 0.0, y: 0.0 };

    pub fn new(phi: f64, x: f64, y: f64) -> Self {
        Self { phi: wrap_angle(phi), x, y }
    }

    pub fn rotation(phi: f64) -> Self {
        Self::new(phi, 0.0, 0.0)
    }

    pub fn translation(x: f64, y: f64) -> Self {
        Self { phi: 0.0, x, y }
    }

    #[inline]
    pub fn rotate(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.phi.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    }

    #[inline]
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let r = self.rotate(p);
        [r[0] + self.x, r[1] + self.y]
    }

    /// `self · other`: apply `other` first.
    pub fn compose(&self, other: &Se2) -> Se2 {
        let t = self.rotate([other.x, other.y]);
        Se2::new(self.phi + other.phi, self.x + t[0], self.y + t[1])
    }

    pub fn inverse(&self) -> Se2 {
        let (s, c) = self.phi.sin_cos();
        Se2::new(-self.phi, -(c * self.x + s * self.y), -(-s * self.x + c * self.y))
    }

    /// Group exponential of the body velocity `(ω, ξx, ξy)` held for time `t`.
    pub fn exp(omega: f64, xi_x: f64, xi_y: f64, t: f64) -> Se2 {
        let th = omega * t;
        // V = [[a, −b], [b, a]] with a = sin θ/θ, b = (1 − cos θ)/θ
        let (a, b) = if th.abs() < 1e-6 {
            (1.0 - th * th / 6.0, th / 2.0 - th * th * th / 24.0)
        } else {
            (th.sin() / th, (1.0 - th.cos()) / th)
        };
        let (vx, vy) = (xi_x * t, xi_y * t);
        Se2::new(th, a * vx - b * vy, b * vx + a * vy)
    }

    pub fn distance(&self, other: &Se2) -> f64 {
        let dphi = wrap_angle(self.phi - other.phi);
        (dphi * dphi + (self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}
