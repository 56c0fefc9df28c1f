//! Planar-isometry reduction of the four-mass crawler.
//!
//! Shape `(z₁, z₂, z₃, ℓ₁, …, ℓ₆)` with lengths in pair order
//! (1,2), (1,3), (1,4), (2,3), (2,4), (3,4). The group position is
//! `(θ, x₁, y₁)`: the heading of mass 2 seen from mass 1 and the ground
//! position of mass 1. Masses 1, 2, 3 run counterclockwise seen from above
//! and mass 4 sits above their plane.

use nalgebra::DMatrix;

use super::{check_positive, sq, Se2, SymmetryReduction};
use crate::dual::Scalar;
use crate::error::{CrawlError, Result};
use crate::model::{Crawler, Layout, MIN_DISTANCE};

type V3<S> = [S; 3];

fn sub<S: Scalar>(a: V3<S>, b: V3<S>) -> V3<S> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot<S: Scalar>(a: V3<S>, b: V3<S>) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross<S: Scalar>(a: V3<S>, b: V3<S>) -> V3<S> {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn scale<S: Scalar>(a: V3<S>, c: S) -> V3<S> {
    [a[0] * c, a[1] * c, a[2] * c]
}

/// Tetrad with mass 1 above the origin and mass 2 above the positive x axis.
pub fn canonical_tetrad<S: Scalar>(s: &[S]) -> Result<[V3<S>; 4]> {
    if s.len() != 9 {
        return Err(CrawlError::InvalidParameter("spatial shape has 9 coordinates".into()));
    }
    let zero = S::from_f64(0.0);
    let two = S::from_f64(2.0);
    let (z1, z2, z3) = (s[0], s[1], s[2]);
    let (l12, l13, l14, l23, l24, l34) = (s[3], s[4], s[5], s[6], s[7], s[8]);

    let d = check_positive(sq(l12) - sq(z2 - z1), "masses 1 and 2 stacked vertically")?.sqrt();
    let p1 = [zero, zero, z1];
    let p2 = [d, zero, z2];
    let a = sq(l13) - sq(z3 - z1);
    let b = sq(l23) - sq(z3 - z2);
    let x3 = (a - b + d * d) / (two * d);
    let y3 = check_positive(a - x3 * x3, "ground triangle is degenerate")?.sqrt();
    let p3 = [x3, y3, z3];

    // trilaterate mass 4 on the side of (p2 − p1) × (p3 − p1)
    let e12 = sub(p2, p1);
    let dd = dot(e12, e12).sqrt();
    let ex = scale(e12, S::from_f64(1.0) / dd);
    let v13 = sub(p3, p1);
    let i = dot(ex, v13);
    let ey_raw = sub(v13, scale(ex, i));
    let j = check_positive(dot(ey_raw, ey_raw), "ground triangle is degenerate")?.sqrt();
    let ey = scale(ey_raw, S::from_f64(1.0) / j);
    let ez = cross(ex, ey);
    let x = (sq(l14) - sq(l24) + dd * dd) / (two * dd);
    let y = (sq(l14) - sq(l34) + i * i + j * j) / (two * j) - i / j * x;
    let z = check_positive(sq(l14) - x * x - y * y, "lengths do not close a tetrad")?.sqrt();
    let p4 = [
        p1[0] + ex[0] * x + ey[0] * y + ez[0] * z,
        p1[1] + ex[1] * x + ey[1] * y + ez[1] * z,
        p1[2] + ex[2] * x + ey[2] * y + ez[2] * z,
    ];
    Ok([p1, p2, p3, p4])
}

#[derive(Debug, Clone)]
pub struct SpatialReduction {
    crawler: Crawler,
}

impl SpatialReduction {
    pub fn new(crawler: Crawler) -> Result<Self> {
        if crawler.layout() != Layout::Spatial {
            return Err(CrawlError::InvalidParameter("SE(2) reduction needs the spatial crawler".into()));
        }
        Ok(Self { crawler })
    }

    /// Body velocity `(ω, ξx, ξy)` of a phase vector.
    pub fn body_velocity(&self, y: &[f64]) -> Result<[f64; 3]> {
        let (r, _) = self.project(y)?;
        Ok([r[18], r[19], r[20]])
    }
}

fn point(q: &[f64], i: usize) -> [f64; 3] {
    [q[3 * i], q[3 * i + 1], q[3 * i + 2]]
}

impl SymmetryReduction for SpatialReduction {
    type Group = Se2;

    fn crawler(&self) -> &Crawler {
        &self.crawler
    }

    fn shape_dim(&self) -> usize {
        9
    }

    fn n_ground(&self) -> usize {
        3
    }

    fn identity(&self) -> Se2 {
        Se2::IDENTITY
    }

    fn act(&self, g: &Se2, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        let n = 12;
        for i in 0..4 {
            let p = g.apply([y[3 * i], y[3 * i + 1]]);
            out[3 * i] = p[0];
            out[3 * i + 1] = p[1];
            if y.len() >= 2 * n {
                let v = g.rotate([y[n + 3 * i], y[n + 3 * i + 1]]);
                out[n + 3 * i] = v[0];
                out[n + 3 * i + 1] = v[1];
            }
        }
        out
    }

    fn shift(&self, g0: &Se2, g1: &Se2) -> Se2 {
        g0.inverse().compose(g1)
    }

    fn compose(&self, a: &Se2, b: &Se2) -> Se2 {
        a.compose(b)
    }

    fn group_distance(&self, a: &Se2, b: &Se2) -> f64 {
        a.distance(b)
    }

    fn chart(&self, q: &[f64]) -> Result<(Vec<f64>, Se2)> {
        let p: Vec<[f64; 3]> = (0..4).map(|i| point(q, i)).collect();
        let b = sub(p[1], p[0]);
        let c = sub(p[2], p[0]);
        let rho = (b[0] * b[0] + b[1] * b[1]).sqrt();
        if !(rho >= MIN_DISTANCE) {
            return Err(CrawlError::ChartDomain("masses 1 and 2 are vertically stacked".into()));
        }
        if !(b[0] * c[1] - b[1] * c[0] > 0.0) {
            return Err(CrawlError::ChartDomain("masses 1, 2, 3 are not counterclockwise".into()));
        }
        if !(dot(sub(p[3], p[0]), cross(b, c)) > 0.0) {
            return Err(CrawlError::ChartDomain("mass 4 is below the ground triangle".into()));
        }
        let mut shape = vec![p[0][2], p[1][2], p[2][2]];
        shape.extend(self.crawler.spring_lengths(q)?);
        let g = Se2::new(b[1].atan2(b[0]), p[0][0], p[0][1]);
        Ok((shape, g))
    }

    fn chart_jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let grads = self.crawler.spring_length_gradients(q)?;
        let mut j = DMatrix::zeros(12, 12);
        for i in 0..3 {
            j[(i, 3 * i + 2)] = 1.0;
        }
        for (k, g) in grads.iter().enumerate() {
            for (c, v) in g.iter().enumerate() {
                j[(3 + k, c)] = *v;
            }
        }
        let (dx, dy) = (q[3] - q[0], q[4] - q[1]);
        let r2 = dx * dx + dy * dy;
        if !(r2.sqrt() >= MIN_DISTANCE) {
            return Err(CrawlError::ChartDomain("masses 1 and 2 are vertically stacked".into()));
        }
        j[(9, 0)] = dy / r2;
        j[(9, 1)] = -dx / r2;
        j[(9, 3)] = -dy / r2;
        j[(9, 4)] = dx / r2;
        let th = dy.atan2(dx);
        let (s, c) = th.sin_cos();
        j[(10, 0)] = c;
        j[(10, 1)] = s;
        j[(11, 0)] = -s;
        j[(11, 1)] = c;
        Ok(j)
    }

    fn lift_configuration(&self, shape: &[f64], g: &Se2) -> Result<Vec<f64>> {
        let p = canonical_tetrad(shape)?;
        let mut q = Vec::with_capacity(12);
        for pt in p {
            let a = g.apply([pt[0], pt[1]]);
            q.extend_from_slice(&[a[0], a[1], pt[2]]);
        }
        Ok(q)
    }

    fn apex_height<S: Scalar>(&self, shape: &[S]) -> Result<S> {
        Ok(canonical_tetrad(shape)?[3][2])
    }
}
