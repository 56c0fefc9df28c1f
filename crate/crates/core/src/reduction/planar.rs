//! Translation reduction of the planar crawler.
//!
//! Chart `(z₁, z₂, ℓ₁, ℓ₂, ℓ₃)` with fiber coordinate `x₃`. Valid while
//! mass 1 is left of mass 2 and mass 3 sits above the line through them.

use nalgebra::DMatrix;

use super::{check_positive, sq, SymmetryReduction};
use crate::dual::Scalar;
use crate::error::{CrawlError, Result};
use crate::model::{Crawler, Layout};

/// Height of mass 3 over a base at heights `z1`, `z2`, upward branch.
pub fn mass3_height<S: Scalar>(z1: S, z2: S, l1: S, l2: S, l3: S) -> Result<S> {
    let (a, h, ex, ez) = apex_frame(z1, z2, l1, l2, l3)?;
    Ok(z1 + a * ez + h * ex)
}

// Along-base offset `a`, altitude `h` and base direction `(ex, ez)`.
fn apex_frame<S: Scalar>(z1: S, z2: S, l1: S, l2: S, l3: S) -> Result<(S, S, S, S)> {
    check_positive(l3, "base length must be positive")?;
    let dz = z2 - z1;
    let gap = check_positive(sq(l3) - sq(dz), "base steeper than vertical")?.sqrt();
    let ex = gap / l3;
    let ez = dz / l3;
    let a = (sq(l2) - sq(l1) + sq(l3)) / l3.scale(2.0);
    let h = check_positive(sq(l2) - sq(a), "rest triangle violates the triangle inequality")?.sqrt();
    Ok((a, h, ex, ez))
}

/// Configuration for chart point `shape = (z₁, z₂, ℓ₁, ℓ₂, ℓ₃)` with mass 3 at `x3`.
pub fn lift_2d(shape: &[f64], x3: f64) -> Result<Vec<f64>> {
    let [z1, z2, l1, l2, l3] = <[f64; 5]>::try_from(shape)
        .map_err(|_| CrawlError::InvalidParameter("planar shape has 5 coordinates".into()))?;
    let (a, h, ex, ez) = apex_frame(z1, z2, l1, l2, l3)?;
    let gap = ex * l3;
    let p3 = [a * ex - h * ez, z1 + a * ez + h * ex];
    let off = x3 - p3[0];
    Ok(vec![off, z1, off + gap, z2, x3, p3[1]])
}

/// Chart point and `x₃` of a configuration.
pub fn project_2d(q: &[f64]) -> Result<([f64; 5], f64)> {
    let (bx, bz) = (q[2] - q[0], q[3] - q[1]);
    if !(bx > 0.0) {
        return Err(CrawlError::ChartDomain(format!("mass 1 is not left of mass 2 (gap {bx:e})")));
    }
    let (cx, cz) = (q[4] - q[0], q[5] - q[1]);
    if !(bx * cz - bz * cx > 0.0) {
        return Err(CrawlError::ChartDomain("mass 3 is not above the base".into()));
    }
    let l1 = ((q[4] - q[2]).powi(2) + (q[5] - q[3]).powi(2)).sqrt();
    let l2 = (cx * cx + cz * cz).sqrt();
    let l3 = (bx * bx + bz * bz).sqrt();
    Ok(([q[1], q[3], l1, l2, l3], q[4]))
}

#[derive(Debug, Clone)]
pub struct PlanarReduction {
    crawler: Crawler,
}

impl PlanarReduction {
    pub fn new(crawler: Crawler) -> Result<Self> {
        if crawler.layout() != Layout::Planar {
            return Err(CrawlError::InvalidParameter("translation reduction needs the planar crawler".into()));
        }
        Ok(Self { crawler })
    }
}

impl SymmetryReduction for PlanarReduction {
    type Group = f64;

    fn crawler(&self) -> &Crawler {
        &self.crawler
    }

    fn shape_dim(&self) -> usize {
        5
    }

    fn n_ground(&self) -> usize {
        2
    }

    fn identity(&self) -> f64 {
        0.0
    }

    fn act(&self, g: &f64, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        for i in 0..3 {
            out[2 * i] += g;
        }
        out
    }

    fn shift(&self, g0: &f64, g1: &f64) -> f64 {
        g1 - g0
    }

    fn compose(&self, a: &f64, b: &f64) -> f64 {
        a + b
    }

    fn group_distance(&self, a: &f64, b: &f64) -> f64 {
        (a - b).abs()
    }

    fn chart(&self, q: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (s, x3) = project_2d(q)?;
        Ok((s.to_vec(), x3))
    }

    fn chart_jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let grads = self.crawler.spring_length_gradients(q)?;
        let mut j = DMatrix::zeros(6, 6);
        j[(0, 1)] = 1.0;
        j[(1, 3)] = 1.0;
        for (k, g) in grads.iter().enumerate() {
            for (c, v) in g.iter().enumerate() {
                j[(2 + k, c)] = *v;
            }
        }
        j[(5, 4)] = 1.0;
        Ok(j)
    }

    fn lift_configuration(&self, shape: &[f64], g: &f64) -> Result<Vec<f64>> {
        lift_2d(shape, *g)
    }

    fn apex_height<S: Scalar>(&self, s: &[S]) -> Result<S> {
        mass3_height(s[0], s[1], s[2], s[3], s[4])
    }
}
