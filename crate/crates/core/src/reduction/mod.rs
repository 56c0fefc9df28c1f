//! Quotient charts for the translation and planar-isometry symmetries.
//!
//! A reduced state is the shape vector (ground-mass heights followed by
//! spring lengths) together with the chart velocities: the shape rates and
//! the group velocity expressed so that it is invariant under the action.
//! Lifting places the crawler at a canonical group position and then acts
//! with the requested element.

mod planar;
mod se2;
mod spatial;

pub use planar::{lift_2d, mass3_height, project_2d, PlanarReduction};
pub use se2::{wrap_angle, Se2};
pub use spatial::{canonical_tetrad, SpatialReduction};

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::dual::Scalar;
use crate::error::{CrawlError, Result};
use crate::integrate::{integrate, IntegratorConfig, Trajectory};
use crate::model::Crawler;

/// A free, proper symmetry of a crawler together with a global chart of
/// its quotient near the standing configuration.
pub trait SymmetryReduction: Sync {
    type Group: Clone + Debug + PartialEq + Send + Sync + Serialize + DeserializeOwned;

    fn crawler(&self) -> &Crawler;

    /// Number of shape coordinates.
    fn shape_dim(&self) -> usize;

    /// Number of masses whose heights are shape coordinates; the rest
    /// of the crawler sits on top of them.
    fn n_ground(&self) -> usize;

    fn identity(&self) -> Self::Group;

    /// Acts on a phase vector `(q, u)`.
    fn act(&self, g: &Self::Group, y: &[f64]) -> Vec<f64>;

    /// Relative shift `g0⁻¹ · g1`.
    fn shift(&self, g0: &Self::Group, g1: &Self::Group) -> Self::Group;

    fn compose(&self, a: &Self::Group, b: &Self::Group) -> Self::Group;

    fn group_distance(&self, a: &Self::Group, b: &Self::Group) -> f64;

    /// Shape vector and group position of a configuration.
    fn chart(&self, q: &[f64]) -> Result<(Vec<f64>, Self::Group)>;

    /// Derivative of the chart: shape rates followed by the invariant group
    /// velocity, as a linear map of the Cartesian velocity.
    fn chart_jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>>;

    fn lift_configuration(&self, shape: &[f64], g: &Self::Group) -> Result<Vec<f64>>;

    /// Height of the top mass as a function of the shape.
    fn apex_height<S: Scalar>(&self, shape: &[S]) -> Result<S>;

    fn n_coords(&self) -> usize {
        self.crawler().n_coords()
    }

    fn reduced_dim(&self) -> usize {
        self.shape_dim() + self.n_coords()
    }

    /// Reduced state and fiber position of a phase vector.
    fn project(&self, y: &[f64]) -> Result<(Vec<f64>, Self::Group)> {
        let n = self.n_coords();
        let (q, u) = y.split_at(n);
        let (mut shape, g) = self.chart(q)?;
        let j = self.chart_jacobian(q)?;
        let v = &j * DVector::from_column_slice(u);
        shape.extend(v.iter());
        Ok((shape, g))
    }

    fn lift(&self, reduced: &[f64], g: &Self::Group) -> Result<Vec<f64>> {
        let m = self.shape_dim();
        if reduced.len() != self.reduced_dim() {
            return Err(CrawlError::InvalidParameter(format!(
                "reduced state has {} entries, expected {}",
                reduced.len(),
                self.reduced_dim()
            )));
        }
        let mut y = self.lift_configuration(&reduced[..m], g)?;
        let j = self.chart_jacobian(&y)?;
        let u = j
            .lu()
            .solve(&DVector::from_column_slice(&reduced[m..]))
            .ok_or_else(|| CrawlError::ChartDomain("singular chart jacobian".into()))?;
        y.extend(u.iter());
        Ok(y)
    }

    /// Shape rows of the chart Jacobian.
    fn shape_jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let j = self.chart_jacobian(q)?;
        Ok(j.rows(0, self.shape_dim()).into_owned())
    }

    /// Right inverse of the shape Jacobian that leaves the group velocity at zero.
    fn fiber_adapted_right_inverse(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let j = self.chart_jacobian(q)?;
        let inv = j.try_inverse().ok_or_else(|| CrawlError::ChartDomain("singular chart jacobian".into()))?;
        Ok(inv.columns(0, self.shape_dim()).into_owned())
    }
}

/// Integrates the full equations from a phase vector and returns the path.
pub fn simulate<R: SymmetryReduction>(
    red: &R,
    y0: &[f64],
    t0: f64,
    t_end: f64,
    schedule: &crate::model::RestLengthSchedule,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let c = red.crawler();
    integrate(|t, y, dy| c.eom_rhs(t, y, schedule, dy), t0, y0, t_end, cfg)
}

/// `Δx = ∫ v₃ dt` over `[t0, t0 + period]` from dense output of the
/// horizontal velocity of mass 3.
pub fn reconstruct_shift_2d(traj: &Trajectory, t0: f64, period: f64) -> Result<f64> {
    // u block starts after the six positions; x₃ is position index 4
    traj.integrate_component(6 + 4, t0, t0 + period)
}

/// Solves `ġ = g · ξ(t)` from the identity over `[t0, t0 + period]`.
///
/// `xi(t)` returns the body velocity `(ω, ξx, ξy)`.
pub fn reconstruct_shift_3d<F>(xi: F, t0: f64, period: f64, cfg: &IntegratorConfig) -> Result<Se2>
where
    F: Fn(f64) -> Result<[f64; 3]>,
{
    let tr = integrate(
        |t, g, dg| {
            let [w, bx, by] = xi(t)?;
            let (s, c) = g[0].sin_cos();
            dg[0] = w;
            dg[1] = c * bx - s * by;
            dg[2] = s * bx + c * by;
            Ok(())
        },
        t0,
        &[0.0, 0.0, 0.0],
        t0 + period,
        &IntegratorConfig { dense_output: false, ..cfg.clone() },
    )?;
    let g = tr.last();
    Ok(Se2::new(g[0], g[1], g[2]))
}

#[inline]
pub(crate) fn sq<S: Scalar>(x: S) -> S {
    x * x
}

#[inline]
pub(crate) fn check_positive<S: Scalar>(v: S, what: &str) -> Result<S> {
    if v.re() > 0.0 && v.re().is_finite() {
        Ok(v)
    } else {
        Err(CrawlError::ChartDomain(format!("{what} ({:e})", v.re())))
    }
}
