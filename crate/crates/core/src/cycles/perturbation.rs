//! Small-amplitude expansion of the forced cycle about the standing
//! equilibrium.
//!
//! At first order the reduced state follows the periodic response of the
//! linearization to the rest-length forcing and the stride vanishes. The
//! leading stride is quadratic in the amplitude; its coefficient comes from
//! averaging the horizontal momentum balance along the first-order cycle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::equilibrium::{homotopy_equilibrium, reduced_linearization, Linearization, RightInverse};
use crate::error::{CrawlError, Result};
use crate::integrate::{integrate, IntegratorConfig, Trajectory};
use crate::model::RestLengthSchedule;
use crate::reduction::{PlanarReduction, SymmetryReduction};

/// Periodic solution of the linearized reduced dynamics driven by the
/// unit-amplitude rest-length forcing, in `(δshape, u)` coordinates.
#[derive(Debug, Clone)]
pub struct FirstOrderResponse {
    pub equilibrium_shape: Vec<f64>,
    /// Equilibrium configuration lifted at the identity.
    pub q_star: Vec<f64>,
    pub linearization: Linearization,
    /// Chart Jacobian at `q_star`.
    pub chart_jacobian: DMatrix<f64>,
    pub period: f64,
    /// Periodic initial state at `t = 0`.
    pub initial: Vec<f64>,
    /// One period of the response from `initial`.
    pub trajectory: Trajectory,
    /// `‖y(T) − y(0)‖` of the stored period.
    pub periodicity_defect: f64,
}

impl FirstOrderResponse {
    /// Reduced-state offset per unit amplitude at `t = 0`: shape offset and
    /// chart velocity.
    pub fn reduced_at_section(&self) -> Vec<f64> {
        let m = self.linearization.shape_dim();
        let u = DVector::from_column_slice(&self.initial[m..]);
        let v = &self.chart_jacobian * u;
        let mut out = self.initial[..m].to_vec();
        out.extend(v.iter());
        out
    }

    /// First-order stride `∫ v₃ dt` over one period; vanishes for any
    /// zero-mean forcing.
    pub fn first_order_shift(&self) -> Result<f64> {
        let m = self.linearization.shape_dim();
        let row = self.chart_jacobian.row(self.chart_jacobian.nrows() - 1).into_owned();
        self.trajectory.quadrature(0.0, self.period, |_, y| Ok((&row * DVector::from_column_slice(&y[m..]))[0]))
    }

    /// Response `(δs, u)` at time `t` in the first period.
    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        self.trajectory.sample_at(t)
    }
}

fn forcing_gradients(red: &impl SymmetryReduction, q: &[f64]) -> Result<Vec<Vec<f64>>> {
    let c = red.crawler();
    let k = c.params().kappa_s;
    Ok(c.spring_length_gradients(q)?.into_iter().map(|g| g.into_iter().map(|x| k * x).collect()).collect())
}

/// Periodic first-order response of the reduced dynamics to `schedule`
/// (the amplitude of `schedule` is ignored).
pub fn first_order_response<R: SymmetryReduction>(
    red: &R,
    schedule: &RestLengthSchedule,
) -> Result<FirstOrderResponse> {
    schedule.validate()?;
    let eq = homotopy_equilibrium(red)?;
    let q_star = red.lift_configuration(&eq.shape, &red.identity())?;
    let lin = reduced_linearization(red, &eq.shape, RightInverse::FiberAdapted)?;
    let chart_jacobian = red.chart_jacobian(&q_star)?;
    let grads = forcing_gradients(red, &q_star)?;
    let m = lin.shape_dim();
    let n = lin.dim();
    let period = schedule.period();
    let cfg = IntegratorConfig { rtol: 1e-12, atol: 1e-14, ..IntegratorConfig::default() };
    let a = &lin.a;
    let mut dir = vec![0.0; schedule.n_springs()];
    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let ay = a * DVector::from_column_slice(y);
        dy.copy_from_slice(ay.as_slice());
        schedule.direction_into(t, &mut dir);
        for (s, g) in dir.iter().zip(&grads) {
            for (i, gi) in g.iter().enumerate() {
                dy[m + i] += s * gi;
            }
        }
        Ok(())
    };

    // y(T) = M y(0) + c with M = exp(A T); the periodic start solves (I − M) y0 = c
    let forced =
        integrate(&mut rhs, 0.0, &vec![0.0; n], period, &IntegratorConfig { dense_output: false, ..cfg.clone() })?;
    let c = DVector::from_column_slice(forced.last());
    let mono = (a * period).exp();
    let y0 = (DMatrix::identity(n, n) - mono).lu().solve(&c).ok_or(CrawlError::SingularPeriodMap)?;
    let trajectory = integrate(&mut rhs, 0.0, y0.as_slice(), period, &cfg)?;
    let periodicity_defect = (DVector::from_column_slice(trajectory.last()) - &y0).norm();
    Ok(FirstOrderResponse {
        equilibrium_shape: eq.shape,
        q_star,
        linearization: lin,
        chart_jacobian,
        period,
        initial: y0.as_slice().to_vec(),
        trajectory,
        periodicity_defect,
    })
}

/// Which Rayleigh matrix enters the second-order stride.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayleighMode {
    /// The configuration-dependent dissipation of the model.
    Full,
    /// Cartesian dissipation frozen at its equilibrium value.
    Frozen,
}

/// Stride expansion `Δx ≈ ε Δx⁽¹⁾ + ε² Δx⁽²⁾`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderShift {
    pub first_order: f64,
    pub second_order: f64,
    pub mode: RayleighMode,
}

impl SecondOrderShift {
    pub fn predict(&self, epsilon: f64) -> f64 {
        epsilon * self.first_order + epsilon * epsilon * self.second_order
    }

    /// Computes both coefficients for the planar crawler.
    pub fn compute(red: &PlanarReduction, schedule: &RestLengthSchedule, mode: RayleighMode) -> Result<Self> {
        let resp = first_order_response(red, schedule)?;
        Self::from_response(red, &resp, mode)
    }

    pub fn from_response(red: &PlanarReduction, resp: &FirstOrderResponse, mode: RayleighMode) -> Result<Self> {
        let c = red.crawler();
        let m = resp.linearization.shape_dim();
        let n = red.n_coords();
        let nu_star = c.rayleigh_matrix(&resp.q_star)?;
        let chart_damping = |s: &[f64]| -> Result<DMatrix<f64>> {
            let q = red.lift_configuration(s, &0.0)?;
            let jinv = red
                .chart_jacobian(&q)?
                .try_inverse()
                .ok_or_else(|| CrawlError::ChartDomain("singular chart jacobian".into()))?;
            let nu = match mode {
                RayleighMode::Full => c.rayleigh_matrix(&q)?,
                RayleighMode::Frozen => nu_star.clone(),
            };
            Ok(jinv.transpose() * nu * jinv)
        };
        // the group velocity is the last chart velocity
        let gv = n - 1;
        let base = chart_damping(&resp.equilibrium_shape)?;
        let nu_group = base[(gv, gv)];
        let h = 1e-6;
        let mut w = DMatrix::zeros(m, n);
        for j in 0..m {
            let mut sp = resp.equilibrium_shape.clone();
            let mut sm = resp.equilibrium_shape.clone();
            sp[j] += h;
            sm[j] -= h;
            let d = (chart_damping(&sp)? - chart_damping(&sm)?) / (2.0 * h);
            w.row_mut(j).copy_from(&d.row(gv));
        }

        let jc = &resp.chart_jacobian;
        let second = resp.trajectory.quadrature(0.0, resp.period, |_, y| {
            let v = jc * DVector::from_column_slice(&y[m..]);
            Ok(DVector::from_column_slice(&y[..m]).dot(&(&w * v)))
        })?;
        Ok(Self { first_order: resp.first_order_shift()?, second_order: -second / nu_group, mode })
    }
}
