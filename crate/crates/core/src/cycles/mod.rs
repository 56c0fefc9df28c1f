//! Relative limit cycles under periodic rest-length forcing.
//!
//! The forced reduced system is sampled once per forcing period. A fixed
//! point of that stroboscopic map is a limit cycle of the reduced dynamics
//! and a relatively periodic orbit of the full crawler; the group shift
//! accumulated over one period is the stride.

mod perturbation;

pub use perturbation::{first_order_response, FirstOrderResponse, RayleighMode, SecondOrderShift};

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::equilibrium::homotopy_equilibrium;
use crate::error::{CrawlError, Result};
use crate::integrate::{flow_map, integrate, IntegratorConfig, Trajectory};
use crate::model::RestLengthSchedule;
use crate::reduction::{PlanarReduction, SymmetryReduction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CycleOptions {
    pub integrator: IntegratorConfig,
    /// Section time; the map samples at `t0 + kT`.
    pub t0: f64,
    pub tol: f64,
    pub picard_iterations: usize,
    /// Picard stops early once the defect drops below this.
    pub picard_tol: f64,
    pub newton_iterations: usize,
    pub fd_step: f64,
    /// Number of uniformly spaced samples kept from the converged cycle.
    pub n_samples: usize,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            t0: 0.0,
            tol: 1e-10,
            picard_iterations: 20,
            picard_tol: 1e-5,
            newton_iterations: 12,
            fd_step: 1e-6,
            n_samples: 200,
        }
    }
}

/// Converged relative limit cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleResult<G> {
    pub epsilon: f64,
    pub period: f64,
    pub t0: f64,
    /// Reduced state at the section.
    pub fixed_point: Vec<f64>,
    pub residual: f64,
    /// Group shift over one period.
    pub delta: G,
    /// Floquet multipliers as `[re, im]`, largest modulus first.
    pub floquet_multipliers: Vec<[f64; 2]>,
    pub converged: bool,
    pub iterations: usize,
    /// `∫ ⟨e, ν(q) u⟩ dt` over the cycle for each unit translation `e` of
    /// the ground plane. Vanishes on a cycle that returns translated only.
    pub momentum_balance: Vec<f64>,
    pub sample_times: Vec<f64>,
    /// Full phase states on the cycle, lifted at the identity.
    pub samples: Vec<Vec<f64>>,
}

impl<G> CycleResult<G> {
    pub fn max_multiplier(&self) -> f64 {
        self.floquet_multipliers.iter().map(|z| z[0].hypot(z[1])).fold(0.0, f64::max)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One forcing period of the reduced dynamics from `reduced` at `t0`.
/// Returns the reduced state after one period and the group shift.
pub fn stroboscopic_map<R: SymmetryReduction>(
    red: &R,
    reduced: &[f64],
    t0: f64,
    schedule: &RestLengthSchedule,
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, R::Group)> {
    stroboscopic_map_from(red, reduced, &red.identity(), t0, schedule, cfg)
}

/// As [`stroboscopic_map`], lifting at the fiber point `g`.
pub fn stroboscopic_map_from<R: SymmetryReduction>(
    red: &R,
    reduced: &[f64],
    g: &R::Group,
    t0: f64,
    schedule: &RestLengthSchedule,
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, R::Group)> {
    let y0 = red.lift(reduced, g)?;
    let c = red.crawler();
    let y1 = flow_map(|t, y, dy| c.eom_rhs(t, y, schedule, dy), &y0, t0, schedule.period(), cfg)?;
    let (r1, g1) = red.project(&y1)?;
    Ok((r1, red.shift(g, &g1)))
}

/// Reduced equilibrium with zero velocity.
pub fn rest_state<R: SymmetryReduction>(red: &R) -> Result<Vec<f64>> {
    let eq = homotopy_equilibrium(red)?;
    let mut r = eq.shape;
    r.resize(red.reduced_dim(), 0.0);
    Ok(r)
}

fn period_jacobian<R: SymmetryReduction>(
    red: &R,
    r: &[f64],
    pr: &[f64],
    schedule: &RestLengthSchedule,
    opts: &CycleOptions,
) -> Result<DMatrix<f64>> {
    let n = r.len();
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let h = opts.fd_step * r[j].abs().max(1.0);
        let mut rp = r.to_vec();
        rp[j] += h;
        let (p, _) = stroboscopic_map(red, &rp, opts.t0, schedule, &opts.integrator)?;
        for i in 0..n {
            jac[(i, j)] = (p[i] - pr[i]) / h;
        }
    }
    Ok(jac)
}

fn sorted_multipliers(jac: &DMatrix<f64>) -> Vec<[f64; 2]> {
    let mut m: Vec<[f64; 2]> = jac.complex_eigenvalues().iter().map(|z| [z.re, z.im]).collect();
    m.sort_by(|a, b| b[0].hypot(b[1]).total_cmp(&a[0].hypot(a[1])).then(b[1].total_cmp(&a[1])));
    m
}

/// Fixed point of the stroboscopic map by Picard iteration and Newton
/// polish with a finite-difference Jacobian, followed by one recorded
/// period of the converged cycle.
pub fn find_limit_cycle<R: SymmetryReduction>(
    red: &R,
    schedule: &RestLengthSchedule,
    seed: &[f64],
    opts: &CycleOptions,
) -> Result<CycleResult<R::Group>> {
    schedule.validate()?;
    let n = red.reduced_dim();
    if seed.len() != n {
        return Err(CrawlError::InvalidParameter(format!("seed has {} entries, expected {n}", seed.len())));
    }
    let mut r = seed.to_vec();
    let (mut pr, _) = stroboscopic_map(red, &r, opts.t0, schedule, &opts.integrator)?;
    let defect = |a: &[f64], b: &[f64]| norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
    let mut res = defect(&pr, &r);
    let mut iterations = 0;

    for _ in 0..opts.picard_iterations {
        if res <= opts.picard_tol {
            break;
        }
        r = pr;
        pr = stroboscopic_map(red, &r, opts.t0, schedule, &opts.integrator)?.0;
        res = defect(&pr, &r);
        iterations += 1;
    }
    debug!("picard: {iterations} iterations, defect {res:e}");

    let mut jac = None;
    for k in 0..opts.newton_iterations {
        if res <= opts.tol && jac.is_some() {
            break;
        }
        let j = period_jacobian(red, &r, &pr, schedule, opts)?;
        let g = DVector::from_iterator(n, pr.iter().zip(&r).map(|(a, b)| a - b));
        let step = (&j - DMatrix::identity(n, n)).lu().solve(&(-g)).ok_or(CrawlError::SingularPeriodMap)?;
        jac = Some(j);
        if res <= opts.tol {
            break;
        }
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..8 {
            let trial: Vec<f64> = r.iter().zip(step.iter()).map(|(a, b)| a + lambda * b).collect();
            if let Ok((pt, _)) = stroboscopic_map(red, &trial, opts.t0, schedule, &opts.integrator) {
                let rt = defect(&pt, &trial);
                if rt < res {
                    r = trial;
                    pr = pt;
                    res = rt;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        iterations += 1;
        debug!("newton {k}: defect {res:e}");
        if !improved {
            break;
        }
    }
    let converged = res <= opts.tol;
    if !converged {
        return Err(CrawlError::NoConvergence(format!(
            "stroboscopic fixed point stalled at defect {res:e} (tolerance {:e}) after {iterations} iterations",
            opts.tol
        )));
    }
    let jac = jac.expect("newton computed a jacobian");
    let floquet_multipliers = sorted_multipliers(&jac);
    record_cycle(red, schedule, r, res, floquet_multipliers, iterations, opts)
}

fn record_cycle<R: SymmetryReduction>(
    red: &R,
    schedule: &RestLengthSchedule,
    r: Vec<f64>,
    residual: f64,
    floquet_multipliers: Vec<[f64; 2]>,
    iterations: usize,
    opts: &CycleOptions,
) -> Result<CycleResult<R::Group>> {
    let period = schedule.period();
    let c = red.crawler();
    let y0 = red.lift(&r, &red.identity())?;
    let traj = integrate(
        |t, y, dy| c.eom_rhs(t, y, schedule, dy),
        opts.t0,
        &y0,
        opts.t0 + period,
        &IntegratorConfig { dense_output: true, ..opts.integrator.clone() },
    )?;
    let (_, g1) = red.project(traj.last())?;
    let delta = red.shift(&red.identity(), &g1);

    let nq = c.n_coords();
    let dim = c.layout().dim();
    let mut momentum_balance = Vec::new();
    for axis in 0..dim - 1 {
        let v = traj.quadrature(opts.t0, opts.t0 + period, |_, y| {
            let (q, u) = y.split_at(nq);
            let f = c.viscous_force(q, u)?;
            Ok(-(0..c.layout().n_masses()).map(|i| f[i * dim + axis]).sum::<f64>())
        })?;
        momentum_balance.push(v);
    }

    let mut sample_times = Vec::with_capacity(opts.n_samples + 1);
    let mut samples = Vec::with_capacity(opts.n_samples + 1);
    let mut sampler = traj.sampler();
    for k in 0..=opts.n_samples {
        let t = opts.t0 + period * k as f64 / opts.n_samples as f64;
        sample_times.push(t);
        samples.push(sampler.at(t)?);
    }
    Ok(CycleResult {
        epsilon: schedule.amplitude,
        period,
        t0: opts.t0,
        fixed_point: r,
        residual,
        delta,
        floquet_multipliers,
        converged: true,
        iterations,
        momentum_balance,
        sample_times,
        samples,
    })
}

/// Full trajectory of a converged cycle over `n_periods`, lifted at `g`.
pub fn cycle_trajectory<R: SymmetryReduction>(
    red: &R,
    schedule: &RestLengthSchedule,
    cycle: &CycleResult<R::Group>,
    g: &R::Group,
    n_periods: usize,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let c = red.crawler();
    let y0 = red.lift(&cycle.fixed_point, g)?;
    integrate(|t, y, dy| c.eom_rhs(t, y, schedule, dy), cycle.t0, &y0, cycle.t0 + n_periods as f64 * cycle.period, cfg)
}

/// Largest defect `‖y(t + T) − g·y(t)‖` over `n_checks` times in the first period,
/// with `g` the conjugated shift for the starting fiber point.
pub fn relative_periodicity_defect<R: SymmetryReduction>(
    red: &R,
    traj: &Trajectory,
    shift: &R::Group,
    g0: &R::Group,
    t0: f64,
    period: f64,
    n_checks: usize,
) -> Result<f64> {
    // y(t + T) = (g0 Δ g0⁻¹) · y(t) for a cycle started at fiber point g0
    let g0_inv = red.shift(g0, &red.identity());
    let conj = red.compose(&red.compose(g0, shift), &g0_inv);
    let mut worst: f64 = 0.0;
    for k in 0..n_checks {
        let t = t0 + period * k as f64 / n_checks as f64;
        let a = traj.sample_at(t)?;
        let b = traj.sample_at(t + period)?;
        let moved = red.act(&conj, &a);
        worst = worst.max(norm(&moved.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>()));
    }
    Ok(worst)
}

/// One row of an amplitude sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub epsilon: f64,
    pub delta_x: Option<f64>,
    /// Scaling exponent against the next (smaller) amplitude.
    pub p: Option<f64>,
    pub residual: Option<f64>,
    pub max_multiplier: Option<f64>,
    pub status: String,
}

/// `log(|a| / |b|) / log(εa / εb)`.
pub fn scaling_exponent(eps_a: f64, dx_a: f64, eps_b: f64, dx_b: f64) -> Option<f64> {
    if dx_a == 0.0 || dx_b == 0.0 || eps_a == eps_b {
        return None;
    }
    Some((dx_a.abs().ln() - dx_b.abs().ln()) / (eps_a.ln() - eps_b.ln()))
}

/// Least-squares slope of `log|Δx|` against `log ε`.
pub fn fitted_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(_, d)| *d != 0.0).map(|&(e, d)| (e.ln(), d.abs().ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Seed near the cycle of amplitude `eps` from the linear response.
pub fn linear_seed(response: &FirstOrderResponse, rest: &[f64], eps: f64) -> Vec<f64> {
    rest.iter().zip(response.reduced_at_section()).map(|(a, b)| a + eps * b).collect()
}

/// Stride against amplitude for a descending list of amplitudes.
///
/// With one thread each row starts from the previous row's cycle, scaled
/// toward the rest state; with more threads every row starts from the
/// linear response and rows run concurrently. Rows that fail are recorded
/// and the study continues.
pub fn scaling_study(
    red: &PlanarReduction,
    schedule: &RestLengthSchedule,
    epsilons: &[f64],
    opts: &CycleOptions,
    threads: usize,
) -> Result<Vec<ScalingRow>> {
    let mut eps: Vec<f64> = epsilons.to_vec();
    if eps.windows(2).any(|w| w[0] < w[1]) {
        warn!("amplitudes were not in descending order; sorting");
        eps.sort_by(|a, b| b.total_cmp(a));
    }
    if eps.iter().any(|&e| !(e > 0.0)) {
        return Err(CrawlError::InvalidParameter("sweep amplitudes must be positive".into()));
    }
    let rest = rest_state(red)?;
    let response = first_order_response(red, schedule)?;
    let solve = |e: f64, seed: &[f64]| -> (ScalingRow, Option<Vec<f64>>) {
        match find_limit_cycle(red, &schedule.with_amplitude(e), seed, opts) {
            Ok(c) => (
                ScalingRow {
                    epsilon: e,
                    delta_x: Some(c.delta),
                    p: None,
                    residual: Some(c.residual),
                    max_multiplier: Some(c.max_multiplier()),
                    status: "ok".into(),
                },
                Some(c.fixed_point),
            ),
            Err(err) => (
                ScalingRow {
                    epsilon: e,
                    delta_x: None,
                    p: None,
                    residual: None,
                    max_multiplier: None,
                    status: err.to_string(),
                },
                None,
            ),
        }
    };

    let mut rows: Vec<ScalingRow> = if threads <= 1 {
        let mut out = Vec::with_capacity(eps.len());
        let mut prev: Option<(f64, Vec<f64>)> = None;
        for &e in &eps {
            let seed = match &prev {
                Some((pe, fp)) => rest.iter().zip(fp).map(|(a, b)| a + (e / pe) * (b - a)).collect(),
                None => linear_seed(&response, &rest, e),
            };
            let (row, fp) = solve(e, &seed);
            if let Some(fp) = fp {
                prev = Some((e, fp));
            }
            out.push(row);
        }
        out
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CrawlError::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| eps.par_iter().map(|&e| solve(e, &linear_seed(&response, &rest, e)).0).collect())
    };
    for k in 0..rows.len().saturating_sub(1) {
        if let (Some(a), Some(b)) = (rows[k].delta_x, rows[k + 1].delta_x) {
            rows[k].p = scaling_exponent(rows[k].epsilon, a, rows[k + 1].epsilon, b);
        }
    }
    Ok(rows)
}

/// Unforced settling followed by forcing, with per-period strides.
#[derive(Debug, Clone)]
pub struct SettleRun {
    pub settle: Trajectory,
    pub forced: Trajectory,
    pub t_settle: f64,
    pub period: f64,
    /// `x₃` increment over each forcing period.
    pub period_shifts: Vec<f64>,
}

impl SettleRun {
    /// Concatenated node times and states of both phases.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, &[f64])> {
        let settle = self.settle.times().iter().copied().zip(self.settle.states());
        let forced = self.forced.times().iter().copied().zip(self.forced.states()).skip(1);
        settle.chain(forced)
    }
}

/// Starts at rest at the equilibrium (optionally displaced by `offset` in
/// reduced coordinates), waits `t_settle` with constant rest lengths and then
/// forces for `n_periods`, evaluating the schedule at absolute time.
pub fn settle_then_force(
    red: &PlanarReduction,
    schedule: &RestLengthSchedule,
    t_settle: f64,
    n_periods: usize,
    offset: Option<&[f64]>,
    cfg: &IntegratorConfig,
) -> Result<SettleRun> {
    let mut r = rest_state(red)?;
    if let Some(off) = offset {
        for (a, b) in r.iter_mut().zip(off) {
            *a += b;
        }
    }
    let y0 = red.lift(&r, &0.0)?;
    let c = red.crawler();
    let still = c.constant_schedule();
    let settle = integrate(|t, y, dy| c.eom_rhs(t, y, &still, dy), 0.0, &y0, t_settle, cfg)?;
    let period = schedule.period();
    let forced = integrate(
        |t, y, dy| c.eom_rhs(t, y, schedule, dy),
        t_settle,
        settle.last(),
        t_settle + n_periods as f64 * period,
        cfg,
    )?;
    let mut sampler = forced.sampler();
    let mut prev = forced.first()[4];
    let mut period_shifts = Vec::with_capacity(n_periods);
    for k in 1..=n_periods {
        let x3 = sampler.at(t_settle + k as f64 * period)?[4];
        period_shifts.push(x3 - prev);
        prev = x3;
    }
    Ok(SettleRun { settle, forced, t_settle, period, period_shifts })
}

/// Frequency of the largest non-constant Fourier component of uniformly
/// spaced samples, with the bin width.
pub fn dominant_frequency(samples: &[f64], dt: f64) -> (f64, f64) {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bin = 1.0 / (n as f64 * dt);
    let k = (1..n / 2 + 1).max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm())).unwrap_or(0);
    (k as f64 * bin, bin)
}

/// Strides from cycles seeded at random perturbations of the rest state.
pub fn robustness_shifts(
    red: &PlanarReduction,
    schedule: &RestLengthSchedule,
    n_seeds: usize,
    magnitude: f64,
    rng_seed: u64,
    opts: &CycleOptions,
) -> Result<Vec<f64>> {
    let rest = rest_state(red)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let seeds: Vec<Vec<f64>> = (0..n_seeds)
        .map(|_| {
            let d: Vec<f64> = (0..rest.len()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let s = magnitude / norm(&d);
            rest.iter().zip(&d).map(|(a, b)| a + s * b).collect()
        })
        .collect();
    seeds.iter().map(|seed| find_limit_cycle(red, schedule, seed, opts).map(|c| c.delta)).collect()
}
