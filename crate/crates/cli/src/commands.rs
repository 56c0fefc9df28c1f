use std::fs;
use std::path::Path;

use log::{info, warn};
use relcrawl::cycles::{
    cycle_trajectory, find_limit_cycle, first_order_response, linear_seed, rest_state, robustness_shifts,
    scaling_study, settle_then_force, CycleOptions, CycleResult, RayleighMode, SecondOrderShift,
};
use relcrawl::equilibrium::{certify_stability, FailureKind, StabilityReport, Verdict};
use relcrawl::integrate::{integrate, IntegratorConfig, Trajectory};
use relcrawl::reduction::{Se2, SpatialReduction, SymmetryReduction};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ModelKind};
use crate::output::{
    fmt, write_json, write_plot_data, write_sweep_csv, write_table, GNUPLOT_TEMPLATE, GNUPLOT_TEMPLATE_3D,
};
use crate::CliError;

/// Result of a command: exit code and a one-line summary for the terminal.
#[derive(Debug)]
pub struct Outcome {
    pub code: u8,
    pub summary: String,
}

impl Outcome {
    fn ok(summary: String) -> Self {
        Self { code: 0, summary }
    }
}

fn state_header(n: usize, dim: usize) -> Vec<String> {
    let axes: &[&str] = if dim == 2 { &["x", "z"] } else { &["x", "y", "z"] };
    let mut h = vec!["t".to_string()];
    for prefix in ["", "u"] {
        for i in 0..n / dim {
            for a in axes {
                h.push(format!("{prefix}{a}{}", i + 1));
            }
        }
    }
    h
}

fn cycle_options(cfg: &ExperimentConfig) -> Result<CycleOptions, CliError> {
    Ok(CycleOptions { integrator: cfg.integrator()?, n_samples: cfg.cycle_samples, ..CycleOptions::default() })
}

fn uniform_samples(traj: &Trajectory, t0: f64, t1: f64, dt: f64) -> Result<Vec<Vec<f64>>, CliError> {
    let n = ((t1 - t0) / dt).round() as usize;
    let mut sampler = traj.sampler();
    let mut rows = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = (t0 + k as f64 * dt).min(t1);
        let mut row = vec![t];
        row.extend(sampler.at(t)?);
        rows.push(row);
    }
    Ok(rows)
}

pub fn certify(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let report = match cfg.model {
        ModelKind::Crawler2d => certify_stability(&cfg.planar()?),
        ModelKind::Crawler3d => certify_stability(&cfg.spatial()?),
    };
    write_json(&out.join("certify.json"), &report)?;
    Ok(certify_outcome(&report))
}

fn certify_outcome(r: &StabilityReport) -> Outcome {
    let code = match (r.verdict, r.failure_kind) {
        (Verdict::RobustlyStable, _) => 0,
        (_, Some(FailureKind::Assumption)) => 2,
        (_, Some(FailureKind::Numerical)) => 3,
        _ => 1,
    };
    let mut summary = format!("verdict {:?}, spectral abscissa {:e}", r.verdict, r.spectral_abscissa);
    if let Some(f) = &r.failure {
        summary.push_str(&format!(" ({f})"));
    }
    Outcome { code, summary }
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path, emit_plots: bool) -> Result<Outcome, CliError> {
    match cfg.model {
        ModelKind::Crawler2d => simulate_planar(cfg, out, emit_plots),
        ModelKind::Crawler3d => simulate_spatial(cfg, out, emit_plots),
    }
}

fn simulate_planar(cfg: &ExperimentConfig, out: &Path, emit_plots: bool) -> Result<Outcome, CliError> {
    let red = cfg.planar()?;
    let sched = cfg.schedule()?;
    let icfg = cfg.integrator()?;
    let run = settle_then_force(&red, &sched, cfg.t_settle, cfg.n_periods, cfg.settle_offset.as_deref(), &icfg)?;
    let mut rows = uniform_samples(&run.settle, 0.0, run.t_settle, cfg.sample_dt)?;
    rows.pop();
    rows.extend(uniform_samples(&run.forced, run.t_settle, run.forced.t_end(), cfg.sample_dt)?);
    write_table(&out.join("trajectory.csv"), &state_header(6, 2), &rows)?;
    let shifts: Vec<Vec<f64>> = run
        .period_shifts
        .iter()
        .enumerate()
        .map(|(k, &s)| vec![(k + 1) as f64, run.t_settle + (k + 1) as f64 * run.period, s])
        .collect();
    write_table(&out.join("shifts.csv"), &["period".into(), "t_end".into(), "shift".into()], &shifts)?;
    if emit_plots {
        let coords: Vec<Vec<f64>> = rows.iter().map(|r| r[..7].to_vec()).collect();
        let h: Vec<String> = ["t", "x1", "z1", "x2", "z2", "x3", "z3"].iter().map(|s| s.to_string()).collect();
        write_plot_data(&out.join("coordinates.dat"), &h, &coords)?;
        let path: Vec<Vec<f64>> = rows.iter().map(|r| r[1..7].to_vec()).collect();
        write_plot_data(&out.join("path.dat"), &h[1..], &path)?;
        fs::write(out.join("plot.gp"), GNUPLOT_TEMPLATE)?;
    }
    let last = run.period_shifts.last().copied().unwrap_or(0.0);
    Ok(Outcome::ok(format!(
        "{} periods at epsilon {}, last-period shift {}",
        cfg.n_periods,
        sched.amplitude,
        fmt(last)
    )))
}

/// Per-period group increments of a spatial run, `[phi, x, y]` in the frame
/// of the start of each period.
fn spatial_period_shifts(
    red: &SpatialReduction,
    traj: &Trajectory,
    t0: f64,
    period: f64,
    n: usize,
) -> Result<Vec<Se2>, CliError> {
    let mut prev = red.project(&traj.sample_at(t0)?)?.1;
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        let g = red.project(&traj.sample_at(t0 + k as f64 * period)?)?.1;
        out.push(red.shift(&prev, &g));
        prev = g;
    }
    Ok(out)
}

fn ground_path(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let mut p = vec![r[0]];
            for i in 0..4 {
                p.extend([r[1 + 3 * i], r[2 + 3 * i]]);
            }
            p
        })
        .collect()
}

fn path_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 1..=4 {
        h.extend([format!("x{i}"), format!("y{i}")]);
    }
    h
}

fn simulate_spatial(cfg: &ExperimentConfig, out: &Path, emit_plots: bool) -> Result<Outcome, CliError> {
    let red = cfg.spatial()?;
    let sched = cfg.schedule()?;
    let icfg = cfg.integrator()?;
    let mut r = rest_state(&red)?;
    if let Some(off) = &cfg.settle_offset {
        for (a, b) in r.iter_mut().zip(off) {
            *a += b;
        }
    }
    let c = red.crawler();
    let still = c.constant_schedule();
    let y0 = red.lift(&r, &Se2::IDENTITY)?;
    let settle = integrate(|t, y, dy| c.eom_rhs(t, y, &still, dy), 0.0, &y0, cfg.t_settle, &icfg)?;
    let t_end = cfg.t_settle + cfg.n_periods as f64 * sched.period();
    let forced = integrate(|t, y, dy| c.eom_rhs(t, y, &sched, dy), cfg.t_settle, settle.last(), t_end, &icfg)?;
    let mut rows = uniform_samples(&settle, 0.0, cfg.t_settle, cfg.sample_dt)?;
    rows.pop();
    rows.extend(uniform_samples(&forced, cfg.t_settle, t_end, cfg.sample_dt)?);
    write_table(&out.join("trajectory.csv"), &state_header(12, 3), &rows)?;
    let shifts = spatial_period_shifts(&red, &forced, cfg.t_settle, sched.period(), cfg.n_periods)?;
    let table: Vec<Vec<f64>> = shifts.iter().enumerate().map(|(k, g)| vec![(k + 1) as f64, g.phi, g.x, g.y]).collect();
    write_table(&out.join("shifts.csv"), &["period".into(), "phi".into(), "x".into(), "y".into()], &table)?;
    if emit_plots {
        write_plot_data(&out.join("path.dat"), &path_header(), &ground_path(&rows))?;
        fs::write(out.join("plot.gp"), GNUPLOT_TEMPLATE_3D)?;
    }
    let last = shifts.last().copied().unwrap_or(Se2::IDENTITY);
    Ok(Outcome::ok(format!(
        "{} periods, last-period increment phi {} x {} y {}",
        cfg.n_periods,
        fmt(last.phi),
        fmt(last.x),
        fmt(last.y)
    )))
}

/// Summary written next to the cycle samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport<G> {
    pub cycle: CycleResult<G>,
    /// Strides from randomly perturbed seeds, when requested.
    pub robustness_shifts: Vec<f64>,
    pub seed: u64,
}

fn write_cycle_samples<G>(path: &Path, c: &CycleResult<G>, dim: usize) -> Result<(), CliError> {
    let n = c.samples.first().map_or(0, |s| s.len() / 2);
    let rows: Vec<Vec<f64>> = c
        .sample_times
        .iter()
        .zip(&c.samples)
        .map(|(&t, s)| {
            let mut r = vec![t];
            r.extend(s);
            r
        })
        .collect();
    write_table(path, &state_header(n, dim), &rows)
}

pub fn cycle(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let opts = cycle_options(cfg)?;
    let sched = cfg.schedule()?;
    match cfg.model {
        ModelKind::Crawler2d => {
            let red = cfg.planar()?;
            let rest = rest_state(&red)?;
            let seed = linear_seed(&first_order_response(&red, &sched)?, &rest, sched.amplitude);
            let c = find_limit_cycle(&red, &sched, &seed, &opts)?;
            let shifts = if cfg.robustness_seeds > 0 {
                robustness_shifts(&red, &sched, cfg.robustness_seeds, cfg.robustness_magnitude, cfg.seed, &opts)?
            } else {
                Vec::new()
            };
            write_cycle_samples(&out.join("cycle.csv"), &c, 2)?;
            let summary = format!(
                "epsilon {}: delta_x {}, residual {:e}, max |multiplier| {:.6}",
                c.epsilon,
                fmt(c.delta),
                c.residual,
                c.max_multiplier()
            );
            write_json(&out.join("cycle.json"), &CycleReport { cycle: c, robustness_shifts: shifts, seed: cfg.seed })?;
            Ok(Outcome::ok(summary))
        }
        ModelKind::Crawler3d => {
            let red = cfg.spatial()?;
            let c = find_limit_cycle(&red, &sched, &rest_state(&red)?, &opts)?;
            write_cycle_samples(&out.join("cycle.csv"), &c, 3)?;
            let summary = format!(
                "epsilon {}: delta phi {} x {} y {}, max |multiplier| {:.6}",
                c.epsilon,
                fmt(c.delta.phi),
                fmt(c.delta.x),
                fmt(c.delta.y),
                c.max_multiplier()
            );
            write_json(
                &out.join("cycle.json"),
                &CycleReport { cycle: c, robustness_shifts: Vec::new(), seed: cfg.seed },
            )?;
            Ok(Outcome::ok(summary))
        }
    }
}

pub fn threads_from_env() -> usize {
    std::env::var("RELCRAWL_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn sweep(cfg: &ExperimentConfig, out: &Path, emit_plots: bool) -> Result<Outcome, CliError> {
    let red = cfg.planar()?;
    let sched = cfg.schedule()?;
    let threads = threads_from_env();
    info!("sweeping {} amplitudes on {threads} threads", cfg.epsilons.len());
    let rows = scaling_study(&red, &sched, &cfg.epsilons, &cycle_options(cfg)?, threads)?;
    write_sweep_csv(&out.join("sweep.csv"), &rows)?;
    if emit_plots {
        let data: Vec<Vec<f64>> = rows.iter().filter_map(|r| r.delta_x.map(|d| vec![r.epsilon, d])).collect();
        write_plot_data(&out.join("sweep.dat"), &["epsilon".into(), "delta_x".into()], &data)?;
    }
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    let summary = format!("{} rows, {failed} failed", rows.len());
    Ok(Outcome { code: if failed == 0 { 0 } else { 3 }, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub delta_x_first_order: f64,
    pub delta_x_second_order: f64,
    pub damping: RayleighMode,
    pub comparison_epsilon: f64,
    /// `Δx(ε) / ε²` from the nonlinear cycle.
    pub nonlinear_ratio: f64,
    pub relative_difference: f64,
}

pub fn perturbation(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let red = cfg.planar()?;
    let sched = cfg.schedule()?;
    let mode = if cfg.frozen_damping { RayleighMode::Frozen } else { RayleighMode::Full };
    let resp = first_order_response(&red, &sched)?;
    let shift = SecondOrderShift::from_response(&red, &resp, mode)?;
    let eps = cfg.comparison_epsilon;
    let rest = rest_state(&red)?;
    let c = find_limit_cycle(&red, &sched.with_amplitude(eps), &linear_seed(&resp, &rest, eps), &cycle_options(cfg)?)?;
    let ratio = c.delta / (eps * eps);
    let report = PerturbationReport {
        delta_x_first_order: shift.first_order,
        delta_x_second_order: shift.second_order,
        damping: mode,
        comparison_epsilon: eps,
        nonlinear_ratio: ratio,
        relative_difference: (shift.second_order - ratio) / ratio,
    };
    write_json(&out.join("perturbation.json"), &report)?;
    Ok(Outcome::ok(format!(
        "first order {:e}, second order {}, nonlinear ratio {}",
        report.delta_x_first_order,
        fmt(report.delta_x_second_order),
        fmt(ratio)
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demo3dReport {
    pub cycle: CycleResult<Se2>,
    /// `‖y(2T) − (Δg·Δg)·y(0)‖` on the converged cycle.
    pub two_period_defect: f64,
    pub n_periods: usize,
    /// Heading of the body after each period.
    pub headings: Vec<f64>,
}

pub fn demo3d(cfg: &ExperimentConfig, out: &Path, emit_plots: bool) -> Result<Outcome, CliError> {
    let cfg = ExperimentConfig { model: ModelKind::Crawler3d, ..cfg.clone() };
    let red = cfg.spatial()?;
    let sched = cfg.schedule()?;
    let c = find_limit_cycle(&red, &sched, &rest_state(&red)?, &cycle_options(&cfg)?)?;
    if c.max_multiplier() >= 1.0 {
        warn!("spatial cycle is not attracting (max |multiplier| {})", c.max_multiplier());
    }
    let icfg = IntegratorConfig { rtol: cfg.rtol.min(1e-11), atol: cfg.atol.min(1e-13), ..cfg.integrator()? };
    let n = cfg.n_periods.max(2);
    let traj = cycle_trajectory(&red, &sched, &c, &Se2::IDENTITY, n, &icfg)?;
    let two = c.delta.compose(&c.delta);
    let at_two = traj.sample_at(c.t0 + 2.0 * c.period)?;
    let expect = red.act(&two, traj.first());
    let two_period_defect = at_two.iter().zip(&expect).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();

    let mut headings = Vec::with_capacity(n);
    let mut phi = 0.0;
    for g in spatial_period_shifts(&red, &traj, c.t0, c.period, n)? {
        phi += g.phi;
        headings.push(phi);
    }
    let rows = uniform_samples(&traj, c.t0, traj.t_end(), cfg.sample_dt)?;
    write_plot_data(&out.join("path.dat"), &path_header(), &ground_path(&rows))?;
    write_table(&out.join("path.csv"), &path_header(), &ground_path(&rows))?;
    if emit_plots {
        fs::write(out.join("plot.gp"), GNUPLOT_TEMPLATE_3D)?;
    }
    let summary = format!(
        "delta phi {} x {} y {}, max |multiplier| {:.6}, two-period defect {:e}",
        fmt(c.delta.phi),
        fmt(c.delta.x),
        fmt(c.delta.y),
        c.max_multiplier(),
        two_period_defect
    );
    let report = Demo3dReport { cycle: c, two_period_defect, n_periods: n, headings };
    write_json(&out.join("demo3d.json"), &report)?;
    Ok(Outcome::ok(summary))
}
