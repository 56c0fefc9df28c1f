//! Flat experiment configuration. Every key is optional; omitted keys take
//! the standard crawler parameters.

use std::path::{Path, PathBuf};

use relcrawl::integrate::IntegratorConfig;
use relcrawl::model::{Crawler, CrawlerParams, DebounceLaw, RestLengthSchedule, SpringHarmonic};
use relcrawl::reduction::{PlanarReduction, SpatialReduction};
use relcrawl::smoothing::SmoothingProfile;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Crawler2d,
    Crawler3d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ProfileKind {
    RawC1,
    Mollified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// The three-spring gait in 2D, the turning tetrad gait in 3D.
    Default,
    /// Per-spring harmonics from `schedule_amplitudes` and `schedule_phases`.
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub kappa_s: f64,
    pub nu_s: f64,
    pub kappa_np: f64,
    pub nu_ns: f64,
    pub nu_db: f64,
    pub gravity: f64,
    /// Defaults to unit lengths for the chosen model.
    pub rest_lengths: Option<Vec<f64>>,
    pub profile: ProfileKind,
    pub mollifier_width: f64,
    pub debounce: DebounceLaw,

    pub schedule: ScheduleKind,
    pub epsilon: f64,
    pub omega: f64,
    pub schedule_amplitudes: Vec<f64>,
    /// Phase lags in radians.
    pub schedule_phases: Vec<f64>,

    pub rtol: f64,
    pub atol: f64,
    pub max_step: Option<f64>,

    /// Amplitudes for `sweep`.
    pub epsilons: Vec<f64>,
    pub t_settle: f64,
    pub n_periods: usize,
    /// Reduced-state offset of the standing start.
    pub settle_offset: Option<Vec<f64>>,
    pub sample_dt: f64,
    pub cycle_samples: usize,
    pub seed: u64,
    pub robustness_seeds: usize,
    pub robustness_magnitude: f64,
    /// Frozen Cartesian damping in `perturbation` (diagnostic).
    pub frozen_damping: bool,
    pub comparison_epsilon: f64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = CrawlerParams::standard();
        Self {
            model: ModelKind::Crawler2d,
            kappa_s: p.kappa_s,
            nu_s: p.nu_s,
            kappa_np: p.kappa_np,
            nu_ns: p.nu_ns,
            nu_db: p.nu_db,
            gravity: p.gravity,
            rest_lengths: None,
            profile: ProfileKind::RawC1,
            mollifier_width: 1e-3,
            debounce: DebounceLaw::default(),
            schedule: ScheduleKind::Default,
            epsilon: 0.5,
            omega: std::f64::consts::TAU,
            schedule_amplitudes: Vec::new(),
            schedule_phases: Vec::new(),
            rtol: 1e-9,
            atol: 1e-12,
            max_step: None,
            epsilons: vec![1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125],
            t_settle: 10.0,
            n_periods: 20,
            settle_offset: None,
            sample_dt: 0.01,
            cycle_samples: 200,
            seed: 0,
            robustness_seeds: 5,
            robustness_magnitude: 1e-2,
            frozen_damping: false,
            comparison_epsilon: 1.0 / 32.0,
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn params(&self) -> CrawlerParams {
        let rest = self.rest_lengths.clone().unwrap_or_else(|| match self.model {
            ModelKind::Crawler2d => vec![1.0; 3],
            ModelKind::Crawler3d => vec![1.0; 6],
        });
        CrawlerParams {
            kappa_s: self.kappa_s,
            nu_s: self.nu_s,
            kappa_np: self.kappa_np,
            nu_ns: self.nu_ns,
            nu_db: self.nu_db,
            rest_lengths: rest,
            gravity: self.gravity,
            profile: match self.profile {
                ProfileKind::RawC1 => SmoothingProfile::RawC1,
                ProfileKind::Mollified => SmoothingProfile::Mollified { width: self.mollifier_width },
            },
            debounce: self.debounce,
        }
    }

    pub fn planar(&self) -> Result<PlanarReduction, CliError> {
        if self.model != ModelKind::Crawler2d {
            return Err(CliError::Config("this command needs model = \"crawler2d\"".into()));
        }
        let (params, _) = self.params().canonical_planar_labels();
        Ok(PlanarReduction::new(Crawler::planar(params)?)?)
    }

    pub fn spatial(&self) -> Result<SpatialReduction, CliError> {
        if self.model != ModelKind::Crawler3d {
            return Err(CliError::Config("this command needs model = \"crawler3d\"".into()));
        }
        Ok(SpatialReduction::new(Crawler::spatial(self.params())?)?)
    }

    /// Schedule at amplitude `epsilon`, on the configured base lengths.
    pub fn schedule(&self) -> Result<RestLengthSchedule, CliError> {
        let params = self.params();
        let base = match self.model {
            ModelKind::Crawler2d => params.canonical_planar_labels().0.rest_lengths,
            ModelKind::Crawler3d => params.rest_lengths,
        };
        let s = match (self.schedule, self.model) {
            (ScheduleKind::Default, ModelKind::Crawler2d) => RestLengthSchedule {
                base_lengths: base,
                angular_frequency: self.omega,
                ..RestLengthSchedule::three_spring_gait(self.epsilon)
            },
            (ScheduleKind::Default, ModelKind::Crawler3d) => RestLengthSchedule {
                base_lengths: base,
                angular_frequency: self.omega,
                ..RestLengthSchedule::spatial_demo(self.epsilon)
            },
            (ScheduleKind::Table, _) => {
                if self.schedule_amplitudes.len() != base.len() || self.schedule_phases.len() != base.len() {
                    return Err(CliError::Config(format!(
                        "table schedule needs {} amplitudes and phases, got {} and {}",
                        base.len(),
                        self.schedule_amplitudes.len(),
                        self.schedule_phases.len()
                    )));
                }
                let entries = self
                    .schedule_amplitudes
                    .iter()
                    .zip(&self.schedule_phases)
                    .map(|(&amplitude, &phase)| SpringHarmonic { amplitude, phase })
                    .collect();
                RestLengthSchedule::user_table(&base, self.epsilon, self.omega, entries)
            }
        };
        s.validate()?;
        Ok(s)
    }

    pub fn integrator(&self) -> Result<IntegratorConfig, CliError> {
        let cfg = IntegratorConfig {
            rtol: self.rtol,
            atol: self.atol,
            max_step: self.max_step.unwrap_or(f64::INFINITY),
            ..IntegratorConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
