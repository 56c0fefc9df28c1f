//! Time-periodic rest-length actuation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{CrawlError, Result};
use crate::model::MIN_DISTANCE;

/// One harmonic per spring: `ℓ̄_k(t) = base_k + ε·amplitude·cos(ωt − phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpringHarmonic {
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScheduleMode {
    /// `ℓ̄₁ = b₁ + ε cos ωt`, `ℓ̄₂ = b₂ − ε sin(ω(t − ½))`, `ℓ̄₃ = Σb − ℓ̄₁ − ℓ̄₂`.
    ThreeSpringGait,
    UserTable {
        entries: Vec<SpringHarmonic>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestLengthSchedule {
    pub base_lengths: Vec<f64>,
    pub amplitude: f64,
    pub angular_frequency: f64,
    pub mode: ScheduleMode,
}

impl RestLengthSchedule {
    pub fn three_spring_gait(epsilon: f64) -> Self {
        Self {
            base_lengths: vec![1.0, 1.0, 1.0],
            amplitude: epsilon,
            angular_frequency: 2.0 * PI,
            mode: ScheduleMode::ThreeSpringGait,
        }
    }

    /// Unforced schedule holding `base` for all time. The period is nominally 1.
    pub fn constant(base: &[f64]) -> Self {
        Self {
            base_lengths: base.to_vec(),
            amplitude: 0.0,
            angular_frequency: 2.0 * PI,
            mode: ScheduleMode::UserTable { entries: vec![SpringHarmonic { amplitude: 0.0, phase: 0.0 }; base.len()] },
        }
    }

    pub fn user_table(base: &[f64], epsilon: f64, omega: f64, entries: Vec<SpringHarmonic>) -> Self {
        Self {
            base_lengths: base.to_vec(),
            amplitude: epsilon,
            angular_frequency: omega,
            mode: ScheduleMode::UserTable { entries },
        }
    }

    /// Gait for the unit regular tetrad: the three ground springs beat out of
    /// phase with unequal amplitudes, so the stride turns.
    pub fn spatial_demo(epsilon: f64) -> Self {
        let tau = std::f64::consts::TAU;
        let h = |amplitude: f64, phase: f64| SpringHarmonic { amplitude, phase };
        Self::user_table(
            &[1.0; 6],
            epsilon,
            tau,
            vec![h(0.5, 0.0), h(0.4, 0.25 * tau), h(0.0, 0.0), h(0.3, 0.6 * tau), h(0.0, 0.0), h(0.0, 0.0)],
        )
    }

    pub fn with_amplitude(&self, epsilon: f64) -> Self {
        Self { amplitude: epsilon, ..self.clone() }
    }

    pub fn n_springs(&self) -> usize {
        self.base_lengths.len()
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.angular_frequency
    }

    pub fn validate(&self) -> Result<()> {
        let period = self.period();
        if !(period.is_finite() && period > 0.0) {
            return Err(CrawlError::InvalidParameter(format!(
                "schedule angular frequency {} does not give a positive finite period",
                self.angular_frequency
            )));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(CrawlError::InvalidParameter(format!(
                "schedule amplitude must be finite and >= 0, got {}",
                self.amplitude
            )));
        }
        match &self.mode {
            ScheduleMode::ThreeSpringGait if self.base_lengths.len() != 3 => {
                Err(CrawlError::InvalidParameter("the default schedule drives exactly three springs".into()))
            }
            ScheduleMode::UserTable { entries } if entries.len() != self.base_lengths.len() => {
                Err(CrawlError::InvalidParameter(format!(
                    "schedule table has {} entries for {} springs",
                    entries.len(),
                    self.base_lengths.len()
                )))
            }
            _ => Ok(()),
        }
    }

    /// Rest-length rate `∂ℓ̄/∂ε` at time `t`.
    pub fn direction_into(&self, t: f64, out: &mut [f64]) {
        let w = self.angular_frequency;
        match &self.mode {
            ScheduleMode::ThreeSpringGait => {
                let d1 = (w * t).cos();
                let d2 = -(w * (t - 0.5)).sin();
                out[0] = d1;
                out[1] = d2;
                out[2] = -d1 - d2;
            }
            ScheduleMode::UserTable { entries } => {
                for (o, e) in out.iter_mut().zip(entries) {
                    *o = e.amplitude * (w * t - e.phase).cos();
                }
            }
        }
    }

    pub fn direction(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_springs()];
        self.direction_into(t, &mut out);
        out
    }

    /// Rest lengths at `t` without domain checks.
    ///
    /// Large amplitudes may drive a rest length through zero (the default
    /// schedule at ε = 1 does); the spring potential stays well defined, so
    /// the dynamics use this unchecked form.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        if self.amplitude == 0.0 {
            out.copy_from_slice(&self.base_lengths);
            return;
        }
        self.direction_into(t, out);
        match &self.mode {
            ScheduleMode::ThreeSpringGait => {
                let total: f64 = self.base_lengths.iter().sum();
                let l1 = self.base_lengths[0] + self.amplitude * out[0];
                let l2 = self.base_lengths[1] + self.amplitude * out[1];
                out[0] = l1;
                out[1] = l2;
                out[2] = total - l1 - l2;
            }
            ScheduleMode::UserTable { .. } => {
                for (o, b) in out.iter_mut().zip(&self.base_lengths) {
                    *o = b + self.amplitude * *o;
                }
            }
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_springs()];
        self.eval_into(t, &mut out);
        out
    }

    /// Rest lengths at `t`, rejecting any below the minimum pair distance.
    pub fn eval_checked(&self, t: f64) -> Result<Vec<f64>> {
        let out = self.eval(t);
        for (k, &l) in out.iter().enumerate() {
            if !(l >= MIN_DISTANCE) {
                return Err(CrawlError::ScheduleDomain { t, spring: k, length: l });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gait_at_zero() {
        let s = RestLengthSchedule::three_spring_gait(0.5);
        let l = s.eval(0.0);
        assert!((l[0] - 1.5).abs() < 1e-15);
        assert!((l[1] - 1.0).abs() < 1e-15);
        assert!((l[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unperturbed_is_base() {
        let s = RestLengthSchedule::three_spring_gait(0.0);
        for i in 0..20 {
            assert_eq!(s.eval(0.137 * i as f64), vec![1.0, 1.0, 1.0]);
        }
    }

    #[test]
    fn periodic_and_sum_preserving() {
        let s = RestLengthSchedule::three_spring_gait(0.3);
        assert!((s.period() - 1.0).abs() < 1e-15);
        for i in 0..50 {
            let t = 0.0731 * i as f64;
            let a = s.eval(t);
            let b = s.eval(t + 1.0);
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-12);
            }
            assert!((a.iter().sum::<f64>() - 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn checked_eval_flags_collapsed_springs() {
        // ε = 1 drives ℓ̄₁ = 1 + cos(2πt) to zero at t = 1/2
        let s = RestLengthSchedule::three_spring_gait(1.0);
        assert!(matches!(s.eval_checked(0.5), Err(CrawlError::ScheduleDomain { spring: 0, .. })));
        // and ℓ̄₃ = 1 − cos − sin to zero at t = 0
        assert!(matches!(s.eval_checked(0.0), Err(CrawlError::ScheduleDomain { spring: 2, .. })));
        let ok = RestLengthSchedule::three_spring_gait(0.25);
        for i in 0..40 {
            assert!(ok.eval_checked(i as f64 / 40.0).is_ok());
        }
    }

    #[test]
    fn user_table_direction() {
        let s = RestLengthSchedule::user_table(
            &[1.0, 2.0],
            0.1,
            2.0 * PI,
            vec![SpringHarmonic { amplitude: 1.0, phase: 0.0 }, SpringHarmonic { amplitude: 2.0, phase: PI / 2.0 }],
        );
        let l = s.eval(0.25);
        assert!((l[0] - 1.0).abs() < 1e-12);
        assert!((l[1] - 2.2).abs() < 1e-12);
        assert!(s.validate().is_ok());
    }
}
