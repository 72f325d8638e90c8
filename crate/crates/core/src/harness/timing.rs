//! Feedback-latency budget of the hybrid loop.

use serde::{Deserialize, Serialize};

use crate::error::{QsnapError, Result};

/// "Significantly less than the coherence window" as a factor.
pub const DEFAULT_MARGIN_FACTOR: f64 = 10.0;

/// Relative slack so exact quotients like `1 ms / 0.1 ms` are not lost to
/// rounding.
const RELATIVE_SLACK: f64 = 1e-12;

/// All times in seconds. There are no defaults for the latencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingBudget {
    /// Classical to quantum dispatch.
    pub t_d_cq: f64,
    /// Quantum to classical readback.
    pub t_d_qc: f64,
    /// Classical model update.
    pub t_p_c: f64,
    /// Coherence window.
    pub tau_d: f64,
    #[serde(default = "default_margin")]
    pub margin_factor: f64,
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN_FACTOR
}

impl TimingBudget {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t_d_cq", self.t_d_cq), ("t_d_qc", self.t_d_qc), ("t_p_c", self.t_p_c), ("tau_d", self.tau_d)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(QsnapError::Config(format!("{name} = {v} must be a finite time >= 0")));
            }
        }
        if !(self.margin_factor > 0.0) || !self.margin_factor.is_finite() {
            return Err(QsnapError::Config(format!("margin_factor {} must be positive", self.margin_factor)));
        }
        Ok(())
    }

    /// Per-iteration loop time `t_d_cq + t_d_qc + t_p_c`.
    pub fn loop_time(&self) -> f64 {
        self.t_d_cq + self.t_d_qc + self.t_p_c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub budget: TimingBudget,
    pub iterations: u64,
    pub loop_time: f64,
    /// `iterations * loop_time * margin_factor`.
    pub required: f64,
    pub feasible: bool,
    /// `None` when the loop time is zero (unbounded).
    pub max_feasible_iterations: Option<u64>,
}

impl std::fmt::Display for TimingReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "loop time L     : {:e} s", self.loop_time)?;
        writeln!(f, "iterations      : {}", self.iterations)?;
        writeln!(f, "margin factor   : {}", self.budget.margin_factor)?;
        writeln!(f, "required        : {:e} s (tau_d = {:e} s)", self.required, self.budget.tau_d)?;
        match self.max_feasible_iterations {
            Some(m) => writeln!(f, "max iterations  : {m}")?,
            None => writeln!(f, "max iterations  : unbounded")?,
        }
        write!(f, "feasible        : {}", if self.feasible { "yes" } else { "no" })
    }
}

/// Feasible iff `iterations * L * margin_factor <= tau_d`.
pub fn check_timing_budget(budget: &TimingBudget, iterations: u64) -> Result<TimingReport> {
    budget.validate()?;
    let loop_time = budget.loop_time();
    let per_iteration = loop_time * budget.margin_factor;
    let allowance = budget.tau_d * (1.0 + RELATIVE_SLACK);
    let required = iterations as f64 * per_iteration;
    let max_feasible_iterations = if per_iteration == 0.0 {
        None
    } else {
        let q = (allowance / per_iteration).floor();
        Some(if q >= u64::MAX as f64 { u64::MAX } else { q as u64 })
    };
    Ok(TimingReport {
        budget: *budget,
        iterations,
        loop_time,
        required,
        feasible: required <= allowance,
        max_feasible_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget(l: f64) -> TimingBudget {
        TimingBudget { t_d_cq: l / 2.0, t_d_qc: l / 4.0, t_p_c: l / 4.0, tau_d: 1e-3, margin_factor: 1.0 }
    }

    #[test]
    fn examples() {
        let r = check_timing_budget(&budget(1e-4), 5).unwrap();
        assert!(r.feasible);
        assert_eq!(r.max_feasible_iterations, Some(10));
        assert!(check_timing_budget(&budget(1e-4), 10).unwrap().feasible);
        assert!(!check_timing_budget(&budget(1e-4), 11).unwrap().feasible);
        let zero = check_timing_budget(&budget(0.0), u64::MAX).unwrap();
        assert!(zero.feasible);
        assert_eq!(zero.max_feasible_iterations, None);
    }

    #[test]
    fn default_margin_is_applied_from_json() {
        let b: TimingBudget = serde_json::from_str(r#"{"t_d_cq":1e-5,"t_d_qc":1e-5,"t_p_c":0,"tau_d":1e-3}"#).unwrap();
        assert_eq!(b.margin_factor, DEFAULT_MARGIN_FACTOR);
        assert_eq!(check_timing_budget(&b, 1).unwrap().max_feasible_iterations, Some(5));
    }

    #[test]
    fn negative_times_are_rejected() {
        let mut b = budget(1e-4);
        b.t_p_c = -1.0;
        assert!(check_timing_budget(&b, 1).is_err());
        b = budget(1e-4);
        b.margin_factor = 0.0;
        assert!(check_timing_budget(&b, 1).is_err());
    }
}
