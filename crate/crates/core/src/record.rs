//! Per-trial convergence records shared by both optimizers.

use serde::{Deserialize, Serialize};

use crate::stateprep::Representation;

/// First 1-based epoch at which `threshold` was reached, if ever.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdHit {
    pub threshold: f64,
    pub epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub seed: u64,
    pub method: String,
    pub representation: Representation,
    pub n_qubits: usize,
    /// Fidelity-mode label, e.g. `exact` or `sampled(1024)`.
    pub mode: String,
    pub epochs_to_threshold: Vec<ThresholdHit>,
    /// Feedback value of the returned solution, as the optimizer saw it.
    pub final_fidelity: f64,
    /// Returned solution re-scored without noise or sampling.
    pub oracle_fidelity: f64,
    /// Feedback value per epoch.
    pub fidelity_trace: Vec<f64>,
    /// Best feedback value seen up to each epoch.
    pub best_trace: Vec<f64>,
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// Seconds; `None` unless wall-clock recording was requested.
    pub wall_time: Option<f64>,
    /// Set when the trial failed; the other fields are then partial.
    #[serde(default)]
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn epochs_to(&self, threshold: f64) -> Option<usize> {
        self.epochs_to_threshold
            .iter()
            .find(|h| h.threshold == threshold)
            .and_then(|h| h.epoch)
    }

    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// First crossings of each threshold in `trace`, 1-based.
pub fn threshold_hits(trace: &[f64], thresholds: &[f64]) -> Vec<ThresholdHit> {
    thresholds
        .iter()
        .map(|&t| ThresholdHit { threshold: t, epoch: trace.iter().position(|&f| f >= t).map(|i| i + 1) })
        .collect()
}

/// Running maximum.
pub fn best_so_far(trace: &[f64]) -> Vec<f64> {
    trace
        .iter()
        .scan(f64::NEG_INFINITY, |best, &f| {
            *best = best.max(f);
            Some(*best)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hits_are_first_crossings() {
        let trace = [0.5, 0.96, 0.94, 0.991, 0.999];
        let hits = threshold_hits(&trace, &[0.95, 0.99, 0.9999]);
        assert_eq!(hits[0].epoch, Some(2));
        assert_eq!(hits[1].epoch, Some(4));
        assert_eq!(hits[2].epoch, None);
        for h in hits.iter().filter(|h| h.epoch.is_some()) {
            let e = h.epoch.unwrap();
            assert!(trace[e - 1] >= h.threshold);
            assert!(trace[..e - 1].iter().all(|&f| f < h.threshold));
        }
    }

    #[test]
    fn running_max() {
        assert_eq!(best_so_far(&[0.1, 0.3, 0.2, 0.5]), vec![0.1, 0.3, 0.3, 0.5]);
    }
}
