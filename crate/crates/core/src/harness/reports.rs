//! Entropy and noise-model reports.

use std::fmt;
use std::path::Path;

use serde::Serialize;

use super::{SolutionEntry, SOLUTIONS_JSON};
use crate::error::{QsnapError, Result};
use crate::metrics::{EntropyReport, EntropyUnits};
use crate::noise::{ChannelSummary, NoiseModel, NoiseModelSpec};
use crate::simcore::PureState;

/// First `floor(n / 2)` qubits.
pub fn default_partition(n_qubits: usize) -> Vec<usize> {
    (0..n_qubits / 2).collect()
}

/// A target and, if available, its reconstruction.
#[derive(Debug, Clone)]
pub struct EntropyInput {
    pub circuit_id: String,
    pub target: PureState,
    pub reconstructed: Option<PureState>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyTable {
    pub rows: Vec<EntropyReport>,
    pub max_delta: f64,
    pub units: EntropyUnits,
}

impl EntropyTable {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["circuit_id", "n_qubits", "partition", "target_entropy", "reconstructed_entropy", "delta", "units"])?;
        for r in &self.rows {
            let partition: Vec<String> = r.partition.iter().map(|q| q.to_string()).collect();
            w.write_record([
                r.circuit_id.clone(),
                r.n_qubits.to_string(),
                partition.join(" "),
                r.target_entropy.to_string(),
                r.reconstructed_entropy.to_string(),
                r.delta().to_string(),
                self.units.label().to_string(),
            ])?;
        }
        w.flush().map_err(|e| QsnapError::io("<csv>", e))?;
        Ok(())
    }

    /// Fraction of rows with `|delta| <= tol`.
    pub fn fraction_within(&self, tol: f64) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.delta() <= tol).count() as f64 / self.rows.len() as f64
    }
}

/// Target vs reconstructed bipartite entropy per circuit. Single-qubit
/// circuits have no bipartition and are skipped.
pub fn entropy_report(inputs: &[EntropyInput], units: EntropyUnits) -> Result<EntropyTable> {
    let mut rows = Vec::with_capacity(inputs.len());
    for input in inputs {
        if input.target.n_qubits() < 2 {
            continue;
        }
        let rec = input
            .reconstructed
            .as_ref()
            .ok_or_else(|| QsnapError::NotFound(format!("reconstruction for circuit '{}'", input.circuit_id)))?;
        let partition = default_partition(input.target.n_qubits());
        rows.push(EntropyReport::new_in(&input.circuit_id, &input.target, rec, &partition, units)?);
    }
    let max_delta = rows.iter().map(EntropyReport::delta).fold(0.0, f64::max);
    Ok(EntropyTable { rows, max_delta, units })
}

/// Entropy report over the solutions of a finished run directory.
pub fn entropy_report_from_run(run_dir: &Path, units: EntropyUnits) -> Result<EntropyTable> {
    let path = run_dir.join(SOLUTIONS_JSON);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(QsnapError::NotFound(format!("reconstruction artifacts {}", path.display())))
        }
        Err(e) => return Err(QsnapError::io(&path, e)),
    };
    let entries: Vec<SolutionEntry> = serde_json::from_str(&text).map_err(|e| QsnapError::Parse {
        context: format!("{} (line {}, column {})", path.display(), e.line(), e.column()),
        message: e.to_string(),
    })?;
    let inputs = entries
        .iter()
        .map(|s| {
            Ok(EntropyInput {
                circuit_id: format!("trial-{}", s.trial_id),
                target: s.target()?,
                reconstructed: Some(s.solution()?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entropy_report(&inputs, units)
}

/// Parameters and per-channel diagnostics of a noise model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseReport {
    pub spec: NoiseModelSpec,
    pub readout_flip: f64,
    pub channels: Vec<ChannelSummary>,
}

impl NoiseReport {
    pub fn max_completeness_residual(&self) -> f64 {
        self.channels.iter().map(|c| c.completeness_residual).fold(0.0, f64::max)
    }
}

pub fn noise_inspect(spec: &NoiseModelSpec) -> Result<NoiseReport> {
    let model = NoiseModel::new(spec)?;
    Ok(NoiseReport { spec: spec.clone(), readout_flip: model.readout_flip(), channels: model.summaries() })
}

impl fmt::Display for NoiseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.spec;
        writeln!(f, "parameter            value")?;
        writeln!(f, "p_bitflip            {}", s.p_bitflip)?;
        writeln!(f, "p_depolarizing_1q    {}", s.p_dep1)?;
        writeln!(f, "p_depolarizing_2q    {}", s.p_dep2)?;
        writeln!(f, "T1                   {} us", s.t1_us)?;
        writeln!(f, "T2                   {} us", s.t2_us)?;
        writeln!(f, "gate time            {} ns", s.t_gate_ns)?;
        writeln!(f, "noisy instructions   {}", s.noisy_instructions.join(","))?;
        writeln!(f, "attachment           {:?}", s.attachment)?;
        writeln!(f, "readout flip         {}", self.readout_flip)?;
        writeln!(f)?;
        writeln!(f, "{:<44} {:>5} {:>9} {:>12} {:>8}", "channel", "arity", "operators", "residual", "identity")?;
        for c in &self.channels {
            writeln!(
                f,
                "{:<44} {:>5} {:>9} {:>12.3e} {:>8}",
                c.name, c.arity, c.operators, c.completeness_residual, c.identity
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use super::*;
    use crate::noise::default_noise_model;
    use crate::Complex64;

    fn bell() -> PureState {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        PureState::from_amplitudes(vec![h, z, z, h]).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let product = PureState::zero(3);
        let inputs = vec![
            EntropyInput { circuit_id: "prod".into(), target: product.clone(), reconstructed: Some(product) },
            EntropyInput { circuit_id: "bell".into(), target: bell(), reconstructed: Some(bell()) },
            EntropyInput { circuit_id: "one".into(), target: PureState::zero(1), reconstructed: Some(PureState::zero(1)) },
        ];
        let t = entropy_report(&inputs, EntropyUnits::Bits).unwrap();
        assert!(t.rows[0].target_entropy.abs() < 1e-12 && t.rows[0].reconstructed_entropy.abs() < 1e-12);
        assert!((t.rows[1].target_entropy - 1.0).abs() < 1e-9 && (t.rows[1].reconstructed_entropy - 1.0).abs() < 1e-9);
        assert_eq!(t.rows.len(), 2);
        assert!(t.max_delta < 1e-9);
        let nats = entropy_report(&inputs[1..2], EntropyUnits::Nats).unwrap();
        assert!((nats.rows[0].target_entropy - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn missing_reconstruction_is_an_error() {
        let inputs = vec![EntropyInput { circuit_id: "x".into(), target: bell(), reconstructed: None }];
        assert!(matches!(entropy_report(&inputs, EntropyUnits::Bits), Err(QsnapError::NotFound(_))));
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(entropy_report_from_run(dir.path(), EntropyUnits::Bits), Err(QsnapError::NotFound(_))));
    }

    #[test]
    fn default_partition_is_first_half() {
        assert_eq!(default_partition(1), Vec::<usize>::new());
        assert_eq!(default_partition(5), vec![0, 1]);
    }

    #[test]
    fn noise_report_examples() {
        let r = noise_inspect(&default_noise_model()).unwrap();
        assert_eq!(r.spec.p_dep2, 0.02);
        assert!(r.max_completeness_residual() <= 1e-10);
        assert!(r.to_string().contains("80 us"));
        let zero = noise_inspect(&NoiseModelSpec::noiseless()).unwrap();
        assert!(zero.channels.iter().all(|c| c.identity));
        assert_eq!(zero.readout_flip, 0.0);
    }
}
