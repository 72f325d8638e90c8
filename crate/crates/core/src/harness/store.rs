//! Classical snapshot store: one JSON file per label.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{QsnapError, Result};
use crate::simcore::{GateOp, PureState};
use crate::stateprep::mottonen_circuit;

/// How a stored snapshot was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub seed: u64,
    pub fidelity: f64,
}

/// On-disk schema of one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub label: String,
    pub n_qubits: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub created_from: Option<Provenance>,
}

impl SnapshotRecord {
    pub fn state(&self) -> Result<PureState> {
        if self.re.len() != self.im.len() || self.re.len() != 1usize << self.n_qubits {
            return Err(QsnapError::Parse {
                context: format!("snapshot '{}'", self.label),
                message: format!("expected {} amplitudes, got re {} / im {}", 1usize << self.n_qubits, self.re.len(), self.im.len()),
            });
        }
        let amps = self.re.iter().zip(&self.im).map(|(&r, &i)| crate::Complex64::new(r, i)).collect();
        PureState::from_amplitudes(amps)
    }
}

#[derive(Debug, Clone)]
pub struct SnapshotStore {
    dir: PathBuf,
}

fn check_label(label: &str) -> Result<()> {
    let ok = !label.is_empty()
        && !label.starts_with('.')
        && label.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(QsnapError::Config(format!("invalid snapshot label '{label}' (use letters, digits, '-', '_', '.')")))
    }
}

impl SnapshotStore {
    /// Opens (and creates if needed) a store directory.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| QsnapError::io(&dir, e))?;
        Ok(SnapshotStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, label: &str) -> PathBuf {
        self.dir.join(format!("{label}.json"))
    }

    /// Deposits a snapshot; labels are write-once.
    pub fn put(&self, label: &str, state: &PureState, created_from: Option<Provenance>) -> Result<PathBuf> {
        check_label(label)?;
        let record = SnapshotRecord {
            label: label.to_string(),
            n_qubits: state.n_qubits(),
            re: state.real_parts(),
            im: state.imag_parts(),
            created_from,
        };
        let path = self.path_for(label);
        let mut file = match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => return Err(QsnapError::Duplicate(label.into())),
            Err(e) => return Err(QsnapError::io(&path, e)),
        };
        let text = serde_json::to_string_pretty(&record)?;
        file.write_all(text.as_bytes()).and_then(|_| file.write_all(b"\n")).map_err(|e| QsnapError::io(&path, e))?;
        Ok(path)
    }

    pub fn get_record(&self, label: &str) -> Result<SnapshotRecord> {
        check_label(label)?;
        let path = self.path_for(label);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(QsnapError::NotFound(label.into())),
            Err(e) => return Err(QsnapError::io(&path, e)),
        };
        serde_json::from_str(&text).map_err(|e| QsnapError::Parse {
            context: format!("{} (line {}, column {})", path.display(), e.line(), e.column()),
            message: e.to_string(),
        })
    }

    /// Withdraws the stored amplitudes, bit-exact.
    pub fn get(&self, label: &str) -> Result<PureState> {
        self.get_record(label)?.state()
    }

    /// Preparation circuit that re-loads the snapshot on a register.
    pub fn preparation_circuit(&self, label: &str) -> Result<Vec<GateOp>> {
        mottonen_circuit(&self.get(label)?)
    }

    /// Stored labels in sorted order.
    pub fn labels(&self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(|e| QsnapError::io(&self.dir, e))? {
            let path = entry.map_err(|e| QsnapError::io(&self.dir, e))?.path();
            if path.extension().is_some_and(|x| x == "json") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    out.push(stem.to_string());
                }
            }
        }
        out.sort();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::simcore::execute_on_zero;
    use crate::stateprep::sample_random_state;
    use crate::swaptest::fidelity_oracle;

    #[test]
    fn put_get_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::open(dir.path()).unwrap();
        let psi = sample_random_state(3, &mut RngStream::new(5)).unwrap();
        let prov = Provenance { method: "es".into(), seed: 5, fidelity: 0.9912 };
        store.put("snap-1", &psi, Some(prov.clone())).unwrap();
        let back = store.get("snap-1").unwrap();
        for (a, b) in psi.amplitudes().iter().zip(back.amplitudes()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        assert_eq!(store.get_record("snap-1").unwrap().created_from, Some(prov));
        assert!(matches!(store.put("snap-1", &psi, None), Err(QsnapError::Duplicate(_))));
        assert!(matches!(store.get("nope"), Err(QsnapError::NotFound(_))));
        assert!(store.put("../escape", &psi, None).is_err());
        assert_eq!(store.labels().unwrap(), vec!["snap-1".to_string()]);
    }

    #[test]
    fn withdrawal_re_prepares_the_state() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::open(dir.path()).unwrap();
        let psi = sample_random_state(2, &mut RngStream::new(8)).unwrap();
        store.put("w", &psi, None).unwrap();
        let prepared = execute_on_zero(2, &store.preparation_circuit("w").unwrap()).unwrap();
        assert!(fidelity_oracle(&psi, &prepared).unwrap() >= 1.0 - 1e-9);
    }
}
