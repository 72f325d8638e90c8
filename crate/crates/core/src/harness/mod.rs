//! Experiment runner, persistence and reports.
//!
//! A run directory holds `config.json`, `results.csv` (one row per trial,
//! ordered by trial id), `summary.json`, `traces.json` and
//! `solutions.json` (target and returned state per trial, used by the
//! entropy report).

mod reconstruct;
mod reports;
mod store;
mod timing;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use reconstruct::{load_target_file, parse_target_text, reconstruct, Preset, ReconstructOptions, ReconstructReport, TargetInput};
pub use reports::{
    default_partition, entropy_report, entropy_report_from_run, noise_inspect, EntropyInput, EntropyTable, NoiseReport,
};
pub use store::{Provenance, SnapshotRecord, SnapshotStore};
pub use timing::{check_timing_budget, TimingBudget, TimingReport, DEFAULT_MARGIN_FACTOR};

use crate::error::{QsnapError, Result};
use crate::neurogen::{train_generator, GeneratorConfig};
use crate::objective::{Candidate, FidelityMode};
use crate::qeswap::{run_qeswap, validate_thresholds, ESParams};
use crate::record::TrialRecord;
use crate::rng::{trial_seed, RngStream};
use crate::simcore::PureState;
use crate::stateprep::{sample_random_state, Representation, TargetSpec};

pub const MIN_QUBITS: usize = 1;
pub const MAX_QUBITS: usize = 6;
pub const DEFAULT_TRIALS: usize = 100;
/// Trial count of the long protocol, selected by a CLI flag.
pub const FULL_PROTOCOL_TRIALS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Es,
    Nn,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Es => "es",
            Method::Nn => "nn",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = QsnapError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "es" | "qeswap" => Ok(Method::Es),
            "nn" | "neural" => Ok(Method::Nn),
            other => Err(QsnapError::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Inclusive qubit-count range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitRange {
    pub min: usize,
    pub max: usize,
}

impl QubitRange {
    pub fn single(n: usize) -> Self {
        QubitRange { min: n, max: n }
    }

    pub fn iter(self) -> std::ops::RangeInclusive<usize> {
        self.min..=self.max
    }
}

impl FromStr for QubitRange {
    type Err = QsnapError;

    /// `3` or `1-4` (also `1..4`, `1..=4`).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || QsnapError::Config(format!("invalid qubit range '{s}'"));
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        let parts: Vec<&str> = s.split(['-', '.', '=']).filter(|p| !p.is_empty()).collect();
        match parts.as_slice() {
            [one] => Ok(QubitRange::single(parse(one)?)),
            [lo, hi] => Ok(QubitRange { min: parse(lo)?, max: parse(hi)? }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub method: Method,
    pub representation: Representation,
    pub qubits: QubitRange,
    pub trials: usize,
    pub mode: FidelityMode,
    pub thresholds: Vec<f64>,
    pub base_seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Wall-clock time per trial; off by default because it breaks
    /// byte-identical reruns.
    pub record_wall_time: bool,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub es: ESParams,
    pub nn: GeneratorConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            method: Method::Es,
            representation: Representation::StateVector,
            qubits: QubitRange::single(1),
            trials: DEFAULT_TRIALS,
            mode: FidelityMode::Exact,
            thresholds: vec![0.95, 0.99],
            base_seed: 0,
            out_dir: None,
            record_wall_time: false,
            workers: None,
            es: ESParams::default(),
            nn: GeneratorConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| QsnapError::Parse {
            context: format!("experiment config (line {}, column {})", e.line(), e.column()),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| QsnapError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            QsnapError::Parse { context, message } => {
                QsnapError::Parse { context: format!("{}: {context}", path.display()), message }
            }
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let QubitRange { min, max } = self.qubits;
        if min < MIN_QUBITS || max > MAX_QUBITS || min > max {
            return Err(QsnapError::Config(format!(
                "qubit range {min}..={max} must lie within {MIN_QUBITS}..={MAX_QUBITS}"
            )));
        }
        if self.trials == 0 {
            return Err(QsnapError::Config("trials must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(QsnapError::Config("workers must be at least 1".into()));
        }
        validate_thresholds(&self.thresholds)?;
        if let FidelityMode::Noisy { noise, .. } = &self.mode {
            noise.validate().map_err(|e| QsnapError::Config(format!("noise model: {e}")))?;
        }
        if matches!(self.mode, FidelityMode::Sampled { shots: 0 } | FidelityMode::Noisy { shots: Some(0), .. }) {
            return Err(QsnapError::Config("shots must be at least 1".into()));
        }
        match self.method {
            Method::Es => self.es_params().validate(),
            Method::Nn => self.nn_config().validate(),
        }
    }

    /// ES parameters with the run-level representation and thresholds.
    pub fn es_params(&self) -> ESParams {
        ESParams { representation: self.representation, thresholds: self.thresholds.clone(), ..self.es.clone() }
    }

    pub fn nn_config(&self) -> GeneratorConfig {
        GeneratorConfig { representation: self.representation, thresholds: self.thresholds.clone(), ..self.nn.clone() }
    }

    pub fn total_trials(&self) -> usize {
        self.trials * self.qubits.iter().count()
    }
}

/// Target and returned state of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionEntry {
    pub trial_id: u64,
    pub seed: u64,
    pub n_qubits: usize,
    pub target_re: Vec<f64>,
    pub target_im: Vec<f64>,
    /// Dominant eigenvector for density-matrix solutions.
    pub solution_re: Vec<f64>,
    pub solution_im: Vec<f64>,
}

impl SolutionEntry {
    fn new(trial_id: u64, seed: u64, target: &PureState, solution: &PureState) -> Self {
        SolutionEntry {
            trial_id,
            seed,
            n_qubits: target.n_qubits(),
            target_re: target.real_parts(),
            target_im: target.imag_parts(),
            solution_re: solution.real_parts(),
            solution_im: solution.imag_parts(),
        }
    }

    pub fn target(&self) -> Result<PureState> {
        PureState::from_amplitudes(zip_complex(&self.target_re, &self.target_im)?)
    }

    pub fn solution(&self) -> Result<PureState> {
        PureState::from_amplitudes(zip_complex(&self.solution_re, &self.solution_im)?)
    }
}

fn zip_complex(re: &[f64], im: &[f64]) -> Result<Vec<crate::Complex64>> {
    if re.len() != im.len() {
        return Err(QsnapError::DimensionMismatch { expected: re.len(), got: im.len() });
    }
    Ok(re.iter().zip(im).map(|(&r, &i)| crate::Complex64::new(r, i)).collect())
}

/// Statistics for one threshold within a summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdStats {
    pub threshold: f64,
    pub reached: usize,
    /// `reached / trials`, failed trials included in the denominator.
    pub success_rate: f64,
    /// Over the trials that reached the threshold.
    pub mean_epochs: Option<f64>,
    pub median_epochs: Option<f64>,
}

/// One row per qubit count, mirroring the `(# E, Fid.)` results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub representation: Representation,
    pub mode: String,
    pub n_qubits: usize,
    pub trials: usize,
    pub failures: usize,
    pub thresholds: Vec<ThresholdStats>,
    /// Over trials that did not fail.
    pub mean_final_fidelity: Option<f64>,
    pub mean_oracle_fidelity: Option<f64>,
    /// `# E`: mean epochs to the highest threshold.
    pub table_epochs: Option<f64>,
    /// `Fid.`: mean final fidelity.
    pub table_fidelity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Summary rows grouped by qubit count, in ascending order.
pub fn summarize(records: &[TrialRecord], thresholds: &[f64]) -> Summary {
    let mut counts: Vec<usize> = records.iter().map(|r| r.n_qubits).collect();
    counts.sort_unstable();
    counts.dedup();
    let top = thresholds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rows = counts
        .into_iter()
        .map(|n| {
            let group: Vec<&TrialRecord> = records.iter().filter(|r| r.n_qubits == n).collect();
            let ok: Vec<&TrialRecord> = group.iter().copied().filter(|r| r.succeeded()).collect();
            let stats: Vec<ThresholdStats> = thresholds
                .iter()
                .map(|&t| {
                    let epochs: Vec<f64> = ok.iter().filter_map(|r| r.epochs_to(t)).map(|e| e as f64).collect();
                    ThresholdStats {
                        threshold: t,
                        reached: epochs.len(),
                        success_rate: epochs.len() as f64 / group.len() as f64,
                        mean_epochs: mean(&epochs),
                        median_epochs: median(&epochs),
                    }
                })
                .collect();
            let finals: Vec<f64> = ok.iter().map(|r| r.final_fidelity).collect();
            let oracles: Vec<f64> = ok.iter().map(|r| r.oracle_fidelity).collect();
            let first = group[0];
            SummaryRow {
                method: first.method.clone(),
                representation: first.representation,
                mode: first.mode.clone(),
                n_qubits: n,
                trials: group.len(),
                failures: group.len() - ok.len(),
                table_epochs: stats.iter().find(|s| s.threshold == top).and_then(|s| s.mean_epochs),
                table_fidelity: mean(&finals),
                thresholds: stats,
                mean_final_fidelity: mean(&finals),
                mean_oracle_fidelity: mean(&oracles),
            }
        })
        .collect();
    Summary { rows }
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    /// Same order as `records`; `None` for failed trials.
    pub solutions: Vec<Option<SolutionEntry>>,
    pub summary: Summary,
}

/// Runs one optimizer on `target` and returns the record plus the solution
/// as a pure state.
fn optimize(
    config: &ExperimentConfig,
    target: &TargetSpec,
    rng: &mut RngStream,
) -> Result<(Candidate, TrialRecord)> {
    match config.method {
        Method::Es => run_qeswap(target, &config.es_params(), &config.mode, rng),
        Method::Nn => train_generator(target, &config.nn_config(), &config.mode, rng),
    }
}

fn run_trial(config: &ExperimentConfig, n: usize, trial_id: u64) -> (TrialRecord, Option<SolutionEntry>) {
    let seed = trial_seed(config.base_seed, trial_id);
    let start = Instant::now();
    let outcome = (|| {
        // One stream per trial: the target is drawn first, the optimizer
        // continues from there.
        let mut rng = RngStream::new(seed);
        let psi = sample_random_state(n, &mut rng)?;
        let target = TargetSpec::pure(psi.clone(), Some(seed));
        let (candidate, record) = optimize(config, &target, &mut rng)?;
        Ok::<_, QsnapError>((psi, candidate, record))
    })();
    let wall_time = config.record_wall_time.then(|| start.elapsed().as_secs_f64());
    match outcome {
        Ok((psi, candidate, mut record)) => {
            record.trial_id = trial_id;
            record.seed = seed;
            record.wall_time = wall_time;
            let solution = SolutionEntry::new(trial_id, seed, &psi, &candidate.dominant_pure());
            (record, Some(solution))
        }
        Err(e) => (
            TrialRecord {
                trial_id,
                seed,
                method: config.method.label().into(),
                representation: config.representation,
                n_qubits: n,
                mode: config.mode.label(),
                epochs_to_threshold: Vec::new(),
                final_fidelity: f64::NAN,
                oracle_fidelity: f64::NAN,
                fidelity_trace: Vec::new(),
                best_trace: Vec::new(),
                epochs_run: 0,
                stopped_early: false,
                wall_time,
                error: Some(e.to_string()),
            },
            None,
        ),
    }
}

/// Executes every trial (in parallel) and, if `out_dir` is set, writes the
/// run directory. Trial ids run over qubit counts in ascending order, then
/// over trials; trial `i` uses seed `base_seed ^ splitmix64(i)`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let jobs: Vec<(usize, u64)> = config
        .qubits
        .iter()
        .flat_map(|n| std::iter::repeat_n(n, config.trials))
        .enumerate()
        .map(|(i, n)| (n, i as u64))
        .collect();
    let execute = || jobs.par_iter().map(|&(n, id)| run_trial(config, n, id)).collect::<Vec<_>>();
    let outcomes = match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| QsnapError::Config(format!("thread pool: {e}")))?
            .install(execute),
        None => execute(),
    };
    let (records, solutions): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    let summary = summarize(&records, &config.thresholds);
    let results = ExperimentResults { config: config.clone(), records, solutions, summary };
    if let Some(dir) = &config.out_dir {
        results.write_to(dir)?;
    }
    Ok(results)
}

fn fmt_f64(x: f64) -> String {
    if x.is_finite() { format!("{x}") } else { String::new() }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| QsnapError::io(path, e))
}

pub const RESULTS_CSV: &str = "results.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const TRACES_JSON: &str = "traces.json";
pub const SOLUTIONS_JSON: &str = "solutions.json";
pub const CONFIG_JSON: &str = "config.json";

#[derive(Serialize)]
struct TraceEntry<'a> {
    trial_id: u64,
    fidelity_trace: &'a [f64],
    best_trace: &'a [f64],
}

impl ExperimentResults {
    /// Header of `results.csv` for the configured thresholds.
    pub fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["trial_id", "seed", "method", "representation", "n_qubits", "mode"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend(self.config.thresholds.iter().map(|t| format!("epochs@{t}")));
        h.extend(
            ["final_fidelity", "oracle_fidelity", "epochs_run", "wall_time", "error"].iter().map(|s| s.to_string()),
        );
        h
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.csv_header())?;
        for r in &self.records {
            let mut row = vec![
                r.trial_id.to_string(),
                r.seed.to_string(),
                r.method.clone(),
                r.representation.label().to_string(),
                r.n_qubits.to_string(),
                r.mode.clone(),
            ];
            row.extend(self.config.thresholds.iter().map(|&t| r.epochs_to(t).map(|e| e.to_string()).unwrap_or_default()));
            row.push(fmt_f64(r.final_fidelity));
            row.push(fmt_f64(r.oracle_fidelity));
            row.push(r.epochs_run.to_string());
            row.push(r.wall_time.map(fmt_f64).unwrap_or_default());
            row.push(r.error.clone().unwrap_or_default());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| QsnapError::io("<csv>", e))?;
        Ok(())
    }

    /// Writes the run directory, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| QsnapError::io(dir, e))?;
        let csv_path = dir.join(RESULTS_CSV);
        let file = fs::File::create(&csv_path).map_err(|e| QsnapError::io(&csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(file))?;
        write_json(&dir.join(SUMMARY_JSON), &self.summary)?;
        write_json(&dir.join(CONFIG_JSON), &self.config)?;
        let traces: Vec<TraceEntry> = self
            .records
            .iter()
            .map(|r| TraceEntry { trial_id: r.trial_id, fidelity_trace: &r.fidelity_trace, best_trace: &r.best_trace })
            .collect();
        write_json(&dir.join(TRACES_JSON), &traces)?;
        let solutions: Vec<&SolutionEntry> = self.solutions.iter().flatten().collect();
        write_json(&dir.join(SOLUTIONS_JSON), &solutions)
    }
}
