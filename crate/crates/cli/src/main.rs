//! `qsnap` command-line runner.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qsnap::harness::{
    check_timing_budget, entropy_report_from_run, noise_inspect, reconstruct, run_experiment, ExperimentConfig,
    Method, Preset, QubitRange, ReconstructOptions, SnapshotStore, TargetInput, TimingBudget, DEFAULT_MARGIN_FACTOR,
    FULL_PROTOCOL_TRIALS,
};
use qsnap::metrics::EntropyUnits;
use qsnap::neurogen::LatentMode;
use qsnap::noise::{default_noise_model, NoiseModelSpec};
use qsnap::objective::DEFAULT_SHOTS;
use qsnap::{FidelityMode, QsnapError, Representation};

#[derive(Parser, Debug)]
#[command(name = "qsnap", version, about = "Quantum state snapshots via SWAP-test feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a batch of reconstruction trials and write a run directory.
    Run(RunArgs),
    /// Reconstruct one target and optionally deposit it in a snapshot store.
    Reconstruct(ReconstructArgs),
    /// Inspect the snapshot store.
    Snapshot {
        #[command(subcommand)]
        action: SnapshotAction,
    },
    /// Check a feedback-loop latency budget against the coherence window.
    Timing(TimingArgs),
    /// Target vs reconstructed entanglement entropy for a finished run.
    EntropyReport(EntropyArgs),
    /// Print the noise model's parameters and channel diagnostics.
    NoiseInspect {
        /// `default`, `none` or a JSON file.
        #[arg(long, default_value = "default")]
        noise: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModeArg {
    Exact,
    Sampled,
    Noisy,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum LatentArg {
    Resample,
    Fixed,
}

/// Options shared by `run` and `reconstruct`.
#[derive(Args, Debug)]
struct OptimizerArgs {
    /// `es` or `nn`.
    #[arg(long)]
    method: Option<String>,
    /// `sv`, `dm` or `u`.
    #[arg(long)]
    repr: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    shots: Option<u64>,
    /// `default`, `none` or a JSON file; implies `--mode noisy` unless `none`.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated, e.g. `0.95,0.99`.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Neural generator epochs.
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Evolution-strategy iterations.
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, value_enum)]
    latent: Option<LatentArg>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `3` or a range such as `1-4`.
    #[arg(long)]
    qubits: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Use the long protocol trial count.
    #[arg(long, conflicts_with = "trials")]
    full_protocol: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Record per-trial wall-clock seconds (breaks byte-identical reruns).
    #[arg(long)]
    wall_time: bool,
    #[command(flatten)]
    opt: OptimizerArgs,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    /// Preset (`zero`, `one`, `hadamard`, `random(<seed>)`) or a target file.
    #[arg(long)]
    target: String,
    /// Register size for `random` presets.
    #[arg(long, default_value_t = 1)]
    qubits: usize,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    label: Option<String>,
    #[command(flatten)]
    opt: OptimizerArgs,
}

#[derive(Subcommand, Debug)]
enum SnapshotAction {
    /// Print a stored snapshot as JSON.
    Get {
        label: String,
        #[arg(long)]
        store: PathBuf,
        /// Also print the preparation circuit.
        #[arg(long)]
        circuit: bool,
    },
    /// List stored labels.
    List {
        #[arg(long)]
        store: PathBuf,
    },
}

#[derive(Args, Debug)]
struct TimingArgs {
    /// Seconds.
    #[arg(long)]
    t_d_cq: f64,
    #[arg(long)]
    t_d_qc: f64,
    #[arg(long)]
    t_p_c: f64,
    #[arg(long)]
    tau_d: f64,
    #[arg(long, default_value_t = DEFAULT_MARGIN_FACTOR)]
    margin: f64,
    #[arg(long)]
    iterations: u64,
}

#[derive(Args, Debug)]
struct EntropyArgs {
    /// Run directory written by `qsnap run --out`.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    nats: bool,
    /// Write the table as CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error class deciding the exit code.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<QsnapError> for Failure {
    fn from(e: QsnapError) -> Self {
        if e.is_config_error() {
            Failure::Config(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn load_noise(arg: &str) -> CliResult<NoiseModelSpec> {
    match arg {
        "default" => Ok(default_noise_model()),
        "none" => Ok(NoiseModelSpec::noiseless()),
        path => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading noise model {path}")).map_err(config_err)?;
            NoiseModelSpec::from_json(&text).with_context(|| format!("noise model {path}")).map_err(config_err)
        }
    }
}

fn resolve_mode(opt: &OptimizerArgs, current: &FidelityMode) -> CliResult<FidelityMode> {
    let noise = opt.noise.as_deref().map(load_noise).transpose()?;
    let mode = opt.mode.or(match (&noise, opt.noise.as_deref()) {
        (Some(_), Some("none")) | (None, _) => None,
        (Some(_), _) => Some(ModeArg::Noisy),
    });
    let current_shots = match current {
        FidelityMode::Sampled { shots } => Some(*shots),
        FidelityMode::Noisy { shots, .. } => *shots,
        FidelityMode::Exact => None,
    };
    let shots = opt.shots.or(current_shots).unwrap_or(DEFAULT_SHOTS);
    Ok(match mode {
        None if opt.shots.is_none() && noise.is_none() => current.clone(),
        None => match current {
            FidelityMode::Exact => FidelityMode::Exact,
            FidelityMode::Sampled { .. } => FidelityMode::Sampled { shots },
            FidelityMode::Noisy { noise: n, .. } => {
                FidelityMode::Noisy { noise: noise.unwrap_or_else(|| n.clone()), shots: Some(shots) }
            }
        },
        Some(ModeArg::Exact) => FidelityMode::Exact,
        Some(ModeArg::Sampled) => FidelityMode::Sampled { shots },
        Some(ModeArg::Noisy) => FidelityMode::Noisy { noise: noise.unwrap_or_else(default_noise_model), shots: Some(shots) },
    })
}

/// Applies the shared optimizer flags to a config.
fn apply_optimizer_args(config: &mut ExperimentConfig, opt: &OptimizerArgs) -> CliResult<()> {
    if let Some(m) = &opt.method {
        config.method = m.parse::<Method>()?;
    }
    if let Some(r) = &opt.repr {
        config.representation = r.parse::<Representation>()?;
    }
    config.mode = resolve_mode(opt, &config.mode)?;
    if let Some(s) = opt.seed {
        config.base_seed = s;
    }
    if let Some(t) = &opt.thresholds {
        config.thresholds = t.clone();
    }
    if let Some(e) = opt.max_epochs {
        config.nn.max_epochs = e;
    }
    if let Some(i) = opt.max_iters {
        config.es.max_iters = i;
    }
    if let Some(l) = opt.latent {
        config.nn.latent_mode = match l {
            LatentArg::Resample => LatentMode::Resample,
            LatentArg::Fixed => LatentMode::Fixed,
        };
    }
    Ok(())
}

fn fmt_opt(x: Option<f64>, digits: usize) -> String {
    x.map(|v| format!("{v:.digits$}")).unwrap_or_else(|| "-".into())
}

fn cmd_run(args: RunArgs) -> CliResult<()> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_file(path).map_err(config_err)?,
        None => ExperimentConfig::default(),
    };
    apply_optimizer_args(&mut config, &args.opt)?;
    if let Some(q) = &args.qubits {
        config.qubits = q.parse::<QubitRange>()?;
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if args.full_protocol {
        config.trials = FULL_PROTOCOL_TRIALS;
    }
    if let Some(out) = args.out {
        config.out_dir = Some(out);
    }
    if args.workers.is_some() {
        config.workers = args.workers;
    }
    config.record_wall_time |= args.wall_time;
    config.validate()?;

    let results = run_experiment(&config)?;
    let top = config.thresholds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("method={} repr={} mode={} trials={} seed={}", config.method, config.representation, config.mode.label(), config.trials, config.base_seed);
    println!("{:>6} {:>8} {:>8} {:>10} {:>10} {:>8}", "qubits", "#E", "median", "Fid.", "oracle", "success");
    for row in &results.summary.rows {
        let top_stats = row.thresholds.iter().find(|s| s.threshold == top);
        println!(
            "{:>6} {:>8} {:>8} {:>10} {:>10} {:>7.0}%",
            row.n_qubits,
            fmt_opt(row.table_epochs, 2),
            fmt_opt(top_stats.and_then(|s| s.median_epochs), 1),
            fmt_opt(row.table_fidelity, 4),
            fmt_opt(row.mean_oracle_fidelity, 4),
            100.0 * top_stats.map_or(0.0, |s| s.success_rate),
        );
        if row.failures > 0 {
            eprintln!("warning: {} of {} trials failed for n={}", row.failures, row.trials, row.n_qubits);
        }
    }
    if let Some(dir) = &config.out_dir {
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn cmd_reconstruct(args: ReconstructArgs) -> CliResult<()> {
    let input = match args.target.parse::<Preset>() {
        Ok(p) => TargetInput::Preset(p),
        Err(_) if Path::new(&args.target).exists() => TargetInput::File(PathBuf::from(&args.target)),
        Err(e) => return Err(config_err(anyhow!("{e}; no such target file either"))),
    };
    let mut config = ExperimentConfig::default();
    apply_optimizer_args(&mut config, &args.opt)?;
    let opts = ReconstructOptions {
        method: config.method,
        representation: config.representation,
        mode: config.mode.clone(),
        seed: config.base_seed,
        n_qubits: args.qubits,
        thresholds: config.thresholds.clone(),
        es: config.es.clone(),
        nn: config.nn.clone(),
        store: args.store,
        label: args.label,
    };
    let report = reconstruct(&input, &opts)?;
    let r = &report.record;
    for (i, f) in r.fidelity_trace.iter().enumerate() {
        println!("epoch {:>4}  fidelity {f:.6}", i + 1);
    }
    for hit in &r.epochs_to_threshold {
        println!("epochs to {}: {}", hit.threshold, hit.epoch.map_or("not reached".into(), |e| e.to_string()));
    }
    println!("final fidelity {:.6}  oracle {:.6}", r.final_fidelity, r.oracle_fidelity);
    let amps: Vec<String> = report.solution.amplitudes().iter().map(|a| format!("{:+.6}{:+.6}i", a.re, a.im)).collect();
    println!("solution [{}]", amps.join(", "));
    if let (Some(label), Some(path)) = (&report.label, &report.stored_at) {
        println!("stored '{label}' at {}", path.display());
    }
    Ok(())
}

fn cmd_snapshot(action: SnapshotAction) -> CliResult<()> {
    match action {
        SnapshotAction::Get { label, store, circuit } => {
            let store = SnapshotStore::open(&store)?;
            let record = store.get_record(&label)?;
            record.state()?;
            println!("{}", serde_json::to_string_pretty(&record).map_err(|e| Failure::Runtime(e.into()))?);
            if circuit {
                for op in store.preparation_circuit(&label)? {
                    println!("{op:?}");
                }
            }
        }
        SnapshotAction::List { store } => {
            for label in SnapshotStore::open(&store)?.labels()? {
                println!("{label}");
            }
        }
    }
    Ok(())
}

fn cmd_timing(args: TimingArgs) -> CliResult<()> {
    let budget = TimingBudget {
        t_d_cq: args.t_d_cq,
        t_d_qc: args.t_d_qc,
        t_p_c: args.t_p_c,
        tau_d: args.tau_d,
        margin_factor: args.margin,
    };
    let report = check_timing_budget(&budget, args.iterations)?;
    println!("{report}");
    Ok(())
}

fn cmd_entropy(args: EntropyArgs) -> CliResult<()> {
    let units = if args.nats { EntropyUnits::Nats } else { EntropyUnits::Bits };
    let table = entropy_report_from_run(&args.run, units)?;
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))
                .map_err(Failure::Runtime)?;
            table.write_csv(file)?;
        }
        None => table.write_csv(std::io::stdout())?,
    }
    eprintln!("rows {}  max |delta| {:.4} {}", table.rows.len(), table.max_delta, units.label());
    Ok(())
}

fn cmd_noise(noise: &str, json: bool) -> CliResult<()> {
    let report = noise_inspect(&load_noise(noise)?)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.into()))?);
    } else {
        print!("{report}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Snapshot { action } => cmd_snapshot(action),
        Command::Timing(a) => cmd_timing(a),
        Command::EntropyReport(a) => cmd_entropy(a),
        Command::NoiseInspect { noise, json } => cmd_noise(&noise, json),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
