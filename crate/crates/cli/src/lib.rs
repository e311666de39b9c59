//! `kpo-qml` command-line front end.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 when the command line or
//! the configuration is invalid. Messages go to standard error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use kpo_qml::adiabatic::{adiabatic_prepare, AdiabaticParams, SweepSchedule};
use kpo_qml::experiments::{
    sweep_alpha, sweep_sample_size, train, ExperimentConfig, Spectrum, TrainingRecord, ALPHAS,
    SAMPLE_SIZES,
};
use kpo_qml::fock::ModeSpace;
use kpo_qml::model::{Model, Variant};

pub const OUT_ENV: &str = "KPO_QML_OUT";

const CSV_HELP: &str = "\
Outputs (CSV uses '.' decimals and a header row):
  fit.csv       x,f
  spectrum.csv  nu,abs_F,phase
  fidelity.csv  t,fidelity          (prepare)
  summary.csv   value,final_cost,test_mse,iterations,evaluations   (sweep)
Every command also writes manifest.json and, for training, record.json.

Exit codes: 0 success, 1 runtime failure, 2 invalid arguments or config.";

#[derive(Debug, Parser)]
#[command(name = "kpo-qml", version, about = "Variational regression with Kerr parametric oscillators", after_help = CSV_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory. Defaults to `$KPO_QML_OUT/<command>`, or
    /// `runs/<command>` when the variable is unset.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Replaces the θ-initialisation seed (and the Ising seed of the qubit
    /// circuit).
    #[arg(long)]
    pub seed_override: Option<u64>,
    /// Worker threads for independent runs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Alpha,
    Nsamples,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a KPO model.
    Train(RunArgs),
    /// Train one model per sweep value, one subdirectory each.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated sweep values; defaults to 1,3,5 for alpha and
        /// 10,30,100,300,1000 for nsamples.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Simulate adiabatic coherent-state preparation.
    Prepare {
        #[arg(long)]
        chi: f64,
        #[arg(long)]
        p: f64,
        #[arg(long, allow_negative_numbers = true)]
        r: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        time: f64,
        #[arg(long, default_value_t = 0.5)]
        delta0: f64,
        #[arg(long, default_value_t = 25)]
        cutoff: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Train the qubit-circuit baseline.
    Baseline(RunArgs),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("run failed: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    /// Git blob hash (`git hash-object`) of the config bytes.
    pub config_hash: String,
    pub seed_override: Option<u64>,
    pub out_dir: PathBuf,
    pub tool_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
}

pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn now_unix() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn out_dir(args: &OutArgs, command: &str) -> PathBuf {
    match &args.out {
        Some(p) => p.clone(),
        None => std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"))
            .join(command),
    }
}

fn load_config(
    path: &Path,
    seed_override: Option<u64>,
) -> Result<(ExperimentConfig, Vec<u8>), CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: ExperimentConfig = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed_override {
        cfg = cfg.with_run_seed(seed);
    }
    cfg.validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Model::new(&cfg.model).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((cfg, bytes))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let s = serde_json::to_string_pretty(value).map_err(runtime)?;
    write_file(path, &(s + "\n"))
}

pub fn fit_csv(xs: &[f64], fs: &[f64]) -> String {
    let mut s = String::from("x,f\n");
    for (x, f) in xs.iter().zip(fs) {
        let _ = writeln!(s, "{x},{f}");
    }
    s
}

pub fn spectrum_csv(spec: &Spectrum) -> String {
    let mut s = String::from("nu,abs_F,phase\n");
    for ((nu, m), ph) in spec.nu.iter().zip(&spec.magnitude).zip(&spec.phase) {
        let _ = writeln!(s, "{nu},{m},{ph}");
    }
    s
}

fn write_record(dir: &Path, rec: &TrainingRecord) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
    write_json(&dir.join("record.json"), rec)?;
    write_file(&dir.join("fit.csv"), &fit_csv(&rec.fit_x, &rec.fit_y))?;
    if let Some(spec) = &rec.spectrum {
        write_file(&dir.join("spectrum.csv"), &spectrum_csv(spec))?;
    }
    Ok(())
}

fn create_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))
}

fn finish(
    command: &str,
    dir: &Path,
    config_path: Option<&Path>,
    config_bytes: &[u8],
    seed_override: Option<u64>,
    started: f64,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        command: command.into(),
        config_path: config_path.map(Path::to_path_buf),
        config_hash: git_blob_hash(config_bytes),
        seed_override,
        out_dir: dir.to_path_buf(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started_unix: started,
        finished_unix: now_unix(),
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

fn cmd_train(args: &RunArgs, command: &str, want_baseline: bool) -> Result<PathBuf, CliError> {
    let started = now_unix();
    let (cfg, bytes) = load_config(&args.config, args.seed_override)?;
    let is_baseline = matches!(cfg.model.variant, Variant::QubitBaseline(_));
    if is_baseline != want_baseline {
        return Err(CliError::Config(format!(
            "`{command}` expects {} model, config has variant `{}`",
            if want_baseline {
                "a qubit-baseline"
            } else {
                "a KPO"
            },
            cfg.model.variant.name()
        )));
    }
    let dir = out_dir(&args.out, command);
    create_out(&dir)?;
    let rec = train(&cfg).map_err(runtime)?;
    write_record(&dir, &rec)?;
    finish(
        command,
        &dir,
        Some(&args.config),
        &bytes,
        args.seed_override,
        started,
    )?;
    Ok(dir)
}

fn cmd_sweep(args: &RunArgs, axis: Axis, values: Option<&[f64]>) -> Result<PathBuf, CliError> {
    let started = now_unix();
    let (cfg, bytes) = load_config(&args.config, args.seed_override)?;
    let (label, records) = match axis {
        Axis::Alpha => {
            let alphas = values
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| ALPHAS.to_vec());
            if alphas.iter().any(|a| !a.is_finite() || *a < 0.0) {
                return Err(CliError::Config(
                    "alpha values must be finite and non-negative".into(),
                ));
            }
            // Surface bad amplitudes before any training.
            for &a in &alphas {
                let spec = cfg
                    .model
                    .with_alpha(a)
                    .and_then(|m| m.with_cutoff(kpo_qml::experiments::cutoff_for_alpha(a)))
                    .map_err(|e| CliError::Config(e.to_string()))?;
                Model::new(&spec).map_err(|e| CliError::Config(e.to_string()))?;
            }
            let dir = out_dir(&args.out, "sweep");
            create_out(&dir)?;
            (
                "alpha",
                (dir, alphas.clone(), sweep_alpha(&cfg, &alphas, args.jobs)),
            )
        }
        Axis::Nsamples => {
            let ns: Vec<usize> = match values {
                Some(v) => v
                    .iter()
                    .map(|&x| {
                        if x >= 1.0 && x.fract() == 0.0 {
                            Ok(x as usize)
                        } else {
                            Err(CliError::Config(format!(
                                "sample size {x} is not a positive integer"
                            )))
                        }
                    })
                    .collect::<Result<_, _>>()?,
                None => SAMPLE_SIZES.to_vec(),
            };
            let dir = out_dir(&args.out, "sweep");
            create_out(&dir)?;
            let as_f: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
            ("n", (dir, as_f, sweep_sample_size(&cfg, &ns, args.jobs)))
        }
    };
    let (dir, points, result) = records;
    let records = result.map_err(runtime)?;
    let mut summary = String::from("value,final_cost,test_mse,iterations,evaluations\n");
    for (v, rec) in points.iter().zip(&records) {
        write_record(&dir.join(format!("{label}-{v}")), rec)?;
        let _ = writeln!(
            summary,
            "{v},{},{},{},{}",
            rec.final_cost, rec.test_mse, rec.trace.iterations, rec.trace.evaluations
        );
    }
    write_file(&dir.join("summary.csv"), &summary)?;
    finish(
        "sweep",
        &dir,
        Some(&args.config),
        &bytes,
        args.seed_override,
        started,
    )?;
    Ok(dir)
}

#[derive(Debug, Serialize)]
struct PrepareRecord {
    params: AdiabaticParams,
    schedule: SweepSchedule,
    cutoff: usize,
    target_alpha: f64,
    fidelity: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_prepare(
    chi: f64,
    p: f64,
    r: f64,
    steps: usize,
    time: f64,
    delta0: f64,
    cutoff: usize,
    out: &OutArgs,
) -> Result<PathBuf, CliError> {
    let started = now_unix();
    let params = AdiabaticParams {
        chi,
        p_final: p,
        r_perturbation: r,
        delta_initial: delta0,
    };
    let schedule = SweepSchedule {
        total_time: time,
        num_steps: steps,
    };
    params
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    if steps == 0 {
        return Err(CliError::Config("--steps must be at least 1".into()));
    }
    if !(time >= 0.0) || !time.is_finite() {
        return Err(CliError::Config(
            "--time must be finite and non-negative".into(),
        ));
    }
    let space = ModeSpace::new(cutoff).map_err(|e| CliError::Config(e.to_string()))?;
    let dir = out_dir(out, "prepare");
    create_out(&dir)?;
    let outcome = adiabatic_prepare(&params, &schedule, space).map_err(|e| match e {
        kpo_qml::Error::Truncation { .. } => CliError::Config(e.to_string()),
        other => runtime(other),
    })?;
    let mut csv = String::from("t,fidelity\n");
    for (t, f) in &outcome.trace {
        let _ = writeln!(csv, "{t},{f}");
    }
    write_file(&dir.join("fidelity.csv"), &csv)?;
    let rec = PrepareRecord {
        params,
        schedule,
        cutoff,
        target_alpha: outcome.target_alpha,
        fidelity: outcome.fidelity,
    };
    write_json(&dir.join("record.json"), &rec)?;
    let canonical = serde_json::to_vec(&rec.params).map_err(runtime)?;
    let mut hashed = canonical;
    hashed.extend(serde_json::to_vec(&(steps, time, cutoff)).map_err(runtime)?);
    finish("prepare", &dir, None, &hashed, None, started)?;
    Ok(dir)
}

pub fn execute(cli: &Cli) -> Result<PathBuf, CliError> {
    match &cli.command {
        Command::Train(args) => cmd_train(args, "train", false),
        Command::Baseline(args) => cmd_train(args, "baseline", true),
        Command::Sweep { run, axis, values } => cmd_sweep(run, *axis, values.as_deref()),
        Command::Prepare {
            chi,
            p,
            r,
            steps,
            time,
            delta0,
            cutoff,
            out,
        } => cmd_prepare(*chi, *p, *r, *steps, *time, *delta0, *cutoff, out),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(dir) => {
            eprintln!("wrote {}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
