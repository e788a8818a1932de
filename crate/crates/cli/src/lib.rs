//! The `safegate` command line: generate a control system, synthesize an
//! alternating sequence, protect it with waits, sweep noise strengths and
//! report the uncorrectable subspace.

pub mod files;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use safegate_core::random::{random_hermitian, seeded};
use safegate_core::{
    cnot_target, default_system, protect_sequence, run_sweep, sweep_slopes, synthesize_repeated, ControlSystem,
    Error, Fallback, NoGoReport, ProtectionOptions, SweepConfig, UnitaryOperator,
};
use serde::Serialize;

use files::{read_json, write_json, AtomPair, JsonMatrix, SequenceFile, SequenceMeta, SystemFile, TargetFile};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_MODEL: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn model(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_MODEL,
            message: message.into(),
        }
    }

    pub fn convergence(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONVERGENCE,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Uncontrollable { .. } | Error::DegenerateInput(_) => EXIT_MODEL,
            Error::ProtectionFailure { .. } | Error::NumericFailure(_) => EXIT_CONVERGENCE,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "safegate", version, about = "Noise-protected alternating control sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a control system (two Hamiltonians) to a file.
    GenSystem(GenSystemArgs),
    /// Find alternating step durations that realize a target gate.
    Synthesize(SynthesizeArgs),
    /// Add waits that cancel first-order static noise.
    Protect(ProtectArgs),
    /// Sweep static noise strengths and fit log-log slopes of the gate error.
    Verify(VerifyArgs),
    /// Report the noise subspace no wait schedule can correct.
    Nogo(NogoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Atom,
    Random,
}

#[derive(Debug, Args)]
pub struct GenSystemArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "random")]
    pub model: Model,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub system: PathBuf,
    /// `cnot`, `identity`, or a JSON file `{ "n": N, "U": [[[re, im], ...], ...] }`.
    #[arg(long)]
    pub target: String,
    /// Steps per repetition; defaults to N².
    #[arg(long)]
    pub k: Option<usize>,
    /// Repetitions of the root sequence, or `auto` for N²−1.
    #[arg(long, default_value = "auto")]
    pub reps: String,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub restarts: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FallbackArg {
    None,
    Split,
    Extend,
}

impl From<FallbackArg> for Fallback {
    fn from(f: FallbackArg) -> Self {
        match f {
            FallbackArg::None => Fallback::None,
            FallbackArg::Split => Fallback::Split,
            FallbackArg::Extend => Fallback::Extend,
        }
    }
}

#[derive(Debug, Args)]
pub struct ProtectArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub seq: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// What to try when the waits of the input alone cannot cancel the noise.
    #[arg(long, value_enum, default_value = "extend")]
    pub fallback: FallbackArg,
    /// Seed of the random excursion used by `--fallback extend`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub seq: PathBuf,
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-4, allow_negative_numbers = true)]
    pub eps_min: f64,
    #[arg(long, default_value_t = 1e-2, allow_negative_numbers = true)]
    pub eps_max: f64,
    #[arg(long, default_value_t = 9)]
    pub points: usize,
    #[arg(long, default_value_t = 8)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NogoArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub seq: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs a parsed command, printing a short summary to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenSystem(a) => gen_system(&a),
        Command::Synthesize(a) => synthesize(&a),
        Command::Protect(a) => protect(&a),
        Command::Verify(a) => verify(&a),
        Command::Nogo(a) => nogo(&a),
    }
}

fn load_system(path: &Path) -> Result<ControlSystem, CliError> {
    read_json::<SystemFile>(path)?.to_system()
}

fn load_sequence(path: &Path, sys: &ControlSystem) -> Result<SequenceFile, CliError> {
    let file: SequenceFile = read_json(path)?;
    if file.n != sys.dim() {
        return Err(CliError::usage(format!(
            "sequence {} is for N={}, system has N={}",
            path.display(),
            file.n,
            sys.dim()
        )));
    }
    Ok(file)
}

pub fn gen_system(args: &GenSystemArgs) -> Result<(), CliError> {
    if !(2..=8).contains(&args.n) {
        return Err(CliError::usage(format!("--n must be between 2 and 8, got {}", args.n)));
    }
    let (sys, params) = match args.model {
        Model::Atom => {
            if args.n != 4 {
                return Err(CliError::usage("--model atom requires --n 4"));
            }
            let (sys, pa, pb) = default_system(args.seed)?;
            let params = AtomPair {
                a: (&pa).into(),
                b: (&pb).into(),
            };
            (sys, Some(params))
        }
        Model::Random => {
            let mut rng = seeded(args.seed);
            let a = random_hermitian(args.n, &mut rng);
            let b = random_hermitian(args.n, &mut rng);
            (ControlSystem::new(a, b)?, None)
        }
    };
    let required = args.n * args.n - 1;
    if sys.closure_rank() < required {
        return Err(CliError::model(format!(
            "closure rank {} < {required}: the pair is not bracket generating",
            sys.closure_rank()
        )));
    }
    let model = match args.model {
        Model::Atom => "atom",
        Model::Random => "random",
    };
    write_json(&args.out, &SystemFile::from_system(&sys, model, params))?;
    println!("wrote {} (N={}, closure rank {})", args.out.display(), args.n, sys.closure_rank());
    Ok(())
}

fn resolve_target(name: &str, n: usize) -> Result<UnitaryOperator, CliError> {
    match name {
        "identity" => Ok(UnitaryOperator::identity(n)),
        "cnot" if n == 4 => Ok(cnot_target()),
        "cnot" => Err(CliError::usage(format!("the cnot target needs N=4, system has N={n}"))),
        path => {
            let file: TargetFile = read_json(Path::new(path))?;
            if file.n != n {
                return Err(CliError::usage(format!("target is for N={}, system has N={n}", file.n)));
            }
            file.to_unitary()
        }
    }
}

fn parse_reps(s: &str, n: usize) -> Result<usize, CliError> {
    if s == "auto" {
        return Ok(n * n - 1);
    }
    match s.parse::<usize>() {
        Ok(r) if r >= 1 => Ok(r),
        _ => Err(CliError::usage(format!("--reps must be a positive integer or 'auto', got '{s}'"))),
    }
}

pub fn synthesize(args: &SynthesizeArgs) -> Result<(), CliError> {
    let sys = load_system(&args.system)?;
    let n = sys.dim();
    let target = resolve_target(&args.target, n)?;
    let reps = parse_reps(&args.reps, n)?;
    let k = args.k.unwrap_or(n * n);
    if !(args.tol > 0.0) {
        return Err(CliError::usage(format!("--tol must be > 0, got {}", args.tol)));
    }
    // Root errors add up over the repetitions.
    let rep = synthesize_repeated(&sys, &target, reps, k, args.tol / reps as f64, args.restarts, args.seed)?;
    let meta = SequenceMeta {
        target_distance: Some(rep.distance),
        seed: Some(args.seed),
        target: Some(args.target.clone()),
        ..Default::default()
    };
    write_json(&args.out, &SequenceFile::from_sequence(&rep.sequence, meta))?;
    println!(
        "wrote {}: {} steps ({} x {k}), distance {:.3e}, restarts {}",
        args.out.display(),
        rep.sequence.len(),
        reps,
        rep.distance,
        rep.root_result.restarts_used
    );
    if rep.distance > args.tol {
        return Err(CliError::convergence(format!(
            "distance {:.3e} exceeds --tol {:e}; best result written",
            rep.distance, args.tol
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct AttemptEntry {
    rung: String,
    relative: f64,
}

#[derive(Debug, Serialize)]
struct ProtectionReportFile {
    rung: String,
    method: String,
    tol: f64,
    slots: usize,
    steps: usize,
    g_norm: f64,
    residual: f64,
    relative: f64,
    max_first_order_norm: f64,
    total_wait: f64,
    control_duration: f64,
    wait_ratio: f64,
    gate_change: f64,
    failed_attempts: Vec<AttemptEntry>,
    tau: Vec<f64>,
}

pub fn protect(args: &ProtectArgs) -> Result<(), CliError> {
    let sys = load_system(&args.system)?;
    let input = load_sequence(&args.seq, &sys)?;
    let seq = input.to_sequence()?;
    let opts = ProtectionOptions {
        tol: args.tol,
        fallback: args.fallback.into(),
        seed: args.seed,
        ..Default::default()
    };
    let report = protect_sequence(&seq, &sys, &opts)?;
    let meta = SequenceMeta {
        protection: Some(report.rung.describe()),
        gate_change: Some(report.gate_change),
        ..input.meta.clone()
    };
    write_json(&args.out, &SequenceFile::from_sequence(&report.sequence, meta))?;
    if let Some(path) = &args.report {
        let file = ProtectionReportFile {
            rung: report.rung.describe(),
            method: report.method.as_str().to_string(),
            tol: args.tol,
            slots: report.slots,
            steps: report.sequence.len(),
            g_norm: report.g_norm,
            residual: report.residual,
            relative: report.relative,
            max_first_order_norm: report.max_first_order_norm,
            total_wait: report.total_wait,
            control_duration: report.control_duration,
            wait_ratio: report.wait_ratio(),
            gate_change: report.gate_change,
            failed_attempts: report
                .failed_attempts
                .iter()
                .map(|f| AttemptEntry {
                    rung: f.rung.describe(),
                    relative: f.relative,
                })
                .collect(),
            tau: report.tau.clone(),
        };
        write_json(path, &file)?;
    }
    for f in &report.failed_attempts {
        println!("{}: infeasible (relative residual {:.3e})", f.rung.describe(), f.relative);
    }
    println!(
        "wrote {}: {} via {} ({} pulses + {} waits), relative residual {:.3e}, wait ratio {:.3}",
        args.out.display(),
        report.rung.describe(),
        report.method.as_str(),
        report.sequence.len(),
        report.slots,
        report.relative,
        report.wait_ratio()
    );
    Ok(())
}

fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn verify(args: &VerifyArgs) -> Result<(), CliError> {
    let sys = load_system(&args.system)?;
    let seq = load_sequence(&args.seq, &sys)?.to_sequence()?;
    let baseline = match &args.baseline {
        Some(p) => Some(load_sequence(p, &sys)?.to_sequence()?),
        None => None,
    };
    let cfg = SweepConfig {
        eps_min: args.eps_min,
        eps_max: args.eps_max,
        points: args.points,
        trials: args.trials,
        seed: args.seed,
    };
    let rows = run_sweep(&sys, &seq, baseline.as_ref(), &cfg)?;
    let mut w = csv::Writer::from_path(&args.out)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", args.out.display())))?;
    let io = |e: csv::Error| CliError::usage(format!("cannot write {}: {e}", args.out.display()));
    w.write_record(["epsilon", "trial", "noise_seed", "error_protected", "error_unprotected"])
        .map_err(io)?;
    for r in &rows {
        w.write_record([
            fmt_real(r.epsilon),
            r.trial.to_string(),
            r.noise_seed.to_string(),
            fmt_real(r.error_protected),
            r.error_unprotected.map(fmt_real).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", args.out.display())))?;
    let slopes = sweep_slopes(&rows, &cfg);
    let show = |s: Option<f64>| s.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into());
    println!("wrote {}: {} rows", args.out.display(), rows.len());
    println!("protected slope: {}", show(slopes.protected));
    if baseline.is_some() {
        println!("unprotected slope: {}", show(slopes.unprotected));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct NoGoFile {
    dimension: usize,
    closed_form_residual: f64,
    closed_form_norms: Vec<f64>,
    target_dependent: bool,
    /// Orthonormal Hermitian basis of the uncorrectable subspace.
    basis: Vec<JsonMatrix>,
}

pub fn nogo(args: &NogoArgs) -> Result<(), CliError> {
    let sys = load_system(&args.system)?;
    let seq = load_sequence(&args.seq, &sys)?.to_sequence()?;
    if seq.has_waits() {
        return Err(CliError::usage("the no-go analysis needs a sequence without waits"));
    }
    if !seq.is_alternating() {
        return Err(CliError::usage("the no-go analysis needs a sequence of A and B steps only"));
    }
    let report = NoGoReport::analyze(&seq, &sys)?;
    let file = NoGoFile {
        dimension: report.dimension,
        closed_form_residual: report.closed_form_residual,
        closed_form_norms: report.closed_form_norms.clone(),
        target_dependent: report.target_dependent,
        basis: report.hermitized_basis.iter().map(files::matrix_to_json).collect(),
    };
    write_json(&args.out, &file)?;
    println!(
        "wrote {}: D = {}, closed-form residual {:.3e}",
        args.out.display(),
        report.dimension,
        report.closed_form_residual
    );
    Ok(())
}
