use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cyclosense::detector::decide;
use cyclosense::harness::{run_sweep, stream_seed, ExperimentPlan, Method, Pipeline};
use cyclosense::signal::{
    add_awgn, generate_h0, generate_signal, read_iq_csv, read_iq_f32, write_iq_csv, write_iq_f32,
};
use cyclosense::{verify, Error, SampleRecord, SignalModel};

#[derive(Parser)]
#[command(name = "cyclosense", version, about = "Compressive cyclostationary spectrum sensing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a BPSK (or noise-only) sample block.
    Simulate(SimulateArgs),
    /// Run one detection pipeline on an IQ file and print a JSON verdict.
    Detect(DetectArgs),
    /// Run a Monte-Carlo sweep and write the figure CSVs plus a manifest.
    Sweep(SweepArgs),
    /// Check the implementation against independent reference computations.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Bin,
    Csv,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4000)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    n_sym: usize,
    /// SNR in dB; omit for a noise-free signal.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<f64>,
    /// Emit unit-power noise only.
    #[arg(long, conflicts_with = "snr")]
    h0: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Defaults to csv for `.csv` paths and binary float32 otherwise.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "hades-sym")]
    method: Method,
    #[arg(long, default_value_t = 0.05)]
    pfa: f64,
    /// Plan supplying N, M, delays and detector settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    c_r: Option<f64>,
    /// Symbol length assumed by the oracle methods when no config is given.
    #[arg(long, default_value_t = 8)]
    n_sym: usize,
    /// Seed of the random sampling mask.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reduced desk profile (N = 1000, M = 250).
    #[arg(long)]
    fast: bool,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn format_of(path: &Path, explicit: Option<Format>) -> Format {
    explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => Format::Bin,
    })
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let record = if args.h0 {
        generate_h0(args.n, 1.0, stream_seed(args.seed, "h0", 0))?
    } else {
        let clean = generate_signal(&SignalModel::bpsk(args.n_sym), args.n, stream_seed(args.seed, "signal", 0))?;
        match args.snr {
            Some(snr) => add_awgn(&clean, snr, stream_seed(args.seed, "noise", 0))?,
            None => clean,
        }
    };
    match format_of(&args.out, args.format) {
        Format::Bin => write_iq_f32(&args.out, &record)?,
        Format::Csv => write_iq_csv(&args.out, &record)?,
    }
    eprintln!("wrote {} samples to {}", record.len(), args.out.display());
    Ok(())
}

fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Config(format!("{}: no such file", path.display())))
    }
}

fn load_plan(path: &Path) -> Result<ExperimentPlan, Failure> {
    require_file(path)?;
    Ok(ExperimentPlan::load(path)?)
}

fn read_record(path: &Path, format: Option<Format>) -> Result<SampleRecord, Failure> {
    require_file(path)?;
    Ok(match format_of(path, format) {
        Format::Bin => read_iq_f32(path)?,
        Format::Csv => read_iq_csv(path)?,
    })
}

fn detect(args: DetectArgs) -> Result<(), Failure> {
    let record = read_record(&args.input, args.format)?;
    let mut plan = match &args.config {
        Some(path) => load_plan(path)?,
        None => {
            // block length from the file, default proportions otherwise
            let n_sym = args.n_sym.max(1);
            let n = record.len() - record.len() % n_sym;
            ExperimentPlan { n, m: n / 4 - (n / 4) % n_sym, n_sym, ..ExperimentPlan::default() }
        }
    };
    plan.methods = vec![args.method];
    if let Some(seed) = args.seed {
        plan.seed = seed;
    }
    let c_r = args.c_r.unwrap_or(plan.fixed_c_r);
    plan.fixed_c_r = c_r;
    plan.validate()?;
    let pipe = Pipeline::new(&plan)?;
    let (_, support, test) = pipe.detect(args.method, &record, c_r, stream_seed(plan.seed, "mask", 0))?;
    let result = decide(&test, args.pfa)?;
    let out = serde_json::json!({
        "method": args.method,
        "c_r": args.method.is_sparse().then_some(c_r),
        "n": plan.n,
        "support": support,
        "k_test": result.k_test,
        "statistic": result.statistic,
        "dof": result.dof,
        "threshold": result.threshold,
        "pfa": result.pfa,
        "verdict": result.verdict,
        "regularized": result.regularized,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json value"));
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let mut plan = match (&args.config, args.fast) {
        (Some(path), _) => load_plan(path)?,
        (None, true) => ExperimentPlan::fast(),
        (None, false) => ExperimentPlan::default(),
    };
    if args.fast && args.config.is_some() {
        let fast = ExperimentPlan::fast();
        plan.n = fast.n;
        plan.m = fast.m;
        plan.n_sym = fast.n_sym;
    }
    if let Some(t) = args.trials {
        plan.trials = t;
    }
    if let Some(s) = args.seed {
        plan.seed = s;
    }
    plan.validate()?;
    let quiet = args.quiet;
    let results = run_sweep(&plan, &|msg: &str| {
        if !quiet {
            eprintln!("{msg}");
        }
    })?;
    std::fs::create_dir_all(&args.out).map_err(|e| Failure::Runtime(e.to_string()))?;
    let manifest = results.write(&args.out)?;
    for f in manifest.files.iter().filter(|_| !quiet) {
        eprintln!("{}: {} rows", args.out.join(&f.name).display(), f.rows);
    }
    Ok(())
}

fn run_verify(args: VerifyArgs) -> Result<bool, Failure> {
    let checks = verify::run_all(args.seed)?;
    let mut ok = true;
    for c in &checks {
        println!(
            "{} {:<48} error {:.3e} (tolerance {:.1e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.error,
            c.tolerance
        );
        ok &= c.passed;
    }
    Ok(ok)
}

fn init_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("CYCLOSENSE_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Failure::Config(format!("CYCLOSENSE_THREADS={v} is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = init_threads().and_then(|_| match cli.command {
        Command::Simulate(a) => simulate(a).map(|_| true),
        Command::Detect(a) => detect(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Verify(a) => run_verify(a),
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
