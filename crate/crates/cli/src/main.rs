//! `gbs` — seeded Gaussian-boson-sampling runs, distribution exports, and
//! validation suites from the command line.
//!
//! Exit codes: 0 success, 1 check failure, 2 usage error, 3 guard/refusal
//! or internal failure.

mod config;
mod unitary;

use std::io::Write;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use gbs_core::{
    bench_scaling, check_normalization, compare_to_exact, haar_unitary, hafnian_split_check,
    marginal_q, marginal_q_bruteforce, photon_count_pmf, run_pipeline, sample_configuration,
    ExactTable, InterferometerMatrix, MarginalMode, MarginalQuery, PositionString, SampleRecord,
    SqueezeSetup,
};

use config::{PartialConfig, RunConfig, SamplerMode};

/// Error carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: String) -> Self {
        Self { code, message }
    }

    pub fn usage(message: String) -> Self {
        Self::new(2, message)
    }

    pub fn check_failed(message: String) -> Self {
        Self::new(1, message)
    }

    pub fn refusal(message: String) -> Self {
        Self::new(3, message)
    }

    pub fn internal(message: String) -> Self {
        Self::new(3, message)
    }
}

impl From<gbs_core::Error> for CliError {
    fn from(e: gbs_core::Error) -> Self {
        use gbs_core::Error::*;
        let code = match &e {
            InvalidDimension(_) | Shape(_) | OddDimension(_) | IndexOutOfRange(_)
            | InvalidParameter(_) => 2,
            GuardExceeded(_) | CollisionFreeRegime { .. } | CollidingPrefix => 3,
            _ => 3,
        };
        CliError::new(code, e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "gbs", version, about = "Classical Gaussian boson sampling simulator")]
struct Cli {
    /// Worker thread count; 1 and >1 produce identical output.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples and write them as JSON lines.
    Sample(SampleArgs),
    /// Export the photon-count distribution as CSV (`n,prob`).
    Pmf(PmfArgs),
    /// Run a verification suite; nonzero exit iff a check fails.
    Validate(ValidateArgs),
    /// Time the configuration sampler across photon numbers (m = n^2).
    Bench(BenchArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// TOML config file; explicit flags override its values.
    #[arg(long)]
    config: Option<String>,
    /// Number of output modes.
    #[arg(short, long)]
    m: Option<usize>,
    /// Squeezing parameter; selects the two-stage pipeline.
    #[arg(short, long)]
    r: Option<f64>,
    /// Truncation multiplier for the photon-count distribution.
    #[arg(long)]
    cutoff: Option<f64>,
    /// Fixed even photon number; skips the photon-count stage.
    #[arg(short, long)]
    n: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<SamplerMode>,
    #[arg(short, long)]
    samples: Option<usize>,
    /// Root seed; sample i uses seed XOR i.
    #[arg(long)]
    seed: Option<u64>,
    /// Load the interferometer from a JSON file instead of Haar(seed).
    #[arg(long)]
    unitary: Option<String>,
    /// Store the interferometer actually used to a JSON file.
    #[arg(long)]
    save_unitary: Option<String>,
    /// Output path; stdout when omitted.
    #[arg(short, long)]
    output: Option<String>,
    /// Write the fully resolved config as TOML and exit without sampling.
    #[arg(long)]
    emit_config: Option<String>,
}

impl SampleArgs {
    fn partial(&self) -> PartialConfig {
        PartialConfig {
            m: self.m,
            r: self.r,
            cutoff: self.cutoff,
            n_override: self.n,
            mode: self.mode,
            samples: self.samples,
            seed: self.seed,
            unitary: self.unitary.clone(),
            output: self.output.clone(),
            threads: None,
        }
    }
}

#[derive(Args)]
struct PmfArgs {
    #[arg(short, long)]
    m: usize,
    #[arg(short, long)]
    r: f64,
    #[arg(long, default_value_t = 50.0)]
    cutoff: f64,
    #[arg(short, long)]
    output: Option<String>,
}

#[derive(Args)]
struct ValidateArgs {
    /// normalization | marginals | split | distribution
    suite: String,
    #[arg(short, long, default_value_t = 4)]
    n: usize,
    #[arg(short, long, default_value_t = 4)]
    m: usize,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(short, long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SamplerMode::Poly)]
    mode: SamplerMode,
    #[arg(short, long)]
    output: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Even photon numbers, e.g. --n 4,6,8.
    #[arg(short, long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, value_enum, default_value_t = SamplerMode::Poly)]
    mode: SamplerMode,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<String>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with exit code 0.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            std::process::exit(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            std::process::exit(3);
        }
    }
    let result = match cli.command {
        Command::Sample(args) => cmd_sample(args),
        Command::Pmf(args) => cmd_pmf(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Bench(args) => cmd_bench(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

fn write_output(path: Option<&str>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, contents)
            .map_err(|e| CliError::internal(format!("cannot write {p}: {e}"))),
        None => {
            print!("{contents}");
            std::io::stdout()
                .flush()
                .map_err(|e| CliError::internal(format!("stdout: {e}")))
        }
    }
}

fn load_interferometer(config: &RunConfig) -> Result<InterferometerMatrix, CliError> {
    match &config.unitary {
        Some(path) => {
            let im = unitary::load(path)?;
            if im.dim != config.m {
                return Err(CliError::usage(format!(
                    "unitary file is {}x{} but --m is {}",
                    im.dim, im.dim, config.m
                )));
            }
            Ok(im)
        }
        None => haar_unitary(config.m, config.seed).map_err(CliError::from),
    }
}

fn cmd_sample(args: SampleArgs) -> Result<(), CliError> {
    let base = match &args.config {
        Some(path) => PartialConfig::from_file(path)?,
        None => PartialConfig::default(),
    };
    let save_unitary = args.save_unitary.clone();
    let emit_config = args.emit_config.clone();
    let config = args.partial().over(base).resolve()?;

    if let Some(path) = emit_config {
        std::fs::write(&path, config.to_toml())
            .map_err(|e| CliError::internal(format!("cannot write {path}: {e}")))?;
        return Ok(());
    }

    let im = load_interferometer(&config)?;
    if let Some(path) = save_unitary {
        unitary::save(&path, &im)?;
    }

    // Refuse impossible collision-free requests up front rather than per
    // sample; in the two-stage pipeline the drawn n is checked per sample.
    if config.mode == SamplerMode::CollisionFree {
        if let Some(n) = config.n_override {
            if n > config.m {
                return Err(CliError::refusal(format!(
                    "collision-free sampling impossible: {n} photons into {} modes",
                    config.m
                )));
            }
        }
    }

    let setup = match config.r {
        Some(r) => Some(SqueezeSetup::new(config.m, r, config.cutoff).map_err(CliError::from)?),
        None => None,
    };
    let mode = config.mode.to_core();
    let start = std::time::Instant::now();
    // Each sample owns an independent generator seeded from the root, so
    // any subset of indices can be reproduced in isolation.
    let records: Result<Vec<SampleRecord>, gbs_core::Error> = (0..config.samples as u64)
        .into_par_iter()
        .map(|i| {
            let sample_seed = config.seed ^ i;
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
            let mut record = match (&setup, config.n_override) {
                (Some(setup), None) => run_pipeline(setup, &im.w, &mut rng, mode)?,
                (None, Some(n)) => sample_configuration(&im.w, n, &mut rng, mode)?,
                _ => unreachable!("config validation enforces exactly one"),
            };
            record.seed = sample_seed;
            record.mode = config.mode.tag().to_string();
            Ok(record)
        })
        .collect();
    let records = records.map_err(CliError::from)?;
    let wall = start.elapsed().as_secs_f64();

    let mut out = String::new();
    for record in &records {
        out.push_str(
            &serde_json::to_string(record)
                .map_err(|e| CliError::internal(format!("cannot encode record: {e}")))?,
        );
        out.push('\n');
    }
    write_output(config.output.as_deref(), &out)?;

    let mean_n: f64 =
        records.iter().map(|r| r.n as f64).sum::<f64>() / records.len().max(1) as f64;
    let collision_free = records
        .iter()
        .filter(|r| r.s.iter().all(|&sj| sj <= 1))
        .count() as f64
        / records.len().max(1) as f64;
    eprintln!(
        "{} samples, mean n = {:.3}, collision-free fraction = {:.3}, wall time = {:.3} s",
        records.len(),
        mean_n,
        collision_free,
        wall
    );
    Ok(())
}

fn cmd_pmf(args: PmfArgs) -> Result<(), CliError> {
    let setup = SqueezeSetup::new(args.m, args.r, args.cutoff).map_err(CliError::from)?;
    let pmf = photon_count_pmf(&setup).map_err(CliError::from)?;
    // Trim trailing zero-probability rows (the truncation floor can pad
    // past the support, e.g. at r = 0).
    let probs = pmf.probs();
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let mut csv = String::from("n,prob\n");
    for (i, p) in probs[..=last].iter().enumerate() {
        csv.push_str(&format!("{},{:.17e}\n", 2 * i, p));
    }
    write_output(args.output.as_deref(), &csv)
}

#[derive(Serialize)]
struct SuiteReport {
    suite: String,
    trials: usize,
    failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    distribution: Option<gbs_core::DistributionReport>,
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let report = match args.suite.as_str() {
        "normalization" => validate_normalization(&args)?,
        "marginals" => validate_marginals(&args)?,
        "split" => validate_split(&args)?,
        "distribution" => validate_distribution(&args)?,
        other => {
            return Err(CliError::usage(format!(
                "unknown suite '{other}' (expected normalization, marginals, split, or distribution)"
            )))
        }
    };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::internal(format!("cannot encode report: {e}")))?;
    write_output(args.output.as_deref(), &format!("{text}\n"))?;
    if report.failures > 0 {
        return Err(CliError::check_failed(format!(
            "{} of {} checks failed in suite {}",
            report.failures, report.trials, report.suite
        )));
    }
    Ok(())
}

fn validate_normalization(args: &ValidateArgs) -> Result<SuiteReport, CliError> {
    let trials = args.trials.min(20).max(1);
    let mut failures = 0;
    for t in 0..trials as u64 {
        let im = haar_unitary(args.m, args.seed.wrapping_add(t)).map_err(CliError::from)?;
        if !check_normalization(&im.w, args.n, args.m).map_err(CliError::from)? {
            failures += 1;
        }
    }
    Ok(SuiteReport {
        suite: "normalization".into(),
        trials,
        failures,
        distribution: None,
    })
}

fn validate_marginals(args: &ValidateArgs) -> Result<SuiteReport, CliError> {
    let im = haar_unitary(args.m, args.seed).map_err(CliError::from)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed.wrapping_add(1));
    let mut failures = 0;
    for _ in 0..args.trials {
        let k = rng.gen_range(0..=args.n);
        let prefix =
            PositionString::new((0..k).map(|_| rng.gen_range(1..=args.m)).collect());
        let query = MarginalQuery { w: &im.w, prefix: &prefix, n: args.n };
        let oracle = marginal_q_bruteforce(&query).map_err(CliError::from)?;
        for mode in [MarginalMode::PolySpace, MarginalMode::ExpSpace] {
            let got = marginal_q(&query, mode, None).map_err(CliError::from)?;
            if (got - oracle).abs() > 1e-9 * oracle.abs().max(1e-300) {
                failures += 1;
            }
        }
    }
    Ok(SuiteReport {
        suite: "marginals".into(),
        trials: args.trials * 2,
        failures,
        distribution: None,
    })
}

fn validate_split(args: &ValidateArgs) -> Result<SuiteReport, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut failures = 0;
    for t in 0..args.trials as u64 {
        let m = args.m.max(args.n);
        let im = haar_unitary(m, args.seed.wrapping_add(t)).map_err(CliError::from)?;
        let x = PositionString::new((0..args.n).map(|_| rng.gen_range(1..=m)).collect());
        let k = rng.gen_range(0..=args.n);
        if !hafnian_split_check(&im.w, &x, k).map_err(CliError::from)? {
            failures += 1;
        }
    }
    Ok(SuiteReport {
        suite: "split".into(),
        trials: args.trials,
        failures,
        distribution: None,
    })
}

fn validate_distribution(args: &ValidateArgs) -> Result<SuiteReport, CliError> {
    let im = haar_unitary(args.m, args.seed).map_err(CliError::from)?;
    let table = ExactTable::build(&im.w, args.n, args.m).map_err(CliError::from)?;
    let exact: Vec<(Vec<usize>, f64)> = table
        .entries()
        .iter()
        .map(|(c, p)| (c.occupations().to_vec(), *p))
        .collect();
    let mode = args.mode.to_core();
    let records: Result<Vec<SampleRecord>, gbs_core::Error> = (0..args.samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ i);
            sample_configuration(&im.w, args.n, &mut rng, mode)
        })
        .collect();
    let records = records.map_err(CliError::from)?;
    let report = compare_to_exact(&records, &exact).map_err(CliError::from)?;
    let failed = report.chi2_pvalue <= 0.001;
    Ok(SuiteReport {
        suite: "distribution".into(),
        trials: 1,
        failures: usize::from(failed),
        distribution: Some(report),
    })
}

#[derive(Serialize)]
struct BenchReport {
    os: &'static str,
    arch: &'static str,
    cpus: usize,
    scaling: gbs_core::ScalingReport,
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    if args.n.iter().any(|&n| n % 2 != 0 || n == 0) {
        return Err(CliError::usage(format!(
            "photon numbers must be positive and even, got {:?}",
            args.n
        )));
    }
    let scaling = bench_scaling(&args.n, |n| n * n, args.mode.to_core(), args.reps, args.seed)
        .map_err(CliError::from)?;
    let report = BenchReport {
        os: std::env::consts::OS,
        arch: std::env::consts::ARCH,
        cpus: std::thread::available_parallelism().map(|v| v.get()).unwrap_or(1),
        scaling,
    };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::internal(format!("cannot encode report: {e}")))?;
    write_output(args.output.as_deref(), &format!("{text}\n"))
}
