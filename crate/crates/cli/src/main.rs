//! `ksep`: command-line driver for the k-separability criterion.
//!
//! Exit codes: 0 inconclusive, 10 not k-separable, 1 internal check
//! failure, 2 input error. Machine output goes to stdout, diagnostics to
//! stderr.

mod family;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ksep_core::criterion::first_term;
use ksep_core::oracle::{oracle_partition_term, oracle_total_swap, ORACLE_GUARD};
use ksep_core::search::{optimize_probe_detailed, ScanPoint};
use ksep_core::states::random_density;
use ksep_core::{
    enumerate_kpartitions, evaluate_parallel, kpartitions, oracle_evaluate, partition_term,
    scan_noise, stirling2, CriterionReport, Error, ProductProbe, SearchConfig,
    DEFAULT_TOLERANCE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

const EXIT_INCONCLUSIVE: u8 = 0;
const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_DETECTED: u8 = 10;

/// Largest deviation tolerated by `oracle-check`.
const ORACLE_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(name = "ksep", version, about = "k-separability criterion for multipartite states")]
struct Cli {
    /// Worker threads (0 = all cores). Never changes numeric output.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct StateSource {
    /// State file (JSON).
    #[arg(long, conflicts_with = "family")]
    state: Option<PathBuf>,
    /// Family descriptor, e.g. `ghz:n=3,d=2`, `w:n=4`, `mixed:I,n=3`, `noisy-ghz:n=3,p=0.6`.
    #[arg(long)]
    family: Option<String>,
}

impl StateSource {
    fn describe(&self) -> String {
        match (&self.state, &self.family) {
            (Some(p), _) => format!("state:{}", p.display()),
            (_, Some(f)) => format!("family:{f}"),
            _ => String::new(),
        }
    }
}

#[derive(Args, Clone)]
struct SearchFlags {
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.3)]
    step_init: f64,
    #[arg(long, default_value_t = 0.97)]
    step_decay: f64,
    #[arg(long, default_value_t = 1e-10)]
    convergence_eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
}

impl SearchFlags {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            restarts: self.restarts,
            max_iters: self.max_iters,
            step_init: self.step_init,
            step_decay: self.step_decay,
            seed: self.seed,
            convergence_eps: self.convergence_eps,
            tolerance: self.tolerance,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the criterion for one probe.
    Eval {
        #[command(flatten)]
        source: StateSource,
        /// `ghz-pair`, `random`, `random:SEED`, `basis:I,J` or a probe JSON file.
        #[arg(long, default_value = "ghz-pair")]
        probe: String,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        /// Seed for `--probe random`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Search for a violating probe.
    Detect {
        #[command(flatten)]
        source: StateSource,
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        search: SearchFlags,
    },
    /// White-noise detection threshold.
    Scan {
        #[command(flatten)]
        source: StateSource,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1e-3)]
        resolution: f64,
        /// Write one CSV row per grid or bisection evaluation to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        search: SearchFlags,
    },
    /// Compare the fast evaluator with the explicit two-copy oracle.
    OracleCheck {
        #[arg(long)]
        n: usize,
        /// Largest site dimension; each trial draws dims from 2..=dmax.
        #[arg(long, default_value_t = 2)]
        dmax: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List the partitions of n sites into k blocks.
    Partitions {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        count_only: bool,
    },
}

#[derive(Serialize)]
struct Manifest {
    command: &'static str,
    inputs: Vec<String>,
    seed: u64,
    tool_version: &'static str,
    wall_time_ms: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    search_config: Option<SearchConfig>,
}

struct Outcome {
    code: u8,
    stdout: String,
}

fn manifest(
    command: &'static str,
    inputs: Vec<String>,
    seed: u64,
    start: Instant,
    search_config: Option<SearchConfig>,
) -> Manifest {
    Manifest {
        command,
        inputs,
        seed,
        tool_version: env!("CARGO_PKG_VERSION"),
        wall_time_ms: start.elapsed().as_millis(),
        search_config,
    }
}

fn exit_for(report: &CriterionReport) -> u8 {
    if report.is_detected() {
        EXIT_DETECTED
    } else {
        EXIT_INCONCLUSIVE
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn report_csv(r: &CriterionReport) -> String {
    let mut out = String::from("quantity,partition,value\n");
    out += &format!("first_term,,{}\n", r.first_term);
    for (p, v) in &r.partition_terms {
        out += &format!("term,{},{}\n", csv_field(&p.to_string()), v);
    }
    out += &format!("lhs,,{}\n", r.lhs);
    out
}

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("output serialization") + "\n"
}

fn run(command: Command) -> Result<Outcome, Error> {
    let start = Instant::now();
    match command {
        Command::Eval {
            source,
            probe,
            k,
            tolerance,
            seed,
            format,
        } => {
            let rho = family::load_source(source.state.as_deref(), source.family.as_deref())?;
            let probe_v: ProductProbe = family::parse_probe(&probe, rho.dims(), seed)?;
            let report = evaluate_parallel(&rho, &probe_v, k, tolerance)?;
            let stdout = match format {
                Format::Csv => report_csv(&report),
                Format::Json => to_json(&json!({
                    "manifest": manifest("eval", vec![source.describe(), format!("probe:{probe}")], seed, start, None),
                    "report": report,
                })),
            };
            Ok(Outcome {
                code: exit_for(&report),
                stdout,
            })
        }
        Command::Detect { source, k, search } => {
            let rho = family::load_source(source.state.as_deref(), source.family.as_deref())?;
            let cfg = search.config();
            let outcome = optimize_probe_detailed(&rho, k, &cfg)?;
            let stdout = to_json(&json!({
                "manifest": manifest("detect", vec![source.describe()], cfg.seed, start, Some(cfg.clone())),
                "report": outcome.report,
                "evaluations": outcome.evaluations(),
            }));
            Ok(Outcome {
                code: exit_for(&outcome.report),
                stdout,
            })
        }
        Command::Scan {
            source,
            k,
            resolution,
            trace,
            search,
        } => {
            let rho = family::load_source(source.state.as_deref(), source.family.as_deref())?;
            let cfg = search.config();
            let result = scan_noise(&rho, k, resolution, &cfg)?;
            if let Some(path) = trace {
                std::fs::write(path, trace_csv(&result.trace))?;
            }
            let stdout = to_json(&json!({
                "manifest": manifest("scan", vec![source.describe()], cfg.seed, start, Some(cfg.clone())),
                "scan": result,
            }));
            Ok(Outcome {
                code: EXIT_INCONCLUSIVE,
                stdout,
            })
        }
        Command::OracleCheck {
            n,
            dmax,
            trials,
            seed,
        } => oracle_check(n, dmax, trials, seed, start),
        Command::Partitions { n, k, count_only } => {
            if n > 20 {
                return Err(Error::Parameter(format!("n = {n} exceeds 20")));
            }
            // validates the range before counting
            let iter = kpartitions(n, k)?;
            let count = stirling2(n, k).expect("S(n, k) fits in u128 for n ≤ 20");
            let mut stdout = format!("count {count}\n");
            if !count_only {
                for p in iter {
                    stdout += &format!("{p}\n");
                }
            }
            Ok(Outcome {
                code: EXIT_INCONCLUSIVE,
                stdout,
            })
        }
    }
}

fn trace_csv(points: &[ScanPoint]) -> String {
    let mut out = String::from("phase,p,lhs,detected\n");
    for pt in points {
        let phase = serde_json::to_value(pt.phase).expect("phase name");
        out += &format!(
            "{},{},{},{}\n",
            phase.as_str().unwrap_or_default(),
            pt.p,
            pt.lhs,
            pt.detected
        );
    }
    out
}

fn oracle_check(n: usize, dmax: usize, trials: usize, seed: u64, start: Instant) -> Result<Outcome, Error> {
    if n == 0 || dmax < 2 {
        return Err(Error::Parameter("need n ≥ 1 and dmax ≥ 2".into()));
    }
    let worst = dmax
        .checked_pow(n as u32)
        .and_then(|d| d.checked_mul(d))
        .filter(|&d2| d2 <= ORACLE_GUARD);
    if worst.is_none() {
        return Err(Error::Guard(format!(
            "two-copy dimension ({dmax}^{n})² exceeds the oracle limit {ORACLE_GUARD}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_term_dev = 0.0f64;
    let mut max_lhs_dev = 0.0f64;
    for _ in 0..trials {
        let dims: Vec<usize> = (0..n).map(|_| rng.random_range(2..=dmax)).collect();
        let total: usize = dims.iter().product();
        let rank = rng.random_range(1..=total);
        let rho = random_density(&dims, rank, &mut rng)?;
        let probe = ProductProbe::new(
            ksep_core::states::random_product_factors(&dims, &mut rng),
            ksep_core::states::random_product_factors(&dims, &mut rng),
        )?;
        let k = rng.random_range(1..=n);
        let parts = enumerate_kpartitions(n, k)?;
        let alpha = &parts[rng.random_range(0..parts.len())];
        let fast = partition_term(&rho, &probe, alpha)?;
        let slow = oracle_partition_term(&rho, &probe, alpha)?;
        max_term_dev = max_term_dev.max((fast - slow).abs());
        let ft = first_term(&rho, &probe)?;
        max_term_dev = max_term_dev.max((ft - oracle_total_swap(&rho, &probe)?.max(0.0).sqrt()).abs());
        let a = ksep_core::evaluate(&rho, &probe, k, DEFAULT_TOLERANCE)?;
        let b = oracle_evaluate(&rho, &probe, k, DEFAULT_TOLERANCE)?;
        max_lhs_dev = max_lhs_dev.max((a.lhs - b.lhs).abs());
    }
    let passed = max_term_dev < ORACLE_TOL && max_lhs_dev < ORACLE_TOL;
    let stdout = to_json(&json!({
        "manifest": manifest("oracle-check", vec![format!("n={n},dmax={dmax},trials={trials}")], seed, start, None),
        "trials": trials,
        "max_term_deviation": max_term_dev,
        "max_lhs_deviation": max_lhs_dev,
        "threshold": ORACLE_TOL,
        "passed": passed,
    }));
    Ok(Outcome {
        code: if passed { EXIT_INCONCLUSIVE } else { EXIT_CHECK_FAILED },
        stdout,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(EXIT_CHECK_FAILED);
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.stdout.as_bytes()).is_err() {
                return ExitCode::from(EXIT_CHECK_FAILED);
            }
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
