use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use boundary_lab::acceptance::{self, Suite};
use boundary_lab::config::RunConfig;
use boundary_lab::experiments::{self, Experiment};
use boundary_lab::report::ExperimentReport;
use boundary_lab::row;
use boundary_lab::{Exec, LabError};
use clap::Parser;

const OK: u8 = 0;
const USAGE: u8 = 1;
const FAILED: u8 = 2;
const CAP: u8 = 3;

const AFTER_HELP: &str = "Subcommands:
  exponent, density, shadow, ahlfors, growth, cone, cover, matrix-coeff,
  p1norm, kernel-convergence, sr-norm, projection, cocycle, bms,
  properness, ergodic, classify, verify-all

Exit codes: 0 success, 1 usage or I/O error, 2 validation or check failure,
3 enumeration cap exceeded.";

/// Exact experiments on weighted free groups and their boundaries.
#[derive(Debug, Parser)]
#[command(name = "boundary-lab", version, after_help = AFTER_HELP)]
struct Cli {
    /// Experiment to run, or verify-all.
    subcommand: String,

    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,

    /// RNG seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    threads: Option<usize>,
}

fn error_code(e: &LabError) -> u8 {
    match e {
        LabError::CapExceeded { .. } => CAP,
        LabError::Io(_) => USAGE,
        _ => FAILED,
    }
}

fn setup_exec(threads: Option<usize>) -> Result<Exec, String> {
    if threads == Some(0) {
        return Err("--threads must be positive".into());
    }
    if threads == Some(1) || !cfg!(feature = "parallel") {
        return Ok(Exec::Sequential);
    }
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(Exec::Parallel)
}

fn run_experiment(e: Experiment, cfg: &RunConfig, exec: Exec) -> u8 {
    let outputs = match experiments::run_and_write(e, cfg, &cfg.out, exec) {
        Ok(o) => o,
        Err(err) => {
            eprintln!("{e}: {err}");
            return error_code(&err);
        }
    };
    let mut code = OK;
    for o in &outputs {
        println!("wrote {}", cfg.out.join(format!("{}.csv", o.stem)).display());
        for c in o.report.failed_checks() {
            eprintln!("{}: check {} failed: {}", o.stem, c.name, c.detail);
            code = FAILED;
        }
    }
    code
}

fn verify_all(cfg: &RunConfig, exec: Exec) -> u8 {
    if let Err(e) = cfg.validate() {
        eprintln!("verify-all: {e}");
        return error_code(&e);
    }
    let suite = Suite {
        seed: cfg.seed,
        cap: cfg.cap,
        exec,
    };
    let start = Instant::now();
    let results = acceptance::run_all(&suite, |c| println!("{c}"));
    let mut report = ExperimentReport::new(
        "verify-all",
        &["criterion", "status", "supplementary", "detail"],
    );
    report.param("seed", cfg.seed as i64);
    report.param("cap", cfg.cap);
    for c in &results {
        let supp = match &c.supplementary {
            Some((_, true)) => "PASS",
            Some((_, false)) => "FAIL",
            None => "",
        };
        report.push(row![c.name, if c.passed { "PASS" } else { "FAIL" }, supp, c.detail.clone()]);
        report.check(c.name, c.passed, c.detail.clone());
    }
    let failed = results.iter().filter(|c| !c.passed).count();
    report.summarize("criteria", results.len());
    report.summarize("failed", failed);
    let header = experiments::header(cfg, "verify-all", exec, start.elapsed().as_secs_f64());
    if let Err(e) = report.write_files(&cfg.out, "verify-all", header) {
        eprintln!("verify-all: {e}");
        return USAGE;
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if results
        .iter()
        .any(|c| matches!(c.error, Some(LabError::CapExceeded { .. })))
    {
        CAP
    } else if failed > 0 {
        FAILED
    } else {
        OK
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, LabError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let experiment = match cli.subcommand.as_str() {
        "verify-all" => None,
        s => match s.parse::<Experiment>() {
            Ok(e) => Some(e),
            Err(_) => {
                eprintln!("unknown subcommand {s:?}\n\n{AFTER_HELP}");
                return ExitCode::from(USAGE);
            }
        },
    };
    let mut cfg = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config: {e}");
            return ExitCode::from(error_code(&e));
        }
    };
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let exec = match setup_exec(cli.threads) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(USAGE);
        }
    };
    let code = match experiment {
        Some(e) => run_experiment(e, &cfg, exec),
        None => verify_all(&cfg, exec),
    };
    ExitCode::from(code)
}
