//! `gclm`: solve for self-similar profiles, sweep the parameter, locate the
//! critical parameter and run the verification suite.
//!
//! Exit codes: 0 success, 1 usage error, 2 solver failure (non-convergence,
//! bracket error, failed verification).

mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gclm_core::continuation::{
    find_critical_a, sweep, BaseConfig, SweepError, SweepMode, DEFAULT_BRACKET,
};
use gclm_core::fixpoint::{default_x_max, solve, Seed, SolveConfig, SolveError};
use gclm_core::profile::GridSpec;
use gclm_core::reference::{verify_all, VerifyTolerances};
use gclm_core::specfun::inject_f_error;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "gclm", version, about = "Self-similar blowup profiles of the generalized CLM model")]
struct Cli {
    /// Relative error injected into F, for fault-injection tests.
    #[arg(long, hide = true, global = true, allow_hyphen_values = true)]
    inject_f_error: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the profile at one value of a.
    Solve(SolveArgs),
    /// Solve over a range or list of a values.
    Sweep(SweepArgs),
    /// Locate the critical a where the support type changes.
    Critical(CriticalArgs),
    /// Compare against closed forms and golden values.
    Verify(VerifyArgs),
}

#[derive(Args, Default)]
struct Common {
    /// Residual tolerance [default: 1e-7].
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap [default: 50].
    #[arg(long)]
    max_iter: Option<usize>,
    /// Grid end [default: depends on a].
    #[arg(long)]
    xmax: Option<f64>,
    /// JSON file with defaults for any of these settings.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[command(flatten)]
    common: Common,
    /// Output file; metadata goes to a `.meta.json` sidecar in CSV mode.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// `auto`, `lorentzian` or `file:<path>`.
    #[arg(long)]
    seed: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Continuation,
    Cold,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, allow_hyphen_values = true, requires_all = ["a_max", "step"], conflicts_with = "a_list")]
    a_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a_max: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// Comma-separated values.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    a_list: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Worker threads, cold mode only.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    common: Common,
    /// Output directory [default: sweep].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CriticalArgs {
    /// Bracket width at which bisection stops [default: 5e-3].
    #[arg(long)]
    tol_a: Option<f64>,
    /// `lo,hi` [default: 0.5269,0.7342].
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',', num_args = 1)]
    bracket: Option<Vec<f64>>,
    #[command(flatten)]
    common: Common,
    /// Trace file [default: critical_trace.json].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Print one JSON record per check.
    #[arg(long)]
    json: bool,
}

/// Settings accepted from `--config`; flags take precedence.
#[derive(Default, Deserialize, Serialize, Clone)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    tol: Option<f64>,
    max_iter: Option<usize>,
    x_max: Option<f64>,
    grid_h: Option<f64>,
    uniform_end: Option<f64>,
    ratio: Option<f64>,
    format: Option<Format>,
    seed: Option<String>,
    mode: Option<Mode>,
    jobs: Option<usize>,
    tol_a: Option<f64>,
    bracket: Option<(f64, f64)>,
}

enum Failure {
    Usage(String),
    Solver(String),
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::InvalidInput(m) => Failure::Usage(m),
            other => Failure::Solver(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(rel) = cli.inject_f_error {
        inject_f_error(rel);
    }
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Critical(a) => cmd_critical(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, Failure> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn base_config(common: &Common, file: &FileConfig) -> Result<BaseConfig, Failure> {
    let d = GridSpec::default();
    let grid = GridSpec {
        h: file.grid_h.unwrap_or(d.h),
        uniform_end: file.uniform_end.unwrap_or(d.uniform_end),
        ratio: file.ratio.unwrap_or(d.ratio),
        x_max: d.x_max,
    };
    let base = BaseConfig {
        tol: common.tol.or(file.tol).unwrap_or(1e-7),
        max_iter: common.max_iter.or(file.max_iter).unwrap_or(50),
        grid,
        x_max: common.xmax.or(file.x_max),
    };
    if !(base.tol > 0.0) {
        return Err(Failure::Usage(format!("--tol must be positive, got {}", base.tol)));
    }
    if base.max_iter == 0 {
        return Err(Failure::Usage("--max-iter must be at least 1".into()));
    }
    if let Some(x) = base.x_max.filter(|x| !(*x > grid.uniform_end)) {
        return Err(Failure::Usage(format!("--xmax must exceed {}, got {x}", grid.uniform_end)));
    }
    Ok(base)
}

fn check_a(a: f64) -> Result<(), Failure> {
    if a <= 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--a must satisfy a <= 1, got {a}")))
    }
}

fn cmd_solve(args: SolveArgs) -> Result<(), Failure> {
    check_a(args.a)?;
    let file = load_config(args.common.config.as_deref())?;
    let base = base_config(&args.common, &file)?;
    let mut cfg: SolveConfig = base.at(args.a);
    let seed = args.seed.or(file.seed).unwrap_or_else(|| "auto".into());
    cfg.seed = match seed.as_str() {
        "auto" => Seed::Auto,
        "lorentzian" => Seed::Lorentzian,
        s if s.starts_with("file:") => {
            let path = Path::new(&s[5..]);
            let profile = io::read_profile(path).map_err(Failure::Usage)?;
            Seed::Profile { label: s.to_string(), profile: Box::new(profile) }
        }
        other => {
            return Err(Failure::Usage(format!(
                "--seed must be auto, lorentzian or file:<path>, got {other:?}"
            )))
        }
    };
    let format = args.format.or(file.format).unwrap_or(Format::Csv);
    let result = solve(&cfg).map_err(|e| match e {
        SolveError::InvalidConfig(m) => Failure::Usage(m),
        other => Failure::Solver(other.to_string()),
    })?;
    match (&args.out, format) {
        (Some(path), Format::Csv) => {
            io::write(path, &io::profile_csv(&result)).map_err(Failure::Solver)?;
            io::write(&io::sidecar(path), &io::to_json(&result)).map_err(Failure::Solver)?;
            print!("{}", io::to_json(&result));
        }
        (Some(path), Format::Json) => {
            io::write(path, &io::to_json(&io::result_json(&result))).map_err(Failure::Solver)?;
            print!("{}", io::to_json(&result));
        }
        (None, Format::Csv) => print!("{}", io::profile_csv(&result)),
        (None, Format::Json) => print!("{}", io::to_json(&io::result_json(&result))),
    }
    Ok(())
}

fn a_values(args: &SweepArgs) -> Result<Vec<f64>, Failure> {
    if let Some(list) = &args.a_list {
        return Ok(list.clone());
    }
    let (Some(lo), Some(hi), Some(step)) = (args.a_min, args.a_max, args.step) else {
        return Err(Failure::Usage("give --a-list or all of --a-min, --a-max, --step".into()));
    };
    if !(step > 0.0) || !(hi >= lo) {
        return Err(Failure::Usage(format!("empty range [{lo}, {hi}] with step {step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let file = load_config(args.common.config.as_deref())?;
    let base = base_config(&args.common, &file)?;
    let values = a_values(&args)?;
    let mode = match args.mode.or(file.mode).unwrap_or(Mode::Continuation) {
        Mode::Continuation => SweepMode::Continuation,
        Mode::Cold => SweepMode::ColdStart,
    };
    if args.jobs.is_some() && mode == SweepMode::Continuation {
        return Err(Failure::Usage("--jobs applies to --mode cold only".into()));
    }
    let jobs = args.jobs.or(file.jobs);
    if jobs == Some(0) {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let table = sweep(&values, mode, &base, jobs)?;
    let dir = args.out.unwrap_or_else(|| PathBuf::from("sweep"));
    let csv = table.to_csv();
    io::write(&dir.join("sweep.csv"), &csv).map_err(Failure::Solver)?;
    let meta = serde_json::json!({
        "config": base,
        "a_values": values,
        "jobs": jobs,
        "table": table,
    });
    io::write(&dir.join("sweep.meta.json"), &io::to_json(&meta)).map_err(Failure::Solver)?;
    for r in table.records.iter().filter_map(|r| r.result.as_deref()) {
        let path = dir.join(format!("profile_a{}.csv", r.a));
        io::write(&path, &io::profile_csv(r)).map_err(Failure::Solver)?;
        io::write(&io::sidecar(&path), &io::to_json(r)).map_err(Failure::Solver)?;
    }
    print!("{csv}");
    for v in &table.monotone_violations {
        eprintln!(
            "finding: f_{}(x) < f_{}(x) by {:e} at x = {}",
            v.a1, v.a2, v.deficit, v.x
        );
    }
    if table.crossings > 1 {
        eprintln!("finding: support indicator changes sign {} times", table.crossings);
    }
    Ok(())
}

fn cmd_critical(args: CriticalArgs) -> Result<(), Failure> {
    let file = load_config(args.common.config.as_deref())?;
    let base = base_config(&args.common, &file)?;
    let bracket = match args.bracket {
        Some(v) if v.len() == 2 => (v[0], v[1]),
        Some(v) => return Err(Failure::Usage(format!("--bracket needs two values, got {}", v.len()))),
        None => file.bracket.unwrap_or(DEFAULT_BRACKET),
    };
    let tol_a = args.tol_a.or(file.tol_a).unwrap_or(5e-3);
    if !(tol_a > 0.0) {
        return Err(Failure::Usage(format!("--tol-a must be positive, got {tol_a}")));
    }
    let crit = find_critical_a(bracket, tol_a, &base)?;
    let out = args.out.unwrap_or_else(|| PathBuf::from("critical_trace.json"));
    let doc = serde_json::json!({
        "a_c": crit.a_c,
        "bracket": crit.bracket,
        "tol_a": crit.tol_a,
        "config": base,
        "x_max": base.x_max.unwrap_or_else(|| default_x_max(crit.a_c)),
        "trace": crit.trace,
    });
    io::write(&out, &io::to_json(&doc)).map_err(Failure::Solver)?;
    println!("{}", crit.a_c);
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let report = verify_all(&VerifyTolerances::default());
    if args.json {
        print!("{}", io::to_json(&report));
    } else {
        println!("{:<28} {:>24} {:>24} {:>10}  result", "check", "value", "expected", "tol");
        for c in &report.checks {
            let mark = if c.pass { "pass" } else { "FAIL" };
            println!("{:<28} {:>24e} {:>24e} {:>10e}  {mark}", c.name, c.value, c.expected, c.tol);
        }
    }
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> =
            report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        Err(Failure::Solver(format!("{} checks failed: {}", failed.len(), failed.join(", "))))
    }
}
