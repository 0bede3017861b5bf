use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eqmorse::export::{export_trajectories, read_cache, Selection, CACHE_FILE};
use eqmorse::pipeline::{run_scenario, Report, RunOptions, Step};
use eqmorse::scenario::{builtin_scenarios, find_builtin, ExpectedSpec, ScenarioConfig};
use eqmorse::Error;

/// Environment variable overriding the worker-thread count.
const WORKERS_VAR: &str = "EQMORSE_WORKERS";

#[derive(Parser)]
#[command(name = "eqmorse", version, about = "S1-equivariant Morse cohomology over Z2[T]")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the manifold, action and function.
    Validate(RunArgs),
    /// Locate and classify critical points.
    Crit(RunArgs),
    /// Count flow lines and assemble the Morse differential.
    Morse(RunArgs),
    /// Count k-jump flow lines for every admissible pair.
    Jumps(RunArgs),
    /// Assemble the equivariant complex and compute its cohomology.
    Homology(RunArgs),
    /// Everything in `homology` plus numerical cross-checks.
    Verify(RunArgs),
    /// Write trajectories of a cached run as CSV.
    Export(ExportArgs),
    /// List the built-in scenarios with their expected tables.
    ListBuiltins,
}

#[derive(Args)]
struct Source {
    /// Scenario document (TOML).
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    config: Option<PathBuf>,
    /// Built-in scenario id.
    #[arg(long)]
    builtin: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Truncation degree for the cohomology table.
    #[arg(long)]
    m_max: Option<usize>,
    /// Master seed for perturbations.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the report and the export cache.
    #[arg(long, default_value = "eqmorse-out")]
    out_dir: PathBuf,
    /// TOML file with `dims = [...]` replacing the expected table.
    #[arg(long)]
    expected: Option<PathBuf>,
    /// Integration tolerance for polishing and certificates.
    #[arg(long)]
    rtol: Option<f64>,
    /// Integration tolerance for grid scans.
    #[arg(long)]
    scan_rtol: Option<f64>,
    /// Residual bound for certified solutions.
    #[arg(long)]
    residual_tol: Option<f64>,
    /// Smallest admissible singular value of a certified solution.
    #[arg(long)]
    sigma_tol: Option<f64>,
    /// Angle samples per jump parameter in grid scans.
    #[arg(long)]
    angle_grid: Option<usize>,
    /// Duration samples per segment in grid scans.
    #[arg(long)]
    duration_grid: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectArg {
    All,
    Flow,
    Jumps,
}

#[derive(Args)]
struct ExportArgs {
    /// Directory holding the cache of an earlier run.
    #[arg(long, default_value = "eqmorse-out")]
    out_dir: PathBuf,
    /// Which trajectories to write.
    #[arg(long, value_enum, default_value = "all")]
    select: SelectArg,
}

fn load_config(source: &Source) -> Result<ScenarioConfig, Error> {
    match (&source.config, &source.builtin) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Structure(format!("cannot read {}: {e}", path.display())))?;
            ScenarioConfig::from_toml(&text)
        }
        (None, Some(id)) => find_builtin(id)
            .ok_or_else(|| Error::Structure(format!("unknown built-in `{id}`; see `eqmorse list-builtins`"))),
        (None, None) => unreachable!("clap requires a source"),
    }
}

fn options(args: &RunArgs, config: &ScenarioConfig, step: Step) -> Result<RunOptions, Error> {
    let mut settings = config.settings();
    if let Some(v) = args.rtol {
        settings.rtol = v;
    }
    if let Some(v) = args.scan_rtol {
        settings.scan_rtol = v;
    }
    if let Some(v) = args.residual_tol {
        settings.residual_tol = v;
    }
    if let Some(v) = args.sigma_tol {
        settings.sigma_tol = v;
    }
    if let Some(v) = args.angle_grid {
        settings.angle_grid = v;
    }
    if let Some(v) = args.duration_grid {
        settings.duration_grid = v;
    }
    let expected = match &args.expected {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Structure(format!("cannot read {}: {e}", path.display())))?;
            Some(ExpectedSpec::from_toml(&text)?.dims)
        }
        None => None,
    };
    Ok(RunOptions {
        step,
        m_max: args.m_max,
        seed: args.seed,
        expected,
        settings: Some(settings),
        ..RunOptions::default()
    })
}

fn fmt_dims(dims: &[usize]) -> String {
    let parts: Vec<String> = dims.iter().map(usize::to_string).collect();
    format!("({})", parts.join(","))
}

fn summarize(r: &Report) {
    println!("scenario: {}", r.scenario);
    println!("function: {}", r.function);
    if let Some(v) = &r.validation {
        for c in &v.checks {
            println!("check {:<24} {}", c.name, if c.passed { "ok" } else { "FAILED" });
        }
    }
    for a in r.attempts.iter().filter(|a| a.outcome != "ok") {
        println!("attempt {} (grid x{}): {}", a.attempt, a.grid_scale, a.outcome);
    }
    for c in &r.critical_points {
        println!("critical {:<6} index {} f = {:+.10}", c.id, c.index, c.value);
    }
    if let Some(m) = &r.morse {
        for p in &m.differential.pairs {
            println!(
                "d   {} -> {}: {} lines, parity {}",
                p.source,
                p.target,
                p.lines.len(),
                u8::from(p.parity)
            );
        }
        println!("morse homology {}", fmt_dims(&m.homology));
        println!(
            "morse inequalities {}",
            if m.inequalities.all_hold() { "hold" } else { "VIOLATED" }
        );
    }
    for e in &r.jumps {
        println!(
            "R{}  {} -> {}: {} solutions, parity {}",
            2 * e.k - 1,
            e.source,
            e.target,
            e.solutions.len(),
            u8::from(e.parity())
        );
    }
    if let Some(e) = &r.equivariant {
        println!("d_S1^2 = 0: {}", e.square.zero);
        println!("equivariant dims {}", fmt_dims(&e.homology.dims));
        if let Some(c) = &e.homology.comparison {
            println!(
                "expected {} -> {}",
                fmt_dims(&c.expected),
                if c.matches { "match" } else { "MISMATCH" }
            );
        }
    }
    if let Some(v) = &r.verification {
        println!("smooth cross-check agrees: {}", v.smooth_agrees);
        println!("parity flips: {}", v.parity_flips.len());
        println!(
            "trajectories {}: monotonicity {:.2e}, drift {:.2e}",
            v.trajectories, v.worst_monotonicity_violation, v.worst_constraint_drift
        );
    }
    if let Some(m) = &r.message {
        println!("note: {m}");
    }
}

fn write_outputs(dir: &Path, run: &eqmorse::pipeline::Run) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.toml"), run.report.to_toml())?;
    if let Some(cache) = &run.cache {
        fs::write(dir.join(CACHE_FILE), cache.to_toml())?;
    }
    Ok(())
}

fn run(args: &RunArgs, step: Step) -> Result<i32, Error> {
    let config = load_config(&args.source)?;
    let opts = options(args, &config, step)?;
    let start = Instant::now();
    let run = run_scenario(&config, &opts)?;
    eprintln!("elapsed {:.2} s", start.elapsed().as_secs_f64());
    summarize(&run.report);
    write_outputs(&args.out_dir, &run)?;
    let status = run.status();
    println!("status: {:?} (exit {})", status, status.exit_code());
    Ok(status.exit_code())
}

fn export(args: &ExportArgs) -> Result<i32, Error> {
    let cache = read_cache(&args.out_dir)?;
    let selection = match args.select {
        SelectArg::All => Selection::All,
        SelectArg::Flow => Selection::FlowLines,
        SelectArg::Jumps => Selection::JumpLines,
    };
    let written = export_trajectories(&cache, selection, &args.out_dir.join("trajectories"))?;
    for p in &written {
        println!("{}", p.display());
    }
    println!("{} files", written.len());
    Ok(0)
}

fn list_builtins() -> i32 {
    for c in builtin_scenarios() {
        let dims = c.expected_dims().map(fmt_dims).unwrap_or_else(|| "-".into());
        println!(
            "{:<20} m_max {}  expected {}  {}",
            c.id,
            c.m_max,
            dims,
            c.description.as_deref().unwrap_or("")
        );
    }
    0
}

fn configure_workers() {
    if let Some(n) = std::env::var(WORKERS_VAR).ok().and_then(|v| v.parse::<usize>().ok()) {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("warning: could not size the worker pool to {n}");
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_workers();
    let result = match &cli.command {
        Command::Validate(a) => run(a, Step::Validate),
        Command::Crit(a) => run(a, Step::Critical),
        Command::Morse(a) => run(a, Step::Morse),
        Command::Jumps(a) => run(a, Step::Jumps),
        Command::Homology(a) => run(a, Step::Homology),
        Command::Verify(a) => run(a, Step::Verify),
        Command::Export(a) => export(a),
        Command::ListBuiltins => Ok(list_builtins()),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
