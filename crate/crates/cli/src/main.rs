//! Command-line front end: builds the block encodings and verifies them
//! against the assembled operator, runs the end-to-end linear solve, and
//! produces resource tables for the lowered circuits.
//!
//! Reports are JSON on stdout (or at `--out`); the counting commands also
//! emit the CSV table, as a sibling file when `--out` is given. Repeat runs
//! with the same configuration produce byte-identical reports.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vlasolve::blockenc::{full_be, verify_all};
use vlasolve::linalg::write_vector_dump;
use vlasolve::lower::{count_step, sweep_csv, ResourceReport, Strategy};
use vlasolve::problem::{make_grid, OperatorParts, PlasmaParams};
use vlasolve::qsvt::{default_kappa, solve_with_parts, SolverConfig};
use vlasolve::sim::BLOCK_DATA_LIMIT;

/// Per-encoding deviation bound for `verify`.
const BE_TOLERANCE: f64 = 1e-8;
/// A solve counts as passed at or above this overlap with the direct solve.
const FIDELITY_FLOOR: f64 = 0.99;
/// Caps worker threads for the sweep; unset means all available cores.
const THREADS_ENV: &str = "VLASOLVE_THREADS";

#[derive(Parser)]
#[command(
    name = "vlasolve",
    version,
    about = "Block-encoding workbench for the 1-D Vlasov-Ampere system in frequency domain"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML configuration file; command-line flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Write the JSON report here instead of stdout. Counting commands
    /// also write the CSV table next to it.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Position register width (grid has 2^nx points).
    #[arg(long, global = true)]
    nx: Option<usize>,

    /// Velocity register width (grid has 2^nv points).
    #[arg(long, global = true)]
    nv: Option<usize>,

    /// Drive frequency of the frequency-domain operator.
    #[arg(long, global = true)]
    omega0: Option<f64>,

    /// Condition bound for the inversion; computed from the operator
    /// spectrum when omitted.
    #[arg(long, global = true)]
    kappa: Option<f64>,

    /// Uniform error target of the inverse polynomial.
    #[arg(long, global = true)]
    eps: Option<f64>,

    /// Lowering strategy: baseline, optimized, or both.
    #[arg(long, global = true)]
    strategy: Option<String>,

    /// count-only: build and count circuits, never simulate.
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Cmd {
    /// Build every block encoding and compare it against the assembled
    /// operator on the simulator.
    Verify,
    /// Run the full quantum linear solve and cross-check it classically.
    Solve,
    /// Lower one counted step at the requested size and tally resources.
    Count,
    /// Resource table over a grid of problem sizes.
    Sweep,
}

impl Cmd {
    fn name(self) -> &'static str {
        match self {
            Cmd::Verify => "verify",
            Cmd::Solve => "solve",
            Cmd::Count => "count",
            Cmd::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    #[value(name = "count-only")]
    CountOnly,
}

/// Optional fields of the TOML configuration file.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    n_x: Option<usize>,
    n_v: Option<usize>,
    omega0: Option<f64>,
    kappa: Option<f64>,
    eps: Option<f64>,
    strategy: Option<String>,
    mode: Option<String>,
    /// Sweep grid as [n_x, n_v] pairs.
    sizes: Option<Vec<[usize; 2]>>,
    out: Option<PathBuf>,
    /// Write the post-selected solution vector to this path after a solve.
    solution_dump: Option<PathBuf>,
    /// Operator part toggles; both default to true.
    advection: Option<bool>,
    coupling: Option<bool>,
}

/// Fully resolved run configuration (file values overridden by flags).
struct RunConfig {
    n_x: usize,
    n_v: usize,
    omega0: Option<f64>,
    kappa: Option<f64>,
    eps: f64,
    strategies: Vec<Strategy>,
    count_only: bool,
    sizes: Vec<(usize, usize)>,
    out: Option<PathBuf>,
    solution_dump: Option<PathBuf>,
    parts: OperatorParts,
    threads: usize,
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let file: FileConfig = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => FileConfig::default(),
    };

    let strategies = match cli.strategy.as_deref().or(file.strategy.as_deref()) {
        None | Some("both") => Strategy::ALL.to_vec(),
        Some(one) => vec![one.parse::<Strategy>().map_err(|e| anyhow!("{e}"))?],
    };

    let count_only = cli.mode.is_some()
        || match file.mode.as_deref() {
            None => false,
            Some("count-only") => true,
            Some(other) => bail!("unknown mode {other:?} in config; expected \"count-only\""),
        };

    let sizes = match &file.sizes {
        Some(list) => list.iter().map(|p| (p[0], p[1])).collect(),
        None => (3..=6).flat_map(|x| (2..=4).map(move |v| (x, v))).collect(),
    };

    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| anyhow!("{THREADS_ENV} must be a positive integer, got {v:?}"))?,
        Err(_) => std::thread::available_parallelism().map(usize::from).unwrap_or(1),
    };

    Ok(RunConfig {
        n_x: cli.nx.or(file.n_x).unwrap_or(3),
        n_v: cli.nv.or(file.n_v).unwrap_or(2),
        omega0: cli.omega0.or(file.omega0),
        kappa: cli.kappa.or(file.kappa),
        eps: cli.eps.or(file.eps).unwrap_or(1e-3),
        strategies,
        count_only,
        sizes,
        out: cli.out.clone().or(file.out),
        solution_dump: file.solution_dump,
        parts: OperatorParts {
            advection: file.advection.unwrap_or(true),
            coupling: file.coupling.unwrap_or(true),
        },
        threads,
    })
}

fn params_for(cfg: &RunConfig) -> PlasmaParams<f64> {
    let mut p = PlasmaParams::default();
    if let Some(w) = cfg.omega0 {
        p.omega0 = w;
    }
    p
}

/// Simulation-backed commands hold the data register at or below the
/// extraction guard; larger sizes are counting-only territory.
fn guard_simulation(cfg: &RunConfig) -> Result<()> {
    let data = cfg.n_x + cfg.n_v + 1;
    if data > BLOCK_DATA_LIMIT {
        bail!(
            "data width {data} (= n_x + n_v + 1) exceeds the {BLOCK_DATA_LIMIT}-qubit \
             simulation guard; rerun with --mode=count-only or use the count/sweep commands"
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// reports

#[derive(Serialize)]
struct EncodingLine {
    name: String,
    max_abs_error: f64,
    pass: bool,
}

#[derive(Serialize)]
struct Scales {
    #[serde(rename = "s_F")]
    s_f: f64,
    #[serde(rename = "s_C")]
    s_c: f64,
    s: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    command: &'static str,
    n_x: usize,
    n_v: usize,
    omega0: f64,
    tolerance: f64,
    scales: Scales,
    encodings: Vec<EncodingLine>,
    all_passed: bool,
}

#[derive(Serialize)]
struct SolveReport {
    command: &'static str,
    n_x: usize,
    n_v: usize,
    omega0: f64,
    eps: f64,
    kappa: f64,
    degree: usize,
    fidelity: f64,
    success_probability: f64,
    residual: f64,
    solution_scale: f64,
    threshold: f64,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostic: Option<String>,
}

#[derive(Serialize)]
struct CountReport {
    command: &'static str,
    mode: &'static str,
    rows: Vec<ResourceReport>,
    csv: String,
}

fn emit_json(cfg: &RunConfig, report: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    match &cfg.out {
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn csv_sibling(path: &Path) -> PathBuf {
    path.with_extension("csv")
}

// ---------------------------------------------------------------------------
// commands

fn cmd_verify(cfg: &RunConfig) -> Result<bool> {
    guard_simulation(cfg)?;
    let params = params_for(cfg);
    let grid = make_grid(&params, cfg.n_x, cfg.n_v)?;
    let pairs = verify_all(&grid, &params)?;
    let encodings: Vec<EncodingLine> = pairs
        .into_iter()
        .map(|(name, err)| EncodingLine { name, max_abs_error: err, pass: err <= BE_TOLERANCE })
        .collect();
    let full = full_be(&grid, &params)?;
    let scales = Scales {
        s_f: full.notes["scale_advection"],
        s_c: full.notes["scale_coupling"],
        s: full.scale,
    };
    let all_passed = encodings.iter().all(|e| e.pass);
    let report = VerifyReport {
        command: "verify",
        n_x: cfg.n_x,
        n_v: cfg.n_v,
        omega0: params.omega0,
        tolerance: BE_TOLERANCE,
        scales,
        encodings,
        all_passed,
    };
    emit_json(cfg, &report)?;
    if !all_passed {
        for e in report.encodings.iter().filter(|e| !e.pass) {
            eprintln!("encoding {} off by {:.3e} (> {BE_TOLERANCE:.1e})", e.name, e.max_abs_error);
        }
    }
    Ok(all_passed)
}

fn cmd_solve(cfg: &RunConfig) -> Result<bool> {
    guard_simulation(cfg)?;
    let params = params_for(cfg);
    let grid = make_grid(&params, cfg.n_x, cfg.n_v)?;
    let kappa = match cfg.kappa {
        Some(k) => k,
        None => default_kappa(&grid, &params)?,
    };
    let solver = SolverConfig { kappa, eps: cfg.eps, ..SolverConfig::default() };
    let outcome = solve_with_parts(&grid, &params, &solver, cfg.parts)?;
    if let Some(path) = &cfg.solution_dump {
        let mut f = fs::File::create(path)
            .with_context(|| format!("creating solution dump {}", path.display()))?;
        write_vector_dump(&outcome.state, &mut f)?;
    }
    let pass = outcome.fidelity >= FIDELITY_FLOOR;
    let report = SolveReport {
        command: "solve",
        n_x: cfg.n_x,
        n_v: cfg.n_v,
        omega0: params.omega0,
        eps: cfg.eps,
        kappa: outcome.kappa,
        degree: outcome.degree,
        fidelity: outcome.fidelity,
        success_probability: outcome.success_probability,
        residual: outcome.residual,
        solution_scale: outcome.solution_scale,
        threshold: FIDELITY_FLOOR,
        pass,
        diagnostic: outcome.diagnostic.clone(),
    };
    emit_json(cfg, &report)?;
    if !pass {
        eprintln!(
            "fidelity {:.6} below {FIDELITY_FLOOR}: {}",
            outcome.fidelity,
            outcome.diagnostic.as_deref().unwrap_or("no diagnostic")
        );
    }
    Ok(pass)
}

/// Count one size (`count`) or a grid of sizes (`sweep`); also the landing
/// spot for any command run with --mode=count-only.
fn cmd_count(cfg: &RunConfig, invoked: Cmd, sizes: &[(usize, usize)]) -> Result<bool> {
    let rows = sweep_rows(sizes, &cfg.strategies, cfg.threads)?;
    let csv = sweep_csv(&rows);
    let report =
        CountReport { command: invoked.name(), mode: "count-only", rows, csv: csv.clone() };
    emit_json(cfg, &report)?;
    if let Some(path) = &cfg.out {
        let sib = csv_sibling(path);
        fs::write(&sib, &csv).with_context(|| format!("writing {}", sib.display()))?;
    }
    Ok(true)
}

/// Size-by-strategy counting, sharded over the thread cap. Rows are sorted
/// by (n_x, n_v, strategy) regardless of scheduling.
fn sweep_rows(
    sizes: &[(usize, usize)],
    strategies: &[Strategy],
    threads: usize,
) -> Result<Vec<ResourceReport>> {
    let jobs: Vec<(usize, usize, Strategy)> = sizes
        .iter()
        .flat_map(|&(x, v)| strategies.iter().map(move |&s| (x, v, s)))
        .collect();
    let workers = threads.clamp(1, jobs.len().max(1));
    let mut rows: Vec<ResourceReport> = if workers <= 1 {
        jobs.iter()
            .map(|&(x, v, s)| count_step::<f64>(x, v, s))
            .collect::<vlasolve::Result<_>>()?
    } else {
        let chunk = jobs.len().div_ceil(workers);
        std::thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .chunks(chunk)
                .map(|part| {
                    scope.spawn(move || {
                        part.iter()
                            .map(|&(x, v, s)| count_step::<f64>(x, v, s))
                            .collect::<vlasolve::Result<Vec<_>>>()
                    })
                })
                .collect();
            let mut all = Vec::with_capacity(jobs.len());
            for h in handles {
                all.extend(h.join().expect("counting worker panicked")?);
            }
            Ok::<_, vlasolve::Error>(all)
        })?
    };
    rows.sort_by_key(|r| (r.n_x, r.n_v, r.strategy));
    Ok(rows)
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = resolve(cli)?;
    if cfg.count_only || cli.command == Cmd::Count {
        let single = [(cfg.n_x, cfg.n_v)];
        let sizes: &[(usize, usize)] =
            if cli.command == Cmd::Sweep { &cfg.sizes } else { &single };
        return cmd_count(&cfg, cli.command, sizes);
    }
    match cli.command {
        Cmd::Verify => cmd_verify(&cfg),
        Cmd::Solve => cmd_solve(&cfg),
        Cmd::Count => unreachable!("handled above"),
        Cmd::Sweep => cmd_count(&cfg, Cmd::Sweep, &cfg.sizes),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
