//! `agplan` — plan air-ground missions over elevation grids, synthesize
//! terrains, compare switching-point optimizers, and audit path energy.
//!
//! Exit codes: 0 success, 2 configuration/usage error, 3 no path,
//! 4 battery exhausted, 5 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use agplan_core::config::RunConfig;
use agplan_core::export;
use agplan_core::planner::{account, plan, PlanError};
use agplan_core::smooth::smooth;
use agplan_core::terrain::{GridIndex, SynthKind, SynthSpec, TerrainGrid};
use agplan_harness::compare::{run_method_comparison, run_scenario, HarnessError};
use agplan_harness::report::ComparisonReport;
use agplan_harness::scenario::{builtin_scenario, load_scenario_file, Scenario};

const EXIT_CONFIG: u8 = 2;
const EXIT_NO_PATH: u8 = 3;
const EXIT_BATTERY: u8 = 4;
const EXIT_INTERNAL: u8 = 5;

#[derive(Parser)]
#[command(
    name = "agplan",
    version,
    about = "Energy-aware 2D/3D path planning for air-ground robots"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a mission and write path, SOC and switch-point artifacts.
    Plan(PlanArgs),
    /// Run the optimizer comparison on a scenario and emit a report.
    Compare(CompareArgs),
    /// Synthesize a terrain and write it as an ASCII grid.
    Synth(SynthArgs),
    /// Recompute energy accounting for an existing path CSV.
    EnergyReport(EnergyReportArgs),
}

#[derive(Args)]
struct TerrainArgs {
    /// ASCII-grid DEM file to plan over.
    #[arg(long, conflicts_with_all = ["synth_kind"])]
    dem: Option<PathBuf>,
    /// Synthetic terrain kind: flat|ramp|ridge|random-smooth.
    #[arg(long)]
    synth_kind: Option<SynthKind>,
    #[arg(long, default_value_t = 40)]
    synth_cols: usize,
    #[arg(long, default_value_t = 40)]
    synth_rows: usize,
    /// Cell size in meters for synthetic terrain.
    #[arg(long, default_value_t = 12.0)]
    synth_cell: f64,
    #[arg(long, default_value_t = 30.0)]
    synth_amplitude: f64,
    #[arg(long, default_value_t = 0)]
    synth_seed: u64,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline override, e.g. --set bas.alpha=250 (repeatable; applied after
    /// the config file and AGPLAN_* environment variables).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    terrain: TerrainArgs,
    /// Start cell as col,row.
    #[arg(long)]
    start: String,
    /// Goal cell as col,row.
    #[arg(long)]
    goal: String,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Plan from the raw flagged switching points, skipping optimization.
    #[arg(long)]
    no_bas: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Builtin scenario name (flat|low|ridge|sloped_ridge|high|composite)
    /// or a scenario file path.
    #[arg(long)]
    scenario: String,
    /// Fitness evaluations granted to every method.
    #[arg(long)]
    budget: usize,
    /// Comma-separated optimizer seeds; defaults to the config seed.
    #[arg(long)]
    seeds: Option<String>,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Report format.
    #[arg(long, default_value = "both", value_parser = ["json", "csv", "both"])]
    format: String,
    /// Include wall-clock timings (makes reports nondeterministic).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    kind: SynthKind,
    #[arg(long, default_value_t = 40)]
    cols: usize,
    #[arg(long, default_value_t = 40)]
    rows: usize,
    #[arg(long, default_value_t = 12.0)]
    cell: f64,
    #[arg(long, default_value_t = 30.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnergyReportArgs {
    /// Path CSV produced by `agplan plan`.
    #[arg(long)]
    path: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output JSON file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        let code = match &e {
            PlanError::InfeasibleEndpoint { .. } => EXIT_CONFIG,
            PlanError::NoPath { .. } | PlanError::SwitchCapExceeded { .. } => EXIT_NO_PATH,
            PlanError::BatteryExhausted { .. } => EXIT_BATTERY,
            _ => EXIT_INTERNAL,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        let code = match &e {
            HarnessError::BudgetTooSmall(_)
            | HarnessError::NoSwitchingPoint(_)
            | HarnessError::Config(_) => EXIT_CONFIG,
            _ => EXIT_INTERNAL,
        };
        CliError::new(code, e.to_string())
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::new(EXIT_CONFIG, e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::new(EXIT_INTERNAL, e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan(args) => cmd_plan(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Synth(args) => cmd_synth(args),
        Command::EnergyReport(args) => cmd_energy_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("agplan: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

/// Write-then-rename so artifacts are never observed half-written.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err)?;
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)?;
    Ok(())
}

fn parse_cell_arg(name: &str, value: &str) -> Result<GridIndex, CliError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(config_err(format!("--{name} expects col,row, got {value:?}")));
    }
    let col = parts[0]
        .parse()
        .map_err(|_| config_err(format!("--{name}: bad column {:?}", parts[0])))?;
    let row = parts[1]
        .parse()
        .map_err(|_| config_err(format!("--{name}: bad row {:?}", parts[1])))?;
    Ok(GridIndex::new(col, row))
}

/// Defaults, then config file, then environment, then --set overrides.
fn build_config(args: &ConfigArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_file(path).map_err(config_err)?;
    }
    cfg.apply_env().map_err(config_err)?;
    for pair in &args.set {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(config_err(format!("--set expects key=value, got {pair:?}")));
        };
        cfg.apply(key.trim(), value.trim()).map_err(config_err)?;
    }
    Ok(cfg)
}

fn load_terrain(args: &TerrainArgs) -> Result<TerrainGrid, CliError> {
    if let Some(dem) = &args.dem {
        let text = std::fs::read_to_string(dem)
            .map_err(|e| config_err(format!("cannot read {}: {e}", dem.display())))?;
        return TerrainGrid::parse_ascii(std::io::Cursor::new(text)).map_err(config_err);
    }
    let Some(kind) = args.synth_kind else {
        return Err(config_err("either --dem or --synth-kind is required"));
    };
    TerrainGrid::synthesize(&SynthSpec {
        kind,
        ncols: args.synth_cols,
        nrows: args.synth_rows,
        cell_size: args.synth_cell,
        amplitude: args.synth_amplitude,
        seed: args.synth_seed,
    })
    .map_err(config_err)
}

fn cmd_plan(args: PlanArgs) -> Result<(), CliError> {
    let grid = load_terrain(&args.terrain)?;
    let mut cfg = build_config(&args.config)?;
    if args.no_bas {
        cfg.planner.bas_enabled = false;
    }
    let start = parse_cell_arg("start", &args.start)?;
    let goal = parse_cell_arg("goal", &args.goal)?;
    let resolved = cfg.resolve(&grid).map_err(config_err)?;

    let path = plan(&grid, start, goal, &resolved)?;
    let report = account(&path, &resolved.energy, &resolved.battery)?;
    let smoothed = smooth(&path, resolved.planner.smooth_samples);

    let mut csv = Vec::new();
    export::write_path_csv(&path, &mut csv).map_err(io_err)?;
    write_atomic(&args.out.join("path.csv"), &csv)?;

    let mut soc = Vec::new();
    export::write_soc_csv(&path, &mut soc).map_err(io_err)?;
    write_atomic(&args.out.join("soc.csv"), &soc)?;

    let legs: Vec<(f64, f64)> = report.per_leg.iter().map(|l| (l.energy, l.distance)).collect();
    let geo = serde_json::to_string_pretty(&export::path_geojson(&path, &legs)).map_err(io_err)?;
    write_atomic(&args.out.join("path.geojson"), format!("{geo}\n").as_bytes())?;

    let sw = serde_json::to_string_pretty(&export::switch_points_geojson(&path)).map_err(io_err)?;
    write_atomic(
        &args.out.join("switch_points.geojson"),
        format!("{sw}\n").as_bytes(),
    )?;

    let smooth_geo =
        serde_json::to_string_pretty(&export::smoothed_geojson(&smoothed)).map_err(io_err)?;
    write_atomic(
        &args.out.join("smoothed.geojson"),
        format!("{smooth_geo}\n").as_bytes(),
    )?;

    let summary = serde_json::json!({
        "outcome": "ok",
        "total_energy_J": path.total_energy,
        "total_distance_m": path.total_distance,
        "final_soc": path.final_soc,
        "switch_count": path.switch_count(),
        "mode_legs": path.mode_legs.len(),
        "nodes": path.nodes.len(),
        "transform_count": report.transform_count,
        "smoothing_max_deviation_m": smoothed.max_deviation,
        "per_leg": report.per_leg.iter().map(|l| serde_json::json!({
            "mode": l.mode.to_string(),
            "energy_J": l.energy,
            "distance_m": l.distance,
        })).collect::<Vec<_>>(),
    });
    let summary = serde_json::to_string_pretty(&summary).map_err(io_err)?;
    write_atomic(&args.out.join("summary.json"), format!("{summary}\n").as_bytes())?;

    println!(
        "planned {} nodes, {} switch(es), {:.1} J, final SOC {:.4}",
        path.nodes.len(),
        path.switch_count(),
        path.total_energy,
        path.final_soc
    );
    Ok(())
}

fn load_scenario(spec: &str) -> Result<Scenario, CliError> {
    if agplan_harness::scenario::BUILTIN_NAMES.contains(&spec) {
        return builtin_scenario(spec).map_err(config_err);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(config_err(format!(
            "`{spec}` is neither a builtin scenario ({}) nor a readable file",
            agplan_harness::scenario::BUILTIN_NAMES.join("|")
        )));
    }
    load_scenario_file(path).map_err(config_err)
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let mut sc = load_scenario(&args.scenario)?;
    if let Some(path) = &args.config.config {
        sc.config.apply_file(path).map_err(config_err)?;
    }
    sc.config.apply_env().map_err(config_err)?;
    for pair in &args.config.set {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(config_err(format!("--set expects key=value, got {pair:?}")));
        };
        sc.config.apply(key.trim(), value.trim()).map_err(config_err)?;
    }

    let seeds: Vec<u64> = match &args.seeds {
        Some(list) => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| config_err(format!("bad seed {s:?}")))
            })
            .collect::<Result<_, _>>()?,
        None => vec![sc.config.seed],
    };

    let mut report = ComparisonReport::new();
    report.scenarios.push(run_scenario(&sc)?);
    report
        .comparisons
        .push(run_method_comparison(&sc, args.budget, &seeds, args.timings)?);

    if args.format == "json" || args.format == "both" {
        let json = report.to_json().map_err(io_err)?;
        write_atomic(&args.out.join("comparison.json"), json.as_bytes())?;
    }
    if args.format == "csv" || args.format == "both" {
        write_atomic(&args.out.join("comparison.csv"), report.to_csv().as_bytes())?;
    }

    for m in &report.comparisons[0].methods {
        println!(
            "{:<16} best F {:>14.3}  mean R {:>8.4}  path energy {}",
            m.method,
            m.best_f,
            m.mean_r,
            m.path_energy
                .map(|v| format!("{v:.1} J"))
                .unwrap_or_else(|| "n/a".into()),
        );
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let grid = TerrainGrid::synthesize(&SynthSpec {
        kind: args.kind,
        ncols: args.cols,
        nrows: args.rows,
        cell_size: args.cell,
        amplitude: args.amplitude,
        seed: args.seed,
    })
    .map_err(config_err)?;
    let mut buf = Vec::new();
    grid.write_ascii(&mut buf).map_err(io_err)?;
    write_atomic(&args.out, &buf)?;
    println!(
        "wrote {}x{} grid (cell {} m) to {}",
        grid.ncols(),
        grid.nrows(),
        grid.cell_size(),
        args.out.display()
    );
    Ok(())
}

fn cmd_energy_report(args: EnergyReportArgs) -> Result<(), CliError> {
    let cfg = build_config(&args.config)?;
    let text = std::fs::read_to_string(&args.path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", args.path.display())))?;
    let path = export::parse_path_csv(&text).map_err(config_err)?;
    let battery = agplan_core::energy::BatteryState::new(
        cfg.battery_capacity,
        cfg.battery_initial,
        cfg.soc_ref,
    )
    .map_err(config_err)?;
    let report = account(&path, &cfg.energy, &battery)?;
    let json = serde_json::to_string_pretty(&report).map_err(io_err)?;
    match &args.out {
        Some(out) => write_atomic(out, format!("{json}\n").as_bytes())?,
        None => println!("{json}"),
    }
    Ok(())
}
