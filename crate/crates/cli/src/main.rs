//! Command-line front end: terrain generation, single-shot planning, episode
//! and ensemble simulation, and the batched-vs-scalar planner benchmark.
//!
//! Every run writes a `manifest.json` into `--out-dir` echoing the fully
//! resolved configuration; re-running with `--config manifest.json` reproduces
//! it exactly. Exit codes: 0 ok, 2 validation error, 3 no feasible plan,
//! 4 benchmark correctness mismatch.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use stepkit_core::dcm::{CommandVelocity, GaitConfig, VhipParams};
use stepkit_core::planner::{
    bench_planner, candidate_costs, plan_foothold, BenchError, PlanError, PlanRequest,
    PlannerWeights,
};
use stepkit_core::sim::{
    run_ensemble, run_episode_on, traces_to_csv, EnsembleConfig, EpisodeConfig, EpisodeOutcome,
    TerrainSource,
};
use stepkit_core::terrain::{
    compute_steepness, generate_terrain, ElevationMap, FootprintKernel, TerrainKind, TerrainSpec,
};

#[derive(Parser)]
#[command(name = "stepkit", about = "Foothold planning and stepping simulation on elevation maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic elevation map and write it as an EMAP file.
    GenTerrain(GenTerrainArgs),
    /// Plan a single foothold on a map and write the result as JSON.
    Plan(PlanArgs),
    /// Run a stepping episode or a multi-walker ensemble.
    Simulate(SimulateArgs),
    /// Benchmark the batched planner against the scalar loop.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindArg {
    Flat,
    Pyramid,
    Rough,
}

impl From<KindArg> for TerrainKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Flat => TerrainKind::Flat,
            KindArg::Pyramid => TerrainKind::PyramidStairs,
            KindArg::Rough => TerrainKind::Rough,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct TerrainFlags {
    #[arg(long, value_enum, default_value = "flat")]
    kind: KindArg,
    #[arg(long, default_value_t = 36)]
    width_cells: usize,
    #[arg(long, default_value_t = 24)]
    length_cells: usize,
    #[arg(long, default_value_t = 0.05)]
    resolution: f64,
    /// World x of cell (0,0); defaults to centering the map on the origin.
    #[arg(long)]
    origin_x: Option<f64>,
    #[arg(long)]
    origin_y: Option<f64>,
    #[arg(long, default_value_t = 0.25)]
    step_height: f64,
    /// Tread depth of pyramid stairs, m.
    #[arg(long = "tread", default_value_t = 0.30)]
    tread_depth: f64,
    #[arg(long, default_value_t = 1000)]
    num_steps: usize,
    #[arg(long, default_value_t = 0.04)]
    amplitude: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TerrainFlags {
    fn to_spec(&self) -> TerrainSpec {
        TerrainSpec {
            kind: self.kind.into(),
            width_cells: self.width_cells,
            length_cells: self.length_cells,
            resolution: self.resolution,
            origin: match (self.origin_x, self.origin_y) {
                (Some(x), Some(y)) => Some(Vector2::new(x, y)),
                _ => None,
            },
            step_height: self.step_height,
            tread_depth: self.tread_depth,
            num_steps: self.num_steps,
            roughness_amplitude: self.amplitude,
            seed: self.seed,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct GenTerrainArgs {
    #[command(flatten)]
    terrain: TerrainFlags,
    /// Output EMAP path.
    #[arg(short, long)]
    output: PathBuf,
    /// Also write an 8-bit PGM rendering of the heights.
    #[arg(long)]
    pgm: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// JSON file with a fully resolved config, overriding all flags.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct PlanArgs {
    /// EMAP file with the terrain.
    #[arg(long)]
    map: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    xi_x: f64,
    #[arg(long, default_value_t = 0.0)]
    xi_y: f64,
    /// Elapsed time in the current step, s.
    #[arg(long, default_value_t = 0.0)]
    t: f64,
    #[arg(long, default_value_t = 0.0)]
    vx: f64,
    #[arg(long, default_value_t = 0.0)]
    vy: f64,
    #[arg(long, default_value_t = 0.0)]
    wyaw: f64,
    /// Support foot position in the map frame.
    #[arg(long, default_value_t = 0.0)]
    support_x: f64,
    #[arg(long, default_value_t = 0.0)]
    support_y: f64,
    /// Heading of the command frame, rad.
    #[arg(long, default_value_t = 0.0)]
    yaw: f64,
    /// Leg parity of the upcoming step (0 or 1).
    #[arg(long, default_value_t = 0)]
    leg: u8,
    #[arg(long, default_value_t = 9.81)]
    g: f64,
    #[arg(long, default_value_t = 1.0)]
    z0: f64,
    /// CoM vertical slope prior, m/s.
    #[arg(long, default_value_t = 0.0)]
    k: f64,
    /// Stepping frequency, Hz (step duration is 1/(2f)).
    #[arg(long, default_value_t = 1.25)]
    freq: f64,
    /// Nominal lateral inter-foot distance, m.
    #[arg(long, default_value_t = 0.2)]
    lateral: f64,
    /// Pelvis offset width, m.
    #[arg(long, default_value_t = 0.2)]
    pelvis: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha1: f64,
    #[arg(long, default_value_t = 10.0)]
    alpha2: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha3: f64,
    #[arg(long, default_value_t = 0.3)]
    half_extent: f64,
    #[arg(long, default_value_t = 0.15)]
    foot_length: f64,
    #[arg(long, default_value_t = 0.10)]
    foot_width: f64,
    /// Output JSON path; defaults to <out-dir>/plan.json.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Optional PGM of the windowed cost grid with the argmin marked.
    #[arg(long)]
    cost_pgm: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SimulateArgs {
    /// Terrain: "flat", "pyramid", "rough", or a path to an EMAP file.
    #[arg(long, default_value = "flat")]
    terrain: String,
    #[arg(long, default_value_t = 161)]
    width_cells: usize,
    #[arg(long, default_value_t = 161)]
    length_cells: usize,
    #[arg(long, default_value_t = 0.05)]
    resolution: f64,
    #[arg(long, default_value_t = 0.25)]
    step_height: f64,
    #[arg(long = "tread", default_value_t = 0.20)]
    tread_depth: f64,
    #[arg(long, default_value_t = 0.04)]
    amplitude: f64,
    /// Commanded forward speed for a single episode, m/s.
    #[arg(long, default_value_t = 0.5)]
    speed: f64,
    #[arg(long, default_value_t = 0.0)]
    vy: f64,
    #[arg(long, default_value_t = 0.0)]
    wyaw: f64,
    /// Success when forward progress reaches this distance, m
    /// (ensembles default to the 2.0 m goal line).
    #[arg(long)]
    goal: Option<f64>,
    /// Step budget; defaults to 40 for single episodes, 70 for ensembles.
    #[arg(long)]
    max_steps: Option<u32>,
    /// DCM fall radius, m; defaults to 1.0 for single episodes and to the
    /// tighter 0.75 capture bound for ensembles.
    #[arg(long)]
    fall_radius: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    alpha1: f64,
    #[arg(long, default_value_t = 10.0)]
    alpha2: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha3: f64,
    #[arg(long, default_value_t = 1.25)]
    freq: f64,
    #[arg(long, default_value_t = 1.0)]
    z0: f64,
    #[arg(long)]
    start_x: Option<f64>,
    #[arg(long)]
    start_y: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    heading: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 10)]
    replan_interval: u32,
    /// Gaussian touchdown scatter, m.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run this many walkers per speed instead of a single episode.
    #[arg(long)]
    ensemble: Option<u32>,
    /// Comma-separated speeds for the ensemble, m/s.
    #[arg(long, default_value = "0.5,1.0,1.5,2.0")]
    speeds: String,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct BenchArgs {
    #[arg(long, default_value_t = 4096)]
    batch: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long)]
    workers: Option<usize>,
    /// Terrain flags; --seed also seeds the randomized request batch.
    #[command(flatten)]
    terrain: TerrainFlags,
    /// Output JSON path; defaults to <out-dir>/bench.json.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

enum CliError {
    Validation(String),
    NoPlan(String),
    BenchMismatch(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::NoPlan(_) => 3,
            CliError::BenchMismatch(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::NoPlan(m) | CliError::BenchMismatch(m) => m,
        }
    }
}

fn validation<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Validation(e.to_string())
}

fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(validation)?;
    let manifest: serde_json::Value = serde_json::from_str(&text).map_err(validation)?;
    // accept either a bare config object or a full manifest
    let cfg = manifest.get("config").cloned().unwrap_or(manifest);
    serde_json::from_value(cfg).map_err(validation)
}

fn write_manifest(
    out_dir: &Path,
    subcommand: &str,
    config: &impl Serialize,
    outputs: &[&Path],
) -> Result<(), CliError> {
    fs::create_dir_all(out_dir).map_err(validation)?;
    let manifest = serde_json::json!({
        "subcommand": subcommand,
        "config": config,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    let path = out_dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).map_err(validation)?)
        .map_err(validation)
}

fn cmd_gen_terrain(mut args: GenTerrainArgs) -> Result<(), CliError> {
    if let Some(cfg) = &args.config {
        args = load_config(cfg)?;
    }
    let spec = args.terrain.to_spec();
    let map = generate_terrain(&spec).map_err(validation)?;
    if let Some(parent) = args.output.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(validation)?;
        }
    }
    map.save(&args.output).map_err(validation)?;
    let mut outputs: Vec<&Path> = vec![&args.output];
    if let Some(pgm) = &args.pgm {
        fs::write(pgm, map.to_pgm()).map_err(validation)?;
        outputs.push(pgm);
    }
    write_manifest(&args.out_dir, "gen-terrain", &args, &outputs)?;
    println!(
        "wrote {} ({}x{} cells at {} m)",
        args.output.display(),
        map.width_cells,
        map.length_cells,
        map.resolution
    );
    Ok(())
}

fn cmd_plan(mut args: PlanArgs) -> Result<(), CliError> {
    if let Some(cfg) = &args.config {
        args = load_config(cfg)?;
    }
    let map = ElevationMap::load(&args.map).map_err(validation)?;
    let kernel = FootprintKernel::new(args.foot_length, args.foot_width);
    let steepness = compute_steepness(&map, &kernel).map_err(validation)?;
    let gait = GaitConfig {
        l: args.lateral,
        l_p: args.pelvis,
        f: args.freq,
        leg_index: args.leg,
    };
    let req = PlanRequest {
        xi: Vector2::new(args.xi_x, args.xi_y),
        t: args.t,
        params: VhipParams::new(args.g, args.z0, args.k, gait.step_duration()),
        gait,
        cmd: CommandVelocity::new(args.vx, args.vy, args.wyaw),
        support: Vector2::new(args.support_x, args.support_y),
        yaw: args.yaw,
        map: &map,
        steepness: &steepness,
        weights: PlannerWeights::new(args.alpha1, args.alpha2, args.alpha3),
        half_extent: args.half_extent,
    };
    let plan = plan_foothold(&req).map_err(|e| match e {
        PlanError::EmptyWindow => {
            CliError::NoPlan(r#"{"error":"no_plan","cause":"empty_window"}"#.into())
        }
        other => CliError::Validation(other.to_string()),
    })?;

    fs::create_dir_all(&args.out_dir).map_err(validation)?;
    let out_path = args
        .output
        .clone()
        .unwrap_or_else(|| args.out_dir.join("plan.json"));
    let plan_json = serde_json::json!({
        "u_t": [plan.u_t.x, plan.u_t.y],
        "world_u_t": [plan.world_u_t.x, plan.world_u_t.y],
        "b": [plan.b.x, plan.b.y],
        "h_z": plan.h_z,
        "cell": { "col": plan.cell.0, "row": plan.cell.1 },
        "cost": plan.cost,
    });
    fs::write(
        &out_path,
        serde_json::to_string_pretty(&plan_json).map_err(validation)?,
    )
    .map_err(validation)?;

    let mut outputs: Vec<&Path> = vec![&out_path];
    if let Some(pgm_path) = &args.cost_pgm {
        let window = req.default_window().map_err(validation)?;
        let grid = candidate_costs(&req, &window).map_err(validation)?;
        fs::write(pgm_path, cost_grid_pgm(&grid, plan.cell)).map_err(validation)?;
        outputs.push(pgm_path);
    }
    write_manifest(&args.out_dir, "plan", &args, &outputs)?;
    println!(
        "planned u_T = ({:.3}, {:.3}) m, h_z = {:.3} m, cost {:.4}",
        plan.u_t.x, plan.u_t.y, plan.h_z, plan.cost.total
    );
    Ok(())
}

/// Min-max scaled cost image; the chosen (argmin) cell is marked white.
fn cost_grid_pgm(grid: &stepkit_core::planner::CostGrid, chosen: (usize, usize)) -> Vec<u8> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &c in &grid.costs {
        lo = lo.min(c);
        hi = hi.max(c);
    }
    let span = hi - lo;
    let mut out = format!("P5\n{} {}\n255\n", grid.width, grid.length).into_bytes();
    for iy in 0..grid.length {
        for ix in 0..grid.width {
            let cell = (grid.ix0 + ix, grid.iy0 + iy);
            let c = grid.costs[iy * grid.width + ix];
            let g = if cell == chosen {
                255
            } else if span > 0.0 {
                (((c - lo) / span) * 200.0).round() as u8
            } else {
                0
            };
            out.push(g);
        }
    }
    out
}

fn parse_speeds(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Validation(format!("bad speed value '{tok}'")))
        })
        .collect()
}

fn terrain_source(args: &SimulateArgs) -> Result<TerrainSource, CliError> {
    let kind = match args.terrain.as_str() {
        "flat" => TerrainKind::Flat,
        "pyramid" => TerrainKind::PyramidStairs,
        "rough" => TerrainKind::Rough,
        path => {
            let p = PathBuf::from(path);
            if !p.exists() {
                return Err(CliError::Validation(format!(
                    "terrain '{path}' is neither a known kind nor an existing EMAP file"
                )));
            }
            return Ok(TerrainSource::Path(p));
        }
    };
    Ok(TerrainSource::Spec(TerrainSpec {
        kind,
        width_cells: args.width_cells,
        length_cells: args.length_cells,
        resolution: args.resolution,
        step_height: args.step_height,
        tread_depth: args.tread_depth,
        roughness_amplitude: args.amplitude,
        seed: args.seed,
        ..TerrainSpec::default()
    }))
}

fn episode_config(args: &SimulateArgs) -> Result<EpisodeConfig, CliError> {
    let ensemble = args.ensemble.is_some();
    Ok(EpisodeConfig {
        terrain: terrain_source(args)?,
        schedule: vec![(0.0, CommandVelocity::new(args.speed, args.vy, args.wyaw))],
        max_steps: args.max_steps.unwrap_or(if ensemble { 70 } else { 40 }),
        goal_distance: args.goal.or(if ensemble { Some(2.0) } else { None }),
        fall_radius: args.fall_radius.unwrap_or(if ensemble { 0.75 } else { 1.0 }),
        gait: GaitConfig {
            f: args.freq,
            ..GaitConfig::default()
        },
        weights: PlannerWeights::new(args.alpha1, args.alpha2, args.alpha3),
        z0: args.z0,
        dt: args.dt,
        replan_interval: args.replan_interval,
        touchdown_noise: args.noise,
        start: match (args.start_x, args.start_y) {
            (Some(x), Some(y)) => Some(Vector2::new(x, y)),
            _ => None,
        },
        heading: args.heading,
        seed: args.seed,
        ..EpisodeConfig::default()
    })
}

fn with_pool<T>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(validation)?;
            Ok(pool.install(f))
        }
    }
}

fn cmd_simulate(mut args: SimulateArgs) -> Result<(), CliError> {
    if let Some(cfg) = &args.config {
        args = load_config(cfg)?;
    }
    fs::create_dir_all(&args.out_dir).map_err(validation)?;
    let episode = episode_config(&args)?;

    if let Some(n_walkers) = args.ensemble {
        let ens = EnsembleConfig {
            episode,
            n_walkers,
            speeds: parse_speeds(&args.speeds)?,
            master_seed: args.seed,
            ..EnsembleConfig::stairs_protocol(args.step_height)
        };
        let report = with_pool(args.workers, || run_ensemble(&ens))?.map_err(validation)?;
        let path = args.out_dir.join("report.json");
        fs::write(
            &path,
            serde_json::to_string_pretty(&report).map_err(validation)?,
        )
        .map_err(validation)?;
        write_manifest(&args.out_dir, "simulate", &args, &[&path])?;
        println!(
            "ensemble: speeds {:?} success {:?} ({} walkers)",
            report.speeds, report.success_ratio, report.n_walkers
        );
    } else {
        let (metrics, traces) =
            with_pool(args.workers, || run_episode_from(&episode))?.map_err(validation)?;
        let csv_path = args.out_dir.join("trace.csv");
        fs::write(&csv_path, traces_to_csv(&traces)).map_err(validation)?;
        let metrics_path = args.out_dir.join("metrics.json");
        fs::write(
            &metrics_path,
            serde_json::to_string_pretty(&metrics).map_err(validation)?,
        )
        .map_err(validation)?;
        write_manifest(&args.out_dir, "simulate", &args, &[&csv_path, &metrics_path])?;
        let outcome = match metrics.outcome {
            EpisodeOutcome::Success => "success".to_string(),
            EpisodeOutcome::Timeout => "timeout".to_string(),
            EpisodeOutcome::Fall(cause) => format!("fall({cause:?})"),
        };
        println!(
            "episode: {outcome}, {} steps, velocity MAE {:.3} m/s, traveled {:.2} m",
            metrics.steps, metrics.velocity_mae, metrics.distance_traveled
        );
    }
    Ok(())
}

fn run_episode_from(
    cfg: &EpisodeConfig,
) -> Result<(stepkit_core::sim::EpisodeMetrics, Vec<stepkit_core::sim::StepTrace>), stepkit_core::sim::SimError>
{
    let map = stepkit_core::sim::build_terrain(&cfg.terrain)?;
    let steep = compute_steepness(&map, &cfg.foot)?;
    run_episode_on(cfg, &map, &steep)
}

fn cmd_bench(mut args: BenchArgs) -> Result<(), CliError> {
    if let Some(cfg) = &args.config {
        args = load_config(cfg)?;
    }
    let workers = args.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    let spec = args.terrain.to_spec();
    let report = bench_planner(args.batch, &spec, args.reps, workers, args.terrain.seed)
        .map_err(|e| {
        match e {
            BenchError::Mismatch { slot } => CliError::BenchMismatch(format!(
                "batched and scalar outputs differ at slot {slot}; timings withheld"
            )),
            other => CliError::Validation(other.to_string()),
        }
    })?;
    fs::create_dir_all(&args.out_dir).map_err(validation)?;
    let path = args
        .output
        .clone()
        .unwrap_or_else(|| args.out_dir.join("bench.json"));
    fs::write(
        &path,
        serde_json::to_string_pretty(&report).map_err(validation)?,
    )
    .map_err(validation)?;
    write_manifest(&args.out_dir, "bench", &args, &[&path])?;
    println!(
        "batch {}: {:.3} ms batched vs {:.3} ms scalar on {} workers (speedup {:.2}x)",
        report.batch_size,
        report.ms_batched_median,
        report.ms_scalar_median,
        report.workers,
        report.speedup
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenTerrain(args) => cmd_gen_terrain(args),
        Command::Plan(args) => cmd_plan(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
