//! Closed-loop point-mass stair walking.
//!
//! Each step plans a foothold, integrates the pendulum for one step duration
//! (replanning on the measured DCM along the way), then switches support to the
//! planned landing point. Falls, missing plans and map exits end the episode.

use std::path::PathBuf;

use nalgebra::{Rotation2, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dcm::{
    nominal_offset, nominal_step, omega, vhip_integrate, CommandVelocity, DcmState, GaitConfig,
    VhipParams,
};
use crate::planner::{plan_foothold, CostBreakdown, PlanRequest, PlannerWeights};
use crate::terrain::{
    compute_steepness, generate_terrain, ElevationMap, FootprintKernel, SteepnessMap, TerrainError,
    TerrainSpec,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Terrain(#[from] TerrainError),
    #[error("invalid episode config: {0}")]
    BadConfig(String),
}

/// Why a step could not be completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallCause {
    /// Support-relative DCM norm exceeded the fall radius.
    DcmDiverged,
    /// The search window had no candidates.
    NoPlan,
    /// The walker left the map.
    OffMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fall {
    pub cause: FallCause,
    /// Step index at which the episode ended.
    pub step: u32,
    /// Time within the failing step, s.
    pub t: f64,
}

impl std::fmt::Display for Fall {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "fall ({:?}) at step {} t={:.3}", self.cause, self.step, self.t)
    }
}

/// Full walker state between steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkerState {
    /// Stance foot in the map frame; z matches the terrain height.
    pub support: Vector3<f64>,
    /// Parity of the upcoming step.
    pub leg_index: u8,
    /// Pendulum state relative to the support foot.
    pub dcm: DcmState,
    /// Heading of the command frame, rad.
    pub world_yaw: f64,
    pub step_count: u32,
    /// Wall time since episode start, s.
    pub elapsed: f64,
    /// Realized vertical slope of the previous step, m/s; prior for planning.
    pub k_prev: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TerrainSource {
    Spec(TerrainSpec),
    Path(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub terrain: TerrainSource,
    /// (start_time, command) pairs with strictly increasing start times.
    pub schedule: Vec<(f64, CommandVelocity)>,
    pub max_steps: u32,
    /// Forward progress along the initial heading that counts as success.
    pub goal_distance: Option<f64>,
    /// Fall when the support-relative DCM norm exceeds this, m.
    pub fall_radius: f64,
    pub gait: GaitConfig,
    pub weights: PlannerWeights,
    pub g: f64,
    pub z0: f64,
    /// Step duration override; defaults to 1/(2 f) from the gait frequency.
    pub step_duration: Option<f64>,
    /// Integration substep, s.
    pub dt: f64,
    /// Substeps between mid-step replans; 0 plans once per step.
    pub replan_interval: u32,
    pub foot: FootprintKernel,
    pub half_extent: f64,
    /// Std-dev of Gaussian touchdown scatter, m; 0 lands exactly on the plan.
    pub touchdown_noise: f64,
    /// Start support position; defaults to the map center cell.
    pub start: Option<Vector2<f64>>,
    pub heading: f64,
    /// Steps excluded from the velocity MAE after each command change.
    pub transient_steps: u32,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            terrain: TerrainSource::Spec(TerrainSpec::default()),
            schedule: vec![(0.0, CommandVelocity::new(0.0, 0.0, 0.0))],
            max_steps: 40,
            goal_distance: None,
            fall_radius: 1.0,
            gait: GaitConfig::default(),
            weights: PlannerWeights::default(),
            g: 9.81,
            z0: 1.0,
            step_duration: None,
            dt: 1e-3,
            replan_interval: 10,
            foot: FootprintKernel::default(),
            half_extent: crate::planner::SearchWindow::DEFAULT_HALF_EXTENT,
            touchdown_noise: 0.0,
            start: None,
            heading: 0.0,
            transient_steps: 3,
            seed: 0,
        }
    }
}

impl EpisodeConfig {
    pub fn step_duration(&self) -> f64 {
        self.step_duration.unwrap_or_else(|| self.gait.step_duration())
    }

    /// Active command at a given episode time.
    pub fn command_at(&self, t: f64) -> CommandVelocity {
        let mut cmd = self
            .schedule
            .first()
            .map(|(_, c)| *c)
            .unwrap_or(CommandVelocity::new(0.0, 0.0, 0.0));
        for (start, c) in &self.schedule {
            if t >= *start {
                cmd = *c;
            }
        }
        cmd
    }

    fn segment_index(&self, t: f64) -> usize {
        let mut idx = 0;
        for (i, (start, _)) in self.schedule.iter().enumerate() {
            if t >= *start {
                idx = i;
            }
        }
        idx
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.schedule.is_empty() {
            return Err(SimError::BadConfig("schedule must not be empty".into()));
        }
        for w in self.schedule.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(SimError::BadConfig(
                    "schedule times must be strictly increasing".into(),
                ));
            }
        }
        if self.dt <= 0.0 || self.step_duration() <= 0.0 {
            return Err(SimError::BadConfig("dt and step duration must be positive".into()));
        }
        if self.fall_radius <= 0.0 {
            return Err(SimError::BadConfig("fall radius must be positive".into()));
        }
        Ok(())
    }
}

/// One completed step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: u32,
    /// Episode time at the start of the step, s.
    pub t: f64,
    pub cmd: CommandVelocity,
    /// Vertical slope used by the step dynamics, m/s.
    pub k: f64,
    /// Planned landing relative to the (old) support, map axes, m.
    pub u_t: Vector2<f64>,
    pub b: Vector2<f64>,
    pub h_z: f64,
    pub cost: CostBreakdown,
    /// Realized touchdown in the map frame.
    pub touchdown: Vector3<f64>,
    /// DCM at touchdown, relative to the new support, m.
    pub xi: Vector2<f64>,
}

impl StepTrace {
    pub const CSV_HEADER: &'static str = "step,t,cmd_vx,cmd_vy,k,uTx,uTy,bx,by,hz,\
        cost_total,cost_target,cost_offset,cost_steep,td_x,td_y,td_z,xi_x,xi_y";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.step,
            self.t,
            self.cmd.vx,
            self.cmd.vy,
            self.k,
            self.u_t.x,
            self.u_t.y,
            self.b.x,
            self.b.y,
            self.h_z,
            self.cost.total,
            self.cost.target,
            self.cost.offset,
            self.cost.steepness,
            self.touchdown.x,
            self.touchdown.y,
            self.touchdown.z,
            self.xi.x,
            self.xi.y,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeOutcome {
    Success,
    Fall(FallCause),
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub outcome: EpisodeOutcome,
    /// Mean |forward velocity - commanded vx| over non-transient steps, m/s.
    pub velocity_mae: f64,
    /// Mean distance between planned landings and the nominal target, m.
    pub mean_foothold_deviation: f64,
    /// Net planar displacement of the support, m.
    pub distance_traveled: f64,
    pub steps: u32,
}

/// Initial walker: support snapped to a cell center, pendulum at the nominal
/// gait state for the first command (from rest, xi = b_nom of the previous leg).
pub fn init_walker(
    cfg: &EpisodeConfig,
    map: &ElevationMap,
) -> Result<WalkerState, SimError> {
    let start = cfg.start.unwrap_or_else(|| {
        map.cell_center((map.width_cells - 1) / 2, (map.length_cells - 1) / 2)
    });
    let (ix, iy) = map
        .cell_at(start)
        .ok_or_else(|| SimError::BadConfig(format!("start {start:?} outside map")))?;
    let snapped = map.cell_center(ix, iy);
    let z = map.height(ix, iy);

    let params = VhipParams::new(cfg.g, cfg.z0, 0.0, cfg.step_duration());
    let cmd = cfg.command_at(0.0);
    let prev = cfg.gait.flipped();
    let (l_prev, w_prev) = nominal_step(&cmd, &prev, &params);
    let b_prev = nominal_offset(l_prev, w_prev, &prev, &params)
        .map_err(|e| SimError::BadConfig(e.to_string()))?;
    omega(&params, 0.0).map_err(|e| SimError::BadConfig(e.to_string()))?;
    let xi0 = Rotation2::new(cfg.heading) * b_prev;

    Ok(WalkerState {
        support: Vector3::new(snapped.x, snapped.y, z),
        leg_index: cfg.gait.leg_index,
        dcm: DcmState {
            xi: xi0,
            com_pos: xi0,
            com_vel: Vector2::zeros(),
            t: 0.0,
        },
        world_yaw: cfg.heading,
        step_count: 0,
        elapsed: 0.0,
        k_prev: 0.0,
    })
}

/// Plan and execute one step. Returns the new state and the step record, or
/// the fall that ended the episode.
pub fn step_once(
    state: &WalkerState,
    cfg: &EpisodeConfig,
    map: &ElevationMap,
    steepness: &SteepnessMap,
    rng: &mut ChaCha8Rng,
) -> Result<(WalkerState, StepTrace), Fall> {
    let step = state.step_count;
    let t_step = cfg.step_duration();
    let cmd = cfg.command_at(state.elapsed);
    let gait = GaitConfig {
        leg_index: state.leg_index,
        ..cfg.gait
    };
    let fall = |cause: FallCause, t: f64| Fall { cause, step, t };

    // plan at step start, propagating with the previous step's realized slope
    let prior = VhipParams::new(cfg.g, cfg.z0, state.k_prev, t_step);
    let req0 = PlanRequest {
        xi: state.dcm.xi,
        t: 0.0,
        params: prior,
        gait,
        cmd,
        support: state.support.xy(),
        yaw: state.world_yaw,
        map,
        steepness,
        weights: cfg.weights,
        half_extent: cfg.half_extent,
    };
    let mut plan = plan_foothold(&req0).map_err(|_| fall(FallCause::NoPlan, 0.0))?;

    // the CoM ramps toward the landing height chosen at the start of the step
    let k = (plan.h_z - state.support.z) / t_step;
    let params = VhipParams::new(cfg.g, cfg.z0, k, t_step);

    let n = (t_step / cfg.dt).ceil().max(1.0) as u32;
    let h = t_step / n as f64;
    let mut dcm = DcmState {
        t: 0.0,
        ..state.dcm
    };
    for i in 0..n {
        dcm = vhip_integrate(&dcm, &params, h).map_err(|_| fall(FallCause::DcmDiverged, dcm.t))?;
        if dcm.xi.norm() > cfg.fall_radius {
            return Err(fall(FallCause::DcmDiverged, dcm.t));
        }
        let replan = cfg.replan_interval > 0
            && (i + 1) % cfg.replan_interval == 0
            && i + 1 < n;
        if replan {
            let req = PlanRequest {
                xi: dcm.xi,
                t: dcm.t,
                params,
                ..req0
            };
            // keep the previous plan when the window clips away mid-step
            if let Ok(p) = plan_foothold(&req) {
                plan = p;
            }
        }
    }

    // touchdown exactly at the planned cell, with optional Gaussian scatter
    let mut td_xy = plan.world_u_t;
    let mut h_td = plan.h_z;
    if cfg.touchdown_noise > 0.0 {
        let normal = |rng: &mut ChaCha8Rng| -> f64 {
            // Box-Muller
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            (-2.0 * u1.ln()).sqrt() * u2.cos()
        };
        td_xy.x += cfg.touchdown_noise * normal(rng);
        td_xy.y += cfg.touchdown_noise * normal(rng);
        h_td = map
            .height_at(td_xy)
            .map_err(|_| fall(FallCause::OffMap, t_step))?;
    }
    if map.cell_at(td_xy).is_none() {
        return Err(fall(FallCause::OffMap, t_step));
    }

    let u_act = td_xy - state.support.xy();
    let xi_new = dcm.xi - u_act;
    let new_state = WalkerState {
        support: Vector3::new(td_xy.x, td_xy.y, h_td),
        leg_index: state.leg_index ^ 1,
        dcm: DcmState {
            xi: xi_new,
            com_pos: dcm.com_pos - u_act,
            com_vel: dcm.com_vel,
            t: 0.0,
        },
        world_yaw: state.world_yaw + cmd.wyaw * t_step,
        step_count: step + 1,
        elapsed: state.elapsed + t_step,
        k_prev: (h_td - state.support.z) / t_step,
    };
    let trace = StepTrace {
        step,
        t: state.elapsed,
        cmd,
        k,
        u_t: plan.u_t,
        b: plan.b,
        h_z: plan.h_z,
        cost: plan.cost,
        touchdown: new_state.support,
        xi: xi_new,
    };
    Ok((new_state, trace))
}

/// Run one episode on an already-built terrain.
pub fn run_episode_on(
    cfg: &EpisodeConfig,
    map: &ElevationMap,
    steepness: &SteepnessMap,
) -> Result<(EpisodeMetrics, Vec<StepTrace>), SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = init_walker(cfg, map)?;
    let start_xy = state.support.xy();
    let heading = Rotation2::new(-cfg.heading);
    let t_step = cfg.step_duration();

    let mut traces = Vec::new();
    let mut outcome = EpisodeOutcome::Timeout;
    let mut abs_err_sum = 0.0;
    let mut counted = 0u32;
    let mut dev_sum = 0.0;
    let mut seg_prev = usize::MAX;
    let mut seg_steps = 0u32;

    for _ in 0..cfg.max_steps {
        let seg = cfg.segment_index(state.elapsed);
        if seg != seg_prev {
            seg_prev = seg;
            seg_steps = 0;
        }
        let yaw_at_start = state.world_yaw;
        let prev_com = state.support.xy() + state.dcm.com_pos;
        let cmd = cfg.command_at(state.elapsed);
        match step_once(&state, cfg, map, steepness, &mut rng) {
            Ok((next, trace)) => {
                // CoM displacement; the support relocations quantize too harshly
                let delta = (next.support.xy() + next.dcm.com_pos) - prev_com;
                let v_cf = Rotation2::new(-yaw_at_start) * (delta / t_step);
                if seg_steps >= cfg.transient_steps {
                    abs_err_sum += (v_cf.x - cmd.vx).abs();
                    counted += 1;
                }
                seg_steps += 1;
                let nominal = {
                    let gait = GaitConfig {
                        leg_index: state.leg_index,
                        ..cfg.gait
                    };
                    let params = VhipParams::new(cfg.g, cfg.z0, state.k_prev, t_step);
                    let (l, w) = nominal_step(&cmd, &gait, &params);
                    Rotation2::new(yaw_at_start) * Vector2::new(l, w)
                };
                dev_sum += (trace.u_t - nominal).norm();
                traces.push(trace);
                state = next;
                if let Some(goal) = cfg.goal_distance {
                    let forward = (heading * (state.support.xy() - start_xy)).x;
                    if forward >= goal {
                        outcome = EpisodeOutcome::Success;
                        break;
                    }
                }
            }
            Err(fall) => {
                outcome = EpisodeOutcome::Fall(fall.cause);
                break;
            }
        }
    }

    let steps = traces.len() as u32;
    let metrics = EpisodeMetrics {
        outcome,
        velocity_mae: if counted > 0 {
            abs_err_sum / counted as f64
        } else {
            0.0
        },
        mean_foothold_deviation: if steps > 0 { dev_sum / steps as f64 } else { 0.0 },
        distance_traveled: (state.support.xy() - start_xy).norm(),
        steps,
    };
    Ok((metrics, traces))
}

/// Build the terrain from the config and run one episode.
pub fn run_episode(cfg: &EpisodeConfig) -> Result<(EpisodeMetrics, Vec<StepTrace>), SimError> {
    let map = build_terrain(&cfg.terrain)?;
    let steepness = compute_steepness(&map, &cfg.foot)?;
    run_episode_on(cfg, &map, &steepness)
}

pub fn build_terrain(source: &TerrainSource) -> Result<ElevationMap, SimError> {
    Ok(match source {
        TerrainSource::Spec(spec) => generate_terrain(spec)?,
        TerrainSource::Path(path) => ElevationMap::load(path)?,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Template episode; schedule, start and heading are filled per walker.
    pub episode: EpisodeConfig,
    pub n_walkers: u32,
    pub speeds: Vec<f64>,
    /// Start distance from the map center, sampled uniformly, m.
    pub start_radius: (f64, f64),
    /// Lateral scatter perpendicular to the walk axis, m.
    pub perp_jitter: f64,
    /// Heading scatter around the walk axis, rad.
    pub heading_jitter: f64,
    pub master_seed: u64,
}

impl EnsembleConfig {
    /// Walkers spread around the staircase center on the four axis rays,
    /// heading outward; success is forward progress past the goal line.
    pub fn stairs_protocol(step_height: f64) -> Self {
        let terrain = TerrainSpec {
            kind: crate::terrain::TerrainKind::PyramidStairs,
            width_cells: 321,
            length_cells: 321,
            step_height,
            tread_depth: 0.20,
            ..TerrainSpec::default()
        };
        Self {
            episode: EpisodeConfig {
                terrain: TerrainSource::Spec(terrain),
                goal_distance: Some(2.0),
                fall_radius: 0.75,
                max_steps: 70,
                ..EpisodeConfig::default()
            },
            n_walkers: 500,
            speeds: vec![0.5, 1.0, 1.5, 2.0],
            start_radius: (0.5, 0.9),
            perp_jitter: 0.15,
            heading_jitter: 0.12,
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaeQuantiles {
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuccessReport {
    pub speeds: Vec<f64>,
    pub success_ratio: Vec<f64>,
    pub mae_quantiles: MaeQuantiles,
    pub n_walkers: u32,
    pub seeds_digest: String,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Run independent randomized episodes for every speed and aggregate.
/// Episodes run in parallel; the aggregation is order-insensitive, so the
/// report is identical for any worker count.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<SuccessReport, SimError> {
    let map = build_terrain(&cfg.episode.terrain)?;
    let steepness = compute_steepness(&map, &cfg.episode.foot)?;
    let center = map.cell_center((map.width_cells - 1) / 2, (map.length_cells - 1) / 2);

    let jobs: Vec<(usize, u32, u64)> = cfg
        .speeds
        .iter()
        .enumerate()
        .flat_map(|(si, _)| {
            (0..cfg.n_walkers).map(move |e| {
                let seed =
                    splitmix64(cfg.master_seed ^ ((si as u64) << 32).wrapping_add(e as u64 + 1));
                (si, e, seed)
            })
        })
        .collect();

    let results: Vec<(usize, EpisodeMetrics)> = jobs
        .par_iter()
        .map(|&(si, _, seed)| {
            let speed = cfg.speeds[si];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let axis = rng.gen_range(0..4u32) as f64 * std::f64::consts::FRAC_PI_2;
            let heading = axis + rng.gen_range(-cfg.heading_jitter..=cfg.heading_jitter);
            let r = rng.gen_range(cfg.start_radius.0..=cfg.start_radius.1);
            let perp = rng.gen_range(-cfg.perp_jitter..=cfg.perp_jitter);
            let dir = Vector2::new(axis.cos(), axis.sin());
            let side = Vector2::new(-axis.sin(), axis.cos());
            let start = center + dir * r + side * perp;
            let episode = EpisodeConfig {
                schedule: vec![(0.0, CommandVelocity::forward(speed))],
                start: Some(start),
                heading,
                seed,
                ..cfg.episode.clone()
            };
            let metrics = run_episode_on(&episode, &map, &steepness)
                .map(|(m, _)| m)
                .unwrap_or(EpisodeMetrics {
                    outcome: EpisodeOutcome::Fall(FallCause::OffMap),
                    velocity_mae: 0.0,
                    mean_foothold_deviation: 0.0,
                    distance_traveled: 0.0,
                    steps: 0,
                });
            (si, metrics)
        })
        .collect();

    let mut success = vec![0u32; cfg.speeds.len()];
    let mut maes: Vec<f64> = Vec::new();
    for (si, m) in &results {
        if m.outcome == EpisodeOutcome::Success {
            success[*si] += 1;
        }
        if m.steps > 0 {
            maes.push(m.velocity_mae);
        }
    }
    maes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |q: f64| -> f64 {
        if maes.is_empty() {
            return 0.0;
        }
        let rank = ((q * maes.len() as f64).ceil() as usize).clamp(1, maes.len());
        maes[rank - 1]
    };

    let mut seed_bytes = Vec::with_capacity(jobs.len() * 8);
    for (_, _, seed) in &jobs {
        seed_bytes.extend_from_slice(&seed.to_le_bytes());
    }

    Ok(SuccessReport {
        speeds: cfg.speeds.clone(),
        success_ratio: success
            .iter()
            .map(|&s| s as f64 / cfg.n_walkers as f64)
            .collect(),
        mae_quantiles: MaeQuantiles {
            p25: quantile(0.25),
            p50: quantile(0.50),
            p75: quantile(0.75),
        },
        n_walkers: cfg.n_walkers,
        seeds_digest: format!("{:016x}", fnv1a(&seed_bytes)),
    })
}

/// Render traces as the trace CSV (header plus one row per step).
pub fn traces_to_csv(traces: &[StepTrace]) -> String {
    let mut s = String::from(StepTrace::CSV_HEADER);
    s.push('\n');
    for t in traces {
        s.push_str(&t.csv_row());
        s.push('\n');
    }
    s
}
