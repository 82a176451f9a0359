//! Foothold planning and stepping simulation for bipedal gaits on elevation maps.
//!
//! The planner scores every candidate foothold cell inside a search window with
//! a quadratic step-target/DCM-offset objective plus a terrain steepness cost,
//! and picks the argmin. The simulator closes the loop: plan, integrate the
//! variable-height inverted pendulum, switch support at touchdown, repeat.

pub mod dcm;
pub mod planner;
pub mod sim;
pub mod swing;
pub mod terrain;

pub use dcm::{CommandVelocity, DcmError, DcmState, GaitConfig, VhipParams};
pub use planner::{
    bench_planner, brute_force_plan, candidate_costs, plan_foothold, plan_foothold_batch,
    BenchError, BenchReport, CostBreakdown, CostGrid, FootholdPlan, PlanError, PlanRequest,
    PlannerWeights, SearchWindow,
};
pub use sim::{
    build_terrain, init_walker, run_ensemble, run_episode, run_episode_on, step_once,
    traces_to_csv, EnsembleConfig, EpisodeConfig, EpisodeMetrics, EpisodeOutcome, Fall, FallCause,
    MaeQuantiles, SimError, StepTrace, SuccessReport, TerrainSource, WalkerState,
};
pub use swing::{foothold_reward, make_swing, make_swing_points, SwingError, SwingTrajectory};
pub use terrain::{
    aggregate_steepness, compute_steepness, generate_terrain, sobel_gradient, ElevationMap,
    FootprintKernel, SteepnessMap, TerrainError, TerrainKind, TerrainSpec,
};
