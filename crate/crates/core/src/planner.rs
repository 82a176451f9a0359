//! Foothold selection as a discrete search over elevation-map cells.
//!
//! Every cell center c inside the search window is a candidate landing point.
//! The equality constraint u_T + b = xi_t * exp(sigma(T) - sigma(t)) maps each
//! candidate to its DCM offset b, so the objective
//!
//!   alpha1 ||u_T - (L_nom, W_nom)||^2 + alpha2 ||b - b_nom||^2 + alpha3 S(u_T)
//!
//! is a pure per-cell expression and the optimum is a single argmin reduction.
//! The scalar, batched and brute-force paths share the same per-cell kernel,
//! so their results are bit-identical wherever their candidate sets agree.

use std::time::Instant;

use nalgebra::{Rotation2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dcm::{
    dcm_propagate, nominal_offset, nominal_step, CommandVelocity, DcmError, GaitConfig, VhipParams,
};
use crate::terrain::{
    compute_steepness, generate_terrain, ElevationMap, FootprintKernel, SteepnessMap, TerrainSpec,
};

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("search window does not intersect the map")]
    EmptyWindow,
    #[error("steepness map dimensions do not match the elevation map")]
    GridMismatch,
    #[error("invalid planner weights: {0}")]
    BadWeights(String),
    #[error(transparent)]
    Dcm(#[from] DcmError),
}

/// Objective weights: step-target deviation, DCM-offset deviation, steepness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerWeights {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl PlannerWeights {
    pub fn new(alpha1: f64, alpha2: f64, alpha3: f64) -> Self {
        Self {
            alpha1,
            alpha2,
            alpha3,
        }
    }

    fn validate(&self) -> Result<(), PlanError> {
        let ws = [self.alpha1, self.alpha2, self.alpha3];
        if ws.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(PlanError::BadWeights(
                "weights must be non-negative and finite".into(),
            ));
        }
        if ws.iter().all(|w| *w == 0.0) {
            return Err(PlanError::BadWeights("weights must not all be zero".into()));
        }
        Ok(())
    }
}

impl Default for PlannerWeights {
    /// alpha2 dominates alpha1 so the step-to-step DCM recursion contracts
    /// (stability needs alpha1/(alpha1+alpha2) < exp(-sigma(T))); alpha3 is
    /// large enough to pull footholds off stair edges yet small enough that
    /// balance feedback can override it near the window boundary.
    fn default() -> Self {
        Self::new(1.0, 10.0, 0.5)
    }
}

/// Square search region, in the same planar frame as the candidate cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchWindow {
    /// Window center relative to the support foot, m (the nominal target).
    pub center: Vector2<f64>,
    /// Half edge length per axis, m.
    pub half_extent: f64,
}

impl SearchWindow {
    pub const DEFAULT_HALF_EXTENT: f64 = 0.3;

    pub fn new(center: Vector2<f64>, half_extent: f64) -> Self {
        Self {
            center,
            half_extent,
        }
    }

    /// Inclusive map cell index ranges (ix0, ix1, iy0, iy1) covered by this
    /// window around the given support; None if the intersection is empty.
    pub fn cell_ranges(
        &self,
        map: &ElevationMap,
        support: Vector2<f64>,
    ) -> Option<(usize, usize, usize, usize)> {
        window_cells(map, support, self)
    }
}

/// One planning query: pendulum state plus terrain and objective context.
#[derive(Debug, Clone, Copy)]
pub struct PlanRequest<'a> {
    /// DCM relative to the support foot at time `t`, map axes, m.
    pub xi: Vector2<f64>,
    /// Elapsed time in the current step, s.
    pub t: f64,
    pub params: VhipParams,
    pub gait: GaitConfig,
    pub cmd: CommandVelocity,
    /// Support foot position in the map frame, m.
    pub support: Vector2<f64>,
    /// Heading of the command frame in the map frame, rad.
    pub yaw: f64,
    pub map: &'a ElevationMap,
    pub steepness: &'a SteepnessMap,
    pub weights: PlannerWeights,
    /// Search window half extent, m.
    pub half_extent: f64,
}

impl<'a> PlanRequest<'a> {
    pub fn new(map: &'a ElevationMap, steepness: &'a SteepnessMap) -> Self {
        Self {
            xi: Vector2::zeros(),
            t: 0.0,
            params: VhipParams::default(),
            gait: GaitConfig::default(),
            cmd: CommandVelocity::new(0.0, 0.0, 0.0),
            support: Vector2::zeros(),
            yaw: 0.0,
            map,
            steepness,
            weights: PlannerWeights::default(),
            half_extent: SearchWindow::DEFAULT_HALF_EXTENT,
        }
    }

    /// Default window: centered on the nominal target, rotated into map axes.
    pub fn default_window(&self) -> Result<SearchWindow, PlanError> {
        let ctx = PlanContext::prepare(self)?;
        Ok(SearchWindow::new(ctx.nominal, self.half_extent))
    }
}

/// Chosen foothold with its DCM offset and cost breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootholdPlan {
    /// Landing point relative to the support foot, map axes, m.
    pub u_t: Vector2<f64>,
    /// Landing point in the map frame (the exact cell center), m.
    pub world_u_t: Vector2<f64>,
    /// DCM offset from the equality constraint, b = xi_hat - u_t, m.
    pub b: Vector2<f64>,
    /// Terrain height at the landing cell, m.
    pub h_z: f64,
    /// Chosen cell (column along x, row along y).
    pub cell: (usize, usize),
    pub cost: CostBreakdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub target: f64,
    pub offset: f64,
    pub steepness: f64,
    pub total: f64,
}

/// Per-cell costs over the window intersected with the map. Cells outside the
/// map are absent, not padded.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGrid {
    /// Map cell indices of the grid's (0, 0) entry.
    pub ix0: usize,
    pub iy0: usize,
    pub width: usize,
    pub length: usize,
    /// Row-major total costs.
    pub costs: Vec<f64>,
}

impl CostGrid {
    /// Argmin entry as map cell indices, ties broken by lowest row then column.
    pub fn argmin(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, c) in self.costs.iter().enumerate() {
            if *c < self.costs[best] {
                best = i;
            }
        }
        (self.ix0 + best % self.width, self.iy0 + best / self.width)
    }
}

/// Precomputed per-request quantities shared by every candidate cell.
struct PlanContext {
    /// Propagated end-of-step DCM, support-relative map axes.
    xi_hat: Vector2<f64>,
    /// Nominal target rotated into map axes.
    nominal: Vector2<f64>,
    /// Nominal DCM offset rotated into map axes.
    b_nom: Vector2<f64>,
}

impl PlanContext {
    fn prepare(req: &PlanRequest) -> Result<Self, PlanError> {
        req.weights.validate()?;
        if req.map.width_cells != req.steepness.width_cells
            || req.map.length_cells != req.steepness.length_cells
        {
            return Err(PlanError::GridMismatch);
        }
        let xi_hat = dcm_propagate(req.xi, &req.params, req.t)?;
        let (l_nom, w_nom) = nominal_step(&req.cmd, &req.gait, &req.params);
        let b_nom_cf = nominal_offset(l_nom, w_nom, &req.gait, &req.params)?;
        let rot = Rotation2::new(req.yaw);
        Ok(Self {
            xi_hat,
            nominal: rot * Vector2::new(l_nom, w_nom),
            b_nom: rot * b_nom_cf,
        })
    }
}

/// Shared per-cell objective; identical arithmetic on every search path.
#[inline]
fn cell_cost(
    ctx: &PlanContext,
    weights: &PlannerWeights,
    rel: Vector2<f64>,
    steepness: f64,
) -> CostBreakdown {
    let dt = rel - ctx.nominal;
    let target = weights.alpha1 * (dt.x * dt.x + dt.y * dt.y);
    let b = ctx.xi_hat - rel;
    let db = b - ctx.b_nom;
    let offset = weights.alpha2 * (db.x * db.x + db.y * db.y);
    let steep = weights.alpha3 * steepness;
    CostBreakdown {
        target,
        offset,
        steepness: steep,
        total: (target + offset) + steep,
    }
}

/// Map cell index ranges covered by the window; None if the intersection is empty.
fn window_cells(
    map: &ElevationMap,
    support: Vector2<f64>,
    window: &SearchWindow,
) -> Option<(usize, usize, usize, usize)> {
    let c = support + window.center;
    let he = window.half_extent;
    let res = map.resolution;
    // tolerance keeps cells whose centers sit exactly on the window boundary
    let lo = |v: f64, origin: f64| ((v - he - origin) / res - 1e-9).ceil().max(0.0) as usize;
    let hi = |v: f64, origin: f64, n: usize| {
        let i = ((v + he - origin) / res + 1e-9).floor();
        if i < 0.0 {
            None
        } else {
            Some((i as usize).min(n - 1))
        }
    };
    let ix0 = lo(c.x, map.origin.x);
    let iy0 = lo(c.y, map.origin.y);
    let ix1 = hi(c.x, map.origin.x, map.width_cells)?;
    let iy1 = hi(c.y, map.origin.y, map.length_cells)?;
    (ix0 <= ix1 && iy0 <= iy1 && ix0 < map.width_cells && iy0 < map.length_cells)
        .then_some((ix0, ix1, iy0, iy1))
}

/// Evaluate the objective for every window cell; for inspection and rendering.
pub fn candidate_costs(req: &PlanRequest, window: &SearchWindow) -> Result<CostGrid, PlanError> {
    let ctx = PlanContext::prepare(req)?;
    let (ix0, ix1, iy0, iy1) =
        window_cells(req.map, req.support, window).ok_or(PlanError::EmptyWindow)?;
    let (w, l) = (ix1 - ix0 + 1, iy1 - iy0 + 1);
    let mut costs = Vec::with_capacity(w * l);
    for iy in iy0..=iy1 {
        for ix in ix0..=ix1 {
            let rel = req.map.cell_center(ix, iy) - req.support;
            let s = req.steepness.score(ix, iy);
            costs.push(cell_cost(&ctx, &req.weights, rel, s).total);
        }
    }
    Ok(CostGrid {
        ix0,
        iy0,
        width: w,
        length: l,
        costs,
    })
}

fn argmin_over(
    req: &PlanRequest,
    ctx: &PlanContext,
    ranges: (usize, usize, usize, usize),
) -> FootholdPlan {
    let (ix0, ix1, iy0, iy1) = ranges;
    let mut best_cost = f64::INFINITY;
    let mut best = (ix0, iy0);
    // row-major scan with strict improvement keeps the lowest (row, col) on ties
    for iy in iy0..=iy1 {
        for ix in ix0..=ix1 {
            let rel = req.map.cell_center(ix, iy) - req.support;
            let s = req.steepness.score(ix, iy);
            let c = cell_cost(ctx, &req.weights, rel, s).total;
            if c < best_cost {
                best_cost = c;
                best = (ix, iy);
            }
        }
    }
    let (ix, iy) = best;
    let world = req.map.cell_center(ix, iy);
    let rel = world - req.support;
    let cost = cell_cost(ctx, &req.weights, rel, req.steepness.score(ix, iy));
    FootholdPlan {
        u_t: rel,
        world_u_t: world,
        b: ctx.xi_hat - rel,
        h_z: req.map.height(ix, iy),
        cell: (ix, iy),
        cost,
    }
}

/// Windowed argmin over the cells around the nominal target.
pub fn plan_foothold(req: &PlanRequest) -> Result<FootholdPlan, PlanError> {
    let ctx = PlanContext::prepare(req)?;
    let window = SearchWindow::new(ctx.nominal, req.half_extent);
    let ranges = window_cells(req.map, req.support, &window).ok_or(PlanError::EmptyWindow)?;
    Ok(argmin_over(req, &ctx, ranges))
}

/// Exhaustive argmin over every map cell; the verification oracle for the
/// windowed search. Same objective, same tie-breaking, no window.
pub fn brute_force_plan(req: &PlanRequest) -> Result<FootholdPlan, PlanError> {
    let ctx = PlanContext::prepare(req)?;
    let ranges = (0, req.map.width_cells - 1, 0, req.map.length_cells - 1);
    Ok(argmin_over(req, &ctx, ranges))
}

/// Plan a batch of requests in parallel. Results are per-slot and elementwise
/// identical to the scalar path; a failing request does not abort its batch.
pub fn plan_foothold_batch(reqs: &[PlanRequest]) -> Vec<Result<FootholdPlan, PlanError>> {
    reqs.par_iter().map(plan_foothold).collect()
}

/// Batched-vs-scalar planner benchmark report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub batch_size: usize,
    pub map_cells: usize,
    pub window_cells: usize,
    pub reps: usize,
    pub workers: usize,
    /// Median wall-clock per full batch for the parallel path, ms.
    pub ms_batched_median: f64,
    /// Median wall-clock per full batch for the one-at-a-time loop, ms.
    pub ms_scalar_median: f64,
    pub speedup: f64,
    /// Batched and scalar outputs compared bit-exactly before timing.
    pub correctness_checked: bool,
    /// Reported figures for a GPU tensor implementation of the same search at
    /// batch 4096; recorded for context, not measured or asserted here.
    pub reference_gpu_ms_per_step: f64,
    pub reference_gpu_speedup_vs_parallel_mpc: f64,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("batched and scalar outputs differ at slot {slot}")]
    Mismatch { slot: usize },
    #[error("bench needs at least {min} repetitions, got {got}")]
    TooFewReps { min: usize, got: usize },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Terrain(#[from] crate::terrain::TerrainError),
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

/// Build a deterministic batch of randomized plan requests on a shared map,
/// verify the batched path reproduces the scalar loop bit-exactly, then time
/// both and report medians. Timings are only reported when the equality holds.
pub fn bench_planner(
    batch_size: usize,
    map_spec: &TerrainSpec,
    repetitions: usize,
    workers: usize,
    seed: u64,
) -> Result<BenchReport, BenchError> {
    use rand::{Rng, SeedableRng};
    if repetitions < 3 {
        return Err(BenchError::TooFewReps {
            min: 3,
            got: repetitions,
        });
    }
    let map = generate_terrain(map_spec)?;
    let steepness = compute_steepness(&map, &FootprintKernel::default())?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let base = PlanRequest::new(&map, &steepness);
    let reqs: Vec<PlanRequest> = (0..batch_size)
        .map(|_| {
            let cx = map.origin.x + (map.width_cells - 1) as f64 * map.resolution / 2.0;
            let cy = map.origin.y + (map.length_cells - 1) as f64 * map.resolution / 2.0;
            PlanRequest {
                xi: Vector2::new(rng.gen_range(-0.05..0.25), rng.gen_range(-0.1..0.1)),
                support: Vector2::new(
                    cx + rng.gen_range(-0.3..0.3),
                    cy + rng.gen_range(-0.2..0.2),
                ),
                cmd: CommandVelocity::new(rng.gen_range(0.0..1.5), rng.gen_range(-0.3..0.3), 0.0),
                gait: GaitConfig {
                    leg_index: rng.gen_range(0..2u8),
                    ..base.gait
                },
                ..base
            }
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;

    let scalar: Vec<Result<FootholdPlan, PlanError>> = reqs.iter().map(plan_foothold).collect();
    let batched = pool.install(|| plan_foothold_batch(&reqs));
    for (slot, (a, b)) in scalar.iter().zip(batched.iter()).enumerate() {
        let same = match (a, b) {
            (Ok(x), Ok(y)) => x == y,
            (Err(x), Err(y)) => x == y,
            _ => false,
        };
        if !same {
            return Err(BenchError::Mismatch { slot });
        }
    }

    let time_median = |f: &mut dyn FnMut()| -> f64 {
        let mut samples: Vec<f64> = (0..repetitions)
            .map(|_| {
                let start = Instant::now();
                f();
                start.elapsed().as_secs_f64() * 1e3
            })
            .collect();
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        samples[samples.len() / 2]
    };

    let ms_scalar_median = time_median(&mut || {
        let out: Vec<_> = reqs.iter().map(plan_foothold).collect();
        std::hint::black_box(&out);
    });
    let ms_batched_median = time_median(&mut || {
        let out = pool.install(|| plan_foothold_batch(&reqs));
        std::hint::black_box(&out);
    });

    let window_cells = {
        let win = reqs[0].default_window()?;
        window_cells(&map, reqs[0].support, &win)
            .map(|(x0, x1, y0, y1)| (x1 - x0 + 1) * (y1 - y0 + 1))
            .unwrap_or(0)
    };

    Ok(BenchReport {
        batch_size,
        map_cells: map.width_cells * map.length_cells,
        window_cells,
        reps: repetitions,
        workers,
        ms_batched_median,
        ms_scalar_median,
        speedup: ms_scalar_median / ms_batched_median,
        correctness_checked: true,
        reference_gpu_ms_per_step: 4.0,
        reference_gpu_speedup_vs_parallel_mpc: 25.0,
    })
}
