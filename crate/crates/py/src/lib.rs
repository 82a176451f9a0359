//! Python bindings: elevation maps, steepness scoring, foothold planning and
//! the stepping simulator, exposed as the `stepkit` extension module.

use nalgebra::{Vector2, Vector3};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use stepkit_core::dcm::{CommandVelocity, GaitConfig, VhipParams};
use stepkit_core::planner::{self, PlanRequest, PlannerWeights};
use stepkit_core::sim::{self, EpisodeConfig, EpisodeOutcome, TerrainSource};
use stepkit_core::swing;
use stepkit_core::terrain::{self, FootprintKernel, TerrainKind, TerrainSpec};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_kind(kind: &str) -> PyResult<TerrainKind> {
    match kind {
        "flat" => Ok(TerrainKind::Flat),
        "pyramid" | "pyramid_stairs" => Ok(TerrainKind::PyramidStairs),
        "rough" => Ok(TerrainKind::Rough),
        other => Err(PyValueError::new_err(format!("unknown terrain kind '{other}'"))),
    }
}

/// Regular grid of terrain heights.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct ElevationMap {
    inner: terrain::ElevationMap,
}

#[pymethods]
impl ElevationMap {
    /// Generate a synthetic map: kind is "flat", "pyramid" or "rough".
    #[staticmethod]
    #[pyo3(signature = (kind, width_cells=36, length_cells=24, resolution=0.05,
                        step_height=0.25, tread_depth=0.30, num_steps=1000,
                        amplitude=0.04, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn generate(
        kind: &str,
        width_cells: usize,
        length_cells: usize,
        resolution: f64,
        step_height: f64,
        tread_depth: f64,
        num_steps: usize,
        amplitude: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let spec = TerrainSpec {
            kind: parse_kind(kind)?,
            width_cells,
            length_cells,
            resolution,
            origin: None,
            step_height,
            tread_depth,
            num_steps,
            roughness_amplitude: amplitude,
            seed,
        };
        Ok(Self {
            inner: terrain::generate_terrain(&spec).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: terrain::ElevationMap::load(std::path::Path::new(path)).map_err(value_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner
            .save(std::path::Path::new(path))
            .map_err(value_err)
    }

    #[getter]
    fn width_cells(&self) -> usize {
        self.inner.width_cells
    }

    #[getter]
    fn length_cells(&self) -> usize {
        self.inner.length_cells
    }

    #[getter]
    fn resolution(&self) -> f64 {
        self.inner.resolution
    }

    #[getter]
    fn origin(&self) -> (f64, f64) {
        (self.inner.origin.x, self.inner.origin.y)
    }

    fn height_at(&self, x: f64, y: f64) -> PyResult<f64> {
        self.inner.height_at(Vector2::new(x, y)).map_err(value_err)
    }

    fn heights(&self) -> Vec<f64> {
        self.inner.heights.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "ElevationMap({}x{} cells, {} m)",
            self.inner.width_cells, self.inner.length_cells, self.inner.resolution
        )
    }
}

/// Aggregated gradient-magnitude scores for foothold suitability.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct SteepnessMap {
    inner: terrain::SteepnessMap,
}

#[pymethods]
impl SteepnessMap {
    #[getter]
    fn width_cells(&self) -> usize {
        self.inner.width_cells
    }

    #[getter]
    fn length_cells(&self) -> usize {
        self.inner.length_cells
    }

    fn score(&self, col: usize, row: usize) -> f64 {
        self.inner.score(col, row)
    }

    fn scores(&self) -> Vec<f64> {
        self.inner.scores.clone()
    }
}

/// Sobel gradient plus footprint aggregation over a map.
#[pyfunction]
#[pyo3(signature = (map, foot_length=0.15, foot_width=0.10))]
fn compute_steepness(map: &ElevationMap, foot_length: f64, foot_width: f64) -> PyResult<SteepnessMap> {
    let kernel = FootprintKernel::new(foot_length, foot_width);
    Ok(SteepnessMap {
        inner: terrain::compute_steepness(&map.inner, &kernel).map_err(value_err)?,
    })
}

/// Chosen foothold with cost breakdown.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct FootholdPlan {
    inner: planner::FootholdPlan,
}

#[pymethods]
impl FootholdPlan {
    /// Landing point relative to the support foot, m.
    #[getter]
    fn u_t(&self) -> (f64, f64) {
        (self.inner.u_t.x, self.inner.u_t.y)
    }

    /// Landing point in the map frame (exact cell center), m.
    #[getter]
    fn world_u_t(&self) -> (f64, f64) {
        (self.inner.world_u_t.x, self.inner.world_u_t.y)
    }

    /// DCM offset from the equality constraint, m.
    #[getter]
    fn b(&self) -> (f64, f64) {
        (self.inner.b.x, self.inner.b.y)
    }

    #[getter]
    fn h_z(&self) -> f64 {
        self.inner.h_z
    }

    /// (col, row) of the chosen cell.
    #[getter]
    fn cell(&self) -> (usize, usize) {
        self.inner.cell
    }

    #[getter]
    fn cost(&self) -> std::collections::HashMap<&'static str, f64> {
        let c = self.inner.cost;
        [
            ("target", c.target),
            ("offset", c.offset),
            ("steepness", c.steepness),
            ("total", c.total),
        ]
        .into_iter()
        .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "FootholdPlan(u_t=({:.3}, {:.3}), h_z={:.3}, cost={:.4})",
            self.inner.u_t.x, self.inner.u_t.y, self.inner.h_z, self.inner.cost.total
        )
    }
}

#[allow(clippy::too_many_arguments)]
fn build_request<'a>(
    map: &'a ElevationMap,
    steepness: &'a SteepnessMap,
    xi: (f64, f64),
    t: f64,
    support: (f64, f64),
    yaw: f64,
    vx: f64,
    vy: f64,
    wyaw: f64,
    leg_index: u8,
    k: f64,
    g: f64,
    z0: f64,
    freq: f64,
    alpha1: f64,
    alpha2: f64,
    alpha3: f64,
    half_extent: f64,
) -> PlanRequest<'a> {
    let gait = GaitConfig {
        f: freq,
        leg_index,
        ..GaitConfig::default()
    };
    PlanRequest {
        xi: Vector2::new(xi.0, xi.1),
        t,
        params: VhipParams::new(g, z0, k, gait.step_duration()),
        gait,
        cmd: CommandVelocity::new(vx, vy, wyaw),
        support: Vector2::new(support.0, support.1),
        yaw,
        map: &map.inner,
        steepness: &steepness.inner,
        weights: PlannerWeights::new(alpha1, alpha2, alpha3),
        half_extent,
    }
}

macro_rules! plan_fn {
    ($name:ident, $planner:path, $doc:literal) => {
        #[doc = $doc]
        #[pyfunction]
        #[pyo3(signature = (map, steepness, xi=(0.0, 0.0), t=0.0, support=(0.0, 0.0), yaw=0.0,
                            vx=0.0, vy=0.0, wyaw=0.0, leg_index=0, k=0.0, g=9.81, z0=1.0,
                            freq=1.25, alpha1=1.0, alpha2=10.0, alpha3=0.5, half_extent=0.3))]
        #[allow(clippy::too_many_arguments)]
        fn $name(
            map: &ElevationMap,
            steepness: &SteepnessMap,
            xi: (f64, f64),
            t: f64,
            support: (f64, f64),
            yaw: f64,
            vx: f64,
            vy: f64,
            wyaw: f64,
            leg_index: u8,
            k: f64,
            g: f64,
            z0: f64,
            freq: f64,
            alpha1: f64,
            alpha2: f64,
            alpha3: f64,
            half_extent: f64,
        ) -> PyResult<FootholdPlan> {
            let req = build_request(
                map, steepness, xi, t, support, yaw, vx, vy, wyaw, leg_index, k, g, z0, freq,
                alpha1, alpha2, alpha3, half_extent,
            );
            Ok(FootholdPlan {
                inner: $planner(&req).map_err(value_err)?,
            })
        }
    };
}

plan_fn!(
    plan_foothold,
    planner::plan_foothold,
    "Windowed argmin over candidate cells around the nominal step target."
);
plan_fn!(
    brute_force_plan,
    planner::brute_force_plan,
    "Exhaustive argmin over every map cell (the windowed search's oracle)."
);

/// Plan a batch of requests in parallel. Each request is a dict that may
/// override xi, support, yaw, vx, vy, leg_index and k; remaining parameters
/// are shared. Failed slots come back as None.
#[pyfunction]
#[pyo3(signature = (map, steepness, requests, g=9.81, z0=1.0, freq=1.25,
                    alpha1=1.0, alpha2=10.0, alpha3=0.5, half_extent=0.3))]
#[allow(clippy::too_many_arguments)]
fn plan_foothold_batch(
    py: Python<'_>,
    map: &ElevationMap,
    steepness: &SteepnessMap,
    requests: Vec<std::collections::HashMap<String, f64>>,
    g: f64,
    z0: f64,
    freq: f64,
    alpha1: f64,
    alpha2: f64,
    alpha3: f64,
    half_extent: f64,
) -> PyResult<Vec<Option<FootholdPlan>>> {
    let reqs: Vec<PlanRequest> = requests
        .iter()
        .map(|r| {
            let get = |key: &str, default: f64| r.get(key).copied().unwrap_or(default);
            build_request(
                map,
                steepness,
                (get("xi_x", 0.0), get("xi_y", 0.0)),
                get("t", 0.0),
                (get("support_x", 0.0), get("support_y", 0.0)),
                get("yaw", 0.0),
                get("vx", 0.0),
                get("vy", 0.0),
                get("wyaw", 0.0),
                get("leg_index", 0.0) as u8,
                get("k", 0.0),
                g,
                z0,
                freq,
                alpha1,
                alpha2,
                alpha3,
                half_extent,
            )
        })
        .collect();
    let results = py.detach(|| planner::plan_foothold_batch(&reqs));
    Ok(results
        .into_iter()
        .map(|r| r.ok().map(|inner| FootholdPlan { inner }))
        .collect())
}

/// Integrated natural frequency of the variable-height pendulum.
#[pyfunction]
#[pyo3(signature = (t, k=0.0, g=9.81, z0=1.0))]
fn sigma(t: f64, k: f64, g: f64, z0: f64) -> PyResult<f64> {
    stepkit_core::dcm::sigma(&VhipParams::new(g, z0, k, t.max(1.0)), t).map_err(value_err)
}

/// Foothold-tracking reward exp(-10 ||p - p_desired||).
#[pyfunction]
fn foothold_reward(p: (f64, f64, f64), p_desired: (f64, f64, f64)) -> f64 {
    swing::foothold_reward(
        Vector3::new(p.0, p.1, p.2),
        Vector3::new(p_desired.0, p_desired.1, p_desired.2),
    )
}

/// Quadratic Bezier swing trajectory through lift-off, apex and landing.
#[pyclass(skip_from_py_object)]
struct SwingTrajectory {
    inner: swing::SwingTrajectory,
}

#[pymethods]
impl SwingTrajectory {
    #[new]
    #[pyo3(signature = (lift, land, duration=0.4, clearance=0.05))]
    fn new(
        lift: (f64, f64, f64),
        land: (f64, f64, f64),
        duration: f64,
        clearance: f64,
    ) -> PyResult<Self> {
        Ok(Self {
            inner: swing::make_swing_points(
                Vector3::new(lift.0, lift.1, lift.2),
                Vector3::new(land.0, land.1, land.2),
                duration,
                clearance,
            )
            .map_err(value_err)?,
        })
    }

    fn sample(&self, t: f64) -> PyResult<(f64, f64, f64)> {
        let p = self.inner.sample(t).map_err(value_err)?;
        Ok((p.x, p.y, p.z))
    }

    #[getter]
    fn apex(&self) -> (f64, f64, f64) {
        let a = self.inner.p_apex;
        (a.x, a.y, a.z)
    }
}

/// Run one stepping episode on a generated or loaded terrain and return a
/// metrics dict plus per-step trace dicts.
#[pyfunction]
#[pyo3(signature = (terrain="flat", vx=0.5, vy=0.0, wyaw=0.0, width_cells=161, length_cells=161,
                    resolution=0.05, step_height=0.15, tread_depth=0.20, max_steps=40,
                    goal=None, start=None, heading=0.0, seed=0, fall_radius=1.0,
                    alpha1=1.0, alpha2=10.0, alpha3=0.5, noise=0.0))]
#[allow(clippy::too_many_arguments)]
fn run_episode(
    py: Python<'_>,
    terrain: &str,
    vx: f64,
    vy: f64,
    wyaw: f64,
    width_cells: usize,
    length_cells: usize,
    resolution: f64,
    step_height: f64,
    tread_depth: f64,
    max_steps: u32,
    goal: Option<f64>,
    start: Option<(f64, f64)>,
    heading: f64,
    seed: u64,
    fall_radius: f64,
    alpha1: f64,
    alpha2: f64,
    alpha3: f64,
    noise: f64,
) -> PyResult<(Py<PyAny>, Vec<Py<PyAny>>)> {
    let source = if std::path::Path::new(terrain).exists() {
        TerrainSource::Path(terrain.into())
    } else {
        TerrainSource::Spec(TerrainSpec {
            kind: parse_kind(terrain)?,
            width_cells,
            length_cells,
            resolution,
            step_height,
            tread_depth,
            seed,
            ..TerrainSpec::default()
        })
    };
    let cfg = EpisodeConfig {
        terrain: source,
        schedule: vec![(0.0, CommandVelocity::new(vx, vy, wyaw))],
        max_steps,
        goal_distance: goal,
        fall_radius,
        weights: PlannerWeights::new(alpha1, alpha2, alpha3),
        touchdown_noise: noise,
        start: start.map(|(x, y)| Vector2::new(x, y)),
        heading,
        seed,
        ..EpisodeConfig::default()
    };
    let (metrics, traces) = py
        .detach(|| sim::run_episode(&cfg))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;

    let outcome = match metrics.outcome {
        EpisodeOutcome::Success => "success".to_string(),
        EpisodeOutcome::Timeout => "timeout".to_string(),
        EpisodeOutcome::Fall(cause) => format!("fall:{cause:?}"),
    };
    let m = pyo3::types::PyDict::new(py);
    m.set_item("outcome", outcome)?;
    m.set_item("velocity_mae", metrics.velocity_mae)?;
    m.set_item("mean_foothold_deviation", metrics.mean_foothold_deviation)?;
    m.set_item("distance_traveled", metrics.distance_traveled)?;
    m.set_item("steps", metrics.steps)?;

    let rows: Vec<Py<PyAny>> = traces
        .iter()
        .map(|tr| -> PyResult<Py<PyAny>> {
            let d = pyo3::types::PyDict::new(py);
            d.set_item("step", tr.step)?;
            d.set_item("t", tr.t)?;
            d.set_item("k", tr.k)?;
            d.set_item("u_t", (tr.u_t.x, tr.u_t.y))?;
            d.set_item("b", (tr.b.x, tr.b.y))?;
            d.set_item("h_z", tr.h_z)?;
            d.set_item("cost_total", tr.cost.total)?;
            d.set_item("touchdown", (tr.touchdown.x, tr.touchdown.y, tr.touchdown.z))?;
            d.set_item("xi", (tr.xi.x, tr.xi.y))?;
            Ok(d.into_any().unbind())
        })
        .collect::<PyResult<_>>()?;
    Ok((m.into_any().unbind(), rows))
}

#[pymodule]
fn stepkit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ElevationMap>()?;
    m.add_class::<SteepnessMap>()?;
    m.add_class::<FootholdPlan>()?;
    m.add_class::<SwingTrajectory>()?;
    m.add_function(wrap_pyfunction!(compute_steepness, m)?)?;
    m.add_function(wrap_pyfunction!(plan_foothold, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_plan, m)?)?;
    m.add_function(wrap_pyfunction!(plan_foothold_batch, m)?)?;
    m.add_function(wrap_pyfunction!(sigma, m)?)?;
    m.add_function(wrap_pyfunction!(foothold_reward, m)?)?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    Ok(())
}
