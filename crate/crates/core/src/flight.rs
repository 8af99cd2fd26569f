//! 3D flight search above the terrain.
//!
//! Two modes: a direct mode that flies straight to a near goal, and a
//! trap-escape mode for far goals whose staged heuristic first cancels the
//! altitude attraction (takeoff), then searches forward over the blocking
//! terrain (escape), and finally pulls the search back to the surface
//! (landing). A battery judgment rule overrides the stage toward landing
//! when the flight has spent more SOC than the configured safety limit.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{BatteryState, EnergyParams, Mode, Segment};
use crate::geom::Vec3;
use crate::ground::{feasible_node, manhattan_m, MobilityLimits};
use crate::terrain::{GridIndex, TerrainGrid};

#[derive(Debug, Error)]
pub enum FlightError {
    #[error("takeoff cell ({}, {}) is invalid: {reason}", .cell.col, .cell.row)]
    BadStart { cell: GridIndex, reason: String },
    #[error("flight ceiling {ceiling} m is not above the terrain maximum {terrain_max} m")]
    CeilingBelowTerrain { ceiling: f64, terrain_max: f64 },
    #[error("battery exhausted during flight search (all frontier nodes unaffordable)")]
    BatteryExhausted,
    #[error(transparent)]
    Terrain(#[from] crate::terrain::TerrainError),
}

/// Geometry and thresholds of the flight search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightParams {
    /// Horizontal progress below which the search stays in the takeoff
    /// stage, m.
    pub c_escape: f64,
    /// Horizontal progress beyond which the search enters the landing
    /// stage, m.
    pub c_landing: f64,
    /// Small climb bias applied during the takeoff stage, m.
    pub epsilon: f64,
    /// Maximum flight altitude, m.
    pub z_ceiling: f64,
    /// Goals within this horizontal Manhattan distance are flown to
    /// directly, m.
    pub near_goal_radius: f64,
    /// Vertical voxel resolution, m.
    pub voxel_size: f64,
}

impl FlightParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.c_escape > 0.0 && self.c_escape < self.c_landing) {
            return Err(format!(
                "need 0 < c_escape < c_landing, got {} and {}",
                self.c_escape, self.c_landing
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.voxel_size > 0.0) {
            return Err(format!("voxel_size must be positive, got {}", self.voxel_size));
        }
        if !(self.near_goal_radius >= 0.0) {
            return Err(format!(
                "near_goal_radius must be >= 0, got {}",
                self.near_goal_radius
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlightStage {
    Takeoff,
    Escape,
    Landing,
}

impl std::fmt::Display for FlightStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FlightStage::Takeoff => write!(f, "takeoff"),
            FlightStage::Escape => write!(f, "escape"),
            FlightStage::Landing => write!(f, "landing"),
        }
    }
}

/// Bookkeeping for the staged heuristic: `h2d0` is the running maximum of
/// every observed horizontal distance, and the stage is a function of the
/// progress `h2d0 - h2d` plus the SOC override.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapEscapeState {
    pub h2d0: f64,
    pub h2d: f64,
    pub stage: FlightStage,
    pub z_dummy: f64,
}

impl TrapEscapeState {
    pub fn new(h2d0_seed: f64) -> Self {
        TrapEscapeState {
            h2d0: h2d0_seed,
            h2d: h2d0_seed,
            stage: FlightStage::Takeoff,
            z_dummy: 0.0,
        }
    }

    /// Stage for a given progress; progress exactly at `c_landing` counts
    /// as landing. The SOC override wins over everything.
    pub fn stage_for(delta_h2d: f64, params: &FlightParams, soc_exceeded: bool) -> FlightStage {
        if soc_exceeded {
            return FlightStage::Landing;
        }
        if delta_h2d < params.c_escape {
            FlightStage::Takeoff
        } else if delta_h2d < params.c_landing {
            FlightStage::Escape
        } else {
            FlightStage::Landing
        }
    }

    /// One heuristic evaluation: observe `h2d` (raising `h2d0` if needed),
    /// pick the stage's dummy altitude, and return
    /// `h2d + |z_dummy - z_curr|` in meters.
    pub fn evaluate(
        &mut self,
        h2d: f64,
        z_curr: f64,
        z_ground: f64,
        params: &FlightParams,
        soc_exceeded: bool,
    ) -> f64 {
        if self.h2d0 < h2d {
            self.h2d0 = h2d;
        }
        self.h2d = h2d;
        let delta = self.h2d0 - h2d;
        self.stage = Self::stage_for(delta, params, soc_exceeded);
        self.z_dummy = match self.stage {
            FlightStage::Takeoff => z_curr + params.epsilon,
            FlightStage::Escape => z_curr,
            FlightStage::Landing => z_ground,
        };
        h2d + (self.z_dummy - z_curr).abs()
    }
}

/// Spec-shaped wrapper over [`TrapEscapeState::evaluate`] that derives the
/// SOC condition from a battery mid-flight.
pub fn trap_escape_heuristic(
    state: &mut TrapEscapeState,
    h2d: f64,
    z_curr: f64,
    z_ground: f64,
    params: &FlightParams,
    battery: &BatteryState,
) -> f64 {
    let soc_exceeded = battery
        .flight_soc_delta()
        .map(|d| d > battery.soc_ref)
        .unwrap_or(false);
    state.evaluate(h2d, z_curr, z_ground, params, soc_exceeded)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlightOutcome {
    Landed,
    ReachedGoal,
    NoPath,
    BatteryLimitLanding,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightNode {
    pub cell: GridIndex,
    pub level: u32,
    pub position: Vec3,
    /// Stage the node was expanded in; `None` for direct-mode flights.
    pub stage: Option<FlightStage>,
}

#[derive(Debug, Clone)]
pub struct FlightSearchResult {
    pub outcome: FlightOutcome,
    pub path: Vec<FlightNode>,
    pub landing_point: Option<GridIndex>,
    /// Fly energy along `path` (no transform charge).
    pub path_energy: f64,
    pub expanded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlightMode {
    Direct,
    Escape,
}

/// Near goals are flown to directly (boundary inclusive); far goals go
/// through the trap-escape search.
pub fn select_flight_mode(h2d_to_goal: f64, params: &FlightParams) -> FlightMode {
    if h2d_to_goal <= params.near_goal_radius {
        FlightMode::Direct
    } else {
        FlightMode::Escape
    }
}

/// Voxel lattice above the terrain. Level `k` sits at `k * voxel_size`,
/// except that each column's lowest admissible level is pinned to the exact
/// terrain surface so takeoffs and landings carry no rounding step.
struct VoxelSpace<'a> {
    grid: &'a TerrainGrid,
    voxel: f64,
    k_max: u32,
}

impl<'a> VoxelSpace<'a> {
    fn new(grid: &'a TerrainGrid, params: &FlightParams) -> Result<Self, FlightError> {
        let terrain_max = grid.max_elevation();
        if params.z_ceiling <= terrain_max {
            return Err(FlightError::CeilingBelowTerrain {
                ceiling: params.z_ceiling,
                terrain_max,
            });
        }
        Ok(VoxelSpace {
            grid,
            voxel: params.voxel_size,
            k_max: (params.z_ceiling / params.voxel_size).floor() as u32,
        })
    }

    /// Lowest admissible level over a cell (the surface level).
    fn surface_level(&self, cell: GridIndex) -> Result<u32, FlightError> {
        let elev = self.grid.elevation_at(cell)?;
        Ok((elev / self.voxel).ceil().max(0.0) as u32)
    }

    fn altitude(&self, cell: GridIndex, level: u32, surface: u32) -> Result<f64, FlightError> {
        if level == surface {
            Ok(self.grid.elevation_at(cell)?)
        } else {
            Ok(level as f64 * self.voxel)
        }
    }

    fn levels(&self) -> usize {
        self.k_max as usize + 1
    }

    fn linear(&self, cell: GridIndex, level: u32) -> usize {
        (level as usize * self.grid.nrows() + cell.row) * self.grid.ncols() + cell.col
    }
}

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    h: f64,
    id: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenEntry {}
impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.id.cmp(&self.id))
    }
}
impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct SearchArrays {
    g: Vec<f64>,
    parent: Vec<Option<usize>>,
    closed: Vec<bool>,
}

impl SearchArrays {
    fn new(n: usize) -> Self {
        SearchArrays {
            g: vec![f64::INFINITY; n],
            parent: vec![None; n],
            closed: vec![false; n],
        }
    }
}

fn decode(space: &VoxelSpace, id: usize) -> (GridIndex, u32) {
    let ncols = space.grid.ncols();
    let nrows = space.grid.nrows();
    let per_level = ncols * nrows;
    let level = (id / per_level) as u32;
    let rem = id % per_level;
    (GridIndex::new(rem % ncols, rem / ncols), level)
}

/// Fly-mode cost of one voxel move; `delta_d` is the full 3D length.
fn fly_move_energy(params: &EnergyParams, from: Vec3, to: Vec3) -> f64 {
    let dh = to.z - from.z;
    let seg = Segment::new(from.distance(to), dh, Mode::Fly);
    params.segment_energy(&seg, false)
}

/// Trap-escape 3D A*. Starts on the terrain surface at `start`, searches
/// the voxel space with the staged heuristic, and terminates when a
/// drivable surface voxel is expanded during the landing stage.
#[allow(clippy::too_many_arguments)]
pub fn search_flight_escape(
    grid: &TerrainGrid,
    start: GridIndex,
    goal: GridIndex,
    h2d0_seed: f64,
    params: &FlightParams,
    limits: &MobilityLimits,
    energy: &EnergyParams,
    battery: &BatteryState,
) -> Result<FlightSearchResult, FlightError> {
    let space = VoxelSpace::new(grid, params)?;
    let start_level = space.surface_level(start)?;
    if start_level > space.k_max {
        return Err(FlightError::BadStart {
            cell: start,
            reason: "terrain surface above the flight ceiling".into(),
        });
    }

    // The seed carries the ground phase's closest approach. When the
    // optimized takeoff point sits closer to the goal than that, clamp so
    // the flight still opens in the takeoff stage.
    let start_h2d = manhattan_m(grid, start, goal);
    let mut state = TrapEscapeState::new(h2d0_seed.min(start_h2d));

    let n = grid.ncols() * grid.nrows() * space.levels();
    let mut arrays = SearchArrays::new(n);
    let mut stage_at_pop: Vec<Option<FlightStage>> = vec![None; n];
    let mut open = BinaryHeap::new();
    let fly_rate = energy.fly_rate_per_m();

    let soc_exceeded = |g_cost: f64| -> bool {
        g_cost / battery.q_capacity > battery.soc_ref
    };
    // Hard emergency-land threshold: absolute SOC at half the safety limit.
    let emergency_soc = battery.soc_ref / 2.0;

    let start_id = space.linear(start, start_level);
    let start_pos = grid.surface_point(start)?;
    arrays.g[start_id] = 0.0;
    {
        let h_m = state.evaluate(start_h2d, start_pos.z, start_pos.z, params, false);
        open.push(OpenEntry {
            f: h_m * fly_rate,
            h: h_m * fly_rate,
            id: start_id,
        });
    }

    let mut expanded = 0usize;
    let mut battery_pruned = false;

    while let Some(entry) = open.pop() {
        let id = entry.id;
        if arrays.closed[id] {
            continue;
        }
        arrays.closed[id] = true;
        expanded += 1;

        let (cell, level) = decode(&space, id);
        let surface = space.surface_level(cell)?;
        let z = space.altitude(cell, level, surface)?;
        let h2d = manhattan_m(grid, cell, goal);
        let g_here = arrays.g[id];

        let soc_now = soc_exceeded(g_here);
        let delta = state.h2d0 - h2d;
        let stage = TrapEscapeState::stage_for(delta, params, soc_now);
        stage_at_pop[id] = Some(stage);

        let on_surface = level == surface;
        let probe_soc = (battery.remaining() - g_here) / battery.q_capacity;
        let emergency = on_surface && probe_soc <= emergency_soc;

        if on_surface && feasible_node(grid, cell, limits) {
            // The landing is "natural" when the progress threshold alone
            // got us here; anything forced by the battery is reported as a
            // battery-limit landing.
            let natural = delta >= params.c_landing;
            if stage == FlightStage::Landing || emergency {
                let path = reconstruct_flight(&space, &arrays, &stage_at_pop, id)?;
                let outcome = if natural {
                    FlightOutcome::Landed
                } else {
                    FlightOutcome::BatteryLimitLanding
                };
                return Ok(FlightSearchResult {
                    outcome,
                    landing_point: Some(cell),
                    path_energy: g_here,
                    path,
                    expanded,
                });
            }
        }

        expand_neighbors(
            &space,
            &mut arrays,
            &mut open,
            cell,
            level,
            z,
            energy,
            battery,
            &mut battery_pruned,
            |child_cell, child_z, child_g| {
                let child_h2d = manhattan_m(grid, child_cell, goal);
                let ground = grid.elevation_at(child_cell).unwrap_or(child_z);
                let h_m = state.evaluate(
                    child_h2d,
                    child_z,
                    ground,
                    params,
                    soc_exceeded(child_g),
                );
                h_m * fly_rate
            },
        )?;
    }

    if battery_pruned {
        return Err(FlightError::BatteryExhausted);
    }
    Ok(FlightSearchResult {
        outcome: FlightOutcome::NoPath,
        path: Vec::new(),
        landing_point: None,
        path_energy: 0.0,
        expanded,
    })
}

/// Plain 3D A* straight to the goal's surface voxel, used when the goal is
/// within the near-goal radius.
pub fn search_flight_direct(
    grid: &TerrainGrid,
    start: GridIndex,
    goal: GridIndex,
    params: &FlightParams,
    energy: &EnergyParams,
    battery: &BatteryState,
) -> Result<FlightSearchResult, FlightError> {
    let start_level = VoxelSpace::new(grid, params)?.surface_level(start)?;
    search_flight_direct_from(grid, start, start_level, goal, params, energy, battery)
}

/// Direct search variant that may start mid-air; used to re-route a flight
/// tail to a relocated landing cell.
pub fn search_flight_direct_from(
    grid: &TerrainGrid,
    start: GridIndex,
    start_level: u32,
    goal: GridIndex,
    params: &FlightParams,
    energy: &EnergyParams,
    battery: &BatteryState,
) -> Result<FlightSearchResult, FlightError> {
    let space = VoxelSpace::new(grid, params)?;
    let goal_level = space.surface_level(goal)?;
    if start_level > space.k_max || goal_level > space.k_max {
        return Err(FlightError::BadStart {
            cell: start,
            reason: "terrain surface above the flight ceiling".into(),
        });
    }
    let goal_pos = grid.surface_point(goal)?;
    let fly_rate = energy.fly_rate_per_m();
    let heuristic = |cell: GridIndex, z: f64| -> f64 {
        (manhattan_m(grid, cell, goal) + (z - goal_pos.z).abs()) * fly_rate
    };

    let n = grid.ncols() * grid.nrows() * space.levels();
    let mut arrays = SearchArrays::new(n);
    let stage_none: Vec<Option<FlightStage>> = vec![None; n];
    let mut open = BinaryHeap::new();

    let start_id = space.linear(start, start_level);
    let start_surface = space.surface_level(start)?;
    if start_level < start_surface || start_level > space.k_max {
        return Err(FlightError::BadStart {
            cell: start,
            reason: format!("level {start_level} not inside the voxel space"),
        });
    }
    let start_z = space.altitude(start, start_level, start_surface)?;
    arrays.g[start_id] = 0.0;
    let h0 = heuristic(start, start_z);
    open.push(OpenEntry {
        f: h0,
        h: h0,
        id: start_id,
    });

    let goal_id = space.linear(goal, goal_level);
    let mut expanded = 0usize;
    let mut battery_pruned = false;

    while let Some(entry) = open.pop() {
        let id = entry.id;
        if arrays.closed[id] {
            continue;
        }
        arrays.closed[id] = true;
        expanded += 1;

        let (cell, level) = decode(&space, id);
        let surface = space.surface_level(cell)?;
        let z = space.altitude(cell, level, surface)?;

        if id == goal_id {
            let path = reconstruct_flight(&space, &arrays, &stage_none, id)?;
            return Ok(FlightSearchResult {
                outcome: FlightOutcome::ReachedGoal,
                landing_point: Some(cell),
                path_energy: arrays.g[id],
                path,
                expanded,
            });
        }

        expand_neighbors(
            &space,
            &mut arrays,
            &mut open,
            cell,
            level,
            z,
            energy,
            battery,
            &mut battery_pruned,
            |child_cell, child_z, _| heuristic(child_cell, child_z),
        )?;
    }

    if battery_pruned {
        return Err(FlightError::BatteryExhausted);
    }
    Ok(FlightSearchResult {
        outcome: FlightOutcome::NoPath,
        path: Vec::new(),
        landing_point: None,
        path_energy: 0.0,
        expanded,
    })
}

#[allow(clippy::too_many_arguments)]
fn expand_neighbors(
    space: &VoxelSpace,
    arrays: &mut SearchArrays,
    open: &mut BinaryHeap<OpenEntry>,
    cell: GridIndex,
    level: u32,
    z: f64,
    energy: &EnergyParams,
    battery: &BatteryState,
    battery_pruned: &mut bool,
    mut heuristic: impl FnMut(GridIndex, f64, f64) -> f64,
) -> Result<(), FlightError> {
    let grid = space.grid;
    let (x, y) = grid.cell_center(cell);
    let here = Vec3::new(x, y, z);
    let g_here = arrays.g[space.linear(cell, level)];

    for dk in -1i64..=1 {
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dk == 0 && dr == 0 && dc == 0 {
                    continue;
                }
                let vc = cell.col as i64 + dc;
                let vr = cell.row as i64 + dr;
                let vk = level as i64 + dk;
                if vc < 0
                    || vr < 0
                    || vk < 0
                    || vc >= grid.ncols() as i64
                    || vr >= grid.nrows() as i64
                    || vk > space.k_max as i64
                {
                    continue;
                }
                let vcell = GridIndex::new(vc as usize, vr as usize);
                if grid.is_nodata(vcell) {
                    continue;
                }
                let vsurface = space.surface_level(vcell)?;
                let vk = vk as u32;
                if vk < vsurface {
                    continue;
                }
                let vid = space.linear(vcell, vk);
                if arrays.closed[vid] {
                    continue;
                }
                let vz = space.altitude(vcell, vk, vsurface)?;
                let (vx, vy) = grid.cell_center(vcell);
                let there = Vec3::new(vx, vy, vz);
                let cand = g_here + fly_move_energy(energy, here, there);
                if cand > battery.remaining() {
                    *battery_pruned = true;
                    continue;
                }
                if cand < arrays.g[vid] {
                    arrays.g[vid] = cand;
                    arrays.parent[vid] = Some(space.linear(cell, level));
                    let h = heuristic(vcell, vz, cand);
                    open.push(OpenEntry {
                        f: cand + h,
                        h,
                        id: vid,
                    });
                }
            }
        }
    }
    Ok(())
}

fn reconstruct_flight(
    space: &VoxelSpace,
    arrays: &SearchArrays,
    stage_at_pop: &[Option<FlightStage>],
    end: usize,
) -> Result<Vec<FlightNode>, FlightError> {
    let mut ids = vec![end];
    let mut cur = end;
    while let Some(p) = arrays.parent[cur] {
        ids.push(p);
        cur = p;
    }
    ids.reverse();
    let grid = space.grid;
    let mut nodes = Vec::with_capacity(ids.len());
    for id in ids {
        let (cell, level) = decode(space, id);
        let surface = space.surface_level(cell)?;
        let z = space.altitude(cell, level, surface)?;
        let (x, y) = grid.cell_center(cell);
        nodes.push(FlightNode {
            cell,
            level,
            position: Vec3::new(x, y, z),
            stage: stage_at_pop[id],
        });
    }
    Ok(nodes)
}
