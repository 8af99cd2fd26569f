//! 2D ground search: energy-cost A* over the drivable surface, with the
//! per-node mobility feasibility test and the takeoff decision counter that
//! flags when the terrain keeps exceeding the platform's maneuverability.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{BatteryState, EnergyParams, Mode, Segment};
use crate::terrain::{GridIndex, TerrainGrid};

#[derive(Debug, Error)]
pub enum GroundError {
    #[error("start cell ({}, {}) is out of bounds or not drivable", .0.col, .0.row)]
    InfeasibleStart(GridIndex),
    #[error("goal cell ({}, {}) is out of bounds or not drivable", .0.col, .0.row)]
    InfeasibleGoal(GridIndex),
    #[error("cells ({}, {}) and ({}, {}) are not 8-adjacent", .0.col, .0.row, .1.col, .1.row)]
    NotAdjacent(GridIndex, GridIndex),
    #[error(transparent)]
    Terrain(#[from] crate::terrain::TerrainError),
}

/// Slope and maneuverability bounds for driving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityLimits {
    pub gx_min: f64,
    pub gx_max: f64,
    pub gy_min: f64,
    pub gy_max: f64,
    pub gz_min: f64,
    pub gz_max: f64,
    /// Maneuverability threshold; steps with DOF above it count toward the
    /// takeoff decision.
    pub m_index: f64,
    /// Consecutive violations needed before the takeoff flag fires
    /// (flag when count > threshold).
    pub count_threshold: u32,
    /// Weight of the heading-change term inside the DOF difficulty measure.
    pub turn_weight: f64,
}

impl Default for MobilityLimits {
    fn default() -> Self {
        MobilityLimits {
            gx_min: -0.35,
            gx_max: 0.35,
            gy_min: -0.35,
            gy_max: 0.35,
            gz_min: 0.0,
            gz_max: 0.35,
            m_index: 0.35,
            count_threshold: 7,
            turn_weight: 1.0,
        }
    }
}

impl MobilityLimits {
    pub fn validate(&self) -> Result<(), String> {
        for (name, lo, hi) in [
            ("gx", self.gx_min, self.gx_max),
            ("gy", self.gy_min, self.gy_max),
            ("gz", self.gz_min, self.gz_max),
        ] {
            if !(lo < hi) {
                return Err(format!("{name} bounds must satisfy min < max ({lo} >= {hi})"));
            }
        }
        if !(self.m_index > 0.0) {
            return Err(format!("m_index must be positive, got {}", self.m_index));
        }
        if self.count_threshold < 1 {
            return Err("count_threshold must be >= 1".into());
        }
        if !(self.turn_weight >= 0.0) {
            return Err(format!("turn_weight must be >= 0, got {}", self.turn_weight));
        }
        Ok(())
    }

    /// Copy with the takeoff counter neutralized; used for local path
    /// repairs that must not re-trigger a switch.
    pub fn without_takeoff(&self) -> MobilityLimits {
        MobilityLimits {
            count_threshold: u32::MAX,
            ..*self
        }
    }
}

/// Running state of the takeoff decision function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TakeoffDecision {
    pub count: u32,
    pub flag: bool,
    pub trigger: Option<GridIndex>,
}

/// One step of the takeoff decision: a violating step increments the
/// counter, a compliant one resets it; the flag fires when the counter
/// exceeds the threshold.
pub fn takeoff_decision_step(
    state: TakeoffDecision,
    dof: f64,
    limits: &MobilityLimits,
) -> TakeoffDecision {
    let count = if dof > limits.m_index { state.count + 1 } else { 0 };
    TakeoffDecision {
        count,
        flag: count > limits.count_threshold,
        trigger: state.trigger,
    }
}

const NEIGHBORS_8: [(i32, i32); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Scalar driving difficulty of one 8-connected step: the worst of the
/// segment slope, the cross-slope at the destination, and a heading-change
/// penalty `(1 - cos theta)/2` scaled by `turn_weight`.
pub fn dof_between(
    grid: &TerrainGrid,
    from: GridIndex,
    to: GridIndex,
    heading_prev: Option<(i32, i32)>,
    limits: &MobilityLimits,
) -> Result<f64, GroundError> {
    let dc = to.col as i64 - from.col as i64;
    let dr = to.row as i64 - from.row as i64;
    if dc == 0 && dr == 0 || dc.abs() > 1 || dr.abs() > 1 {
        return Err(GroundError::NotAdjacent(from, to));
    }
    let run = grid.cell_size() * ((dc * dc + dr * dr) as f64).sqrt();
    let slope = (grid.elevation_at(to)? - grid.elevation_at(from)?).abs() / run;

    // Cross slope: the component of the destination's gradient perpendicular
    // to the travel direction (world coordinates; +row is -y).
    let g = grid.gradient_at(to)?;
    let len = ((dc * dc + dr * dr) as f64).sqrt();
    let ux = dc as f64 / len;
    let uy = -(dr as f64) / len;
    let cross = (-g.gx * uy + g.gy * ux).abs();

    let turn = match heading_prev {
        Some((pc, pr)) if (pc, pr) != (0, 0) => {
            let plen = ((pc * pc + pr * pr) as f64).sqrt();
            let cos = (pc as f64 * dc as f64 + pr as f64 * dr as f64) / (plen * len);
            limits.turn_weight * (1.0 - cos) / 2.0
        }
        _ => 0.0,
    };

    Ok(slope.max(cross).max(turn))
}

/// Eq.-style slope-box feasibility of a single cell. Nodata and failed
/// gradient stencils are not drivable.
pub fn feasible_node(grid: &TerrainGrid, idx: GridIndex, limits: &MobilityLimits) -> bool {
    if !grid.in_bounds(idx) {
        return false;
    }
    match grid.gradient_at(idx) {
        Ok(g) => {
            g.gx >= limits.gx_min
                && g.gx <= limits.gx_max
                && g.gy >= limits.gy_min
                && g.gy <= limits.gy_max
                && g.gz >= limits.gz_min
                && g.gz <= limits.gz_max
        }
        Err(_) => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundOutcome {
    ReachedGoal,
    TakeoffRequired,
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct GroundSearchResult {
    pub outcome: GroundOutcome,
    /// Start-to-end cell chain; for `TakeoffRequired` it ends at the
    /// switching point, for `Exhausted` at the closest expanded cell.
    pub path: Vec<GridIndex>,
    pub switching_point: Option<GridIndex>,
    /// Minimum horizontal Manhattan distance to the goal over all expanded
    /// nodes, in meters; seeds the flight search's progress reference.
    pub h2d_min: f64,
    /// Drive energy along `path` (no transform charges).
    pub path_energy: f64,
    pub expanded: usize,
}

/// Horizontal Manhattan distance between cell centers, meters.
pub fn manhattan_m(grid: &TerrainGrid, a: GridIndex, b: GridIndex) -> f64 {
    let dc = (a.col as f64 - b.col as f64).abs();
    let dr = (a.row as f64 - b.row as f64).abs();
    grid.cell_size() * (dc + dr)
}

/// Length of the shortest 8-connected move sequence between cells, meters.
fn octile_m(grid: &TerrainGrid, a: GridIndex, b: GridIndex) -> f64 {
    let dc = (a.col as f64 - b.col as f64).abs();
    let dr = (a.row as f64 - b.row as f64).abs();
    let (hi, lo) = if dc >= dr { (dc, dr) } else { (dr, dc) };
    grid.cell_size() * (hi + (std::f64::consts::SQRT_2 - 1.0) * lo)
}

fn chebyshev_steps(a: GridIndex, b: GridIndex) -> f64 {
    let dc = (a.col as f64 - b.col as f64).abs();
    let dr = (a.row as f64 - b.row as f64).abs();
    dc.max(dr)
}

/// Drive cost of one 8-connected step, including the elevation-stretched
/// path length.
pub fn drive_step_energy(
    grid: &TerrainGrid,
    params: &EnergyParams,
    from: GridIndex,
    to: GridIndex,
) -> Result<f64, GroundError> {
    let seg = drive_segment(grid, from, to)?;
    Ok(params.segment_energy(&seg, false))
}

pub fn drive_segment(
    grid: &TerrainGrid,
    from: GridIndex,
    to: GridIndex,
) -> Result<Segment, GroundError> {
    let dc = (to.col as f64 - from.col as f64).abs();
    let dr = (to.row as f64 - from.row as f64).abs();
    let run = grid.cell_size() * (dc * dc + dr * dr).sqrt();
    let dz = grid.elevation_at(to)? - grid.elevation_at(from)?;
    Ok(Segment::new((run * run + dz * dz).sqrt(), dz, Mode::Drive))
}

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    h: f64,
    idx: GridIndex,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    // Reversed so the BinaryHeap pops the smallest f; ties prefer lower h,
    // then lexicographic (col, row) for determinism.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| (other.idx.col, other.idx.row).cmp(&(self.idx.col, self.idx.row)))
    }
}
impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Energy-cost A* in drive mode. Expansion runs the takeoff decision along
/// each node's parent chain; the first expanded node whose trailing run of
/// DOF violations exceeds the threshold stops the search and becomes the
/// initial mode switching point. Cells failing the slope box never enter
/// the open list.
pub fn search_ground(
    grid: &TerrainGrid,
    start: GridIndex,
    goal: GridIndex,
    limits: &MobilityLimits,
    params: &EnergyParams,
    _battery: &BatteryState,
) -> Result<GroundSearchResult, GroundError> {
    if !feasible_node(grid, start, limits) {
        return Err(GroundError::InfeasibleStart(start));
    }
    if !feasible_node(grid, goal, limits) {
        return Err(GroundError::InfeasibleGoal(goal));
    }

    let n = grid.ncols() * grid.nrows();
    let lin = |i: GridIndex| i.row * grid.ncols() + i.col;

    let mut g = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<GridIndex>> = vec![None; n];
    let mut step_dir: Vec<(i32, i32)> = vec![(0, 0); n];
    let mut count = vec![0u32; n];
    let mut closed = vec![false; n];

    let heuristic = |idx: GridIndex| -> f64 {
        params.drive_rate_per_m() * octile_m(grid, idx, goal)
            + params.standby_energy * chebyshev_steps(idx, goal)
    };

    let mut open = BinaryHeap::new();
    g[lin(start)] = 0.0;
    open.push(OpenEntry {
        f: heuristic(start),
        h: heuristic(start),
        idx: start,
    });

    let mut h2d_min = f64::INFINITY;
    let mut closest = start;
    let mut expanded = 0usize;

    while let Some(entry) = open.pop() {
        let u = entry.idx;
        let ul = lin(u);
        if closed[ul] {
            continue;
        }
        closed[ul] = true;
        expanded += 1;

        let h2d = manhattan_m(grid, u, goal);
        if h2d < h2d_min {
            h2d_min = h2d;
            closest = u;
        }

        if u == goal {
            let path = reconstruct(&parent, grid.ncols(), u);
            let path_energy = g[ul];
            return Ok(GroundSearchResult {
                outcome: GroundOutcome::ReachedGoal,
                path,
                switching_point: None,
                h2d_min,
                path_energy,
                expanded,
            });
        }

        if count[ul] > limits.count_threshold {
            let path = reconstruct(&parent, grid.ncols(), u);
            let path_energy = g[ul];
            return Ok(GroundSearchResult {
                outcome: GroundOutcome::TakeoffRequired,
                path,
                switching_point: Some(u),
                h2d_min,
                path_energy,
                expanded,
            });
        }

        for (dc, dr) in NEIGHBORS_8 {
            let vc = u.col as i64 + dc as i64;
            let vr = u.row as i64 + dr as i64;
            if vc < 0 || vr < 0 || vc >= grid.ncols() as i64 || vr >= grid.nrows() as i64 {
                continue;
            }
            let v = GridIndex::new(vc as usize, vr as usize);
            let vl = lin(v);
            if closed[vl] || !feasible_node(grid, v, limits) {
                continue;
            }
            let edge = drive_step_energy(grid, params, u, v)?;
            let cand = g[ul] + edge;
            if cand < g[vl] {
                let heading = if parent[ul].is_some() { Some(step_dir[ul]) } else { None };
                let dof = dof_between(grid, u, v, heading, limits)?;
                let state = TakeoffDecision {
                    count: count[ul],
                    flag: false,
                    trigger: None,
                };
                count[vl] = takeoff_decision_step(state, dof, limits).count;
                g[vl] = cand;
                parent[vl] = Some(u);
                step_dir[vl] = (dc, dr);
                let h = heuristic(v);
                open.push(OpenEntry { f: cand + h, h, idx: v });
            }
        }
    }

    let path = reconstruct(&parent, grid.ncols(), closest);
    let path_energy = g[lin(closest)];
    Ok(GroundSearchResult {
        outcome: GroundOutcome::Exhausted,
        path,
        switching_point: None,
        h2d_min,
        path_energy,
        expanded,
    })
}

fn reconstruct(parent: &[Option<GridIndex>], ncols: usize, end: GridIndex) -> Vec<GridIndex> {
    let mut path = vec![end];
    let mut cur = end;
    while let Some(p) = parent[cur.row * ncols + cur.col] {
        path.push(p);
        cur = p;
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::SynthSpec;

    fn flat(n: usize) -> TerrainGrid {
        TerrainGrid::from_fn(n, n, 12.0, |_, _| 0.0).unwrap()
    }

    fn battery() -> BatteryState {
        BatteryState::new(3.6e6, 3.6e6, 0.15).unwrap()
    }

    #[test]
    fn dof_flat_straight_is_zero() {
        let g = flat(6);
        let lim = MobilityLimits::default();
        let d = dof_between(
            &g,
            GridIndex::new(2, 2),
            GridIndex::new(3, 2),
            Some((1, 0)),
            &lim,
        )
        .unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn dof_slope_dominates_on_ramp() {
        // Elevation = x gives slope 1 along the travel direction.
        let g = TerrainGrid::from_fn(6, 6, 12.0, |x, _| x).unwrap();
        let lim = MobilityLimits::default();
        let d = dof_between(
            &g,
            GridIndex::new(2, 2),
            GridIndex::new(3, 2),
            Some((1, 0)),
            &lim,
        )
        .unwrap();
        assert!((d - 1.0).abs() < 1e-12, "dof {d}");
    }

    #[test]
    fn dof_heading_reversal() {
        let g = flat(6);
        let lim = MobilityLimits {
            turn_weight: 1.0,
            ..MobilityLimits::default()
        };
        let d = dof_between(
            &g,
            GridIndex::new(3, 2),
            GridIndex::new(4, 2),
            Some((-1, 0)),
            &lim,
        )
        .unwrap();
        assert!((d - 1.0).abs() < 1e-12, "dof {d}");
    }

    #[test]
    fn dof_rejects_non_adjacent() {
        let g = flat(6);
        let lim = MobilityLimits::default();
        assert!(matches!(
            dof_between(&g, GridIndex::new(0, 0), GridIndex::new(2, 0), None, &lim),
            Err(GroundError::NotAdjacent(..))
        ));
    }

    #[test]
    fn takeoff_counter_follows_algorithm() {
        let lim = MobilityLimits::default();
        let mut state = TakeoffDecision::default();
        // Compliant step keeps everything at zero.
        state = takeoffs(&lim, state, &[0.1]);
        assert_eq!((state.count, state.flag), (0, false));
        // Seven violations: count == 7, not yet above the threshold.
        state = takeoffs(&lim, TakeoffDecision::default(), &[1.0; 7]);
        assert_eq!((state.count, state.flag), (7, false));
        // The eighth consecutive violation fires the flag.
        state = takeoff_decision_step(state, 1.0, &lim);
        assert_eq!((state.count, state.flag), (8, true));
        // Six violations then one compliant step resets.
        state = takeoffs(&lim, TakeoffDecision::default(), &[1.0; 6]);
        state = takeoff_decision_step(state, 0.2, &lim);
        assert_eq!((state.count, state.flag), (0, false));
    }

    fn takeoffs(lim: &MobilityLimits, mut s: TakeoffDecision, dofs: &[f64]) -> TakeoffDecision {
        for &d in dofs {
            s = takeoff_decision_step(s, d, lim);
        }
        s
    }

    #[test]
    fn feasibility_box() {
        let lim = MobilityLimits::default();
        assert!(feasible_node(&flat(5), GridIndex::new(2, 2), &lim));
        // Slope 0.7 along x exceeds the 0.35 bound.
        let steep = TerrainGrid::from_fn(5, 5, 12.0, |x, _| 0.7 * x).unwrap();
        assert!(!feasible_node(&steep, GridIndex::new(2, 2), &lim));
        // Nodata is never drivable.
        let mut cells = vec![0.0; 25];
        cells[12] = -9999.0;
        let g = TerrainGrid::new(5, 5, 12.0, 0.0, 0.0, cells, -9999.0).unwrap();
        assert!(!feasible_node(&g, GridIndex::new(2, 2), &lim));
    }

    #[test]
    fn infeasible_endpoints_are_errors() {
        let steep = TerrainGrid::from_fn(5, 5, 12.0, |x, _| 0.7 * x).unwrap();
        let lim = MobilityLimits::default();
        let err = search_ground(
            &steep,
            GridIndex::new(2, 2),
            GridIndex::new(4, 4),
            &lim,
            &EnergyParams::default(),
            &battery(),
        )
        .unwrap_err();
        assert!(matches!(err, GroundError::InfeasibleStart(_)));
    }

    #[test]
    fn start_equals_goal() {
        let g = flat(10);
        let r = search_ground(
            &g,
            GridIndex::new(3, 3),
            GridIndex::new(3, 3),
            &MobilityLimits::default(),
            &EnergyParams::default(),
            &battery(),
        )
        .unwrap();
        assert_eq!(r.outcome, GroundOutcome::ReachedGoal);
        assert_eq!(r.path, vec![GridIndex::new(3, 3)]);
        assert_eq!(r.path_energy, 0.0);
    }

    #[test]
    fn flat_corner_to_corner_is_chebyshev_optimal() {
        let g = flat(10);
        let params = EnergyParams::default();
        let r = search_ground(
            &g,
            GridIndex::new(0, 0),
            GridIndex::new(9, 9),
            &MobilityLimits::default(),
            &params,
            &battery(),
        )
        .unwrap();
        assert_eq!(r.outcome, GroundOutcome::ReachedGoal);
        // 9 diagonal moves; every optimal path has the same composition, so
        // the energy equals the fold of nine identical diagonal step costs.
        assert_eq!(r.path.len(), 10);
        let diag = drive_step_energy(&g, &params, GridIndex::new(0, 0), GridIndex::new(1, 1))
            .unwrap();
        let mut expect = 0.0;
        for _ in 0..9 {
            expect += diag;
        }
        assert_eq!(r.path_energy, expect);
    }

    #[test]
    fn ridge_flags_takeoff_before_core() {
        // Gentle approach flank (slope 0.25, drivable but above m_index)
        // for 10 cells, then a steep infeasible core.
        let cell = 12.0;
        let g = TerrainGrid::from_fn(40, 9, cell, |x, _| ridge_profile(x / cell)).unwrap();
        let lim = MobilityLimits {
            m_index: 0.15,
            ..MobilityLimits::default()
        };
        let r = search_ground(
            &g,
            GridIndex::new(2, 4),
            GridIndex::new(37, 4),
            &lim,
            &EnergyParams::default(),
            &battery(),
        )
        .unwrap();
        assert_eq!(r.outcome, GroundOutcome::TakeoffRequired);
        let sp = r.switching_point.unwrap();
        // Flag fires on the flank, before the infeasible core at u=24.
        assert!(sp.col >= 14 && sp.col < 24, "switch at {:?}", sp);
        assert_eq!(*r.path.last().unwrap(), sp);
        // No returned node violates the slope box.
        for &c in &r.path {
            assert!(feasible_node(&g, c, &lim));
        }
        // The closest expanded node is at least as close as the switching
        // point itself.
        assert!(r.h2d_min > 0.0 && r.h2d_min.is_finite());
        assert!(r.h2d_min <= manhattan_m(&g, sp, GridIndex::new(37, 4)));
    }

    #[test]
    fn reached_goal_reports_zero_h2d_min() {
        let g = flat(8);
        let r = search_ground(
            &g,
            GridIndex::new(0, 0),
            GridIndex::new(7, 7),
            &MobilityLimits::default(),
            &EnergyParams::default(),
            &battery(),
        )
        .unwrap();
        assert_eq!(r.h2d_min, 0.0);
    }

    // Shared with the flight tests: flank 14..24 at slope 0.25, core
    // 24..27 at 0.9, plateau 27..29, symmetric descent, then a 30 m plain.
    fn ridge_profile(u: f64) -> f64 {
        let s1 = 0.25 * 12.0;
        let s2 = 0.9 * 12.0;
        if u < 14.0 {
            0.0
        } else if u < 24.0 {
            (u - 14.0) * s1
        } else if u < 27.0 {
            10.0 * s1 + (u - 24.0) * s2
        } else if u < 29.0 {
            10.0 * s1 + 3.0 * s2
        } else if u < 32.0 {
            10.0 * s1 + 3.0 * s2 - (u - 29.0) * s2
        } else {
            10.0 * s1
        }
    }

    #[test]
    fn pure_wall_exhausts_without_flag() {
        // A sheer infeasible wall with a flat approach never increments the
        // counter; the search exhausts instead.
        let cell = 12.0;
        let g = TerrainGrid::from_fn(20, 7, cell, |x, _| {
            let u = x / cell;
            if (9.0..11.0).contains(&u) {
                60.0
            } else {
                0.0
            }
        })
        .unwrap();
        let r = search_ground(
            &g,
            GridIndex::new(1, 3),
            GridIndex::new(18, 3),
            &MobilityLimits::default(),
            &EnergyParams::default(),
            &battery(),
        )
        .unwrap();
        assert_eq!(r.outcome, GroundOutcome::Exhausted);
        assert!(r.switching_point.is_none());
    }

    #[test]
    fn search_matches_dijkstra_on_random_terrain() {
        // Development spot check; the acceptance suite runs the full
        // 100-seed comparison.
        for seed in 0..10u64 {
            let mut g = TerrainGrid::synthesize(&SynthSpec {
                kind: crate::terrain::SynthKind::RandomSmooth,
                ncols: 12,
                nrows: 12,
                cell_size: 12.0,
                amplitude: 25.0,
                seed,
            })
            .unwrap();
            let cap = 0.30 * 0.35;
            let worst = g.max_slope();
            if worst > cap {
                g.scale_elevations(cap / worst);
            }
            let lim = MobilityLimits {
                m_index: 1e9,
                ..MobilityLimits::default()
            };
            let params = EnergyParams::default();
            let start = GridIndex::new(0, 11);
            let goal = GridIndex::new(11, 0);
            let r = search_ground(&g, start, goal, &lim, &params, &battery()).unwrap();
            assert_eq!(r.outcome, GroundOutcome::ReachedGoal);
            let best = dijkstra_reference(&g, &params, &lim, start, goal);
            assert_eq!(r.path_energy, best, "seed {seed}");
        }
    }

    // Plain binary-heap Dijkstra over the identical energy graph.
    fn dijkstra_reference(
        grid: &TerrainGrid,
        params: &EnergyParams,
        limits: &MobilityLimits,
        start: GridIndex,
        goal: GridIndex,
    ) -> f64 {
        let n = grid.ncols() * grid.nrows();
        let lin = |i: GridIndex| i.row * grid.ncols() + i.col;
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        dist[lin(start)] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(OpenEntry {
            f: 0.0,
            h: 0.0,
            idx: start,
        });
        while let Some(e) = heap.pop() {
            let u = e.idx;
            if done[lin(u)] {
                continue;
            }
            done[lin(u)] = true;
            if u == goal {
                return dist[lin(u)];
            }
            for (dc, dr) in NEIGHBORS_8 {
                let vc = u.col as i64 + dc as i64;
                let vr = u.row as i64 + dr as i64;
                if vc < 0 || vr < 0 || vc >= grid.ncols() as i64 || vr >= grid.nrows() as i64 {
                    continue;
                }
                let v = GridIndex::new(vc as usize, vr as usize);
                if done[lin(v)] || !feasible_node(grid, v, limits) {
                    continue;
                }
                let alt = dist[lin(u)] + drive_step_energy(grid, params, u, v).unwrap();
                if alt < dist[lin(v)] {
                    dist[lin(v)] = alt;
                    heap.push(OpenEntry {
                        f: alt,
                        h: 0.0,
                        idx: v,
                    });
                }
            }
        }
        f64::INFINITY
    }
}
