//! The alternating ground/flight pipeline.
//!
//! `plan` drives toward the goal until the takeoff decision fires, refines
//! the flagged switching point, flies (directly to a near goal, or over the
//! blocking terrain with the trap-escape search), refines the landing
//! point, and resumes driving — threading one battery ledger through every
//! segment. `account` replays a finished path from scratch as a
//! double-entry check on the incremental bookkeeping.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ResolvedConfig;
use crate::energy::{BatteryState, EnergyError, EnergyParams, Mode, Segment};
use crate::flight::{
    search_flight_direct_from, search_flight_escape, select_flight_mode, FlightError, FlightMode,
    FlightNode, FlightOutcome, FlightStage,
};
use crate::geom::Vec3;
use crate::ground::{
    feasible_node, manhattan_m, search_ground, GroundError, GroundOutcome, MobilityLimits,
};
use crate::switch::{optimize_switch_point, SwitchContext};
use crate::terrain::{GridIndex, TerrainGrid};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("{which} cell ({}, {}) is not a feasible ground cell", .cell.col, .cell.row)]
    InfeasibleEndpoint { which: &'static str, cell: GridIndex },
    #[error("no path to the goal")]
    NoPath { partial: Box<PlannedPath> },
    #[error("battery exhausted: needed {needed:.1} J with {available:.1} J left")]
    BatteryExhausted {
        partial: Box<PlannedPath>,
        needed: f64,
        available: f64,
    },
    #[error("mode switch cap ({cap}) exceeded")]
    SwitchCapExceeded { partial: Box<PlannedPath>, cap: u32 },
    #[error("energy accounting mismatch: {0}")]
    Accounting(String),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Flight(FlightError),
    #[error(transparent)]
    Terrain(#[from] crate::terrain::TerrainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathNode {
    pub position: Vec3,
    pub cell: GridIndex,
    /// Mode of the segment that arrived here; the start node is `Drive`.
    pub mode: Mode,
    pub cumulative_energy: f64,
    pub soc: f64,
    pub is_switch_point: bool,
    /// Trap-escape stage the node was expanded in, for flight nodes.
    pub stage: Option<FlightStage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchDirection {
    GroundToAir,
    AirToGround,
}

impl std::fmt::Display for SwitchDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SwitchDirection::GroundToAir => write!(f, "ground-to-air"),
            SwitchDirection::AirToGround => write!(f, "air-to-ground"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchRecord {
    pub node_index: usize,
    pub direction: SwitchDirection,
    pub initial_cell: GridIndex,
    pub initial_position: Vec3,
    pub optimized_cell: GridIndex,
    pub optimized_position: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeLeg {
    pub mode: Mode,
    /// Inclusive node range; adjacent legs share their boundary node.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub nodes: Vec<PathNode>,
    pub switch_points: Vec<SwitchRecord>,
    pub mode_legs: Vec<ModeLeg>,
    pub total_energy: f64,
    pub total_distance: f64,
    pub final_soc: f64,
}

impl PlannedPath {
    pub fn switch_count(&self) -> usize {
        self.switch_points.len()
    }

    pub fn soc_trace(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.soc).collect()
    }

    /// Stage sequence over the flight nodes, in path order.
    pub fn stage_log(&self) -> Vec<FlightStage> {
        self.nodes.iter().filter_map(|n| n.stage).collect()
    }
}

struct PathBuilder<'a> {
    grid: &'a TerrainGrid,
    energy: &'a EnergyParams,
    battery: BatteryState,
    nodes: Vec<PathNode>,
    legs: Vec<ModeLeg>,
    switches: Vec<SwitchRecord>,
    total_distance: f64,
}

impl<'a> PathBuilder<'a> {
    fn new(
        grid: &'a TerrainGrid,
        energy: &'a EnergyParams,
        battery: BatteryState,
        start: GridIndex,
    ) -> Result<Self, PlanError> {
        let position = grid.surface_point(start)?;
        let soc = battery.soc();
        Ok(PathBuilder {
            grid,
            energy,
            battery,
            nodes: vec![PathNode {
                position,
                cell: start,
                mode: Mode::Drive,
                cumulative_energy: 0.0,
                soc,
                is_switch_point: false,
                stage: None,
            }],
            legs: vec![ModeLeg {
                mode: Mode::Drive,
                start: 0,
                end: 0,
            }],
            switches: Vec::new(),
            total_distance: 0.0,
        })
    }

    fn last(&self) -> &PathNode {
        self.nodes.last().expect("builder always has a node")
    }

    fn push(
        &mut self,
        position: Vec3,
        cell: GridIndex,
        mode: Mode,
        stage: Option<FlightStage>,
    ) -> Result<(), EnergyError> {
        let prev = *self.last();
        let seg = Segment::new(
            prev.position.distance(position),
            position.z - prev.position.z,
            mode,
        );
        let switched = prev.is_switch_point;
        let cost = self.energy.segment_energy(&seg, switched);
        self.battery.debit(cost)?;
        let cumulative_energy = prev.cumulative_energy + cost;
        self.total_distance += seg.delta_d;
        let index = self.nodes.len();
        self.nodes.push(PathNode {
            position,
            cell,
            mode,
            cumulative_energy,
            soc: self.battery.soc(),
            is_switch_point: false,
            stage,
        });
        let leg = self.legs.last_mut().expect("builder always has a leg");
        if leg.mode == mode {
            leg.end = index;
        } else {
            self.legs.push(ModeLeg {
                mode,
                start: index - 1,
                end: index,
            });
        }
        Ok(())
    }

    /// Appends a drive chain whose first cell is the current tail.
    fn append_ground(&mut self, cells: &[GridIndex]) -> Result<(), EnergyError> {
        debug_assert_eq!(cells.first(), Some(&self.last().cell));
        for &cell in &cells[1..] {
            let p = self
                .grid
                .surface_point(cell)
                .expect("ground paths stay on valid cells");
            self.push(p, cell, Mode::Drive, None)?;
        }
        Ok(())
    }

    /// Appends a flight chain whose first node is the current tail cell.
    /// The shared takeoff node inherits the flight start's stage so the
    /// stage log covers the whole flight.
    fn append_flight(&mut self, nodes: &[FlightNode]) -> Result<(), EnergyError> {
        debug_assert_eq!(nodes.first().map(|n| n.cell), Some(self.last().cell));
        if let (Some(first), Some(tail)) = (nodes.first(), self.nodes.last_mut()) {
            tail.stage = first.stage;
        }
        for n in &nodes[1..] {
            self.push(n.position, n.cell, Mode::Fly, n.stage)?;
        }
        Ok(())
    }

    /// Marks the current tail node as a switch point.
    fn mark_switch(
        &mut self,
        direction: SwitchDirection,
        initial_cell: GridIndex,
        initial_position: Vec3,
    ) {
        let index = self.nodes.len() - 1;
        let node = self.nodes.last_mut().expect("non-empty");
        node.is_switch_point = true;
        self.switches.push(SwitchRecord {
            node_index: index,
            direction,
            initial_cell,
            initial_position,
            optimized_cell: node.cell,
            optimized_position: node.position,
        });
        if direction == SwitchDirection::GroundToAir {
            self.battery.begin_flight();
        }
    }

    fn finish(self) -> PlannedPath {
        let total_energy = self.last().cumulative_energy;
        let final_soc = self.last().soc;
        PlannedPath {
            nodes: self.nodes,
            switch_points: self.switches,
            mode_legs: self.legs,
            total_energy,
            total_distance: self.total_distance,
            final_soc,
        }
    }
}

fn battery_err(builder: PathBuilder, e: EnergyError) -> PlanError {
    match e {
        EnergyError::BatteryExhausted { needed, available } => PlanError::BatteryExhausted {
            partial: Box::new(builder.finish()),
            needed,
            available,
        },
        other => PlanError::Accounting(other.to_string()),
    }
}

/// Local drive repair from the earliest retained path node near the new
/// switching point. Returns the full replacement chain, or `None` when the
/// new point cannot be reached by driving.
fn restitch_ground(
    grid: &TerrainGrid,
    cells: &[GridIndex],
    new_point: GridIndex,
    limits: &MobilityLimits,
    energy: &EnergyParams,
    battery: &BatteryState,
    radius: f64,
) -> Option<Vec<GridIndex>> {
    let target = grid.surface_point(new_point).ok()?;
    let anchor_idx = cells.iter().position(|c| {
        grid.surface_point(*c)
            .map(|p| p.horizontal_distance(target) <= radius)
            .unwrap_or(false)
    })?;
    let anchor = cells[anchor_idx];
    let repair = search_ground(
        grid,
        anchor,
        new_point,
        &limits.without_takeoff(),
        energy,
        battery,
    )
    .ok()?;
    if repair.outcome != GroundOutcome::ReachedGoal {
        return None;
    }
    let mut out = cells[..=anchor_idx].to_vec();
    out.extend_from_slice(&repair.path[1..]);
    Some(out)
}

/// Flight-side analogue: re-route the tail of a flight to a relocated
/// landing cell with a plain 3D search, marking the new approach nodes as
/// landing-stage.
fn restitch_flight(
    grid: &TerrainGrid,
    nodes: &[FlightNode],
    new_landing: GridIndex,
    cfg: &ResolvedConfig,
    battery: &BatteryState,
    radius: f64,
) -> Option<Vec<FlightNode>> {
    let target = grid.surface_point(new_landing).ok()?;
    let anchor_idx = nodes
        .iter()
        .position(|n| n.position.horizontal_distance(target) <= radius)?;
    let anchor = nodes[anchor_idx];
    let repair = search_flight_direct_from(
        grid,
        anchor.cell,
        anchor.level,
        new_landing,
        &cfg.flight,
        &cfg.energy,
        battery,
    )
    .ok()?;
    if repair.outcome != FlightOutcome::ReachedGoal {
        return None;
    }
    let mut out = nodes[..=anchor_idx].to_vec();
    out.extend(repair.path[1..].iter().map(|n| FlightNode {
        stage: Some(FlightStage::Landing),
        ..*n
    }));
    Some(out)
}

fn takeoff_context(
    grid: &TerrainGrid,
    cells: &[GridIndex],
    goal: GridIndex,
) -> Result<SwitchContext, PlanError> {
    let back = cells.len().saturating_sub(4).min(cells.len() - 1);
    Ok(SwitchContext {
        approach: grid.surface_point(cells[back])?,
        approach_mode: Mode::Drive,
        departure: grid.surface_point(goal)?,
        departure_mode: Mode::Fly,
    })
}

fn landing_context(
    grid: &TerrainGrid,
    flight: &[FlightNode],
    goal: GridIndex,
) -> Result<SwitchContext, PlanError> {
    let back = flight.len().saturating_sub(5);
    Ok(SwitchContext {
        approach: flight[back].position,
        approach_mode: Mode::Fly,
        departure: grid.surface_point(goal)?,
        departure_mode: Mode::Drive,
    })
}

/// Plans start to goal over the grid with the resolved configuration.
pub fn plan(
    grid: &TerrainGrid,
    start: GridIndex,
    goal: GridIndex,
    cfg: &ResolvedConfig,
) -> Result<PlannedPath, PlanError> {
    if !feasible_node(grid, start, &cfg.mobility) {
        return Err(PlanError::InfeasibleEndpoint {
            which: "start",
            cell: start,
        });
    }
    if !feasible_node(grid, goal, &cfg.mobility) {
        return Err(PlanError::InfeasibleEndpoint {
            which: "goal",
            cell: goal,
        });
    }

    let mut builder = PathBuilder::new(grid, &cfg.energy, cfg.battery.clone(), start)?;
    let mut current = start;
    let mut switches_used = 0u32;
    let mut first_takeoff = true;
    let repair_radius = 1.5 * cfg.bas.search_radius;

    loop {
        let gres = search_ground(
            grid,
            current,
            goal,
            &cfg.mobility,
            &cfg.energy,
            &builder.battery,
        )?;

        match gres.outcome {
            GroundOutcome::ReachedGoal => {
                if let Err(e) = builder.append_ground(&gres.path) {
                    return Err(battery_err(builder, e));
                }
                return Ok(builder.finish());
            }
            GroundOutcome::Exhausted => {
                if let Err(e) = builder.append_ground(&gres.path) {
                    return Err(battery_err(builder, e));
                }
                return Err(PlanError::NoPath {
                    partial: Box::new(builder.finish()),
                });
            }
            GroundOutcome::TakeoffRequired => {
                switches_used += 1;
                if switches_used > cfg.planner.max_switches {
                    return Err(PlanError::SwitchCapExceeded {
                        partial: Box::new(builder.finish()),
                        cap: cfg.planner.max_switches,
                    });
                }
                let initial = gres
                    .switching_point
                    .expect("takeoff-required always carries a switching point");
                let initial_position = grid.surface_point(initial)?;

                let override_point = cfg.planner.first_switch_override.filter(|_| first_takeoff);
                let chosen = if let Some(forced) = override_point {
                    forced
                } else if cfg.planner.bas_enabled {
                    let ctx = takeoff_context(grid, &gres.path, goal)?;
                    optimize_switch_point(
                        grid,
                        initial,
                        ctx,
                        &cfg.bas,
                        &cfg.mobility,
                        &cfg.energy,
                        builder.battery.soc(),
                    )?
                    .point
                } else {
                    initial
                };
                first_takeoff = false;

                let cells = if chosen != initial {
                    restitch_ground(
                        grid,
                        &gres.path,
                        chosen,
                        &cfg.mobility,
                        &cfg.energy,
                        &builder.battery,
                        repair_radius,
                    )
                    .unwrap_or_else(|| gres.path.clone())
                } else {
                    gres.path.clone()
                };
                let takeoff = *cells.last().expect("non-empty chain");

                if let Err(e) = builder.append_ground(&cells) {
                    return Err(battery_err(builder, e));
                }
                builder.mark_switch(SwitchDirection::GroundToAir, initial, initial_position);

                let h2d_start = manhattan_m(grid, takeoff, goal);
                match select_flight_mode(h2d_start, &cfg.flight) {
                    FlightMode::Direct => {
                        let fres = match crate::flight::search_flight_direct(
                            grid,
                            takeoff,
                            goal,
                            &cfg.flight,
                            &cfg.energy,
                            &builder.battery,
                        ) {
                            Ok(f) => f,
                            Err(FlightError::BatteryExhausted) => {
                                return Err(PlanError::BatteryExhausted {
                                    partial: Box::new(builder.finish()),
                                    needed: f64::NAN,
                                    available: 0.0,
                                })
                            }
                            Err(e) => return Err(PlanError::Flight(e)),
                        };
                        match fres.outcome {
                            FlightOutcome::ReachedGoal => {
                                if let Err(e) = builder.append_flight(&fres.path) {
                                    return Err(battery_err(builder, e));
                                }
                                builder.battery.end_flight();
                                return Ok(builder.finish());
                            }
                            _ => {
                                return Err(PlanError::NoPath {
                                    partial: Box::new(builder.finish()),
                                })
                            }
                        }
                    }
                    FlightMode::Escape => {
                        let seed = gres.h2d_min.min(h2d_start);
                        let fres = match search_flight_escape(
                            grid,
                            takeoff,
                            goal,
                            seed,
                            &cfg.flight,
                            &cfg.mobility,
                            &cfg.energy,
                            &builder.battery,
                        ) {
                            Ok(f) => f,
                            Err(FlightError::BatteryExhausted) => {
                                return Err(PlanError::BatteryExhausted {
                                    partial: Box::new(builder.finish()),
                                    needed: f64::NAN,
                                    available: 0.0,
                                })
                            }
                            Err(e) => return Err(PlanError::Flight(e)),
                        };
                        match fres.outcome {
                            FlightOutcome::Landed | FlightOutcome::BatteryLimitLanding => {
                                let initial_landing =
                                    fres.landing_point.expect("landing outcome carries a point");
                                let initial_landing_pos = grid.surface_point(initial_landing)?;
                                let mut flight_nodes = fres.path;
                                let mut landing = initial_landing;

                                if landing != goal && cfg.planner.bas_enabled {
                                    let ctx =
                                        landing_context(grid, &flight_nodes, goal)?;
                                    let opt = optimize_switch_point(
                                        grid,
                                        initial_landing,
                                        ctx,
                                        &cfg.bas,
                                        &cfg.mobility,
                                        &cfg.energy,
                                        builder.battery.soc(),
                                    )?;
                                    if opt.point != initial_landing {
                                        if let Some(tail) = restitch_flight(
                                            grid,
                                            &flight_nodes,
                                            opt.point,
                                            cfg,
                                            &builder.battery,
                                            repair_radius,
                                        ) {
                                            flight_nodes = tail;
                                            landing = opt.point;
                                        }
                                    }
                                }

                                if let Err(e) = builder.append_flight(&flight_nodes) {
                                    return Err(battery_err(builder, e));
                                }
                                builder.battery.end_flight();
                                if landing == goal {
                                    return Ok(builder.finish());
                                }
                                builder.mark_switch(
                                    SwitchDirection::AirToGround,
                                    initial_landing,
                                    initial_landing_pos,
                                );
                                current = landing;
                            }
                            _ => {
                                return Err(PlanError::NoPath {
                                    partial: Box::new(builder.finish()),
                                })
                            }
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegReport {
    pub mode: Mode,
    pub energy: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub per_leg: Vec<LegReport>,
    pub total_energy: f64,
    pub total_distance: f64,
    pub transform_count: usize,
    pub soc_trace: Vec<f64>,
    pub final_soc: f64,
}

const ACCOUNT_REL_TOL: f64 = 1e-9;

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= ACCOUNT_REL_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Recomputes every segment of a finished path from node geometry alone and
/// cross-checks the stored running totals. A disagreement beyond 1e-9
/// relative is an internal-consistency error.
pub fn account(
    path: &PlannedPath,
    energy: &EnergyParams,
    battery_template: &BatteryState,
) -> Result<EnergyReport, PlanError> {
    let mut battery = battery_template.clone();
    battery.consumed = 0.0;

    if path.nodes.is_empty() {
        return Err(PlanError::Accounting("empty path".into()));
    }
    if path.nodes[0].cumulative_energy != 0.0 {
        return Err(PlanError::Accounting(
            "first node must carry zero cumulative energy".into(),
        ));
    }

    let mut cum = 0.0f64;
    let mut soc_trace = vec![battery.soc()];
    let mut seg_costs = Vec::with_capacity(path.nodes.len().saturating_sub(1));
    let mut seg_dists = Vec::with_capacity(seg_costs.capacity());
    let mut transform_count = 0usize;

    for w in path.nodes.windows(2) {
        let (src, dst) = (&w[0], &w[1]);
        let seg = Segment::new(
            src.position.distance(dst.position),
            dst.position.z - src.position.z,
            dst.mode,
        );
        let switched = src.is_switch_point;
        if switched {
            transform_count += 1;
        }
        let cost = energy.segment_energy(&seg, switched);
        battery
            .debit(cost)
            .map_err(|e| PlanError::Accounting(e.to_string()))?;
        cum += cost;
        seg_costs.push(cost);
        seg_dists.push(seg.delta_d);
        soc_trace.push(battery.soc());
        if !rel_close(cum, dst.cumulative_energy) {
            return Err(PlanError::Accounting(format!(
                "cumulative energy mismatch at node: recomputed {cum}, stored {}",
                dst.cumulative_energy
            )));
        }
        if !rel_close(battery.soc(), dst.soc) {
            return Err(PlanError::Accounting(format!(
                "soc mismatch at node: recomputed {}, stored {}",
                battery.soc(),
                dst.soc
            )));
        }
    }

    if !rel_close(cum, path.total_energy) {
        return Err(PlanError::Accounting(format!(
            "total energy mismatch: recomputed {cum}, stored {}",
            path.total_energy
        )));
    }

    let per_leg = path
        .mode_legs
        .iter()
        .map(|leg| LegReport {
            mode: leg.mode,
            energy: seg_costs[leg.start..leg.end].iter().sum(),
            distance: seg_dists[leg.start..leg.end].iter().sum(),
        })
        .collect();

    Ok(EnergyReport {
        per_leg,
        total_energy: cum,
        total_distance: seg_dists.iter().sum(),
        transform_count,
        soc_trace,
        final_soc: battery.soc(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn resolved(grid: &TerrainGrid, overrides: &[(&str, &str)]) -> ResolvedConfig {
        let mut cfg = RunConfig::default();
        for (k, v) in overrides {
            cfg.apply(k, v).unwrap();
        }
        cfg.resolve(grid).unwrap()
    }

    #[test]
    fn flat_terrain_single_drive_leg() {
        let grid = TerrainGrid::from_fn(15, 15, 12.0, |_, _| 0.0).unwrap();
        let cfg = resolved(&grid, &[]);
        let path = plan(&grid, GridIndex::new(1, 1), GridIndex::new(13, 13), &cfg).unwrap();
        assert_eq!(path.switch_count(), 0);
        assert_eq!(path.mode_legs.len(), 1);
        assert_eq!(path.mode_legs[0].mode, Mode::Drive);
        assert!(path.total_energy > 0.0);
        let report = account(&path, &cfg.energy, &cfg.battery).unwrap();
        assert_eq!(report.transform_count, 0);
        assert_eq!(report.per_leg.len(), 1);
    }

    #[test]
    fn infeasible_goal_is_an_endpoint_error() {
        let grid = TerrainGrid::from_fn(15, 15, 12.0, |x, _| {
            if x > 120.0 {
                0.8 * x
            } else {
                0.0
            }
        })
        .unwrap();
        let cfg = resolved(&grid, &[]);
        let err = plan(&grid, GridIndex::new(1, 1), GridIndex::new(13, 13), &cfg).unwrap_err();
        assert!(matches!(err, PlanError::InfeasibleEndpoint { which: "goal", .. }));
    }

    fn ridge_grid() -> TerrainGrid {
        let cell = 12.0;
        TerrainGrid::from_fn(48, 21, cell, move |x, _| {
            let u = x / cell;
            let s1 = 0.25 * cell;
            let s2 = 0.9 * cell;
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
        })
        .unwrap()
    }

    fn ridge_overrides() -> Vec<(&'static str, &'static str)> {
        vec![("mobility.m_index", "0.15"), ("mobility.turn_weight", "0.25")]
    }

    #[test]
    fn ridge_plan_has_one_flight_leg() {
        let grid = ridge_grid();
        let cfg = resolved(&grid, &ridge_overrides());
        let path = plan(&grid, GridIndex::new(2, 10), GridIndex::new(45, 10), &cfg).unwrap();

        assert_eq!(path.switch_count(), 2, "switches: {:?}", path.switch_points);
        assert_eq!(
            path.switch_points[0].direction,
            SwitchDirection::GroundToAir
        );
        assert_eq!(
            path.switch_points[1].direction,
            SwitchDirection::AirToGround
        );
        let modes: Vec<Mode> = path.mode_legs.iter().map(|l| l.mode).collect();
        assert_eq!(modes, vec![Mode::Drive, Mode::Fly, Mode::Drive]);

        // Flight stays above terrain; stage log is monotone and complete.
        for n in &path.nodes {
            let elev = grid.elevation_at(n.cell).unwrap();
            assert!(n.position.z >= elev - 1e-9);
        }
        let stages = path.stage_log();
        assert!(stages.windows(2).all(|w| w[0] <= w[1]), "{stages:?}");
        assert!(stages.contains(&FlightStage::Takeoff));
        assert!(stages.contains(&FlightStage::Escape));
        assert!(stages.contains(&FlightStage::Landing));

        // Double-entry accounting agrees and charges exactly two transforms.
        let report = account(&path, &cfg.energy, &cfg.battery).unwrap();
        assert_eq!(report.transform_count, 2);
        assert!(report.soc_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(report.final_soc >= 0.0);
    }

    #[test]
    fn bas_never_worse_than_raw_switch_points() {
        let grid = ridge_grid();
        let with = resolved(&grid, &ridge_overrides());
        let mut without_overrides = ridge_overrides();
        without_overrides.push(("planner.bas_enabled", "false"));
        let without = resolved(&grid, &without_overrides);

        let start = GridIndex::new(2, 10);
        let goal = GridIndex::new(45, 10);
        let optimized = plan(&grid, start, goal, &with).unwrap();
        let raw = plan(&grid, start, goal, &without).unwrap();
        assert!(
            optimized.total_energy <= raw.total_energy + 1e-9,
            "optimized {} > raw {}",
            optimized.total_energy,
            raw.total_energy
        );
    }

    #[test]
    fn ring_with_near_goal_uses_direct_flight() {
        // Rising cone toward the rim of a crater: the approach violates the
        // maneuverability index long enough to fire the flag, the rim is
        // infeasible, and the goal sits inside within the near-goal radius.
        let cell = 12.0;
        let center = Vec3::new(25.0 * cell, 13.0 * cell, 0.0);
        let grid = TerrainGrid::from_fn(50, 26, cell, move |x, y| {
            let d = ((x - center.x).powi(2) + (y - center.y).powi(2)).sqrt() / cell;
            if d > 22.0 {
                0.0
            } else if d > 10.0 {
                (22.0 - d) * 0.25 * cell
            } else if d > 7.0 {
                (22.0 - 10.0) * 0.25 * cell + (10.0 - d) * 0.9 * cell
            } else {
                (22.0 - 10.0) * 0.25 * cell + 3.0 * 0.9 * cell
            }
        })
        .unwrap();
        let cfg = resolved(
            &grid,
            &[("mobility.m_index", "0.15"), ("mobility.turn_weight", "0.25")],
        );
        let start = GridIndex::new(2, 13);
        let goal = GridIndex::new(25, 13);
        let path = plan(&grid, start, goal, &cfg).unwrap();
        assert_eq!(path.switch_count(), 1, "switches {:?}", path.switch_points);
        assert_eq!(
            path.switch_points[0].direction,
            SwitchDirection::GroundToAir
        );
        let modes: Vec<Mode> = path.mode_legs.iter().map(|l| l.mode).collect();
        assert_eq!(modes, vec![Mode::Drive, Mode::Fly]);
        assert_eq!(path.nodes.last().unwrap().cell, goal);
    }

    #[test]
    fn drive_only_energy_matches_closed_form() {
        // n segments of drive on flat ground: n standby slots plus the
        // per-meter friction and drag rates over the total length.
        let grid = TerrainGrid::from_fn(12, 12, 12.0, |_, _| 0.0).unwrap();
        let cfg = resolved(&grid, &[]);
        let path = plan(&grid, GridIndex::new(1, 5), GridIndex::new(10, 5), &cfg).unwrap();
        let n = (path.nodes.len() - 1) as f64;
        let length = path.total_distance;
        let expect = n * cfg.energy.standby_energy + cfg.energy.drive_rate_per_m() * length;
        let rel = (path.total_energy - expect).abs() / expect;
        assert!(rel <= 1e-12, "closed form {expect} vs {}", path.total_energy);
    }

    #[test]
    fn legs_alternate_modes() {
        let grid = ridge_grid();
        let cfg = resolved(&grid, &ridge_overrides());
        let path = plan(&grid, GridIndex::new(2, 10), GridIndex::new(45, 10), &cfg).unwrap();
        for w in path.mode_legs.windows(2) {
            assert_ne!(w[0].mode, w[1].mode, "adjacent legs share a mode");
            assert_eq!(w[0].end, w[1].start, "legs must share their joint node");
        }
        // Mode changes happen only at switch points.
        let switch_nodes: Vec<usize> =
            path.switch_points.iter().map(|s| s.node_index).collect();
        for i in 1..path.nodes.len() {
            if path.nodes[i].mode != path.nodes[i - 1].mode && i > 1 {
                assert!(
                    switch_nodes.contains(&(i - 1)),
                    "mode change at node {i} without a switch record"
                );
            }
        }
    }

    #[test]
    fn switch_cap_stops_runaway_plans() {
        let grid = ridge_grid();
        let mut overrides = ridge_overrides();
        overrides.push(("planner.max_switches", "0"));
        let cfg = resolved(&grid, &overrides);
        let err = plan(&grid, GridIndex::new(2, 10), GridIndex::new(45, 10), &cfg).unwrap_err();
        match err {
            PlanError::SwitchCapExceeded { partial, cap } => {
                assert_eq!(cap, 0);
                assert_eq!(partial.switch_count(), 0);
            }
            other => panic!("expected SwitchCapExceeded, got {other}"),
        }

        // A longer drivable flank makes the raw flag point land back on the
        // near slope and fly twice; capping at one takeoff surfaces that as
        // an error carrying the first flight.
        let cell = 12.0;
        let long_flank = TerrainGrid::from_fn(52, 21, cell, move |x, _| {
            let u = x / cell;
            let s1 = 0.25 * cell;
            let s2 = 0.9 * cell;
            if u < 14.0 {
                0.0
            } else if u < 30.0 {
                (u - 14.0) * s1
            } else if u < 33.0 {
                16.0 * s1 + (u - 30.0) * s2
            } else if u < 35.0 {
                16.0 * s1 + 3.0 * s2
            } else if u < 38.0 {
                16.0 * s1 + 3.0 * s2 - (u - 35.0) * s2
            } else {
                16.0 * s1
            }
        })
        .unwrap();
        let mut overrides = ridge_overrides();
        overrides.push(("planner.bas_enabled", "false"));
        overrides.push(("planner.max_switches", "1"));
        let cfg = resolved(&long_flank, &overrides);
        let err =
            plan(&long_flank, GridIndex::new(2, 10), GridIndex::new(49, 10), &cfg).unwrap_err();
        match err {
            PlanError::SwitchCapExceeded { partial, cap } => {
                assert_eq!(cap, 1);
                assert_eq!(partial.switch_count(), 2, "first flight recorded");
                assert!(partial.mode_legs.iter().any(|l| l.mode == Mode::Fly));
            }
            other => panic!("expected SwitchCapExceeded, got {other}"),
        }
    }

    #[test]
    fn walled_goal_is_no_path_with_partial() {
        // Flat map with a nodata moat around the goal: drivable goal cell,
        // no route, and nothing ever trips the takeoff counter.
        let mut cells = vec![0.0f64; 15 * 15];
        for row in 0..15 {
            for col in 0..15 {
                let dc = (col as i64 - 11).abs();
                let dr = (row as i64 - 7).abs();
                if dc.max(dr) == 2 {
                    cells[row * 15 + col] = -9999.0;
                }
            }
        }
        let grid = TerrainGrid::new(15, 15, 12.0, 0.0, 0.0, cells, -9999.0).unwrap();
        let cfg = resolved(&grid, &[]);
        let err = plan(&grid, GridIndex::new(1, 7), GridIndex::new(11, 7), &cfg).unwrap_err();
        match err {
            PlanError::NoPath { partial } => assert!(!partial.nodes.is_empty()),
            other => panic!("expected NoPath, got {other}"),
        }
    }

    #[test]
    fn account_rejects_tampered_paths() {
        let grid = TerrainGrid::from_fn(10, 10, 12.0, |_, _| 0.0).unwrap();
        let cfg = resolved(&grid, &[]);
        let mut path = plan(&grid, GridIndex::new(0, 0), GridIndex::new(9, 9), &cfg).unwrap();
        path.nodes.last_mut().unwrap().cumulative_energy *= 1.01;
        assert!(matches!(
            account(&path, &cfg.energy, &cfg.battery),
            Err(PlanError::Accounting(_))
        ));
    }

    #[test]
    fn single_node_path_accounts_to_zero() {
        let grid = TerrainGrid::from_fn(10, 10, 12.0, |_, _| 0.0).unwrap();
        let cfg = resolved(&grid, &[]);
        let path = plan(&grid, GridIndex::new(4, 4), GridIndex::new(4, 4), &cfg).unwrap();
        assert_eq!(path.nodes.len(), 1);
        let report = account(&path, &cfg.energy, &cfg.battery).unwrap();
        assert_eq!(report.total_energy, 0.0);
        assert_eq!(report.total_distance, 0.0);
        assert_eq!(report.final_soc, 1.0);
    }
}
