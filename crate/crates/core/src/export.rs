//! Plot-ready emitters: CSV for paths, SOC traces and optimizer traces,
//! GeoJSON for legs and switch points. All output is deterministic for a
//! given path (floats print with their shortest round-trip representation,
//! JSON keys are sorted).

use std::io::Write;
use std::str::FromStr;

use serde_json::{json, Value};
use thiserror::Error;

use crate::energy::Mode;
use crate::geom::Vec3;
use crate::planner::{ModeLeg, PathNode, PlannedPath, SwitchDirection, SwitchRecord};
use crate::smooth::SmoothedPath;
use crate::switch::BasTraceRow;
use crate::terrain::GridIndex;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad path csv at line {line}: {reason}")]
    BadCsv { line: usize, reason: String },
}

pub fn write_path_csv(path: &PlannedPath, mut w: impl Write) -> Result<(), ExportError> {
    writeln!(w, "x,y,z,mode,cum_energy_J,soc")?;
    for n in &path.nodes {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            n.position.x, n.position.y, n.position.z, n.mode, n.cumulative_energy, n.soc
        )?;
    }
    Ok(())
}

pub fn write_soc_csv(path: &PlannedPath, mut w: impl Write) -> Result<(), ExportError> {
    writeln!(w, "step,cum_energy_J,soc")?;
    for (i, n) in path.nodes.iter().enumerate() {
        writeln!(w, "{},{},{}", i, n.cumulative_energy, n.soc)?;
    }
    Ok(())
}

pub fn write_bas_trace_csv(trace: &[BasTraceRow], mut w: impl Write) -> Result<(), ExportError> {
    writeln!(w, "iteration,x,y,z,f,e_term,r_term")?;
    for row in trace {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            row.iteration,
            row.point.x,
            row.point.y,
            row.point.z,
            row.fitness.f,
            row.fitness.e_term,
            row.fitness.r_term
        )?;
    }
    Ok(())
}

fn coords(p: Vec3) -> Value {
    json!([p.x, p.y, p.z])
}

/// One LineString feature per mode leg, with per-leg energy and distance.
pub fn path_geojson(path: &PlannedPath, leg_energies: &[(f64, f64)]) -> Value {
    let features: Vec<Value> = path
        .mode_legs
        .iter()
        .zip(leg_energies)
        .map(|(leg, (energy, distance))| {
            let line: Vec<Value> = path.nodes[leg.start..=leg.end]
                .iter()
                .map(|n| coords(n.position))
                .collect();
            json!({
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": line},
                "properties": {
                    "mode": leg.mode.to_string(),
                    "energy_J": energy,
                    "distance_m": distance,
                },
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

/// Switch points as Point features at the optimized location, carrying the
/// initial (pre-optimization) location in the properties.
pub fn switch_points_geojson(path: &PlannedPath) -> Value {
    let features: Vec<Value> = path
        .switch_points
        .iter()
        .map(|s: &SwitchRecord| {
            json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": coords(s.optimized_position)},
                "properties": {
                    "direction": s.direction.to_string(),
                    "node_index": s.node_index,
                    "initial": [s.initial_position.x, s.initial_position.y, s.initial_position.z],
                    "initial_cell": [s.initial_cell.col, s.initial_cell.row],
                    "optimized_cell": [s.optimized_cell.col, s.optimized_cell.row],
                },
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

pub fn smoothed_geojson(smoothed: &SmoothedPath) -> Value {
    let features: Vec<Value> = smoothed
        .legs
        .iter()
        .map(|leg| {
            let line: Vec<Value> = leg.samples.iter().map(|p| coords(*p)).collect();
            json!({
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": line},
                "properties": {"mode": leg.mode.to_string(), "smoothed": true},
            })
        })
        .collect();
    json!({
        "type": "FeatureCollection",
        "features": features,
        "max_deviation_m": smoothed.max_deviation,
    })
}

/// Rebuilds a path skeleton from a CSV written by [`write_path_csv`].
/// Switch points are inferred from mode changes; cells are approximated
/// from positions when a grid is not at hand.
pub fn parse_path_csv(text: &str) -> Result<PlannedPath, ExportError> {
    let mut nodes: Vec<PathNode> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "x,y,z,mode,cum_energy_J,soc" {
                return Err(ExportError::BadCsv {
                    line: 1,
                    reason: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(ExportError::BadCsv {
                line: i + 1,
                reason: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let num = |s: &str, what: &str| -> Result<f64, ExportError> {
            s.trim().parse().map_err(|_| ExportError::BadCsv {
                line: i + 1,
                reason: format!("bad {what}: {s:?}"),
            })
        };
        let mode = Mode::from_str(fields[3].trim()).map_err(|reason| ExportError::BadCsv {
            line: i + 1,
            reason,
        })?;
        nodes.push(PathNode {
            position: Vec3::new(
                num(fields[0], "x")?,
                num(fields[1], "y")?,
                num(fields[2], "z")?,
            ),
            cell: GridIndex::new(0, 0),
            mode,
            cumulative_energy: num(fields[4], "cum_energy_J")?,
            soc: num(fields[5], "soc")?,
            is_switch_point: false,
            stage: None,
        });
    }
    if nodes.is_empty() {
        return Err(ExportError::BadCsv {
            line: 1,
            reason: "no data rows".into(),
        });
    }

    // Mode changes mark switch points and leg boundaries.
    let mut legs = vec![ModeLeg {
        mode: nodes.get(1).map(|n| n.mode).unwrap_or(nodes[0].mode),
        start: 0,
        end: 0,
    }];
    let mut switches = Vec::new();
    for i in 1..nodes.len() {
        let mode = nodes[i].mode;
        let leg = legs.last_mut().unwrap();
        if leg.mode == mode || leg.start == leg.end {
            leg.mode = mode;
            leg.end = i;
        } else {
            let direction = match mode {
                Mode::Fly => SwitchDirection::GroundToAir,
                Mode::Drive => SwitchDirection::AirToGround,
            };
            nodes[i - 1].is_switch_point = true;
            switches.push(SwitchRecord {
                node_index: i - 1,
                direction,
                initial_cell: GridIndex::new(0, 0),
                initial_position: nodes[i - 1].position,
                optimized_cell: GridIndex::new(0, 0),
                optimized_position: nodes[i - 1].position,
            });
            legs.push(ModeLeg {
                mode,
                start: i - 1,
                end: i,
            });
        }
    }

    let total_energy = nodes.last().unwrap().cumulative_energy;
    let final_soc = nodes.last().unwrap().soc;
    let total_distance = nodes
        .windows(2)
        .map(|w| w[0].position.distance(w[1].position))
        .sum();
    Ok(PlannedPath {
        nodes,
        switch_points: switches,
        mode_legs: legs,
        total_energy,
        total_distance,
        final_soc,
    })
}
