//! Scenario definitions: bundled synthetic terrains and flat key=value
//! scenario files referencing DEM files, synth specs or builtins.

use std::path::Path;

use agplan_core::config::{kv_map, RunConfig};
use agplan_core::terrain::{GridIndex, SynthKind, SynthSpec, TerrainGrid};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario file needs `{0}`")]
    MissingKey(&'static str),
    #[error("bad value for `{key}`: {value:?}")]
    BadValue { key: String, value: String },
    #[error("unknown builtin scenario or terrain `{0}`")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Config(#[from] agplan_core::config::ConfigError),
    #[error(transparent)]
    Terrain(#[from] agplan_core::terrain::TerrainError),
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// A runnable planning problem: terrain, endpoints and a full config.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub grid: TerrainGrid,
    pub start: GridIndex,
    pub goal: GridIndex,
    pub config: RunConfig,
}

const CELL: f64 = 12.0;

/// Asymmetric ridge: a drivable approach flank steep enough to keep
/// violating the maneuverability index, an impassable core, and an
/// elevated plain on the far side.
fn ridge_elevation(u: f64, flank_cells: f64) -> f64 {
    let s1 = 0.25 * CELL;
    let s2 = 0.9 * CELL;
    let f0 = 14.0;
    let f1 = f0 + flank_cells;
    let c1 = f1 + 3.0;
    let p1 = c1 + 2.0;
    let d1 = p1 + 3.0;
    let top = flank_cells * s1 + 3.0 * s2;
    if u < f0 {
        0.0
    } else if u < f1 {
        (u - f0) * s1
    } else if u < c1 {
        flank_cells * s1 + (u - f1) * s2
    } else if u < p1 {
        top
    } else if u < d1 {
        top - (u - p1) * s2
    } else {
        flank_cells * s1
    }
}

fn apply_all(cfg: &mut RunConfig, pairs: &[(&str, &str)]) {
    for (k, v) in pairs {
        cfg.apply(k, v).expect("builtin override must be valid");
    }
}

fn ridge_scenario() -> Scenario {
    let grid = TerrainGrid::from_fn(48, 21, CELL, |x, _| ridge_elevation(x / CELL, 12.0)).unwrap();
    let mut config = RunConfig::default();
    apply_all(
        &mut config,
        &[("mobility.m_index", "0.15"), ("mobility.turn_weight", "0.25")],
    );
    Scenario {
        name: "ridge".into(),
        grid,
        start: GridIndex::new(2, 10),
        goal: GridIndex::new(45, 10),
        config,
    }
}

fn sloped_ridge_scenario() -> Scenario {
    // Longer flank: the takeoff decision fires well below the drivable
    // crest, leaving the optimizer real room to shorten the flight.
    let grid =
        TerrainGrid::from_fn(52, 21, CELL, |x, _| ridge_elevation(x / CELL, 16.0)).unwrap();
    let mut config = RunConfig::default();
    apply_all(
        &mut config,
        &[("mobility.m_index", "0.15"), ("mobility.turn_weight", "0.25")],
    );
    Scenario {
        name: "sloped_ridge".into(),
        grid,
        start: GridIndex::new(2, 10),
        goal: GridIndex::new(49, 10),
        config,
    }
}

fn flat_scenario() -> Scenario {
    let grid = TerrainGrid::from_fn(20, 20, CELL, |_, _| 0.0).unwrap();
    Scenario {
        name: "flat".into(),
        grid,
        start: GridIndex::new(2, 10),
        goal: GridIndex::new(17, 10),
        config: RunConfig::default(),
    }
}

fn low_scenario() -> Scenario {
    // Gentle rolling terrain, everywhere drivable: the planner should
    // never leave the ground.
    let mut grid = TerrainGrid::synthesize(&SynthSpec {
        kind: SynthKind::RandomSmooth,
        ncols: 30,
        nrows: 30,
        cell_size: CELL,
        amplitude: 25.0,
        seed: 11,
    })
    .unwrap();
    let worst = grid.max_slope();
    let cap = 0.12;
    if worst > cap {
        grid.scale_elevations(cap / worst);
    }
    Scenario {
        name: "low".into(),
        grid,
        start: GridIndex::new(2, 27),
        goal: GridIndex::new(27, 2),
        config: RunConfig::default(),
    }
}

fn high_scenario() -> Scenario {
    // The ridge profile lifted onto a 100 m base and steepened.
    let grid = TerrainGrid::from_fn(48, 21, CELL, |x, _| {
        100.0 + 1.2 * ridge_elevation(x / CELL, 12.0)
    })
    .unwrap();
    let mut config = RunConfig::default();
    apply_all(
        &mut config,
        &[("mobility.m_index", "0.15"), ("mobility.turn_weight", "0.25")],
    );
    Scenario {
        name: "high".into(),
        grid,
        start: GridIndex::new(2, 10),
        goal: GridIndex::new(45, 10),
        config,
    }
}

fn composite_scenario() -> Scenario {
    // Flat lowland, the ridge band, then an undulating elevated plain.
    let grid = TerrainGrid::from_fn(48, 21, CELL, |x, y| {
        let u = x / CELL;
        let base = ridge_elevation(u, 12.0);
        if u >= 32.0 {
            base + 1.5 * (x / 50.0).sin() * (y / 45.0).cos()
        } else {
            base
        }
    })
    .unwrap();
    let mut config = RunConfig::default();
    apply_all(
        &mut config,
        &[("mobility.m_index", "0.15"), ("mobility.turn_weight", "0.25")],
    );
    Scenario {
        name: "composite".into(),
        grid,
        start: GridIndex::new(2, 10),
        goal: GridIndex::new(45, 10),
        config,
    }
}

pub const BUILTIN_NAMES: &[&str] = &["flat", "low", "ridge", "sloped_ridge", "high", "composite"];

pub fn builtin_scenario(name: &str) -> Result<Scenario, ScenarioError> {
    match name {
        "flat" => Ok(flat_scenario()),
        "low" => Ok(low_scenario()),
        "ridge" => Ok(ridge_scenario()),
        "sloped_ridge" => Ok(sloped_ridge_scenario()),
        "high" => Ok(high_scenario()),
        "composite" => Ok(composite_scenario()),
        other => Err(ScenarioError::UnknownBuiltin(other.to_string())),
    }
}

/// Every bundled scenario, in a fixed order.
pub fn bundled_scenarios() -> Vec<Scenario> {
    BUILTIN_NAMES
        .iter()
        .map(|n| builtin_scenario(n).expect("builtin"))
        .collect()
}

fn parse_cell(key: &str, value: &str) -> Result<GridIndex, ScenarioError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    let bad = || ScenarioError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    };
    if parts.len() != 2 {
        return Err(bad());
    }
    let col = parts[0].parse().map_err(|_| bad())?;
    let row = parts[1].parse().map_err(|_| bad())?;
    Ok(GridIndex::new(col, row))
}

/// Loads a scenario from a flat key=value file.
///
/// Recognized keys: `scenario.name`, `scenario.start`, `scenario.goal`,
/// `terrain.file`, `terrain.builtin`, `terrain.synth.*`; every other key is
/// passed through to the run configuration.
pub fn load_scenario_file(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_scenario_str(&text, path.parent())
}

pub fn load_scenario_str(text: &str, base_dir: Option<&Path>) -> Result<Scenario, ScenarioError> {
    let map = kv_map(text)?;
    let mut name = None;
    let mut start = None;
    let mut goal = None;
    let mut terrain_file = None;
    let mut terrain_builtin = None;
    let mut synth_kind = None;
    let mut synth_cols = None;
    let mut synth_rows = None;
    let mut synth_cell = CELL;
    let mut synth_amplitude = 0.0;
    let mut synth_seed = 0u64;
    let mut config = RunConfig::default();

    let bad = |key: &str, value: &str| ScenarioError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    };

    for (key, value) in &map {
        match key.as_str() {
            "scenario.name" => name = Some(value.clone()),
            "scenario.start" => start = Some(parse_cell(key, value)?),
            "scenario.goal" => goal = Some(parse_cell(key, value)?),
            "terrain.file" => terrain_file = Some(value.clone()),
            "terrain.builtin" => terrain_builtin = Some(value.clone()),
            "terrain.synth.kind" => {
                synth_kind = Some(value.parse::<SynthKind>().map_err(|_| bad(key, value))?)
            }
            "terrain.synth.cols" => synth_cols = Some(value.parse().map_err(|_| bad(key, value))?),
            "terrain.synth.rows" => synth_rows = Some(value.parse().map_err(|_| bad(key, value))?),
            "terrain.synth.cell_size" => synth_cell = value.parse().map_err(|_| bad(key, value))?,
            "terrain.synth.amplitude" => {
                synth_amplitude = value.parse().map_err(|_| bad(key, value))?
            }
            "terrain.synth.seed" => synth_seed = value.parse().map_err(|_| bad(key, value))?,
            other => config.apply(other, value)?,
        }
    }

    // A builtin reference provides terrain, endpoints and overrides, which
    // the file may then override further.
    if let Some(builtin) = terrain_builtin {
        let mut sc = builtin_scenario(&builtin)?;
        for (key, value) in &map {
            if !key.starts_with("scenario.") && !key.starts_with("terrain.") {
                sc.config.apply(key, value)?;
            }
        }
        if let Some(n) = name {
            sc.name = n;
        }
        if let Some(s) = start {
            sc.start = s;
        }
        if let Some(g) = goal {
            sc.goal = g;
        }
        return Ok(sc);
    }

    let grid = if let Some(file) = terrain_file {
        let resolved = match base_dir {
            Some(dir) if !Path::new(&file).is_absolute() => dir.join(&file),
            _ => Path::new(&file).to_path_buf(),
        };
        let text = std::fs::read_to_string(&resolved).map_err(|source| ScenarioError::Io {
            path: resolved.display().to_string(),
            source,
        })?;
        TerrainGrid::parse_ascii(std::io::Cursor::new(text))?
    } else if let Some(kind) = synth_kind {
        TerrainGrid::synthesize(&SynthSpec {
            kind,
            ncols: synth_cols.ok_or(ScenarioError::MissingKey("terrain.synth.cols"))?,
            nrows: synth_rows.ok_or(ScenarioError::MissingKey("terrain.synth.rows"))?,
            cell_size: synth_cell,
            amplitude: synth_amplitude,
            seed: synth_seed,
        })?
    } else {
        return Err(ScenarioError::MissingKey(
            "terrain.file, terrain.builtin or terrain.synth.kind",
        ));
    };

    Ok(Scenario {
        name: name.ok_or(ScenarioError::MissingKey("scenario.name"))?,
        grid,
        start: start.ok_or(ScenarioError::MissingKey("scenario.start"))?,
        goal: goal.ok_or(ScenarioError::MissingKey("scenario.goal"))?,
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_resolve_and_validate() {
        for sc in bundled_scenarios() {
            assert_ne!(sc.start, sc.goal, "{}", sc.name);
            let resolved = sc.config.resolve(&sc.grid);
            assert!(resolved.is_ok(), "{}: {:?}", sc.name, resolved.err());
        }
    }

    #[test]
    fn scenario_file_with_synth_terrain() {
        let text = "scenario.name = demo\nscenario.start = 1,2\nscenario.goal = 8,9\n\
                    terrain.synth.kind = flat\nterrain.synth.cols = 10\nterrain.synth.rows = 12\n\
                    terrain.synth.amplitude = 3\nbas.alpha = 42\n";
        let sc = load_scenario_str(text, None).unwrap();
        assert_eq!(sc.name, "demo");
        assert_eq!(sc.grid.ncols(), 10);
        assert_eq!(sc.grid.nrows(), 12);
        assert_eq!(sc.start, GridIndex::new(1, 2));
        assert_eq!(sc.config.alpha, 42.0);
    }

    #[test]
    fn scenario_file_with_builtin_and_overrides() {
        let text = "terrain.builtin = ridge\nbas.iterations = 9\n";
        let sc = load_scenario_str(text, None).unwrap();
        assert_eq!(sc.name, "ridge");
        assert_eq!(sc.config.iterations, 9);
        // Builtin mobility overrides stay intact.
        assert_eq!(sc.config.mobility.m_index, 0.15);
    }

    #[test]
    fn missing_pieces_are_reported() {
        assert!(matches!(
            load_scenario_str("scenario.name = x\n", None),
            Err(ScenarioError::MissingKey(_))
        ));
        assert!(matches!(
            load_scenario_str("terrain.builtin = nope\n", None),
            Err(ScenarioError::UnknownBuiltin(_))
        ));
        let text = "scenario.name = x\nterrain.synth.kind = flat\nterrain.synth.cols = 10\n";
        assert!(matches!(
            load_scenario_str(text, None),
            Err(ScenarioError::MissingKey("terrain.synth.rows"))
        ));
    }
}
