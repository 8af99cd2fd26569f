//! Run configuration: defaults, flat `section.key=value` files, environment
//! overrides and validation.
//!
//! Precedence, lowest to highest: built-in defaults, config file, `AGPLAN_*`
//! environment variables, explicit `--set` overrides. Flight and optimizer
//! distances default relative to the grid's cell size and are resolved
//! against a concrete terrain before planning.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::energy::{BatteryState, EnergyParams};
use crate::flight::FlightParams;
use crate::ground::MobilityLimits;
use crate::switch::BasParams;
use crate::terrain::TerrainGrid;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {value:?} ({reason})")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("malformed config line {line}: {text:?} (expected key=value)")]
    BadLine { line: usize, text: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Planner-level knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerSettings {
    /// Hard cap on mode switches before giving up.
    pub max_switches: u32,
    /// Run the switching-point optimizer (turn off to plan from the raw
    /// flagged points).
    pub bas_enabled: bool,
    /// Samples per leg when smoothing for export.
    pub smooth_samples: usize,
    /// Forces the first takeoff point to a specific cell; used by the
    /// comparison harness to replay other optimizers' choices.
    pub first_switch_override: Option<crate::terrain::GridIndex>,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        PlannerSettings {
            max_switches: 20,
            bas_enabled: true,
            smooth_samples: 32,
            first_switch_override: None,
        }
    }
}

/// Unresolved configuration; cell-relative values stay `None` until a grid
/// is known.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub energy: EnergyParams,
    pub battery_capacity: f64,
    pub battery_initial: f64,
    pub soc_ref: f64,
    pub mobility: MobilityLimits,
    pub c_escape: Option<f64>,
    pub c_landing: Option<f64>,
    pub epsilon: Option<f64>,
    pub z_ceiling: Option<f64>,
    pub near_goal_radius: Option<f64>,
    pub voxel_size: Option<f64>,
    pub antennae_distance: Option<f64>,
    pub step: Option<f64>,
    pub step_decay: f64,
    pub iterations: u32,
    pub alpha: f64,
    pub w_a: f64,
    pub w_b: f64,
    pub w_c: f64,
    pub search_radius: Option<f64>,
    pub alpha_soc_c0: f64,
    pub alpha_soc_c1: f64,
    pub seed: u64,
    pub planner: PlannerSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            energy: EnergyParams::default(),
            battery_capacity: 3.6e6,
            battery_initial: 3.6e6,
            soc_ref: 0.15,
            mobility: MobilityLimits::default(),
            c_escape: None,
            c_landing: None,
            epsilon: None,
            z_ceiling: None,
            near_goal_radius: None,
            voxel_size: None,
            antennae_distance: None,
            step: None,
            step_decay: 0.95,
            iterations: 50,
            alpha: 500.0,
            w_a: 1.0,
            w_b: 1.0,
            w_c: 2.0,
            search_radius: None,
            alpha_soc_c0: 1.0,
            alpha_soc_c1: 0.0,
            seed: 1,
            planner: PlannerSettings::default(),
        }
    }
}

/// Fully resolved configuration bound to one terrain grid.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub energy: EnergyParams,
    pub battery: BatteryState,
    pub mobility: MobilityLimits,
    pub flight: FlightParams,
    pub bas: BasParams,
    pub planner: PlannerSettings,
    pub seed: u64,
}

pub const KNOWN_KEYS: &[&str] = &[
    "energy.rho",
    "energy.m",
    "energy.r",
    "energy.x",
    "energy.g",
    "energy.eta",
    "energy.mu",
    "energy.c_d",
    "energy.v_fly",
    "energy.v_drive",
    "energy.a_fly",
    "energy.a_drive",
    "energy.standby",
    "energy.e_expand_fold",
    "energy.e_bodeneffekt",
    "energy.clamp_descent",
    "battery.q_capacity",
    "battery.q_initial",
    "battery.soc_ref",
    "mobility.gx_min",
    "mobility.gx_max",
    "mobility.gy_min",
    "mobility.gy_max",
    "mobility.gz_min",
    "mobility.gz_max",
    "mobility.m_index",
    "mobility.count_threshold",
    "mobility.turn_weight",
    "flight.c_escape",
    "flight.c_landing",
    "flight.epsilon",
    "flight.z_ceiling",
    "flight.near_goal_radius",
    "flight.voxel_size",
    "bas.antennae_distance",
    "bas.step",
    "bas.step_decay",
    "bas.iterations",
    "bas.alpha",
    "bas.w_a",
    "bas.w_b",
    "bas.w_c",
    "bas.search_radius",
    "bas.alpha_soc_c0",
    "bas.alpha_soc_c1",
    "planner.max_switches",
    "planner.bas_enabled",
    "planner.smooth_samples",
    "seed",
];

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: "expected a boolean".to_string(),
        }),
    }
}

impl RunConfig {
    /// Applies a single `section.key=value` override.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "energy.rho" => self.energy.rho = parse_as(key, value)?,
            "energy.m" => self.energy.mass = parse_as(key, value)?,
            "energy.r" => self.energy.rotor_radius = parse_as(key, value)?,
            "energy.x" => self.energy.rotor_count = parse_as(key, value)?,
            "energy.g" => self.energy.gravity = parse_as(key, value)?,
            "energy.eta" => self.energy.eta = parse_as(key, value)?,
            "energy.mu" => self.energy.mu = parse_as(key, value)?,
            "energy.c_d" => self.energy.c_d = parse_as(key, value)?,
            "energy.v_fly" => self.energy.v_fly = parse_as(key, value)?,
            "energy.v_drive" => self.energy.v_drive = parse_as(key, value)?,
            "energy.a_fly" => self.energy.a_fly = parse_as(key, value)?,
            "energy.a_drive" => self.energy.a_drive = parse_as(key, value)?,
            "energy.standby" => self.energy.standby_energy = parse_as(key, value)?,
            "energy.e_expand_fold" => self.energy.e_expand_fold = parse_as(key, value)?,
            "energy.e_bodeneffekt" => self.energy.e_bodeneffekt = parse_as(key, value)?,
            "energy.clamp_descent" => self.energy.clamp_descent = parse_bool(key, value)?,
            "battery.q_capacity" => self.battery_capacity = parse_as(key, value)?,
            "battery.q_initial" => self.battery_initial = parse_as(key, value)?,
            "battery.soc_ref" => self.soc_ref = parse_as(key, value)?,
            "mobility.gx_min" => self.mobility.gx_min = parse_as(key, value)?,
            "mobility.gx_max" => self.mobility.gx_max = parse_as(key, value)?,
            "mobility.gy_min" => self.mobility.gy_min = parse_as(key, value)?,
            "mobility.gy_max" => self.mobility.gy_max = parse_as(key, value)?,
            "mobility.gz_min" => self.mobility.gz_min = parse_as(key, value)?,
            "mobility.gz_max" => self.mobility.gz_max = parse_as(key, value)?,
            "mobility.m_index" => self.mobility.m_index = parse_as(key, value)?,
            "mobility.count_threshold" => self.mobility.count_threshold = parse_as(key, value)?,
            "mobility.turn_weight" => self.mobility.turn_weight = parse_as(key, value)?,
            "flight.c_escape" => self.c_escape = Some(parse_as(key, value)?),
            "flight.c_landing" => self.c_landing = Some(parse_as(key, value)?),
            "flight.epsilon" => self.epsilon = Some(parse_as(key, value)?),
            "flight.z_ceiling" => self.z_ceiling = Some(parse_as(key, value)?),
            "flight.near_goal_radius" => self.near_goal_radius = Some(parse_as(key, value)?),
            "flight.voxel_size" => self.voxel_size = Some(parse_as(key, value)?),
            "bas.antennae_distance" => self.antennae_distance = Some(parse_as(key, value)?),
            "bas.step" => self.step = Some(parse_as(key, value)?),
            "bas.step_decay" => self.step_decay = parse_as(key, value)?,
            "bas.iterations" => self.iterations = parse_as(key, value)?,
            "bas.alpha" => self.alpha = parse_as(key, value)?,
            "bas.w_a" => self.w_a = parse_as(key, value)?,
            "bas.w_b" => self.w_b = parse_as(key, value)?,
            "bas.w_c" => self.w_c = parse_as(key, value)?,
            "bas.search_radius" => self.search_radius = Some(parse_as(key, value)?),
            "bas.alpha_soc_c0" => self.alpha_soc_c0 = parse_as(key, value)?,
            "bas.alpha_soc_c1" => self.alpha_soc_c1 = parse_as(key, value)?,
            "planner.max_switches" => self.planner.max_switches = parse_as(key, value)?,
            "planner.bas_enabled" => self.planner.bas_enabled = parse_bool(key, value)?,
            "planner.smooth_samples" => self.planner.smooth_samples = parse_as(key, value)?,
            "seed" => self.seed = parse_as(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Parses a flat key=value file. `#` starts a comment; blank lines are
    /// skipped. Unknown keys are rejected.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.apply_str(&text)
    }

    pub fn apply_str(&mut self, text: &str) -> Result<(), ConfigError> {
        for (key, value) in parse_kv_lines(text)? {
            self.apply(&key, &value)?;
        }
        Ok(())
    }

    /// Applies `AGPLAN_<SECTION>_<KEY>` environment overrides for every
    /// known key.
    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        for key in KNOWN_KEYS {
            let env_name = format!("AGPLAN_{}", key.replace('.', "_").to_ascii_uppercase());
            if let Ok(value) = std::env::var(&env_name) {
                self.apply(key, &value)?;
            }
        }
        Ok(())
    }

    /// Binds cell-relative defaults to a grid and validates everything.
    pub fn resolve(&self, grid: &TerrainGrid) -> Result<ResolvedConfig, ConfigError> {
        let cell = grid.cell_size();
        let voxel = self.voxel_size.unwrap_or(cell);
        let flight = FlightParams {
            c_escape: self.c_escape.unwrap_or(2.0 * cell),
            c_landing: self.c_landing.unwrap_or(10.0 * cell),
            epsilon: self.epsilon.unwrap_or(voxel / 2.0),
            z_ceiling: self
                .z_ceiling
                .unwrap_or_else(|| grid.max_elevation() + 10.0 * voxel),
            near_goal_radius: self.near_goal_radius.unwrap_or(15.0 * cell),
            voxel_size: voxel,
        };
        let bas = BasParams {
            antennae_distance: self.antennae_distance.unwrap_or(4.0 * cell),
            step: self.step.unwrap_or(2.0 * cell),
            step_decay: self.step_decay,
            iterations: self.iterations,
            alpha: self.alpha,
            w_a: self.w_a,
            w_b: self.w_b,
            w_c: self.w_c,
            seed: self.seed,
            search_radius: self.search_radius.unwrap_or(8.0 * cell),
            alpha_soc_c0: self.alpha_soc_c0,
            alpha_soc_c1: self.alpha_soc_c1,
        };

        self.energy
            .validate()
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
        let battery = BatteryState::new(self.battery_capacity, self.battery_initial, self.soc_ref)
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
        self.mobility.validate().map_err(ConfigError::Validation)?;
        flight.validate().map_err(ConfigError::Validation)?;
        bas.validate().map_err(ConfigError::Validation)?;
        if flight.z_ceiling <= grid.max_elevation() {
            return Err(ConfigError::Validation(format!(
                "flight.z_ceiling ({}) must exceed the terrain maximum ({})",
                flight.z_ceiling,
                grid.max_elevation()
            )));
        }
        if self.planner.smooth_samples < 2 {
            return Err(ConfigError::Validation(
                "planner.smooth_samples must be >= 2".into(),
            ));
        }

        Ok(ResolvedConfig {
            energy: self.energy,
            battery,
            mobility: self.mobility,
            flight,
            bas,
            planner: self.planner,
            seed: self.seed,
        })
    }
}

/// Splits flat key=value text into pairs. `#` starts a comment.
pub fn parse_kv_lines(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::BadLine {
                line: i + 1,
                text: raw.to_string(),
            });
        };
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Groups raw pairs into a map, keeping the last value per key.
pub fn kv_map(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    Ok(parse_kv_lines(text)?.into_iter().collect())
}
