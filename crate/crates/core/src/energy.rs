//! Segment energy model and battery state-of-charge ledger.
//!
//! A segment's energy is the sum of a hover term (induced rotor power while
//! flying, a fixed standby cost while driving), a move term (climb potential
//! and air drag while flying, rolling friction and drag while driving) and,
//! when the segment leaves a mode switch, a one-off transform cost for
//! folding or expanding the wings plus ground-effect losses.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("battery exhausted: needed {needed:.1} J, {available:.1} J available")]
    BatteryExhausted { needed: f64, available: f64 },
    #[error("flight SOC delta requested while not in flight")]
    NotInFlight,
    #[error("invalid energy parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Drive,
    Fly,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Drive => write!(f, "drive"),
            Mode::Fly => write!(f, "fly"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "drive" => Ok(Mode::Drive),
            "fly" => Ok(Mode::Fly),
            other => Err(format!("unknown mode {other:?} (expected drive|fly)")),
        }
    }
}

/// Physical constants of the platform and its environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Air density, kg/m^3.
    pub rho: f64,
    /// Robot mass, kg.
    pub mass: f64,
    /// Propeller radius, m.
    pub rotor_radius: f64,
    /// Number of propellers.
    pub rotor_count: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    /// Motor efficiency, (0, 1].
    pub eta: f64,
    /// Ground friction coefficient.
    pub mu: f64,
    /// Air drag coefficient.
    pub c_d: f64,
    /// Cruise speed while flying, m/s.
    pub v_fly: f64,
    /// Cruise speed while driving, m/s.
    pub v_drive: f64,
    /// Windward area while flying, m^2.
    pub a_fly: f64,
    /// Windward area while driving, m^2.
    pub a_drive: f64,
    /// Fixed hover-slot cost per drive segment, J.
    pub standby_energy: f64,
    /// Wing fold/expand cost per mode switch, J.
    pub e_expand_fold: f64,
    /// Ground-effect cost per mode switch, J.
    pub e_bodeneffekt: f64,
    /// Clamp the climb term at zero on descent (the platform cannot
    /// regenerate energy while descending). Disable for sensitivity studies.
    pub clamp_descent: bool,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            rho: 1.2,
            mass: 39.5,
            rotor_radius: 0.4191,
            rotor_count: 6.0,
            gravity: 9.81,
            eta: 0.58,
            mu: 0.06,
            c_d: 1.5,
            v_fly: 2.0,
            v_drive: 1.0,
            a_fly: 0.6,
            a_drive: 0.05,
            standby_energy: 100.0,
            e_expand_fold: 500.0,
            e_bodeneffekt: 300.0,
            clamp_descent: true,
        }
    }
}

/// One grid move: path length `delta_d` (includes the vertical component),
/// signed altitude change `delta_h`, and the locomotion mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub delta_d: f64,
    pub delta_h: f64,
    pub mode: Mode,
}

impl Segment {
    pub fn new(delta_d: f64, delta_h: f64, mode: Mode) -> Self {
        Segment {
            delta_d,
            delta_h,
            mode,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let positive = [
            ("rho", self.rho),
            ("mass", self.mass),
            ("rotor_radius", self.rotor_radius),
            ("rotor_count", self.rotor_count),
            ("gravity", self.gravity),
            ("eta", self.eta),
            ("mu", self.mu),
            ("c_d", self.c_d),
            ("v_fly", self.v_fly),
            ("v_drive", self.v_drive),
            ("a_fly", self.a_fly),
            ("a_drive", self.a_drive),
            ("standby_energy", self.standby_energy),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(EnergyError::InvalidParams(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        if self.eta > 1.0 {
            return Err(EnergyError::InvalidParams(format!(
                "eta must be <= 1, got {}",
                self.eta
            )));
        }
        for (name, v) in [
            ("e_expand_fold", self.e_expand_fold),
            ("e_bodeneffekt", self.e_bodeneffekt),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(EnergyError::InvalidParams(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Induced hover cost while flying; a fixed standby constant per segment
    /// while driving.
    pub fn hover_energy(&self, seg: &Segment) -> f64 {
        match seg.mode {
            Mode::Fly => {
                let thrust_per_rotor = self.mass * self.gravity / self.rotor_count;
                (1.0 / (2.0 * std::f64::consts::PI * self.rho)).sqrt()
                    * thrust_per_rotor.powf(1.5)
                    * (self.rotor_count / self.rotor_radius)
                    * seg.delta_d
                    / (self.eta * self.v_fly)
            }
            Mode::Drive => self.standby_energy,
        }
    }

    /// Climb-or-friction cost plus air drag.
    pub fn move_energy(&self, seg: &Segment) -> f64 {
        match seg.mode {
            Mode::Fly => {
                let climb = self.mass * self.gravity * seg.delta_h;
                let climb = if self.clamp_descent { climb.max(0.0) } else { climb };
                climb + 0.5 * self.rho * self.a_fly * self.c_d * self.v_fly.powi(2) * seg.delta_d
            }
            Mode::Drive => {
                self.mu * self.mass * self.gravity * seg.delta_d
                    + 0.5 * self.rho * self.a_drive * self.c_d * self.v_drive.powi(2) * seg.delta_d
            }
        }
    }

    /// One-off cost of a mode switch.
    pub fn transform_energy(&self) -> f64 {
        self.e_expand_fold + self.e_bodeneffekt
    }

    /// Full per-segment cost; `switched` charges the transform term once.
    pub fn segment_energy(&self, seg: &Segment, switched: bool) -> f64 {
        let transform = if switched { self.transform_energy() } else { 0.0 };
        self.hover_energy(seg) + self.move_energy(seg) + transform
    }

    /// Lower bound on fly-mode energy per meter of path length (level
    /// flight: hover plus drag). Used to scale distance heuristics into
    /// joules without losing admissibility.
    pub fn fly_rate_per_m(&self) -> f64 {
        let unit = Segment::new(1.0, 0.0, Mode::Fly);
        self.hover_energy(&unit) + self.move_energy(&unit)
    }

    /// Drive-mode friction-plus-drag cost per meter (excludes the
    /// per-segment standby constant).
    pub fn drive_rate_per_m(&self) -> f64 {
        self.mu * self.mass * self.gravity
            + 0.5 * self.rho * self.a_drive * self.c_d * self.v_drive.powi(2)
    }
}

/// Running battery ledger. `soc` is derived from the consumed total so the
/// SOC identity holds exactly after every debit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    /// Total capacity Q, J.
    pub q_capacity: f64,
    /// Initial charge Q0, J.
    pub q_initial: f64,
    /// Energy consumed so far, J.
    pub consumed: f64,
    /// SOC recorded at the most recent ground-to-fly switch.
    pub soc_at_switch: Option<f64>,
    /// Per-flight SOC expenditure limit.
    pub soc_ref: f64,
}

impl BatteryState {
    pub fn new(q_capacity: f64, q_initial: f64, soc_ref: f64) -> Result<Self, EnergyError> {
        if !(q_capacity > 0.0) || !(q_initial > 0.0) {
            return Err(EnergyError::InvalidParams(
                "battery capacity and initial charge must be positive".into(),
            ));
        }
        if !(soc_ref > 0.0 && soc_ref < 1.0) {
            return Err(EnergyError::InvalidParams(format!(
                "soc_ref must be in (0, 1), got {soc_ref}"
            )));
        }
        Ok(BatteryState {
            q_capacity,
            q_initial,
            consumed: 0.0,
            soc_at_switch: None,
            soc_ref,
        })
    }

    pub fn soc(&self) -> f64 {
        (self.q_initial - self.consumed) / self.q_capacity
    }

    /// Remaining usable energy in joules.
    pub fn remaining(&self) -> f64 {
        self.q_initial - self.consumed
    }

    pub fn debit(&mut self, joules: f64) -> Result<(), EnergyError> {
        debug_assert!(joules >= 0.0, "debit must be non-negative");
        if joules > self.remaining() {
            return Err(EnergyError::BatteryExhausted {
                needed: joules,
                available: self.remaining(),
            });
        }
        self.consumed += joules;
        Ok(())
    }

    /// Starts the per-flight SOC record at a ground-to-fly switch.
    pub fn begin_flight(&mut self) {
        self.soc_at_switch = Some(self.soc());
    }

    /// Clears the per-flight record after landing.
    pub fn end_flight(&mut self) {
        self.soc_at_switch = None;
    }

    pub fn in_flight(&self) -> bool {
        self.soc_at_switch.is_some()
    }

    /// SOC spent since the most recent takeoff.
    pub fn flight_soc_delta(&self) -> Result<f64, EnergyError> {
        match self.soc_at_switch {
            Some(at_switch) => Ok(at_switch - self.soc()),
            None => Err(EnergyError::NotInFlight),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Hand-evaluated from the hover formula with the default constants:
    // sqrt(1/(2*pi*1.2)) * (39.5*9.81/6)^1.5 * (6/0.4191) * 12/(0.58*2).
    const HOVER_FLY_12M: f64 = 27992.94353340457;
    // Hand-evaluated drive move cost for 12 m:
    // 0.06*39.5*9.81*12 + 0.5*1.2*0.05*1.5*1^2*12 = 278.9964 + 0.54.
    const MOVE_DRIVE_12M: f64 = 279.5364;

    #[test]
    fn hover_energy_matches_hand_values() {
        let p = EnergyParams::default();
        let fly = Segment::new(12.0, 0.0, Mode::Fly);
        assert_relative_eq!(p.hover_energy(&fly), HOVER_FLY_12M, max_relative = 1e-9);
        let zero = Segment::new(0.0, 0.0, Mode::Fly);
        assert_eq!(p.hover_energy(&zero), 0.0);
        // Drive-mode hover slot is the Standby constant, exactly.
        let drive = Segment::new(57.0, 3.0, Mode::Drive);
        assert_eq!(p.hover_energy(&drive), 100.0);
    }

    #[test]
    fn move_energy_matches_hand_values() {
        let p = EnergyParams::default();
        let drive = Segment::new(12.0, 0.0, Mode::Drive);
        assert_relative_eq!(p.move_energy(&drive), MOVE_DRIVE_12M, max_relative = 1e-9);
        assert_eq!(p.move_energy(&Segment::new(0.0, 0.0, Mode::Fly)), 0.0);
        assert_eq!(p.move_energy(&Segment::new(0.0, 0.0, Mode::Drive)), 0.0);
        // Descent clamp: no credit for losing altitude.
        assert_eq!(p.move_energy(&Segment::new(0.0, -10.0, Mode::Fly)), 0.0);
        let unclamped = EnergyParams {
            clamp_descent: false,
            ..EnergyParams::default()
        };
        assert!(unclamped.move_energy(&Segment::new(0.0, -10.0, Mode::Fly)) < 0.0);
    }

    #[test]
    fn transform_and_segment_sums() {
        let p = EnergyParams {
            e_expand_fold: 500.0,
            e_bodeneffekt: 300.0,
            ..EnergyParams::default()
        };
        assert_eq!(p.transform_energy(), 800.0);
        let none = EnergyParams {
            e_expand_fold: 0.0,
            e_bodeneffekt: 0.0,
            ..EnergyParams::default()
        };
        assert_eq!(none.transform_energy(), 0.0);

        let zero_drive = Segment::new(0.0, 0.0, Mode::Drive);
        assert_eq!(p.segment_energy(&zero_drive, false), 100.0);
        assert_eq!(p.segment_energy(&zero_drive, true), 900.0);

        let fly = Segment::new(12.0, 0.0, Mode::Fly);
        let expected = p.hover_energy(&fly) + p.move_energy(&fly);
        assert_eq!(p.segment_energy(&fly, false), expected);
    }

    #[test]
    fn linearity_in_distance() {
        let p = EnergyParams::default();
        for d in [0.5, 3.0, 12.0, 97.0] {
            let one = Segment::new(d, 0.0, Mode::Fly);
            let two = Segment::new(2.0 * d, 0.0, Mode::Fly);
            assert_relative_eq!(
                p.hover_energy(&two),
                2.0 * p.hover_energy(&one),
                max_relative = 1e-12
            );
            let one = Segment::new(d, 0.0, Mode::Drive);
            let two = Segment::new(2.0 * d, 0.0, Mode::Drive);
            assert_relative_eq!(
                p.move_energy(&two),
                2.0 * p.move_energy(&one),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn hover_dwarfs_standby() {
        // The premise that makes mode choice meaningful: flying a cell-sized
        // hop costs over two orders of magnitude more than the drive-mode
        // hover slot.
        let p = EnergyParams::default();
        let fly = Segment::new(12.0, 0.0, Mode::Fly);
        assert!(p.hover_energy(&fly) > 100.0 * p.standby_energy);
    }

    #[test]
    fn battery_ledger() {
        let mut b = BatteryState::new(1e6, 1e6, 0.15).unwrap();
        assert_eq!(b.soc(), 1.0);
        b.debit(1e5).unwrap();
        assert_relative_eq!(b.soc(), 0.9, max_relative = 1e-12);
        let before = b.clone();
        b.debit(0.0).unwrap();
        assert_eq!(b, before);
        let err = b.debit(2e6).unwrap_err();
        assert!(matches!(err, EnergyError::BatteryExhausted { .. }));
        // State unchanged after a failed debit.
        assert_eq!(b, before);
    }

    #[test]
    fn flight_soc_delta_tracking() {
        let mut b = BatteryState::new(1e6, 1e6, 0.15).unwrap();
        assert_eq!(b.flight_soc_delta(), Err(EnergyError::NotInFlight));
        b.debit(1e5).unwrap();
        b.begin_flight();
        assert_eq!(b.flight_soc_delta().unwrap(), 0.0);
        b.debit(5e4).unwrap();
        assert_relative_eq!(b.flight_soc_delta().unwrap(), 0.05, max_relative = 1e-12);
        b.end_flight();
        assert_eq!(b.flight_soc_delta(), Err(EnergyError::NotInFlight));
    }

    #[test]
    fn params_validation() {
        assert!(EnergyParams::default().validate().is_ok());
        let bad = EnergyParams {
            eta: 1.2,
            ..EnergyParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = EnergyParams {
            mass: 0.0,
            ..EnergyParams::default()
        };
        assert!(bad.validate().is_err());
        assert!(BatteryState::new(1e6, 1e6, 1.5).is_err());
    }
}
