//! Robot kinematic parameters and the timing rules derived from them.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Grid-aligned robot heading. Discriminants count quarter turns
/// counter-clockwise from east.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heading {
    East = 0,
    North = 1,
    West = 2,
    South = 3,
}

impl Heading {
    pub fn from_quarter_turns(q: i64) -> Self {
        match q.rem_euclid(4) {
            0 => Heading::East,
            1 => Heading::North,
            2 => Heading::West,
            _ => Heading::South,
        }
    }

    /// Orientation in radians, in `[0, 2π)`.
    pub fn radians(self) -> f64 {
        self as u8 as f64 * FRAC_PI_2
    }

    /// Nearest grid heading for an arbitrary orientation.
    pub fn from_radians(rad: f64) -> Self {
        Self::from_quarter_turns((rad / FRAC_PI_2).round() as i64)
    }

    /// Signed turn in degrees, positive counter-clockwise (left), in `(-180, 180]`.
    pub fn turn_to(self, target: Heading) -> i32 {
        match (target as i32 - self as i32).rem_euclid(4) {
            0 => 0,
            1 => 90,
            2 => 180,
            _ => -90,
        }
    }

    pub fn turned(self, degrees: i32) -> Self {
        Self::from_quarter_turns(self as i64 + i64::from(degrees / 90))
    }
}

impl fmt::Display for Heading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Heading::East => "E",
            Heading::North => "N",
            Heading::West => "W",
            Heading::South => "S",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiftKind {
    Pickup,
    Setdown,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Kinematics {
    /// Maximum travel speed in m/s.
    pub v_max: f64,
    /// Seconds for a full 360° rotation in place.
    pub t_full_turn: f64,
    pub t_pickup: f64,
    pub t_setdown: f64,
}

impl Default for Kinematics {
    fn default() -> Self {
        Self {
            v_max: 0.05,
            t_full_turn: 3.0,
            t_pickup: 3.0,
            t_setdown: 3.0,
        }
    }
}

impl Kinematics {
    pub fn with_lift(mut self, seconds: f64) -> Self {
        self.t_pickup = seconds;
        self.t_setdown = seconds;
        self
    }

    pub fn edge_duration(&self, spacing_m: f64) -> f64 {
        spacing_m / self.v_max
    }

    pub fn turn_duration(&self, degrees: i32) -> f64 {
        self.t_full_turn * f64::from(degrees.unsigned_abs()) / 360.0
    }

    pub fn lift_dwell(&self, kind: LiftKind) -> f64 {
        match kind {
            LiftKind::Pickup => self.t_pickup,
            LiftKind::Setdown => self.t_setdown,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.v_max.is_finite() && self.v_max > 0.0) {
            return Err(format!("v_max must be positive, got {}", self.v_max));
        }
        for (name, v) in [
            ("t_full_turn", self.t_full_turn),
            ("t_pickup", self.t_pickup),
            ("t_setdown", self.t_setdown),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_timings() {
        let k = Kinematics::default();
        assert_eq!(k.edge_duration(1.0), 20.0);
        assert_eq!(k.turn_duration(90), 0.75);
        assert_eq!(k.turn_duration(-90), 0.75);
        assert_eq!(k.turn_duration(180), 1.5);
        assert_eq!(k.lift_dwell(LiftKind::Pickup), 3.0);
        assert_eq!(k.lift_dwell(LiftKind::Setdown), 3.0);
    }

    #[test]
    fn lift_passthrough() {
        let k = Kinematics::default().with_lift(0.0);
        assert_eq!(k.lift_dwell(LiftKind::Pickup), 0.0);
        let k = Kinematics {
            t_pickup: 2.0,
            t_setdown: 4.0,
            ..Kinematics::default()
        };
        assert_eq!(k.lift_dwell(LiftKind::Pickup), 2.0);
        assert_eq!(k.lift_dwell(LiftKind::Setdown), 4.0);
    }

    #[test]
    fn turns() {
        assert_eq!(Heading::East.turn_to(Heading::North), 90);
        assert_eq!(Heading::East.turn_to(Heading::South), -90);
        assert_eq!(Heading::East.turn_to(Heading::West), 180);
        assert_eq!(Heading::South.turn_to(Heading::East), 90);
        for h in [Heading::East, Heading::North, Heading::West, Heading::South] {
            for t in [Heading::East, Heading::North, Heading::West, Heading::South] {
                assert_eq!(h.turned(h.turn_to(t)), t);
            }
            assert_eq!(Heading::from_radians(h.radians()), h);
        }
    }
}
