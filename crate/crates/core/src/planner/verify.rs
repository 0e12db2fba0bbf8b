//! Independent safety checks for sets of executed paths, and the scenario
//! dump format consumed by external conflict verifiers.

use std::fmt::Write as _;

use crate::ids::{RobotId, WaypointId};
use crate::planner::{PathStep, TimedPath};

/// Where a robot is at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Position {
    At(WaypointId),
    Between(WaypointId, WaypointId),
}

/// Consecutive legs of one robot merged into a single timeline. The final
/// waypoint is held forever.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub robot: RobotId,
    steps: Vec<PathStep>,
}

impl Trajectory {
    pub fn new(robot: RobotId, first: &TimedPath) -> Self {
        Self {
            robot,
            steps: first.steps().to_vec(),
        }
    }

    /// Appends a leg that starts where the previous one ended.
    pub fn extend(&mut self, leg: &TimedPath) {
        let mut legs = leg.steps().iter();
        if let (Some(last), Some(first)) = (self.steps.last_mut(), leg.steps().first()) {
            if last.waypoint == first.waypoint {
                last.departure = first.departure;
                last.heading_after = first.heading_after;
                legs.next();
            }
        }
        self.steps.extend(legs);
    }

    pub fn steps(&self) -> &[PathStep] {
        &self.steps
    }

    pub fn end_time(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.arrival)
    }

    pub fn position(&self, t: f64) -> Option<Position> {
        let first = self.steps.first()?;
        if t <= first.departure {
            return Some(Position::At(first.waypoint));
        }
        // last step already reached at t
        let k = self.steps.partition_point(|s| s.arrival <= t).saturating_sub(1);
        let here = &self.steps[k];
        match self.steps.get(k + 1) {
            Some(next) if t > here.departure => Some(Position::Between(here.waypoint, next.waypoint)),
            _ => Some(Position::At(here.waypoint)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScanConflict {
    Vertex {
        time: f64,
        waypoint: WaypointId,
        robots: (RobotId, RobotId),
    },
    Swap {
        time: f64,
        edge: (WaypointId, WaypointId),
        robots: (RobotId, RobotId),
    },
}

/// Samples every `resolution` seconds and reports two robots on one waypoint
/// or crossing one edge in opposite directions.
pub fn scan_conflicts(trajectories: &[Trajectory], resolution: f64) -> Vec<ScanConflict> {
    let end = trajectories
        .iter()
        .map(Trajectory::end_time)
        .fold(0.0, f64::max)
        + resolution;
    let start = trajectories
        .iter()
        .filter_map(|t| t.steps().first().map(|s| s.arrival))
        .fold(f64::INFINITY, f64::min);
    if !start.is_finite() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let samples = ((end - start) / resolution).ceil() as u64;
    for i in 0..=samples {
        let t = start + i as f64 * resolution;
        let positions: Vec<_> = trajectories
            .iter()
            .map(|tr| (tr.robot, tr.position(t)))
            .collect();
        for (i, (ra, pa)) in positions.iter().enumerate() {
            for (rb, pb) in &positions[i + 1..] {
                match (pa, pb) {
                    (Some(Position::At(a)), Some(Position::At(b))) if a == b => {
                        out.push(ScanConflict::Vertex {
                            time: t,
                            waypoint: *a,
                            robots: (*ra, *rb),
                        })
                    }
                    (Some(Position::Between(a1, a2)), Some(Position::Between(b1, b2)))
                        if a1 == b2 && a2 == b1 =>
                    {
                        out.push(ScanConflict::Swap {
                            time: t,
                            edge: (*a1, *a2),
                            robots: (*ra, *rb),
                        })
                    }
                    _ => {}
                }
            }
        }
    }
    out
}

/// Pairs of robots whose node dwell intervals `[arrival, departure]` overlap
/// on the same waypoint. Exact counterpart of the sampled scan.
pub fn dwell_overlaps(trajectories: &[Trajectory]) -> Vec<(RobotId, RobotId, WaypointId)> {
    let dwell = |tr: &Trajectory| -> Vec<(WaypointId, f64, f64)> {
        let n = tr.steps().len();
        tr.steps()
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let start = if k == 0 { f64::NEG_INFINITY } else { s.arrival };
                let end = if k + 1 == n { f64::INFINITY } else { s.departure };
                (s.waypoint, start, end)
            })
            .collect()
    };
    let all: Vec<_> = trajectories.iter().map(|t| (t.robot, dwell(t))).collect();
    let mut out = Vec::new();
    for (i, (ra, da)) in all.iter().enumerate() {
        for (rb, db) in &all[i + 1..] {
            for &(wa, sa, ea) in da {
                for &(wb, sb, eb) in db {
                    if wa == wb && sa <= eb && sb <= ea {
                        out.push((*ra, *rb, wa));
                    }
                }
            }
        }
    }
    out
}

/// Largest implied speed over any traversed edge, in m/s.
pub fn max_implied_speed(trajectory: &Trajectory, spacing_m: f64) -> f64 {
    trajectory
        .steps()
        .windows(2)
        .map(|w| spacing_m / (w[1].arrival - w[0].departure))
        .fold(0.0, f64::max)
}

/// `robot,waypoint,arrival,departure` rows, one per visited node.
pub fn dump_csv(trajectories: &[Trajectory]) -> String {
    let mut out = String::from("robot,waypoint,arrival,departure\n");
    for tr in trajectories {
        let n = tr.steps().len();
        for (k, s) in tr.steps().iter().enumerate() {
            let dep = if k + 1 == n {
                "inf".to_owned()
            } else {
                format!("{:.6}", s.departure)
            };
            let _ = writeln!(out, "{},{},{:.6},{}", tr.robot.0, s.waypoint.0, s.arrival, dep);
        }
    }
    out
}
