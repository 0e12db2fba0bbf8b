//! Path planning for robots on the waypoint graph.
//!
//! Robots are planned one at a time against a shared [`ReservationTable`]
//! using A* over safe time intervals: a search state is a waypoint, one of
//! its free windows, and the robot heading on arrival. Edge traversal takes
//! `spacing_m / v_max`, rotation is charged at the node before departure, and
//! waiting is allowed anywhere inside a free window. A goal is only accepted
//! in a window that never closes, because the robot parks there.

pub mod reservation;
pub mod verify;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use crate::ids::{RobotId, WaypointId};
use crate::kinematics::{Heading, Kinematics, LiftKind};
use crate::layout::Layout;

pub use reservation::{Conflict, Interval, ReservationTable, ReserveError, Resource, TIME_EPS};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathStep {
    pub waypoint: WaypointId,
    pub arrival: f64,
    pub departure: f64,
    /// Heading when leaving the node, or on arrival for the final node.
    pub heading_after: Heading,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimedPath {
    start_time: f64,
    steps: Vec<PathStep>,
}

impl TimedPath {
    pub fn new(start_time: f64, steps: Vec<PathStep>) -> Self {
        Self { start_time, steps }
    }

    /// A robot standing still on `at`.
    pub fn stationary(at: WaypointId, heading: Heading, time: f64) -> Self {
        Self::new(
            time,
            vec![PathStep {
                waypoint: at,
                arrival: time,
                departure: time,
                heading_after: heading,
            }],
        )
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn steps(&self) -> &[PathStep] {
        &self.steps
    }

    /// Number of edges traversed.
    pub fn moves(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.moves() == 0
    }

    pub fn end_time(&self) -> f64 {
        self.steps.last().map_or(self.start_time, |s| s.arrival)
    }

    pub fn total_duration(&self) -> f64 {
        self.end_time() - self.start_time
    }

    pub fn goal(&self) -> Option<WaypointId> {
        self.steps.last().map(|s| s.waypoint)
    }

    /// Checks ordering and adjacency of the steps.
    pub fn validate(&self, layout: &Layout) -> Result<(), String> {
        let mut prev: Option<&PathStep> = None;
        for s in &self.steps {
            if s.departure < s.arrival {
                return Err(format!("departure before arrival at {}", s.waypoint));
            }
            if let Some(p) = prev {
                if s.arrival < p.departure {
                    return Err(format!("arrival at {} precedes departure", s.waypoint));
                }
                if !layout.adjacent(p.waypoint, s.waypoint) {
                    return Err(format!("{} and {} are not adjacent", p.waypoint, s.waypoint));
                }
            }
            prev = Some(s);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanRequest {
    pub robot: RobotId,
    pub start: WaypointId,
    pub heading: Heading,
    pub start_time: f64,
    pub goal: WaypointId,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanLimits {
    pub max_expansions: usize,
    /// Paths arriving later than `start_time + horizon_s` are not considered.
    pub horizon_s: f64,
}

impl Default for PlanLimits {
    fn default() -> Self {
        Self {
            max_expansions: 20_000,
            horizon_s: 24.0 * 3600.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("waypoint {0} is not part of the layout")]
    InvalidWaypoint(WaypointId),
    #[error("robot {robot} does not hold its start waypoint {start} at t={time}")]
    StartBlocked {
        robot: RobotId,
        start: WaypointId,
        time: f64,
    },
    #[error("no conflict-free path for {robot} to {goal} within the search limits")]
    NoPath { robot: RobotId, goal: WaypointId },
}

/// Seconds the engine holds a robot on its node to lift or lower a pod.
pub fn lift_dwell(kinematics: &Kinematics, kind: LiftKind) -> f64 {
    kinematics.lift_dwell(kind)
}

#[derive(Clone, Copy)]
struct SearchNode {
    wp: WaypointId,
    window: usize,
    heading: Heading,
    arrival: f64,
    parent: Option<usize>,
    /// Departure time from the parent toward this node.
    departed: f64,
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    g: f64,
    seq: u64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (f, g, seq).
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.g.total_cmp(&self.g))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Plans a conflict-free timed path against the current reservations.
pub fn plan(
    layout: &Layout,
    table: &ReservationTable,
    kinematics: &Kinematics,
    req: &PlanRequest,
    limits: &PlanLimits,
) -> Result<TimedPath, PlanError> {
    for wp in [req.start, req.goal] {
        if !layout.contains(wp) {
            return Err(PlanError::InvalidWaypoint(wp));
        }
    }
    let tau = kinematics.edge_duration(layout.spacing_m());
    let robot = req.robot;
    let mut windows: HashMap<WaypointId, Vec<(f64, f64)>> = HashMap::new();
    let mut windows_of = |wp: WaypointId| -> Vec<(f64, f64)> {
        windows
            .entry(wp)
            .or_insert_with(|| table.safe_intervals(wp, robot))
            .clone()
    };

    let start_windows = windows_of(req.start);
    let start_window = start_windows
        .iter()
        .position(|&(s, e)| s <= req.start_time + TIME_EPS && req.start_time < e - TIME_EPS)
        .ok_or(PlanError::StartBlocked {
            robot,
            start: req.start,
            time: req.start_time,
        })?;

    let heuristic = |wp: WaypointId| -> f64 {
        f64::from(layout.graph_distance(wp, req.goal).unwrap_or(u32::MAX / 2)) * tau
    };

    let mut arena = vec![SearchNode {
        wp: req.start,
        window: start_window,
        heading: req.heading,
        arrival: req.start_time,
        parent: None,
        departed: req.start_time,
    }];
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;
    open.push(Open {
        f: req.start_time + heuristic(req.start),
        g: req.start_time,
        seq,
        idx: 0,
    });
    let mut best: HashMap<(WaypointId, usize, Heading), f64> = HashMap::new();
    best.insert((req.start, start_window, req.heading), req.start_time);
    let mut closed: HashMap<(WaypointId, usize, Heading), ()> = HashMap::new();
    let latest = req.start_time + limits.horizon_s;
    let mut expansions = 0usize;

    while let Some(Open { idx, .. }) = open.pop() {
        let node = arena[idx];
        let key = (node.wp, node.window, node.heading);
        if closed.insert(key, ()).is_some() {
            continue;
        }
        let here = windows_of(node.wp)[node.window];
        if node.wp == req.goal && here.1 == f64::INFINITY {
            return Ok(reconstruct(&arena, idx, req.start_time));
        }
        expansions += 1;
        if expansions > limits.max_expansions {
            break;
        }
        for &next in layout.neighbors(node.wp) {
            let Some(dir) = layout.heading(node.wp, next) else {
                continue;
            };
            let earliest = node.arrival + kinematics.turn_duration(node.heading.turn_to(dir));
            for (j, (start, end)) in windows_of(next).into_iter().enumerate() {
                let depart = earliest.max(start);
                let arrive = depart + tau;
                // We keep holding our node until we reach the next one.
                if arrive > here.1 + TIME_EPS {
                    break;
                }
                if arrive >= end - TIME_EPS || arrive > latest {
                    continue;
                }
                let edge_taken = table
                    .blocking(Resource::Edge(node.wp, next), depart, arrive, robot)
                    .or_else(|| table.blocking(Resource::Edge(next, node.wp), depart, arrive, robot))
                    .is_some();
                if edge_taken {
                    continue;
                }
                let k = (next, j, dir);
                if closed.contains_key(&k) || best.get(&k).is_some_and(|&b| b <= arrive) {
                    continue;
                }
                best.insert(k, arrive);
                arena.push(SearchNode {
                    wp: next,
                    window: j,
                    heading: dir,
                    arrival: arrive,
                    parent: Some(idx),
                    departed: depart,
                });
                seq += 1;
                open.push(Open {
                    f: arrive + heuristic(next),
                    g: arrive,
                    seq,
                    idx: arena.len() - 1,
                });
            }
        }
    }
    Err(PlanError::NoPath {
        robot,
        goal: req.goal,
    })
}

fn reconstruct(arena: &[SearchNode], last: usize, start_time: f64) -> TimedPath {
    let mut chain = vec![last];
    let mut cur = last;
    while let Some(p) = arena[cur].parent {
        chain.push(p);
        cur = p;
    }
    chain.reverse();
    let steps = chain
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let n = arena[i];
            match chain.get(k + 1) {
                Some(&c) => PathStep {
                    waypoint: n.wp,
                    arrival: n.arrival,
                    departure: arena[c].departed,
                    heading_after: arena[c].heading,
                },
                None => PathStep {
                    waypoint: n.wp,
                    arrival: n.arrival,
                    departure: n.arrival,
                    heading_after: n.heading,
                },
            }
        })
        .collect();
    TimedPath::new(start_time, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{build_layout, Coord, LayoutConfig};

    fn layout() -> Layout {
        build_layout(&LayoutConfig::grid(3, 4)).unwrap()
    }

    fn req(l: &Layout, from: (u32, u32), to: (u32, u32), heading: Heading) -> PlanRequest {
        PlanRequest {
            robot: RobotId(0),
            start: l.waypoint(Coord::new(from.0, from.1)).unwrap(),
            heading,
            start_time: 0.0,
            goal: l.waypoint(Coord::new(to.0, to.1)).unwrap(),
        }
    }

    #[test]
    fn start_equals_goal_is_empty() {
        let l = layout();
        let p = plan(
            &l,
            &ReservationTable::new(),
            &Kinematics::default(),
            &req(&l, (0, 0), (0, 0), Heading::East),
            &PlanLimits::default(),
        )
        .unwrap();
        assert!(p.is_empty());
        assert_eq!(p.total_duration(), 0.0);
    }

    #[test]
    fn straight_two_edges_take_forty_seconds() {
        let l = layout();
        let p = plan(
            &l,
            &ReservationTable::new(),
            &Kinematics::default(),
            &req(&l, (0, 0), (0, 2), Heading::East),
            &PlanLimits::default(),
        )
        .unwrap();
        assert_eq!(p.moves(), 2);
        assert_eq!(p.total_duration(), 40.0);
    }

    #[test]
    fn one_quarter_turn_adds_three_quarters_of_a_second() {
        let l = layout();
        let p = plan(
            &l,
            &ReservationTable::new(),
            &Kinematics::default(),
            &req(&l, (0, 0), (1, 1), Heading::East),
            &PlanLimits::default(),
        )
        .unwrap();
        assert_eq!(p.moves(), 2);
        assert_eq!(p.total_duration(), 40.75);
        p.validate(&l).unwrap();
    }

    #[test]
    fn waits_for_a_crossing_robot() {
        let l = layout();
        let k = Kinematics::default();
        let mut table = ReservationTable::new();
        // Robot 1 drives down column 1 through (1,1) first.
        let r1 = PlanRequest {
            robot: RobotId(1),
            ..req(&l, (0, 1), (2, 1), Heading::South)
        };
        table.release(RobotId(1), r1.start, 0.0);
        let p1 = plan(&l, &table, &k, &r1, &PlanLimits::default()).unwrap();
        table.reserve(RobotId(1), &p1).unwrap();
        let r0 = req(&l, (1, 0), (1, 2), Heading::East);
        table.release(RobotId(0), r0.start, 0.0);
        let p0 = plan(&l, &table, &k, &r0, &PlanLimits::default()).unwrap();
        assert!(table.conflicts(RobotId(0), &p0).is_empty());
        assert!(p0.total_duration() > 40.0);
        table.reserve(RobotId(0), &p0).unwrap();
    }

    #[test]
    fn goal_held_forever_yields_no_path() {
        let l = layout();
        let mut table = ReservationTable::new();
        let r = req(&l, (0, 0), (0, 3), Heading::East);
        table.release(RobotId(0), r.start, 0.0);
        table.release(RobotId(9), r.goal, 0.0);
        assert!(matches!(
            plan(&l, &table, &Kinematics::default(), &r, &PlanLimits::default()),
            Err(PlanError::NoPath { .. })
        ));
    }

    #[test]
    fn start_taken_by_someone_else() {
        let l = layout();
        let mut table = ReservationTable::new();
        let r = req(&l, (0, 0), (0, 3), Heading::East);
        table.release(RobotId(5), r.start, 0.0);
        assert!(matches!(
            plan(&l, &table, &Kinematics::default(), &r, &PlanLimits::default()),
            Err(PlanError::StartBlocked { .. })
        ));
    }
}
