//! Time-interval reservations on waypoints and directed edges.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ids::{RobotId, WaypointId};
use crate::planner::TimedPath;

/// Slack used when comparing interval endpoints produced by float arithmetic.
pub const TIME_EPS: f64 = 1e-9;

/// Half-open occupation interval `[start, end)` held by one robot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub robot: RobotId,
}

impl Interval {
    pub fn overlaps(&self, start: f64, end: f64) -> bool {
        self.start < end - TIME_EPS && start < self.end - TIME_EPS
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Resource {
    Node(WaypointId),
    /// Directed traversal `from -> to`.
    Edge(WaypointId, WaypointId),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conflict {
    pub resource: Resource,
    pub ours: (f64, f64),
    pub theirs: Interval,
}

#[derive(Debug, Error, PartialEq)]
pub enum ReserveError {
    #[error("path for {robot} conflicts with {} existing reservation(s), first on {:?}", .conflicts.len(), .conflicts[0].resource)]
    Conflicts {
        robot: RobotId,
        conflicts: Vec<Conflict>,
    },
    #[error("path for {0} is empty")]
    EmptyPath(RobotId),
}

/// Occupancy a robot claims while following `path`: each node from the moment
/// the robot starts moving toward it until it reaches the next node (forever
/// for the last one), and each edge while it is being traversed.
pub fn path_occupancy(path: &TimedPath) -> Vec<(Resource, f64, f64)> {
    let steps = path.steps();
    let mut out = Vec::with_capacity(steps.len() * 2);
    for (k, step) in steps.iter().enumerate() {
        let enter = if k == 0 {
            path.start_time()
        } else {
            steps[k - 1].departure
        };
        let leave = steps.get(k + 1).map_or(f64::INFINITY, |n| n.arrival);
        out.push((Resource::Node(step.waypoint), enter, leave));
        if let Some(next) = steps.get(k + 1) {
            out.push((
                Resource::Edge(step.waypoint, next.waypoint),
                step.departure,
                next.arrival,
            ));
        }
    }
    out
}

#[derive(Clone, Debug, Default)]
pub struct ReservationTable {
    nodes: BTreeMap<WaypointId, Vec<Interval>>,
    edges: BTreeMap<(WaypointId, WaypointId), Vec<Interval>>,
    owned: BTreeMap<RobotId, BTreeSet<Resource>>,
}

impl ReservationTable {
    pub fn new() -> Self {
        Self::default()
    }

    fn list(&self, r: Resource) -> Option<&Vec<Interval>> {
        match r {
            Resource::Node(w) => self.nodes.get(&w),
            Resource::Edge(a, b) => self.edges.get(&(a, b)),
        }
    }

    fn list_mut(&mut self, r: Resource) -> &mut Vec<Interval> {
        match r {
            Resource::Node(w) => self.nodes.entry(w).or_default(),
            Resource::Edge(a, b) => self.edges.entry((a, b)).or_default(),
        }
    }

    /// All intervals on a resource, sorted by start.
    pub fn intervals(&self, r: Resource) -> &[Interval] {
        self.list(r).map_or(&[], Vec::as_slice)
    }

    /// Intervals held by robots other than `robot` that overlap `[start, end)`.
    pub fn blocking(&self, r: Resource, start: f64, end: f64, robot: RobotId) -> Option<Interval> {
        self.intervals(r)
            .iter()
            .find(|iv| iv.robot != robot && iv.overlaps(start, end))
            .copied()
    }

    /// Free windows on a waypoint for `robot`, ignoring its own reservations.
    /// Sorted, disjoint; the last one may extend to infinity.
    pub fn safe_intervals(&self, wp: WaypointId, robot: RobotId) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut cursor = f64::NEG_INFINITY;
        for iv in self.intervals(Resource::Node(wp)) {
            if iv.robot == robot {
                continue;
            }
            if iv.start > cursor {
                out.push((cursor, iv.start));
            }
            cursor = cursor.max(iv.end);
        }
        if cursor < f64::INFINITY {
            out.push((cursor, f64::INFINITY));
        }
        out
    }

    pub fn conflicts(&self, robot: RobotId, path: &TimedPath) -> Vec<Conflict> {
        let mut out = Vec::new();
        for (res, start, end) in path_occupancy(path) {
            for iv in self.intervals(res) {
                if iv.robot != robot && iv.overlaps(start, end) {
                    out.push(Conflict {
                        resource: res,
                        ours: (start, end),
                        theirs: *iv,
                    });
                }
            }
            // A traversal also clashes with anyone crossing the same edge the other way.
            if let Resource::Edge(a, b) = res {
                for iv in self.intervals(Resource::Edge(b, a)) {
                    if iv.robot != robot && iv.overlaps(start, end) {
                        out.push(Conflict {
                            resource: Resource::Edge(b, a),
                            ours: (start, end),
                            theirs: *iv,
                        });
                    }
                }
            }
        }
        out
    }

    /// Replaces `robot`'s reservations with the occupancy of `path`. Rejected,
    /// leaving the table untouched, if any other robot holds an overlapping
    /// interval.
    pub fn reserve(&mut self, robot: RobotId, path: &TimedPath) -> Result<(), ReserveError> {
        if path.steps().is_empty() {
            return Err(ReserveError::EmptyPath(robot));
        }
        let conflicts = self.conflicts(robot, path);
        if !conflicts.is_empty() {
            return Err(ReserveError::Conflicts { robot, conflicts });
        }
        self.clear(robot);
        for (res, start, end) in path_occupancy(path) {
            if end - start <= TIME_EPS && end.is_finite() {
                continue;
            }
            self.insert(res, Interval { start, end, robot });
        }
        Ok(())
    }

    fn insert(&mut self, res: Resource, iv: Interval) {
        let list = self.list_mut(res);
        let pos = list.partition_point(|x| x.start <= iv.start);
        list.insert(pos, iv);
        self.owned.entry(iv.robot).or_default().insert(res);
    }

    fn clear(&mut self, robot: RobotId) {
        if let Some(resources) = self.owned.remove(&robot) {
            for res in resources {
                let list = self.list_mut(res);
                list.retain(|iv| iv.robot != robot);
            }
        }
    }

    /// Drops every interval of `robot` and pins it on `at` from `now` on.
    pub fn release(&mut self, robot: RobotId, at: WaypointId, now: f64) {
        self.clear(robot);
        self.insert(
            Resource::Node(at),
            Interval {
                start: now,
                end: f64::INFINITY,
                robot,
            },
        );
    }

    /// Forgets `robot` entirely.
    pub fn remove(&mut self, robot: RobotId) {
        self.clear(robot);
    }

    /// Discards intervals that ended at or before `t`.
    pub fn prune(&mut self, t: f64) {
        for list in self.nodes.values_mut().chain(self.edges.values_mut()) {
            list.retain(|iv| iv.end > t);
        }
    }

    /// Every interval currently held, for inspection and oracles.
    pub fn all(&self) -> Vec<(Resource, Interval)> {
        let nodes = self
            .nodes
            .iter()
            .flat_map(|(w, l)| l.iter().map(move |iv| (Resource::Node(*w), *iv)));
        let edges = self
            .edges
            .iter()
            .flat_map(|(e, l)| l.iter().map(move |iv| (Resource::Edge(e.0, e.1), *iv)));
        nodes.chain(edges).collect()
    }

    /// Node a robot is pinned on indefinitely, if any.
    pub fn pinned_node(&self, robot: RobotId) -> Option<WaypointId> {
        self.owned.get(&robot)?.iter().find_map(|r| match r {
            Resource::Node(w) => self
                .intervals(*r)
                .iter()
                .any(|iv| iv.robot == robot && iv.end == f64::INFINITY)
                .then_some(*w),
            _ => None,
        })
    }

    /// Whether any other robot holds `wp` at any time from `t` on.
    pub fn busy_after(&self, wp: WaypointId, t: f64, robot: RobotId) -> bool {
        self.intervals(Resource::Node(wp))
            .iter()
            .any(|iv| iv.robot != robot && iv.end > t + TIME_EPS)
    }
}
