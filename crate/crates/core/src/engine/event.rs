use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::ids::{OrderId, RobotId, Sku, StationId, WaypointId};
use crate::kinematics::{Heading, LiftKind};
use crate::wire::Verdict;
use crate::world::OrderLine;

#[derive(Clone, Debug, PartialEq)]
pub enum EventKind {
    RobotArrived { robot: RobotId, waypoint: WaypointId },
    RotationDone { robot: RobotId, heading: Heading },
    LiftDone { robot: RobotId, kind: LiftKind, ok: bool },
    OrderArrival {
        id: Option<OrderId>,
        lines: Vec<OrderLine>,
        generated: bool,
    },
    BundleReceipt {
        bundles: Vec<(Sku, u32)>,
        generated: bool,
    },
    StationConfirm {
        station: StationId,
        msg_id: u64,
        verdict: Verdict,
        text: Option<String>,
    },
    DecisionDue,
    FeedPoll,
    RobotLost { robot: RobotId, reason: String },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::RobotArrived { .. } => "RobotArrived",
            EventKind::RotationDone { .. } => "RotationDone",
            EventKind::LiftDone { .. } => "LiftDone",
            EventKind::OrderArrival { .. } => "OrderArrival",
            EventKind::BundleReceipt { .. } => "BundleReceipt",
            EventKind::StationConfirm { .. } => "StationConfirm",
            EventKind::DecisionDue => "DecisionDue",
            EventKind::FeedPoll => "FeedPoll",
            EventKind::RobotLost { .. } => "RobotLost",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

struct Entry(Event);

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .time
            .total_cmp(&self.0.time)
            .then_with(|| other.0.seq.cmp(&self.0.seq))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("event at t={time} is before the clock ({now})")]
    InPast { time: f64, now: f64 },
    #[error("event time {0} is not finite")]
    NotFinite(f64),
}

/// Pending events ordered by `(time, seq)`; `seq` grows with every insertion
/// so equal times pop in insertion order.
pub struct EventQueue {
    heap: BinaryHeap<Entry>,
    next_seq: u64,
    now: f64,
}

impl Default for EventQueue {
    fn default() -> Self {
        Self::new()
    }
}

impl EventQueue {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            // seq 0 is reserved for records written before the first event
            next_seq: 1,
            now: 0.0,
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, time: f64, kind: EventKind) -> Result<u64, ScheduleError> {
        if !time.is_finite() {
            return Err(ScheduleError::NotFinite(time));
        }
        if time < self.now {
            return Err(ScheduleError::InPast { time, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry(Event { time, seq, kind }));
        Ok(seq)
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.0.time)
    }

    /// Removes the earliest event and advances the clock to it.
    pub fn next_event(&mut self) -> Option<Event> {
        let e = self.heap.pop()?.0;
        self.now = e.time;
        Some(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn priority_and_ties() {
        let mut q = EventQueue::new();
        q.schedule(5.0, EventKind::DecisionDue).unwrap();
        let a = q.schedule(3.0, EventKind::FeedPoll).unwrap();
        let b = q.schedule(3.0, EventKind::DecisionDue).unwrap();
        let first = q.next_event().unwrap();
        assert_eq!((first.time, first.seq), (3.0, a));
        assert_eq!(q.next_event().unwrap().seq, b);
        assert_eq!(q.next_event().unwrap().time, 5.0);
        assert!(q.next_event().is_none());
    }

    #[test]
    fn past_rejected() {
        let mut q = EventQueue::new();
        q.schedule(2.0, EventKind::DecisionDue).unwrap();
        q.next_event();
        assert_eq!(
            q.schedule(1.0, EventKind::DecisionDue),
            Err(ScheduleError::InPast { time: 1.0, now: 2.0 })
        );
        assert!(q.schedule(2.0, EventKind::DecisionDue).is_ok());
        assert!(q.schedule(f64::NAN, EventKind::DecisionDue).is_err());
    }
}
