//! Robot and station agents as the engine sees them. The in-process agents
//! and the wire emulators share [`EmuRobot`] and [`EmuStation`], so both
//! produce the same replies for the same commands.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::config::{AgentsConfig, ScriptedStationError};
use crate::ids::{RobotId, StationId, WaypointId};
use crate::kinematics::{Heading, Kinematics};
use crate::rng::{labeled_rng, SimRng};
use crate::wire::{Frame, Verdict};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("robot {robot} lost: {reason}")]
    RobotLost { robot: RobotId, reason: String },
    #[error("station {station} lost: {reason}")]
    StationLost { station: StationId, reason: String },
}

/// Inbound traffic not tied to a command.
#[derive(Clone, Debug, PartialEq)]
pub enum Inbound {
    RobotLost { robot: RobotId, reason: String },
    Feed(Frame),
}

pub trait Agents {
    /// Sends one command batch to a robot and returns its status replies.
    fn robot(&mut self, robot: RobotId, frames: &[Frame]) -> Result<Vec<Frame>, AgentError>;

    /// Sends an info message to a station and returns its reply.
    fn station(&mut self, station: StationId, frame: &Frame) -> Result<Vec<Frame>, AgentError>;

    fn poll(&mut self) -> Vec<Inbound> {
        Vec::new()
    }

    /// Whether an external order feed is attached.
    fn has_feed(&self) -> bool {
        false
    }

    fn feed(&mut self, _frame: &Frame) {}
}

/// Simulated robot: answers commands with timestamped status frames.
#[derive(Clone, Debug)]
pub struct EmuRobot {
    pub id: RobotId,
    pub waypoint: WaypointId,
    pub heading: Heading,
    pub clock: f64,
    kin: Kinematics,
    edge_time: f64,
    fault_rate: f64,
    rng: SimRng,
    msg_seq: u64,
    pub carrying: bool,
}

impl EmuRobot {
    pub fn new(
        id: RobotId,
        waypoint: WaypointId,
        heading: Heading,
        kin: Kinematics,
        spacing_m: f64,
        fault_rate: f64,
        seed: u64,
    ) -> Self {
        Self {
            id,
            waypoint,
            heading,
            clock: 0.0,
            kin,
            edge_time: kin.edge_duration(spacing_m),
            fault_rate,
            rng: labeled_rng(seed, &format!("faults/{}", id.0)),
            msg_seq: 0,
            carrying: false,
        }
    }

    fn next_id(&mut self) -> u64 {
        self.msg_seq += 1;
        self.msg_seq
    }

    pub fn respond(&mut self, cmd: &Frame) -> Vec<Frame> {
        let robot_id = self.id.0;
        let start = cmd.at().unwrap_or(self.clock);
        let mut out = Vec::new();
        match cmd {
            Frame::Go { waypoints, .. } => {
                let mut t = start;
                for &wp in waypoints {
                    t += self.edge_time;
                    self.waypoint = wp;
                    let msg_id = self.next_id();
                    out.push(Frame::WaypointTag {
                        robot_id,
                        msg_id,
                        waypoint: wp,
                        at: Some(t),
                    });
                }
                self.clock = t;
            }
            Frame::Turn { degrees, .. } => {
                let t = start + self.kin.turn_duration(*degrees);
                self.heading = self.heading.turned(*degrees);
                let msg_id = self.next_id();
                out.push(Frame::Orientation {
                    robot_id,
                    msg_id,
                    radians: self.heading.radians(),
                    at: Some(t),
                });
                self.clock = t;
            }
            Frame::Pickup { .. } => {
                let t = start + self.kin.t_pickup;
                let ok = !(self.fault_rate > 0.0 && self.rng.random::<f64>() < self.fault_rate);
                self.carrying |= ok;
                let msg_id = self.next_id();
                out.push(Frame::PickupSuccess {
                    robot_id,
                    msg_id,
                    ok,
                    at: Some(t),
                });
                self.clock = t;
            }
            Frame::Setdown { .. } => {
                let t = start + self.kin.t_setdown;
                self.carrying = false;
                let msg_id = self.next_id();
                out.push(Frame::SetdownSuccess {
                    robot_id,
                    msg_id,
                    ok: true,
                    at: Some(t),
                });
                self.clock = t;
            }
            Frame::Rest { .. } => {
                self.clock = start;
            }
            _ => {}
        }
        out
    }
}

/// Simulated station operator: confirms every line, except scripted errors.
#[derive(Clone, Debug)]
pub struct EmuStation {
    pub id: StationId,
    received: u32,
    errors: BTreeMap<u32, String>,
}

impl EmuStation {
    pub fn new(id: StationId, scripted: &[ScriptedStationError]) -> Self {
        Self {
            id,
            received: 0,
            errors: scripted
                .iter()
                .filter(|e| e.station == id.0)
                .map(|e| (e.message, e.text.clone()))
                .collect(),
        }
    }

    pub fn respond(&mut self, frame: &Frame) -> Option<Frame> {
        let (msg_id, info) = match frame {
            Frame::PickingInfo { msg_id, info, .. } | Frame::ReplenishInfo { msg_id, info, .. } => (*msg_id, info),
            _ => return None,
        };
        self.received += 1;
        let (verdict, text) = match self.errors.get(&self.received) {
            Some(t) => (Verdict::Error, Some(t.clone())),
            None => (Verdict::Ok, None),
        };
        Some(Frame::StationReply {
            station_id: self.id.0,
            msg_id,
            verdict,
            text,
            order_id: info.order_id,
            bundle_id: info.bundle_id,
            item_id: info.item_id.clone(),
        })
    }
}

/// Every robot and station simulated inside the engine process.
pub struct InProcessAgents {
    pub robots: BTreeMap<RobotId, EmuRobot>,
    pub stations: BTreeMap<StationId, EmuStation>,
}

impl InProcessAgents {
    pub fn new(
        robots: impl IntoIterator<Item = (RobotId, WaypointId, Heading)>,
        stations: impl IntoIterator<Item = StationId>,
        kin: Kinematics,
        spacing_m: f64,
        cfg: &AgentsConfig,
        seed: u64,
    ) -> Self {
        Self {
            robots: robots
                .into_iter()
                .map(|(id, wp, h)| (id, EmuRobot::new(id, wp, h, kin, spacing_m, cfg.pickup_fault_rate, seed)))
                .collect(),
            stations: stations
                .into_iter()
                .map(|id| (id, EmuStation::new(id, &cfg.station_errors)))
                .collect(),
        }
    }
}

impl Agents for InProcessAgents {
    fn robot(&mut self, robot: RobotId, frames: &[Frame]) -> Result<Vec<Frame>, AgentError> {
        let emu = self.robots.get_mut(&robot).ok_or(AgentError::RobotLost {
            robot,
            reason: "no such robot".into(),
        })?;
        Ok(frames.iter().flat_map(|f| emu.respond(f)).collect())
    }

    fn station(&mut self, station: StationId, frame: &Frame) -> Result<Vec<Frame>, AgentError> {
        let emu = self.stations.get_mut(&station).ok_or(AgentError::StationLost {
            station,
            reason: "no such station".into(),
        })?;
        Ok(emu.respond(frame).into_iter().collect())
    }
}
