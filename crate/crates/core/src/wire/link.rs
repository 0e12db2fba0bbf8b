//! Engine agents backed by wire connections. Commands are lockstep: the
//! engine sends a batch and blocks until the robot has answered every
//! command that expects a status reply.

use std::collections::{BTreeSet, VecDeque};
use std::time::{Duration, Instant};

use super::msg::{Frame, Role};
use super::server::{Incoming, Peer, WireServer};
use crate::config::Config;
use crate::engine::{AgentError, Agents, Engine, EngineError, EventLog, InProcessAgents, Inbound, RunSummary};
use crate::ids::{RobotId, StationId};

/// Status frames a robot owes for one command.
pub fn expected_replies(cmd: &Frame) -> usize {
    match cmd {
        Frame::Go { waypoints, .. } => waypoints.len(),
        Frame::Turn { .. } | Frame::Pickup { .. } | Frame::Setdown { .. } => 1,
        _ => 0,
    }
}

pub struct WireAgents {
    server: WireServer,
    fallback: InProcessAgents,
    robots: BTreeSet<RobotId>,
    stations: BTreeSet<StationId>,
    feed: bool,
    reply_timeout: Duration,
    backlog: VecDeque<Incoming>,
    inbox: Vec<Inbound>,
}

impl WireAgents {
    /// `robots` and `stations` are served over the wire; everyone else by `fallback`.
    pub fn new(
        server: WireServer,
        fallback: InProcessAgents,
        robots: BTreeSet<RobotId>,
        stations: BTreeSet<StationId>,
        feed: bool,
        reply_timeout: Duration,
    ) -> Self {
        Self {
            server,
            fallback,
            robots,
            stations,
            feed,
            reply_timeout,
            backlog: VecDeque::new(),
            inbox: Vec::new(),
        }
    }

    pub fn server(&self) -> &WireServer {
        &self.server
    }

    fn next(&mut self, wait: Duration) -> Option<Incoming> {
        self.backlog.pop_front().or_else(|| self.server.recv_timeout(wait))
    }

    /// Files traffic that is not the reply being waited for.
    fn aside(&mut self, m: Incoming) {
        match m {
            Incoming::Frame(p, f) if p.role == Role::Feed => {
                if matches!(f, Frame::NewOrder { .. } | Frame::Receipt { .. }) {
                    self.inbox.push(Inbound::Feed(f));
                }
            }
            Incoming::Disconnected(p, reason) if p.role == Role::Robot => {
                let robot = RobotId(p.id);
                if self.robots.remove(&robot) {
                    self.inbox.push(Inbound::RobotLost { robot, reason });
                }
            }
            _ => {}
        }
    }
}

impl Agents for WireAgents {
    fn robot(&mut self, robot: RobotId, frames: &[Frame]) -> Result<Vec<Frame>, AgentError> {
        if !self.robots.contains(&robot) {
            return self.fallback.robot(robot, frames);
        }
        let peer = Peer::robot(robot.0);
        let lost = |reason: String| AgentError::RobotLost { robot, reason };
        for f in frames {
            if let Err(e) = self.server.send(peer, f) {
                self.robots.remove(&robot);
                return Err(lost(e.to_string()));
            }
        }
        let want: usize = frames.iter().map(expected_replies).sum();
        let mut out = Vec::with_capacity(want);
        let deadline = Instant::now() + self.reply_timeout;
        while out.len() < want {
            let left = deadline.saturating_duration_since(Instant::now());
            let Some(m) = self.next(left) else {
                self.robots.remove(&robot);
                self.server.kick(peer);
                return Err(lost("reply timeout".into()));
            };
            match m {
                Incoming::Frame(p, f) if p == peer => {
                    let stop = matches!(f, Frame::Error { .. });
                    out.push(f);
                    if stop {
                        break;
                    }
                }
                Incoming::Disconnected(p, reason) if p == peer => {
                    self.robots.remove(&robot);
                    return Err(lost(reason));
                }
                other => self.aside(other),
            }
        }
        Ok(out)
    }

    fn station(&mut self, station: StationId, frame: &Frame) -> Result<Vec<Frame>, AgentError> {
        if !self.stations.contains(&station) {
            return self.fallback.station(station, frame);
        }
        let peer = Peer::station(station.0);
        let msg_id = match frame {
            Frame::PickingInfo { msg_id, .. } | Frame::ReplenishInfo { msg_id, .. } => *msg_id,
            _ => return Ok(Vec::new()),
        };
        // a station that drops out is waited for; it gets the message again on return
        let _ = self.server.send(peer, frame);
        loop {
            let Some(m) = self.next(Duration::from_millis(500)) else {
                continue;
            };
            match m {
                Incoming::Frame(p, f) if p == peer => {
                    if let Frame::StationReply { msg_id: m, .. } = &f {
                        if *m == msg_id {
                            return Ok(vec![f]);
                        }
                    }
                }
                Incoming::Registered(p) if p == peer => {
                    let _ = self.server.send(peer, frame);
                }
                other => self.aside(other),
            }
        }
    }

    fn poll(&mut self) -> Vec<Inbound> {
        while let Some(m) = self.backlog.pop_front().or_else(|| self.server.try_recv()) {
            self.aside(m);
        }
        std::mem::take(&mut self.inbox)
    }

    fn has_feed(&self) -> bool {
        self.feed
    }

    fn feed(&mut self, frame: &Frame) {
        for p in self.server.peers() {
            if p.role == Role::Feed {
                let _ = self.server.send(p, frame);
            }
        }
    }
}

/// Waits up to the configured grace period for every robot and station to
/// register, then runs the engine over the wire. Agents that never showed
/// up are simulated in process when fallback is enabled.
pub fn serve(
    cfg: Config,
    server: WireServer,
    log: EventLog,
    wall_clock: bool,
) -> Result<(RunSummary, EventLog), EngineError> {
    let layout = cfg.build_layout()?;
    let world = cfg.build_world(&layout)?;
    let want_robots: BTreeSet<RobotId> = world.robots().map(|r| r.id).collect();
    let want_stations: BTreeSet<StationId> = layout.stations().iter().map(|s| s.id).collect();
    let mut robots = BTreeSet::new();
    let mut stations = BTreeSet::new();
    let mut backlog = VecDeque::new();
    let deadline = Instant::now() + Duration::from_secs_f64(cfg.wire.grace_s);
    while robots.len() < want_robots.len() || stations.len() < want_stations.len() {
        let left = deadline.saturating_duration_since(Instant::now());
        if left.is_zero() {
            break;
        }
        match server.recv_timeout(left) {
            Some(Incoming::Registered(p)) => match p.role {
                Role::Robot if want_robots.contains(&RobotId(p.id)) => {
                    robots.insert(RobotId(p.id));
                }
                Role::Station if want_stations.contains(&StationId(p.id)) => {
                    stations.insert(StationId(p.id));
                }
                _ => {}
            },
            Some(Incoming::Disconnected(p, _)) => {
                match p.role {
                    Role::Robot => robots.remove(&RobotId(p.id)),
                    Role::Station => stations.remove(&StationId(p.id)),
                    Role::Feed => false,
                };
            }
            Some(other) => backlog.push_back(other),
            None => {}
        }
    }
    let missing: Vec<String> = want_robots
        .difference(&robots)
        .map(|r| r.to_string())
        .chain(want_stations.difference(&stations).map(|s| s.to_string()))
        .collect();
    if !missing.is_empty() && !cfg.wire.fallback {
        return Err(EngineError::Wire(format!("not connected after grace period: {}", missing.join(", "))));
    }
    let fallback = InProcessAgents::new(
        world.robots().map(|r| (r.id, r.waypoint, r.heading)),
        layout.stations().iter().map(|s| s.id),
        cfg.kinematics,
        layout.spacing_m(),
        &cfg.agents,
        cfg.sim.seed,
    );
    let mut agents = WireAgents::new(
        server,
        fallback,
        robots,
        stations,
        cfg.wire.feed,
        Duration::from_secs_f64(cfg.wire.reply_timeout_s),
    );
    agents.backlog = backlog;
    let scale = cfg.wire.time_scale;
    let mut engine = Engine::with_agents(cfg, Box::new(agents), log)?;
    if wall_clock {
        engine.set_pacing(scale);
    }
    let mut summary = engine.run()?;
    summary.fallback = missing;
    Ok((summary, engine.into_log()))
}
