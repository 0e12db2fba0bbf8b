//! Discrete-event engine. One owner mutates the world; every event is
//! followed by a decision pass (ROA, POA, RPS, PPS, PR, TA, PP in that
//! order) and every step is written to the event log.

pub mod agents;
pub mod event;
pub mod log;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::config::{Config, ConfigError, CostKind};
use crate::gateway::{
    best_put_compartment, pod_release_check, FeedEvent, GatewayError, GatewayRequest,
    LineKind, NextNeed, OrderGateway, OrderGenerator, Outstanding, Release, ReplyOutcome, TransferKind,
};
use crate::ids::{BundleId, OrderId, PodId, RequestId, RobotId, Sku, StationId, TaskId, TransferId, WaypointId};
use crate::kinematics::{Heading, LiftKind};
use crate::layout::{Layout, StationKind, WaypointKind};
use crate::ledger::{convergence_csv, CostFunctions, CostLedger, LedgerError};
use crate::planner::{plan, PlanLimits, PlanRequest, ReservationTable, TimedPath};
use crate::plugins::{
    validate, BundleView, ExtractView, OrderView, PickStationView, PluginError, PluginSet, PodRoom, PodStock,
    PrContext, RobotView, StationLoad, TaskView,
};
use crate::wire::{FeedTransferState, Frame};
use crate::world::{CompartmentIndex, OrderLine, PickOrder, PodLocation, ReplenishmentBundle, RobotState, World};

pub use agents::{AgentError, Agents, EmuRobot, EmuStation, InProcessAgents, Inbound};
pub use event::{Event, EventKind, EventQueue, ScheduleError};
pub use log::{EventLog, LogRecord, ABORT_KIND};

pub const METRICS_CSV_HEADER: &str =
    "time_s,completed_orders,accepted_orders,parked_orders,throughput_per_h,pile_on,robot_utilization,epochs";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Plugin(#[from] PluginError),
    #[error("{0}")]
    Agent(#[from] AgentError),
    #[error("{0}")]
    Gateway(#[from] GatewayError),
    #[error("ledger: {0}")]
    Ledger(#[from] LedgerError),
    #[error("{0}")]
    Schedule(#[from] ScheduleError),
    #[error("log: {0}")]
    Io(#[from] std::io::Error),
    #[error("wire: {0}")]
    Wire(String),
    #[error("internal: {0}")]
    Internal(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Horizon,
    Drained,
    Epochs,
    MaxEvents,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ReqKind {
    Extract,
    Insert,
}

#[derive(Clone, Debug)]
struct Req {
    kind: ReqKind,
    transfer: TransferId,
    line: usize,
    order: Option<OrderId>,
    bundle: Option<BundleId>,
    sku: Sku,
    /// Units still to move.
    quantity: u32,
    station: StationId,
    task: Option<TaskId>,
    compartment: Option<CompartmentIndex>,
    requeues: u32,
    rps_miss_logged: bool,
}

#[derive(Clone, Debug)]
struct OrderRec {
    transfer: TransferId,
    lines: Vec<OrderLine>,
    arrival: f64,
    station: Option<StationId>,
    done: bool,
}

#[derive(Clone, Debug)]
struct BundleRec {
    transfer: TransferId,
    line: usize,
    sku: Sku,
    quantity: u32,
    arrival: f64,
    station: Option<StationId>,
    done: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Phase {
    Open,
    ToPod,
    Lifting,
    ToStation,
    AtStation,
    AwaitPlace,
    ToStorage,
    Lowering,
}

#[derive(Clone, Debug)]
struct Task {
    kind: ReqKind,
    station: StationId,
    pod: PodId,
    robot: Option<RobotId>,
    phase: Phase,
    place: Option<WaypointId>,
    lines: u32,
    pr_deferred: bool,
}

#[derive(Clone, Debug, Default)]
struct Bot {
    task: Option<TaskId>,
    /// Waypoint the robot should be planned to next.
    goal: Option<WaypointId>,
    /// Leg in progress: goal and waypoint reports still expected.
    leg: Option<(WaypointId, usize)>,
    failures: u32,
    /// Original goal while retreating to a dwelling point.
    detour: Option<WaypointId>,
    resting: bool,
    lost: bool,
    pickup_failures: u32,
    priority: f64,
    busy_since: Option<f64>,
    busy_total: f64,
    next_msg: u64,
}

#[derive(Clone, Debug, Default)]
struct StationRt {
    holder: Option<RobotId>,
    outstanding: Option<u64>,
}

/// Pairs store decisions with departures, first in first out.
#[derive(Debug, Default)]
struct Pairing {
    stores: VecDeque<(StationId, WaypointId)>,
    departs: VecDeque<(WaypointId, StationId)>,
    store_count: usize,
    depart_count: usize,
    epochs: usize,
    last_store: BTreeMap<PodId, usize>,
}

#[derive(Debug, Default)]
struct Metrics {
    accepted: u64,
    completed: u64,
    parked_total: u64,
    pick_lines: u64,
    pick_visits: u64,
    rps_misses: u64,
    invalid_decisions: u64,
    plan_failures: u64,
    rows: Vec<String>,
    next_row_at: f64,
    last_row_at: f64,
}

/// Results of a finished run.
#[derive(Debug)]
pub struct RunSummary {
    pub stop: StopReason,
    pub end_time: f64,
    pub events: u64,
    pub accepted_orders: u64,
    pub completed_orders: u64,
    pub parked_orders: usize,
    pub open_orders: usize,
    pub metrics_csv: String,
    pub ledger_csv: String,
    /// Agents simulated in process because they never connected.
    pub fallback: Vec<String>,
}

pub struct Engine {
    cfg: Config,
    layout: Layout,
    world: World,
    plugins: PluginSet,
    gateway: OrderGateway,
    generator: Option<OrderGenerator>,
    queue: EventQueue,
    log: EventLog,
    table: ReservationTable,
    agents: Box<dyn Agents>,
    ledger: CostLedger,
    pairing: Pairing,
    limits: PlanLimits,
    edge_time: f64,

    orders: BTreeMap<OrderId, OrderRec>,
    order_backlog: Vec<OrderId>,
    parked: Vec<OrderId>,
    committed: BTreeMap<Sku, u64>,
    bundles: BTreeMap<BundleId, BundleRec>,
    bundle_backlog: Vec<BundleId>,
    requests: BTreeMap<RequestId, Req>,
    queues: BTreeMap<StationId, Vec<RequestId>>,
    tasks: BTreeMap<TaskId, Task>,
    pod_task: BTreeMap<PodId, TaskId>,
    bots: BTreeMap<RobotId, Bot>,
    stations: BTreeMap<StationId, StationRt>,
    claimed_places: BTreeMap<WaypointId, TaskId>,
    home: BTreeMap<PodId, WaypointId>,
    dwelling: Vec<WaypointId>,
    storage: Vec<WaypointId>,
    feed_inbox: Vec<Frame>,

    next_request: u64,
    next_task: u64,
    next_msg: u64,
    now: f64,
    seq: u64,
    events: u64,
    retry_at: Option<f64>,
    metrics: Metrics,
    stop: Option<StopReason>,
    pacing: Option<(Instant, f64)>,
    aborted: bool,
}

impl Engine {
    /// Engine with every robot and station simulated in process.
    pub fn new(cfg: Config, log: EventLog) -> Result<Self, EngineError> {
        cfg.validate()?;
        let layout = cfg.build_layout()?;
        let world = cfg.build_world(&layout)?;
        let agents = InProcessAgents::new(
            world.robots().map(|r| (r.id, r.waypoint, r.heading)),
            layout.stations().iter().map(|s| s.id),
            cfg.kinematics,
            layout.spacing_m(),
            &cfg.agents,
            cfg.sim.seed,
        );
        Self::build(cfg, layout, world, Box::new(agents), log)
    }

    /// Engine driving the given agents.
    pub fn with_agents(cfg: Config, agents: Box<dyn Agents>, log: EventLog) -> Result<Self, EngineError> {
        cfg.validate()?;
        let layout = cfg.build_layout()?;
        let world = cfg.build_world(&layout)?;
        Self::build(cfg, layout, world, agents, log)
    }

    fn build(
        cfg: Config,
        layout: Layout,
        world: World,
        agents: Box<dyn Agents>,
        log: EventLog,
    ) -> Result<Self, EngineError> {
        let plugins = PluginSet::from_config(&cfg.plugins, cfg.sim.seed)?;
        let costs = match cfg.ledger.cost {
            CostKind::Hops => CostFunctions::hop_count(&layout),
            CostKind::TravelTime => CostFunctions::travel_time(&layout, &cfg.kinematics),
        };
        let ledger = CostLedger::new(costs, world.pod_count());
        let skus: Vec<Sku> = world.stock_by_sku().into_keys().collect();
        let orders_active = cfg.orders.rate_per_hour > 0.0 || cfg.orders.receipts_per_hour > 0.0;
        let generator = orders_active.then(|| OrderGenerator::new(&cfg.orders, &skus, cfg.sim.seed));
        let home = world
            .pods()
            .filter_map(|p| match p.location {
                PodLocation::Storage(w) => Some((p.id, w)),
                _ => None,
            })
            .collect();
        let bots = world.robots().map(|r| (r.id, Bot::default())).collect();
        let stations = layout.stations().iter().map(|s| (s.id, StationRt::default())).collect();
        let queues = layout.stations().iter().map(|s| (s.id, Vec::new())).collect();
        let dwelling = layout.waypoints_of(WaypointKind::Dwelling).collect();
        let storage = layout.waypoints_of(WaypointKind::Storage).collect();
        let edge_time = cfg.kinematics.edge_duration(layout.spacing_m());
        let mut engine = Self {
            limits: PlanLimits::default(),
            edge_time,
            cfg,
            layout,
            world,
            plugins,
            gateway: OrderGateway::new(),
            generator,
            queue: EventQueue::new(),
            log,
            table: ReservationTable::new(),
            agents,
            ledger,
            pairing: Pairing::default(),
            orders: BTreeMap::new(),
            order_backlog: Vec::new(),
            parked: Vec::new(),
            committed: BTreeMap::new(),
            bundles: BTreeMap::new(),
            bundle_backlog: Vec::new(),
            requests: BTreeMap::new(),
            queues,
            tasks: BTreeMap::new(),
            pod_task: BTreeMap::new(),
            bots,
            stations,
            claimed_places: BTreeMap::new(),
            home,
            dwelling,
            storage,
            feed_inbox: Vec::new(),
            next_request: 0,
            next_task: 0,
            next_msg: 0,
            now: 0.0,
            seq: 0,
            events: 0,
            retry_at: None,
            metrics: Metrics {
                next_row_at: 3600.0,
                ..Metrics::default()
            },
            stop: None,
            pacing: None,
            aborted: false,
        };
        engine.init()?;
        Ok(engine)
    }

    /// Processes events no faster than `time_scale` simulated seconds per
    /// wall-clock second.
    pub fn set_pacing(&mut self, time_scale: f64) {
        if time_scale > 0.0 {
            self.pacing = Some((Instant::now(), time_scale));
        }
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn gateway(&self) -> &OrderGateway {
        &self.gateway
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn into_log(self) -> EventLog {
        self.log
    }

    pub fn table(&self) -> &ReservationTable {
        &self.table
    }

    /// Orders accepted but not yet completed.
    pub fn open_orders(&self) -> usize {
        self.orders.values().filter(|o| !o.done).count() - self.parked.len()
    }

    pub fn parked_orders(&self) -> usize {
        self.parked.len()
    }

    fn rec(&mut self, kind: &str, payload: &str) {
        self.log.record(self.now, self.seq, kind, payload);
    }

    fn init(&mut self) -> Result<(), EngineError> {
        let c = &self.cfg;
        let line = format!(
            "seed={} horizon={} rows={} cols={} stations={} pods={} robots={}",
            c.sim.seed,
            c.sim.horizon_s,
            self.layout.rows(),
            self.layout.cols(),
            self.layout.stations().len(),
            self.world.pod_count(),
            self.bots.len()
        );
        self.rec("Init", &line);
        let p = &self.cfg.plugins;
        let line = format!(
            "roa={} poa={} rps={} pps={} pr={} ta={} pp={}",
            p.roa, p.poa, p.rps, p.pps, p.pr, p.ta, p.pp
        );
        self.rec("Plugins", &line);
        let stations: Vec<String> = self
            .layout
            .stations()
            .iter()
            .map(|s| format!("Station {} kind={} at={}", s.id, s.kind, s.waypoint))
            .collect();
        for s in stations {
            self.rec("Layout", &s);
        }
        let pods: Vec<String> = self
            .world
            .pods()
            .map(|p| {
                let stock: Vec<String> = p
                    .compartments()
                    .iter()
                    .filter_map(|c| c.sku.as_ref().map(|s| format!("{}={}*{}", c.index, s, c.count)))
                    .collect();
                format!("{} at={} {}", p.id, p.location, stock.join(","))
            })
            .collect();
        for p in pods {
            self.rec("Pod", &p);
        }
        let robots: Vec<(RobotId, WaypointId, Heading)> =
            self.world.robots().map(|r| (r.id, r.waypoint, r.heading)).collect();
        for (id, wp, h) in robots {
            self.table.release(id, wp, 0.0);
            self.rec("Robot", &format!("{id} at={wp} heading={h}"));
        }

        for s in self.cfg.orders.script.clone() {
            if let Some(lines) = s.order {
                let lines = lines
                    .into_iter()
                    .map(|l| OrderLine {
                        sku: Sku::new(l.sku),
                        quantity: l.quantity,
                    })
                    .collect();
                self.queue.schedule(
                    s.at,
                    EventKind::OrderArrival {
                        id: None,
                        lines,
                        generated: false,
                    },
                )?;
            }
            if let Some(bundles) = s.receipt {
                let bundles = bundles.into_iter().map(|l| (Sku::new(l.sku), l.quantity)).collect();
                self.queue.schedule(
                    s.at,
                    EventKind::BundleReceipt {
                        bundles,
                        generated: false,
                    },
                )?;
            }
        }
        self.schedule_next_order()?;
        self.schedule_next_receipt()?;
        if self.agents.has_feed() {
            self.queue.schedule(0.0, EventKind::FeedPoll)?;
        }
        Ok(())
    }

    fn schedule_next_order(&mut self) -> Result<(), EngineError> {
        if let Some((at, lines)) = self.generator.as_mut().and_then(|g| g.next_order()) {
            self.queue.schedule(
                at,
                EventKind::OrderArrival {
                    id: None,
                    lines,
                    generated: true,
                },
            )?;
        }
        Ok(())
    }

    fn schedule_next_receipt(&mut self) -> Result<(), EngineError> {
        if let Some((at, bundles)) = self.generator.as_mut().and_then(|g| g.next_receipt()) {
            self.queue.schedule(
                at,
                EventKind::BundleReceipt {
                    bundles,
                    generated: true,
                },
            )?;
        }
        Ok(())
    }

    /// Runs to the horizon or another stop condition.
    pub fn run(&mut self) -> Result<RunSummary, EngineError> {
        while self.step()? {}
        self.finish()
    }

    /// Processes one event and the decision pass after it. `Ok(false)` once
    /// the run is over.
    pub fn step(&mut self) -> Result<bool, EngineError> {
        if self.stop.is_some() || self.aborted {
            return Ok(false);
        }
        if let Some(n) = self.cfg.sim.stop_after_epochs {
            if self.ledger.len() >= n {
                self.stop = Some(StopReason::Epochs);
                return Ok(false);
            }
        }
        if let Some(max) = self.cfg.sim.max_events {
            if self.events >= max {
                self.stop = Some(StopReason::MaxEvents);
                return Ok(false);
            }
        }
        let Some(t) = self.queue.peek_time() else {
            self.stop = Some(StopReason::Drained);
            return Ok(false);
        };
        if t >= self.cfg.sim.horizon_s {
            self.stop = Some(StopReason::Horizon);
            return Ok(false);
        }
        if let Some((start, scale)) = self.pacing {
            let due = start + Duration::from_secs_f64(t / scale);
            let wait = due.saturating_duration_since(Instant::now());
            if !wait.is_zero() {
                std::thread::sleep(wait);
            }
        }
        let ev = self.queue.next_event().expect("peeked");
        self.emit_metric_rows(ev.time);
        self.now = ev.time;
        self.seq = ev.seq;
        self.events += 1;
        let res = self.handle(ev).and_then(|_| self.pass());
        if let Err(e) = res {
            self.abort(&e.to_string());
            return Err(e);
        }
        Ok(true)
    }

    fn abort(&mut self, why: &str) {
        self.aborted = true;
        self.rec(ABORT_KIND, why);
        let _ = self.log.flush();
    }

    pub fn finish(&mut self) -> Result<RunSummary, EngineError> {
        let stop = self.stop.unwrap_or(StopReason::Drained);
        // a drained queue means the warehouse idles until the horizon
        let end = match stop {
            StopReason::Horizon => self.cfg.sim.horizon_s,
            StopReason::Drained if self.cfg.sim.horizon_s.is_finite() && self.cfg.sim.horizon_s < 1e9 => {
                self.cfg.sim.horizon_s
            }
            _ => self.now,
        };
        if end > self.metrics.last_row_at {
            self.emit_metric_rows(end);
            if end > self.metrics.last_row_at {
                let row = self.metric_row(end);
                self.metrics.rows.push(row);
                self.metrics.last_row_at = end;
            }
        }
        self.log.flush()?;
        let mut metrics_csv = format!("{METRICS_CSV_HEADER}\n");
        for r in &self.metrics.rows {
            metrics_csv.push_str(r);
            metrics_csv.push('\n');
        }
        let checkpoints: Vec<usize> = self
            .cfg
            .ledger
            .checkpoints
            .iter()
            .copied()
            .filter(|&n| n > 0 && n <= self.ledger.len())
            .collect();
        let rows = self.ledger.convergence_report(&checkpoints)?;
        let ledger_csv = convergence_csv(&rows);
        Ok(RunSummary {
            stop,
            end_time: end,
            events: self.events,
            accepted_orders: self.metrics.accepted,
            completed_orders: self.metrics.completed,
            parked_orders: self.parked.len(),
            open_orders: self.open_orders(),
            metrics_csv,
            ledger_csv,
            fallback: Vec::new(),
        })
    }

    fn emit_metric_rows(&mut self, upto: f64) {
        while self.metrics.next_row_at <= upto && self.metrics.next_row_at <= self.cfg.sim.horizon_s {
            let t = self.metrics.next_row_at;
            let row = self.metric_row(t);
            self.metrics.rows.push(row);
            self.metrics.last_row_at = t;
            self.metrics.next_row_at += 3600.0;
        }
    }

    fn metric_row(&self, t: f64) -> String {
        let m = &self.metrics;
        let busy: f64 = self
            .bots
            .values()
            .map(|b| b.busy_total + b.busy_since.map_or(0.0, |s| (t - s).max(0.0)))
            .sum();
        let util = if t > 0.0 && !self.bots.is_empty() {
            busy / (t * self.bots.len() as f64)
        } else {
            0.0
        };
        let pile_on = if m.pick_visits > 0 {
            m.pick_lines as f64 / m.pick_visits as f64
        } else {
            0.0
        };
        let n = self.ledger.len();
        format!(
            "{t:.3},{},{},{},{:.6},{pile_on:.6},{util:.6},{n}",
            m.completed,
            m.accepted,
            self.parked.len(),
            if t > 0.0 { m.completed as f64 * 3600.0 / t } else { 0.0 }
        )
    }

    // ---------------------------------------------------------------- events

    fn handle(&mut self, ev: Event) -> Result<(), EngineError> {
        let summary = match &ev.kind {
            EventKind::RobotArrived { robot, waypoint } => format!("{robot} {waypoint}"),
            EventKind::RotationDone { robot, heading } => format!("{robot} heading={heading}"),
            EventKind::LiftDone { robot, kind, ok } => format!("{robot} {kind:?} ok={ok}"),
            EventKind::OrderArrival { lines, .. } => fmt_lines(lines),
            EventKind::BundleReceipt { bundles, .. } => {
                let v: Vec<String> = bundles.iter().map(|(s, q)| format!("{s}*{q}")).collect();
                v.join(",")
            }
            EventKind::StationConfirm {
                station,
                msg_id,
                verdict,
                text,
            } => match text {
                Some(t) => format!("{station} m{msg_id} {verdict:?} {t}"),
                None => format!("{station} m{msg_id} {verdict:?}"),
            },
            EventKind::DecisionDue | EventKind::FeedPoll => String::new(),
            EventKind::RobotLost { robot, reason } => format!("{robot} {reason}"),
        };
        self.rec(ev.kind.name(), &summary);
        for inbound in self.agents.poll() {
            match inbound {
                Inbound::RobotLost { robot, reason } => {
                    self.queue.schedule(self.now, EventKind::RobotLost { robot, reason })?;
                }
                Inbound::Feed(f) => self.feed_inbox.push(f),
            }
        }
        match ev.kind {
            EventKind::RobotArrived { robot, waypoint } => self.on_arrived(robot, waypoint)?,
            EventKind::RotationDone { robot, heading } => {
                if !self.bot(robot)?.lost {
                    if let Some(r) = self.world.robot_mut(robot) {
                        r.heading = heading;
                    }
                }
            }
            EventKind::LiftDone { robot, kind, ok } => self.on_lift(robot, kind, ok)?,
            EventKind::OrderArrival { id, lines, generated } => {
                if generated {
                    self.schedule_next_order()?;
                }
                let id = id.unwrap_or_else(|| self.gateway.fresh_order_id());
                let order = PickOrder { id, lines };
                match self.gateway.push_feed(FeedEvent::NewOrder { order, at: self.now }) {
                    Ok(x) => self.rec("Transfer", &format!("{x} outgoing {id}")),
                    Err(e) => self.rec("Rejected", &e.to_string()),
                }
            }
            EventKind::BundleReceipt { bundles, generated } => {
                if generated {
                    self.schedule_next_receipt()?;
                }
                let bundles: Vec<ReplenishmentBundle> = bundles
                    .into_iter()
                    .map(|(sku, quantity)| ReplenishmentBundle {
                        id: self.gateway.fresh_bundle_id(),
                        sku,
                        quantity,
                    })
                    .collect();
                match self.gateway.push_feed(FeedEvent::Receipt { bundles, at: self.now }) {
                    Ok(x) => self.rec("Transfer", &format!("{x} replenish")),
                    Err(e) => self.rec("Rejected", &e.to_string()),
                }
            }
            EventKind::StationConfirm {
                station,
                msg_id,
                verdict,
                text,
            } => self.on_confirm(station, msg_id, verdict, text)?,
            EventKind::DecisionDue => {
                if self.retry_at.is_some_and(|t| t <= self.now) {
                    self.retry_at = None;
                }
            }
            EventKind::FeedPoll => self.on_feed_poll()?,
            EventKind::RobotLost { robot, reason } => self.on_robot_lost(robot, &reason)?,
        }
        Ok(())
    }

    fn bot(&self, robot: RobotId) -> Result<&Bot, EngineError> {
        self.bots
            .get(&robot)
            .ok_or_else(|| EngineError::Internal(format!("unknown robot {robot}")))
    }

    fn bot_mut(&mut self, robot: RobotId) -> Result<&mut Bot, EngineError> {
        self.bots
            .get_mut(&robot)
            .ok_or_else(|| EngineError::Internal(format!("unknown robot {robot}")))
    }

    fn task_mut(&mut self, id: TaskId) -> Result<&mut Task, EngineError> {
        self.tasks
            .get_mut(&id)
            .ok_or_else(|| EngineError::Internal(format!("unknown task {id}")))
    }

    fn on_feed_poll(&mut self) -> Result<(), EngineError> {
        for f in std::mem::take(&mut self.feed_inbox) {
            match f {
                Frame::NewOrder { lines, .. } => {
                    let lines = lines
                        .into_iter()
                        .map(|l| OrderLine {
                            sku: Sku::new(l.sku),
                            quantity: l.quantity,
                        })
                        .collect();
                    self.queue.schedule(
                        self.now,
                        EventKind::OrderArrival {
                            id: None,
                            lines,
                            generated: false,
                        },
                    )?;
                }
                Frame::Receipt { bundles, .. } => {
                    let bundles = bundles.into_iter().map(|l| (Sku::new(l.sku), l.quantity)).collect();
                    self.queue.schedule(
                        self.now,
                        EventKind::BundleReceipt {
                            bundles,
                            generated: false,
                        },
                    )?;
                }
                other => self.rec("FeedIgnored", other.kind()),
            }
        }
        if self.agents.has_feed() {
            self.queue.schedule(self.now + self.cfg.sim.feed_poll_s, EventKind::FeedPoll)?;
        }
        Ok(())
    }

    /// Sends commands to a robot and turns its replies into events.
    fn command(&mut self, robot: RobotId, frames: &[Frame]) -> Result<(), EngineError> {
        if frames.is_empty() {
            return Ok(());
        }
        let replies = match self.agents.robot(robot, frames) {
            Ok(r) => r,
            Err(AgentError::RobotLost { robot, reason }) => {
                self.queue.schedule(self.now, EventKind::RobotLost { robot, reason })?;
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        };
        for f in replies {
            let at = f.at().unwrap_or(self.now).max(self.now);
            let kind = match f {
                Frame::WaypointTag { waypoint, .. } => EventKind::RobotArrived { robot, waypoint },
                Frame::Orientation { radians, .. } => EventKind::RotationDone {
                    robot,
                    heading: Heading::from_radians(radians),
                },
                Frame::PickupSuccess { ok, .. } => EventKind::LiftDone {
                    robot,
                    kind: LiftKind::Pickup,
                    ok,
                },
                Frame::SetdownSuccess { ok, .. } => EventKind::LiftDone {
                    robot,
                    kind: LiftKind::Setdown,
                    ok,
                },
                Frame::Error { text, .. } => EventKind::RobotLost { robot, reason: text },
                other => {
                    self.rec("UnexpectedReply", &format!("{robot} {}", other.kind()));
                    continue;
                }
            };
            self.queue.schedule(at, kind)?;
        }
        Ok(())
    }

    fn msg_id(&mut self, robot: RobotId) -> u64 {
        let b = self.bots.get_mut(&robot).expect("robot exists");
        b.next_msg += 1;
        b.next_msg
    }

    fn simple_command(&mut self, robot: RobotId, kind: &str) -> Result<(), EngineError> {
        let msg_id = self.msg_id(robot);
        let (robot_id, at) = (robot.0, Some(self.now));
        let f = match kind {
            "Pickup" => Frame::Pickup { robot_id, msg_id, at },
            "Setdown" => Frame::Setdown { robot_id, msg_id, at },
            _ => Frame::Rest { robot_id, msg_id, at },
        };
        self.command(robot, &[f])
    }

    fn set_state(&mut self, robot: RobotId, state: RobotState) {
        if let Some(r) = self.world.robot_mut(robot) {
            r.state = state;
        }
    }

    fn on_arrived(&mut self, robot: RobotId, waypoint: WaypointId) -> Result<(), EngineError> {
        if self.bot(robot)?.lost {
            return Ok(());
        }
        if let Some(r) = self.world.robot_mut(robot) {
            r.waypoint = waypoint;
        }
        let b = self.bot_mut(robot)?;
        let Some((goal, remaining)) = b.leg else {
            return Ok(());
        };
        let remaining = remaining.saturating_sub(1);
        b.leg = Some((goal, remaining));
        if waypoint != goal || remaining > 0 {
            return Ok(());
        }
        b.leg = None;
        b.failures = 0;
        if let Some(orig) = b.detour.take() {
            b.goal = Some(orig);
            self.rec("Detour", &format!("{robot} resume {orig}"));
            return Ok(());
        }
        if b.resting {
            b.resting = false;
            self.set_state(robot, RobotState::Idle);
            self.rec("Resting", &format!("{robot} at={waypoint}"));
            return self.simple_command(robot, "Rest");
        }
        let Some(tid) = b.task else {
            self.set_state(robot, RobotState::Idle);
            return Ok(());
        };
        let task = self.task_mut(tid)?;
        match task.phase {
            Phase::ToPod => {
                task.phase = Phase::Lifting;
                self.set_state(robot, RobotState::PickingUp);
                self.simple_command(robot, "Pickup")
            }
            Phase::ToStation => {
                task.phase = Phase::AtStation;
                let (station, kind, pod) = (task.station, task.kind, task.pod);
                self.set_state(robot, RobotState::AtStation);
                if kind == ReqKind::Extract {
                    self.metrics.pick_visits += 1;
                }
                self.rec("AtStation", &format!("{robot} {pod} {station}"));
                self.station_step(station)
            }
            Phase::ToStorage => {
                task.phase = Phase::Lowering;
                self.set_state(robot, RobotState::SettingDown);
                self.simple_command(robot, "Setdown")
            }
            p => Err(EngineError::Internal(format!("{robot} arrived during {p:?}"))),
        }
    }

    fn on_lift(&mut self, robot: RobotId, kind: LiftKind, ok: bool) -> Result<(), EngineError> {
        if self.bot(robot)?.lost {
            return Ok(());
        }
        let Some(tid) = self.bot(robot)?.task else {
            return Err(EngineError::Internal(format!("{robot} lifted without a task")));
        };
        let task = self.tasks[&tid].clone();
        if !ok {
            let retries = self.cfg.sim.pickup_retries;
            let b = self.bot_mut(robot)?;
            b.pickup_failures += 1;
            let n = b.pickup_failures;
            self.rec("LiftFailed", &format!("{robot} {} {kind:?} attempt={n}", task.pod));
            if n <= retries {
                return self.simple_command(robot, if kind == LiftKind::Pickup { "Pickup" } else { "Setdown" });
            }
            return self.on_robot_lost(robot, "lift failed");
        }
        self.bot_mut(robot)?.pickup_failures = 0;
        match kind {
            LiftKind::Pickup => {
                let place = match self.world.pod(task.pod).map(|p| p.location) {
                    Some(PodLocation::Storage(w)) => w,
                    other => {
                        return Err(EngineError::Internal(format!("{} not in storage: {other:?}", task.pod)));
                    }
                };
                self.world.lift(robot, task.pod);
                self.set_state(robot, RobotState::Moving);
                self.task_mut(tid)?.phase = Phase::ToStation;
                self.rec("Pickup", &format!("{robot} {} from={place}", task.pod));
                self.record_departure(task.pod, place, task.station)?;
            }
            LiftKind::Setdown => {
                let pod = self
                    .world
                    .set_down(robot)
                    .ok_or_else(|| EngineError::Internal(format!("{robot} set down nothing")))?;
                let loc = self.world.pod(pod).map(|p| p.location);
                self.rec("Setdown", &format!("{robot} {pod}"));
                if let Some(loc) = loc {
                    self.rec("PodLocation", &format!("{pod} {loc}"));
                }
                if let Some(place) = task.place {
                    self.claimed_places.remove(&place);
                }
                self.pod_task.remove(&pod);
                self.tasks.remove(&tid);
                let now = self.now;
                let b = self.bot_mut(robot)?;
                b.task = None;
                if let Some(s) = b.busy_since.take() {
                    b.busy_total += now - s;
                }
                self.set_state(robot, RobotState::Idle);
                self.rec("TaskDone", &format!("{tid} {robot}"));
            }
        }
        Ok(())
    }

    fn on_robot_lost(&mut self, robot: RobotId, reason: &str) -> Result<(), EngineError> {
        let now = self.now;
        let Some(b) = self.bots.get_mut(&robot) else {
            return Ok(());
        };
        if b.lost {
            return Ok(());
        }
        b.lost = true;
        b.goal = None;
        b.leg = None;
        b.detour = None;
        b.resting = false;
        if let Some(s) = b.busy_since.take() {
            b.busy_total += now - s;
        }
        let task = b.task.take();
        let at = self.world.robot(robot).map(|r| r.waypoint).unwrap_or(WaypointId(0));
        self.set_state(robot, RobotState::Unavailable);
        self.table.release(robot, at, now);
        self.rec("Unavailable", &format!("{robot} at={at} {reason}"));
        for rt in self.stations.values_mut() {
            if rt.holder == Some(robot) {
                rt.holder = None;
            }
        }
        if let Some(tid) = task {
            let t = self.tasks[&tid].clone();
            let pod_here = match self.world.pod(t.pod).map(|p| p.location) {
                Some(PodLocation::Storage(w)) => w == at,
                _ => true,
            };
            if matches!(t.phase, Phase::ToPod | Phase::Lifting) && !pod_here {
                let task = self.task_mut(tid)?;
                task.robot = None;
                task.phase = Phase::Open;
                self.rec("TaskRequeued", &format!("{tid}"));
            } else {
                self.dissolve_task(tid);
            }
        }
        Ok(())
    }

    /// Drops a task and returns its requests to their station queues.
    fn dissolve_task(&mut self, tid: TaskId) {
        let Some(t) = self.tasks.remove(&tid) else {
            return;
        };
        self.pod_task.remove(&t.pod);
        if let Some(p) = t.place {
            self.claimed_places.remove(&p);
        }
        for r in self.requests.values_mut() {
            if r.task == Some(tid) {
                r.task = None;
                r.compartment = None;
            }
        }
        self.rec("TaskDissolved", &format!("{tid} {}", t.pod));
    }

    // --------------------------------------------------------------- station

    fn station_step(&mut self, station: StationId) -> Result<(), EngineError> {
        let rt = &self.stations[&station];
        if rt.outstanding.is_some() {
            return Ok(());
        }
        let Some(robot) = rt.holder else {
            return Ok(());
        };
        let Some(tid) = self.bots[&robot].task else {
            return Ok(());
        };
        if self.tasks.get(&tid).map(|t| t.phase) != Some(Phase::AtStation) {
            return Ok(());
        }
        let next = self.queues[&station]
            .iter()
            .copied()
            .find(|q| self.requests[q].task == Some(tid));
        match next {
            Some(q) => self.issue_line(station, tid, q),
            None => self.release(station, tid),
        }
    }

    fn issue_line(&mut self, station: StationId, tid: TaskId, q: RequestId) -> Result<(), EngineError> {
        let task = self.tasks[&tid].clone();
        let req = self.requests[&q].clone();
        let pod = self
            .world
            .pod(task.pod)
            .ok_or_else(|| EngineError::Internal(format!("missing {}", task.pod)))?
            .clone();
        let (kind, compartment, qty) = match req.kind {
            ReqKind::Extract => {
                let c = pod
                    .compartments()
                    .iter()
                    .filter(|c| c.sku.as_ref() == Some(&req.sku) && c.count > 0)
                    .max_by_key(|c| (c.count, std::cmp::Reverse(c.index)));
                match c {
                    Some(c) => (LineKind::Pick, c.index, c.count.min(req.quantity)),
                    None => {
                        self.unbind_to_tail(q, "pod has no stock");
                        return self.station_step(station);
                    }
                }
            }
            ReqKind::Insert => {
                let c = req
                    .compartment
                    .filter(|c| {
                        pod.compartment(*c)
                            .is_some_and(|x| x.accepts(&req.sku) && x.free() >= req.quantity)
                    })
                    .or_else(|| best_put_compartment(&pod, &req.sku, req.quantity));
                match c {
                    Some(c) => (LineKind::Put, c, req.quantity),
                    None => {
                        self.unbind_to_tail(q, "pod has no room");
                        return self.station_step(station);
                    }
                }
            }
        };
        self.next_msg += 1;
        let msg_id = self.next_msg;
        let out = Outstanding {
            station,
            msg_id,
            kind,
            request: q,
            transfer: req.transfer,
            line: req.line,
            pod: task.pod,
            compartment,
            sku: req.sku.clone(),
            quantity: qty,
        };
        let info = self.gateway.issue_info(out, &pod);
        let (frame, name) = match kind {
            LineKind::Pick => (
                Frame::PickingInfo {
                    station_id: station.0,
                    msg_id,
                    info,
                },
                "PickingInfo",
            ),
            LineKind::Put => (
                Frame::ReplenishInfo {
                    station_id: station.0,
                    msg_id,
                    info,
                },
                "ReplenishInfo",
            ),
        };
        let owner = match (req.order, req.bundle) {
            (Some(o), _) => o.to_string(),
            (_, Some(b)) => b.to_string(),
            _ => String::new(),
        };
        self.rec(
            name,
            &format!("{station} m{msg_id} {q} {owner} {} c={compartment} {}*{qty}", task.pod, req.sku),
        );
        self.stations.get_mut(&station).expect("station").outstanding = Some(msg_id);
        if let Some(robot) = task.robot {
            let id = self.msg_id(robot);
            let f = match kind {
                LineKind::Pick => Frame::GetItem {
                    robot_id: robot.0,
                    msg_id: id,
                    request: q,
                },
                LineKind::Put => Frame::PutItem {
                    robot_id: robot.0,
                    msg_id: id,
                    bundle: req.bundle.unwrap_or(BundleId(0)),
                },
            };
            self.command(robot, &[f])?;
        }
        let replies = self.agents.station(station, &frame)?;
        for r in replies {
            if let Frame::StationReply {
                msg_id, verdict, text, ..
            } = r
            {
                self.queue.schedule(
                    self.now + self.cfg.sim.t_pick_line,
                    EventKind::StationConfirm {
                        station,
                        msg_id,
                        verdict,
                        text,
                    },
                )?;
            }
        }
        Ok(())
    }

    fn unbind_to_tail(&mut self, q: RequestId, why: &str) {
        let Some(r) = self.requests.get_mut(&q) else {
            return;
        };
        r.task = None;
        r.compartment = None;
        r.requeues += 1;
        let (station, n) = (r.station, r.requeues);
        let queue = self.queues.get_mut(&station).expect("station queue");
        queue.retain(|x| *x != q);
        queue.push(q);
        self.rec("Requeue", &format!("{q} {station} tail requeues={n} {why}"));
    }

    fn on_confirm(
        &mut self,
        station: StationId,
        msg_id: u64,
        verdict: crate::wire::Verdict,
        text: Option<String>,
    ) -> Result<(), EngineError> {
        let outcome = self
            .gateway
            .apply_station_reply(&mut self.world, station, msg_id, verdict, text.as_deref())?;
        let rt = self.stations.get_mut(&station).expect("station");
        if rt.outstanding == Some(msg_id) {
            rt.outstanding = None;
        }
        match outcome {
            ReplyOutcome::Booked {
                request,
                kind,
                transfer,
                transfer_done,
                compartment,
                count_before,
                count_after,
                done_quantity,
            } => {
                let qty = count_before.abs_diff(count_after);
                let req = self.requests.get_mut(&request).expect("request");
                req.quantity = req.quantity.saturating_sub(qty);
                let (sku, remaining, task, line) = (req.sku.clone(), req.quantity, req.task, req.line);
                let pod = task.and_then(|t| self.tasks.get(&t)).map(|t| t.pod);
                let total = self
                    .gateway
                    .transfer(transfer)
                    .and_then(|t| t.moves.get(line))
                    .map_or(0, |m| m.quantity);
                self.rec(
                    "Inventory",
                    &format!(
                        "{} c={compartment} {sku} {count_before}->{count_after}",
                        pod.map(|p| p.to_string()).unwrap_or_default()
                    ),
                );
                self.rec("Move", &format!("{transfer} line={} done={done_quantity}/{total}", line));
                if let Some(t) = task.and_then(|t| self.tasks.get_mut(&t)) {
                    t.lines += 1;
                }
                if kind == LineKind::Pick {
                    self.metrics.pick_lines += 1;
                    if let Some(c) = self.committed.get_mut(&sku) {
                        *c = c.saturating_sub(u64::from(qty));
                    }
                }
                if remaining == 0 {
                    let req = self.requests.remove(&request).expect("request");
                    self.queues.get_mut(&req.station).expect("queue").retain(|x| *x != request);
                    self.rec("RequestDone", &format!("{request}"));
                    if let Some(b) = req.bundle.and_then(|b| self.bundles.get_mut(&b)) {
                        b.done = true;
                    }
                }
                if transfer_done {
                    self.rec("TransferDone", &format!("{transfer}"));
                    let order = self.gateway.transfer(transfer).and_then(|t| t.order);
                    if let Some(o) = order {
                        if let Some(rec) = self.orders.get_mut(&o) {
                            rec.done = true;
                        }
                        self.metrics.completed += 1;
                        self.rec("OrderDone", &format!("{o}"));
                        self.agents.feed(&Frame::TransferState {
                            msg_id: 0,
                            transfer_id: transfer,
                            state: FeedTransferState::Done,
                            order_id: Some(o),
                        });
                    }
                }
                if kind == LineKind::Put {
                    self.retry_parked();
                }
            }
            ReplyOutcome::Requeue { request, text } => {
                self.unbind_to_tail(request, &format!("error={text}"));
            }
            ReplyOutcome::Ignored => self.rec("ReplyIgnored", &format!("{station} m{msg_id}")),
        }
        self.station_step(station)
    }

    fn pod_available(&self, pod: PodId, sku: &Sku) -> u32 {
        let have = self.world.pod(pod).map_or(0, |p| p.count_of(sku));
        let bound: u32 = match self.pod_task.get(&pod) {
            Some(t) => self
                .requests
                .values()
                .filter(|r| r.task == Some(*t) && r.kind == ReqKind::Extract && &r.sku == sku)
                .map(|r| r.quantity)
                .sum(),
            None => 0,
        };
        have.saturating_sub(bound)
    }

    fn release(&mut self, station: StationId, tid: TaskId) -> Result<(), EngineError> {
        let task = self.tasks[&tid].clone();
        let head = self.queues[&station]
            .iter()
            .copied()
            .find(|q| self.requests[q].task.is_none());
        let pod = self.world.pod(task.pod).expect("pod").clone();
        let decision = {
            let need = head.map(|q| {
                let r = &self.requests[&q];
                match r.kind {
                    ReqKind::Extract => NextNeed::Extract {
                        sku: &r.sku,
                        quantity: r.quantity,
                    },
                    ReqKind::Insert => NextNeed::Insert {
                        sku: &r.sku,
                        quantity: r.quantity,
                    },
                }
            });
            pod_release_check(&pod, need)
        };
        match (decision, head) {
            (Release::ReuseAtStation, Some(q)) => {
                let kind = self.requests[&q].kind;
                let mut bound = vec![q];
                self.bind(q, tid, task.pod);
                if kind == ReqKind::Extract {
                    let rest: Vec<RequestId> = self.queues[&station]
                        .iter()
                        .copied()
                        .filter(|x| self.requests[x].task.is_none() && self.requests[x].kind == ReqKind::Extract)
                        .collect();
                    for x in rest {
                        let r = &self.requests[&x];
                        if self.pod_available(task.pod, &r.sku) >= r.quantity {
                            self.bind(x, tid, task.pod);
                            bound.push(x);
                        }
                    }
                }
                self.rec("Release", &format!("{} reuse {}", task.pod, fmt_ids(&bound)));
                self.station_step(station)
            }
            _ => {
                self.rec("Release", &format!("{} store", task.pod));
                self.task_mut(tid)?.phase = Phase::AwaitPlace;
                self.try_store(tid)
            }
        }
    }

    fn bind(&mut self, q: RequestId, tid: TaskId, pod: PodId) {
        let compartment = {
            let r = &self.requests[&q];
            match r.kind {
                ReqKind::Insert => self
                    .world
                    .pod(pod)
                    .and_then(|p| best_put_compartment(p, &r.sku, r.quantity)),
                ReqKind::Extract => None,
            }
        };
        let r = self.requests.get_mut(&q).expect("request");
        r.task = Some(tid);
        if compartment.is_some() {
            r.compartment = compartment;
        }
    }

    fn free_places(&self, from: WaypointId) -> Vec<(WaypointId, u32)> {
        let mut taken: BTreeSet<WaypointId> = self.claimed_places.keys().copied().collect();
        for p in self.world.pods() {
            if let PodLocation::Storage(w) = p.location {
                taken.insert(w);
            }
        }
        for (id, b) in &self.bots {
            if let Some(r) = self.world.robot(*id) {
                taken.insert(r.waypoint);
            }
            if let Some(g) = b.goal {
                taken.insert(g);
            }
            if let Some((g, _)) = b.leg {
                taken.insert(g);
            }
        }
        self.storage
            .iter()
            .filter(|w| !taken.contains(w))
            .map(|&w| (w, self.layout.graph_distance(from, w).unwrap_or(u32::MAX)))
            .collect()
    }

    fn try_store(&mut self, tid: TaskId) -> Result<(), EngineError> {
        let task = self.tasks[&tid].clone();
        let Some(robot) = task.robot else {
            return Ok(());
        };
        let station_wp = self.layout.station(task.station).map(|s| s.waypoint).expect("station");
        let ctx = PrContext {
            pod: task.pod,
            station: task.station,
            free: self.free_places(station_wp),
            home: self.home.get(&task.pod).copied(),
        };
        let choice = self.plugins.pr.choose(&ctx)?;
        let Some(place) = choice else {
            if !task.pr_deferred {
                self.task_mut(tid)?.pr_deferred = true;
                self.rec("PR", &format!("{} {} deferred", task.pod, task.station));
            }
            self.schedule_retry()?;
            return Ok(());
        };
        if let Err(e) = validate::place(place, &ctx) {
            self.metrics.invalid_decisions += 1;
            self.rec("Invalid", &format!("PR {e}"));
            self.schedule_retry()?;
            return Ok(());
        }
        self.claimed_places.insert(place, tid);
        let t = self.task_mut(tid)?;
        t.place = Some(place);
        t.phase = Phase::ToStorage;
        self.bot_mut(robot)?.goal = Some(place);
        self.rec("PR", &format!("{} {} -> {place}", task.pod, task.station));
        self.record_store(task.pod, task.station, place)
    }

    // ---------------------------------------------------------------- ledger

    fn record_store(&mut self, pod: PodId, station: StationId, place: WaypointId) -> Result<(), EngineError> {
        let k = self.pairing.store_count;
        self.pairing.store_count += 1;
        self.pairing.last_store.insert(pod, k);
        self.pairing.stores.push_back((station, place));
        self.pair_epochs()
    }

    fn record_departure(&mut self, pod: PodId, place: WaypointId, station: StationId) -> Result<(), EngineError> {
        let j = self.pairing.depart_count;
        self.pairing.depart_count += 1;
        self.pairing.departs.push_back((place, station));
        self.pair_epochs()?;
        if let Some(k) = self.pairing.last_store.remove(&pod) {
            let b = self.cfg.ledger.burn_in;
            if k >= b {
                let (a, d) = (k - b, j - b);
                self.ledger.link_departure(a, d)?;
                self.rec("LedgerLink", &format!("a={a} d={d} {pod}"));
            }
        }
        Ok(())
    }

    fn pair_epochs(&mut self) -> Result<(), EngineError> {
        while !self.pairing.stores.is_empty() && !self.pairing.departs.is_empty() {
            let (s, pi) = self.pairing.stores.pop_front().expect("store");
            let (p, tau) = self.pairing.departs.pop_front().expect("departure");
            let e = self.pairing.epochs;
            self.pairing.epochs += 1;
            if e < self.cfg.ledger.burn_in {
                continue;
            }
            let t = self.ledger.record_epoch(s, pi, p, tau)?;
            self.rec("LedgerEpoch", &format!("t={t} S={s} pi={pi} P={p} tau={tau}"));
        }
        Ok(())
    }

    // ------------------------------------------------------------- decisions

    fn schedule_retry(&mut self) -> Result<(), EngineError> {
        let at = self.now + self.edge_time.max(1e-3);
        if self.retry_at.is_none_or(|t| t > at) {
            self.retry_at = Some(at);
            self.queue.schedule(at, EventKind::DecisionDue)?;
        }
        Ok(())
    }

    fn pass(&mut self) -> Result<(), EngineError> {
        self.admit_transfers()?;
        self.roa()?;
        self.poa()?;
        self.rps()?;
        self.pps()?;
        self.pending_stores()?;
        self.station_access()?;
        self.ta()?;
        self.pp()?;
        Ok(())
    }

    fn admit_transfers(&mut self) -> Result<(), EngineError> {
        for t in self.gateway.poll_feed() {
            match t.kind {
                TransferKind::OutgoingPlanned => {
                    let Some(o) = t.order else { continue };
                    let lines = t
                        .moves
                        .iter()
                        .map(|m| OrderLine {
                            sku: m.sku.clone(),
                            quantity: m.quantity,
                        })
                        .collect();
                    self.orders.insert(
                        o,
                        OrderRec {
                            transfer: t.id,
                            lines,
                            arrival: t.created,
                            station: None,
                            done: false,
                        },
                    );
                    if !self.try_accept(o) {
                        self.parked.push(o);
                        self.metrics.parked_total += 1;
                        self.rec("Parked", &format!("{o}"));
                    }
                }
                TransferKind::InternalReplenish => {
                    for (line, m) in t.moves.iter().enumerate() {
                        let Some(b) = m.bundle else { continue };
                        self.bundles.insert(
                            b,
                            BundleRec {
                                transfer: t.id,
                                line,
                                sku: m.sku.clone(),
                                quantity: m.quantity,
                                arrival: t.created,
                                station: None,
                                done: false,
                            },
                        );
                        self.bundle_backlog.push(b);
                        self.rec("Bundle", &format!("{b} {}*{} {}", m.sku, m.quantity, t.id));
                    }
                }
            }
        }
        Ok(())
    }

    /// Accepts an order when uncommitted stock covers every line.
    fn try_accept(&mut self, o: OrderId) -> bool {
        let mut need: BTreeMap<Sku, u64> = BTreeMap::new();
        for l in &self.orders[&o].lines {
            *need.entry(l.sku.clone()).or_default() += u64::from(l.quantity);
        }
        let fits = need.iter().all(|(s, n)| {
            let free = self
                .world
                .stock(s)
                .saturating_sub(self.committed.get(s).copied().unwrap_or(0));
            free >= *n
        });
        if fits {
            for (s, n) in need {
                *self.committed.entry(s).or_default() += n;
            }
            self.order_backlog.push(o);
            self.metrics.accepted += 1;
            self.rec("Accept", &format!("{o}"));
        }
        fits
    }

    fn retry_parked(&mut self) {
        let parked = std::mem::take(&mut self.parked);
        for o in parked {
            if !self.try_accept(o) {
                self.parked.push(o);
            }
        }
    }

    fn station_pod_tasks(&self, station: StationId) -> u32 {
        self.tasks.values().filter(|t| t.station == station).count() as u32
    }

    fn roa(&mut self) -> Result<(), EngineError> {
        if self.bundle_backlog.is_empty() {
            return Ok(());
        }
        let backlog: Vec<BundleView> = self
            .bundle_backlog
            .iter()
            .map(|b| {
                let r = &self.bundles[b];
                BundleView {
                    id: *b,
                    sku: r.sku.clone(),
                    quantity: r.quantity,
                    arrival: r.arrival,
                }
            })
            .collect();
        let loads: Vec<StationLoad> = self
            .layout
            .stations()
            .iter()
            .filter(|s| s.kind == StationKind::Replenish)
            .map(|s| StationLoad {
                station: s.id,
                assigned: self
                    .bundles
                    .values()
                    .filter(|b| b.station == Some(s.id) && !b.done)
                    .count() as u32,
                slots: self.cfg.sim.bundle_slots,
            })
            .filter(|l| l.free() > 0)
            .collect();
        if loads.is_empty() {
            return Ok(());
        }
        let decision = self.plugins.roa.assign(&backlog, &loads)?;
        let ids: Vec<BundleId> = backlog.iter().map(|b| b.id).collect();
        if let Err(e) = validate::station_assignment(&decision, &ids, &loads) {
            self.metrics.invalid_decisions += 1;
            self.rec("Invalid", &format!("ROA {e}"));
            return Ok(());
        }
        for (b, s) in decision {
            self.bundle_backlog.retain(|x| *x != b);
            let rec = self.bundles.get_mut(&b).expect("bundle");
            rec.station = Some(s);
            let (transfer, line, sku, quantity) = (rec.transfer, rec.line, rec.sku.clone(), rec.quantity);
            self.rec("ROA", &format!("{b} -> {s}"));
            let q = self.new_request(ReqKind::Insert, transfer, line, None, Some(b), sku, quantity, s);
            let r = &self.requests[&q];
            let line = format!("{q} {b} {}*{} {s}", r.sku, r.quantity);
            self.rec("InsertRequest", &line);
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn new_request(
        &mut self,
        kind: ReqKind,
        transfer: TransferId,
        line: usize,
        order: Option<OrderId>,
        bundle: Option<BundleId>,
        sku: Sku,
        quantity: u32,
        station: StationId,
    ) -> RequestId {
        let id = RequestId(self.next_request);
        self.next_request += 1;
        self.requests.insert(
            id,
            Req {
                kind,
                transfer,
                line,
                order,
                bundle,
                sku,
                quantity,
                station,
                task: None,
                compartment: None,
                requeues: 0,
                rps_miss_logged: false,
            },
        );
        self.queues.get_mut(&station).expect("station queue").push(id);
        id
    }

    fn poa(&mut self) -> Result<(), EngineError> {
        if self.order_backlog.is_empty() {
            return Ok(());
        }
        let backlog: Vec<OrderView> = self
            .order_backlog
            .iter()
            .map(|o| {
                let r = &self.orders[o];
                OrderView {
                    id: *o,
                    skus: r.lines.iter().map(|l| l.sku.clone()).collect(),
                    arrival: r.arrival,
                }
            })
            .collect();
        let views: Vec<PickStationView> = self
            .layout
            .stations()
            .iter()
            .filter(|s| s.kind == StationKind::Pick)
            .map(|s| PickStationView {
                load: StationLoad {
                    station: s.id,
                    assigned: self
                        .orders
                        .values()
                        .filter(|o| o.station == Some(s.id) && !o.done)
                        .count() as u32,
                    slots: self.cfg.sim.order_slots,
                },
                queued_skus: self.queues[&s.id]
                    .iter()
                    .map(|q| self.requests[q].sku.clone())
                    .collect(),
            })
            .filter(|v| v.load.free() > 0)
            .collect();
        if views.is_empty() {
            return Ok(());
        }
        let decision = self.plugins.poa.assign(&backlog, &views)?;
        let ids: Vec<OrderId> = backlog.iter().map(|o| o.id).collect();
        let loads: Vec<StationLoad> = views.iter().map(|v| v.load.clone()).collect();
        if let Err(e) = validate::station_assignment(&decision, &ids, &loads) {
            self.metrics.invalid_decisions += 1;
            self.rec("Invalid", &format!("POA {e}"));
            return Ok(());
        }
        for (o, s) in decision {
            self.order_backlog.retain(|x| *x != o);
            let rec = self.orders.get_mut(&o).expect("order");
            rec.station = Some(s);
            let transfer = rec.transfer;
            self.rec("POA", &format!("{o} -> {s}"));
            let t = self
                .gateway
                .transfer(transfer)
                .cloned()
                .ok_or(GatewayError::UnknownTransfer(transfer))?;
            for r in OrderGateway::transfer_to_requests(&t)? {
                if let GatewayRequest::Extract {
                    transfer,
                    order,
                    line,
                    sku,
                    quantity,
                } = r
                {
                    let q = self.new_request(ReqKind::Extract, transfer, line, Some(order), None, sku, quantity, s);
                    let r = &self.requests[&q];
                    let line = format!("{q} {o} {}*{} {s}", r.sku, r.quantity);
                    self.rec("ExtractRequest", &line);
                }
            }
        }
        Ok(())
    }

    /// Pods in storage that no task holds and no lost robot sits on.
    fn idle_pods(&self) -> Vec<(PodId, WaypointId)> {
        let lost: BTreeSet<WaypointId> = self
            .bots
            .iter()
            .filter(|(_, b)| b.lost)
            .filter_map(|(id, _)| self.world.robot(*id).map(|r| r.waypoint))
            .collect();
        self.world
            .pods()
            .filter(|p| !self.pod_task.contains_key(&p.id))
            .filter_map(|p| match p.location {
                PodLocation::Storage(w) if !lost.contains(&w) => Some((p.id, w)),
                _ => None,
            })
            .collect()
    }

    fn new_task(&mut self, kind: ReqKind, station: StationId, pod: PodId) -> TaskId {
        let id = TaskId(self.next_task);
        self.next_task += 1;
        self.tasks.insert(
            id,
            Task {
                kind,
                station,
                pod,
                robot: None,
                phase: Phase::Open,
                place: None,
                lines: 0,
                pr_deferred: false,
            },
        );
        self.pod_task.insert(pod, id);
        id
    }

    fn rps(&mut self) -> Result<(), EngineError> {
        let stations: Vec<(StationId, WaypointId, u32)> = self
            .layout
            .stations()
            .iter()
            .filter(|s| s.kind == StationKind::Replenish)
            .map(|s| (s.id, s.waypoint, s.capacity))
            .collect();
        for (station, swp, capacity) in stations {
            let pending: Vec<RequestId> = self.queues[&station]
                .iter()
                .copied()
                .filter(|q| self.requests[q].task.is_none())
                .collect();
            for q in pending {
                if self.station_pod_tasks(station) >= capacity {
                    break;
                }
                let r = self.requests[&q].clone();
                let pods: Vec<PodRoom> = self
                    .idle_pods()
                    .into_iter()
                    .filter_map(|(pod, w)| {
                        let p = self.world.pod(pod)?;
                        let free = p
                            .compartments()
                            .iter()
                            .filter(|c| c.accepts(&r.sku))
                            .map(|c| c.free())
                            .max()?;
                        (free > 0).then(|| PodRoom {
                            pod,
                            free,
                            distance: self.layout.graph_distance(w, swp).unwrap_or(u32::MAX),
                        })
                    })
                    .collect();
                let bundle = BundleView {
                    id: r.bundle.unwrap_or(BundleId(0)),
                    sku: r.sku.clone(),
                    quantity: r.quantity,
                    arrival: 0.0,
                };
                let split = self.plugins.allow_bundle_split;
                let choice = self.plugins.rps.select(&bundle, &pods, split)?;
                let Some(pod) = choice else {
                    if !r.rps_miss_logged {
                        self.metrics.rps_misses += 1;
                        self.requests.get_mut(&q).expect("request").rps_miss_logged = true;
                        self.rec("RPS", &format!("{q} no pod"));
                    }
                    continue;
                };
                if let Err(e) = validate::store_pod(pod, &bundle, &pods, split) {
                    self.metrics.invalid_decisions += 1;
                    self.rec("Invalid", &format!("RPS {e}"));
                    continue;
                }
                let room = pods.iter().find(|p| p.pod == pod).map_or(0, |p| p.free);
                if room < r.quantity {
                    let rest = r.quantity - room;
                    self.requests.get_mut(&q).expect("request").quantity = room;
                    let n = self.new_request(
                        ReqKind::Insert,
                        r.transfer,
                        r.line,
                        None,
                        r.bundle,
                        r.sku.clone(),
                        rest,
                        station,
                    );
                    self.rec("Split", &format!("{q} {}*{room} {n} {}*{rest}", r.sku, r.sku));
                }
                let tid = self.new_task(ReqKind::Insert, station, pod);
                self.bind(q, tid, pod);
                let c = self.requests[&q].compartment;
                self.rec(
                    "RPS",
                    &format!("{q} -> {pod} {tid} c={}", c.map(|c| c.to_string()).unwrap_or_default()),
                );
            }
        }
        Ok(())
    }

    fn pps(&mut self) -> Result<(), EngineError> {
        let stations: Vec<(StationId, WaypointId, u32)> = self
            .layout
            .stations()
            .iter()
            .filter(|s| s.kind == StationKind::Pick)
            .map(|s| (s.id, s.waypoint, s.capacity))
            .collect();
        for (station, swp, capacity) in stations {
            let unbound = |e: &Self| -> Vec<RequestId> {
                e.queues[&station]
                    .iter()
                    .copied()
                    .filter(|q| e.requests[q].task.is_none())
                    .collect()
            };
            let pending = unbound(self);
            if pending.is_empty() {
                continue;
            }
            // Split lines no single pod can cover.
            for q in &pending {
                let r = &self.requests[q];
                let best = self
                    .world
                    .pods()
                    .map(|p| self.pod_available(p.id, &r.sku))
                    .max()
                    .unwrap_or(0);
                if best > 0 && best < r.quantity {
                    let r = r.clone();
                    self.requests.get_mut(q).expect("request").quantity = best;
                    let rest = r.quantity - best;
                    let n = self.new_request(
                        ReqKind::Extract,
                        r.transfer,
                        r.line,
                        r.order,
                        None,
                        r.sku.clone(),
                        rest,
                        station,
                    );
                    // keep the remainder next to its sibling
                    let queue = self.queues.get_mut(&station).expect("queue");
                    queue.retain(|x| *x != n);
                    let at = queue.iter().position(|x| x == q).map_or(queue.len(), |i| i + 1);
                    queue.insert(at, n);
                    self.rec("Split", &format!("{q} {}*{best} {n} {}*{rest}", r.sku, r.sku));
                }
            }
            // Join pods already bound for this station.
            let mut en_route: Vec<(TaskId, PodId)> = self
                .tasks
                .iter()
                .filter(|(_, t)| t.station == station && t.kind == ReqKind::Extract && t.phase <= Phase::AtStation)
                .map(|(id, t)| (*id, t.pod))
                .collect();
            en_route.sort();
            for q in unbound(self) {
                let r = &self.requests[&q];
                let (sku, qty) = (r.sku.clone(), r.quantity);
                if let Some(&(tid, pod)) = en_route.iter().find(|(_, p)| self.pod_available(*p, &sku) >= qty) {
                    self.bind(q, tid, pod);
                    self.rec("PPS", &format!("{station} join {pod} {tid} [{q}]"));
                }
            }
            let pending = unbound(self);
            let slots = capacity.saturating_sub(self.station_pod_tasks(station)) as usize;
            if pending.is_empty() || slots == 0 {
                continue;
            }
            let requests: Vec<ExtractView> = pending
                .iter()
                .map(|q| {
                    let r = &self.requests[q];
                    ExtractView {
                        id: *q,
                        sku: r.sku.clone(),
                        quantity: r.quantity,
                    }
                })
                .collect();
            let skus: BTreeSet<&Sku> = requests.iter().map(|r| &r.sku).collect();
            let pods: Vec<PodStock> = self
                .idle_pods()
                .into_iter()
                .filter_map(|(pod, w)| {
                    let p = self.world.pod(pod)?;
                    let available: BTreeMap<Sku, u32> = skus
                        .iter()
                        .map(|s| ((*s).clone(), p.count_of(s)))
                        .filter(|(_, n)| *n > 0)
                        .collect();
                    (!available.is_empty()).then(|| PodStock {
                        pod,
                        available,
                        distance: self.layout.graph_distance(w, swp).unwrap_or(u32::MAX),
                    })
                })
                .collect();
            if pods.is_empty() {
                continue;
            }
            let decision = self.plugins.pps.build(&requests, &pods, slots)?;
            if let Err(e) = validate::pick_pods(&decision, &requests, &pods, slots) {
                self.metrics.invalid_decisions += 1;
                self.rec("Invalid", &format!("PPS {e}"));
                continue;
            }
            for (pod, reqs) in decision {
                let tid = self.new_task(ReqKind::Extract, station, pod);
                for q in &reqs {
                    self.bind(*q, tid, pod);
                }
                self.rec("PPS", &format!("{station} {pod} {tid} {}", fmt_ids(&reqs)));
            }
        }
        Ok(())
    }

    fn pending_stores(&mut self) -> Result<(), EngineError> {
        let waiting: Vec<TaskId> = self
            .tasks
            .iter()
            .filter(|(_, t)| t.phase == Phase::AwaitPlace)
            .map(|(id, _)| *id)
            .collect();
        for t in waiting {
            self.try_store(t)?;
        }
        Ok(())
    }

    /// Robots holding a pod for a busy station wait where they are.
    fn station_access(&mut self) -> Result<(), EngineError> {
        let mut waiting: Vec<(f64, RobotId, TaskId, StationId)> = self
            .tasks
            .iter()
            .filter(|(_, t)| t.phase == Phase::ToStation)
            .filter_map(|(id, t)| {
                let r = t.robot?;
                let b = &self.bots[&r];
                (b.goal.is_none() && b.leg.is_none() && !b.lost).then_some((b.priority, r, *id, t.station))
            })
            .collect();
        waiting.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, robot, _, station) in waiting {
            let rt = self.stations.get_mut(&station).expect("station");
            if rt.holder.is_none() || rt.holder == Some(robot) {
                rt.holder = Some(robot);
                let wp = self.layout.station(station).expect("station").waypoint;
                self.bot_mut(robot)?.goal = Some(wp);
                self.rec("StationAccess", &format!("{robot} {station}"));
            }
        }
        Ok(())
    }

    fn available_robots(&self) -> Vec<RobotView> {
        self.bots
            .iter()
            .filter(|(_, b)| !b.lost && b.task.is_none() && b.leg.is_none() && b.goal.is_none() && b.detour.is_none())
            .filter_map(|(id, _)| {
                self.world.robot(*id).map(|r| RobotView {
                    id: *id,
                    at: r.waypoint,
                })
            })
            .collect()
    }

    fn ta(&mut self) -> Result<(), EngineError> {
        let open: Vec<TaskView> = self
            .tasks
            .iter()
            .filter(|(_, t)| t.phase == Phase::Open)
            .filter_map(|(id, t)| match self.world.pod(t.pod)?.location {
                PodLocation::Storage(w) => Some(TaskView { id: *id, start: w }),
                _ => None,
            })
            .collect();
        let robots = self.available_robots();
        if robots.is_empty() {
            return Ok(());
        }
        if !open.is_empty() {
            let decision = self.plugins.ta.allocate(&self.layout, &open, &robots)?;
            if let Err(e) = validate::task_allocation(&decision, &open, &robots) {
                self.metrics.invalid_decisions += 1;
                self.rec("Invalid", &format!("TA {e}"));
            } else {
                for (tid, robot) in decision {
                    let start = open.iter().find(|t| t.id == tid).expect("task").start;
                    let t = self.task_mut(tid)?;
                    t.robot = Some(robot);
                    t.phase = Phase::ToPod;
                    let now = self.now;
                    let b = self.bot_mut(robot)?;
                    b.task = Some(tid);
                    b.goal = Some(start);
                    b.priority = now;
                    b.busy_since.get_or_insert(now);
                    self.rec("TA", &format!("{tid} -> {robot}"));
                }
            }
        }
        // Robots still without work head for a dwelling point.
        let idle: Vec<RobotView> = self
            .available_robots()
            .into_iter()
            .filter(|r| !self.dwelling.contains(&r.at))
            .collect();
        if idle.is_empty() {
            return Ok(());
        }
        let free = self.free_dwelling(None);
        if free.is_empty() {
            return Ok(());
        }
        for (robot, w) in self.plugins.ta.rest(&self.layout, &idle, &free) {
            let b = self.bot_mut(robot)?;
            b.goal = Some(w);
            b.resting = true;
            self.rec("Rest", &format!("{robot} -> {w}"));
        }
        Ok(())
    }

    fn free_dwelling(&self, except: Option<RobotId>) -> Vec<WaypointId> {
        let mut taken = BTreeSet::new();
        for (id, b) in &self.bots {
            if Some(*id) == except {
                continue;
            }
            if let Some(r) = self.world.robot(*id) {
                taken.insert(r.waypoint);
            }
            taken.extend(b.goal);
            taken.extend(b.leg.map(|l| l.0));
        }
        self.dwelling.iter().copied().filter(|w| !taken.contains(w)).collect()
    }

    fn pp(&mut self) -> Result<(), EngineError> {
        let mut todo: Vec<(f64, RobotId)> = self
            .bots
            .iter()
            .filter(|(_, b)| b.goal.is_some() && b.leg.is_none() && !b.lost)
            .map(|(id, b)| (b.priority, *id))
            .collect();
        todo.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, robot) in todo {
            let goal = self.bots[&robot].goal.expect("goal");
            let r = self.world.robot(robot).expect("robot");
            let (start, heading) = (r.waypoint, r.heading);
            if start == goal {
                let b = self.bot_mut(robot)?;
                b.goal = None;
                b.leg = Some((goal, 0));
                self.rec("PP", &format!("{robot} {start} -> {goal} moves=0"));
                self.queue.schedule(self.now, EventKind::RobotArrived { robot, waypoint: goal })?;
                continue;
            }
            let req = PlanRequest {
                robot,
                start,
                heading,
                start_time: self.now,
                goal,
            };
            match plan(&self.layout, &self.table, &self.cfg.kinematics, &req, &self.limits) {
                Ok(path) => {
                    self.table
                        .reserve(robot, &path)
                        .map_err(|e| EngineError::Internal(e.to_string()))?;
                    let mut next = self.bots[&robot].next_msg;
                    let frames = leg_commands(robot, heading, &path, &mut next);
                    let b = self.bot_mut(robot)?;
                    b.next_msg = next;
                    b.goal = None;
                    b.leg = Some((goal, path.moves()));
                    self.rec(
                        "PP",
                        &format!(
                            "{robot} {start} -> {goal} moves={} arrive={:.6}",
                            path.moves(),
                            path.end_time()
                        ),
                    );
                    self.set_state(robot, RobotState::Moving);
                    // leaving the station frees it for the next pod
                    if let Some(tid) = self.bots[&robot].task {
                        let t = &self.tasks[&tid];
                        if t.phase == Phase::ToStorage {
                            let rt = self.stations.get_mut(&t.station).expect("station");
                            if rt.holder == Some(robot) {
                                rt.holder = None;
                            }
                        }
                    }
                    self.command(robot, &frames)?;
                }
                Err(e) => {
                    self.metrics.plan_failures += 1;
                    let limit = self.cfg.sim.replan_limit;
                    let b = self.bot_mut(robot)?;
                    b.failures += 1;
                    let n = b.failures;
                    self.rec("PlanFailed", &format!("{robot} -> {goal} attempt={n} {e}"));
                    if n >= limit && self.bots[&robot].detour.is_none() {
                        let free = self.free_dwelling(Some(robot));
                        let best = free
                            .into_iter()
                            .filter(|w| *w != start)
                            .min_by_key(|w| (self.layout.graph_distance(start, *w).unwrap_or(u32::MAX), w.0));
                        if let Some(w) = best {
                            let b = self.bot_mut(robot)?;
                            b.detour = Some(goal);
                            b.goal = Some(w);
                            b.failures = 0;
                            self.rec("Retreat", &format!("{robot} -> {w}"));
                        }
                    }
                    self.schedule_retry()?;
                }
            }
        }
        Ok(())
    }
}

/// Robot commands for one leg: a Turn wherever the heading changes and a Go
/// for each stretch driven without stopping, each stamped with its start time.
pub fn leg_commands(robot: RobotId, heading: Heading, path: &TimedPath, next_msg: &mut u64) -> Vec<Frame> {
    let steps = path.steps();
    let mut out = Vec::new();
    let mut heading = heading;
    let mut k = 0;
    let mut id = || {
        *next_msg += 1;
        *next_msg
    };
    while k + 1 < steps.len() {
        let s = steps[k];
        if s.heading_after != heading {
            out.push(Frame::Turn {
                robot_id: robot.0,
                msg_id: id(),
                degrees: heading.turn_to(s.heading_after),
                at: Some(s.arrival),
            });
            heading = s.heading_after;
        }
        let mut j = k + 1;
        while j + 1 < steps.len() && steps[j].departure == steps[j].arrival && steps[j].heading_after == heading {
            j += 1;
        }
        out.push(Frame::Go {
            robot_id: robot.0,
            msg_id: id(),
            waypoints: steps[k + 1..=j].iter().map(|s| s.waypoint).collect(),
            at: Some(s.departure),
        });
        k = j;
    }
    out
}

fn fmt_lines(lines: &[OrderLine]) -> String {
    let v: Vec<String> = lines.iter().map(|l| format!("{}*{}", l.sku, l.quantity)).collect();
    v.join(",")
}

fn fmt_ids<T: std::fmt::Display>(ids: &[T]) -> String {
    let mut s = String::from("[");
    for (i, x) in ids.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{x}");
    }
    s.push(']');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Kinematics;
    use crate::layout::{build_layout, Coord, LayoutConfig};
    use crate::planner::PlanLimits;

    #[test]
    fn leg_with_turn() {
        let l = build_layout(&LayoutConfig::grid(3, 4)).unwrap();
        let req = PlanRequest {
            robot: RobotId(0),
            start: l.waypoint(Coord::new(0, 0)).unwrap(),
            heading: Heading::East,
            start_time: 0.0,
            goal: l.waypoint(Coord::new(1, 1)).unwrap(),
        };
        let mut table = ReservationTable::new();
        table.release(RobotId(0), req.start, 0.0);
        let p = plan(&l, &table, &Kinematics::default(), &req, &PlanLimits::default()).unwrap();
        let mut n = 0;
        let frames = leg_commands(RobotId(0), Heading::East, &p, &mut n);
        let kinds: Vec<&str> = frames.iter().map(Frame::kind).collect();
        assert_eq!(kinds, vec!["Go", "Turn", "Go"]);
        let mut emu = EmuRobot::new(RobotId(0), req.start, Heading::East, Kinematics::default(), 1.0, 0.0, 1);
        let replies: Vec<Frame> = frames.iter().flat_map(|f| emu.respond(f)).collect();
        let last = replies.iter().rev().find_map(|f| match f {
            Frame::WaypointTag { at, waypoint, .. } => Some((*waypoint, at.unwrap())),
            _ => None,
        });
        assert_eq!(last, Some((req.goal, p.end_time())));
        assert_eq!(p.end_time(), 40.75);
    }
}
