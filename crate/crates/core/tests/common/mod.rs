//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::PathBuf;

use proptest::collection::vec;
use proptest::option;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rmfs_core::config::Config;
use rmfs_core::ids::{BundleId, OrderId, RequestId, RobotId, TransferId, WaypointId};
use rmfs_core::kinematics::{Heading, Kinematics};
use rmfs_core::layout::{build_layout, Layout, LayoutConfig};
use rmfs_core::planner::verify::Trajectory;
use rmfs_core::planner::{plan, PlanLimits, PlanRequest, ReservationTable, TimedPath};
use rmfs_core::wire::{
    Cell, CompartmentInfo, FeedLine, FeedTransferState, Frame, PodModel, ReplenishTarget, Role, StationInfo,
    StockLevel, Verdict,
};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load_config(name: &str) -> Config {
    Config::load(config_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Line index of each needle in order, each searched after the previous hit.
pub fn in_order(text: &str, needles: &[&str]) -> Vec<usize> {
    let lines: Vec<&str> = text.lines().collect();
    let mut from = 0;
    needles
        .iter()
        .map(|n| {
            let i = lines[from..]
                .iter()
                .position(|l| l.contains(n))
                .unwrap_or_else(|| panic!("{n:?} not found after line {from}"));
            from += i + 1;
            from - 1
        })
        .collect()
}

// ------------------------------------------------------------------ frames

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e12..1e12f64,
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
        Just(f64::MAX),
        Just(1e-300),
    ]
}

fn at() -> impl Strategy<Value = Option<f64>> {
    option::of(finite())
}

fn text() -> impl Strategy<Value = String> {
    prop_oneof![any::<String>(), "[a-z \"\\\\\n\t{}]{0,16}"]
}

fn cell() -> impl Strategy<Value = Cell> {
    (any::<u8>(), any::<u8>()).prop_map(|(row, col)| Cell { row, col })
}

fn station_info() -> impl Strategy<Value = StationInfo> {
    let compartments = vec(
        (any::<u8>(), any::<u8>(), option::of(text()), any::<u32>())
            .prop_map(|(row, col, item_id, count)| CompartmentInfo { row, col, item_id, count }),
        0..6,
    );
    let stock = option::of(
        (any::<u32>(), any::<u32>(), any::<u32>()).prop_map(|(optimum, maximum, min_presentation)| StockLevel {
            optimum,
            maximum,
            min_presentation,
        }),
    );
    let replenish = option::of(
        (cell(), vec(cell(), 0..4)).prop_map(|(best, alternatives)| ReplenishTarget { best, alternatives }),
    );
    (
        option::of(any::<u64>()),
        option::of(any::<u64>()),
        text(),
        text(),
        any::<u32>(),
        (any::<u8>(), any::<u8>()),
        stock,
        compartments,
        option::of(cell()),
        replenish,
    )
        .prop_map(
            |(order, bundle, item_id, name, quantity, (rows, cols), stock_level, compartments, pick, rep)| StationInfo {
                order_id: order.map(OrderId),
                bundle_id: bundle.map(BundleId),
                item_id,
                name,
                quantity,
                pod_model: PodModel { rows, cols },
                stock_level,
                compartments,
                compartment_to_pick: pick,
                compartment_to_replenish: rep,
            },
        )
}

fn feed_lines() -> impl Strategy<Value = Vec<FeedLine>> {
    vec((text(), any::<u32>()).prop_map(|(sku, quantity)| FeedLine { sku, quantity }), 0..5)
}

fn role() -> impl Strategy<Value = Role> {
    prop_oneof![Just(Role::Robot), Just(Role::Station), Just(Role::Feed)]
}

/// Frames of one kind, named as in [`Frame::KINDS`].
pub fn frame_of(kind: &str) -> BoxedStrategy<Frame> {
    let r = any::<u32>();
    let m = any::<u64>();
    match kind {
        "Go" => (r, m, vec(any::<u32>().prop_map(WaypointId), 0..12), at())
            .prop_map(|(robot_id, msg_id, waypoints, at)| Frame::Go { robot_id, msg_id, waypoints, at })
            .boxed(),
        "Turn" => (r, m, any::<i32>(), at())
            .prop_map(|(robot_id, msg_id, degrees, at)| Frame::Turn { robot_id, msg_id, degrees, at })
            .boxed(),
        "Rest" => (r, m, at())
            .prop_map(|(robot_id, msg_id, at)| Frame::Rest { robot_id, msg_id, at })
            .boxed(),
        "Pickup" => (r, m, at())
            .prop_map(|(robot_id, msg_id, at)| Frame::Pickup { robot_id, msg_id, at })
            .boxed(),
        "Setdown" => (r, m, at())
            .prop_map(|(robot_id, msg_id, at)| Frame::Setdown { robot_id, msg_id, at })
            .boxed(),
        "GetItem" => (r, m, any::<u64>())
            .prop_map(|(robot_id, msg_id, q)| Frame::GetItem { robot_id, msg_id, request: RequestId(q) })
            .boxed(),
        "PutItem" => (r, m, any::<u64>())
            .prop_map(|(robot_id, msg_id, b)| Frame::PutItem { robot_id, msg_id, bundle: BundleId(b) })
            .boxed(),
        "Error" => (r, m, text(), at())
            .prop_map(|(robot_id, msg_id, text, at)| Frame::Error { robot_id, msg_id, text, at })
            .boxed(),
        "WaypointTag" => (r, m, any::<u32>(), at())
            .prop_map(|(robot_id, msg_id, w, at)| Frame::WaypointTag {
                robot_id,
                msg_id,
                waypoint: WaypointId(w),
                at,
            })
            .boxed(),
        "Orientation" => (r, m, finite(), at())
            .prop_map(|(robot_id, msg_id, radians, at)| Frame::Orientation { robot_id, msg_id, radians, at })
            .boxed(),
        "PickupSuccess" => (r, m, any::<bool>(), at())
            .prop_map(|(robot_id, msg_id, ok, at)| Frame::PickupSuccess { robot_id, msg_id, ok, at })
            .boxed(),
        "SetdownSuccess" => (r, m, any::<bool>(), at())
            .prop_map(|(robot_id, msg_id, ok, at)| Frame::SetdownSuccess { robot_id, msg_id, ok, at })
            .boxed(),
        "PickingInfo" => (r, m, station_info())
            .prop_map(|(station_id, msg_id, info)| Frame::PickingInfo { station_id, msg_id, info })
            .boxed(),
        "ReplenishInfo" => (r, m, station_info())
            .prop_map(|(station_id, msg_id, info)| Frame::ReplenishInfo { station_id, msg_id, info })
            .boxed(),
        "StationReply" => (
            r,
            m,
            prop_oneof![Just(Verdict::Ok), Just(Verdict::Error)],
            option::of(text()),
            option::of(any::<u64>()),
            option::of(any::<u64>()),
            text(),
        )
            .prop_map(|(station_id, msg_id, verdict, text, o, b, item_id)| Frame::StationReply {
                station_id,
                msg_id,
                verdict,
                text,
                order_id: o.map(OrderId),
                bundle_id: b.map(BundleId),
                item_id,
            })
            .boxed(),
        "NewOrder" => (m, feed_lines())
            .prop_map(|(msg_id, lines)| Frame::NewOrder { msg_id, lines })
            .boxed(),
        "Receipt" => (m, feed_lines())
            .prop_map(|(msg_id, bundles)| Frame::Receipt { msg_id, bundles })
            .boxed(),
        "TransferState" => (
            m,
            any::<u64>(),
            prop_oneof![Just(FeedTransferState::Planned), Just(FeedTransferState::Done)],
            option::of(any::<u64>()),
        )
            .prop_map(|(msg_id, x, state, o)| Frame::TransferState {
                msg_id,
                transfer_id: TransferId(x),
                state,
                order_id: o.map(OrderId),
            })
            .boxed(),
        "Hello" => (role(), any::<u32>())
            .prop_map(|(role, id)| Frame::Hello { role, id })
            .boxed(),
        "Ping" => any::<u64>().prop_map(|seq| Frame::Ping { seq }).boxed(),
        "Pong" => any::<u64>().prop_map(|seq| Frame::Pong { seq }).boxed(),
        other => panic!("unknown frame kind {other}"),
    }
}

pub fn any_frame() -> impl Strategy<Value = Frame> {
    proptest::sample::select(Frame::KINDS.to_vec()).prop_flat_map(frame_of)
}

/// Lines that must never decode as a frame.
pub fn garbage_line() -> impl Strategy<Value = String> {
    prop_oneof![
        // whitespace-only lines are skipped by the reader, not reported
        "[^\n{]{1,40}".prop_filter("blank", |s| !s.trim().is_empty()),
        Just("{".to_owned()),
        Just("{\"type\":\"Nope\"}".to_owned()),
        Just("{\"type\":\"Ping\"}".to_owned()),
        Just("{\"type\":\"Ping\",\"seq\":1,\"extra\":2}".to_owned()),
        Just("[1,2,3]".to_owned()),
    ]
}

// -------------------------------------------------------------------- mapf

pub struct MapfRun {
    pub rows: u32,
    pub cols: u32,
    pub robots: usize,
    pub layout: Layout,
    pub kinematics: Kinematics,
    pub trajectories: Vec<Trajectory>,
    pub legs: usize,
    pub failures: usize,
}

/// Random grid between 3x4 and 10x10 with 2 to 8 robots, each driving
/// `legs_per_robot` legs to random free cells. Legs are planned in time
/// order against one shared reservation table, as the engine does.
pub fn mapf_scenario(seed: u64, legs_per_robot: usize) -> MapfRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.random_range(3..=10u32);
    let cols = rng.random_range(4..=10u32);
    let layout = build_layout(&LayoutConfig::grid(rows, cols)).unwrap();
    let kinematics = Kinematics::default();
    let tau = kinematics.edge_duration(layout.spacing_m());
    let mut cells: Vec<WaypointId> = layout.waypoints().collect();
    let n = rng.random_range(2..=8usize).min(cells.len() - 2);
    for i in 0..n {
        let j = rng.random_range(i..cells.len());
        cells.swap(i, j);
    }

    let mut table = ReservationTable::new();
    let mut pos: Vec<WaypointId> = cells[..n].to_vec();
    let mut heading: Vec<Heading> = (0..n).map(|_| Heading::from_quarter_turns(rng.random_range(0..4))).collect();
    let mut free_at = vec![0.0f64; n];
    let mut left = vec![legs_per_robot; n];
    let mut tries = vec![0usize; n];
    let mut trajectories: Vec<Trajectory> = (0..n)
        .map(|i| {
            let r = RobotId(i as u32);
            table.release(r, pos[i], 0.0);
            Trajectory::new(r, &TimedPath::stationary(pos[i], heading[i], 0.0))
        })
        .collect();

    let (mut legs, mut failures) = (0, 0);
    loop {
        let next = (0..n)
            .filter(|&i| left[i] > 0)
            .min_by(|&a, &b| free_at[a].total_cmp(&free_at[b]).then(a.cmp(&b)));
        let Some(i) = next else { break };
        let now = free_at[i];
        let goal = loop {
            let g = cells[rng.random_range(0..cells.len())];
            if !pos.contains(&g) {
                break g;
            }
        };
        let robot = RobotId(i as u32);
        let req = PlanRequest {
            robot,
            start: pos[i],
            heading: heading[i],
            start_time: now,
            goal,
        };
        match plan(&layout, &table, &kinematics, &req, &PlanLimits::default()) {
            Ok(path) => {
                table.reserve(robot, &path).expect("planned path reserves cleanly");
                trajectories[i].extend(&path);
                let last = path.steps().last().expect("non-empty path");
                pos[i] = last.waypoint;
                heading[i] = last.heading_after;
                free_at[i] = path.end_time();
                left[i] -= 1;
                legs += 1;
            }
            Err(_) => {
                failures += 1;
                tries[i] += 1;
                free_at[i] = now + tau;
                if tries[i] >= 5 {
                    left[i] -= 1;
                }
            }
        }
    }
    MapfRun {
        rows,
        cols,
        robots: n,
        layout,
        kinematics,
        trajectories,
        legs,
        failures,
    }
}

// ------------------------------------------------------- ledger from a log

/// Ledger epochs and departure links read back from an event log, with the
/// statistics recomputed by plain summation and Manhattan hop costs.
#[derive(Default)]
pub struct LogLedger {
    cols: u32,
    stations: BTreeMap<u32, u32>,
    /// `(S, pi, P, tau)` per epoch.
    pub epochs: Vec<(u32, u32, u32, u32)>,
    pub links: HashMap<usize, usize>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LogSums {
    pub direct: f64,
    pub departed: f64,
    pub residual: f64,
    pub shifted: f64,
    pub decomposed: f64,
}

fn field<'a>(payload: &'a str, key: &str) -> &'a str {
    payload
        .split(' ')
        .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in {payload:?}"))
}

fn num(s: &str) -> u32 {
    s.trim_start_matches(|c: char| c.is_ascii_alphabetic()).parse().unwrap()
}

impl LogLedger {
    pub fn parse(reader: impl BufRead) -> Self {
        let mut out = Self::default();
        for line in reader.lines() {
            let line = line.unwrap();
            let mut parts = line.splitn(4, '\t');
            let (Some(_), Some(_), Some(kind), Some(payload)) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                continue;
            };
            match kind {
                "Init" => out.cols = field(payload, "cols").parse().unwrap(),
                "Layout" if payload.starts_with("Station ") => {
                    let id = num(payload.split(' ').nth(1).unwrap());
                    out.stations.insert(id, num(field(payload, "at")));
                }
                "LedgerEpoch" => {
                    let t: usize = field(payload, "t").parse().unwrap();
                    assert_eq!(t, out.epochs.len(), "epochs out of order");
                    out.epochs.push((
                        num(field(payload, "S")),
                        num(field(payload, "pi")),
                        num(field(payload, "P")),
                        num(field(payload, "tau")),
                    ));
                }
                "LedgerLink" => {
                    let a = field(payload, "a").parse().unwrap();
                    let d = field(payload, "d").parse().unwrap();
                    out.links.insert(a, d);
                }
                _ => {}
            }
        }
        out
    }

    pub fn hops(&self, wp: u32, station: u32) -> f64 {
        let s = self.stations[&station];
        let (r1, c1) = (wp / self.cols, wp % self.cols);
        let (r2, c2) = (s / self.cols, s % self.cols);
        f64::from(r1.abs_diff(r2) + c1.abs_diff(c2))
    }

    pub fn sums(&self, n: usize) -> LogSums {
        let mut q: BTreeMap<u32, f64> = self.stations.keys().map(|s| (*s, 0.0)).collect();
        for e in &self.epochs[..n] {
            *q.get_mut(&e.3).unwrap() += 1.0;
        }
        let mut out = LogSums::default();
        for (t, &(s, pi, p, tau)) in self.epochs[..n].iter().enumerate() {
            let b = self.hops(pi, s);
            let cost = self.hops(p, tau) + b;
            out.direct += cost;
            match self.links.get(&t).filter(|&&d| d < n) {
                Some(&d) => {
                    out.departed += cost;
                    out.shifted += self.hops(pi, self.epochs[d].3) + b;
                    let mix: f64 = q.iter().map(|(st, c)| c / n as f64 * self.hops(pi, *st)).sum();
                    out.decomposed += mix + b;
                }
                None => {
                    out.residual += cost;
                    out.shifted += b;
                    out.decomposed += b;
                }
            }
        }
        let k = n as f64;
        LogSums {
            direct: out.direct / k,
            departed: out.departed / k,
            residual: out.residual / k,
            shifted: out.shifted / k,
            decomposed: out.decomposed / k,
        }
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

// ------------------------------------------------------------ random runs

/// A small random warehouse for property runs.
pub fn random_config(seed: u64) -> Config {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.random_range(3..=6u32);
    let cols = rng.random_range(4..=7u32);
    let robots = rng.random_range(1..=3u32);
    let pick = rng.random_range(1..=2u32);
    let pods = rng.random_range(2..=6u32);
    let rate = rng.random_range(5.0..60.0f64);
    let receipts = rng.random_range(0.0..20.0f64);
    let fault = if rng.random_bool(0.5) { rng.random_range(0.0..0.2f64) } else { 0.0 };
    let poa = ["fcfs", "common-lines", "random"][rng.random_range(0..3)];
    let pr = ["nearest", "random", "fixed"][rng.random_range(0..3)];
    let text = format!(
        r#"
[sim]
seed = {seed}
horizon_s = 1e9

[layout]
rows = {rows}
cols = {cols}
dwelling = []
random_stations = {{ seed = {seed}, pick = {pick}, replenish = 1 }}

[robots]
count = {robots}

[pods]
rows = 2
cols = 2
capacity = 6

[pods.generate]
count = {pods}
skus = ["a", "b", "c"]
fill = 3

[plugins]
poa = "{poa}"
pr = "{pr}"

[orders]
rate_per_hour = {rate}
receipts_per_hour = {receipts}
max_quantity = 2
bundle_quantity = 2

[agents]
pickup_fault_rate = {fault}
"#
    );
    Config::from_toml_str(&text).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{text}"))
}
