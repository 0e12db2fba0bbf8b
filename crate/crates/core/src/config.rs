//! Scenario configuration: one TOML file with a section per subsystem.
//! Unknown keys are rejected and every error carries the key path.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::ids::{PodId, RobotId, Sku, WaypointId};
use crate::kinematics::{Heading, Kinematics};
use crate::layout::{build_layout, Coord, Layout, LayoutConfig, LayoutError, StationKind, WaypointKind};
use crate::world::{CompartmentIndex, Pod, PodLocation, Robot, World, WorldError};

#[derive(Debug, Error, PartialEq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    /// Dotted key path, `.` for the document itself.
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub layout: LayoutConfig,
    #[serde(default)]
    pub kinematics: Kinematics,
    #[serde(default)]
    pub robots: RobotsConfig,
    #[serde(default)]
    pub pods: PodsConfig,
    #[serde(default)]
    pub plugins: PluginConfig,
    #[serde(default)]
    pub orders: OrdersConfig,
    #[serde(default)]
    pub agents: AgentsConfig,
    #[serde(default)]
    pub ledger: LedgerConfig,
    #[serde(default)]
    pub wire: WireConfig,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub seed: u64,
    pub horizon_s: f64,
    /// Station handling time per pick or put line.
    pub t_pick_line: f64,
    /// Concurrent orders per pick station.
    pub order_slots: u32,
    /// Concurrent bundles per replenishment station.
    pub bundle_slots: u32,
    pub pickup_retries: u32,
    /// Consecutive planning failures before a robot retreats to a dwelling point.
    pub replan_limit: u32,
    /// Interval between polls of an external order feed.
    pub feed_poll_s: f64,
    /// Stop once the ledger holds this many epochs (after burn-in).
    pub stop_after_epochs: Option<usize>,
    pub max_events: Option<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            horizon_s: 7200.0,
            t_pick_line: 5.0,
            order_slots: 4,
            bundle_slots: 4,
            pickup_retries: 3,
            replan_limit: 5,
            feed_poll_s: 10.0,
            stop_after_epochs: None,
            max_events: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RobotsConfig {
    pub count: u32,
    /// Explicit start cells; otherwise dwelling points first, then storage cells.
    pub at: Option<Vec<[u32; 2]>>,
    pub heading: Heading,
}

impl Default for RobotsConfig {
    fn default() -> Self {
        Self {
            count: 2,
            at: None,
            heading: Heading::East,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum FillMode {
    /// SKUs dealt to compartments in turn across all pods.
    #[default]
    RoundRobin,
    /// Every compartment of pod `i` holds `skus[i % len]`.
    Dedicated,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PodGenerate {
    pub count: u32,
    pub skus: Vec<String>,
    pub fill: u32,
    #[serde(default)]
    pub mode: FillMode,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ContentSpec {
    pub compartment: [u8; 2],
    pub sku: String,
    pub count: u32,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PodSpec {
    pub id: u32,
    pub at: [u32; 2],
    #[serde(default)]
    pub contents: Vec<ContentSpec>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PodsConfig {
    pub rows: u8,
    pub cols: u8,
    pub capacity: u32,
    /// Only the built-in default generates pods when a `[pods]` table omits this.
    #[serde(default)]
    pub generate: Option<PodGenerate>,
    #[serde(rename = "pod")]
    pub list: Vec<PodSpec>,
}

impl Default for PodsConfig {
    fn default() -> Self {
        Self {
            rows: 2,
            cols: 3,
            capacity: 10,
            generate: Some(PodGenerate {
                count: 6,
                skus: ["apple", "pear", "plum", "fig", "kiwi", "lime"]
                    .map(String::from)
                    .to_vec(),
                fill: 5,
                mode: FillMode::RoundRobin,
            }),
            list: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PluginConfig {
    pub roa: String,
    pub poa: String,
    pub rps: String,
    pub pps: String,
    pub pr: String,
    pub ta: String,
    pub pp: String,
    pub allow_bundle_split: bool,
}

impl Default for PluginConfig {
    fn default() -> Self {
        Self {
            roa: "fcfs-least-loaded".into(),
            poa: "fcfs".into(),
            rps: "max-free".into(),
            pps: "pile-on".into(),
            pr: "nearest".into(),
            ta: "nearest".into(),
            pp: "sipp".into(),
            allow_bundle_split: false,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub sku: String,
    pub quantity: u32,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScriptedFeed {
    pub at: f64,
    pub order: Option<Vec<LineSpec>>,
    pub receipt: Option<Vec<LineSpec>>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OrdersConfig {
    pub rate_per_hour: f64,
    pub mean_lines: f64,
    pub max_lines: u32,
    /// Units per line, uniform on `1..=max_quantity`.
    pub max_quantity: u32,
    /// Empty means uniform over the SKUs stocked at start.
    pub sku_weights: BTreeMap<String, f64>,
    pub receipts_per_hour: f64,
    pub bundles_per_receipt: u32,
    pub bundle_quantity: u32,
    /// No generated arrivals after this time.
    pub until_s: Option<f64>,
    /// Overrides the run seed for the generator streams.
    pub seed: Option<u64>,
    pub script: Vec<ScriptedFeed>,
}

impl Default for OrdersConfig {
    fn default() -> Self {
        Self {
            rate_per_hour: 0.0,
            mean_lines: 1.8,
            max_lines: 4,
            max_quantity: 1,
            sku_weights: BTreeMap::new(),
            receipts_per_hour: 0.0,
            bundles_per_receipt: 1,
            bundle_quantity: 5,
            until_s: None,
            seed: None,
            script: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScriptedStationError {
    pub station: u32,
    /// 1-based count of info messages sent to that station.
    pub message: u32,
    pub text: String,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AgentsConfig {
    /// Probability that a pickup reports failure (in-process robots).
    pub pickup_fault_rate: f64,
    pub station_errors: Vec<ScriptedStationError>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    #[default]
    Hops,
    TravelTime,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LedgerConfig {
    pub burn_in: usize,
    pub cost: CostKind,
    pub checkpoints: Vec<usize>,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        Self {
            burn_in: 100,
            cost: CostKind::Hops,
            checkpoints: vec![100, 1_000, 10_000],
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct WireConfig {
    pub bind: Option<String>,
    /// Seconds to wait for agents before starting.
    pub grace_s: f64,
    /// Use in-process agents for anything not connected after the grace period.
    pub fallback: bool,
    pub heartbeat_s: f64,
    pub missed_pongs: u32,
    /// Seconds to wait for the replies to one command in lockstep mode.
    pub reply_timeout_s: f64,
    /// Simulated seconds per wall-clock second in wall-clock mode.
    pub time_scale: f64,
    /// Poll for orders and receipts sent by feed connections.
    pub feed: bool,
}

impl Default for WireConfig {
    fn default() -> Self {
        Self {
            bind: None,
            grace_s: 10.0,
            fallback: true,
            heartbeat_s: 5.0,
            missed_pongs: 3,
            reply_timeout_s: 30.0,
            time_scale: 1.0,
            feed: false,
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| {
            let msg = e.message().trim();
            match e.span() {
                Some(span) => {
                    let line = text[..span.start].matches('\n').count() + 1;
                    ConfigError::new(".", format!("line {line}: {msg}"))
                }
                None => ConfigError::new(".", msg),
            }
        })?;
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(path, e.into_inner().message().trim())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(".", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Semantic checks that serde cannot express.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.sim;
        non_negative("sim.horizon_s", s.horizon_s)?;
        non_negative("sim.t_pick_line", s.t_pick_line)?;
        positive("sim.feed_poll_s", s.feed_poll_s)?;
        if s.order_slots == 0 {
            return Err(ConfigError::new("sim.order_slots", "must be at least 1"));
        }
        if s.bundle_slots == 0 {
            return Err(ConfigError::new("sim.bundle_slots", "must be at least 1"));
        }
        self.kinematics
            .validate()
            .map_err(|m| ConfigError::new("kinematics", m))?;
        if self.pods.rows == 0 || self.pods.cols == 0 {
            return Err(ConfigError::new("pods", "pods need at least one compartment"));
        }
        if self.pods.capacity == 0 {
            return Err(ConfigError::new("pods.capacity", "must be positive"));
        }
        if let Some(g) = &self.pods.generate {
            if g.skus.is_empty() && g.count > 0 {
                return Err(ConfigError::new("pods.generate.skus", "no skus"));
            }
            if g.fill > self.pods.capacity {
                return Err(ConfigError::new("pods.generate.fill", "exceeds compartment capacity"));
            }
        }
        let o = &self.orders;
        non_negative("orders.rate_per_hour", o.rate_per_hour)?;
        non_negative("orders.receipts_per_hour", o.receipts_per_hour)?;
        if o.max_lines == 0 {
            return Err(ConfigError::new("orders.max_lines", "must be at least 1"));
        }
        if !(o.mean_lines >= 1.0 && o.mean_lines <= f64::from(o.max_lines)) {
            return Err(ConfigError::new(
                "orders.mean_lines",
                format!("must lie in [1, {}]", o.max_lines),
            ));
        }
        if o.max_quantity == 0 {
            return Err(ConfigError::new("orders.max_quantity", "must be at least 1"));
        }
        if o.bundle_quantity == 0 || o.bundles_per_receipt == 0 {
            return Err(ConfigError::new("orders", "receipts need at least one unit"));
        }
        for (k, w) in &o.sku_weights {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(ConfigError::new(format!("orders.sku_weights.{k}"), "bad weight"));
            }
        }
        if !o.sku_weights.is_empty() && o.sku_weights.values().all(|w| *w == 0.0) {
            return Err(ConfigError::new("orders.sku_weights", "all weights are zero"));
        }
        for (i, f) in o.script.iter().enumerate() {
            let path = format!("orders.script[{i}]");
            non_negative(&format!("{path}.at"), f.at)?;
            let lines = match (&f.order, &f.receipt) {
                (Some(l), None) | (None, Some(l)) => l,
                _ => return Err(ConfigError::new(path, "needs exactly one of order, receipt")),
            };
            if lines.is_empty() {
                return Err(ConfigError::new(path, "no lines"));
            }
            if let Some(j) = lines.iter().position(|l| l.quantity == 0) {
                return Err(ConfigError::new(format!("{path}.lines[{j}].quantity"), "must be positive"));
            }
        }
        let a = &self.agents;
        if !(0.0..=1.0).contains(&a.pickup_fault_rate) {
            return Err(ConfigError::new("agents.pickup_fault_rate", "must lie in [0, 1]"));
        }
        let w = &self.wire;
        positive("wire.heartbeat_s", w.heartbeat_s)?;
        positive("wire.reply_timeout_s", w.reply_timeout_s)?;
        positive("wire.time_scale", w.time_scale)?;
        non_negative("wire.grace_s", w.grace_s)?;
        let receipts = o.receipts_per_hour > 0.0 || o.script.iter().any(|f| f.receipt.is_some()) || w.feed;
        if receipts {
            if let Ok(layout) = self.build_layout() {
                if !layout.stations().iter().any(|s| s.kind == StationKind::Replenish) {
                    return Err(ConfigError::new("layout.stations", "receipts need a replenish station"));
                }
            }
        }
        Ok(())
    }

    pub fn build_layout(&self) -> Result<Layout, ConfigError> {
        build_layout(&self.layout).map_err(|e: LayoutError| ConfigError::new("layout", e))
    }

    /// Pods and robots placed on `layout` as configured.
    pub fn build_world(&self, layout: &Layout) -> Result<World, ConfigError> {
        let pods = self.build_pods(layout)?;
        let robots = self.build_robots(layout)?;
        World::new(layout, pods, robots).map_err(|e: WorldError| ConfigError::new("pods", e))
    }

    fn cell(layout: &Layout, path: &str, at: [u32; 2]) -> Result<WaypointId, ConfigError> {
        layout
            .waypoint(Coord::from(at))
            .ok_or_else(|| ConfigError::new(path, format!("{} is not a waypoint", Coord::from(at))))
    }

    fn build_pods(&self, layout: &Layout) -> Result<Vec<Pod>, ConfigError> {
        let pc = &self.pods;
        let mut pods = Vec::new();
        for (i, spec) in pc.list.iter().enumerate() {
            let path = format!("pods.pod[{i}]");
            let wp = Self::cell(layout, &format!("{path}.at"), spec.at)?;
            let mut pod = Pod::new(
                PodId(spec.id),
                pc.rows,
                pc.cols,
                pc.capacity,
                PodLocation::Storage(wp),
            );
            for (j, c) in spec.contents.iter().enumerate() {
                let idx = CompartmentIndex::new(c.compartment[0], c.compartment[1]);
                pod.deposit(idx, &Sku::new(c.sku.clone()), c.count)
                    .map_err(|e| ConfigError::new(format!("{path}.contents[{j}]"), e))?;
            }
            pods.push(pod);
        }
        if let Some(g) = &pc.generate {
            let taken: Vec<WaypointId> = pods
                .iter()
                .filter_map(|p| match p.location {
                    PodLocation::Storage(w) => Some(w),
                    _ => None,
                })
                .collect();
            let free: Vec<WaypointId> = layout
                .waypoints_of(WaypointKind::Storage)
                .filter(|w| !taken.contains(w))
                .collect();
            if free.len() < g.count as usize {
                return Err(ConfigError::new(
                    "pods.generate.count",
                    format!("{} pods but only {} free storage cells", g.count, free.len()),
                ));
            }
            let first_id = pods.iter().map(|p| p.id.0 + 1).max().unwrap_or(0);
            let per_pod = u32::from(pc.rows) * u32::from(pc.cols);
            for k in 0..g.count {
                let mut pod = Pod::new(
                    PodId(first_id + k),
                    pc.rows,
                    pc.cols,
                    pc.capacity,
                    PodLocation::Storage(free[k as usize]),
                );
                let indices: Vec<_> = pod.compartments().iter().map(|c| c.index).collect();
                for (j, idx) in indices.into_iter().enumerate() {
                    let slot = match g.mode {
                        FillMode::RoundRobin => (k * per_pod) as usize + j,
                        FillMode::Dedicated => k as usize,
                    };
                    let sku = Sku::new(g.skus[slot % g.skus.len()].clone());
                    pod.deposit(idx, &sku, g.fill)
                        .map_err(|e| ConfigError::new("pods.generate", e))?;
                }
                pods.push(pod);
            }
        }
        Ok(pods)
    }

    fn build_robots(&self, layout: &Layout) -> Result<Vec<Robot>, ConfigError> {
        let rc = &self.robots;
        let cells: Vec<WaypointId> = match &rc.at {
            Some(at) => {
                if at.len() != rc.count as usize {
                    return Err(ConfigError::new(
                        "robots.at",
                        format!("{} cells for {} robots", at.len(), rc.count),
                    ));
                }
                at.iter()
                    .enumerate()
                    .map(|(i, c)| Self::cell(layout, &format!("robots.at[{i}]"), *c))
                    .collect::<Result<_, _>>()?
            }
            None => {
                let order = layout
                    .waypoints_of(WaypointKind::Dwelling)
                    .chain(layout.waypoints_of(WaypointKind::Storage))
                    .chain(layout.waypoints_of(WaypointKind::Highway));
                let cells: Vec<_> = order.take(rc.count as usize).collect();
                if cells.len() < rc.count as usize {
                    return Err(ConfigError::new("robots.count", "more robots than free cells"));
                }
                cells
            }
        };
        Ok(cells
            .into_iter()
            .enumerate()
            .map(|(i, wp)| Robot::new(RobotId(i as u32), wp, rc.heading, self.kinematics))
            .collect())
    }
}

fn non_negative(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be non-negative, got {v}")))
    }
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be positive, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default_scenario() {
        let cfg = Config::from_toml_str("").unwrap();
        assert_eq!(cfg, Config::default());
        let layout = cfg.build_layout().unwrap();
        let world = cfg.build_world(&layout).unwrap();
        assert_eq!(world.pod_count(), 6);
        assert_eq!(world.robots().count(), 2);
    }

    #[test]
    fn unknown_key_names_its_path() {
        let err = Config::from_toml_str("[layout]\nrows = 3\ncols = 4\ncolour = 1\n").unwrap_err();
        assert_eq!(err.path, "layout.colour");
        assert!(err.message.contains("colour"), "{err}");
        let err = Config::from_toml_str("[sim]\nhorizon_s = \"long\"\n").unwrap_err();
        assert_eq!(err.path, "sim.horizon_s");
    }

    #[test]
    fn semantic_errors_name_their_path() {
        let err = Config::from_toml_str("[orders]\nmean_lines = 9.0\n").unwrap_err();
        assert_eq!(err.path, "orders.mean_lines");
        let err = Config::from_toml_str("[kinematics]\nv_max = 0.0\n").unwrap_err();
        assert_eq!(err.path, "kinematics");
    }

    #[test]
    fn dedicated_fill_gives_one_sku_per_pod() {
        let cfg = Config::from_toml_str(
            "[pods]\ncapacity = 50\n[pods.generate]\ncount = 3\nskus = [\"a\", \"b\"]\nfill = 7\nmode = \"dedicated\"\n",
        )
        .unwrap();
        let layout = cfg.build_layout().unwrap();
        let world = cfg.build_world(&layout).unwrap();
        let skus: Vec<Vec<_>> = world
            .pods()
            .map(|p| p.compartments().iter().map(|c| c.sku.clone().unwrap().0).collect())
            .collect();
        assert!(skus[0].iter().all(|s| s == "a"));
        assert!(skus[1].iter().all(|s| s == "b"));
        assert!(skus[2].iter().all(|s| s == "a"));
        assert_eq!(world.stock(&Sku::from("a")), 2 * 6 * 7);
    }

    #[test]
    fn explicit_pods_and_robots() {
        let cfg = Config::from_toml_str(
            r#"
[robots]
count = 1
at = [[0, 0]]

[pods]
[[pods.pod]]
id = 4
at = [0, 1]
contents = [{ compartment = [1, 2], sku = "apple", count = 5 }]
"#,
        )
        .unwrap();
        let layout = cfg.build_layout().unwrap();
        let world = cfg.build_world(&layout).unwrap();
        assert!(world.pod(PodId(4)).is_some());
        // listing pods switches the default generator off
        assert_eq!(world.pod_count(), 1);
        assert_eq!(world.stock(&Sku::from("apple")), 5);
    }

    #[test]
    fn scripted_feed_needs_one_kind() {
        let err = Config::from_toml_str("[[orders.script]]\nat = 0.0\n").unwrap_err();
        assert_eq!(err.path, "orders.script[0]");
    }

    #[test]
    fn receipts_need_a_replenish_station() {
        let pick_only = "[layout]\nrows = 3\ncols = 4\nstations = [{ id = 0, kind = \"pick\", at = [2, 3] }]\n";
        let err = Config::from_toml_str(&format!("{pick_only}[orders]\nreceipts_per_hour = 2.0\n")).unwrap_err();
        assert_eq!(err.path, "layout.stations");
        let cfg = Config::from_toml_str(pick_only).unwrap();
        assert_eq!(cfg.build_layout().unwrap().stations().len(), 1);
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = Config::from_toml_str("[sim]\nseed = 1\n[sim]\nseed = 2\n").unwrap_err();
        assert_eq!(err.path, ".");
        assert!(err.message.starts_with("line 3:"), "{}", err.message);
    }
}
