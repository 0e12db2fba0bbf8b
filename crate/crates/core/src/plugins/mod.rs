//! Decision plugins. Each slot sees a read-only view of the relevant state
//! and returns a decision; the engine checks every decision with
//! [`validate`] before acting on it.

mod policies;
pub mod validate;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::config::PluginConfig;
use crate::ids::{BundleId, OrderId, PodId, RequestId, RobotId, Sku, StationId, TaskId, WaypointId};
use crate::layout::Layout;
use crate::rng::labeled_rng;

pub use policies::*;

#[derive(Debug, Error, PartialEq)]
pub enum PluginError {
    #[error("unknown {slot} policy {name:?}; registered: {}", .known.join(", "))]
    Unknown {
        slot: &'static str,
        name: String,
        known: Vec<&'static str>,
    },
    #[error("{slot} policy failed: {message}")]
    Failed { slot: &'static str, message: String },
}

/// Assignment load of one station.
#[derive(Clone, Debug, PartialEq)]
pub struct StationLoad {
    pub station: StationId,
    pub assigned: u32,
    pub slots: u32,
}

impl StationLoad {
    pub fn free(&self) -> u32 {
        self.slots.saturating_sub(self.assigned)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PickStationView {
    pub load: StationLoad,
    /// SKUs of requests already queued at the station.
    pub queued_skus: BTreeSet<Sku>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderView {
    pub id: OrderId,
    pub skus: Vec<Sku>,
    pub arrival: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BundleView {
    pub id: BundleId,
    pub sku: Sku,
    pub quantity: u32,
    pub arrival: f64,
}

/// Room a pod offers for one SKU.
#[derive(Clone, Debug, PartialEq)]
pub struct PodRoom {
    pub pod: PodId,
    /// Largest free space in a single compartment that accepts the SKU.
    pub free: u32,
    pub distance: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractView {
    pub id: RequestId,
    pub sku: Sku,
    pub quantity: u32,
}

/// Unreserved stock of one pod.
#[derive(Clone, Debug, PartialEq)]
pub struct PodStock {
    pub pod: PodId,
    pub available: BTreeMap<Sku, u32>,
    /// Hops from the pod to the station being served.
    pub distance: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrContext {
    pub pod: PodId,
    pub station: StationId,
    /// Free storage places with their hop distance from the station.
    pub free: Vec<(WaypointId, u32)>,
    /// Where the pod started the run.
    pub home: Option<WaypointId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskView {
    pub id: TaskId,
    pub start: WaypointId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobotView {
    pub id: RobotId,
    pub at: WaypointId,
}

pub trait ReplenishAssign {
    fn assign(&mut self, backlog: &[BundleView], stations: &[StationLoad]) -> Result<Vec<(BundleId, StationId)>, PluginError>;
}

pub trait PickAssign {
    fn assign(&mut self, backlog: &[OrderView], stations: &[PickStationView]) -> Result<Vec<(OrderId, StationId)>, PluginError>;
}

pub trait StorePodSelect {
    /// `allow_split` lets the policy pick a pod with less room than the bundle.
    fn select(&mut self, bundle: &BundleView, pods: &[PodRoom], allow_split: bool) -> Result<Option<PodId>, PluginError>;
}

pub trait PickPodSelect {
    /// At most `max_pods` pods, each with the requests it will serve.
    fn build(
        &mut self,
        requests: &[ExtractView],
        pods: &[PodStock],
        max_pods: usize,
    ) -> Result<Vec<(PodId, Vec<RequestId>)>, PluginError>;
}

pub trait Reposition {
    fn choose(&mut self, ctx: &PrContext) -> Result<Option<WaypointId>, PluginError>;
}

pub trait TaskAllocate {
    fn allocate(&mut self, layout: &Layout, tasks: &[TaskView], robots: &[RobotView]) -> Result<Vec<(TaskId, RobotId)>, PluginError>;

    /// Idle robots without work go to the nearest free dwelling point.
    fn rest(&mut self, layout: &Layout, robots: &[RobotView], dwelling: &[WaypointId]) -> Vec<(RobotId, WaypointId)> {
        let mut free: Vec<WaypointId> = dwelling.to_vec();
        let mut out = Vec::new();
        for r in robots {
            let best = free
                .iter()
                .enumerate()
                .min_by_key(|(_, w)| (layout.graph_distance(r.at, **w).unwrap_or(u32::MAX), w.0))
                .map(|(i, w)| (i, *w));
            if let Some((i, w)) = best {
                free.swap_remove(i);
                out.push((r.id, w));
            }
        }
        out
    }
}

/// Names accepted for each slot.
pub const ROA_POLICIES: &[&str] = &["fcfs-least-loaded"];
pub const POA_POLICIES: &[&str] = &["fcfs", "common-lines", "random"];
pub const RPS_POLICIES: &[&str] = &["max-free"];
pub const PPS_POLICIES: &[&str] = &["pile-on"];
pub const PR_POLICIES: &[&str] = &["nearest", "random", "fixed"];
pub const TA_POLICIES: &[&str] = &["nearest"];
pub const PP_POLICIES: &[&str] = &["sipp"];

/// One bound implementation per decision slot.
pub struct PluginSet {
    pub roa: Box<dyn ReplenishAssign>,
    pub poa: Box<dyn PickAssign>,
    pub rps: Box<dyn StorePodSelect>,
    pub pps: Box<dyn PickPodSelect>,
    pub pr: Box<dyn Reposition>,
    pub ta: Box<dyn TaskAllocate>,
    pub allow_bundle_split: bool,
}

fn unknown(slot: &'static str, name: &str, known: &[&'static str]) -> PluginError {
    PluginError::Unknown {
        slot,
        name: name.to_owned(),
        known: known.to_vec(),
    }
}

impl PluginSet {
    pub fn from_config(cfg: &PluginConfig, seed: u64) -> Result<Self, PluginError> {
        let roa: Box<dyn ReplenishAssign> = match cfg.roa.as_str() {
            "fcfs-least-loaded" => Box::new(FcfsLeastLoaded),
            n => return Err(unknown("roa", n, ROA_POLICIES)),
        };
        let poa: Box<dyn PickAssign> = match cfg.poa.as_str() {
            "fcfs" => Box::new(FcfsLeastLoaded),
            "common-lines" => Box::new(CommonLines),
            "random" => Box::new(RandomStation::new(labeled_rng(seed, "poa"))),
            n => return Err(unknown("poa", n, POA_POLICIES)),
        };
        let rps: Box<dyn StorePodSelect> = match cfg.rps.as_str() {
            "max-free" => Box::new(MaxFree),
            n => return Err(unknown("rps", n, RPS_POLICIES)),
        };
        let pps: Box<dyn PickPodSelect> = match cfg.pps.as_str() {
            "pile-on" => Box::new(PileOn),
            n => return Err(unknown("pps", n, PPS_POLICIES)),
        };
        let pr: Box<dyn Reposition> = match cfg.pr.as_str() {
            "nearest" => Box::new(NearestPlace),
            "random" => Box::new(RandomPlace::new(labeled_rng(seed, "pr"))),
            "fixed" => Box::new(FixedPlace),
            n => return Err(unknown("pr", n, PR_POLICIES)),
        };
        let ta: Box<dyn TaskAllocate> = match cfg.ta.as_str() {
            "nearest" => Box::new(NearestRobot),
            n => return Err(unknown("ta", n, TA_POLICIES)),
        };
        if !PP_POLICIES.contains(&cfg.pp.as_str()) {
            return Err(unknown("pp", &cfg.pp, PP_POLICIES));
        }
        Ok(Self {
            roa,
            poa,
            rps,
            pps,
            pr,
            ta,
            allow_bundle_split: cfg.allow_bundle_split,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_name_lists_registered() {
        let cfg = PluginConfig {
            pr: "closest".into(),
            ..PluginConfig::default()
        };
        let err = PluginSet::from_config(&cfg, 1).err().unwrap();
        assert_eq!(
            err.to_string(),
            "unknown pr policy \"closest\"; registered: nearest, random, fixed"
        );
    }

    #[test]
    fn defaults_resolve() {
        assert!(PluginSet::from_config(&PluginConfig::default(), 1).is_ok());
    }
}
