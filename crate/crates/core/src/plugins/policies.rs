//! Reference policies. FCFS order assignment is a baseline, not a
//! recommendation.

use std::cmp::Reverse;
use std::collections::BTreeMap;

use rand::Rng;

use super::*;
use crate::rng::SimRng;

fn least_loaded(loads: &[StationLoad]) -> Option<usize> {
    loads
        .iter()
        .enumerate()
        .filter(|(_, l)| l.free() > 0)
        .min_by_key(|(_, l)| (l.assigned, l.station))
        .map(|(i, _)| i)
}

/// Backlog in arrival order, each item to the least-loaded station with room.
pub struct FcfsLeastLoaded;

impl ReplenishAssign for FcfsLeastLoaded {
    fn assign(&mut self, backlog: &[BundleView], stations: &[StationLoad]) -> Result<Vec<(BundleId, StationId)>, PluginError> {
        let mut loads = stations.to_vec();
        let mut out = Vec::new();
        for b in backlog {
            let Some(i) = least_loaded(&loads) else { break };
            loads[i].assigned += 1;
            out.push((b.id, loads[i].station));
        }
        Ok(out)
    }
}

impl PickAssign for FcfsLeastLoaded {
    fn assign(&mut self, backlog: &[OrderView], stations: &[PickStationView]) -> Result<Vec<(OrderId, StationId)>, PluginError> {
        let mut loads: Vec<_> = stations.iter().map(|s| s.load.clone()).collect();
        let mut out = Vec::new();
        for o in backlog {
            let Some(i) = least_loaded(&loads) else { break };
            loads[i].assigned += 1;
            out.push((o.id, loads[i].station));
        }
        Ok(out)
    }
}

/// Fills the least-loaded station with the backlog order sharing the most
/// SKUs with what that station already has queued; ties go to the earlier
/// arrival.
pub struct CommonLines;

impl PickAssign for CommonLines {
    fn assign(&mut self, backlog: &[OrderView], stations: &[PickStationView]) -> Result<Vec<(OrderId, StationId)>, PluginError> {
        let mut views = stations.to_vec();
        let mut loads: Vec<_> = views.iter().map(|s| s.load.clone()).collect();
        let mut left: Vec<&OrderView> = backlog.iter().collect();
        let mut out = Vec::new();
        while let Some(i) = least_loaded(&loads) {
            let queued = &views[i].queued_skus;
            let Some((k, _)) = left
                .iter()
                .enumerate()
                .max_by_key(|(k, o)| (o.skus.iter().filter(|s| queued.contains(*s)).count(), Reverse(*k)))
            else {
                break;
            };
            let order = left.remove(k);
            loads[i].assigned += 1;
            views[i].queued_skus.extend(order.skus.iter().cloned());
            out.push((order.id, loads[i].station));
        }
        Ok(out)
    }
}

/// Each order, in arrival order, to a uniformly drawn station with room.
pub struct RandomStation {
    rng: SimRng,
}

impl RandomStation {
    pub fn new(rng: SimRng) -> Self {
        Self { rng }
    }
}

impl PickAssign for RandomStation {
    fn assign(&mut self, backlog: &[OrderView], stations: &[PickStationView]) -> Result<Vec<(OrderId, StationId)>, PluginError> {
        let mut loads: Vec<_> = stations.iter().map(|s| s.load.clone()).collect();
        let mut out = Vec::new();
        for o in backlog {
            let open: Vec<usize> = (0..loads.len()).filter(|&i| loads[i].free() > 0).collect();
            if open.is_empty() {
                break;
            }
            let i = open[self.rng.random_range(0..open.len())];
            loads[i].assigned += 1;
            out.push((o.id, loads[i].station));
        }
        Ok(out)
    }
}

/// Pod with the most room for the bundle's SKU; lowest id on ties.
pub struct MaxFree;

impl StorePodSelect for MaxFree {
    fn select(&mut self, bundle: &BundleView, pods: &[PodRoom], allow_split: bool) -> Result<Option<PodId>, PluginError> {
        let need = if allow_split { 1 } else { bundle.quantity };
        Ok(pods
            .iter()
            .filter(|p| p.free >= need)
            .max_by_key(|p| (p.free, Reverse(p.pod)))
            .map(|p| p.pod))
    }
}

/// Requests a pod can serve, chosen to maximise their number: per SKU the
/// smallest quantities first while stock lasts. Returned in queue order.
pub fn pod_cover(requests: &[ExtractView], available: &BTreeMap<Sku, u32>) -> Vec<RequestId> {
    let mut by_sku: BTreeMap<&Sku, Vec<(u32, usize)>> = BTreeMap::new();
    for (i, r) in requests.iter().enumerate() {
        if available.contains_key(&r.sku) {
            by_sku.entry(&r.sku).or_default().push((r.quantity, i));
        }
    }
    let mut chosen = Vec::new();
    for (sku, mut reqs) in by_sku {
        reqs.sort_unstable();
        let mut left = available[sku];
        for (q, i) in reqs {
            if q > left {
                break;
            }
            left -= q;
            chosen.push(i);
        }
    }
    chosen.sort_unstable();
    chosen.into_iter().map(|i| requests[i].id).collect()
}

/// Greedy pile-on: repeatedly takes the pod serving the most queued requests,
/// nearest pod then lowest id on ties.
pub struct PileOn;

impl PickPodSelect for PileOn {
    fn build(
        &mut self,
        requests: &[ExtractView],
        pods: &[PodStock],
        max_pods: usize,
    ) -> Result<Vec<(PodId, Vec<RequestId>)>, PluginError> {
        let mut left: Vec<ExtractView> = requests.to_vec();
        let mut unused: Vec<&PodStock> = pods.iter().collect();
        let mut out = Vec::new();
        while out.len() < max_pods && !left.is_empty() {
            let best = unused
                .iter()
                .enumerate()
                .map(|(k, p)| (k, pod_cover(&left, &p.available)))
                .filter(|(_, c)| !c.is_empty())
                .max_by_key(|(k, c)| (c.len(), Reverse(unused[*k].distance), Reverse(unused[*k].pod)));
            let Some((k, cover)) = best else { break };
            let pod = unused.remove(k).pod;
            left.retain(|r| !cover.contains(&r.id));
            out.push((pod, cover));
        }
        Ok(out)
    }
}

/// Free place closest to the releasing station; lowest waypoint id on ties.
pub struct NearestPlace;

impl Reposition for NearestPlace {
    fn choose(&mut self, ctx: &PrContext) -> Result<Option<WaypointId>, PluginError> {
        Ok(ctx.free.iter().min_by_key(|(w, d)| (*d, *w)).map(|(w, _)| *w))
    }
}

/// Uniformly drawn free place.
pub struct RandomPlace {
    rng: SimRng,
}

impl RandomPlace {
    pub fn new(rng: SimRng) -> Self {
        Self { rng }
    }
}

impl Reposition for RandomPlace {
    fn choose(&mut self, ctx: &PrContext) -> Result<Option<WaypointId>, PluginError> {
        if ctx.free.is_empty() {
            return Ok(None);
        }
        let mut free: Vec<WaypointId> = ctx.free.iter().map(|(w, _)| *w).collect();
        free.sort_unstable();
        Ok(Some(free[self.rng.random_range(0..free.len())]))
    }
}

/// The pod's starting place, deferred while that place is taken.
pub struct FixedPlace;

impl Reposition for FixedPlace {
    fn choose(&mut self, ctx: &PrContext) -> Result<Option<WaypointId>, PluginError> {
        Ok(ctx.home.filter(|h| ctx.free.iter().any(|(w, _)| w == h)))
    }
}

/// Tasks in creation order, each to the nearest idle robot.
pub struct NearestRobot;

impl TaskAllocate for NearestRobot {
    fn allocate(&mut self, layout: &Layout, tasks: &[TaskView], robots: &[RobotView]) -> Result<Vec<(TaskId, RobotId)>, PluginError> {
        let mut idle: Vec<&RobotView> = robots.iter().collect();
        let mut out = Vec::new();
        for t in tasks {
            let best = idle
                .iter()
                .enumerate()
                .min_by_key(|(_, r)| (layout.graph_distance(r.at, t.start).unwrap_or(u32::MAX), r.id))
                .map(|(i, _)| i);
            let Some(i) = best else { break };
            out.push((t.id, idle.remove(i).id));
        }
        Ok(out)
    }
}
