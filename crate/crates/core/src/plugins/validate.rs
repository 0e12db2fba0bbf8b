//! Feasibility checks applied to every plugin decision, independent of the
//! policy that produced it.

use std::collections::{BTreeMap, BTreeSet};

use super::*;

pub type Verdict = Result<(), String>;

pub fn station_assignment<T: Ord + Copy + std::fmt::Display>(
    decisions: &[(T, StationId)],
    backlog: &[T],
    loads: &[StationLoad],
) -> Verdict {
    let known: BTreeSet<T> = backlog.iter().copied().collect();
    let mut seen = BTreeSet::new();
    let mut used: BTreeMap<StationId, u32> = BTreeMap::new();
    for (item, station) in decisions {
        if !known.contains(item) {
            return Err(format!("{item} is not in the backlog"));
        }
        if !seen.insert(*item) {
            return Err(format!("{item} assigned twice"));
        }
        let Some(load) = loads.iter().find(|l| l.station == *station) else {
            return Err(format!("{station} is not an eligible station"));
        };
        let n = used.entry(*station).or_default();
        *n += 1;
        if *n > load.free() {
            return Err(format!("{station} has only {} free slots", load.free()));
        }
    }
    Ok(())
}

pub fn store_pod(choice: PodId, bundle: &BundleView, pods: &[PodRoom], allow_split: bool) -> Verdict {
    let Some(p) = pods.iter().find(|p| p.pod == choice) else {
        return Err(format!("{choice} is not a candidate"));
    };
    if p.free == 0 || (!allow_split && p.free < bundle.quantity) {
        return Err(format!("{choice} has room for {} of {}", p.free, bundle.quantity));
    }
    Ok(())
}

pub fn pick_pods(
    decision: &[(PodId, Vec<RequestId>)],
    requests: &[ExtractView],
    pods: &[PodStock],
    max_pods: usize,
) -> Verdict {
    if decision.len() > max_pods {
        return Err(format!("{} pods for {max_pods} slots", decision.len()));
    }
    let by_id: BTreeMap<RequestId, &ExtractView> = requests.iter().map(|r| (r.id, r)).collect();
    let mut used_pods = BTreeSet::new();
    let mut used_reqs = BTreeSet::new();
    for (pod, reqs) in decision {
        let Some(stock) = pods.iter().find(|p| p.pod == *pod) else {
            return Err(format!("{pod} is not a candidate"));
        };
        if !used_pods.insert(*pod) {
            return Err(format!("{pod} chosen twice"));
        }
        if reqs.is_empty() {
            return Err(format!("{pod} serves no request"));
        }
        let mut need: BTreeMap<&Sku, u32> = BTreeMap::new();
        for r in reqs {
            let Some(view) = by_id.get(r) else {
                return Err(format!("{r} is not queued"));
            };
            if !used_reqs.insert(*r) {
                return Err(format!("{r} served twice"));
            }
            *need.entry(&view.sku).or_default() += view.quantity;
        }
        for (sku, n) in need {
            let have = stock.available.get(sku).copied().unwrap_or(0);
            if n > have {
                return Err(format!("{pod} holds {have} {sku}, {n} requested"));
            }
        }
    }
    Ok(())
}

pub fn place(choice: WaypointId, ctx: &PrContext) -> Verdict {
    if ctx.free.iter().any(|(w, _)| *w == choice) {
        Ok(())
    } else {
        Err(format!("{choice} is not a free storage place"))
    }
}

pub fn task_allocation(decision: &[(TaskId, RobotId)], tasks: &[TaskView], robots: &[RobotView]) -> Verdict {
    let mut ts = BTreeSet::new();
    let mut rs = BTreeSet::new();
    for (t, r) in decision {
        if !tasks.iter().any(|x| x.id == *t) {
            return Err(format!("{t} is not open"));
        }
        if !robots.iter().any(|x| x.id == *r) {
            return Err(format!("{r} is not idle"));
        }
        if !ts.insert(*t) || !rs.insert(*r) {
            return Err(format!("{t} or {r} used twice"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn over_capacity_rejected() {
        let loads = [StationLoad {
            station: StationId(1),
            assigned: 3,
            slots: 4,
        }];
        let ok = [(OrderId(1), StationId(1))];
        assert!(station_assignment(&ok, &[OrderId(1), OrderId(2)], &loads).is_ok());
        let two = [(OrderId(1), StationId(1)), (OrderId(2), StationId(1))];
        assert!(station_assignment(&two, &[OrderId(1), OrderId(2)], &loads).is_err());
        let dup = [(OrderId(1), StationId(1)), (OrderId(1), StationId(1))];
        assert!(station_assignment(&dup, &[OrderId(1)], &loads).is_err());
    }

    #[test]
    fn overdrawn_pod_rejected() {
        let reqs = [
            ExtractView { id: RequestId(1), sku: Sku::from("a"), quantity: 2 },
            ExtractView { id: RequestId(2), sku: Sku::from("a"), quantity: 2 },
        ];
        let pods = [PodStock {
            pod: PodId(0),
            available: [(Sku::from("a"), 3)].into_iter().collect(),
            distance: 1,
        }];
        assert!(pick_pods(&[(PodId(0), vec![RequestId(1)])], &reqs, &pods, 1).is_ok());
        assert!(pick_pods(&[(PodId(0), vec![RequestId(1), RequestId(2)])], &reqs, &pods, 1).is_err());
        assert!(pick_pods(&[(PodId(9), vec![RequestId(1)])], &reqs, &pods, 1).is_err());
    }
}
