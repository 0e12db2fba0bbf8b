//! Mutable warehouse state: pods and their inventory, robots, and the
//! counters that make SKU conservation checkable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{BundleId, OrderId, PodId, RobotId, Sku, StationId, WaypointId};
use crate::kinematics::{Heading, Kinematics};
use crate::layout::{Layout, WaypointKind};

/// (row, col) of a compartment on the pod face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CompartmentIndex {
    pub row: u8,
    pub col: u8,
}

impl CompartmentIndex {
    pub const fn new(row: u8, col: u8) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for CompartmentIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.row, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Compartment {
    pub index: CompartmentIndex,
    pub sku: Option<Sku>,
    pub count: u32,
    pub capacity: u32,
}

impl Compartment {
    pub fn free(&self) -> u32 {
        self.capacity - self.count
    }

    /// Whether `sku` may be stored here (same sku, or the compartment is empty).
    pub fn accepts(&self, sku: &Sku) -> bool {
        match &self.sku {
            Some(s) => s == sku,
            None => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PodLocation {
    Storage(WaypointId),
    Carried(RobotId),
    Station(StationId),
}

impl fmt::Display for PodLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PodLocation::Storage(w) => write!(f, "storage:{w}"),
            PodLocation::Carried(r) => write!(f, "robot:{r}"),
            PodLocation::Station(s) => write!(f, "station:{s}"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InventoryError {
    #[error("pod {pod} has no compartment {index}")]
    NoCompartment { pod: PodId, index: CompartmentIndex },
    #[error("compartment {index} of pod {pod} would underflow: count {count}, delta {delta}")]
    Underflow {
        pod: PodId,
        index: CompartmentIndex,
        count: u32,
        delta: i64,
    },
    #[error("compartment {index} of pod {pod} would overflow: count {count}, delta {delta}, capacity {capacity}")]
    Overflow {
        pod: PodId,
        index: CompartmentIndex,
        count: u32,
        delta: i64,
        capacity: u32,
    },
    #[error("compartment {index} of pod {pod} holds {held}, not {wanted}")]
    WrongSku {
        pod: PodId,
        index: CompartmentIndex,
        held: String,
        wanted: Sku,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pod {
    pub id: PodId,
    pub rows: u8,
    pub cols: u8,
    compartments: Vec<Compartment>,
    pub location: PodLocation,
}

impl Pod {
    /// An empty pod with `rows x cols` compartments of equal capacity.
    pub fn new(id: PodId, rows: u8, cols: u8, capacity: u32, location: PodLocation) -> Self {
        let compartments = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| CompartmentIndex::new(r, c)))
            .map(|index| Compartment {
                index,
                sku: None,
                count: 0,
                capacity,
            })
            .collect();
        Self {
            id,
            rows,
            cols,
            compartments,
            location,
        }
    }

    pub fn compartments(&self) -> &[Compartment] {
        &self.compartments
    }

    pub fn compartment(&self, index: CompartmentIndex) -> Option<&Compartment> {
        self.slot(index).map(|i| &self.compartments[i])
    }

    fn slot(&self, index: CompartmentIndex) -> Option<usize> {
        (index.row < self.rows && index.col < self.cols)
            .then(|| index.row as usize * self.cols as usize + index.col as usize)
    }

    pub fn total(&self) -> u64 {
        self.compartments.iter().map(|c| u64::from(c.count)).sum()
    }

    pub fn count_of(&self, sku: &Sku) -> u32 {
        self.compartments
            .iter()
            .filter(|c| c.sku.as_ref() == Some(sku))
            .map(|c| c.count)
            .sum()
    }

    /// Adds `qty` of `sku`, claiming the compartment if it is empty.
    pub fn deposit(
        &mut self,
        index: CompartmentIndex,
        sku: &Sku,
        qty: u32,
    ) -> Result<(), InventoryError> {
        let slot = self.slot(index).ok_or(InventoryError::NoCompartment {
            pod: self.id,
            index,
        })?;
        let comp = &self.compartments[slot];
        if !comp.accepts(sku) {
            return Err(InventoryError::WrongSku {
                pod: self.id,
                index,
                held: comp.sku.as_ref().map(|s| s.0.clone()).unwrap_or_default(),
                wanted: sku.clone(),
            });
        }
        let mut next = apply_inventory_delta(self, index, i64::from(qty))?;
        if qty > 0 {
            next.compartments[slot].sku = Some(sku.clone());
        }
        *self = next;
        Ok(())
    }

    /// Removes `qty` of `sku` from the compartment.
    pub fn withdraw(
        &mut self,
        index: CompartmentIndex,
        sku: &Sku,
        qty: u32,
    ) -> Result<(), InventoryError> {
        let slot = self.slot(index).ok_or(InventoryError::NoCompartment {
            pod: self.id,
            index,
        })?;
        let comp = &self.compartments[slot];
        if comp.sku.as_ref() != Some(sku) {
            return Err(InventoryError::WrongSku {
                pod: self.id,
                index,
                held: comp.sku.as_ref().map(|s| s.0.clone()).unwrap_or_default(),
                wanted: sku.clone(),
            });
        }
        *self = apply_inventory_delta(self, index, -i64::from(qty))?;
        Ok(())
    }
}

/// Returns `pod` with `delta` applied to one compartment. Fails without
/// touching anything when the result would leave `[0, capacity]`, or when
/// adding to a compartment with no SKU assigned.
pub fn apply_inventory_delta(
    pod: &Pod,
    index: CompartmentIndex,
    delta: i64,
) -> Result<Pod, InventoryError> {
    let slot = pod.slot(index).ok_or(InventoryError::NoCompartment {
        pod: pod.id,
        index,
    })?;
    let comp = &pod.compartments[slot];
    let next = i64::from(comp.count) + delta;
    if next < 0 {
        return Err(InventoryError::Underflow {
            pod: pod.id,
            index,
            count: comp.count,
            delta,
        });
    }
    if next > i64::from(comp.capacity) {
        return Err(InventoryError::Overflow {
            pod: pod.id,
            index,
            count: comp.count,
            delta,
            capacity: comp.capacity,
        });
    }
    let mut out = pod.clone();
    let c = &mut out.compartments[slot];
    c.count = next as u32;
    if c.count == 0 {
        c.sku = None;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RobotState {
    Idle,
    Moving,
    Turning,
    PickingUp,
    SettingDown,
    AtStation,
    /// Lost its connection or failed repeatedly; takes no further tasks.
    Unavailable,
}

impl fmt::Display for RobotState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Robot {
    pub id: RobotId,
    pub waypoint: WaypointId,
    pub heading: Heading,
    pub carrying: Option<PodId>,
    pub kinematics: Kinematics,
    pub state: RobotState,
}

impl Robot {
    pub fn new(id: RobotId, waypoint: WaypointId, heading: Heading, kinematics: Kinematics) -> Self {
        Self {
            id,
            waypoint,
            heading,
            carrying: None,
            kinematics,
            state: RobotState::Idle,
        }
    }

    /// Orientation in radians, `[0, 2π)`.
    pub fn orientation(&self) -> f64 {
        self.heading.radians()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderLine {
    pub sku: Sku,
    pub quantity: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PickOrder {
    pub id: OrderId,
    pub lines: Vec<OrderLine>,
}

/// An amount of one SKU received for storage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplenishmentBundle {
    pub id: BundleId,
    pub sku: Sku,
    pub quantity: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorldError {
    #[error("duplicate pod id {0}")]
    DuplicatePod(PodId),
    #[error("duplicate robot id {0}")]
    DuplicateRobot(RobotId),
    #[error("pod {pod} is placed on {wp}, which is not a storage waypoint")]
    PodNotOnStorage { pod: PodId, wp: WaypointId },
    #[error("pods {0} and {1} share storage waypoint {2}")]
    PodsShareWaypoint(PodId, PodId, WaypointId),
    #[error("robots {0} and {1} share waypoint {2}")]
    RobotsShareWaypoint(RobotId, RobotId, WaypointId),
    #[error("robot {robot} is placed on invalid waypoint {wp}")]
    RobotOffGrid { robot: RobotId, wp: WaypointId },
    #[error("pod {pod} location {location} disagrees with robot state")]
    CarryMismatch { pod: PodId, location: PodLocation },
    #[error("{0}")]
    Inventory(#[from] InventoryError),
}

#[derive(Clone, Debug)]
pub struct World {
    pods: BTreeMap<PodId, Pod>,
    robots: BTreeMap<RobotId, Robot>,
    picked: BTreeMap<Sku, u64>,
    replenished: BTreeMap<Sku, u64>,
}

impl World {
    pub fn new(layout: &Layout, pods: Vec<Pod>, robots: Vec<Robot>) -> Result<Self, WorldError> {
        let mut world = World {
            pods: BTreeMap::new(),
            robots: BTreeMap::new(),
            picked: BTreeMap::new(),
            replenished: BTreeMap::new(),
        };
        for pod in pods {
            if let PodLocation::Storage(wp) = pod.location {
                if layout.kind(wp) != Some(WaypointKind::Storage) {
                    return Err(WorldError::PodNotOnStorage { pod: pod.id, wp });
                }
            }
            if world.pods.insert(pod.id, pod.clone()).is_some() {
                return Err(WorldError::DuplicatePod(pod.id));
            }
        }
        for robot in robots {
            if !layout.contains(robot.waypoint) {
                return Err(WorldError::RobotOffGrid {
                    robot: robot.id,
                    wp: robot.waypoint,
                });
            }
            if world.robots.insert(robot.id, robot.clone()).is_some() {
                return Err(WorldError::DuplicateRobot(robot.id));
            }
        }
        let mut seen: BTreeMap<WaypointId, RobotId> = BTreeMap::new();
        for r in world.robots.values() {
            if let Some(other) = seen.insert(r.waypoint, r.id) {
                return Err(WorldError::RobotsShareWaypoint(other, r.id, r.waypoint));
            }
        }
        world.check_exclusivity()?;
        Ok(world)
    }

    pub fn pods(&self) -> impl Iterator<Item = &Pod> {
        self.pods.values()
    }

    pub fn pod(&self, id: PodId) -> Option<&Pod> {
        self.pods.get(&id)
    }

    pub fn pod_mut(&mut self, id: PodId) -> Option<&mut Pod> {
        self.pods.get_mut(&id)
    }

    pub fn pod_count(&self) -> usize {
        self.pods.len()
    }

    pub fn robots(&self) -> impl Iterator<Item = &Robot> {
        self.robots.values()
    }

    pub fn robot(&self, id: RobotId) -> Option<&Robot> {
        self.robots.get(&id)
    }

    pub fn robot_mut(&mut self, id: RobotId) -> Option<&mut Robot> {
        self.robots.get_mut(&id)
    }

    pub fn pod_at(&self, wp: WaypointId) -> Option<PodId> {
        self.pods
            .values()
            .find(|p| p.location == PodLocation::Storage(wp))
            .map(|p| p.id)
    }

    /// Total units of `sku` across all pod compartments.
    pub fn stock(&self, sku: &Sku) -> u64 {
        self.pods.values().map(|p| u64::from(p.count_of(sku))).sum()
    }

    pub fn stock_by_sku(&self) -> BTreeMap<Sku, u64> {
        let mut totals = BTreeMap::new();
        for pod in self.pods.values() {
            for c in pod.compartments() {
                if let Some(s) = &c.sku {
                    *totals.entry(s.clone()).or_insert(0) += u64::from(c.count);
                }
            }
        }
        totals
    }

    pub fn picked(&self) -> &BTreeMap<Sku, u64> {
        &self.picked
    }

    pub fn replenished(&self) -> &BTreeMap<Sku, u64> {
        &self.replenished
    }

    /// Moves `qty` units from a pod compartment to the customer counter.
    pub fn pick(
        &mut self,
        pod: PodId,
        index: CompartmentIndex,
        sku: &Sku,
        qty: u32,
    ) -> Result<(), InventoryError> {
        let p = self
            .pods
            .get_mut(&pod)
            .ok_or(InventoryError::NoCompartment { pod, index })?;
        p.withdraw(index, sku, qty)?;
        *self.picked.entry(sku.clone()).or_insert(0) += u64::from(qty);
        Ok(())
    }

    /// Credits `qty` received units into a pod compartment.
    pub fn replenish(
        &mut self,
        pod: PodId,
        index: CompartmentIndex,
        sku: &Sku,
        qty: u32,
    ) -> Result<(), InventoryError> {
        let p = self
            .pods
            .get_mut(&pod)
            .ok_or(InventoryError::NoCompartment { pod, index })?;
        p.deposit(index, sku, qty)?;
        *self.replenished.entry(sku.clone()).or_insert(0) += u64::from(qty);
        Ok(())
    }

    /// Per-SKU `stock + picked - replenished`; constant over any event sequence.
    pub fn conservation_balance(&self) -> BTreeMap<Sku, i128> {
        let mut out: BTreeMap<Sku, i128> = BTreeMap::new();
        for (s, v) in self.stock_by_sku() {
            *out.entry(s).or_default() += i128::from(v);
        }
        for (s, v) in &self.picked {
            *out.entry(s.clone()).or_default() += i128::from(*v);
        }
        for (s, v) in &self.replenished {
            *out.entry(s.clone()).or_default() -= i128::from(*v);
        }
        out.retain(|_, v| *v != 0);
        out
    }

    /// Attaches a pod in storage to a robot standing on it.
    pub fn lift(&mut self, robot: RobotId, pod: PodId) {
        if let Some(p) = self.pods.get_mut(&pod) {
            p.location = PodLocation::Carried(robot);
        }
        if let Some(r) = self.robots.get_mut(&robot) {
            r.carrying = Some(pod);
        }
    }

    /// Puts the carried pod down on the robot's current waypoint.
    pub fn set_down(&mut self, robot: RobotId) -> Option<PodId> {
        let r = self.robots.get_mut(&robot)?;
        let pod = r.carrying.take()?;
        let wp = r.waypoint;
        if let Some(p) = self.pods.get_mut(&pod) {
            p.location = PodLocation::Storage(wp);
        }
        Some(pod)
    }

    /// Pod location exclusivity and robot/pod carry agreement.
    pub fn check_exclusivity(&self) -> Result<(), WorldError> {
        let mut cells: BTreeMap<WaypointId, PodId> = BTreeMap::new();
        let mut carried: BTreeSet<RobotId> = BTreeSet::new();
        for pod in self.pods.values() {
            match pod.location {
                PodLocation::Storage(wp) => {
                    if let Some(other) = cells.insert(wp, pod.id) {
                        return Err(WorldError::PodsShareWaypoint(other, pod.id, wp));
                    }
                }
                PodLocation::Carried(r) => {
                    let ok = self.robots.get(&r).and_then(|r| r.carrying) == Some(pod.id);
                    if !ok || !carried.insert(r) {
                        return Err(WorldError::CarryMismatch {
                            pod: pod.id,
                            location: pod.location,
                        });
                    }
                }
                PodLocation::Station(_) => {}
            }
        }
        for robot in self.robots.values() {
            if let Some(p) = robot.carrying {
                let loc = self.pods.get(&p).map(|p| p.location);
                if loc != Some(PodLocation::Carried(robot.id)) {
                    return Err(WorldError::CarryMismatch {
                        pod: p,
                        location: loc.unwrap_or(PodLocation::Carried(robot.id)),
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{build_layout, LayoutConfig};

    fn apple_pod(count: u32) -> Pod {
        let mut pod = Pod::new(PodId(0), 2, 3, 10, PodLocation::Storage(WaypointId(0)));
        pod.deposit(CompartmentIndex::new(0, 0), &Sku::from("apple"), count)
            .unwrap();
        pod
    }

    #[test]
    fn five_apples_removed() {
        let pod = apple_pod(5);
        let out = apply_inventory_delta(&pod, CompartmentIndex::new(0, 0), -5).unwrap();
        let c = out.compartment(CompartmentIndex::new(0, 0)).unwrap();
        assert_eq!(c.count, 0);
        assert_eq!(c.sku, None);
        assert_eq!(out.total(), pod.total() - 5);
    }

    #[test]
    fn zero_delta_is_identity() {
        let pod = apple_pod(5);
        assert_eq!(
            apply_inventory_delta(&pod, CompartmentIndex::new(0, 0), 0).unwrap(),
            pod
        );
    }

    #[test]
    fn underflow_rejected() {
        let pod = apple_pod(1);
        let err = apply_inventory_delta(&pod, CompartmentIndex::new(0, 0), -2).unwrap_err();
        assert!(matches!(err, InventoryError::Underflow { .. }));
        assert_eq!(pod.count_of(&Sku::from("apple")), 1);
    }

    #[test]
    fn overflow_and_bad_index_rejected() {
        let mut pod = apple_pod(9);
        assert!(matches!(
            pod.deposit(CompartmentIndex::new(0, 0), &Sku::from("apple"), 2),
            Err(InventoryError::Overflow { .. })
        ));
        assert!(matches!(
            pod.deposit(CompartmentIndex::new(0, 0), &Sku::from("pear"), 1),
            Err(InventoryError::WrongSku { .. })
        ));
        assert!(matches!(
            apply_inventory_delta(&pod, CompartmentIndex::new(5, 0), 1),
            Err(InventoryError::NoCompartment { .. })
        ));
        assert_eq!(pod.total(), 9);
    }

    #[test]
    fn conservation_across_pick_and_replenish() {
        let layout = build_layout(&LayoutConfig::grid(3, 4)).unwrap();
        let storage: Vec<_> = layout.waypoints_of(WaypointKind::Storage).collect();
        let mut pod = Pod::new(PodId(1), 2, 3, 10, PodLocation::Storage(storage[0]));
        pod.deposit(CompartmentIndex::new(0, 0), &Sku::from("apple"), 5)
            .unwrap();
        let mut world = World::new(&layout, vec![pod], vec![]).unwrap();
        let before = world.conservation_balance();
        world
            .pick(PodId(1), CompartmentIndex::new(0, 0), &Sku::from("apple"), 3)
            .unwrap();
        world
            .replenish(PodId(1), CompartmentIndex::new(1, 2), &Sku::from("apple"), 4)
            .unwrap();
        assert_eq!(world.conservation_balance(), before);
        assert_eq!(world.stock(&Sku::from("apple")), 6);
    }

    #[test]
    fn exclusivity_violations_detected() {
        let layout = build_layout(&LayoutConfig::grid(3, 4)).unwrap();
        let wp = layout.waypoints_of(WaypointKind::Storage).next().unwrap();
        let a = Pod::new(PodId(1), 1, 1, 1, PodLocation::Storage(wp));
        let b = Pod::new(PodId(2), 1, 1, 1, PodLocation::Storage(wp));
        assert!(matches!(
            World::new(&layout, vec![a, b], vec![]),
            Err(WorldError::PodsShareWaypoint(..))
        ));
        let station_wp = layout.stations()[0].waypoint;
        let c = Pod::new(PodId(3), 1, 1, 1, PodLocation::Storage(station_wp));
        assert!(matches!(
            World::new(&layout, vec![c], vec![]),
            Err(WorldError::PodNotOnStorage { .. })
        ));
    }
}
