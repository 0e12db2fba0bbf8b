//! Long-run average repositioning cost.
//!
//! Each epoch pairs one storage assignment (a pod leaving station `S_t` is
//! sent to storage place `π_t`) with one retrieval (a pod departs place `P_t`
//! toward station `τ_t`). Per-epoch cost is `A(P_t, τ_t) + B(S_t, π_t)`,
//! where `A` prices place → station trips and `B` station → place trips.
//! `D_t` links epoch `t` to the epoch at which the pod stored at `t` departs
//! again.
//!
//! The statistics over the first `N` epochs are
//!
//! * the direct average `(1/N) Σ [A(P_t, τ_t) + B(S_t, π_t)]`,
//! * its split by whether the pod stored at `t` departed before `N`,
//! * the shifted average pairing each place with the station its pod visits
//!   next: `(1/N) Σ [A(π_t, τ_{D_t}) 1{D_t < N} + B(S_t, π_t)]`,
//! * the decomposed estimate, which replaces the next station by the
//!   empirical station mix `q̂`:
//!   `(1/N) Σ [Σ_s q̂_s A(π_t, s) 1{D_t < N} + B(S_t, π_t)]`.
//!
//! Once station choice is independent of where a pod was stored, the three
//! averages converge to the same limit; the residual part is bounded by
//! `pods · c_max / N`.

pub mod dump;
pub mod oracle;

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::ids::{StationId, WaypointId};
use crate::kinematics::Kinematics;
use crate::layout::{Layout, WaypointKind};

#[derive(Debug, Error, PartialEq)]
pub enum LedgerError {
    #[error("empty ledger")]
    EmptyLedger,
    #[error("ledger has {have} epochs, {want} requested")]
    NotEnoughEpochs { have: usize, want: usize },
    #[error("{0} is not a storage place")]
    UnknownPlace(WaypointId),
    #[error("{0} is not a station")]
    UnknownStation(StationId),
    #[error("no epoch {0}")]
    NoSuchEpoch(usize),
    #[error("departure epoch {depart} must come after assignment epoch {assign}")]
    NotLater { assign: usize, depart: usize },
    #[error("epoch {0} is already linked to a departure")]
    AlreadyLinked(usize),
    #[error("departure epoch {0} is already linked to another assignment")]
    DepartureTaken(usize),
    #[error("cost table: {0}")]
    BadCostTable(String),
}

/// Neumaier compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Dense place × station cost tables.
#[derive(Clone, Debug, PartialEq)]
pub struct CostFunctions {
    places: Vec<WaypointId>,
    stations: Vec<StationId>,
    place_index: BTreeMap<WaypointId, usize>,
    station_index: BTreeMap<StationId, usize>,
    /// `A[place][station]`, row-major.
    to_station: Vec<f64>,
    /// `B[station][place]` stored as `[place][station]`.
    from_station: Vec<f64>,
    c_max: f64,
}

impl CostFunctions {
    /// `a(place, station)` and `b(station, place)` evaluated on every pair.
    pub fn from_fns(
        places: Vec<WaypointId>,
        stations: Vec<StationId>,
        a: impl Fn(WaypointId, StationId) -> f64,
        b: impl Fn(StationId, WaypointId) -> f64,
    ) -> Result<Self, LedgerError> {
        let mut to_station = Vec::with_capacity(places.len() * stations.len());
        let mut from_station = Vec::with_capacity(places.len() * stations.len());
        for &p in &places {
            for &s in &stations {
                to_station.push(a(p, s));
                from_station.push(b(s, p));
            }
        }
        Self::from_tables(places, stations, to_station, from_station)
    }

    pub fn from_tables(
        places: Vec<WaypointId>,
        stations: Vec<StationId>,
        to_station: Vec<f64>,
        from_station: Vec<f64>,
    ) -> Result<Self, LedgerError> {
        if places.is_empty() || stations.is_empty() {
            return Err(LedgerError::BadCostTable("no places or stations".into()));
        }
        let cells = places.len() * stations.len();
        if to_station.len() != cells || from_station.len() != cells {
            return Err(LedgerError::BadCostTable(format!(
                "expected {cells} entries per table"
            )));
        }
        if let Some(v) = to_station
            .iter()
            .chain(&from_station)
            .find(|v| !(v.is_finite() && **v >= 0.0))
        {
            return Err(LedgerError::BadCostTable(format!(
                "costs must be finite and non-negative, got {v}"
            )));
        }
        let place_index: BTreeMap<_, _> = places.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let station_index: BTreeMap<_, _> =
            stations.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        if place_index.len() != places.len() || station_index.len() != stations.len() {
            return Err(LedgerError::BadCostTable("duplicate place or station".into()));
        }
        // Upper bound on A(P, τ) + B(S, π) over any combination of pairs.
        let max_a = to_station.iter().copied().fold(0.0, f64::max);
        let max_b = from_station.iter().copied().fold(0.0, f64::max);
        let c_max = max_a + max_b;
        Ok(Self {
            places,
            stations,
            place_index,
            station_index,
            to_station,
            from_station,
            c_max,
        })
    }

    /// Hop counts on the waypoint graph between storage places and stations.
    pub fn hop_count(layout: &Layout) -> Self {
        Self::scaled_hops(layout, 1.0)
    }

    /// Straight-line travel time (`hops · spacing / v_max`), turns excluded.
    pub fn travel_time(layout: &Layout, kinematics: &Kinematics) -> Self {
        Self::scaled_hops(layout, kinematics.edge_duration(layout.spacing_m()))
    }

    fn scaled_hops(layout: &Layout, scale: f64) -> Self {
        let places: Vec<_> = layout.waypoints_of(WaypointKind::Storage).collect();
        let stations: Vec<_> = layout.stations().iter().map(|s| s.id).collect();
        let station_wp = |s: StationId| layout.station(s).map(|s| s.waypoint).unwrap();
        let dist = |p: WaypointId, s: StationId| {
            f64::from(layout.graph_distance(p, station_wp(s)).unwrap_or(0)) * scale
        };
        Self::from_fns(places, stations, dist, |s, p| dist(p, s))
            .expect("layout always has storage places and stations")
    }

    pub fn places(&self) -> &[WaypointId] {
        &self.places
    }

    pub fn stations(&self) -> &[StationId] {
        &self.stations
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    fn cell(&self, place: WaypointId, station: StationId) -> Option<usize> {
        let p = *self.place_index.get(&place)?;
        let s = *self.station_index.get(&station)?;
        Some(p * self.stations.len() + s)
    }

    /// Cost of bringing a pod from `place` to `station`.
    pub fn to_station(&self, place: WaypointId, station: StationId) -> Option<f64> {
        self.cell(place, station).map(|i| self.to_station[i])
    }

    /// Cost of returning a pod from `station` to `place`.
    pub fn from_station(&self, station: StationId, place: WaypointId) -> Option<f64> {
        self.cell(place, station).map(|i| self.from_station[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub t: usize,
    /// Station the stored pod leaves.
    pub from_station: StationId,
    /// Storage place assigned by the repositioning policy.
    pub assigned_place: WaypointId,
    /// Place from which the paired pod departs.
    pub departure_place: WaypointId,
    /// Station the departing pod is headed to.
    pub departure_station: StationId,
    /// Epoch at which the pod stored here departs again.
    pub departs_at: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LedgerReport {
    pub n: usize,
    pub direct_avg: f64,
    pub departed_part: f64,
    pub residual_part: f64,
    /// `pods · c_max / n`.
    pub residual_bound: f64,
    /// Raw sums behind the split, before division by `n`.
    pub direct_total: f64,
    pub departed_total: f64,
    pub residual_total: f64,
    pub shifted_avg: f64,
    pub decomposed_est: f64,
    /// Σ_s A(π_t, s) with no station weights and no indicator.
    pub decomposed_unweighted: f64,
    /// Places paired with the station chosen in the same epoch.
    pub assignment_paired: f64,
    pub station_freq: Vec<(StationId, f64)>,
    pub residual_epochs: usize,
}

#[derive(Clone, Debug)]
pub struct CostLedger {
    costs: CostFunctions,
    pod_count: usize,
    epochs: Vec<EpochRecord>,
    taken_departures: HashSet<usize>,
}

impl CostLedger {
    pub fn new(costs: CostFunctions, pod_count: usize) -> Self {
        Self {
            costs,
            pod_count,
            epochs: Vec::new(),
            taken_departures: HashSet::new(),
        }
    }

    pub fn costs(&self) -> &CostFunctions {
        &self.costs
    }

    pub fn pod_count(&self) -> usize {
        self.pod_count
    }

    pub fn epochs(&self) -> &[EpochRecord] {
        &self.epochs
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn record_epoch(
        &mut self,
        from_station: StationId,
        assigned_place: WaypointId,
        departure_place: WaypointId,
        departure_station: StationId,
    ) -> Result<usize, LedgerError> {
        for p in [assigned_place, departure_place] {
            if !self.costs.place_index.contains_key(&p) {
                return Err(LedgerError::UnknownPlace(p));
            }
        }
        for s in [from_station, departure_station] {
            if !self.costs.station_index.contains_key(&s) {
                return Err(LedgerError::UnknownStation(s));
            }
        }
        let t = self.epochs.len();
        self.epochs.push(EpochRecord {
            t,
            from_station,
            assigned_place,
            departure_place,
            departure_station,
            departs_at: None,
        });
        Ok(t)
    }

    /// Records that the pod stored at epoch `assign` departs at epoch `depart`.
    /// `depart` may refer to an epoch not recorded yet.
    pub fn link_departure(&mut self, assign: usize, depart: usize) -> Result<(), LedgerError> {
        let rec = self
            .epochs
            .get(assign)
            .ok_or(LedgerError::NoSuchEpoch(assign))?;
        if depart <= assign {
            return Err(LedgerError::NotLater { assign, depart });
        }
        if rec.departs_at.is_some() {
            return Err(LedgerError::AlreadyLinked(assign));
        }
        if !self.taken_departures.insert(depart) {
            return Err(LedgerError::DepartureTaken(depart));
        }
        self.epochs[assign].departs_at = Some(depart);
        Ok(())
    }

    /// Epochs with no recorded departure at all.
    pub fn unlinked(&self) -> usize {
        self.epochs.iter().filter(|e| e.departs_at.is_none()).count()
    }

    fn window(&self, n: usize) -> Result<&[EpochRecord], LedgerError> {
        if n == 0 || self.epochs.is_empty() {
            return Err(LedgerError::EmptyLedger);
        }
        self.epochs
            .get(..n)
            .ok_or(LedgerError::NotEnoughEpochs {
                have: self.epochs.len(),
                want: n,
            })
    }

    fn a(&self, place: WaypointId, station: StationId) -> f64 {
        self.costs.to_station(place, station).unwrap_or(0.0)
    }

    fn b(&self, station: StationId, place: WaypointId) -> f64 {
        self.costs.from_station(station, place).unwrap_or(0.0)
    }

    fn epoch_cost(&self, e: &EpochRecord) -> f64 {
        self.a(e.departure_place, e.departure_station) + self.b(e.from_station, e.assigned_place)
    }

    fn departed_before(e: &EpochRecord, n: usize) -> bool {
        e.departs_at.is_some_and(|d| d < n)
    }

    /// Raw `(departed, residual)` sums of epoch costs over the first `n` epochs.
    pub fn split_totals(&self, n: usize) -> Result<(f64, f64), LedgerError> {
        let w = self.window(n)?;
        let mut departed = CompensatedSum::default();
        let mut residual = CompensatedSum::default();
        for e in w {
            let c = self.epoch_cost(e);
            if Self::departed_before(e, n) {
                departed.add(c);
            } else {
                residual.add(c);
            }
        }
        Ok((departed.value(), residual.value()))
    }

    /// `(departed_part, residual_part)`; their sum is [`Self::direct_average`].
    pub fn split_average(&self, n: usize) -> Result<(f64, f64), LedgerError> {
        let (d, r) = self.split_totals(n)?;
        Ok((d / n as f64, r / n as f64))
    }

    /// `(1/n) Σ_{t<n} [A(P_t, τ_t) + B(S_t, π_t)]`, accumulated as the sum of
    /// its departed and residual parts so the partition is exact.
    pub fn direct_average(&self, n: usize) -> Result<f64, LedgerError> {
        let (d, r) = self.split_average(n)?;
        Ok(d + r)
    }

    pub fn shifted_average(&self, n: usize) -> Result<f64, LedgerError> {
        let w = self.window(n)?;
        let mut sum = CompensatedSum::default();
        for e in w {
            let a = match e.departs_at {
                Some(d) if d < n => self.a(e.assigned_place, self.epochs[d].departure_station),
                _ => 0.0,
            };
            sum.add(a + self.b(e.from_station, e.assigned_place));
        }
        Ok(sum.value() / n as f64)
    }

    /// Empirical frequency of each station as a departure destination.
    pub fn station_frequencies(&self, n: usize) -> Result<Vec<(StationId, f64)>, LedgerError> {
        let w = self.window(n)?;
        let mut counts: BTreeMap<StationId, usize> =
            self.costs.stations.iter().map(|s| (*s, 0)).collect();
        for e in w {
            *counts.entry(e.departure_station).or_default() += 1;
        }
        Ok(counts
            .into_iter()
            .map(|(s, c)| (s, c as f64 / n as f64))
            .collect())
    }

    /// Decomposed estimate with the empirical station mix as weights.
    pub fn decomposed_estimate(&self, n: usize) -> Result<f64, LedgerError> {
        let q = self.station_frequencies(n)?;
        self.decomposed_with(n, &q)
    }

    /// Decomposed estimate with caller-supplied station weights (for example
    /// the exact probabilities of the order generator).
    pub fn decomposed_with(
        &self,
        n: usize,
        weights: &[(StationId, f64)],
    ) -> Result<f64, LedgerError> {
        let w = self.window(n)?;
        let mut sum = CompensatedSum::default();
        for e in w {
            let a = if Self::departed_before(e, n) {
                weights
                    .iter()
                    .fold(0.0, |acc, (s, q)| acc + q * self.a(e.assigned_place, *s))
            } else {
                0.0
            };
            sum.add(a + self.b(e.from_station, e.assigned_place));
        }
        Ok(sum.value() / n as f64)
    }

    /// `(1/n) Σ [Σ_s A(π_t, s) + B(S_t, π_t)]`, unweighted and without the
    /// departure indicator.
    pub fn decomposed_unweighted(&self, n: usize) -> Result<f64, LedgerError> {
        let w = self.window(n)?;
        let mut sum = CompensatedSum::default();
        for e in w {
            let a: f64 = self
                .costs
                .stations
                .iter()
                .map(|s| self.a(e.assigned_place, *s))
                .sum();
            sum.add(a + self.b(e.from_station, e.assigned_place));
        }
        Ok(sum.value() / n as f64)
    }

    /// Pairs each assigned place with the departure station of its own epoch,
    /// the counterpart of [`Self::shifted_average`] before re-indexing.
    pub fn assignment_paired(&self, n: usize) -> Result<f64, LedgerError> {
        let w = self.window(n)?;
        let mut sum = CompensatedSum::default();
        for e in w {
            sum.add(
                self.a(e.assigned_place, e.departure_station)
                    + self.b(e.from_station, e.assigned_place),
            );
        }
        Ok(sum.value() / n as f64)
    }

    pub fn report(&self, n: usize) -> Result<LedgerReport, LedgerError> {
        let (departed_total, residual_total) = self.split_totals(n)?;
        let (departed_part, residual_part) = self.split_average(n)?;
        let residual_epochs = self.epochs[..n]
            .iter()
            .filter(|e| !Self::departed_before(e, n))
            .count();
        Ok(LedgerReport {
            n,
            direct_avg: departed_part + residual_part,
            departed_part,
            residual_part,
            residual_bound: self.pod_count as f64 * self.costs.c_max / n as f64,
            direct_total: departed_total + residual_total,
            departed_total,
            residual_total,
            shifted_avg: self.shifted_average(n)?,
            decomposed_est: self.decomposed_estimate(n)?,
            decomposed_unweighted: self.decomposed_unweighted(n)?,
            assignment_paired: self.assignment_paired(n)?,
            station_freq: self.station_frequencies(n)?,
            residual_epochs,
        })
    }

    pub fn convergence_report(&self, checkpoints: &[usize]) -> Result<Vec<LedgerReport>, LedgerError> {
        checkpoints.iter().map(|&n| self.report(n)).collect()
    }
}

pub const CONVERGENCE_CSV_HEADER: &str = "n,direct_avg,departed_part,residual_part,residual_bound,shifted_avg,decomposed_est,decomposed_unweighted,assignment_paired,residual_epochs";

pub fn convergence_csv(rows: &[LedgerReport]) -> String {
    let mut out = String::from(CONVERGENCE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.direct_avg,
            r.departed_part,
            r.residual_part,
            r.residual_bound,
            r.shifted_avg,
            r.decomposed_est,
            r.decomposed_unweighted,
            r.assignment_paired,
            r.residual_epochs
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const P0: WaypointId = WaypointId(0);
    const P1: WaypointId = WaypointId(1);
    const S0: StationId = StationId(0);
    const S1: StationId = StationId(1);

    fn unit_costs() -> CostFunctions {
        CostFunctions::from_fns(vec![P0], vec![S0], |_, _| 1.0, |_, _| 1.0).unwrap()
    }

    fn forced_cycle(n: usize) -> CostLedger {
        let mut l = CostLedger::new(unit_costs(), 1);
        for t in 0..n {
            l.record_epoch(S0, P0, P0, S0).unwrap();
            if t > 0 {
                l.link_departure(t - 1, t).unwrap();
            }
        }
        l
    }

    #[test]
    fn forced_cycle_costs_two_per_epoch() {
        let l = forced_cycle(1);
        assert_eq!(l.direct_average(1).unwrap(), 2.0);
        let l = forced_cycle(3);
        assert_eq!(l.direct_average(3).unwrap(), 2.0);
        assert_eq!(l.shifted_average(3).unwrap(), l.direct_average(3).unwrap() - 1.0 / 3.0);
    }

    #[test]
    fn empty_ledger_errors() {
        let l = CostLedger::new(unit_costs(), 1);
        assert_eq!(l.direct_average(0), Err(LedgerError::EmptyLedger));
        assert_eq!(l.direct_average(1), Err(LedgerError::EmptyLedger));
        assert_eq!(l.convergence_report(&[]).unwrap(), vec![]);
    }

    #[test]
    fn link_rules() {
        let mut l = CostLedger::new(unit_costs(), 1);
        for _ in 0..8 {
            l.record_epoch(S0, P0, P0, S0).unwrap();
        }
        l.link_departure(3, 7).unwrap();
        assert_eq!(l.epochs()[3].departs_at, Some(7));
        assert_eq!(l.link_departure(3, 6), Err(LedgerError::AlreadyLinked(3)));
        assert_eq!(l.link_departure(2, 7), Err(LedgerError::DepartureTaken(7)));
        assert_eq!(l.link_departure(5, 5), Err(LedgerError::NotLater { assign: 5, depart: 5 }));
        assert_eq!(l.link_departure(50, 60), Err(LedgerError::NoSuchEpoch(50)));
    }

    #[test]
    fn unknown_entities_rejected() {
        let mut l = CostLedger::new(unit_costs(), 1);
        assert_eq!(
            l.record_epoch(S0, P1, P0, S0),
            Err(LedgerError::UnknownPlace(P1))
        );
        assert_eq!(
            l.record_epoch(S0, P0, P0, S1),
            Err(LedgerError::UnknownStation(S1))
        );
    }

    /// Two places alternating: epoch t stores at p_{t mod 2} and the pod
    /// stored two epochs earlier departs from the same place.
    /// A(p0)=1, A(p1)=2, B(p0)=1, B(p1)=2, so epoch costs alternate 2, 4.
    fn alternation(n: usize) -> CostLedger {
        let costs = CostFunctions::from_fns(
            vec![P0, P1],
            vec![S0],
            |p, _| if p == P0 { 1.0 } else { 2.0 },
            |_, p| if p == P0 { 1.0 } else { 2.0 },
        )
        .unwrap();
        let mut l = CostLedger::new(costs, 2);
        for t in 0..n {
            let place = if t % 2 == 0 { P0 } else { P1 };
            l.record_epoch(S0, place, place, S0).unwrap();
            if t >= 2 {
                l.link_departure(t - 2, t).unwrap();
            }
        }
        l
    }

    #[test]
    fn periodic_alternation_hand_summed() {
        let l = alternation(10);
        assert_eq!(l.direct_average(10).unwrap(), 3.0);
        // The last two stores have not departed: residual = (2 + 4) / 10.
        let (d, r) = l.split_average(10).unwrap();
        assert_eq!(r, 0.6);
        assert_eq!(d + r, l.direct_average(10).unwrap());
        // Shifted drops A for the two undeparted epochs: (30 - 1 - 2) / 10.
        assert_eq!(l.shifted_average(10).unwrap(), 2.7);
        assert_eq!(l.decomposed_estimate(10).unwrap(), l.shifted_average(10).unwrap());
    }

    #[test]
    fn no_departures_all_residual_and_b_only() {
        let costs = CostFunctions::from_fns(vec![P0, P1], vec![S0], |_, _| 3.0, |_, _| 1.0).unwrap();
        let mut l = CostLedger::new(costs, 2);
        l.record_epoch(S0, P0, P1, S0).unwrap();
        l.record_epoch(S0, P1, P0, S0).unwrap();
        let (d, r) = l.split_average(2).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(r, 4.0);
        assert_eq!(l.shifted_average(2).unwrap(), 1.0);
    }

    #[test]
    fn all_departed_has_zero_residual() {
        // Every epoch but the last departs in-window; the last one is free.
        let costs = CostFunctions::from_fns(
            vec![P0, P1],
            vec![S0],
            |p, _| if p == P0 { 0.0 } else { 1.0 },
            |_, p| if p == P0 { 0.0 } else { 1.0 },
        )
        .unwrap();
        let mut l = CostLedger::new(costs, 1);
        for t in 0..5 {
            let place = if t == 4 { P0 } else { P1 };
            l.record_epoch(S0, place, P0, S0).unwrap();
            if t > 0 {
                l.link_departure(t - 1, t).unwrap();
            }
        }
        let (d, r) = l.split_average(5).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(d, 4.0 / 5.0);
    }

    #[test]
    fn symmetric_two_station_decomposition() {
        // A columns differ per station; uniform τ gives the column average.
        let costs = CostFunctions::from_fns(
            vec![P0],
            vec![S0, S1],
            |_, s| if s == S0 { 2.0 } else { 4.0 },
            |_, _| 1.0,
        )
        .unwrap();
        let mut l = CostLedger::new(costs, 1);
        for t in 0..4 {
            let s = if t % 2 == 0 { S0 } else { S1 };
            l.record_epoch(s, P0, P0, s).unwrap();
            if t > 0 {
                l.link_departure(t - 1, t).unwrap();
            }
        }
        // Three departed epochs each weigh (2 + 4) / 2 = 3, plus B = 1 for all four.
        assert_eq!(l.decomposed_estimate(4).unwrap(), (3.0 * 3.0 + 4.0) / 4.0);
        assert_eq!(l.decomposed_unweighted(4).unwrap(), (4.0 * 6.0 + 4.0) / 4.0);
    }

    #[test]
    fn c_max_and_csv() {
        let l = alternation(4);
        assert_eq!(l.costs().c_max(), 4.0);
        let rows = l.convergence_report(&[2, 4]).unwrap();
        let csv = convergence_csv(&rows);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with(CONVERGENCE_CSV_HEADER));
        for r in rows {
            assert!(r.residual_part <= r.residual_bound);
        }
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut s = CompensatedSum::default();
        let mut naive = 0.0;
        for _ in 0..1_000_000 {
            s.add(0.1);
            naive += 0.1;
        }
        assert!((s.value() - 100_000.0).abs() < (naive - 100_000.0f64).abs());
        assert!((s.value() - 100_000.0).abs() < 1e-9);
    }
}
