//! Order gateway: turns incoming orders and receipts into transfers and
//! requests, and books station confirmations against inventory.

pub mod generator;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ids::{BundleId, OrderId, PodId, RequestId, Sku, StationId, TransferId};
use crate::world::{CompartmentIndex, InventoryError, OrderLine, PickOrder, Pod, ReplenishmentBundle, World};
use crate::wire::{Cell, CompartmentInfo, PodModel, ReplenishTarget, StationInfo, StockLevel, Verdict};

pub use generator::OrderGenerator;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransferKind {
    OutgoingPlanned,
    InternalReplenish,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransferState {
    Planned,
    Done,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Move {
    pub sku: Sku,
    pub quantity: u32,
    pub done: u32,
    /// Pod the last confirmed units came from or went to.
    pub source: Option<PodId>,
    pub bundle: Option<BundleId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transfer {
    pub id: TransferId,
    pub kind: TransferKind,
    pub order: Option<OrderId>,
    pub moves: Vec<Move>,
    pub state: TransferState,
    pub created: f64,
}

impl Transfer {
    fn refresh_state(&mut self) {
        if !self.moves.is_empty() && self.moves.iter().all(|m| m.done >= m.quantity) {
            self.state = TransferState::Done;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FeedEvent {
    NewOrder { order: PickOrder, at: f64 },
    Receipt { bundles: Vec<ReplenishmentBundle>, at: f64 },
}

/// Work derived from one transfer move.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GatewayRequest {
    Extract {
        transfer: TransferId,
        order: OrderId,
        line: usize,
        sku: Sku,
        quantity: u32,
    },
    Insert {
        transfer: TransferId,
        bundle: BundleId,
        line: usize,
        sku: Sku,
        quantity: u32,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum GatewayError {
    #[error("no moves")]
    NoMoves,
    #[error("order {0} already known")]
    DuplicateOrder(OrderId),
    #[error("bundle {0} already known")]
    DuplicateBundle(BundleId),
    #[error("line {line} has zero quantity")]
    ZeroQuantity { line: usize },
    #[error("unknown transfer {0}")]
    UnknownTransfer(TransferId),
    #[error("{0}")]
    Inventory(#[from] InventoryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LineKind {
    Pick,
    Put,
}

/// An info message waiting for the station's verdict.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outstanding {
    pub station: StationId,
    pub msg_id: u64,
    pub kind: LineKind,
    pub request: RequestId,
    pub transfer: TransferId,
    pub line: usize,
    pub pod: PodId,
    pub compartment: CompartmentIndex,
    pub sku: Sku,
    pub quantity: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReplyOutcome {
    /// Inventory moved; `transfer_done` when this completed the transfer.
    Booked {
        request: RequestId,
        kind: LineKind,
        transfer: TransferId,
        transfer_done: bool,
        compartment: CompartmentIndex,
        count_before: u32,
        count_after: u32,
        done_quantity: u32,
    },
    /// The station reported an error; the request goes to the back of the queue.
    Requeue { request: RequestId, text: String },
    /// No outstanding message matched.
    Ignored,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Release {
    ReuseAtStation,
    Store,
}

/// What the next queued request at a station needs from a pod.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NextNeed<'a> {
    Extract { sku: &'a Sku, quantity: u32 },
    Insert { sku: &'a Sku, quantity: u32 },
}

/// Keep the pod at the station when it can serve the next queued request.
pub fn pod_release_check(pod: &Pod, next: Option<NextNeed<'_>>) -> Release {
    let fits = match next {
        None => false,
        Some(NextNeed::Extract { sku, quantity }) => pod.count_of(sku) >= quantity,
        Some(NextNeed::Insert { sku, quantity }) => best_put_compartment(pod, sku, quantity).is_some(),
    };
    if fits {
        Release::ReuseAtStation
    } else {
        Release::Store
    }
}

/// Compartment for a put: same SKU first, then empty, most free room, lowest index.
pub fn best_put_compartment(pod: &Pod, sku: &Sku, quantity: u32) -> Option<CompartmentIndex> {
    put_candidates(pod, sku, quantity).first().copied()
}

fn put_candidates(pod: &Pod, sku: &Sku, quantity: u32) -> Vec<CompartmentIndex> {
    let mut c: Vec<_> = pod
        .compartments()
        .iter()
        .filter(|c| c.accepts(sku) && c.free() >= quantity)
        .map(|c| (c.sku.is_none(), std::cmp::Reverse(c.free()), c.index))
        .collect();
    c.sort();
    c.into_iter().map(|(_, _, i)| i).collect()
}

/// Compartment for a pick: the fullest holding the SKU with enough units.
pub fn best_pick_compartment(pod: &Pod, sku: &Sku, quantity: u32) -> Option<CompartmentIndex> {
    pod.compartments()
        .iter()
        .filter(|c| c.sku.as_ref() == Some(sku) && c.count >= quantity)
        .max_by_key(|c| (c.count, std::cmp::Reverse(c.index)))
        .map(|c| c.index)
}

fn cell(i: CompartmentIndex) -> Cell {
    Cell { row: i.row, col: i.col }
}

fn compartment_infos(pod: &Pod) -> Vec<CompartmentInfo> {
    pod.compartments()
        .iter()
        .map(|c| CompartmentInfo {
            row: c.index.row,
            col: c.index.col,
            item_id: c.sku.as_ref().map(|s| s.0.clone()),
            count: c.count,
        })
        .collect()
}

#[derive(Debug, Default)]
pub struct OrderGateway {
    transfers: Vec<Transfer>,
    by_id: BTreeMap<TransferId, usize>,
    polled: usize,
    orders: BTreeSet<OrderId>,
    bundles: BTreeSet<BundleId>,
    next_order: u64,
    next_bundle: u64,
    outstanding: BTreeMap<(StationId, u64), Outstanding>,
}

impl OrderGateway {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh_order_id(&mut self) -> OrderId {
        while self.orders.contains(&OrderId(self.next_order)) {
            self.next_order += 1;
        }
        let id = OrderId(self.next_order);
        self.next_order += 1;
        id
    }

    pub fn fresh_bundle_id(&mut self) -> BundleId {
        while self.bundles.contains(&BundleId(self.next_bundle)) {
            self.next_bundle += 1;
        }
        let id = BundleId(self.next_bundle);
        self.next_bundle += 1;
        id
    }

    /// Records an order or receipt as a planned transfer.
    pub fn push_feed(&mut self, event: FeedEvent) -> Result<TransferId, GatewayError> {
        let id = TransferId(self.transfers.len() as u64);
        let transfer = match event {
            FeedEvent::NewOrder { order, at } => {
                if self.orders.contains(&order.id) {
                    return Err(GatewayError::DuplicateOrder(order.id));
                }
                if let Some(line) = order.lines.iter().position(|l| l.quantity == 0) {
                    return Err(GatewayError::ZeroQuantity { line });
                }
                self.orders.insert(order.id);
                Transfer {
                    id,
                    kind: TransferKind::OutgoingPlanned,
                    order: Some(order.id),
                    moves: order
                        .lines
                        .into_iter()
                        .map(|OrderLine { sku, quantity }| Move {
                            sku,
                            quantity,
                            done: 0,
                            source: None,
                            bundle: None,
                        })
                        .collect(),
                    state: TransferState::Planned,
                    created: at,
                }
            }
            FeedEvent::Receipt { bundles, at } => {
                let mut fresh = BTreeSet::new();
                for (line, b) in bundles.iter().enumerate() {
                    if self.bundles.contains(&b.id) || !fresh.insert(b.id) {
                        return Err(GatewayError::DuplicateBundle(b.id));
                    }
                    if b.quantity == 0 {
                        return Err(GatewayError::ZeroQuantity { line });
                    }
                }
                self.bundles.extend(fresh);
                Transfer {
                    id,
                    kind: TransferKind::InternalReplenish,
                    order: None,
                    moves: bundles
                        .into_iter()
                        .map(|b| Move {
                            sku: b.sku,
                            quantity: b.quantity,
                            done: 0,
                            source: None,
                            bundle: Some(b.id),
                        })
                        .collect(),
                    state: TransferState::Planned,
                    created: at,
                }
            }
        };
        self.by_id.insert(id, self.transfers.len());
        self.transfers.push(transfer);
        Ok(id)
    }

    /// Planned transfers recorded since the previous poll.
    pub fn poll_feed(&mut self) -> Vec<Transfer> {
        let out = self.transfers[self.polled..].to_vec();
        self.polled = self.transfers.len();
        out
    }

    pub fn transfer(&self, id: TransferId) -> Option<&Transfer> {
        self.by_id.get(&id).map(|&i| &self.transfers[i])
    }

    pub fn transfers(&self) -> &[Transfer] {
        &self.transfers
    }

    /// One extract request per order line, one insert request per bundle.
    pub fn transfer_to_requests(transfer: &Transfer) -> Result<Vec<GatewayRequest>, GatewayError> {
        if transfer.moves.is_empty() {
            return Err(GatewayError::NoMoves);
        }
        Ok(transfer
            .moves
            .iter()
            .enumerate()
            .map(|(line, m)| match transfer.kind {
                TransferKind::OutgoingPlanned => GatewayRequest::Extract {
                    transfer: transfer.id,
                    order: transfer.order.unwrap_or(OrderId(0)),
                    line,
                    sku: m.sku.clone(),
                    quantity: m.quantity,
                },
                TransferKind::InternalReplenish => GatewayRequest::Insert {
                    transfer: transfer.id,
                    bundle: m.bundle.unwrap_or(BundleId(0)),
                    line,
                    sku: m.sku.clone(),
                    quantity: m.quantity,
                },
            })
            .collect())
    }

    /// Registers an info message and builds its display contents.
    pub fn issue_info(&mut self, out: Outstanding, pod: &Pod) -> StationInfo {
        let transfer = self.transfer(out.transfer);
        let order_id = transfer.and_then(|t| t.order);
        let bundle_id = transfer
            .and_then(|t| t.moves.get(out.line))
            .and_then(|m| m.bundle);
        let comp = pod.compartment(out.compartment);
        let info = StationInfo {
            order_id: (out.kind == LineKind::Pick).then_some(order_id).flatten(),
            bundle_id: (out.kind == LineKind::Put).then_some(bundle_id).flatten(),
            item_id: out.sku.0.clone(),
            name: out.sku.0.clone(),
            quantity: out.quantity,
            pod_model: PodModel {
                rows: pod.rows,
                cols: pod.cols,
            },
            stock_level: (out.kind == LineKind::Put).then(|| {
                let cap = comp.map_or(0, |c| c.capacity);
                StockLevel {
                    optimum: cap - cap / 4,
                    maximum: cap,
                    min_presentation: 1,
                }
            }),
            compartments: compartment_infos(pod),
            compartment_to_pick: (out.kind == LineKind::Pick).then(|| cell(out.compartment)),
            compartment_to_replenish: (out.kind == LineKind::Put).then(|| ReplenishTarget {
                best: cell(out.compartment),
                alternatives: put_candidates(pod, &out.sku, out.quantity)
                    .into_iter()
                    .filter(|i| *i != out.compartment)
                    .map(cell)
                    .collect(),
            }),
        };
        self.outstanding.insert((out.station, out.msg_id), out);
        info
    }

    pub fn outstanding(&self) -> impl Iterator<Item = &Outstanding> {
        self.outstanding.values()
    }

    /// Books a station verdict. OK moves inventory and advances the move;
    /// Error leaves inventory alone and asks for a requeue.
    pub fn apply_station_reply(
        &mut self,
        world: &mut World,
        station: StationId,
        msg_id: u64,
        verdict: Verdict,
        text: Option<&str>,
    ) -> Result<ReplyOutcome, GatewayError> {
        let Some(out) = self.outstanding.get(&(station, msg_id)).cloned() else {
            return Ok(ReplyOutcome::Ignored);
        };
        if verdict == Verdict::Error {
            self.outstanding.remove(&(station, msg_id));
            return Ok(ReplyOutcome::Requeue {
                request: out.request,
                text: text.unwrap_or("").to_owned(),
            });
        }
        let idx = *self
            .by_id
            .get(&out.transfer)
            .ok_or(GatewayError::UnknownTransfer(out.transfer))?;
        let before = world
            .pod(out.pod)
            .and_then(|p| p.compartment(out.compartment))
            .map_or(0, |c| c.count);
        match out.kind {
            LineKind::Pick => world.pick(out.pod, out.compartment, &out.sku, out.quantity)?,
            LineKind::Put => world.replenish(out.pod, out.compartment, &out.sku, out.quantity)?,
        }
        self.outstanding.remove(&(station, msg_id));
        let after = world
            .pod(out.pod)
            .and_then(|p| p.compartment(out.compartment))
            .map_or(0, |c| c.count);
        let t = &mut self.transfers[idx];
        let mut done_quantity = 0;
        if let Some(m) = t.moves.get_mut(out.line) {
            m.done = (m.done + out.quantity).min(m.quantity);
            m.source = Some(out.pod);
            done_quantity = m.done;
        }
        let was_done = t.state == TransferState::Done;
        t.refresh_state();
        Ok(ReplyOutcome::Booked {
            request: out.request,
            kind: out.kind,
            transfer: out.transfer,
            transfer_done: !was_done && t.state == TransferState::Done,
            compartment: out.compartment,
            count_before: before,
            count_after: after,
            done_quantity,
        })
    }

    /// Sum of confirmed outgoing units per SKU.
    pub fn shipped(&self) -> BTreeMap<Sku, u64> {
        let mut out = BTreeMap::new();
        for t in self.transfers.iter().filter(|t| t.kind == TransferKind::OutgoingPlanned) {
            for m in &t.moves {
                *out.entry(m.sku.clone()).or_insert(0) += u64::from(m.done);
            }
        }
        out.retain(|_, v| *v > 0);
        out
    }
}
