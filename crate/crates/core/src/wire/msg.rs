//! Frame schema. Every frame is one JSON object whose `type` field names the
//! message kind; remaining keys follow in declaration order.

use serde::{Deserialize, Serialize};

use crate::ids::{BundleId, OrderId, RequestId, TransferId, WaypointId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: u8,
    pub col: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PodModel {
    pub rows: u8,
    pub cols: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StockLevel {
    pub optimum: u32,
    pub maximum: u32,
    pub min_presentation: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompartmentInfo {
    pub row: u8,
    pub col: u8,
    pub item_id: Option<String>,
    pub count: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplenishTarget {
    pub best: Cell,
    pub alternatives: Vec<Cell>,
}

/// Station display contents for one pick or put line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationInfo {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_id: Option<OrderId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle_id: Option<BundleId>,
    pub item_id: String,
    pub name: String,
    pub quantity: u32,
    pub pod_model: PodModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stock_level: Option<StockLevel>,
    pub compartments: Vec<CompartmentInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compartment_to_pick: Option<Cell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compartment_to_replenish: Option<ReplenishTarget>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "OK")]
    Ok,
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Robot,
    Station,
    Feed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedLine {
    pub sku: String,
    pub quantity: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeedTransferState {
    Planned,
    Done,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum Frame {
    // Engine to robot. `at` is the simulated time the command starts.
    Go {
        robot_id: u32,
        msg_id: u64,
        waypoints: Vec<WaypointId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<f64>,
    },
    Turn {
        robot_id: u32,
        msg_id: u64,
        /// Positive turns left (counter-clockwise), negative right.
        degrees: i32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<f64>,
    },
    Rest {
        robot_id: u32,
        msg_id: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<f64>,
    },
    Pickup {
        robot_id: u32,
        msg_id: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<f64>,
    },
    Setdown {
        robot_id: u32,
        msg_id: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<f64>,
    },
    GetItem {
        robot_id: u32,
        msg_id: u64,
        request: RequestId,
    },
    PutItem {
        robot_id: u32,
        msg_id: u64,
        bundle: BundleId,
    },

    // Robot to engine. `at` is the simulated time the status became true.
    Error {
        robot_id: u32,
        msg_id: u64,
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<f64>,
    },
    WaypointTag {
        robot_id: u32,
        msg_id: u64,
        waypoint: WaypointId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<f64>,
    },
    Orientation {
        robot_id: u32,
        msg_id: u64,
        radians: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<f64>,
    },
    PickupSuccess {
        robot_id: u32,
        msg_id: u64,
        ok: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<f64>,
    },
    SetdownSuccess {
        robot_id: u32,
        msg_id: u64,
        ok: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<f64>,
    },

    // Engine to station and back. A reply reuses the msg_id of the info it answers.
    PickingInfo {
        station_id: u32,
        msg_id: u64,
        info: StationInfo,
    },
    ReplenishInfo {
        station_id: u32,
        msg_id: u64,
        info: StationInfo,
    },
    StationReply {
        station_id: u32,
        msg_id: u64,
        verdict: Verdict,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        text: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        order_id: Option<OrderId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bundle_id: Option<BundleId>,
        item_id: String,
    },

    // Order feed.
    NewOrder {
        msg_id: u64,
        lines: Vec<FeedLine>,
    },
    Receipt {
        msg_id: u64,
        bundles: Vec<FeedLine>,
    },
    TransferState {
        msg_id: u64,
        transfer_id: TransferId,
        state: FeedTransferState,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        order_id: Option<OrderId>,
    },

    // Session control.
    Hello {
        role: Role,
        id: u32,
    },
    Ping {
        seq: u64,
    },
    Pong {
        seq: u64,
    },
}

impl Frame {
    pub fn kind(&self) -> &'static str {
        match self {
            Frame::Go { .. } => "Go",
            Frame::Turn { .. } => "Turn",
            Frame::Rest { .. } => "Rest",
            Frame::Pickup { .. } => "Pickup",
            Frame::Setdown { .. } => "Setdown",
            Frame::GetItem { .. } => "GetItem",
            Frame::PutItem { .. } => "PutItem",
            Frame::Error { .. } => "Error",
            Frame::WaypointTag { .. } => "WaypointTag",
            Frame::Orientation { .. } => "Orientation",
            Frame::PickupSuccess { .. } => "PickupSuccess",
            Frame::SetdownSuccess { .. } => "SetdownSuccess",
            Frame::PickingInfo { .. } => "PickingInfo",
            Frame::ReplenishInfo { .. } => "ReplenishInfo",
            Frame::StationReply { .. } => "StationReply",
            Frame::NewOrder { .. } => "NewOrder",
            Frame::Receipt { .. } => "Receipt",
            Frame::TransferState { .. } => "TransferState",
            Frame::Hello { .. } => "Hello",
            Frame::Ping { .. } => "Ping",
            Frame::Pong { .. } => "Pong",
        }
    }

    /// Robot the frame is addressed to or comes from.
    pub fn robot_id(&self) -> Option<u32> {
        match self {
            Frame::Go { robot_id, .. }
            | Frame::Turn { robot_id, .. }
            | Frame::Rest { robot_id, .. }
            | Frame::Pickup { robot_id, .. }
            | Frame::Setdown { robot_id, .. }
            | Frame::GetItem { robot_id, .. }
            | Frame::PutItem { robot_id, .. }
            | Frame::Error { robot_id, .. }
            | Frame::WaypointTag { robot_id, .. }
            | Frame::Orientation { robot_id, .. }
            | Frame::PickupSuccess { robot_id, .. }
            | Frame::SetdownSuccess { robot_id, .. } => Some(*robot_id),
            _ => None,
        }
    }

    pub fn station_id(&self) -> Option<u32> {
        match self {
            Frame::PickingInfo { station_id, .. }
            | Frame::ReplenishInfo { station_id, .. }
            | Frame::StationReply { station_id, .. } => Some(*station_id),
            _ => None,
        }
    }

    /// Simulated timestamp carried by robot commands and status frames.
    pub fn at(&self) -> Option<f64> {
        match self {
            Frame::Go { at, .. }
            | Frame::Turn { at, .. }
            | Frame::Rest { at, .. }
            | Frame::Pickup { at, .. }
            | Frame::Setdown { at, .. }
            | Frame::Error { at, .. }
            | Frame::WaypointTag { at, .. }
            | Frame::Orientation { at, .. }
            | Frame::PickupSuccess { at, .. }
            | Frame::SetdownSuccess { at, .. } => *at,
            _ => None,
        }
    }

    pub const KINDS: [&'static str; 21] = [
        "Go",
        "Turn",
        "Rest",
        "Pickup",
        "Setdown",
        "GetItem",
        "PutItem",
        "Error",
        "WaypointTag",
        "Orientation",
        "PickupSuccess",
        "SetdownSuccess",
        "PickingInfo",
        "ReplenishInfo",
        "StationReply",
        "NewOrder",
        "Receipt",
        "TransferState",
        "Hello",
        "Ping",
        "Pong",
    ];
}
