//! Agent wire protocol: framing, message schema, TCP server and emulators.

pub mod client;
pub mod codec;
pub mod link;
pub mod msg;
pub mod server;

pub use codec::{decode, encode, DecodeError, FrameReader};
pub use msg::*;
