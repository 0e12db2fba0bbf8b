//! Control core for a robotic mobile fulfillment system.

pub mod config;
pub mod engine;
#[doc(hidden)]
pub mod fuzz_checks;
pub mod gateway;
pub mod ids;
pub mod kinematics;
pub mod layout;
pub mod ledger;
pub mod planner;
pub mod plugins;
pub mod rng;
pub mod scenario;
pub mod wire;
pub mod world;
