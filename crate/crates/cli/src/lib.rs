//! Pieces of the `rmfs` binary that tests drive directly.

pub mod bridge;
