//! Blockchain execution with bounded future monitors.
//!
//! Transactions may leave their outcome pending on up to `k` later
//! transactions. Pending outcomes live in a monitoring tree of speculative
//! configurations that is extended, pruned of impossible futures and decided
//! one level at a time. A brute-force oracle re-derives every decision from
//! linear replays.

pub mod engine;
pub mod model;
pub mod oracle;
pub mod render;
pub mod runtime;
pub mod scenario;
pub mod tree;
