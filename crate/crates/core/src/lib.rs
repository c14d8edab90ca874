//! Logit-based federated distillation under label-distribution shift.
//!
//! Clients that each see only `k` of `C` classes never share weights or
//! gradients. Every round they train locally, upload their logits on a
//! shared unlabeled public set, and distill from the server's aggregate of
//! those logits. Three aggregation strategies are provided in
//! [`aggregation`]: simple averaging, uncertainty-weighted averaging (UWA)
//! driven by per-client Gaussian mixture densities over logit space, and a
//! learned meta-model aggregator.
//!
//! Run `cargo run --example <name>` from `crates/core` for one runnable
//! example per capability; the `fedlogit` binary runs declarative sweeps.

pub mod aggregation;
pub mod app;
pub mod data;
pub mod error;
pub mod federation;
mod io;
pub mod nn;
pub mod report;

pub use error::{Error, Result};
pub use io::derive_seed;
