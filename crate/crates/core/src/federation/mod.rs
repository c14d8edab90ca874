//! Round orchestration: local training, logit exchange, aggregation and
//! distillation, plus the fully informed reference baseline.

pub mod config;
pub mod engine;
pub mod reference;

pub use config::{FederationConfig, MetaRefresh};
pub use engine::{
    init_clients, run_federation, run_round, ClientState, FederationOutcome, RoundMetrics, RoundOutput,
    BYTES_PER_SCALAR,
};
pub use reference::train_reference;
