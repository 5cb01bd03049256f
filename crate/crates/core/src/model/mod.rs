//! Domain values shared by every other module.
//!
//! Everything here is an immutable value once built: configurations are
//! cloned, never mutated in place, by the engine and the tree algorithms.

mod config;
mod ids;
mod monitor;
mod tx;

pub use config::{
    discount, tx_key, ContractState, ExtendedConfiguration, ExternalBalances, LedgerState, Storage,
    Tokens,
};
pub use ids::{Address, Caller, Scalar, TxId, UserId};
pub use monitor::{
    monitor_transition_legal, ContractMonitors, MonitorContext, MonitorState, TimeoutDecision,
};
pub use tx::{
    Branch, FailReason, Operation, Transaction, TransactionOutcome, TxStatus, NOOP_TARGET,
    SYSTEM_USER,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown user `{0}`")]
    UnknownUser(UserId),
}
