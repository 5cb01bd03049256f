//! Transaction execution against an extended configuration.
//!
//! A transaction runs its initial operation and every operation emitted
//! after it in FIFO order. Contracts interact only through token transfers,
//! their own storage, the transaction-scoped fail bit and their failing map.
//! At the end the collected failing-map writes are validated against the
//! pre-state and the transaction is classified as commit, fail or pending.

pub mod builtins;
mod context;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use crate::model::{
    discount, monitor_transition_legal, Address, Caller, ExtendedConfiguration, FailReason,
    ModelError, MonitorContext, MonitorState, Operation, Storage, TimeoutDecision, Transaction,
    TransactionOutcome, TxId, NOOP_TARGET, SYSTEM_USER,
};

pub use context::{Abort, ExecutionContext};

/// Deterministic contract code, registered by the host.
///
/// Implementations keep no state between calls: everything lives in the
/// storage reachable through [`ExecutionContext`].
pub trait ContractBehavior: fmt::Debug + Send + Sync {
    /// Kind name as used in scenario files.
    fn kind(&self) -> &str;

    fn invoke(&self, ctx: &mut ExecutionContext<'_>, entrypoint: &str) -> Result<(), Abort>;

    /// Timeout policy handed to `monitor_activate` by the builtins.
    fn timeout(&self, _tx: TxId, _storage: &Storage) -> TimeoutDecision {
        TimeoutDecision::Commit
    }
}

/// Installed contracts. Immutable for the duration of a run.
#[derive(Debug, Clone, Default)]
pub struct ContractRegistry {
    entries: BTreeMap<Address, Arc<dyn ContractBehavior>>,
}

impl ContractRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn install(&mut self, address: Address, behavior: Arc<dyn ContractBehavior>) {
        self.entries.insert(address, behavior);
    }

    pub fn with(
        mut self,
        address: impl Into<Address>,
        behavior: impl ContractBehavior + 'static,
    ) -> Self {
        self.install(address.into(), Arc::new(behavior));
        self
    }

    pub fn get(&self, address: &Address) -> Option<&Arc<dyn ContractBehavior>> {
        self.entries.get(address)
    }

    pub fn contains(&self, address: &Address) -> bool {
        self.entries.contains_key(address)
    }

    pub fn addresses(&self) -> impl Iterator<Item = &Address> {
        self.entries.keys()
    }
}

/// Malformed input, as opposed to an in-model transaction failure.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("transaction {tx} is not newer than monitor entry {seen}")]
    StaleTxId { tx: TxId, seen: TxId },
    #[error("contract {0} is installed but has no ledger entry")]
    MissingContractState(Address),
    #[error("{contract} has no active monitor for {tx}")]
    NoMonitor { contract: Address, tx: TxId },
}

/// Whether future-monitor effects are available to contracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MonitorMode {
    #[default]
    Future,
    /// Traditional semantics: any failing-map write is a violation.
    Legacy,
}

/// A single failing-map write captured during execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonitorWrite {
    pub contract: Address,
    pub tx: TxId,
    pub state: MonitorState,
    pub timeout: Option<TimeoutDecision>,
}

/// Failing-map writes in execution order; the last write per key wins.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MonitorWriteLog {
    writes: Vec<MonitorWrite>,
}

/// Net effect of a log on one (contract, tx) key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetWrite {
    pub state: MonitorState,
    pub timeout: Option<TimeoutDecision>,
    first_index: usize,
}

impl MonitorWriteLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, write: MonitorWrite) {
        self.writes.push(write);
    }

    pub fn is_empty(&self) -> bool {
        self.writes.is_empty()
    }

    pub fn writes(&self) -> &[MonitorWrite] {
        &self.writes
    }

    /// Last state per key, together with the last timeout supplied for it.
    pub fn net(&self) -> BTreeMap<(Address, TxId), NetWrite> {
        let mut out: BTreeMap<(Address, TxId), NetWrite> = BTreeMap::new();
        for (i, w) in self.writes.iter().enumerate() {
            let e = out.entry((w.contract.clone(), w.tx)).or_insert(NetWrite {
                state: w.state,
                timeout: None,
                first_index: i,
            });
            e.state = w.state;
            if w.timeout.is_some() {
                e.timeout = w.timeout;
            }
        }
        out
    }
}

/// Offending failing-map write.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub contract: Address,
    pub tx: TxId,
}

/// Check every net write against the pre-transaction monitor context.
///
/// Writes to `current` are activations; writes to any other transaction
/// must decide an entry that is undecided in `before`.
pub fn validate_monitor_writes(
    log: &MonitorWriteLog,
    before: &MonitorContext,
    current: TxId,
) -> Result<(), Violation> {
    let offending = log
        .net()
        .into_iter()
        .filter(|((c, t), w)| {
            !monitor_transition_legal(before.state(c, *t), w.state, *t == current)
        })
        .min_by_key(|(_, w)| w.first_index);
    match offending {
        Some(((contract, tx), _)) => Err(Violation { contract, tx }),
        None => Ok(()),
    }
}

/// Timeout decision recorded for `tx` in `contract`, `Commit` if none was.
pub fn eval_timeout(
    delta: &MonitorContext,
    contract: &Address,
    tx: TxId,
) -> Result<TimeoutDecision, EngineError> {
    if delta.state(contract, tx) == MonitorState::Inactive {
        return Err(EngineError::NoMonitor {
            contract: contract.clone(),
            tx,
        });
    }
    Ok(delta.timeout(contract, tx).unwrap_or_default())
}

/// Execute `tx` with future monitors enabled.
pub fn apply_tx(
    tx: &Transaction,
    cfg: &ExtendedConfiguration,
    reg: &ContractRegistry,
) -> Result<TransactionOutcome, EngineError> {
    execute(tx, cfg, reg, MonitorMode::Future)
}

pub fn execute(
    tx: &Transaction,
    cfg: &ExtendedConfiguration,
    reg: &ContractRegistry,
    mode: MonitorMode,
) -> Result<TransactionOutcome, EngineError> {
    let system = tx.source.as_str() == SYSTEM_USER;
    if !system && !cfg.users.contains(&tx.source) {
        return Err(ModelError::UnknownUser(tx.source.clone()).into());
    }
    if let Some(seen) = cfg.monitors.tx_ids().into_iter().next_back() {
        if seen >= tx.id {
            return Err(EngineError::StaleTxId { tx: tx.id, seen });
        }
    }

    // Σ and Δ untouched, only the source pays for the attempt.
    let fail_config = || -> Result<ExtendedConfiguration, EngineError> {
        let users = if system {
            cfg.users.clone()
        } else {
            discount(&cfg.users, &tx.source, tx.cost)?
        };
        Ok(ExtendedConfiguration {
            ledger: cfg.ledger.clone(),
            monitors: cfg.monitors.clone(),
            users,
        })
    };
    let failed = |reason: FailReason| -> Result<TransactionOutcome, EngineError> {
        Ok(TransactionOutcome::Fail(fail_config()?, reason))
    };

    let mut run = Execution {
        tx: tx.id,
        ledger: cfg.ledger.clone(),
        users: cfg.users.clone(),
        seen: BTreeSet::new(),
        fail_bits: BTreeMap::new(),
        log: MonitorWriteLog::new(),
    };
    if let Err(reason) = run.run(tx, reg)? {
        return failed(reason);
    }

    if let Some((contract, _)) = run.fail_bits.iter().find(|(_, on)| **on) {
        return failed(FailReason::FailBit {
            contract: contract.clone(),
        });
    }
    if mode == MonitorMode::Legacy {
        if let Some(w) = run.log.writes().first() {
            return failed(FailReason::InvalidMonitorWrite {
                contract: w.contract.clone(),
                tx: w.tx,
            });
        }
    }
    if let Err(v) = validate_monitor_writes(&run.log, &cfg.monitors, tx.id) {
        return failed(FailReason::InvalidMonitorWrite {
            contract: v.contract,
            tx: v.tx,
        });
    }

    let mut monitors = cfg.monitors.clone();
    let mut undecided = false;
    for ((contract, t), w) in run.log.net() {
        if t == tx.id {
            match w.state {
                MonitorState::Fail => return failed(FailReason::MonitorFailed { contract }),
                MonitorState::Undecided => undecided = true,
                _ => {}
            }
            monitors.set_timeout(&contract, t, w.timeout.unwrap_or_default());
        }
        monitors.set_state(&contract, t, w.state);
    }

    let mut ledger = run.ledger;
    ledger.height += 1;
    let commit = ExtendedConfiguration {
        ledger,
        monitors,
        users: run.users,
    };
    if undecided {
        Ok(TransactionOutcome::Pending {
            commit,
            fail: fail_config()?,
        })
    } else {
        Ok(TransactionOutcome::Commit(commit))
    }
}

struct Execution {
    tx: TxId,
    ledger: crate::model::LedgerState,
    users: crate::model::ExternalBalances,
    seen: BTreeSet<Address>,
    fail_bits: BTreeMap<Address, bool>,
    log: MonitorWriteLog,
}

impl Execution {
    /// Outer error: malformed input. Inner error: in-model failure.
    fn run(
        &mut self,
        tx: &Transaction,
        reg: &ContractRegistry,
    ) -> Result<Result<(), FailReason>, EngineError> {
        let initial = &tx.initial;
        if initial.amount > 0 {
            let available = self.users.get(&tx.source).unwrap_or(0);
            if available < initial.amount {
                return Ok(Err(FailReason::InsufficientBalance {
                    payer: tx.source.to_string(),
                    needed: initial.amount,
                    available,
                }));
            }
            if let Some(b) = self.users.get_mut(&tx.source) {
                *b -= initial.amount;
            }
        }

        let mut queue: VecDeque<Operation> = VecDeque::from([initial.clone()]);
        while let Some(op) = queue.pop_front() {
            if op.target.as_str() == NOOP_TARGET && op.amount == 0 {
                continue;
            }
            let Some(behavior) = reg.get(&op.target) else {
                return Ok(Err(FailReason::UnknownTarget { target: op.target }));
            };
            let Some(state) = self.ledger.contracts.get_mut(&op.target) else {
                return Err(EngineError::MissingContractState(op.target));
            };
            state.balance += op.amount;
            let first = self.seen.insert(op.target.clone());
            let fail_bit = self.fail_bits.entry(op.target.clone()).or_insert(false);
            let mut outbox = Vec::new();
            let mut ctx = ExecutionContext {
                this: &op.target,
                txid: self.tx,
                first,
                caller: &op.caller,
                amount: op.amount,
                args: &op.args,
                state,
                fail_bit,
                log: &mut self.log,
                outbox: &mut outbox,
            };
            if let Err(abort) = behavior.invoke(&mut ctx, &op.entrypoint) {
                return Ok(Err(abort.into_reason(&op)));
            }
            queue.extend(outbox);
        }
        Ok(Ok(()))
    }
}

/// Convenience for contracts receiving calls from other contracts only.
pub(crate) fn caller_contract(ctx: &ExecutionContext<'_>) -> Result<Address, Abort> {
    match ctx.caller() {
        Caller::Contract(a) => Ok(a.clone()),
        Caller::User(u) => Err(Abort::msg(format!(
            "expected a contract caller, got user {u}"
        ))),
    }
}

#[cfg(test)]
mod tests;
