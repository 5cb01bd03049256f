//! Blockchain runs: a permanent history plus the pending monitoring tree.

use serde::Serialize;

use crate::engine::{execute, ContractRegistry, EngineError, MonitorMode};
use crate::model::{
    ExtendedConfiguration, ExternalBalances, LedgerState, MonitorContext, Transaction,
    TransactionOutcome, TxId, TxStatus,
};
use crate::tree::{MonitorTree, PruneMode, TreeError};

/// A permanent transaction and the configuration it left behind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HistoryEntry {
    pub tx: Transaction,
    pub status: TxStatus,
    pub config: ExtendedConfiguration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct History {
    pub genesis: ExtendedConfiguration,
    pub entries: Vec<HistoryEntry>,
}

impl History {
    pub fn new(genesis: ExtendedConfiguration) -> Self {
        History {
            genesis,
            entries: Vec::new(),
        }
    }

    pub fn last_config(&self) -> &ExtendedConfiguration {
        self.entries.last().map_or(&self.genesis, |e| &e.config)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn status_of(&self, tx: TxId) -> Option<TxStatus> {
        self.entries
            .iter()
            .find(|e| e.tx.id == tx)
            .map(|e| e.status)
    }

    /// Entries for user transactions, drain pings left out.
    pub fn user_entries(&self) -> impl Iterator<Item = &HistoryEntry> {
        self.entries.iter().filter(|e| !e.tx.is_ping())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    #[error("monitoring window must be at least 1")]
    WindowTooSmall,
    #[error("expected transaction {expected}, got {got}")]
    OutOfOrder { expected: TxId, got: TxId },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Everything one step produced, for traces and figures.
#[derive(Debug, Clone)]
pub struct StepTrace {
    pub tx: Transaction,
    /// Tree right after attaching `tx`.
    pub extended: MonitorTree,
    /// `extended` with impossible nodes removed, when a decision was due.
    pub pruned: Option<MonitorTree>,
    pub decided: Option<HistoryEntry>,
    /// Tree at the end of the step.
    pub tree: MonitorTree,
}

#[derive(Debug, Clone)]
pub struct BlockchainRun {
    k: usize,
    mode: PruneMode,
    history: History,
    tree: MonitorTree,
    next_id: TxId,
}

impl BlockchainRun {
    pub fn new(genesis: ExtendedConfiguration, k: usize) -> Result<Self, RunError> {
        if k < 1 {
            return Err(RunError::WindowTooSmall);
        }
        Ok(BlockchainRun {
            k,
            mode: PruneMode::Faithful,
            tree: MonitorTree::leaf(genesis.clone()),
            history: History::new(genesis),
            next_id: TxId(0),
        })
    }

    pub fn with_prune_mode(mut self, mode: PruneMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn tree(&self) -> &MonitorTree {
        &self.tree
    }

    /// Id the next submitted transaction must carry.
    pub fn next_id(&self) -> TxId {
        self.next_id
    }

    pub fn step(
        &mut self,
        tx: &Transaction,
        reg: &ContractRegistry,
    ) -> Result<Option<HistoryEntry>, RunError> {
        Ok(self.step_traced(tx, reg)?.decided)
    }

    pub fn step_traced(
        &mut self,
        tx: &Transaction,
        reg: &ContractRegistry,
    ) -> Result<StepTrace, RunError> {
        if tx.id != self.next_id {
            return Err(RunError::OutOfOrder {
                expected: self.next_id,
                got: tx.id,
            });
        }
        let extended = self.tree.extend(tx, reg)?;
        let mut trace = StepTrace {
            tx: tx.clone(),
            extended: extended.clone(),
            pruned: None,
            decided: None,
            tree: extended.clone(),
        };
        if extended.height() > self.k {
            trace.pruned = Some(extended.innerprune(self.mode));
            let d = extended.decide(self.k, self.mode)?;
            let tree = d.tree.forget(d.tx.id);
            let entry = HistoryEntry {
                tx: d.tx,
                status: d.branch.status(),
                config: tree.config().clone(),
            };
            self.history.entries.push(entry.clone());
            trace.decided = Some(entry);
            trace.tree = tree;
        }
        self.tree = trace.tree.clone();
        self.next_id = tx.id.next();
        Ok(trace)
    }

    /// Next drain ping.
    pub fn ping(&self) -> Transaction {
        Transaction::ping(self.next_id)
    }

    /// Make every pending transaction permanent by stepping `k` pings.
    pub fn drain(&mut self, reg: &ContractRegistry) -> Result<Vec<StepTrace>, RunError> {
        let mut out = Vec::new();
        if self.tree.is_leaf() {
            return Ok(out);
        }
        for _ in 0..self.k {
            let p = self.ping();
            out.push(self.step_traced(&p, reg)?);
        }
        Ok(out)
    }
}

/// Execute `tx` with future monitors disabled.
pub fn legacy_apply(
    tx: &Transaction,
    sigma: &LedgerState,
    users: &ExternalBalances,
    reg: &ContractRegistry,
) -> Result<(LedgerState, ExternalBalances, TxStatus), EngineError> {
    let cfg = ExtendedConfiguration {
        ledger: sigma.clone(),
        monitors: MonitorContext::new(),
        users: users.clone(),
    };
    Ok(match execute(tx, &cfg, reg, MonitorMode::Legacy)? {
        TransactionOutcome::Commit(c) => (c.ledger, c.users, TxStatus::Committed),
        TransactionOutcome::Fail(f, _) => (f.ledger, f.users, TxStatus::Failed),
        TransactionOutcome::Pending { .. } => {
            unreachable!("legacy execution rejects every monitor write")
        }
    })
}

/// Fold `legacy_apply` over `txs` from `genesis`.
pub fn legacy_fold(
    genesis: &ExtendedConfiguration,
    txs: &[Transaction],
    reg: &ContractRegistry,
) -> Result<History, EngineError> {
    let mut h = History::new(genesis.clone());
    for tx in txs {
        let last = h.last_config();
        let (ledger, users, status) = legacy_apply(tx, &last.ledger, &last.users, reg)?;
        h.entries.push(HistoryEntry {
            tx: tx.clone(),
            status,
            config: ExtendedConfiguration {
                ledger,
                monitors: MonitorContext::new(),
                users,
            },
        });
    }
    Ok(h)
}
