use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Address, Caller, ExtendedConfiguration, Scalar, Tokens, TxId, UserId};

/// Reserved user that submits drain pings.
pub const SYSTEM_USER: &str = "@system";
/// Reserved target of drain pings; the engine treats it as an empty operation.
pub const NOOP_TARGET: &str = "@noop";

/// One invocation of a contract entrypoint, with tokens attached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operation {
    pub caller: Caller,
    pub target: Address,
    pub entrypoint: String,
    pub args: Vec<Scalar>,
    pub amount: Tokens,
}

/// An external trigger: the initial operation placed by a user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: TxId,
    pub source: UserId,
    pub initial: Operation,
    pub cost: Tokens,
}

impl Transaction {
    pub fn new(
        id: TxId,
        source: UserId,
        target: Address,
        entrypoint: impl Into<String>,
        args: Vec<Scalar>,
        amount: Tokens,
    ) -> Self {
        Transaction {
            id,
            initial: Operation {
                caller: Caller::User(source.clone()),
                target,
                entrypoint: entrypoint.into(),
                args,
                amount,
            },
            source,
            cost: 0,
        }
    }

    pub fn with_cost(mut self, cost: Tokens) -> Self {
        self.cost = cost;
        self
    }

    /// No-op transaction used to advance the window.
    pub fn ping(id: TxId) -> Self {
        Transaction::new(
            id,
            UserId::new(SYSTEM_USER),
            Address::new(NOOP_TARGET),
            "ping",
            Vec::new(),
            0,
        )
    }

    pub fn is_ping(&self) -> bool {
        self.source.as_str() == SYSTEM_USER && self.initial.target.as_str() == NOOP_TARGET
    }
}

impl fmt::Display for Transaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = &self.initial;
        write!(
            f,
            "{} {}→{}.{}(",
            self.id, self.source, op.target, op.entrypoint
        )?;
        for (i, a) in op.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")?;
        if op.amount > 0 {
            write!(f, " +{}", op.amount)?;
        }
        Ok(())
    }
}

/// Why a transaction failed inside the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum FailReason {
    Aborted {
        contract: Address,
        message: String,
    },
    InsufficientBalance {
        payer: String,
        needed: Tokens,
        available: Tokens,
    },
    UnknownTarget {
        target: Address,
    },
    UnknownEntrypoint {
        target: Address,
        entrypoint: String,
    },
    InvalidMonitorWrite {
        contract: Address,
        tx: TxId,
    },
    FailBit {
        contract: Address,
    },
    MonitorFailed {
        contract: Address,
    },
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailReason::Aborted { contract, message } => write!(f, "{contract} aborted: {message}"),
            FailReason::InsufficientBalance {
                payer,
                needed,
                available,
            } => {
                write!(f, "{payer} cannot pay {needed} (has {available})")
            }
            FailReason::UnknownTarget { target } => write!(f, "no contract at {target}"),
            FailReason::UnknownEntrypoint { target, entrypoint } => {
                write!(f, "{target} has no entrypoint {entrypoint}")
            }
            FailReason::InvalidMonitorWrite { contract, tx } => {
                write!(f, "{contract} wrote an illegal failmap entry for {tx}")
            }
            FailReason::FailBit { contract } => write!(f, "fail bit set by {contract}"),
            FailReason::MonitorFailed { contract } => {
                write!(f, "{contract} activated its monitor as fail")
            }
        }
    }
}

/// Result of executing a transaction with future monitors enabled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransactionOutcome {
    Commit(ExtendedConfiguration),
    Fail(ExtendedConfiguration, FailReason),
    Pending {
        commit: ExtendedConfiguration,
        fail: ExtendedConfiguration,
    },
}

impl TransactionOutcome {
    pub fn is_pending(&self) -> bool {
        matches!(self, TransactionOutcome::Pending { .. })
    }

    /// Configuration reached under the given branch; `None` when the outcome
    /// is immediate and the branch contradicts it.
    pub fn config_for(&self, branch: Branch) -> Option<&ExtendedConfiguration> {
        match (self, branch) {
            (TransactionOutcome::Commit(c), Branch::Commit) => Some(c),
            (TransactionOutcome::Fail(c, _), Branch::Fail) => Some(c),
            (TransactionOutcome::Pending { commit, .. }, Branch::Commit) => Some(commit),
            (TransactionOutcome::Pending { fail, .. }, Branch::Fail) => Some(fail),
            _ => None,
        }
    }
}

/// Committing or failing successor; also the letter in node path names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "c")]
    Commit,
    #[serde(rename = "f")]
    Fail,
}

impl Branch {
    pub fn letter(self) -> char {
        match self {
            Branch::Commit => 'c',
            Branch::Fail => 'f',
        }
    }

    pub fn status(self) -> TxStatus {
        match self {
            Branch::Commit => TxStatus::Committed,
            Branch::Fail => TxStatus::Failed,
        }
    }
}

/// Final status of a permanent transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TxStatus {
    Committed,
    Failed,
}

impl TxStatus {
    pub fn branch(self) -> Branch {
        match self {
            TxStatus::Committed => Branch::Commit,
            TxStatus::Failed => Branch::Fail,
        }
    }
}

impl fmt::Display for TxStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TxStatus::Committed => "Committed",
            TxStatus::Failed => "Failed",
        })
    }
}

impl std::str::FromStr for TxStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "committed" | "commit" => Ok(TxStatus::Committed),
            "failed" | "fail" => Ok(TxStatus::Failed),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}
