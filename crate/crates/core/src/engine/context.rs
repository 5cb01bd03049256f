use crate::model::{
    Address, Caller, ContractState, FailReason, MonitorState, Operation, Scalar, Storage,
    TimeoutDecision, Tokens, TxId,
};

use super::{MonitorWrite, MonitorWriteLog};

/// Reason a contract stopped the transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Abort {
    Message(String),
    InsufficientBalance { needed: Tokens, available: Tokens },
    UnknownEntrypoint,
}

impl Abort {
    pub fn msg(m: impl Into<String>) -> Abort {
        Abort::Message(m.into())
    }

    pub(crate) fn into_reason(self, op: &Operation) -> FailReason {
        match self {
            Abort::Message(message) => FailReason::Aborted {
                contract: op.target.clone(),
                message,
            },
            Abort::InsufficientBalance { needed, available } => FailReason::InsufficientBalance {
                payer: op.target.to_string(),
                needed,
                available,
            },
            Abort::UnknownEntrypoint => FailReason::UnknownEntrypoint {
                target: op.target.clone(),
                entrypoint: op.entrypoint.clone(),
            },
        }
    }
}

/// Everything a contract sees and may do while handling one operation.
pub struct ExecutionContext<'a> {
    pub(super) this: &'a Address,
    pub(super) txid: TxId,
    pub(super) first: bool,
    pub(super) caller: &'a Caller,
    pub(super) amount: Tokens,
    pub(super) args: &'a [Scalar],
    pub(super) state: &'a mut ContractState,
    pub(super) fail_bit: &'a mut bool,
    pub(super) log: &'a mut MonitorWriteLog,
    pub(super) outbox: &'a mut Vec<Operation>,
}

impl<'a> ExecutionContext<'a> {
    pub fn this(&self) -> &Address {
        self.this
    }

    pub fn txid(&self) -> TxId {
        self.txid
    }

    /// True on the first operation targeting this contract in the transaction.
    pub fn first(&self) -> bool {
        self.first
    }

    pub fn caller(&self) -> &Caller {
        self.caller
    }

    /// Tokens attached to this operation (already credited).
    pub fn amount(&self) -> Tokens {
        self.amount
    }

    pub fn args(&self) -> &[Scalar] {
        self.args
    }

    pub fn arg_addr(&self, i: usize) -> Result<Address, Abort> {
        self.args
            .get(i)
            .and_then(Scalar::as_addr)
            .cloned()
            .ok_or_else(|| Abort::msg(format!("argument {i} must be an address")))
    }

    pub fn arg_int(&self, i: usize) -> Result<i64, Abort> {
        self.args
            .get(i)
            .and_then(Scalar::as_int)
            .ok_or_else(|| Abort::msg(format!("argument {i} must be an integer")))
    }

    pub fn arg_amount(&self, i: usize) -> Result<Tokens, Abort> {
        let v = self.arg_int(i)?;
        Tokens::try_from(v).map_err(|_| Abort::msg(format!("argument {i} must be non-negative")))
    }

    pub fn arg_tx(&self, i: usize) -> Result<TxId, Abort> {
        self.args
            .get(i)
            .and_then(Scalar::as_tx)
            .ok_or_else(|| Abort::msg(format!("argument {i} must be a transaction id")))
    }

    pub fn storage(&self) -> &Storage {
        &self.state.storage
    }

    pub fn storage_mut(&mut self) -> &mut Storage {
        &mut self.state.storage
    }

    pub fn balance(&self) -> Tokens {
        self.state.balance
    }

    /// Queue an operation on `target`, paying `amount` from this contract now.
    pub fn emit(
        &mut self,
        target: Address,
        entrypoint: &str,
        args: Vec<Scalar>,
        amount: Tokens,
    ) -> Result<(), Abort> {
        if amount > self.state.balance {
            return Err(Abort::InsufficientBalance {
                needed: amount,
                available: self.state.balance,
            });
        }
        self.state.balance -= amount;
        self.outbox.push(Operation {
            caller: Caller::Contract(self.this.clone()),
            target,
            entrypoint: entrypoint.to_string(),
            args,
            amount,
        });
        Ok(())
    }

    pub fn set_fail_bit(&mut self, on: bool) {
        *self.fail_bit = on;
    }

    /// Write the failing-map entry of the current transaction.
    pub fn monitor_activate(&mut self, state: MonitorState, timeout: TimeoutDecision) {
        self.log.push(MonitorWrite {
            contract: self.this.clone(),
            tx: self.txid,
            state,
            timeout: Some(timeout),
        });
    }

    /// Decide the monitor of a past transaction this contract activated.
    pub fn monitor_decide(&mut self, tx: TxId, decision: MonitorState) {
        self.log.push(MonitorWrite {
            contract: self.this.clone(),
            tx,
            state: decision,
            timeout: None,
        });
    }
}
