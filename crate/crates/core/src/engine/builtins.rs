//! Builtin contract behaviors: token exchange, flash loans and atomic loans.
//!
//! Tokens between contracts always travel through an emitted operation.
//! Lenders pay out through the borrower's `receiveLoan`; everything else pays
//! into `deposit`, which every builtin accepts.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::model::{tx_key, MonitorState, Scalar, Storage, TimeoutDecision, TxId};

use super::{caller_contract, Abort, ContractBehavior, ExecutionContext};

/// Kind names accepted in scenario files.
pub const KINDS: [&str; 9] = [
    "wallet",
    "conditional-sender",
    "splitter",
    "flashloan-lender",
    "lender",
    "malicious-lender",
    "naive-client",
    "client",
    "market",
];

pub const DEFAULT_MARKET_PROFIT: u64 = 50;
pub const DEFAULT_INVEST_THRESHOLD: u64 = 200;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error("unknown contract kind `{0}`")]
    UnknownKind(String),
    #[error("parameter `{param}` of {kind}: {problem}")]
    BadParam {
        kind: String,
        param: String,
        problem: String,
    },
}

pub type Params = BTreeMap<String, Scalar>;

/// Instantiate a builtin behavior from its kind name and parameters.
pub fn build(kind: &str, params: &Params) -> Result<Arc<dyn ContractBehavior>, BuildError> {
    let bad = |param: &str, problem: &str| BuildError::BadParam {
        kind: kind.to_string(),
        param: param.to_string(),
        problem: problem.to_string(),
    };
    let allow = |names: &[&str]| -> Result<(), BuildError> {
        match params.keys().find(|k| !names.contains(&k.as_str())) {
            Some(k) => Err(bad(k, "not accepted by this kind")),
            None => Ok(()),
        }
    };
    let uint = |name: &str, default: u64| -> Result<u64, BuildError> {
        match params.get(name) {
            None => Ok(default),
            Some(Scalar::Int(v)) if *v >= 0 => Ok(*v as u64),
            Some(_) => Err(bad(name, "expected a non-negative integer")),
        }
    };

    let behavior: Arc<dyn ContractBehavior> = match kind {
        "wallet" => {
            allow(&[])?;
            Arc::new(Wallet)
        }
        "conditional-sender" => {
            allow(&["timeout"])?;
            let timeout = match params.get("timeout") {
                None => TimeoutDecision::Fail,
                Some(Scalar::Addr(a)) if a.as_str() == "fail" => TimeoutDecision::Fail,
                Some(Scalar::Addr(a)) if a.as_str() == "commit" => TimeoutDecision::Commit,
                Some(_) => return Err(bad("timeout", "expected \"fail\" or \"commit\"")),
            };
            Arc::new(ConditionalSender { timeout })
        }
        "splitter" => {
            allow(&[])?;
            Arc::new(Splitter)
        }
        "flashloan-lender" => {
            allow(&[])?;
            Arc::new(FlashLoanLender)
        }
        "lender" => {
            allow(&[])?;
            Arc::new(Lender { honest: true })
        }
        "malicious-lender" => {
            allow(&[])?;
            Arc::new(Lender { honest: false })
        }
        "naive-client" | "client" => {
            allow(&["threshold"])?;
            Arc::new(LoanClient {
                tracks_debts: kind == "client",
                threshold: uint("threshold", DEFAULT_INVEST_THRESHOLD)?,
            })
        }
        "market" => {
            allow(&["profit"])?;
            Arc::new(Market {
                profit: uint("profit", DEFAULT_MARKET_PROFIT)?,
            })
        }
        other => return Err(BuildError::UnknownKind(other.to_string())),
    };
    Ok(behavior)
}

/// Plain token holder.
#[derive(Debug, Clone, Copy)]
pub struct Wallet;

impl ContractBehavior for Wallet {
    fn kind(&self) -> &str {
        "wallet"
    }

    fn invoke(&self, ctx: &mut ExecutionContext<'_>, entrypoint: &str) -> Result<(), Abort> {
        match entrypoint {
            "deposit" => Ok(()),
            "send" => {
                let to = ctx.arg_addr(0)?;
                let amount = ctx.arg_amount(1)?;
                ctx.emit(to, "deposit", vec![], amount)
            }
            _ => Err(Abort::UnknownEntrypoint),
        }
    }
}

const PENDING_SEND: &str = "pending_send";

/// Sends one token and keeps the send pending until a token comes back.
///
/// `send(to)` activates the monitor of the current transaction as undecided;
/// a later `deposit` of at least one token decides it as commit. The timeout
/// (default fail) applies when nothing comes back in the window.
#[derive(Debug, Clone, Copy)]
pub struct ConditionalSender {
    pub timeout: TimeoutDecision,
}

impl ContractBehavior for ConditionalSender {
    fn kind(&self) -> &str {
        "conditional-sender"
    }

    fn timeout(&self, _tx: TxId, _storage: &Storage) -> TimeoutDecision {
        self.timeout
    }

    fn invoke(&self, ctx: &mut ExecutionContext<'_>, entrypoint: &str) -> Result<(), Abort> {
        match entrypoint {
            "send" => {
                let to = ctx.arg_addr(0)?;
                ctx.emit(to, "deposit", vec![], 1)?;
                let tx = ctx.txid();
                ctx.storage_mut().set(PENDING_SEND, tx);
                let timeout = self.timeout(tx, ctx.storage());
                ctx.monitor_activate(MonitorState::Undecided, timeout);
                Ok(())
            }
            "deposit" => {
                if ctx.amount() >= 1 {
                    if let Some(Scalar::Tx { tx }) = ctx.storage_mut().remove(PENDING_SEND) {
                        ctx.monitor_decide(tx, MonitorState::Commit);
                    }
                }
                Ok(())
            }
            _ => Err(Abort::UnknownEntrypoint),
        }
    }
}

/// Pays one token to each of two contracts.
#[derive(Debug, Clone, Copy)]
pub struct Splitter;

impl ContractBehavior for Splitter {
    fn kind(&self) -> &str {
        "splitter"
    }

    fn invoke(&self, ctx: &mut ExecutionContext<'_>, entrypoint: &str) -> Result<(), Abort> {
        match entrypoint {
            "deposit" => Ok(()),
            "payout" => {
                let a = ctx.arg_addr(0)?;
                let b = ctx.arg_addr(1)?;
                ctx.emit(a, "deposit", vec![], 1)?;
                ctx.emit(b, "deposit", vec![], 1)
            }
            _ => Err(Abort::UnknownEntrypoint),
        }
    }
}

const PENDING_RETURNS: &str = "pending_returns";

/// Same-transaction lender guarded by the fail bit only.
#[derive(Debug, Clone, Copy)]
pub struct FlashLoanLender;

impl ContractBehavior for FlashLoanLender {
    fn kind(&self) -> &str {
        "flashloan-lender"
    }

    fn invoke(&self, ctx: &mut ExecutionContext<'_>, entrypoint: &str) -> Result<(), Abort> {
        let key = tx_key(PENDING_RETURNS, ctx.txid());
        match entrypoint {
            "deposit" => Ok(()),
            "lend" => {
                let amount = ctx.arg_amount(0)?;
                if amount == 0 || ctx.balance() < amount {
                    return Ok(());
                }
                let borrower = caller_contract(ctx)?;
                ctx.emit(borrower, "receiveLoan", vec![], amount)?;
                let pending = ctx.storage().int(&key) + amount as i64;
                ctx.storage_mut().set_int(key, pending);
                ctx.set_fail_bit(true);
                Ok(())
            }
            "returnLoan" => {
                let pending = ctx.storage().int(&key) - ctx.amount() as i64;
                ctx.storage_mut().set_int(key, pending);
                ctx.set_fail_bit(pending > 0);
                Ok(())
            }
            _ => Err(Abort::UnknownEntrypoint),
        }
    }
}

/// Atomic lender backed by a future monitor.
///
/// `lend` activates the current transaction's monitor as undecided with a
/// failing timeout. The honest variant decides it as commit once
/// `pending_returns` for that transaction is paid down to zero; the malicious
/// one takes the repayment and never decides, so the loan always times out.
#[derive(Debug, Clone, Copy)]
pub struct Lender {
    pub honest: bool,
}

impl ContractBehavior for Lender {
    fn kind(&self) -> &str {
        if self.honest {
            "lender"
        } else {
            "malicious-lender"
        }
    }

    fn timeout(&self, _tx: TxId, _storage: &Storage) -> TimeoutDecision {
        TimeoutDecision::Fail
    }

    fn invoke(&self, ctx: &mut ExecutionContext<'_>, entrypoint: &str) -> Result<(), Abort> {
        match entrypoint {
            "deposit" => Ok(()),
            "lend" => {
                let amount = ctx.arg_amount(0)?;
                if amount == 0 || ctx.balance() < amount {
                    return Ok(());
                }
                let borrower = caller_contract(ctx)?;
                ctx.emit(borrower, "receiveLoan", vec![], amount)?;
                let tx = ctx.txid();
                let key = tx_key(PENDING_RETURNS, tx);
                let pending = ctx.storage().int(&key) + amount as i64;
                ctx.storage_mut().set_int(key, pending);
                let timeout = self.timeout(tx, ctx.storage());
                ctx.monitor_activate(MonitorState::Undecided, timeout);
                Ok(())
            }
            "returnLoan" => {
                let loan = ctx.arg_tx(0)?;
                let key = tx_key(PENDING_RETURNS, loan);
                let before = ctx.storage().int(&key);
                let after = before - ctx.amount() as i64;
                ctx.storage_mut().set_int(key, after);
                if self.honest && before > 0 && after == 0 {
                    ctx.monitor_decide(loan, MonitorState::Commit);
                }
                Ok(())
            }
            _ => Err(Abort::UnknownEntrypoint),
        }
    }
}

const TO_PAY: &str = "toPay";
const FLASH: &str = "flash";

/// Borrowing client.
///
/// The naive variant always repays; the careful one records what it owes in
/// `toPay` when loan tokens actually arrive and only repays recorded debts.
#[derive(Debug, Clone, Copy)]
pub struct LoanClient {
    pub tracks_debts: bool,
    pub threshold: u64,
}

impl ContractBehavior for LoanClient {
    fn kind(&self) -> &str {
        if self.tracks_debts {
            "client"
        } else {
            "naive-client"
        }
    }

    fn invoke(&self, ctx: &mut ExecutionContext<'_>, entrypoint: &str) -> Result<(), Abort> {
        match entrypoint {
            "deposit" => Ok(()),
            "borrow" => {
                let lender = ctx.arg_addr(0)?;
                let amount = ctx.arg_int(1)?;
                // optional third argument: repay inside this transaction
                if ctx.args().get(2).and_then(Scalar::as_int) == Some(1) {
                    let key = tx_key(FLASH, ctx.txid());
                    ctx.storage_mut().set_int(key, 1);
                }
                ctx.emit(lender, "lend", vec![Scalar::Int(amount)], 0)
            }
            "receiveLoan" => {
                let tx = ctx.txid();
                let lender = caller_contract(ctx)?;
                let amount = ctx.amount();
                if self.tracks_debts {
                    let key = tx_key(TO_PAY, tx);
                    let owed = ctx.storage().int(&key) + amount as i64;
                    ctx.storage_mut().set_int(key, owed);
                }
                let flash = tx_key(FLASH, tx);
                if ctx.storage().int(&flash) == 1 {
                    ctx.storage_mut().set_int(flash, 0);
                    if self.tracks_debts {
                        let key = tx_key(TO_PAY, tx);
                        let owed = ctx.storage().int(&key) - amount as i64;
                        ctx.storage_mut().set_int(key, owed.max(0));
                    }
                    ctx.emit(lender, "returnLoan", vec![Scalar::tx(tx)], amount)?;
                }
                Ok(())
            }
            "invest" => {
                let market = ctx.arg_addr(0)?;
                let stake = ctx.balance();
                if stake < self.threshold || stake == 0 {
                    return Err(Abort::msg(format!(
                        "needs {} tokens to invest, has {stake}",
                        self.threshold
                    )));
                }
                ctx.emit(market, "invest", vec![], stake)
            }
            "payBack" => {
                let lender = ctx.arg_addr(0)?;
                let loan = ctx.arg_tx(1)?;
                let amount = ctx.arg_amount(2)?;
                if self.tracks_debts {
                    let key = tx_key(TO_PAY, loan);
                    let owed = ctx.storage().int(&key);
                    if owed <= 0 {
                        return Err(Abort::msg(format!("nothing owed for {loan}")));
                    }
                    ctx.storage_mut()
                        .set_int(key, (owed - amount as i64).max(0));
                }
                ctx.emit(lender, "returnLoan", vec![Scalar::tx(loan)], amount)
            }
            _ => Err(Abort::UnknownEntrypoint),
        }
    }
}

/// Investment sink that pays back the stake plus a fixed profit.
#[derive(Debug, Clone, Copy)]
pub struct Market {
    pub profit: u64,
}

impl ContractBehavior for Market {
    fn kind(&self) -> &str {
        "market"
    }

    fn invoke(&self, ctx: &mut ExecutionContext<'_>, entrypoint: &str) -> Result<(), Abort> {
        match entrypoint {
            "deposit" => Ok(()),
            "invest" => {
                let investor = caller_contract(ctx)?;
                let payout = ctx.amount() + self.profit;
                ctx.emit(investor, "deposit", vec![], payout)
            }
            _ => Err(Abort::UnknownEntrypoint),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_kind_builds_with_defaults() {
        for kind in KINDS {
            let b = build(kind, &Params::new()).unwrap();
            assert_eq!(b.kind(), kind);
        }
    }

    #[test]
    fn unknown_kind_and_bad_params() {
        assert_eq!(
            build("vault", &Params::new()).unwrap_err(),
            BuildError::UnknownKind("vault".into())
        );
        let mut p = Params::new();
        p.insert("profit".into(), Scalar::Int(-1));
        assert!(matches!(
            build("market", &p),
            Err(BuildError::BadParam { .. })
        ));
        assert!(matches!(
            build("wallet", &p),
            Err(BuildError::BadParam { .. })
        ));
    }

    #[test]
    fn lender_timeouts() {
        let s = Storage::new();
        assert_eq!(
            Lender { honest: true }.timeout(TxId(0), &s),
            TimeoutDecision::Fail
        );
        assert_eq!(
            Lender { honest: false }.timeout(TxId(0), &s),
            TimeoutDecision::Fail
        );
        assert_eq!(Wallet.timeout(TxId(0), &s), TimeoutDecision::Commit);
    }
}
