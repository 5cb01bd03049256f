//! Failing maps, timeout maps and the per-contract monitor context.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Address, TxId};

/// State of a transaction's future monitor inside one contract's failing map.
///
/// `Inactive` is the absent entry: the contract never activated a monitor for
/// that transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MonitorState {
    Inactive,
    Undecided,
    Fail,
    Commit,
}

impl MonitorState {
    pub fn is_terminal(self) -> bool {
        matches!(self, MonitorState::Fail | MonitorState::Commit)
    }

    /// Annotation symbol used in tree renderings.
    pub fn symbol(self) -> char {
        match self {
            MonitorState::Inactive => '–',
            MonitorState::Undecided => '?',
            MonitorState::Fail => '✗',
            MonitorState::Commit => '✓',
        }
    }
}

impl fmt::Display for MonitorState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MonitorState::Inactive => "none",
            MonitorState::Undecided => "undecided",
            MonitorState::Fail => "fail",
            MonitorState::Commit => "commit",
        };
        f.write_str(s)
    }
}

/// What a contract's timeout function answers for a still-undecided monitor.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum TimeoutDecision {
    Fail,
    #[default]
    Commit,
}

impl From<TimeoutDecision> for MonitorState {
    fn from(d: TimeoutDecision) -> Self {
        match d {
            TimeoutDecision::Fail => MonitorState::Fail,
            TimeoutDecision::Commit => MonitorState::Commit,
        }
    }
}

/// Legal failing-map transitions.
///
/// Activation (only for the transaction being executed) moves an absent
/// entry to any other state; a decision moves an undecided entry of a past
/// transaction to `Fail` or `Commit`.
pub fn monitor_transition_legal(from: MonitorState, to: MonitorState, is_current_tx: bool) -> bool {
    use MonitorState::*;
    if is_current_tx {
        from == Inactive && matches!(to, Undecided | Fail | Commit)
    } else {
        from == Undecided && matches!(to, Fail | Commit)
    }
}

/// Failing map and timeout map of a single contract.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContractMonitors {
    pub failmap: BTreeMap<TxId, MonitorState>,
    pub timeouts: BTreeMap<TxId, TimeoutDecision>,
}

impl ContractMonitors {
    fn is_empty(&self) -> bool {
        self.failmap.is_empty() && self.timeouts.is_empty()
    }
}

/// The future monitor context: failing map and timeout map per contract.
///
/// Absent entries mean `Inactive`. The representation is normalized (no
/// `Inactive` entries, no empty per-contract records) so structural equality
/// coincides with semantic equality.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MonitorContext {
    contracts: BTreeMap<Address, ContractMonitors>,
}

impl MonitorContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.contracts.is_empty()
    }

    pub fn state(&self, contract: &Address, tx: TxId) -> MonitorState {
        self.contracts
            .get(contract)
            .and_then(|m| m.failmap.get(&tx))
            .copied()
            .unwrap_or(MonitorState::Inactive)
    }

    /// Recorded timeout decision, if any.
    pub fn timeout(&self, contract: &Address, tx: TxId) -> Option<TimeoutDecision> {
        self.contracts
            .get(contract)
            .and_then(|m| m.timeouts.get(&tx))
            .copied()
    }

    /// Contracts whose failing map has a non-`Inactive` entry for `tx`.
    pub fn monitoring_contracts(&self, tx: TxId) -> BTreeSet<Address> {
        self.contracts
            .iter()
            .filter(|(_, m)| m.failmap.contains_key(&tx))
            .map(|(a, _)| a.clone())
            .collect()
    }

    /// Every transaction id mentioned anywhere in the context.
    pub fn tx_ids(&self) -> BTreeSet<TxId> {
        self.contracts
            .values()
            .flat_map(|m| m.failmap.keys().chain(m.timeouts.keys()).copied())
            .collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Address, TxId, MonitorState)> {
        self.contracts
            .iter()
            .flat_map(|(a, m)| m.failmap.iter().map(move |(t, s)| (a, *t, *s)))
    }

    /// Set the failing-map entry. Writing `Inactive` removes the entry and
    /// its timeout.
    pub fn set_state(&mut self, contract: &Address, tx: TxId, state: MonitorState) {
        if state == MonitorState::Inactive {
            if let Some(m) = self.contracts.get_mut(contract) {
                m.failmap.remove(&tx);
                m.timeouts.remove(&tx);
                if m.is_empty() {
                    self.contracts.remove(contract);
                }
            }
            return;
        }
        self.contracts
            .entry(contract.clone())
            .or_default()
            .failmap
            .insert(tx, state);
    }

    pub fn set_timeout(&mut self, contract: &Address, tx: TxId, decision: TimeoutDecision) {
        self.contracts
            .entry(contract.clone())
            .or_default()
            .timeouts
            .insert(tx, decision);
    }

    /// Drop every entry for `tx` in every contract.
    pub fn forget(&mut self, tx: TxId) {
        self.contracts.retain(|_, m| {
            m.failmap.remove(&tx);
            m.timeouts.remove(&tx);
            !m.is_empty()
        });
    }

    /// Drop every entry for transactions strictly older than `bound`.
    pub fn forget_before(&mut self, bound: TxId) {
        self.contracts.retain(|_, m| {
            m.failmap.retain(|t, _| *t >= bound);
            m.timeouts.retain(|t, _| *t >= bound);
            !m.is_empty()
        });
    }

    pub fn without(&self, tx: TxId) -> MonitorContext {
        let mut out = self.clone();
        out.forget(tx);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use MonitorState::*;

    #[test]
    fn activation_and_decision_arrows() {
        assert!(monitor_transition_legal(Inactive, Undecided, true));
        assert!(monitor_transition_legal(Inactive, Fail, true));
        assert!(monitor_transition_legal(Inactive, Commit, true));
        assert!(monitor_transition_legal(Undecided, Commit, false));
        assert!(monitor_transition_legal(Undecided, Fail, false));
    }

    #[test]
    fn terminal_states_do_not_move() {
        assert!(!monitor_transition_legal(Commit, Fail, false));
        assert!(!monitor_transition_legal(Fail, Commit, false));
        assert!(!monitor_transition_legal(Commit, Undecided, true));
        // no activation of past transactions, no decision of fresh ones
        assert!(!monitor_transition_legal(Inactive, Undecided, false));
        assert!(!monitor_transition_legal(Undecided, Commit, true));
        assert!(!monitor_transition_legal(Undecided, Undecided, false));
    }

    #[test]
    fn exhaustive_transition_table() {
        let all = [Inactive, Undecided, Fail, Commit];
        let mut legal = 0;
        for from in all {
            for to in all {
                for cur in [true, false] {
                    if monitor_transition_legal(from, to, cur) {
                        legal += 1;
                        assert!(!from.is_terminal());
                    }
                }
            }
        }
        // three activation arrows plus two decision arrows
        assert_eq!(legal, 5);
    }

    #[test]
    fn context_is_normalized() {
        let l = Address::new("L");
        let mut a = MonitorContext::new();
        a.set_state(&l, TxId(0), Undecided);
        a.set_timeout(&l, TxId(0), TimeoutDecision::Fail);
        a.forget(TxId(0));
        assert_eq!(a, MonitorContext::new());
        assert!(a.is_empty());

        let mut b = MonitorContext::new();
        b.set_state(&l, TxId(1), Commit);
        b.set_state(&Address::new("A"), TxId(1), Undecided);
        let mut c = MonitorContext::new();
        c.set_state(&Address::new("A"), TxId(1), Undecided);
        c.set_state(&l, TxId(1), Commit);
        assert_eq!(b, c);
        assert_eq!(b.monitoring_contracts(TxId(1)).len(), 2);
        assert_eq!(b.state(&l, TxId(7)), Inactive);
    }

    #[test]
    fn forget_before_keeps_window() {
        let l = Address::new("L");
        let mut d = MonitorContext::new();
        for i in 0..5 {
            d.set_state(&l, TxId(i), Undecided);
            d.set_timeout(&l, TxId(i), TimeoutDecision::Commit);
        }
        d.forget_before(TxId(3));
        assert_eq!(d.tx_ids(), [TxId(3), TxId(4)].into_iter().collect());
    }
}
