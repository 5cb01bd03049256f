//! Ledger state, external balances and extended configurations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Address, ModelError, MonitorContext, Scalar, TxId, UserId};

/// Token amounts. Balances are never negative.
pub type Tokens = u64;

/// Contract storage: a canonical key/value map.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Storage(BTreeMap<String, Scalar>);

impl Storage {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<&Scalar> {
        self.0.get(key)
    }

    /// Integer stored under `key`; missing or non-integer values read as 0.
    pub fn int(&self, key: &str) -> i64 {
        self.0.get(key).and_then(Scalar::as_int).unwrap_or(0)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<Scalar>) {
        self.0.insert(key.into(), value.into());
    }

    /// Store an integer, removing the key when it is 0 so that absent and
    /// zero entries compare equal.
    pub fn set_int(&mut self, key: impl Into<String>, value: i64) {
        let key = key.into();
        if value == 0 {
            self.0.remove(&key);
        } else {
            self.0.insert(key, Scalar::Int(value));
        }
    }

    pub fn remove(&mut self, key: &str) -> Option<Scalar> {
        self.0.remove(key)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Scalar)> {
        self.0.iter()
    }
}

/// Per-transaction storage key, e.g. `pending_returns/3`.
pub fn tx_key(prefix: &str, tx: TxId) -> String {
    format!("{prefix}/{}", tx.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContractState {
    pub balance: Tokens,
    pub storage: Storage,
}

/// Σ: contract storage and balances plus a block height counter.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LedgerState {
    pub contracts: BTreeMap<Address, ContractState>,
    pub height: u64,
}

impl LedgerState {
    pub fn balance(&self, a: &Address) -> Option<Tokens> {
        self.contracts.get(a).map(|c| c.balance)
    }

    pub fn storage(&self, a: &Address) -> Option<&Storage> {
        self.contracts.get(a).map(|c| &c.storage)
    }

    pub fn total_tokens(&self) -> u128 {
        self.contracts.values().map(|c| c.balance as u128).sum()
    }
}

/// U: balances of external users.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExternalBalances(BTreeMap<UserId, Tokens>);

impl ExternalBalances {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, user: &UserId) -> Option<Tokens> {
        self.0.get(user).copied()
    }

    pub fn contains(&self, user: &UserId) -> bool {
        self.0.contains_key(user)
    }

    pub fn set(&mut self, user: UserId, amount: Tokens) {
        self.0.insert(user, amount);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&UserId, &Tokens)> {
        self.0.iter()
    }

    pub fn total_tokens(&self) -> u128 {
        self.0.values().map(|v| *v as u128).sum()
    }

    pub(crate) fn get_mut(&mut self, user: &UserId) -> Option<&mut Tokens> {
        self.0.get_mut(user)
    }
}

impl FromIterator<(UserId, Tokens)> for ExternalBalances {
    fn from_iter<I: IntoIterator<Item = (UserId, Tokens)>>(iter: I) -> Self {
        ExternalBalances(iter.into_iter().collect())
    }
}

/// Charge `cost` to `user`, clamping at zero.
pub fn discount(
    users: &ExternalBalances,
    user: &UserId,
    cost: Tokens,
) -> Result<ExternalBalances, ModelError> {
    let mut out = users.clone();
    let bal = out
        .get_mut(user)
        .ok_or_else(|| ModelError::UnknownUser(user.clone()))?;
    *bal -= cost.min(*bal);
    Ok(out)
}

/// Payload of every tree node and history entry: (Σ, Δ, U).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExtendedConfiguration {
    pub ledger: LedgerState,
    pub monitors: MonitorContext,
    pub users: ExternalBalances,
}

impl ExtendedConfiguration {
    /// Initial configuration: empty storage, empty monitor context, height 0.
    pub fn genesis<C, U>(contracts: C, users: U) -> Self
    where
        C: IntoIterator<Item = (Address, Tokens)>,
        U: IntoIterator<Item = (UserId, Tokens)>,
    {
        ExtendedConfiguration {
            ledger: LedgerState {
                contracts: contracts
                    .into_iter()
                    .map(|(a, balance)| {
                        (
                            a,
                            ContractState {
                                balance,
                                storage: Storage::new(),
                            },
                        )
                    })
                    .collect(),
                height: 0,
            },
            monitors: MonitorContext::new(),
            users: users.into_iter().collect(),
        }
    }

    /// Canonical JSON (map keys sorted, fixed field order).
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }

    pub fn total_tokens(&self) -> u128 {
        self.ledger.total_tokens() + self.users.total_tokens()
    }

    /// Copy with all monitor entries of `tx` removed.
    pub fn without_monitors_of(&self, tx: TxId) -> ExtendedConfiguration {
        ExtendedConfiguration {
            ledger: self.ledger.clone(),
            monitors: self.monitors.without(tx),
            users: self.users.clone(),
        }
    }

    /// Short `name=balance` listing of contract balances.
    pub fn balance_digest(&self) -> String {
        self.ledger
            .contracts
            .iter()
            .map(|(a, c)| format!("{a}={}", c.balance))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alice(v: Tokens) -> ExternalBalances {
        [(UserId::new("alice"), v)].into_iter().collect()
    }

    #[test]
    fn discount_examples() {
        let a = UserId::new("alice");
        assert_eq!(discount(&alice(10), &a, 0).unwrap(), alice(10));
        assert_eq!(discount(&alice(10), &a, 3).unwrap(), alice(7));
        assert_eq!(discount(&alice(2), &a, 5).unwrap(), alice(0));
    }

    #[test]
    fn discount_unknown_user() {
        let err = discount(&alice(1), &UserId::new("bob"), 1).unwrap_err();
        assert!(matches!(err, ModelError::UnknownUser(_)));
    }

    #[test]
    fn canonical_json_is_order_insensitive() {
        let mut x = ExtendedConfiguration::default();
        let mut y = ExtendedConfiguration::default();
        for n in ["b", "a", "c"] {
            x.ledger
                .contracts
                .insert(Address::new(n), ContractState::default());
        }
        for n in ["c", "b", "a"] {
            y.ledger
                .contracts
                .insert(Address::new(n), ContractState::default());
        }
        assert_eq!(x, y);
        assert_eq!(x.to_canonical_json(), y.to_canonical_json());
    }

    #[test]
    fn zero_storage_entries_vanish() {
        let mut s = Storage::new();
        s.set_int("pending_returns/0", 100);
        s.set_int("pending_returns/0", 0);
        assert_eq!(s, Storage::new());
    }
}
