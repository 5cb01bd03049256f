use std::fmt;

use serde::{Deserialize, Serialize};

/// Unique address of an installed contract.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Address(String);

impl Address {
    pub fn new(name: impl Into<String>) -> Self {
        Address(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Address {
    fn from(s: &str) -> Self {
        Address::new(s)
    }
}

/// External (non-contract) account.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(String);

impl UserId {
    pub fn new(name: impl Into<String>) -> Self {
        UserId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UserId {
    fn from(s: &str) -> Self {
        UserId::new(s)
    }
}

/// Transaction identifier: the submission index within a run, starting at 0.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct TxId(pub u64);

impl TxId {
    pub fn index(self) -> u64 {
        self.0
    }

    pub fn next(self) -> TxId {
        TxId(self.0 + 1)
    }
}

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// Who invoked an operation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Caller {
    User(UserId),
    Contract(Address),
}

impl Caller {
    pub fn as_contract(&self) -> Option<&Address> {
        match self {
            Caller::Contract(a) => Some(a),
            Caller::User(_) => None,
        }
    }
}

impl fmt::Display for Caller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Caller::User(u) => write!(f, "user:{u}"),
            Caller::Contract(a) => write!(f, "{a}"),
        }
    }
}

/// Scalar value used for operation arguments, contract parameters and storage.
///
/// On the wire a JSON number is an integer, a JSON string is an address and
/// `{"tx": n}` is a transaction id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Addr(Address),
    Tx { tx: TxId },
}

impl Scalar {
    pub fn tx(id: TxId) -> Scalar {
        Scalar::Tx { tx: id }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Scalar::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_addr(&self) -> Option<&Address> {
        match self {
            Scalar::Addr(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_tx(&self) -> Option<TxId> {
        match self {
            Scalar::Tx { tx } => Some(*tx),
            _ => None,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Int(v) => write!(f, "{v}"),
            Scalar::Addr(a) => write!(f, "{a}"),
            Scalar::Tx { tx } => write!(f, "{tx}"),
        }
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Int(v)
    }
}

impl From<Address> for Scalar {
    fn from(a: Address) -> Self {
        Scalar::Addr(a)
    }
}

impl From<&str> for Scalar {
    fn from(a: &str) -> Self {
        Scalar::Addr(Address::new(a))
    }
}

impl From<TxId> for Scalar {
    fn from(t: TxId) -> Self {
        Scalar::tx(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_wire_forms() {
        let xs = vec![
            Scalar::Int(-3),
            Scalar::Addr(Address::new("L")),
            Scalar::tx(TxId(4)),
        ];
        let s = serde_json::to_string(&xs).unwrap();
        assert_eq!(s, r#"[-3,"L",{"tx":4}]"#);
        let back: Vec<Scalar> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, xs);
    }
}
