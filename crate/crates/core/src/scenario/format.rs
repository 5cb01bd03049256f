//! Line-oriented JSON scenario files.
//!
//! ```text
//! # comment
//! {"scenario":{"name":"demo","k":2,"cost":0,"engine":"future"}}
//! {"user":{"name":"alice","balance":10}}
//! {"contract":{"name":"a","kind":"wallet","balance":1,"params":{}}}
//! {"tx":{"source":"alice","target":"a","entrypoint":"send","args":["b",1],"amount":0}}
//! ```
//!
//! Argument values: a number is an integer, a string names a contract and
//! `{"tx": n}` is a transaction id.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use super::{ContractSpec, EngineKind, Scenario, TxSpec};
use crate::engine::builtins::{self, KINDS};
use crate::model::{Address, Scalar, TxId, UserId, NOOP_TARGET, SYSTEM_USER};

/// A problem with one field of one line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// 1-based, 0 for problems with the file as a whole.
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}: {}", self.field, self.message)
        } else {
            write!(f, "line {}: {}: {}", self.line, self.field, self.message)
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
}

impl ScenarioError {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            ScenarioError::Invalid(d) => d,
            ScenarioError::Io { .. } => &[],
        }
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario_str(&text)
}

struct Parser {
    diags: Vec<Diagnostic>,
    line: usize,
}

impl Parser {
    fn err(&mut self, field: &str, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            line: self.line,
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn fields<'a>(
        &mut self,
        obj: &'a Value,
        kind: &str,
        allowed: &[&str],
    ) -> Option<&'a Map<String, Value>> {
        let Some(map) = obj.as_object() else {
            self.err(kind, "expected an object");
            return None;
        };
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                self.err(&format!("{kind}.{key}"), "unknown field");
            }
        }
        Some(map)
    }

    fn string(&mut self, map: &Map<String, Value>, kind: &str, key: &str) -> Option<String> {
        match map.get(key) {
            Some(Value::String(s)) if !s.is_empty() => Some(s.clone()),
            Some(_) => {
                self.err(&format!("{kind}.{key}"), "expected a non-empty string");
                None
            }
            None => {
                self.err(&format!("{kind}.{key}"), "missing");
                None
            }
        }
    }

    /// Non-negative integer, `default` when absent.
    fn amount(
        &mut self,
        map: &Map<String, Value>,
        kind: &str,
        key: &str,
        default: Option<u64>,
    ) -> Option<u64> {
        let field = format!("{kind}.{key}");
        match map.get(key) {
            None => {
                if default.is_none() {
                    self.err(&field, "missing");
                }
                default
            }
            Some(Value::Number(n)) => {
                if let Some(v) = n.as_u64() {
                    Some(v)
                } else if n.as_i64().is_some() {
                    self.err(&field, format!("negative amount {n}"));
                    None
                } else {
                    self.err(&field, format!("expected an integer, got {n}"));
                    None
                }
            }
            Some(other) => {
                self.err(&field, format!("expected an integer, got {other}"));
                None
            }
        }
    }

    fn scalar(&mut self, v: &Value, field: &str) -> Option<Scalar> {
        match v {
            Value::Number(n) => match n.as_i64() {
                Some(i) => Some(Scalar::Int(i)),
                None => {
                    self.err(field, format!("integer out of range: {n}"));
                    None
                }
            },
            Value::String(s) => Some(Scalar::Addr(Address::new(s.clone()))),
            Value::Object(m) if m.len() == 1 && m.contains_key("tx") => match m["tx"].as_u64() {
                Some(t) => Some(Scalar::tx(TxId(t))),
                None => {
                    self.err(field, "transaction id must be a non-negative integer");
                    None
                }
            },
            other => {
                self.err(
                    field,
                    format!("expected integer, contract name or {{\"tx\": n}}, got {other}"),
                );
                None
            }
        }
    }
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario, ScenarioError> {
    let mut p = Parser {
        diags: Vec::new(),
        line: 0,
    };
    let mut header: Option<(Option<String>, Option<usize>, u64, EngineKind)> = None;
    let mut users: Vec<(UserId, u64, usize)> = Vec::new();
    let mut contracts: Vec<(ContractSpec, usize)> = Vec::new();
    let mut txs: Vec<(TxSpec, usize)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        p.line = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("//") {
            continue;
        }
        let value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                p.err("line", format!("invalid JSON: {e}"));
                continue;
            }
        };
        let Some(obj) = value.as_object().filter(|o| o.len() == 1) else {
            p.err(
                "line",
                "expected an object with exactly one of scenario, user, contract, tx",
            );
            continue;
        };
        let (kind, body) = obj.iter().next().expect("one entry");
        match kind.as_str() {
            "scenario" => {
                let Some(m) = p.fields(body, "scenario", &["name", "k", "cost", "engine"]) else {
                    continue;
                };
                if header.is_some() {
                    p.err("scenario", "duplicate scenario header");
                }
                let name = match m.get("name") {
                    None => None,
                    Some(_) => p.string(m, "scenario", "name"),
                };
                let k = p.amount(m, "scenario", "k", None).and_then(|k| {
                    if k == 0 {
                        p.err("scenario.k", "monitoring window must be at least 1");
                        None
                    } else {
                        Some(k as usize)
                    }
                });
                let cost = p.amount(m, "scenario", "cost", Some(0)).unwrap_or(0);
                let engine = match m.get("engine").map(|v| v.as_str()) {
                    None | Some(Some("future")) => EngineKind::Future,
                    Some(Some("legacy")) => EngineKind::Legacy,
                    Some(_) => {
                        p.err("scenario.engine", "expected \"future\" or \"legacy\"");
                        EngineKind::Future
                    }
                };
                header = Some((name, k, cost, engine));
            }
            "user" => {
                let Some(m) = p.fields(body, "user", &["name", "balance"]) else {
                    continue;
                };
                let name = p.string(m, "user", "name");
                let balance = p.amount(m, "user", "balance", Some(0));
                // invalid records still register their name so one mistake
                // is reported once
                if let Some(n) = name {
                    let b = balance.unwrap_or(0);
                    if n == SYSTEM_USER {
                        p.err("user.name", format!("`{n}` is reserved"));
                    }
                    users.push((UserId::new(n), b, p.line));
                }
            }
            "contract" => {
                let Some(m) = p.fields(body, "contract", &["name", "kind", "balance", "params"])
                else {
                    continue;
                };
                let name = p.string(m, "contract", "name");
                let kind = p.string(m, "contract", "kind");
                let balance = p.amount(m, "contract", "balance", Some(0));
                let mut params = BTreeMap::new();
                match m.get("params") {
                    None => {}
                    Some(Value::Object(ps)) => {
                        for (k, v) in ps {
                            if let Some(s) = p.scalar(v, &format!("contract.params.{k}")) {
                                params.insert(k.clone(), s);
                            }
                        }
                    }
                    Some(_) => p.err("contract.params", "expected an object"),
                }
                if let Some(k) = &kind {
                    if !KINDS.contains(&k.as_str()) {
                        p.err("contract.kind", format!("unknown contract kind `{k}`"));
                    } else if let Err(e) = builtins::build(k, &params) {
                        p.err("contract.params", e.to_string());
                    }
                }
                if let (Some(n), Some(k)) = (name, kind) {
                    let b = balance.unwrap_or(0);
                    if n == NOOP_TARGET {
                        p.err("contract.name", format!("`{n}` is reserved"));
                    }
                    contracts.push((
                        ContractSpec {
                            name: Address::new(n),
                            kind: k,
                            balance: b,
                            params,
                        },
                        p.line,
                    ));
                }
            }
            "tx" => {
                let Some(m) = p.fields(
                    body,
                    "tx",
                    &["source", "target", "entrypoint", "args", "amount"],
                ) else {
                    continue;
                };
                let source = p.string(m, "tx", "source");
                let target = p.string(m, "tx", "target");
                let entrypoint = p.string(m, "tx", "entrypoint");
                let amount = p.amount(m, "tx", "amount", Some(0));
                let mut args = Vec::new();
                match m.get("args") {
                    None => {}
                    Some(Value::Array(vs)) => {
                        for (j, v) in vs.iter().enumerate() {
                            if let Some(s) = p.scalar(v, &format!("tx.args[{j}]")) {
                                args.push(s);
                            }
                        }
                    }
                    Some(_) => p.err("tx.args", "expected an array"),
                }
                if let (Some(s), Some(t), Some(e)) = (source, target, entrypoint) {
                    let a = amount.unwrap_or(0);
                    txs.push((
                        TxSpec {
                            source: UserId::new(s),
                            target: Address::new(t),
                            entrypoint: e,
                            args,
                            amount: a,
                        },
                        p.line,
                    ));
                }
            }
            other => p.err("line", format!("unknown record `{other}`")),
        }
    }

    // Name resolution.
    let mut user_names = BTreeSet::new();
    for (u, _, line) in &users {
        if !user_names.insert(u.clone()) {
            p.diags.push(Diagnostic {
                line: *line,
                field: "user.name".into(),
                message: format!("duplicate user `{u}`"),
            });
        }
    }
    let mut contract_names = BTreeSet::new();
    for (c, line) in &contracts {
        if !contract_names.insert(c.name.clone()) {
            p.diags.push(Diagnostic {
                line: *line,
                field: "contract.name".into(),
                message: format!("duplicate contract `{}`", c.name),
            });
        }
    }
    for (t, line) in &txs {
        let mut dangling = |field: String, message: String| {
            p.diags.push(Diagnostic {
                line: *line,
                field,
                message,
            })
        };
        if !user_names.contains(&t.source) {
            dangling("tx.source".into(), format!("unknown user `{}`", t.source));
        }
        if !contract_names.contains(&t.target) {
            dangling(
                "tx.target".into(),
                format!("unknown contract `{}`", t.target),
            );
        }
        for (j, a) in t.args.iter().enumerate() {
            if let Scalar::Addr(a) = a {
                if !contract_names.contains(a) {
                    dangling(format!("tx.args[{j}]"), format!("unknown contract `{a}`"));
                }
            }
        }
    }

    let Some((name, k, cost, engine)) = header else {
        p.diags.push(Diagnostic {
            line: 0,
            field: "scenario".into(),
            message: "missing scenario header".into(),
        });
        return Err(ScenarioError::Invalid(p.diags));
    };
    if !p.diags.is_empty() {
        p.diags.sort_by_key(|d| d.line);
        return Err(ScenarioError::Invalid(p.diags));
    }
    Ok(Scenario {
        name,
        k: k.expect("validated"),
        cost,
        engine,
        users: users.into_iter().map(|(u, b, _)| (u, b)).collect(),
        contracts: contracts.into_iter().map(|(c, _)| c).collect(),
        transactions: txs.into_iter().map(|(t, _)| t).collect(),
    })
}

#[derive(Serialize)]
struct HeaderOut<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<&'a str>,
    k: usize,
    cost: u64,
    engine: EngineKind,
}

#[derive(Serialize)]
struct UserOut<'a> {
    name: &'a UserId,
    balance: u64,
}

#[derive(Serialize)]
struct ContractOut<'a> {
    name: &'a Address,
    kind: &'a str,
    balance: u64,
    params: &'a BTreeMap<String, Scalar>,
}

#[derive(Serialize)]
struct TxOut<'a> {
    source: &'a UserId,
    target: &'a Address,
    entrypoint: &'a str,
    args: &'a [Scalar],
    amount: u64,
}

fn line<T: Serialize>(key: &str, body: T) -> String {
    let mut m = serde_json::Map::new();
    m.insert(
        key.to_string(),
        serde_json::to_value(body).expect("serializable"),
    );
    serde_json::to_string(&Value::Object(m)).expect("serializable")
}

pub(super) fn serialize(s: &Scenario) -> String {
    let mut out = Vec::new();
    out.push(line(
        "scenario",
        HeaderOut {
            name: s.name.as_deref(),
            k: s.k,
            cost: s.cost,
            engine: s.engine,
        },
    ));
    for (name, balance) in &s.users {
        out.push(line(
            "user",
            UserOut {
                name,
                balance: *balance,
            },
        ));
    }
    for c in &s.contracts {
        out.push(line(
            "contract",
            ContractOut {
                name: &c.name,
                kind: &c.kind,
                balance: c.balance,
                params: &c.params,
            },
        ));
    }
    for t in &s.transactions {
        out.push(line(
            "tx",
            TxOut {
                source: &t.source,
                target: &t.target,
                entrypoint: &t.entrypoint,
                args: &t.args,
                amount: t.amount,
            },
        ));
    }
    let mut text = out.join("\n");
    text.push('\n');
    text
}
