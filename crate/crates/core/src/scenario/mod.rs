//! Scenario files, bundled demos, seeded generators and the run driver.

pub mod demos;
mod format;
pub mod fuzz;
mod run;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::builtins::{self, BuildError, Params};
use crate::engine::ContractRegistry;
use crate::model::{Address, ExtendedConfiguration, Scalar, Tokens, Transaction, TxId, UserId};

pub use format::{parse_scenario, parse_scenario_str, Diagnostic, ScenarioError};
pub use run::{
    check_assertions, export_json, oracle_command, report_text, run_scenario, Assertion,
    DriverError, OracleCommandError, RunArtifacts, RunOptions, TraceEvent, TraceNode,
};

/// Which semantics a scenario runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    #[default]
    Future,
    /// Immediate commit/fail, monitor writes rejected.
    Legacy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractSpec {
    pub name: Address,
    pub kind: String,
    pub balance: Tokens,
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxSpec {
    pub source: UserId,
    pub target: Address,
    pub entrypoint: String,
    pub args: Vec<Scalar>,
    pub amount: Tokens,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: Option<String>,
    pub k: usize,
    pub cost: Tokens,
    pub engine: EngineKind,
    pub users: Vec<(UserId, Tokens)>,
    pub contracts: Vec<ContractSpec>,
    pub transactions: Vec<TxSpec>,
}

impl Scenario {
    pub fn new(k: usize) -> Self {
        Scenario {
            name: None,
            k,
            cost: 0,
            engine: EngineKind::Future,
            users: Vec::new(),
            contracts: Vec::new(),
            transactions: Vec::new(),
        }
    }

    pub fn user(mut self, name: &str, balance: Tokens) -> Self {
        self.users.push((UserId::new(name), balance));
        self
    }

    pub fn contract(mut self, name: &str, kind: &str, balance: Tokens) -> Self {
        self.contracts.push(ContractSpec {
            name: Address::new(name),
            kind: kind.to_string(),
            balance,
            params: BTreeMap::new(),
        });
        self
    }

    pub fn tx(mut self, source: &str, target: &str, entrypoint: &str, args: Vec<Scalar>) -> Self {
        self.transactions.push(TxSpec {
            source: UserId::new(source),
            target: Address::new(target),
            entrypoint: entrypoint.to_string(),
            args,
            amount: 0,
        });
        self
    }

    pub fn genesis(&self) -> ExtendedConfiguration {
        ExtendedConfiguration::genesis(
            self.contracts.iter().map(|c| (c.name.clone(), c.balance)),
            self.users.iter().cloned(),
        )
    }

    pub fn registry(&self) -> Result<ContractRegistry, BuildError> {
        let mut reg = ContractRegistry::new();
        for c in &self.contracts {
            reg.install(c.name.clone(), builtins::build(&c.kind, &c.params)?);
        }
        Ok(reg)
    }

    /// Transactions with ids assigned by position.
    pub fn transactions(&self) -> Vec<Transaction> {
        self.transactions
            .iter()
            .enumerate()
            .map(|(i, t)| {
                Transaction::new(
                    TxId(i as u64),
                    t.source.clone(),
                    t.target.clone(),
                    t.entrypoint.clone(),
                    t.args.clone(),
                    t.amount,
                )
                .with_cost(self.cost)
            })
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        format::serialize(self)
    }
}
