//! Running scenarios: traces, figures, JSON export, assertions and the
//! oracle command.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{EngineKind, Scenario};
use crate::engine::builtins::BuildError;
use crate::engine::EngineError;
use crate::model::{TxId, TxStatus};
use crate::oracle::{check_scenario, OracleError, OracleReport};
use crate::render;
use crate::runtime::{legacy_fold, BlockchainRun, History, RunError};
use crate::tree::{MonitorTree, PruneMode};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory receiving one `.dot` file per snapshot.
    pub emit_dot: Option<PathBuf>,
    /// Force the immediate engine regardless of the scenario header.
    pub legacy: bool,
    pub prune: PruneMode,
}

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// A node of a snapshot with its monitor annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceNode {
    pub name: String,
    pub balances: String,
    pub users: String,
    /// `t0:✓ t1:?` style, one entry per pending transaction above the node.
    pub annotations: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub step: usize,
    /// `initial`, `step` or `drain`.
    pub phase: &'static str,
    /// Transaction attached in this step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub submitted: Option<TxId>,
    /// Transaction made permanent in this step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consumed: Option<(TxId, TxStatus)>,
    /// SHA-256 of the text rendering of the snapshot.
    pub digest: String,
    pub nodes: Vec<TraceNode>,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub k: usize,
    pub engine: EngineKind,
    pub history: History,
    pub trace: Vec<TraceEvent>,
    pub tree: MonitorTree,
    pub dot_files: Vec<PathBuf>,
}

fn hex_digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn event(step: usize, phase: &'static str, tree: &MonitorTree) -> TraceEvent {
    TraceEvent {
        step,
        phase,
        submitted: None,
        consumed: None,
        digest: hex_digest(&render::to_text(tree)),
        nodes: render::node_lines(tree)
            .into_iter()
            .map(|n| TraceNode {
                name: n.name(),
                annotations: n
                    .annotations
                    .iter()
                    .map(|(t, s)| format!("{t}:{s}"))
                    .collect::<Vec<_>>()
                    .join(" "),
                balances: n.balances,
                users: n.users,
            })
            .collect(),
    }
}

struct Dots<'a> {
    dir: Option<&'a Path>,
    written: Vec<PathBuf>,
}

impl Dots<'_> {
    fn write(&mut self, file: &str, tree: &MonitorTree, title: &str) -> Result<(), DriverError> {
        let Some(dir) = self.dir else {
            return Ok(());
        };
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| DriverError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let path = dir.join(file);
        std::fs::write(&path, render::to_dot(tree, title)).map_err(io(&path))?;
        self.written.push(path);
        Ok(())
    }
}

/// Fold the scenario's transactions through the selected engine, drain, and
/// collect one trace event per snapshot.
///
/// Figures are named `step-N.dot` (N = 0 is the initial state), with
/// `step-N-extend.dot` and `step-N-innerprune.dot` for steps that decide a
/// transaction, and `drain-N.dot` for drain pings.
pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> Result<RunArtifacts, DriverError> {
    let reg = sc.registry()?;
    let txs = sc.transactions();
    let genesis = sc.genesis();
    let mut dots = Dots {
        dir: opts.emit_dot.as_deref(),
        written: Vec::new(),
    };
    let engine = if opts.legacy {
        EngineKind::Legacy
    } else {
        sc.engine
    };

    if engine == EngineKind::Legacy {
        let history = legacy_fold(&genesis, &txs, &reg)?;
        let mut trace = Vec::new();
        let initial = MonitorTree::leaf(genesis.clone());
        dots.write("step-0.dot", &initial, "step 0")?;
        trace.push(event(0, "initial", &initial));
        for (i, e) in history.entries.iter().enumerate() {
            let tree = MonitorTree::leaf(e.config.clone());
            dots.write(
                &format!("step-{}.dot", i + 1),
                &tree,
                &format!("step {}: {}", i + 1, e.tx.id),
            )?;
            let mut ev = event(i + 1, "step", &tree);
            ev.submitted = Some(e.tx.id);
            ev.consumed = Some((e.tx.id, e.status));
            trace.push(ev);
        }
        let tree = MonitorTree::leaf(history.last_config().clone());
        return Ok(RunArtifacts {
            k: sc.k,
            engine,
            history,
            trace,
            tree,
            dot_files: dots.written,
        });
    }

    let mut run = BlockchainRun::new(genesis, sc.k)?.with_prune_mode(opts.prune);
    let mut trace = vec![event(0, "initial", run.tree())];
    dots.write("step-0.dot", run.tree(), "step 0")?;
    for tx in &txs {
        let t = run.step_traced(tx, &reg)?;
        let n = trace.len();
        if let Some(pruned) = &t.pruned {
            dots.write(
                &format!("step-{n}-extend.dot"),
                &t.extended,
                &format!("step {n}: extend {}", tx.id),
            )?;
            dots.write(
                &format!("step-{n}-innerprune.dot"),
                pruned,
                &format!("step {n}: innerprune"),
            )?;
        }
        dots.write(
            &format!("step-{n}.dot"),
            &t.tree,
            &format!("step {n}: {}", tx.id),
        )?;
        let mut ev = event(n, "step", &t.tree);
        ev.submitted = Some(tx.id);
        ev.consumed = t.decided.map(|d| (d.tx.id, d.status));
        trace.push(ev);
    }
    for (j, t) in run.drain(&reg)?.into_iter().enumerate() {
        let n = trace.len();
        dots.write(
            &format!("drain-{}.dot", j + 1),
            &t.tree,
            &format!("drain {}", j + 1),
        )?;
        let mut ev = event(n, "drain", &t.tree);
        ev.submitted = Some(t.tx.id);
        ev.consumed = t.decided.map(|d| (d.tx.id, d.status));
        trace.push(ev);
    }
    Ok(RunArtifacts {
        k: sc.k,
        engine,
        history: run.history().clone(),
        trace,
        tree: run.tree().clone(),
        dot_files: dots.written,
    })
}

#[derive(Serialize)]
struct Export<'a> {
    k: usize,
    engine: EngineKind,
    history: &'a History,
    tree: Vec<TraceNode>,
    trace: &'a [TraceEvent],
}

/// Final history, final tree and trace as pretty JSON.
pub fn export_json(a: &RunArtifacts) -> String {
    let tree = event(0, "final", &a.tree).nodes;
    let mut s = serde_json::to_string_pretty(&Export {
        k: a.k,
        engine: a.engine,
        history: &a.history,
        tree,
        trace: &a.trace,
    })
    .expect("serializable");
    s.push('\n');
    s
}

/// `t0=Failed` style expectation on a transaction's final status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assertion {
    pub tx: TxId,
    pub status: TxStatus,
}

impl FromStr for Assertion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected tN=Committed or tN=Failed, got `{s}`");
        let (lhs, rhs) = s.split_once('=').ok_or_else(bad)?;
        let digits = lhs
            .strip_prefix("tx")
            .or_else(|| lhs.strip_prefix('t'))
            .ok_or_else(bad)?;
        let tx = TxId(digits.parse().map_err(|_| bad())?);
        let status = match rhs.to_ascii_lowercase().as_str() {
            "committed" | "commit" => TxStatus::Committed,
            "failed" | "fail" => TxStatus::Failed,
            _ => return Err(bad()),
        };
        Ok(Assertion { tx, status })
    }
}

/// Failed assertions, one message each.
pub fn check_assertions(history: &History, asserts: &[Assertion]) -> Vec<String> {
    asserts
        .iter()
        .filter_map(|a| match history.status_of(a.tx) {
            Some(s) if s == a.status => None,
            Some(s) => Some(format!("{} is {s}, expected {}", a.tx, a.status)),
            None => Some(format!("{} is not in the history", a.tx)),
        })
        .collect()
}

/// Check a scenario against the oracle. The future engine is always the one
/// under test; monitor-free scenarios are also compared with the legacy fold.
pub fn oracle_command(sc: &Scenario, prune: PruneMode) -> Result<OracleReport, OracleCommandError> {
    let reg = sc.registry()?;
    Ok(check_scenario(
        &sc.genesis(),
        &sc.transactions(),
        sc.k,
        &reg,
        prune,
    )?)
}

#[derive(Debug, thiserror::Error)]
pub enum OracleCommandError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Human-readable summary of a report.
pub fn report_text(name: &str, r: &OracleReport) -> String {
    let mut s = String::new();
    let verdict = if r.passed() { "ok" } else { "FAILED" };
    let _ = writeln!(
        s,
        "{name}: {verdict} ({} transactions, {} steps, {} consistent / {} rejected assignments, {} checks{})",
        r.transactions,
        r.steps,
        r.consistent_assignments,
        r.rejected_assignments,
        r.checks,
        if r.monitor_free { ", monitor-free" } else { "" }
    );
    for v in &r.violations {
        let kind = serde_json::to_value(v.kind).expect("serializable");
        let at = v.step.map(|s| format!(" at step {s}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "  counterexample [{}]{at}:",
            kind.as_str().unwrap_or("?")
        );
        for line in v.message.lines() {
            let _ = writeln!(s, "    {line}");
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::demos::demo;

    #[test]
    fn exchange_trace() {
        let a = run_scenario(&demo("appendix-exchange").unwrap(), &RunOptions::default()).unwrap();
        let sizes: Vec<usize> = a.trace.iter().map(|e| e.nodes.len()).collect();
        assert_eq!(sizes, [1, 3, 7, 3, 3, 3]);
        assert_eq!(a.trace[3].consumed, Some((TxId(0), TxStatus::Committed)));
        assert_eq!(a.trace[1].nodes[1].annotations, "t0:?");
        assert_eq!(a.history.len(), 3);
    }

    #[test]
    fn traces_are_reproducible() {
        let sc = demo("lender-malicious").unwrap();
        let a = export_json(&run_scenario(&sc, &RunOptions::default()).unwrap());
        let b = export_json(&run_scenario(&sc, &RunOptions::default()).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn assertions() {
        assert_eq!(
            "t0=Failed".parse::<Assertion>().unwrap(),
            Assertion {
                tx: TxId(0),
                status: TxStatus::Failed
            }
        );
        assert_eq!("tx12=Committed".parse::<Assertion>().unwrap().tx, TxId(12));
        assert!("t0=Maybe".parse::<Assertion>().is_err());
        assert!("0=Failed".parse::<Assertion>().is_err());

        let a = run_scenario(&demo("lender-malicious").unwrap(), &RunOptions::default()).unwrap();
        assert!(check_assertions(&a.history, &["t0=Failed".parse().unwrap()]).is_empty());
        assert_eq!(
            check_assertions(
                &a.history,
                &[
                    "t0=Committed".parse().unwrap(),
                    "t9=Failed".parse().unwrap()
                ]
            )
            .len(),
            2
        );
    }

    #[test]
    fn legacy_run_has_one_snapshot_per_transaction() {
        let a = run_scenario(&demo("flashloan").unwrap(), &RunOptions::default()).unwrap();
        assert_eq!(a.trace.len(), 3);
        assert!(a.trace.iter().all(|e| e.nodes.len() == 1));
    }
}
