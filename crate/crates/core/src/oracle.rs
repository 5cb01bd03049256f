//! Brute-force validation of runs.
//!
//! The decision oracle never touches the tree code. It replays transactions
//! linearly with `apply_tx`, enumerates every window future as a path of
//! branch letters, and derives the possible futures and decisions from those
//! paths alone. Stale monitor entries are dropped by index: before executing
//! transaction `j`, entries of transactions older than `j - k` are gone.
//!
//! Windows overlap, so a future ruled out in one window stays ruled out: a
//! future of the window of `t_i` is alive only if, prefixed with the outcome
//! of `t_(i-1)`, it extends a possible future of the previous window.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::Serialize;

use crate::engine::{apply_tx, ContractRegistry, EngineError};
use crate::model::{
    Address, Branch, ExtendedConfiguration, MonitorContext, MonitorState, TimeoutDecision,
    Transaction, TransactionOutcome, TxId, TxStatus,
};
use crate::render;
use crate::runtime::{legacy_fold, BlockchainRun, History, RunError, StepTrace};
use crate::tree::{MonitorTree, PruneMode};

/// Largest number of pending transactions along one assignment.
pub const PENDING_CAP: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("{pending} pending transactions exceed the oracle cap of {cap}")]
    CapExceeded { pending: usize, cap: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Run(#[from] RunError),
}

/// One leaf of a window: the branch taken at every level and the final
/// configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Future {
    pub path: Vec<Branch>,
    pub leaf: ExtendedConfiguration,
}

impl Future {
    pub fn name(&self) -> String {
        path_name(&self.path)
    }
}

fn path_name(p: &[Branch]) -> String {
    p.iter().map(|b| b.letter()).collect()
}

fn collect_gc(cfg: &ExtendedConfiguration, tx: &Transaction, k: usize) -> ExtendedConfiguration {
    let mut out = cfg.clone();
    if let Some(bound) = tx.id.0.checked_sub(k as u64) {
        out.monitors.forget_before(TxId(bound));
    }
    out
}

/// Every future reachable by executing `window` from `before`.
pub fn window_futures(
    before: &ExtendedConfiguration,
    window: &[Transaction],
    k: usize,
    reg: &ContractRegistry,
) -> Result<Vec<Future>, EngineError> {
    let mut out = Vec::new();
    let mut path = Vec::new();
    enumerate(before, window, k, reg, &mut path, &mut out)?;
    Ok(out)
}

fn enumerate(
    cfg: &ExtendedConfiguration,
    rest: &[Transaction],
    k: usize,
    reg: &ContractRegistry,
    path: &mut Vec<Branch>,
    out: &mut Vec<Future>,
) -> Result<(), EngineError> {
    let Some((tx, rest)) = rest.split_first() else {
        out.push(Future {
            path: path.clone(),
            leaf: cfg.clone(),
        });
        return Ok(());
    };
    let outcome = apply_tx(tx, &collect_gc(cfg, tx, k), reg)?;
    for branch in [Branch::Commit, Branch::Fail] {
        if let Some(next) = outcome.config_for(branch) {
            path.push(branch);
            enumerate(next, rest, k, reg, path, out)?;
            path.pop();
        }
    }
    Ok(())
}

fn monitors_of(d: &MonitorContext, t: TxId) -> BTreeSet<Address> {
    d.entries()
        .filter(|(_, tx, s)| *tx == t && *s != MonitorState::Inactive)
        .map(|(c, _, _)| c.clone())
        .collect()
}

fn known_commit(l: &ExtendedConfiguration, t: TxId) -> bool {
    monitors_of(&l.monitors, t)
        .iter()
        .all(|c| l.monitors.state(c, t) == MonitorState::Commit)
}

fn known_fail(l: &ExtendedConfiguration, t: TxId) -> bool {
    monitors_of(&l.monitors, t)
        .iter()
        .any(|c| l.monitors.state(c, t) == MonitorState::Fail)
}

fn commits_at_expiry(l: &ExtendedConfiguration, t: TxId) -> bool {
    monitors_of(&l.monitors, t)
        .iter()
        .all(|c| match l.monitors.state(c, t) {
            MonitorState::Commit => true,
            MonitorState::Undecided => {
                l.monitors.timeout(c, t).unwrap_or_default() == TimeoutDecision::Commit
            }
            _ => false,
        })
}

/// Futures that survive once impossible ones are discarded.
///
/// Futures sharing a prefix form a node. A transaction that pends at a node
/// splits its futures in two groups. If every possible future of the
/// committing group knows the monitor commits, the failing group is
/// impossible; if every one of them knows it fails, the committing group is.
pub fn possible_futures<'a>(futures: &'a [Future], window: &[Transaction]) -> Vec<&'a Future> {
    let all: Vec<&Future> = futures.iter().collect();
    survivors(all, window, 0)
}

fn survivors<'a>(group: Vec<&'a Future>, window: &[Transaction], depth: usize) -> Vec<&'a Future> {
    if depth == window.len() || group.is_empty() {
        return group;
    }
    let (c, f): (Vec<_>, Vec<_>) = group
        .into_iter()
        .partition(|x| x.path[depth] == Branch::Commit);
    if c.is_empty() {
        return survivors(f, window, depth + 1);
    }
    if f.is_empty() {
        return survivors(c, window, depth + 1);
    }
    let t = window[depth].id;
    let c = survivors(c, window, depth + 1);
    let f = survivors(f, window, depth + 1);
    if c.iter().all(|x| known_commit(&x.leaf, t)) {
        c
    } else if c.iter().all(|x| known_fail(&x.leaf, t)) {
        f
    } else {
        c.into_iter().chain(f).collect()
    }
}

/// Paths of every node lying on a possible future, root included.
pub fn possible_nodes(futures: &[Future], window: &[Transaction]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for f in possible_futures(futures, window) {
        for i in 0..=f.path.len() {
            out.insert(path_name(&f.path[..i]));
        }
    }
    out
}

/// Paths of every node of the unpruned window.
pub fn all_nodes(futures: &[Future]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for f in futures {
        for i in 0..=f.path.len() {
            out.insert(path_name(&f.path[..i]));
        }
    }
    out
}

/// Futures of the current window still alive after the previous one.
///
/// `prev` holds the names of the previous window's possible futures and
/// `letter` the outcome of its first transaction.
pub fn alive_futures(
    futures: Vec<Future>,
    prev: Option<(&BTreeSet<String>, Branch)>,
) -> Vec<Future> {
    let Some((prev, letter)) = prev else {
        return futures;
    };
    futures
        .into_iter()
        .filter(|f| {
            let mut name = String::from(letter.letter());
            name.push_str(&path_name(&f.path[..f.path.len() - 1]));
            prev.contains(&name)
        })
        .collect()
}

/// Status of `window[0]` once its window is complete.
pub fn window_decision(futures: &[Future], window: &[Transaction]) -> Branch {
    let t = window[0].id;
    let possible = possible_futures(futures, window);
    let first: BTreeSet<Branch> = possible.iter().map(|f| f.path[0]).collect();
    if first.len() == 1 {
        return *first.iter().next().expect("non-empty");
    }
    let commit_ok = possible
        .iter()
        .filter(|f| f.path[0] == Branch::Commit)
        .all(|f| commits_at_expiry(&f.leaf, t));
    if commit_ok {
        Branch::Commit
    } else {
        Branch::Fail
    }
}

/// Outcomes assumed for every transaction of a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FutureAssignment {
    /// Every user transaction with its status.
    pub statuses: Vec<(TxId, TxStatus)>,
    /// The transactions whose outcome was pending, i.e. actually assumed.
    pub assumed: Vec<TxId>,
    /// Configuration before each user transaction.
    #[serde(skip)]
    pub before: Vec<ExtendedConfiguration>,
    /// Configuration after each user transaction, monitors cleared.
    #[serde(skip)]
    pub after: Vec<ExtendedConfiguration>,
    /// Alive futures of each user transaction's window.
    #[serde(skip)]
    pub windows: Vec<Vec<Future>>,
}

/// Result of enumerating assignments.
#[derive(Debug, Clone, Default)]
pub struct Enumeration {
    pub consistent: Vec<FutureAssignment>,
    /// Partial assignments cut off at their first inconsistent choice.
    pub rejected: usize,
}

/// `txs` followed by `k` drain pings.
pub fn padded(txs: &[Transaction], k: usize) -> Vec<Transaction> {
    let mut out = txs.to_vec();
    let next = txs.last().map_or(0, |t| t.id.0 + 1);
    out.extend((0..k as u64).map(|i| Transaction::ping(TxId(next + i))));
    out
}

/// Enumerate outcome assignments for `txs` and keep the consistent ones.
///
/// A pending transaction may be assumed to commit or fail; the assumption
/// is consistent when the window that follows, replayed under the earlier
/// assumptions, decides it that way. Immediate outcomes admit only
/// themselves. Assignments are extended depth-first and a branch is cut at
/// its first inconsistent choice, which filters exactly like checking every
/// full assignment.
pub fn enumerate_consistent_futures(
    genesis: &ExtendedConfiguration,
    txs: &[Transaction],
    k: usize,
    reg: &ContractRegistry,
) -> Result<Enumeration, OracleError> {
    let all = padded(txs, k);
    let mut out = Enumeration::default();
    let mut partial = FutureAssignment {
        statuses: Vec::new(),
        assumed: Vec::new(),
        before: Vec::new(),
        after: Vec::new(),
        windows: Vec::new(),
    };
    assign(
        genesis,
        &all,
        txs.len(),
        k,
        reg,
        None,
        &mut partial,
        &mut out,
    )?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn assign(
    cfg: &ExtendedConfiguration,
    all: &[Transaction],
    real: usize,
    k: usize,
    reg: &ContractRegistry,
    prev: Option<(&BTreeSet<String>, Branch)>,
    partial: &mut FutureAssignment,
    out: &mut Enumeration,
) -> Result<(), OracleError> {
    let i = partial.statuses.len();
    if i == real {
        out.consistent.push(partial.clone());
        return Ok(());
    }
    let tx = &all[i];
    let outcome = apply_tx(tx, &collect_gc(cfg, tx, k), reg)?;
    if outcome.is_pending() && partial.assumed.len() + 1 > PENDING_CAP {
        return Err(OracleError::CapExceeded {
            pending: partial.assumed.len() + 1,
            cap: PENDING_CAP,
        });
    }
    let window = &all[i..=i + k];
    let futures = alive_futures(window_futures(cfg, window, k, reg)?, prev);
    let possible: BTreeSet<String> = possible_futures(&futures, window)
        .iter()
        .map(|f| f.name())
        .collect();
    let decided = window_decision(&futures, window);
    let choices: Vec<(Branch, bool)> = match &outcome {
        TransactionOutcome::Commit(_) => vec![(Branch::Commit, true)],
        TransactionOutcome::Fail(..) => vec![(Branch::Fail, true)],
        TransactionOutcome::Pending { .. } => [Branch::Commit, Branch::Fail]
            .into_iter()
            .map(|b| (b, b == decided))
            .collect(),
    };
    for (branch, consistent) in choices {
        if !consistent {
            out.rejected += 1;
            continue;
        }
        let next = outcome.config_for(branch).expect("branch exists").clone();
        partial.statuses.push((tx.id, branch.status()));
        if outcome.is_pending() {
            partial.assumed.push(tx.id);
        }
        partial.before.push(cfg.clone());
        partial.after.push(ExtendedConfiguration {
            monitors: MonitorContext::new(),
            ..next.clone()
        });
        partial.windows.push(futures.clone());
        assign(
            &next,
            all,
            real,
            k,
            reg,
            Some((&possible, branch)),
            partial,
            out,
        )?;
        partial.statuses.pop();
        partial.before.pop();
        partial.after.pop();
        partial.windows.pop();
        if outcome.is_pending() {
            partial.assumed.pop();
        }
    }
    Ok(())
}

/// What a violation is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Uniqueness,
    Decision,
    HistoryConfig,
    Extend,
    ImpossibleNodes,
    SizeBound,
    BoundedCertainty,
    Progress,
    Succession,
    LegacyPending,
    LegacyHistory,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub kind: CheckKind,
    pub step: Option<usize>,
    pub message: String,
}

/// Everything checked for one scenario.
#[derive(Debug, Clone, Default, Serialize)]
pub struct OracleReport {
    pub transactions: usize,
    pub steps: usize,
    pub consistent_assignments: usize,
    pub rejected_assignments: usize,
    pub monitor_free: bool,
    pub checks: usize,
    pub checks_by_kind: BTreeMap<CheckKind, usize>,
    pub violations: Vec<Violation>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn checks_of(&self, kind: CheckKind) -> usize {
        self.checks_by_kind.get(&kind).copied().unwrap_or(0)
    }

    fn check(&mut self, kind: CheckKind, step: Option<usize>, failure: Option<String>) {
        self.checks += 1;
        *self.checks_by_kind.entry(kind).or_default() += 1;
        if let Some(message) = failure {
            self.violations.push(Violation {
                kind,
                step,
                message,
            });
        }
    }
}

/// Structural checks on a tree of height at most `k`.
pub fn check_size_bound(tree: &MonitorTree, k: usize) -> Option<String> {
    let m = tree.monitored_count();
    let bound = crate::tree::size_bound(k, m);
    (tree.size() > bound).then(|| {
        format!(
            "tree has {} nodes, more than 2^{}-1+2^{}*({}-{}) = {bound}",
            tree.size(),
            m + 1,
            m,
            k,
            m
        )
    })
}

/// Compare the pruned window with the oracle's possible nodes.
pub fn check_impossible_nodes(
    pruned: &MonitorTree,
    futures: &[Future],
    window: &[Transaction],
) -> Option<String> {
    let expected = possible_nodes(futures, window);
    let got = pruned.paths();
    if expected == got {
        return None;
    }
    let kept: Vec<_> = got.difference(&expected).collect();
    let dropped: Vec<_> = expected.difference(&got).collect();
    Some(format!(
        "pruning kept impossible nodes {kept:?} and removed possible nodes {dropped:?}"
    ))
}

/// Differences between a drained history and the legacy fold.
pub fn legacy_diff(history: &History, legacy: &History) -> Vec<String> {
    let ours: Vec<_> = history.user_entries().collect();
    let mut out = Vec::new();
    if ours.len() != legacy.entries.len() {
        out.push(format!(
            "history has {} entries, legacy fold has {}",
            ours.len(),
            legacy.entries.len()
        ));
    }
    for (a, b) in ours.iter().zip(&legacy.entries) {
        if a.tx != b.tx || a.status != b.status {
            out.push(format!("{}: {} vs legacy {}", a.tx.id, a.status, b.status));
        } else if a.config != b.config {
            out.push(format!(
                "{}: configuration {} vs legacy {}",
                a.tx.id,
                a.config.to_canonical_json(),
                b.config.to_canonical_json()
            ));
        }
    }
    out
}

fn leaf_depths(tree: &MonitorTree) -> BTreeSet<usize> {
    tree.nodes()
        .into_iter()
        .filter(|n| n.tree.is_leaf())
        .map(|n| n.path.len())
        .collect()
}

/// Per-step invariant checks on a run: bounded certainty, progress, succession
/// and the size bound. `taken` counts steps before this one.
pub fn check_step(
    before: &MonitorTree,
    trace: &StepTrace,
    k: usize,
    taken: usize,
    history_growth: usize,
) -> Vec<(CheckKind, Option<String>)> {
    let mut out = Vec::new();
    let l = taken + 1;
    let depths = leaf_depths(&trace.tree);
    let height = trace.tree.height();
    out.push((
        CheckKind::BoundedCertainty,
        (height != l.min(k) || depths.len() != 1).then(|| {
            format!("after {l} steps height is {height}, leaf depths {depths:?}, window {k}")
        }),
    ));
    let expected_growth = usize::from(l > k);
    out.push((
        CheckKind::Progress,
        (history_growth != expected_growth).then(|| {
            format!("history grew by {history_growth} at step {l}, expected {expected_growth}")
        }),
    ));
    if let Some(d) = &trace.decided {
        let succ: Vec<ExtendedConfiguration> = before
            .successors()
            .into_iter()
            .map(|(_, c)| c.config().without_monitors_of(d.tx.id))
            .collect();
        let paths = trace.extended.paths();
        let letter = d.status.branch().letter();
        let nested = trace
            .tree
            .paths()
            .into_iter()
            .all(|p| paths.contains(&format!("{letter}{p}")));
        out.push((
            CheckKind::Succession,
            (!succ.contains(trace.tree.config()) || !nested).then(|| {
                format!(
                    "new root after deciding {} is not a successor of the old root",
                    d.tx.id
                )
            }),
        ));
    }
    out.push((CheckKind::SizeBound, check_size_bound(&trace.tree, k)));
    out
}

fn statuses_text(s: &[(TxId, TxStatus)]) -> String {
    s.iter()
        .map(|(t, st)| format!("{t}={st}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn oracle_window_text(futures: &[Future], window: &[Transaction]) -> String {
    let t = window[0].id;
    let possible: BTreeSet<String> = possible_futures(futures, window)
        .iter()
        .map(|f| f.name())
        .collect();
    let mut s = String::new();
    for f in futures {
        let mark = if possible.contains(&f.name()) {
            "possible"
        } else {
            "impossible"
        };
        let state = monitors_of(&f.leaf.monitors, t)
            .iter()
            .map(|c| format!("{c}:{}", f.leaf.monitors.state(c, t).symbol()))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(s, "  N{:<6} {mark:<10} {t}[{state}]", f.name());
    }
    s
}

/// Run `txs` with the engine and check every decision and every invariant.
pub fn check_scenario(
    genesis: &ExtendedConfiguration,
    txs: &[Transaction],
    k: usize,
    reg: &ContractRegistry,
    mode: PruneMode,
) -> Result<OracleReport, OracleError> {
    let mut report = OracleReport {
        transactions: txs.len(),
        ..Default::default()
    };
    let en = enumerate_consistent_futures(genesis, txs, k, reg)?;
    report.consistent_assignments = en.consistent.len();
    report.rejected_assignments = en.rejected;
    report.check(
        CheckKind::Uniqueness,
        None,
        (en.consistent.len() != 1)
            .then(|| format!("{} consistent assignments", en.consistent.len())),
    );

    let mut run = BlockchainRun::new(genesis.clone(), k)?.with_prune_mode(mode);
    let all = padded(txs, k);
    let mut traces = Vec::new();
    for tx in txs {
        let before = run.tree().clone();
        let h = run.history().len();
        let trace = run.step_traced(tx, reg)?;
        traces.push((before, trace, run.history().len() - h));
    }
    if !run.tree().is_leaf() {
        for _ in 0..k {
            let before = run.tree().clone();
            let h = run.history().len();
            let ping = run.ping();
            let trace = run.step_traced(&ping, reg)?;
            traces.push((before, trace, run.history().len() - h));
        }
    }
    report.steps = traces.len();

    for (i, (before, trace, growth)) in traces.iter().enumerate() {
        for (kind, failure) in check_step(before, trace, k, i, *growth) {
            report.check(kind, Some(i + 1), failure);
        }
    }

    let engine: Vec<(TxId, TxStatus)> = run
        .history()
        .user_entries()
        .map(|e| (e.tx.id, e.status))
        .collect();
    let Some(oracle) = en.consistent.first() else {
        return Ok(report);
    };
    let mut diverged = false;
    for (pos, (tx, expected)) in oracle.statuses.iter().enumerate() {
        let Some((i, (_, trace, _))) = traces
            .iter()
            .enumerate()
            .find(|(_, (_, tr, _))| tr.decided.as_ref().map(|d| d.tx.id) == Some(*tx))
        else {
            report.check(
                CheckKind::Decision,
                None,
                Some(format!("{tx} never became permanent")),
            );
            diverged = true;
            break;
        };
        let window = &all[pos..=pos + k];
        let futures = &oracle.windows[pos];
        report.check(
            CheckKind::Extend,
            Some(i + 1),
            (all_nodes(futures) != trace.extended.paths()).then(|| {
                format!(
                    "window of {tx} has nodes {:?}, oracle replay has {:?}",
                    trace.extended.paths(),
                    all_nodes(futures)
                )
            }),
        );
        let pruned = trace.pruned.as_ref().expect("decision steps prune");
        report.check(
            CheckKind::ImpossibleNodes,
            Some(i + 1),
            check_impossible_nodes(pruned, futures, window),
        );
        let entry = trace.decided.as_ref().expect("found above");
        if entry.status != *expected {
            let mut msg = String::new();
            let _ = writeln!(
                msg,
                "{tx} is {} but the oracle decides {expected}",
                entry.status
            );
            let _ = writeln!(msg, "engine statuses: {}", statuses_text(&engine));
            let _ = writeln!(msg, "oracle statuses: {}", statuses_text(&oracle.statuses));
            let _ = writeln!(msg, "engine window after pruning:");
            for line in render::to_text(pruned).lines() {
                let _ = writeln!(msg, "  {line}");
            }
            let _ = writeln!(msg, "oracle window futures:");
            msg.push_str(&oracle_window_text(futures, window));
            report.check(CheckKind::Decision, Some(i + 1), Some(msg));
            diverged = true;
            break;
        }
        report.check(CheckKind::Decision, Some(i + 1), None);
        report.check(
            CheckKind::HistoryConfig,
            Some(i + 1),
            (entry.config != oracle.after[pos]).then(|| {
                format!(
                    "{tx} left {} but the oracle replay reaches {}",
                    entry.config.to_canonical_json(),
                    oracle.after[pos].to_canonical_json()
                )
            }),
        );
    }
    if !diverged && engine.len() != oracle.statuses.len() {
        report.check(
            CheckKind::Decision,
            None,
            Some(format!(
                "engine made {} transactions permanent, oracle expects {}",
                engine.len(),
                oracle.statuses.len()
            )),
        );
    }

    report.monitor_free = traces.iter().all(|(_, t, _)| {
        t.extended
            .nodes()
            .iter()
            .all(|n| n.tree.config().monitors.is_empty())
    });
    if report.monitor_free {
        for (i, (_, t, _)) in traces.iter().enumerate() {
            report.check(
                CheckKind::LegacyPending,
                Some(i + 1),
                (t.extended.monitored_count() != 0)
                    .then(|| "monitor-free tree branches".to_string()),
            );
        }
        let legacy = legacy_fold(genesis, txs, reg)?;
        let diff = legacy_diff(run.history(), &legacy);
        report.check(
            CheckKind::LegacyHistory,
            None,
            (!diff.is_empty()).then(|| diff.join("\n")),
        );
    }
    Ok(report)
}

#[cfg(test)]
mod tests;
