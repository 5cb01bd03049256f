//! Monitoring trees: speculative configurations for the pending window.
//!
//! Trees are persistent. `extend`, `innerprune` and `decide` build new trees
//! and share untouched subtrees with their input.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::engine::{apply_tx, ContractRegistry, EngineError};
use crate::model::{
    Address, Branch, ExtendedConfiguration, MonitorContext, MonitorState, TimeoutDecision,
    Transaction, TransactionOutcome, TxId,
};

/// Outgoing edges of a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Edge {
    Leaf,
    /// Single successor. `branch` records which outcome of `label` it is.
    One {
        label: Transaction,
        branch: Branch,
        child: MonitorTree,
    },
    Two {
        label: Transaction,
        commit: MonitorTree,
        fail: MonitorTree,
    },
}

#[derive(Debug, PartialEq, Eq)]
struct Node {
    config: ExtendedConfiguration,
    edge: Edge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonitorTree(Arc<Node>);

/// Variants of `innerprune`. Only `Faithful` is correct; the other exists so
/// the oracle can be shown to catch a broken pruner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PruneMode {
    #[default]
    Faithful,
    /// Never keeps only the committing subtree.
    SkipCommitGuard,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("tree has height {actual}, expected {expected}")]
    Height { expected: usize, actual: usize },
    #[error("leaf has no outgoing transaction")]
    LeafRoot,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Outcome of deciding the root transaction.
#[derive(Debug, Clone)]
pub struct Decision {
    pub tx: Transaction,
    pub branch: Branch,
    pub tree: MonitorTree,
}

/// A node together with its commit/fail path from the root.
#[derive(Debug, Clone)]
pub struct NodeView<'a> {
    pub path: String,
    pub tree: &'a MonitorTree,
}

impl MonitorTree {
    pub fn leaf(config: ExtendedConfiguration) -> Self {
        MonitorTree(Arc::new(Node {
            config,
            edge: Edge::Leaf,
        }))
    }

    fn with_edge(config: ExtendedConfiguration, edge: Edge) -> Self {
        MonitorTree(Arc::new(Node { config, edge }))
    }

    pub fn config(&self) -> &ExtendedConfiguration {
        &self.0.config
    }

    pub fn edge(&self) -> &Edge {
        &self.0.edge
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.0.edge, Edge::Leaf)
    }

    /// Children in commit-then-fail order, tagged with their branch.
    pub fn successors(&self) -> Vec<(Branch, &MonitorTree)> {
        match &self.0.edge {
            Edge::Leaf => vec![],
            Edge::One { branch, child, .. } => vec![(*branch, child)],
            Edge::Two { commit, fail, .. } => vec![(Branch::Commit, commit), (Branch::Fail, fail)],
        }
    }

    /// Label of the root's outgoing edges.
    pub fn next_tx(&self) -> Result<&Transaction, TreeError> {
        match &self.0.edge {
            Edge::Leaf => Err(TreeError::LeafRoot),
            Edge::One { label, .. } | Edge::Two { label, .. } => Ok(label),
        }
    }

    pub fn height(&self) -> usize {
        self.successors()
            .into_iter()
            .map(|(_, c)| c.height() + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self
            .successors()
            .into_iter()
            .map(|(_, c)| c.size())
            .sum::<usize>()
    }

    /// Number of levels containing at least one branching node.
    pub fn monitored_count(&self) -> usize {
        let mut levels = BTreeSet::new();
        self.collect_branching(0, &mut levels);
        levels.len()
    }

    fn collect_branching(&self, depth: usize, out: &mut BTreeSet<usize>) {
        if matches!(self.0.edge, Edge::Two { .. }) {
            out.insert(depth);
        }
        for (_, c) in self.successors() {
            c.collect_branching(depth + 1, out);
        }
    }

    /// Leaf configurations, depth-first, commit before fail.
    pub fn leaves(&self) -> Vec<&ExtendedConfiguration> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a ExtendedConfiguration>) {
        if self.is_leaf() {
            out.push(&self.0.config);
        }
        for (_, c) in self.successors() {
            c.collect_leaves(out);
        }
    }

    /// Every node in pre-order, named by its path of branch letters.
    pub fn nodes(&self) -> Vec<NodeView<'_>> {
        let mut out = Vec::new();
        self.collect_nodes(String::new(), &mut out);
        out
    }

    fn collect_nodes<'a>(&'a self, path: String, out: &mut Vec<NodeView<'a>>) {
        let children = self.successors();
        out.push(NodeView {
            path: path.clone(),
            tree: self,
        });
        for (b, c) in children {
            let mut p = path.clone();
            p.push(b.letter());
            c.collect_nodes(p, out);
        }
    }

    pub fn paths(&self) -> BTreeSet<String> {
        self.nodes().into_iter().map(|n| n.path).collect()
    }

    /// Edge labels from the root along the first branch.
    pub fn pending(&self) -> Vec<&Transaction> {
        let mut out = Vec::new();
        let mut cur = self;
        while let Some((_, next)) = cur.successors().into_iter().next() {
            if let Ok(t) = cur.next_tx() {
                out.push(t);
            }
            cur = next;
        }
        out
    }

    /// Attach `tx` below every leaf.
    pub fn extend(
        &self,
        tx: &Transaction,
        reg: &ContractRegistry,
    ) -> Result<MonitorTree, EngineError> {
        let edge = match &self.0.edge {
            Edge::Leaf => match apply_tx(tx, &self.0.config, reg)? {
                TransactionOutcome::Commit(c) => Edge::One {
                    label: tx.clone(),
                    branch: Branch::Commit,
                    child: MonitorTree::leaf(c),
                },
                TransactionOutcome::Fail(f, _) => Edge::One {
                    label: tx.clone(),
                    branch: Branch::Fail,
                    child: MonitorTree::leaf(f),
                },
                TransactionOutcome::Pending { commit, fail } => Edge::Two {
                    label: tx.clone(),
                    commit: MonitorTree::leaf(commit),
                    fail: MonitorTree::leaf(fail),
                },
            },
            Edge::One {
                label,
                branch,
                child,
            } => Edge::One {
                label: label.clone(),
                branch: *branch,
                child: child.extend(tx, reg)?,
            },
            Edge::Two {
                label,
                commit,
                fail,
            } => Edge::Two {
                label: label.clone(),
                commit: commit.extend(tx, reg)?,
                fail: fail.extend(tx, reg)?,
            },
        };
        Ok(MonitorTree::with_edge(self.0.config.clone(), edge))
    }

    /// Remove impossible nodes, bottom-up.
    pub fn innerprune(&self, mode: PruneMode) -> MonitorTree {
        match &self.0.edge {
            Edge::Leaf => self.clone(),
            Edge::One {
                label,
                branch,
                child,
            } => MonitorTree::with_edge(
                self.0.config.clone(),
                Edge::One {
                    label: label.clone(),
                    branch: *branch,
                    child: child.innerprune(mode),
                },
            ),
            Edge::Two {
                label,
                commit,
                fail,
            } => {
                let c = commit.innerprune(mode);
                let f = fail.innerprune(mode);
                let t = label.id;
                let keep = |branch: Branch, child: MonitorTree| Edge::One {
                    label: label.clone(),
                    branch,
                    child,
                };
                let edge = if mode == PruneMode::Faithful
                    && c.leaves().into_iter().all(|l| all_monitoring_commit(l, t))
                {
                    keep(Branch::Commit, c)
                } else if c.leaves().into_iter().all(|l| one_monitoring_fail(l, t)) {
                    keep(Branch::Fail, f)
                } else {
                    Edge::Two {
                        label: label.clone(),
                        commit: c,
                        fail: f,
                    }
                };
                MonitorTree::with_edge(self.0.config.clone(), edge)
            }
        }
    }

    /// Decide the root transaction of a tree of height `k + 1`.
    pub fn decide(&self, k: usize, mode: PruneMode) -> Result<Decision, TreeError> {
        let actual = self.height();
        if actual != k + 1 {
            return Err(TreeError::Height {
                expected: k + 1,
                actual,
            });
        }
        let pruned = self.innerprune(mode);
        let (tx, branch, tree) = match pruned.edge() {
            Edge::Leaf => return Err(TreeError::LeafRoot),
            Edge::One {
                label,
                branch,
                child,
            } => (label, *branch, child),
            Edge::Two {
                label,
                commit,
                fail,
            } => {
                let t = label.id;
                if commit
                    .leaves()
                    .into_iter()
                    .all(|l| all_monitoring_commit_with_timeout(l, t))
                {
                    (label, Branch::Commit, commit)
                } else {
                    (label, Branch::Fail, fail)
                }
            }
        };
        Ok(Decision {
            tx: tx.clone(),
            branch,
            tree: tree.clone(),
        })
    }

    /// Drop monitor entries of `tx` from every node.
    pub fn forget(&self, tx: TxId) -> MonitorTree {
        let edge = match &self.0.edge {
            Edge::Leaf => Edge::Leaf,
            Edge::One {
                label,
                branch,
                child,
            } => Edge::One {
                label: label.clone(),
                branch: *branch,
                child: child.forget(tx),
            },
            Edge::Two {
                label,
                commit,
                fail,
            } => Edge::Two {
                label: label.clone(),
                commit: commit.forget(tx),
                fail: fail.forget(tx),
            },
        };
        MonitorTree::with_edge(self.0.config.without_monitors_of(tx), edge)
    }
}

pub fn monitoring_contracts(l: &ExtendedConfiguration, t: TxId) -> BTreeSet<Address> {
    l.monitors.monitoring_contracts(t)
}

pub fn all_monitoring_commit(l: &ExtendedConfiguration, t: TxId) -> bool {
    monitoring_contracts(l, t)
        .iter()
        .all(|c| l.monitors.state(c, t) == MonitorState::Commit)
}

pub fn one_monitoring_fail(l: &ExtendedConfiguration, t: TxId) -> bool {
    monitoring_contracts(l, t)
        .iter()
        .any(|c| l.monitors.state(c, t) == MonitorState::Fail)
}

pub fn commit_with_timeout(delta: &MonitorContext, c: &Address, t: TxId) -> bool {
    match delta.state(c, t) {
        MonitorState::Commit => true,
        MonitorState::Undecided => {
            delta.timeout(c, t).unwrap_or_default() == TimeoutDecision::Commit
        }
        _ => false,
    }
}

pub fn all_monitoring_commit_with_timeout(l: &ExtendedConfiguration, t: TxId) -> bool {
    monitoring_contracts(l, t)
        .iter()
        .all(|c| commit_with_timeout(&l.monitors, c, t))
}

/// Upper bound on the size of a tree of height at most `k` with `m`
/// branching levels.
pub fn size_bound(k: usize, m: usize) -> usize {
    let m = m.min(k);
    (1usize << (m + 1)) - 1 + (1usize << m) * (k - m)
}
