//! Text and DOT renderings of monitoring trees.
//!
//! Nodes are named `N` followed by their commit/fail path (`N`, `Nc`,
//! `Ncf`, ...). Each node carries the contract balances and one annotation
//! per pending transaction on its path: `✓` known to commit, `✗` known to
//! fail, `?` undecided, `–` not monitored.

use std::fmt::Write;

use crate::model::{Branch, ExtendedConfiguration, MonitorState, Transaction, TxId};
use crate::tree::{Edge, MonitorTree};

/// Aggregate monitor state of `t` across every contract monitoring it.
pub fn annotation(cfg: &ExtendedConfiguration, t: TxId) -> MonitorState {
    let states: Vec<MonitorState> = cfg
        .monitors
        .monitoring_contracts(t)
        .iter()
        .map(|c| cfg.monitors.state(c, t))
        .collect();
    if states.is_empty() {
        MonitorState::Inactive
    } else if states.contains(&MonitorState::Fail) {
        MonitorState::Fail
    } else if states.iter().all(|s| *s == MonitorState::Commit) {
        MonitorState::Commit
    } else {
        MonitorState::Undecided
    }
}

/// One rendered node.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct NodeLine {
    pub path: String,
    pub balances: String,
    pub users: String,
    pub annotations: Vec<(TxId, char)>,
}

impl NodeLine {
    pub fn name(&self) -> String {
        format!("N{}", self.path)
    }

    fn annotation_text(&self) -> String {
        self.annotations
            .iter()
            .map(|(t, s)| format!("{t}:{s}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Nodes in pre-order (commit before fail).
pub fn node_lines(tree: &MonitorTree) -> Vec<NodeLine> {
    let mut out = Vec::new();
    walk(tree, String::new(), &mut Vec::new(), &mut out);
    out
}

fn walk(tree: &MonitorTree, path: String, above: &mut Vec<TxId>, out: &mut Vec<NodeLine>) {
    let cfg = tree.config();
    out.push(NodeLine {
        path: path.clone(),
        balances: cfg.balance_digest(),
        users: cfg
            .users
            .iter()
            .map(|(u, b)| format!("{u}={b}"))
            .collect::<Vec<_>>()
            .join(" "),
        annotations: above
            .iter()
            .map(|t| (*t, annotation(cfg, *t).symbol()))
            .collect(),
    });
    if let Ok(t) = tree.next_tx() {
        above.push(t.id);
        for (b, child) in tree.successors() {
            let mut p = path.clone();
            p.push(b.letter());
            walk(child, p, above, out);
        }
        above.pop();
    }
}

/// One line per node: `name  balances  | users  | annotations`.
pub fn to_text(tree: &MonitorTree) -> String {
    let mut s = String::new();
    for n in node_lines(tree) {
        let line = format!(
            "{:<8} {} | {} | {}",
            n.name(),
            n.balances,
            n.users,
            n.annotation_text()
        );
        let _ = writeln!(s, "{}", line.trim_end());
    }
    s
}

fn edge_label(t: &Transaction, letter: char) -> String {
    format!("{} {}", t.id, letter)
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz digraph, `title` used as the graph label.
pub fn to_dot(tree: &MonitorTree, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "digraph monitoring_tree {{");
    let _ = writeln!(s, "  label=\"{}\";", escape(title));
    let _ = writeln!(s, "  node [shape=box, fontname=\"monospace\"];");
    for n in node_lines(tree) {
        let mut label = n.name();
        label.push_str("\\n");
        label.push_str(&escape(&n.balances));
        if !n.annotations.is_empty() {
            label.push_str("\\n");
            label.push_str(&escape(&n.annotation_text()));
        }
        let _ = writeln!(s, "  \"{}\" [label=\"{}\"];", n.name(), label);
    }
    write_edges(tree, String::new(), &mut s);
    s.push_str("}\n");
    s
}

fn write_edges(tree: &MonitorTree, path: String, s: &mut String) {
    let (label, kids): (&Transaction, Vec<_>) = match tree.edge() {
        Edge::Leaf => return,
        Edge::One {
            label,
            branch,
            child,
        } => (label, vec![(*branch, child)]),
        Edge::Two {
            label,
            commit,
            fail,
        } => (label, vec![(Branch::Commit, commit), (Branch::Fail, fail)]),
    };
    for (b, child) in kids {
        let mut p = path.clone();
        p.push(b.letter());
        let _ = writeln!(
            s,
            "  \"N{path}\" -> \"N{p}\" [label=\"{}\"];",
            edge_label(label, b.letter())
        );
        write_edges(child, p, s);
    }
}
