//! Bundled scenarios.

use super::{parse_scenario_str, Scenario};
use crate::model::Scalar;

const FILES: [(&str, &str); 6] = [
    (
        "appendix-exchange",
        include_str!("../../scenarios/appendix-exchange.jsonl"),
    ),
    ("flashloan", include_str!("../../scenarios/flashloan.jsonl")),
    (
        "lender-naive-client",
        include_str!("../../scenarios/lender-naive-client.jsonl"),
    ),
    (
        "lender-malicious",
        include_str!("../../scenarios/lender-malicious.jsonl"),
    ),
    (
        "lender-correct-client",
        include_str!("../../scenarios/lender-correct-client.jsonl"),
    ),
    (
        "lender-malicious-client",
        include_str!("../../scenarios/lender-malicious-client.jsonl"),
    ),
];

/// Name of the generated demo; takes `k` and `m`.
pub const SIZE_WORST_CASE: &str = "size-worst-case";

/// Names of all demos, the generated one last.
pub fn names() -> Vec<&'static str> {
    FILES
        .iter()
        .map(|(n, _)| *n)
        .chain([SIZE_WORST_CASE])
        .collect()
}

/// Source text of a bundled file.
pub fn source(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// A bundled demo. `size-worst-case` uses `k = 2, m = 2`.
pub fn demo(name: &str) -> Option<Scenario> {
    if name == SIZE_WORST_CASE {
        return size_worst_case(2, 2);
    }
    let text = source(name)?;
    Some(parse_scenario_str(text).expect("bundled scenarios are valid"))
}

/// `m` monitored transactions that never get decided followed by `k - m`
/// plain ones. Before any decision the tree has exactly
/// `2^(m+1) - 1 + 2^m (k - m)` nodes. `None` when `m > k` or `k == 0`.
pub fn size_worst_case(k: usize, m: usize) -> Option<Scenario> {
    if k == 0 || m > k {
        return None;
    }
    let mut s = Scenario::new(k)
        .user("alice", 0)
        .contract("sink", "wallet", 0);
    s.name = Some(format!("{SIZE_WORST_CASE}-k{k}-m{m}"));
    for i in 0..m {
        s = s.contract(&format!("s{i}"), "conditional-sender", 1);
    }
    for i in 0..m {
        s = s.tx(
            "alice",
            &format!("s{i}"),
            "send",
            vec![Scalar::from("sink")],
        );
    }
    for _ in m..k {
        s = s.tx("alice", "sink", "deposit", vec![]);
    }
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::EngineKind;

    #[test]
    fn every_demo_parses_and_round_trips() {
        for name in names() {
            let s = demo(name).unwrap();
            assert_eq!(parse_scenario_str(&s.to_jsonl()).unwrap(), s, "{name}");
            s.registry().unwrap();
        }
    }

    #[test]
    fn exchange_shape() {
        let s = demo("appendix-exchange").unwrap();
        assert_eq!((s.contracts.len(), s.transactions.len(), s.k), (3, 3, 2));
        assert_eq!(demo("flashloan").unwrap().engine, EngineKind::Legacy);
    }

    #[test]
    fn worst_case_needs_m_at_most_k() {
        assert!(size_worst_case(2, 3).is_none());
        assert_eq!(size_worst_case(4, 1).unwrap().transactions.len(), 4);
    }
}
