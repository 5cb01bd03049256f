use super::*;
use crate::scenario::demos::demo;
use crate::scenario::{fuzz, Scenario};

fn enumerate(sc: &Scenario) -> Result<Enumeration, OracleError> {
    enumerate_consistent_futures(
        &sc.genesis(),
        &sc.transactions(),
        sc.k,
        &sc.registry().unwrap(),
    )
}

fn check(sc: &Scenario, mode: PruneMode) -> OracleReport {
    check_scenario(
        &sc.genesis(),
        &sc.transactions(),
        sc.k,
        &sc.registry().unwrap(),
        mode,
    )
    .unwrap()
}

fn statuses(a: &FutureAssignment) -> Vec<TxStatus> {
    a.statuses.iter().map(|(_, s)| *s).collect()
}

#[test]
fn exchange_has_one_consistent_assignment() {
    let en = enumerate(&demo("appendix-exchange").unwrap()).unwrap();
    assert_eq!(en.consistent.len(), 1);
    assert_eq!(statuses(&en.consistent[0]), [TxStatus::Committed; 3]);
    assert_eq!(en.consistent[0].assumed, [TxId(0), TxId(1)]);
    assert!(en.rejected >= 2);
}

#[test]
fn malicious_lender_loan_fails() {
    let en = enumerate(&demo("lender-malicious").unwrap()).unwrap();
    assert_eq!(en.consistent.len(), 1);
    assert_eq!(
        statuses(&en.consistent[0]),
        [TxStatus::Failed, TxStatus::Failed, TxStatus::Committed]
    );
}

#[test]
fn no_monitors_means_nothing_assumed() {
    let en = enumerate(&demo("flashloan").unwrap()).unwrap();
    assert_eq!(en.consistent.len(), 1);
    assert!(en.consistent[0].assumed.is_empty());
    assert_eq!(en.rejected, 0);

    let empty = Scenario::new(2).user("u", 0);
    let en = enumerate(&empty).unwrap();
    assert_eq!(en.consistent.len(), 1);
    assert!(en.consistent[0].statuses.is_empty());
}

#[test]
fn cap_is_enforced() {
    let mut sc = Scenario::new(1).user("u", 0).contract("sink", "wallet", 0);
    for i in 0..7 {
        sc = sc.contract(&format!("s{i}"), "conditional-sender", 1);
    }
    for i in 0..7 {
        sc = sc.tx("u", &format!("s{i}"), "send", vec!["sink".into()]);
    }
    assert_eq!(
        enumerate(&sc).unwrap_err(),
        OracleError::CapExceeded {
            pending: 7,
            cap: PENDING_CAP
        }
    );
    sc.transactions.pop();
    assert_eq!(enumerate(&sc).unwrap().consistent.len(), 1);
}

#[test]
fn demos_pass() {
    for name in crate::scenario::demos::names() {
        let r = check(&demo(name).unwrap(), PruneMode::Faithful);
        assert!(r.passed(), "{name}: {:#?}", r.violations);
        assert_eq!(r.consistent_assignments, 1);
    }
}

#[test]
fn skipped_commit_guard_is_caught() {
    let r = check(
        &demo("appendix-exchange").unwrap(),
        PruneMode::SkipCommitGuard,
    );
    let decision = r
        .violations
        .iter()
        .find(|v| v.kind == CheckKind::Decision)
        .expect("decision counterexample");
    assert!(decision
        .message
        .contains("t0 is Failed but the oracle decides Committed"));
    assert!(decision.message.contains("oracle window futures"));
}

#[test]
fn probe_style_impossible_nodes() {
    // Window of the exchange: the failing subtree of t0 is impossible.
    let sc = demo("appendix-exchange").unwrap();
    let reg = sc.registry().unwrap();
    let txs = sc.transactions();
    let futures = window_futures(&sc.genesis(), &txs, sc.k, &reg).unwrap();
    assert_eq!(all_nodes(&futures).len(), 11);
    let possible: Vec<_> = possible_nodes(&futures, &txs).into_iter().collect();
    assert_eq!(possible, ["", "c", "cc", "ccc"]);
    assert_eq!(window_decision(&futures, &txs), Branch::Commit);
}

#[test]
fn worst_case_tree_meets_the_bound() {
    let sc = crate::scenario::demos::size_worst_case(2, 2).unwrap();
    let reg = sc.registry().unwrap();
    let mut tree = MonitorTree::leaf(sc.genesis());
    for tx in sc.transactions() {
        tree = tree.extend(&tx, &reg).unwrap();
    }
    assert_eq!(tree.size(), 7);
    assert_eq!(check_size_bound(&tree, 2), None);
}

#[test]
fn seeded_scenarios_pass() {
    for seed in fuzz::seeds(3, 40) {
        let sc = fuzz::general(seed);
        let r = check(&sc, PruneMode::Faithful);
        assert!(
            r.passed(),
            "seed {seed}:\n{}\n{:#?}",
            sc.to_jsonl(),
            r.violations
        );
    }
}
