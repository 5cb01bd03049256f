use proptest::prelude::*;

use super::builtins::{self, Lender, LoanClient, Wallet};
use super::*;
use crate::model::{ContractState, LedgerState, Scalar, Tokens, UserId};

fn config(contracts: &[(&str, Tokens)], users: &[(&str, Tokens)]) -> ExtendedConfiguration {
    ExtendedConfiguration {
        ledger: LedgerState {
            contracts: contracts
                .iter()
                .map(|(a, b)| {
                    (
                        Address::new(*a),
                        ContractState {
                            balance: *b,
                            ..Default::default()
                        },
                    )
                })
                .collect(),
            height: 0,
        },
        monitors: MonitorContext::new(),
        users: users.iter().map(|(u, b)| (UserId::new(*u), *b)).collect(),
    }
}

fn tx(id: u64, target: &str, entrypoint: &str, args: Vec<Scalar>) -> Transaction {
    Transaction::new(TxId(id), "u".into(), target.into(), entrypoint, args, 0)
}

fn lender_setup() -> (ContractRegistry, ExtendedConfiguration) {
    let reg = ContractRegistry::new()
        .with(
            "NC",
            LoanClient {
                tracks_debts: false,
                threshold: 200,
            },
        )
        .with("L", Lender { honest: true });
    (reg, config(&[("NC", 100), ("L", 1000)], &[("u", 0)]))
}

fn borrow(id: u64, amount: i64) -> Transaction {
    tx(id, "NC", "borrow", vec!["L".into(), Scalar::Int(amount)])
}

/// Decides a monitor it was never asked to.
#[derive(Debug)]
struct Rogue;

impl ContractBehavior for Rogue {
    fn kind(&self) -> &str {
        "rogue"
    }

    fn invoke(&self, ctx: &mut ExecutionContext<'_>, _: &str) -> Result<(), Abort> {
        let t = ctx.arg_tx(0)?;
        ctx.monitor_decide(t, MonitorState::Fail);
        Ok(())
    }
}

#[test]
fn wallet_transfer_commits() {
    let reg = ContractRegistry::new().with("A", Wallet).with("B", Wallet);
    let cfg = config(&[("A", 5), ("B", 0)], &[("u", 0)]);
    let t = tx(0, "A", "send", vec!["B".into(), Scalar::Int(3)]);
    let TransactionOutcome::Commit(out) = apply_tx(&t, &cfg, &reg).unwrap() else {
        panic!("expected commit");
    };
    assert_eq!(out.ledger.balance(&"A".into()), Some(2));
    assert_eq!(out.ledger.balance(&"B".into()), Some(3));
    assert_eq!(out.ledger.height, 1);
    assert!(out.monitors.is_empty());
}

#[test]
fn borrowing_from_lender_pends() {
    let (reg, cfg) = lender_setup();
    let out = apply_tx(&borrow(0, 100), &cfg, &reg).unwrap();
    let TransactionOutcome::Pending { commit, fail } = out else {
        panic!("expected pending");
    };
    let l = Address::new("L");
    assert_eq!(commit.ledger.balance(&"NC".into()), Some(200));
    assert_eq!(commit.ledger.balance(&l), Some(900));
    assert_eq!(commit.monitors.state(&l, TxId(0)), MonitorState::Undecided);
    assert_eq!(
        commit.monitors.timeout(&l, TxId(0)),
        Some(TimeoutDecision::Fail)
    );
    assert_eq!(fail, cfg);
}

#[test]
fn deciding_unknown_monitor_fails() {
    let reg = ContractRegistry::new().with("R", Rogue);
    let cfg = config(&[("R", 0)], &[("u", 4)]);
    let t = tx(3, "R", "go", vec![Scalar::tx(TxId(1))]).with_cost(1);
    let out = apply_tx(&t, &cfg, &reg).unwrap();
    let TransactionOutcome::Fail(after, reason) = out else {
        panic!("expected fail");
    };
    assert_eq!(
        reason,
        FailReason::InvalidMonitorWrite {
            contract: "R".into(),
            tx: TxId(1)
        }
    );
    assert_eq!(after.ledger, cfg.ledger);
    assert_eq!(after.users.get(&"u".into()), Some(3));
}

#[test]
fn underfunded_lender_refuses_and_commits() {
    let (reg, cfg) = lender_setup();
    let out = apply_tx(&borrow(0, 5000), &cfg, &reg).unwrap();
    let TransactionOutcome::Commit(after) = out else {
        panic!("expected commit");
    };
    assert_eq!(after.ledger.balance(&"NC".into()), Some(100));
    assert_eq!(after.ledger.balance(&"L".into()), Some(1000));
    assert!(after.monitors.is_empty());
}

#[test]
fn repayment_decides_the_loan() {
    let (reg, cfg) = lender_setup();
    let TransactionOutcome::Pending { commit, .. } = apply_tx(&borrow(0, 100), &cfg, &reg).unwrap()
    else {
        panic!("expected pending");
    };
    let pay = tx(
        1,
        "NC",
        "payBack",
        vec!["L".into(), Scalar::tx(TxId(0)), Scalar::Int(100)],
    );
    let TransactionOutcome::Commit(after) = apply_tx(&pay, &commit, &reg).unwrap() else {
        panic!("expected commit");
    };
    assert_eq!(
        after.monitors.state(&"L".into(), TxId(0)),
        MonitorState::Commit
    );
    assert_eq!(after.ledger.balance(&"L".into()), Some(1000));
}

#[test]
fn stale_ids_and_unknown_users_are_errors() {
    let (reg, cfg) = lender_setup();
    let TransactionOutcome::Pending { commit, .. } = apply_tx(&borrow(4, 100), &cfg, &reg).unwrap()
    else {
        panic!("expected pending");
    };
    assert!(matches!(
        apply_tx(&borrow(4, 1), &commit, &reg),
        Err(EngineError::StaleTxId { .. })
    ));
    let stranger = Transaction::new(TxId(9), "eve".into(), "NC".into(), "deposit", vec![], 0);
    assert!(matches!(
        apply_tx(&stranger, &cfg, &reg),
        Err(EngineError::Model(ModelError::UnknownUser(_)))
    ));
}

#[test]
fn validation_examples() {
    let l = Address::new("L");
    let c = Address::new("C");
    let fresh = MonitorContext::new();
    let write = |contract: &Address, t: u64, state| MonitorWrite {
        contract: contract.clone(),
        tx: TxId(t),
        state,
        timeout: None,
    };

    let mut log = MonitorWriteLog::new();
    log.push(write(&l, 5, MonitorState::Undecided));
    assert_eq!(validate_monitor_writes(&log, &fresh, TxId(5)), Ok(()));

    let mut pre = MonitorContext::new();
    pre.set_state(&l, TxId(2), MonitorState::Undecided);
    let mut log = MonitorWriteLog::new();
    log.push(write(&l, 2, MonitorState::Commit));
    assert_eq!(validate_monitor_writes(&log, &pre, TxId(5)), Ok(()));

    let mut log = MonitorWriteLog::new();
    log.push(write(&c, 2, MonitorState::Fail));
    log.push(write(&l, 1, MonitorState::Fail));
    assert_eq!(
        validate_monitor_writes(&log, &pre, TxId(5)),
        Err(Violation {
            contract: c,
            tx: TxId(2)
        })
    );
}

#[test]
fn last_write_wins() {
    let l = Address::new("L");
    let mut log = MonitorWriteLog::new();
    log.push(MonitorWrite {
        contract: l.clone(),
        tx: TxId(0),
        state: MonitorState::Undecided,
        timeout: Some(TimeoutDecision::Fail),
    });
    log.push(MonitorWrite {
        contract: l.clone(),
        tx: TxId(0),
        state: MonitorState::Commit,
        timeout: None,
    });
    let net = log.net();
    let w = net[&(l, TxId(0))];
    assert_eq!(w.state, MonitorState::Commit);
    assert_eq!(w.timeout, Some(TimeoutDecision::Fail));
}

#[test]
fn timeout_examples() {
    let (reg, cfg) = lender_setup();
    let TransactionOutcome::Pending { commit, .. } = apply_tx(&borrow(0, 100), &cfg, &reg).unwrap()
    else {
        panic!("expected pending");
    };
    let l = Address::new("L");
    assert_eq!(
        eval_timeout(&commit.monitors, &l, TxId(0)),
        Ok(TimeoutDecision::Fail)
    );

    let mut d = MonitorContext::new();
    d.set_state(&l, TxId(3), MonitorState::Undecided);
    assert_eq!(eval_timeout(&d, &l, TxId(3)), Ok(TimeoutDecision::Commit));
    assert!(matches!(
        eval_timeout(&d, &l, TxId(4)),
        Err(EngineError::NoMonitor { .. })
    ));
}

#[test]
fn legacy_mode_rejects_monitor_writes() {
    let (reg, cfg) = lender_setup();
    let out = execute(&borrow(0, 100), &cfg, &reg, MonitorMode::Legacy).unwrap();
    assert!(matches!(
        out,
        TransactionOutcome::Fail(_, FailReason::InvalidMonitorWrite { .. })
    ));
}

#[test]
fn flash_loan_needs_same_tx_repayment() {
    let reg = ContractRegistry::new()
        .with(
            "NC",
            LoanClient {
                tracks_debts: false,
                threshold: 200,
            },
        )
        .with("F", builtins::FlashLoanLender);
    let cfg = config(&[("NC", 0), ("F", 500)], &[("u", 0)]);
    let repaid = tx(
        0,
        "NC",
        "borrow",
        vec!["F".into(), Scalar::Int(100), Scalar::Int(1)],
    );
    let TransactionOutcome::Commit(after) =
        execute(&repaid, &cfg, &reg, MonitorMode::Legacy).unwrap()
    else {
        panic!("expected commit");
    };
    assert_eq!(after.ledger.balance(&"F".into()), Some(500));

    let kept = tx(0, "NC", "borrow", vec!["F".into(), Scalar::Int(100)]);
    let out = execute(&kept, &cfg, &reg, MonitorMode::Legacy).unwrap();
    assert!(matches!(
        out,
        TransactionOutcome::Fail(_, FailReason::FailBit { .. })
    ));
}

fn arb_scalar() -> impl Strategy<Value = Scalar> {
    prop_oneof![
        (-300i64..300).prop_map(Scalar::Int),
        prop::sample::select(vec!["A", "B", "L", "M", "X"]).prop_map(Scalar::from),
        (0u64..4).prop_map(|t| Scalar::tx(TxId(t))),
    ]
}

fn every_kind() -> (ContractRegistry, ExtendedConfiguration) {
    let names = ["A", "B", "L", "M", "C", "S", "F", "W", "N"];
    let mut reg = ContractRegistry::new();
    for (name, kind) in names.iter().zip([
        "conditional-sender",
        "conditional-sender",
        "lender",
        "market",
        "client",
        "splitter",
        "flashloan-lender",
        "wallet",
        "naive-client",
    ]) {
        reg.install(
            Address::new(*name),
            builtins::build(kind, &Default::default()).unwrap(),
        );
    }
    let balances: Vec<(&str, Tokens)> = names.iter().map(|n| (*n, 150)).collect();
    (reg, config(&balances, &[("u", 40)]))
}

proptest! {
    #[test]
    fn builtins_are_total_and_well_behaved(
        calls in prop::collection::vec(
            (
                prop::sample::select(vec!["A", "B", "L", "M", "C", "S", "F", "W", "N", "X"]),
                prop::sample::select(vec![
                    "send", "deposit", "payout", "lend", "returnLoan", "borrow",
                    "receiveLoan", "invest", "payBack", "nope",
                ]),
                prop::collection::vec(arb_scalar(), 0..4),
                0u64..50,
                0u64..5,
            ),
            1..6,
        )
    ) {
        let (reg, mut cfg) = every_kind();
        for (i, (target, ep, args, amount, cost)) in calls.into_iter().enumerate() {
            let t = Transaction::new(TxId(i as u64), "u".into(), target.into(), ep, args, amount)
                .with_cost(cost);
            let first = apply_tx(&t, &cfg, &reg).unwrap();
            let again = apply_tx(&t, &cfg, &reg).unwrap();
            prop_assert_eq!(&first, &again);
            let before = cfg.total_tokens();
            let next = match first {
                TransactionOutcome::Fail(f, _) => {
                    prop_assert_eq!(&f.ledger, &cfg.ledger);
                    prop_assert_eq!(&f.monitors, &cfg.monitors);
                    prop_assert!(f.total_tokens() + cost as u128 >= before);
                    f
                }
                TransactionOutcome::Pending { commit, fail } => {
                    prop_assert_eq!(&fail.ledger, &cfg.ledger);
                    prop_assert_eq!(&fail.monitors, &cfg.monitors);
                    prop_assert_eq!(commit.total_tokens(), before);
                    prop_assert!(commit.monitors.entries().any(|(_, tx, s)| tx == t.id && s == MonitorState::Undecided));
                    commit
                }
                TransactionOutcome::Commit(c) => {
                    prop_assert_eq!(c.total_tokens(), before);
                    prop_assert!(!c.monitors.entries().any(|(_, tx, s)| tx == t.id && s == MonitorState::Undecided));
                    c
                }
            };
            for (c, tx, s) in next.monitors.entries() {
                let from = cfg.monitors.state(c, tx);
                prop_assert!(from == s || monitor_transition_legal(from, s, tx == t.id));
            }
            cfg = next;
        }
    }
}
