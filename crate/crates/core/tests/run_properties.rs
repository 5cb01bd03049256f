//! Property suites for run invariants, checked against the oracle.
//!
//! Besides the builtin generator, a scripted contract drives monitors in
//! ways no builtin does: it can decide a monitor as fail, and its decisions
//! depend on which branch of an earlier transaction it runs in.

use fmon_core::engine::{Abort, ContractBehavior, ContractRegistry, ExecutionContext};
use fmon_core::model::{
    Address, ExtendedConfiguration, MonitorState, Scalar, TimeoutDecision, Transaction, TxId,
    UserId,
};
use fmon_core::oracle::{check_scenario, CheckKind, OracleReport};
use fmon_core::runtime::BlockchainRun;
use fmon_core::scenario::fuzz;
use fmon_core::tree::PruneMode;
use proptest::prelude::*;

#[derive(Debug)]
struct Script;

fn opened(tx: TxId) -> String {
    format!("open:{}", tx.0)
}

impl ContractBehavior for Script {
    fn kind(&self) -> &str {
        "script"
    }

    fn invoke(&self, ctx: &mut ExecutionContext<'_>, entrypoint: &str) -> Result<(), Abort> {
        match entrypoint {
            // open(timeout_fails)
            "open" => {
                let tx = ctx.txid();
                ctx.storage_mut().set_int(opened(tx), 1);
                let timeout = if ctx.arg_int(0)? == 1 {
                    TimeoutDecision::Fail
                } else {
                    TimeoutDecision::Commit
                };
                ctx.monitor_activate(MonitorState::Undecided, timeout);
                Ok(())
            }
            // decide(target, fail, guard, want): only when guard's open
            // marker is visible exactly when `want` is 1
            "decide" => {
                let target = ctx.arg_tx(0)?;
                let state = if ctx.arg_int(1)? == 1 {
                    MonitorState::Fail
                } else {
                    MonitorState::Commit
                };
                let guard = ctx.arg_tx(2)?;
                let want = ctx.arg_int(3)?;
                let seen = ctx.storage().int(&opened(guard)) == 1;
                let pending = ctx.storage().int(&opened(target)) == 1;
                if pending && seen == (want == 1) {
                    ctx.monitor_decide(target, state);
                }
                Ok(())
            }
            _ => Err(Abort::UnknownEntrypoint),
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Open {
        on_q: bool,
        timeout_fails: bool,
    },
    Decide {
        on_q: bool,
        back: u64,
        fail: bool,
        guard_back: u64,
        want: bool,
    },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (any::<bool>(), any::<bool>()).prop_map(|(on_q, timeout_fails)| Op::Open {
            on_q,
            timeout_fails
        }),
        (
            any::<bool>(),
            1..=4u64,
            any::<bool>(),
            1..=4u64,
            any::<bool>()
        )
            .prop_map(|(on_q, back, fail, guard_back, want)| Op::Decide {
                on_q,
                back,
                fail,
                guard_back,
                want
            }),
    ]
}

fn scripted(ops: &[Op]) -> Vec<Transaction> {
    let mut opens = 0;
    ops.iter()
        .enumerate()
        .map(|(i, op)| {
            let id = TxId(i as u64);
            let target = |q: bool| Address::new(if q { "q" } else { "p" });
            let open = |q: bool, f: bool| {
                Transaction::new(
                    id,
                    UserId::new("u"),
                    target(q),
                    "open",
                    vec![Scalar::Int(f as i64)],
                    0,
                )
            };
            match op {
                Op::Open {
                    on_q,
                    timeout_fails,
                } if opens < fuzz::MAX_MONITORED => {
                    opens += 1;
                    open(*on_q, *timeout_fails)
                }
                Op::Decide {
                    on_q,
                    back,
                    fail,
                    guard_back,
                    want,
                } if i as u64 >= (*back).max(*guard_back) => Transaction::new(
                    id,
                    UserId::new("u"),
                    target(*on_q),
                    "decide",
                    vec![
                        Scalar::tx(TxId(i as u64 - back)),
                        Scalar::Int(*fail as i64),
                        Scalar::tx(TxId(i as u64 - guard_back)),
                        Scalar::Int(*want as i64),
                    ],
                    0,
                ),
                // too early to look back, or too many monitors: a no-op decide
                _ => Transaction::new(
                    id,
                    UserId::new("u"),
                    target(false),
                    "decide",
                    vec![
                        Scalar::tx(id),
                        Scalar::Int(0),
                        Scalar::tx(id),
                        Scalar::Int(1),
                    ],
                    0,
                ),
            }
        })
        .collect()
}

fn script_setup() -> (ExtendedConfiguration, ContractRegistry) {
    let genesis = ExtendedConfiguration::genesis(
        [(Address::new("p"), 0), (Address::new("q"), 0)],
        [(UserId::new("u"), 0)],
    );
    let reg = ContractRegistry::new().with("p", Script).with("q", Script);
    (genesis, reg)
}

fn assert_clean(report: &OracleReport) -> Result<(), TestCaseError> {
    prop_assert!(report.passed(), "{:#?}", report.violations);
    prop_assert_eq!(report.consistent_assignments, 1);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    /// Progress, bounded certainty, succession, size, pruning and decisions
    /// on scripted monitors.
    #[test]
    fn scripted_runs_match_the_oracle(k in 1..=4usize, ops in prop::collection::vec(op(), 1..=8)) {
        let (genesis, reg) = script_setup();
        let txs = scripted(&ops);
        let report = check_scenario(&genesis, &txs, k, &reg, PruneMode::Faithful).unwrap();
        assert_clean(&report)?;
        let pruning = report.checks_of(CheckKind::ImpossibleNodes);
        prop_assert_eq!(pruning, txs.len());
    }

    /// Pruning twice changes nothing and never shortens a branch.
    #[test]
    fn innerprune_is_idempotent(k in 1..=4usize, ops in prop::collection::vec(op(), 1..=8)) {
        let (genesis, reg) = script_setup();
        let mut run = BlockchainRun::new(genesis, k).unwrap();
        for tx in scripted(&ops) {
            let t = run.step_traced(&tx, &reg).unwrap();
            for mode in [PruneMode::Faithful, PruneMode::SkipCommitGuard] {
                let once = t.extended.innerprune(mode);
                prop_assert_eq!(&once.innerprune(mode), &once);
                prop_assert_eq!(once.height(), t.extended.height());
                prop_assert!(once.paths().is_subset(&t.extended.paths()));
            }
        }
    }

    /// The builtin generator used by the acceptance corpus.
    #[test]
    fn generated_scenarios_match_the_oracle(seed in any::<u64>()) {
        let sc = fuzz::general(seed);
        let reg = sc.registry().unwrap();
        let report = check_scenario(&sc.genesis(), &sc.transactions(), sc.k, &reg, PruneMode::Faithful).unwrap();
        assert_clean(&report)?;
    }

    #[test]
    fn monitor_free_scenarios_match_the_legacy_fold(seed in any::<u64>()) {
        let sc = fuzz::monitor_free(seed);
        let reg = sc.registry().unwrap();
        let report = check_scenario(&sc.genesis(), &sc.transactions(), sc.k, &reg, PruneMode::Faithful).unwrap();
        assert_clean(&report)?;
        prop_assert!(report.monitor_free);
    }
}

#[test]
fn scripted_suite_reaches_both_guards() {
    // t0 opens, t1 fails it only in t0's committing branch: the committing
    // side knows the monitor fails, so only the failing side survives.
    let (genesis, reg) = script_setup();
    let ops = [
        Op::Open {
            on_q: false,
            timeout_fails: false,
        },
        Op::Decide {
            on_q: false,
            back: 1,
            fail: true,
            guard_back: 1,
            want: true,
        },
    ];
    let txs = scripted(&ops);
    let mut run = BlockchainRun::new(genesis.clone(), 1).unwrap();
    run.step(&txs[0], &reg).unwrap();
    let t = run.step_traced(&txs[1], &reg).unwrap();
    let pruned = t.pruned.unwrap();
    assert_eq!(
        pruned.paths().into_iter().collect::<Vec<_>>(),
        ["", "f", "fc"]
    );
    assert_eq!(
        run.history().entries[0].status,
        fmon_core::model::TxStatus::Failed
    );
    let report = check_scenario(&genesis, &txs, 1, &reg, PruneMode::Faithful).unwrap();
    assert!(report.passed(), "{:#?}", report.violations);
}
