//! Seeded scenario generators.
//!
//! The same seed always yields the same scenario.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Scenario;
use crate::model::{Scalar, TxId};

/// Largest window a generated scenario uses.
pub const MAX_K: usize = 4;
/// Largest number of transactions that may activate a monitor.
pub const MAX_MONITORED: usize = 6;
pub const MAX_TXS: usize = 8;

fn addr(name: &str) -> Scalar {
    Scalar::from(name)
}

fn params(s: &mut Scenario, key: &str, value: Scalar) {
    s.contracts
        .last_mut()
        .expect("just added")
        .params
        .insert(key.to_string(), value);
}

/// Seeds for a batch of `count` scenarios derived from `seed`.
pub fn seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen()).collect()
}

/// A scenario mixing conditional senders, loans and plain transfers.
pub fn general(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Scenario::new(rng.gen_range(1..=MAX_K)).user("u", 0);
    s.name = Some(format!("fuzz-{seed}"));

    let mut senders = Vec::new();
    for i in 0..rng.gen_range(1..=3) {
        let name = format!("s{i}");
        s = s.contract(&name, "conditional-sender", rng.gen_range(0..=2));
        let timeout = if rng.gen_bool(0.5) { "fail" } else { "commit" };
        params(&mut s, "timeout", addr(timeout));
        senders.push(name);
    }
    let mut wallets = Vec::new();
    for i in 0..rng.gen_range(1..=2) {
        let name = format!("w{i}");
        s = s.contract(&name, "wallet", rng.gen_range(0..=6));
        wallets.push(name);
    }
    let splitter = rng.gen_bool(0.6).then(|| "x".to_string());
    if let Some(x) = &splitter {
        s = s.contract(x, "splitter", rng.gen_range(0..=2));
    }
    let loans = rng.gen_bool(0.5);
    if loans {
        let lender = if rng.gen_bool(0.5) {
            "lender"
        } else {
            "malicious-lender"
        };
        s = s.contract("L", lender, rng.gen_range(0..=300));
        let client = if rng.gen_bool(0.5) {
            "client"
        } else {
            "naive-client"
        };
        s = s.contract("C", client, rng.gen_range(0..=250));
        params(&mut s, "threshold", Scalar::Int(rng.gen_range(1..=200)));
        s = s.contract("M", "market", 200);
        params(&mut s, "profit", Scalar::Int(rng.gen_range(0..=50)));
    }
    let names: Vec<String> = s.contracts.iter().map(|c| c.name.to_string()).collect();
    // Tokens flowing back to senders are what decide their monitors.
    let back = |rng: &mut ChaCha8Rng, last: &Option<String>| -> String {
        if let Some(l) = last.as_ref().filter(|_| rng.gen_bool(0.5)) {
            l.clone()
        } else if rng.gen_bool(0.5) {
            senders.choose(rng).expect("at least one sender").clone()
        } else {
            names.choose(rng).expect("contracts").clone()
        }
    };

    let mut monitored = 0;
    let mut last = None;
    let n = rng.gen_range(1..=MAX_TXS);
    for i in 0..n {
        let may_monitor = monitored < MAX_MONITORED;
        let choice = rng.gen_range(0..if loans { 9 } else { 6 });
        s = match choice {
            0 | 1 if may_monitor => {
                monitored += 1;
                let from = senders
                    .choose(&mut rng)
                    .expect("at least one sender")
                    .clone();
                let to = match &splitter {
                    Some(x) if rng.gen_bool(0.5) => x.clone(),
                    _ => names.choose(&mut rng).expect("contracts").clone(),
                };
                last = Some(from.clone());
                s.tx("u", &from, "send", vec![addr(&to)])
            }
            2 | 4 => {
                let from = wallets
                    .choose(&mut rng)
                    .expect("at least one wallet")
                    .clone();
                let to = back(&mut rng, &last);
                s.tx(
                    "u",
                    &from,
                    "send",
                    vec![addr(&to), Scalar::Int(rng.gen_range(0..=2))],
                )
            }
            3 if splitter.is_some() => {
                let a = back(&mut rng, &last);
                let b = back(&mut rng, &last);
                s.tx("u", "x", "payout", vec![addr(&a), addr(&b)])
            }
            6 if may_monitor => {
                monitored += 1;
                s.tx(
                    "u",
                    "C",
                    "borrow",
                    vec![addr("L"), Scalar::Int(rng.gen_range(0..=150))],
                )
            }
            7 => s.tx("u", "C", "invest", vec![addr("M")]),
            8 => {
                let loan = TxId(rng.gen_range(0..=i) as u64);
                let amount = rng.gen_range(0..=150);
                s.tx(
                    "u",
                    "C",
                    "payBack",
                    vec![addr("L"), Scalar::tx(loan), Scalar::Int(amount)],
                )
            }
            _ => {
                let to = wallets.choose(&mut rng).expect("at least one wallet");
                s.tx("u", to, "deposit", vec![])
            }
        };
    }
    s
}

/// A scenario whose transactions never touch a monitor: transfers, splits
/// and same-transaction flash loans.
pub fn monitor_free(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Scenario::new(rng.gen_range(1..=MAX_K)).user("u", 0);
    s.name = Some(format!("monitor-free-{seed}"));
    let wallets: Vec<String> = (0..rng.gen_range(1..=3)).map(|i| format!("w{i}")).collect();
    for w in &wallets {
        s = s.contract(w, "wallet", rng.gen_range(0..=5));
    }
    s = s
        .contract("x", "splitter", rng.gen_range(0..=3))
        .contract("F", "flashloan-lender", rng.gen_range(0..=200))
        .contract("NC", "naive-client", rng.gen_range(0..=50));
    let names: Vec<String> = s.contracts.iter().map(|c| c.name.to_string()).collect();
    for _ in 0..rng.gen_range(1..=MAX_TXS) {
        s = match rng.gen_range(0..5) {
            0 | 1 => {
                let from = wallets.choose(&mut rng).expect("wallets");
                let to = names.choose(&mut rng).expect("contracts");
                s.tx(
                    "u",
                    from,
                    "send",
                    vec![addr(to), Scalar::Int(rng.gen_range(0..=3))],
                )
            }
            2 => {
                let a = names.choose(&mut rng).expect("contracts");
                let b = names.choose(&mut rng).expect("contracts");
                s.tx("u", "x", "payout", vec![addr(a), addr(b)])
            }
            3 => {
                let mut args = vec![addr("F"), Scalar::Int(rng.gen_range(0..=100))];
                if rng.gen_bool(0.6) {
                    args.push(Scalar::Int(1));
                }
                s.tx("u", "NC", "borrow", args)
            }
            _ => {
                let to = names.choose(&mut rng).expect("contracts");
                s.tx("u", to, "deposit", vec![])
            }
        };
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario_str;

    #[test]
    fn generators_are_deterministic_and_valid() {
        for seed in seeds(7, 40) {
            for make in [general, monitor_free] {
                let a = make(seed);
                assert_eq!(a, make(seed));
                assert_eq!(parse_scenario_str(&a.to_jsonl()).unwrap(), a);
                assert!(a.k <= MAX_K && a.transactions.len() <= MAX_TXS);
            }
        }
    }

    #[test]
    fn seeds_depend_on_the_master_seed() {
        assert_ne!(seeds(1, 3), seeds(2, 3));
        assert_eq!(seeds(1, 3), seeds(1, 3));
    }
}
