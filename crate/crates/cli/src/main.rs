//! `fmon`: run, check and list future-monitor scenarios.
//!
//! Exit status: 0 ok, 1 assertion or oracle failure, 2 usage, parse or
//! engine error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fmon_core::oracle::OracleError;
use fmon_core::render;
use fmon_core::scenario::demos::{self, SIZE_WORST_CASE};
use fmon_core::scenario::{
    check_assertions, export_json, fuzz, oracle_command, parse_scenario, report_text, run_scenario,
    Assertion, OracleCommandError, RunOptions, Scenario,
};
use fmon_core::tree::PruneMode;

#[derive(Parser)]
#[command(
    name = "fmon",
    version,
    about = "Blockchain runs with bounded future monitors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or bundled demo, drain it and print the history.
    Run {
        /// Path to a .jsonl scenario or the name of a bundled demo.
        scenario: String,
        /// Write one Graphviz file per tree snapshot into this directory.
        #[arg(long, value_name = "DIR")]
        emit_dot: Option<PathBuf>,
        /// Write history, final tree and trace as JSON.
        #[arg(long, value_name = "FILE")]
        emit_json: Option<PathBuf>,
        /// Expected final status, e.g. `t0=Failed`. Repeatable.
        #[arg(long = "assert", value_name = "tN=STATUS")]
        asserts: Vec<Assertion>,
        /// Use the immediate engine: no future monitors.
        #[arg(long)]
        legacy: bool,
        #[arg(long, value_enum, hide = true)]
        mutant: Option<Mutant>,
    },
    /// Check engine decisions against the brute-force oracle.
    ///
    /// With a scenario, checks that one; with --seed, a generated batch;
    /// otherwise every bundled demo.
    Oracle {
        scenario: Option<String>,
        #[arg(long, conflicts_with = "scenario")]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100, requires = "seed")]
        count: usize,
        /// Generate scenarios without monitors (also diffed against the
        /// immediate engine).
        #[arg(long, requires = "seed")]
        monitor_free: bool,
        #[arg(long, value_enum, hide = true)]
        mutant: Option<Mutant>,
    },
    /// Print a bundled demo as a scenario file, or `list` the demos.
    Demo {
        name: String,
        /// Window of size-worst-case.
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Monitored transactions of size-worst-case.
        #[arg(long, default_value_t = 2)]
        m: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mutant {
    SkipCommitGuard,
}

fn prune_mode(m: Option<Mutant>) -> PruneMode {
    match m {
        Some(Mutant::SkipCommitGuard) => PruneMode::SkipCommitGuard,
        None => PruneMode::Faithful,
    }
}

fn load(arg: &str) -> Result<(String, Scenario)> {
    let path = Path::new(arg);
    if path.exists() {
        let sc = parse_scenario(path)?;
        let name = sc.name.clone().unwrap_or_else(|| arg.to_string());
        return Ok((name, sc));
    }
    match demos::demo(arg) {
        Some(sc) => Ok((arg.to_string(), sc)),
        None => bail!("no scenario file `{arg}` and no demo of that name (try `fmon demo list`)"),
    }
}

fn run(
    arg: &str,
    emit_dot: Option<PathBuf>,
    emit_json: Option<PathBuf>,
    asserts: &[Assertion],
    legacy: bool,
    mutant: Option<Mutant>,
) -> Result<u8> {
    let (name, sc) = load(arg)?;
    let opts = RunOptions {
        emit_dot,
        legacy,
        prune: prune_mode(mutant),
    };
    let a = run_scenario(&sc, &opts).with_context(|| format!("running {name}"))?;
    println!("scenario {name} (k={}, engine {:?})", sc.k, a.engine);
    for e in &a.trace {
        let submitted = e
            .submitted
            .map(|t| t.to_string())
            .unwrap_or_else(|| "-".into());
        let consumed = e
            .consumed
            .map(|(t, s)| format!("{t} {s}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<3} {:<7} submitted {:<4} permanent {:<13} nodes {:<3} {}",
            e.step,
            e.phase,
            submitted,
            consumed,
            e.nodes.len(),
            &e.digest[..12]
        );
    }
    println!("history:");
    for e in a.history.user_entries() {
        println!("  {}  {}", e.tx, e.status);
    }
    println!("final: {}", a.history.last_config().balance_digest());
    if !a.tree.is_leaf() {
        println!("pending tree:");
        print!("{}", render::to_text(&a.tree));
    }
    if let Some(path) = emit_json {
        std::fs::write(&path, export_json(&a))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let failures = check_assertions(&a.history, asserts);
    for f in &failures {
        println!("assertion failed: {f}");
    }
    Ok(if failures.is_empty() { 0 } else { 1 })
}

fn oracle_one(name: &str, sc: &Scenario, mode: PruneMode, verbose: bool) -> Result<bool> {
    match oracle_command(sc, mode) {
        Ok(r) => {
            if verbose || !r.passed() {
                print!("{}", report_text(name, &r));
            }
            Ok(r.passed())
        }
        Err(OracleCommandError::Oracle(e @ OracleError::CapExceeded { .. })) => {
            Err(anyhow!("refusing {name}: {e}"))
        }
        Err(e) => Err(anyhow!("{name}: {e}")),
    }
}

fn oracle(
    scenario: Option<String>,
    seed: Option<u64>,
    count: usize,
    monitor_free: bool,
    mutant: Option<Mutant>,
) -> Result<u8> {
    let mode = prune_mode(mutant);
    let mut failed = 0;
    let mut total = 0;
    if let Some(arg) = scenario {
        let (name, sc) = load(&arg)?;
        total += 1;
        failed += usize::from(!oracle_one(&name, &sc, mode, true)?);
    } else if let Some(seed) = seed {
        for s in fuzz::seeds(seed, count) {
            let sc = if monitor_free {
                fuzz::monitor_free(s)
            } else {
                fuzz::general(s)
            };
            let name = sc.name.clone().unwrap_or_default();
            total += 1;
            if !oracle_one(&name, &sc, mode, false)? {
                failed += 1;
                println!("  scenario:");
                for line in sc.to_jsonl().lines() {
                    println!("    {line}");
                }
            }
        }
    } else {
        for name in demos::names() {
            let sc = demos::demo(name).expect("bundled");
            total += 1;
            failed += usize::from(!oracle_one(name, &sc, mode, true)?);
        }
    }
    println!("{} of {total} scenarios passed", total - failed);
    Ok(if failed == 0 { 0 } else { 1 })
}

fn demo(name: &str, k: usize, m: usize) -> Result<u8> {
    if name == "list" {
        for n in demos::names() {
            println!("{n}");
        }
        return Ok(0);
    }
    let sc = if name == SIZE_WORST_CASE {
        demos::size_worst_case(k, m)
            .ok_or_else(|| anyhow!("size-worst-case needs 1 <= k and m <= k"))?
    } else {
        demos::demo(name).ok_or_else(|| anyhow!("unknown demo `{name}` (try `fmon demo list`)"))?
    };
    print!("{}", sc.to_jsonl());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            emit_dot,
            emit_json,
            asserts,
            legacy,
            mutant,
        } => run(&scenario, emit_dot, emit_json, &asserts, legacy, mutant),
        Command::Oracle {
            scenario,
            seed,
            count,
            monitor_free,
            mutant,
        } => oracle(scenario, seed, count, monitor_free, mutant),
        Command::Demo { name, k, m } => demo(&name, k, m),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
