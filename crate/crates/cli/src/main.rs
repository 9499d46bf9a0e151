//! `propm`: fairness verification, PROPm construction and exhaustive oracles
//! from the command line.
//!
//! Exit codes: 0 when the command succeeds or the checked claim holds, 1 when
//! the claim fails, 2 on malformed input, 3 when an enumeration budget is exceeded.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use propm::cpsets::cp_bundle;
use propm::fairness::{check, FairnessReport, Notion};
use propm::leximin::{leximin_max, EnvyGraph};
use propm::oracle::{exists_parallel, implication_audit, make_counterexample, random_instance, Budget, DEFAULT_BUDGET};
use propm::solver::{check_certificate, solve_propm};
use propm::{Allocation, Error, Instance};

#[derive(Parser, Debug)]
#[command(name = "propm", version, about = "Fair division of indivisible goods: PROPm and friends")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check an allocation against one fairness notion.
    Verify {
        #[command(flatten)]
        input: InstanceArg,
        /// Allocation JSON: `{"bundles": [[...], ...]}` or a bare list of bundles.
        #[arg(long)]
        allocation: PathBuf,
        #[arg(long, default_value = "propm")]
        notion: Notion,
        #[arg(long)]
        json: bool,
    },
    /// Construct a PROPm allocation with a certificate.
    Solve {
        #[command(flatten)]
        input: InstanceArg,
        #[arg(long)]
        json: bool,
    },
    /// Search all allocations for one satisfying a notion.
    Exists {
        #[command(flatten)]
        input: InstanceArg,
        #[arg(long)]
        notion: Notion,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long)]
        json: bool,
    },
    /// Check the implications between notions on every allocation.
    Audit {
        #[command(flatten)]
        input: InstanceArg,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long)]
        json: bool,
    },
    /// Leximin-maximal allocation of adjusted values and its envy-graph check.
    Leximin {
        #[command(flatten)]
        input: InstanceArg,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long)]
        json: bool,
    },
    /// Write a seeded random instance.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 100)]
        max_value: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the three-agent, seven-item counterexample instance.
    Counterexample {
        /// Total value per agent; one item is worth `scale - 6`, six are worth 1.
        #[arg(long, default_value_t = 100)]
        scale: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time CP-bundle computation on random value lists.
    Bench {
        #[arg(long, default_value = "10,20,40,80,160")]
        m: String,
        #[arg(long, default_value_t = 1000)]
        max_value: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Divisor `k` of `CP(k, M)`.
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Debug)]
struct InstanceArg {
    /// Instance JSON: `{"n": .., "m": .., "values": [[...], ...]}`.
    #[arg(long)]
    instance: PathBuf,
}

#[derive(Args, Debug)]
struct SearchArgs {
    /// Largest number of allocations an exhaustive search may visit.
    #[arg(long, env = "PROPM_BUDGET", default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Threads for partitioned enumeration.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

/// Failure categories mapped onto exit codes.
enum Failure {
    Input(anyhow::Error),
    Budget(anyhow::Error),
    Claim(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Budget { .. } => Failure::Budget(e.into()),
            Error::InvariantViolation(_) => Failure::Claim(e.into()),
            _ => Failure::Input(e.into()),
        }
    }
}

/// Whether the command's claim held.
type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Claim(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Budget(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Verify { input, allocation, notion, json } => {
            let inst = load_instance(&input.instance)?;
            let x = load_allocation(&allocation)?;
            let report = check(&inst, &x, notion)?;
            if json {
                print_json(&report);
            } else {
                print_report(&x, &report);
            }
            Ok(report.all_satisfied)
        }
        Command::Solve { input, json } => {
            let inst = load_instance(&input.instance)?;
            let (x, cert) = solve_propm(&inst)?;
            let report = check(&inst, &x, Notion::Propm)?;
            if !report.all_satisfied {
                return Err(Failure::Claim(anyhow!("solver output {x} fails the PROPm check")));
            }
            check_certificate(&inst, &x, &cert)
                .map_err(|e| Failure::Claim(anyhow!("certificate does not verify: {e}")))?;
            if json {
                print_json(&json!({ "allocation": x, "certificate": cert }));
            } else {
                println!("allocation: {x}");
                println!("lemmas: {}", cert.lemmas().join(", "));
                print_report(&x, &report);
                println!("certificate: verified ({} top-level steps)", cert.steps.len());
            }
            Ok(true)
        }
        Command::Exists { input, notion, search, json } => {
            let inst = load_instance(&input.instance)?;
            let result = exists_parallel(&inst, notion, Budget::new(search.budget), search.workers)?;
            if json {
                print_json(&result);
            } else if let Some(w) = &result.witness {
                println!("{notion}: exists, e.g. {w} ({} allocations scanned)", result.allocations_checked);
            } else {
                println!("{notion}: does not exist ({} allocations scanned)", result.allocations_checked);
            }
            Ok(result.exists)
        }
        Command::Audit { input, search, json } => {
            let inst = load_instance(&input.instance)?;
            let report = implication_audit(&inst, Budget::new(search.budget))?;
            if json {
                print_json(&report);
            } else {
                println!("{} allocations audited", report.allocations_checked);
                for link in &report.counts {
                    println!(
                        "  {:>11} => {:<11} {} violations",
                        link.premise.to_string(),
                        link.conclusion.to_string(),
                        link.violations
                    );
                }
                for v in &report.violations {
                    println!("  agent {} in {}: {} but not {}", v.agent, v.allocation, v.premise, v.conclusion);
                }
            }
            Ok(report.total_violations() == 0)
        }
        Command::Leximin { input, search, json } => {
            let inst = load_instance(&input.instance)?;
            let (x, profile) = leximin_max(&inst, Budget::new(search.budget))?;
            let cycle = EnvyGraph::build(&inst, &x).find_cycle();
            if json {
                print_json(&json!({ "allocation": x, "profile": profile, "cycle": cycle }));
            } else {
                println!("allocation: {x}");
                let values: Vec<String> = profile.values.iter().map(ToString::to_string).collect();
                println!("adjusted values: {}", values.join(", "));
                match &cycle {
                    Some(c) => println!("envy graph: cycle {c:?}"),
                    None => println!("envy graph: acyclic"),
                }
            }
            Ok(cycle.is_none())
        }
        Command::Gen { n, m, max_value, seed, out } => {
            let inst = random_instance(n, m, max_value, seed)?;
            write_instance(&inst, out.as_deref())?;
            Ok(true)
        }
        Command::Counterexample { scale, out } => {
            let inst = make_counterexample(scale)?;
            write_instance(&inst, out.as_deref())?;
            Ok(true)
        }
        Command::Bench { m, max_value, seed, k, json } => {
            if k == 0 {
                return Err(Failure::Input(anyhow!("--k must be at least 1")));
            }
            let sizes = m
                .split(',')
                .map(|s| s.trim().parse::<usize>().with_context(|| format!("bad item count {s:?}")))
                .collect::<anyhow::Result<Vec<_>>>()
                .map_err(Failure::Input)?;
            let mut rows = Vec::new();
            for size in sizes {
                let inst = random_instance(1, size, max_value, seed)?;
                let start = Instant::now();
                let bundle = cp_bundle(&inst, 0, k, &inst.all_items());
                let micros = start.elapsed().as_secs_f64() * 1e6;
                rows.push((size, bundle.len(), micros));
            }
            if json {
                let rows: Vec<_> =
                    rows.iter().map(|(m, len, us)| json!({ "m": m, "bundle_len": len, "micros": us })).collect();
                print_json(&rows);
            } else {
                println!("{:>6} {:>10} {:>14}", "m", "|CP|", "time (us)");
                for (m, len, us) in rows {
                    println!("{m:>6} {len:>10} {us:>14.1}");
                }
            }
            Ok(true)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(Failure::Input)
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    serde_json::from_str(&read(path)?)
        .with_context(|| format!("{} is not a valid instance", path.display()))
        .map_err(Failure::Input)
}

fn load_allocation(path: &Path) -> Result<Allocation, Failure> {
    let text = read(path)?;
    serde_json::from_str::<Allocation>(&text)
        .or_else(|_| serde_json::from_str::<Vec<propm::Bundle>>(&text).map(Allocation::new))
        .with_context(|| format!("{} is not a valid allocation", path.display()))
        .map_err(Failure::Input)
}

fn write_instance(inst: &Instance, out: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string(inst).expect("instances serialize");
    match out {
        Some(path) => fs::write(path, text + "\n")
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(Failure::Input),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("outputs serialize"));
}

fn print_report(x: &Allocation, report: &FairnessReport) {
    println!("{} for {x}:", report.notion);
    for (agent, verdict) in report.per_agent.iter().enumerate() {
        let mark = if verdict.satisfied { "ok  " } else { "FAIL" };
        println!("  agent {agent}: {mark} slack {}", verdict.slack);
    }
    let summary = if report.all_satisfied { "all agents satisfied" } else { "not satisfied" };
    println!("{summary}");
}
