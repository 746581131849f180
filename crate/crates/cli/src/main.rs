use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use capfl::batch::Execution;
use capfl::instances::{
    exact_opt_with, gen_gap_instance, gen_knapsack_instance, gen_random_instance, integral_violations,
    validate_instance, ExactOptions, Instance, IntegralSolution, RandomParams, SolutionFile, SolutionViolation,
};
use capfl::rational::Rational;
use capfl::rounding::SoftCapBackend;
use capfl::solver::{solve, standard_lp_value, Exact, SolveConfig, SolveStatus, SCHEMA_VERSION};
use capfl::suite::{run_suite, SuiteConfig};

/// Exit status for a failed check: an invalid solution, a failed run check or
/// a failing acceptance criterion.
const CHECK_FAILED: u8 = 2;

#[derive(Parser)]
#[command(name = "capfl", version, about = "LP relaxation and rounding for capacitated facility location")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cutting-plane lower bound plus rounding to an integral solution.
    Solve {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        #[arg(long, default_value = "exact")]
        softcap: SoftCapBackend,
        /// Skip the brute-force optimum in the report.
        #[arg(long)]
        no_oracle: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force optimum over facility subsets.
    Exact {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        sequential: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Value of the standard assignment LP.
    StandardLp {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a generated instance file.
    Gen {
        #[command(flatten)]
        generator: Generator,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate an instance, and a claimed solution when given.
    Verify {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Run the acceptance battery and print a pass/fail table.
    Suite {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        #[arg(long, default_value = "exact")]
        softcap: SoftCapBackend,
        #[arg(long)]
        sequential: bool,
        /// Write the full JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Generator {
    /// Integrality-gap family with parameter N.
    #[arg(long, value_name = "N")]
    gap: Option<u64>,
    /// Knapsack reduction: comma-separated weights, comma-separated costs, demand.
    #[arg(long, num_args = 3, value_names = ["WEIGHTS", "COSTS", "DEMAND"])]
    knapsack: Option<Vec<String>>,
    /// Seeded random instance: SEED,NF,ND.
    #[arg(long, value_name = "SEED,NF,ND")]
    random: Option<String>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    #[arg(long, value_name = "FILE")]
    instance: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    gap: Option<u64>,
    #[arg(long, num_args = 3, value_names = ["WEIGHTS", "COSTS", "DEMAND"])]
    knapsack: Option<Vec<String>>,
    #[arg(long, value_name = "SEED,NF,ND")]
    random: Option<String>,
}

fn split<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',').map(|p| p.trim().parse::<T>().map_err(|e| anyhow::anyhow!("bad {what} `{p}`: {e}"))).collect()
}

fn generate(gap: Option<u64>, knapsack: Option<&[String]>, random: Option<&str>) -> Result<Instance> {
    if let Some(n) = gap {
        if n == 0 {
            bail!("--gap needs N >= 1");
        }
        return Ok(gen_gap_instance(n));
    }
    if let Some(parts) = knapsack {
        let weights: Vec<u64> = split(&parts[0], "weight")?;
        let costs: Vec<Rational> = split(&parts[1], "cost")?;
        let demand: u64 = parts[2].parse().with_context(|| format!("bad demand `{}`", parts[2]))?;
        return Ok(gen_knapsack_instance(&weights, &costs, demand)?);
    }
    if let Some(fields) = random {
        let v: Vec<u64> = split(fields, "--random field")?;
        let [seed, nf, nd] = v[..] else { bail!("--random expects SEED,NF,ND") };
        if nf == 0 || nd == 0 {
            bail!("--random needs at least one facility and one client");
        }
        return Ok(gen_random_instance(seed, nf as usize, nd as usize, &RandomParams::default()));
    }
    bail!("no instance source given")
}

impl Source {
    fn load(&self) -> Result<Instance> {
        match &self.instance {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Instance::from_json(&text).with_context(|| format!("loading {}", path.display()))
            }
            None => generate(self.gap, self.knapsack.as_deref(), self.random.as_deref()),
        }
    }
}

#[derive(Serialize)]
struct ExactReport {
    schema_version: u32,
    value: Exact,
    solution: SolutionFile,
}

#[derive(Serialize)]
struct StandardLpReport {
    schema_version: u32,
    value: Exact,
    x: Vec<Vec<Rational>>,
    y: Vec<Rational>,
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display())),
        None => match writeln!(io::stdout().lock(), "{text}") {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

fn describe(inst: &Instance, v: &SolutionViolation) -> String {
    match v {
        SolutionViolation::Overloaded { facility, load, capacity } => format!(
            "capacity violation: facility {} serves {load} clients, capacity {capacity}",
            inst.facility(*facility).id
        ),
        SolutionViolation::AssignedToClosed { client, facility } => {
            format!("client {} assigned to closed facility {}", inst.clients()[*client], inst.facility(*facility).id)
        }
        SolutionViolation::UnknownFacility { client } => format!("client {} is unassigned", inst.clients()[*client]),
        other => other.to_string(),
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve { source, max_iters, softcap, no_oracle, out } => {
            let inst = source.load()?;
            let cfg = SolveConfig { max_iters, softcap, oracle: !no_oracle, ..SolveConfig::default() };
            let solved = solve(&inst, &cfg)?;
            let report = &solved.report;
            emit(&report.to_json(), out.as_ref())?;
            if report.status == SolveStatus::IterationCap {
                log::warn!("iteration cap {max_iters} reached; report holds the lower bound only");
            }
            if !report.checks.all() {
                eprintln!("error: run checks failed: {:?}", report.checks);
                return Ok(CHECK_FAILED);
            }
            Ok(0)
        }
        Command::Exact { source, sequential, out } => {
            let inst = source.load()?;
            let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
            let opt = exact_opt_with(&inst, ExactOptions { exec, ..ExactOptions::default() })?;
            let doc = ExactReport {
                schema_version: SCHEMA_VERSION,
                value: Exact::from(&opt.value),
                solution: opt.solution.to_file(&inst),
            };
            emit(&serde_json::to_string_pretty(&doc)?, out.as_ref())?;
            Ok(0)
        }
        Command::StandardLp { source, out } => {
            let inst = source.load()?;
            let master = standard_lp_value(&inst)?;
            let doc = StandardLpReport {
                schema_version: SCHEMA_VERSION,
                value: Exact::from(&master.value),
                x: master.point.x,
                y: master.point.y,
            };
            emit(&serde_json::to_string_pretty(&doc)?, out.as_ref())?;
            Ok(0)
        }
        Command::Gen { generator, out } => {
            let inst = generate(generator.gap, generator.knapsack.as_deref(), generator.random.as_deref())?;
            emit(&inst.to_json(), out.as_ref())?;
            Ok(0)
        }
        Command::Verify { source, solution } => {
            let inst = match &source.instance {
                Some(path) => {
                    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    let raw: Instance =
                        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                    let violations = validate_instance(&raw);
                    if !violations.is_empty() {
                        for v in &violations {
                            println!("invalid instance: {v}");
                        }
                        return Ok(CHECK_FAILED);
                    }
                    raw
                }
                None => source.load()?,
            };
            let Some(path) = solution else {
                println!("instance ok: {} facilities, {} clients", inst.nf(), inst.nd());
                return Ok(0);
            };
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let file: SolutionFile =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let sol = match IntegralSolution::from_file(&inst, &file) {
                Ok(s) => s,
                Err(e) => {
                    println!("invalid solution: {e}");
                    return Ok(CHECK_FAILED);
                }
            };
            let violations = integral_violations(&inst, &sol);
            if violations.is_empty() {
                let cost = capfl::instances::solution_cost(&inst, &sol);
                println!("solution ok: cost {cost} ({})", cost.to_decimal_string(6));
                Ok(0)
            } else {
                for v in &violations {
                    println!("invalid solution: {}", describe(&inst, v));
                }
                Ok(CHECK_FAILED)
            }
        }
        Command::Suite { seed, max_iters, softcap, sequential, out } => {
            let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
            let report = run_suite(&SuiteConfig { seed, exec, softcap, max_iters });
            emit(report.table().trim_end(), None)?;
            if let Some(path) = out {
                emit(&report.to_json(), Some(&path))?;
            }
            Ok(if report.all_passed() { 0 } else { CHECK_FAILED })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
