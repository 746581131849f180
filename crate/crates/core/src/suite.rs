//! The reproduction battery: gap family, seeded random instances, exhaustive
//! small-instance checks and the knapsack-cover comparison.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::batch::{self, Execution};
use crate::instances::{
    enumerate_feasible_solutions, exact_opt, gen_gap_instance, gen_knapsack_instance, gen_random_instance, Instance,
    RandomParams,
};
use crate::mfn::{
    build_mfn, check_mfn_feasible, dual_point_feasible, enumerate_valid_integral_g, knapsack_cover_cut,
    PartialAssignment,
};
use crate::rational::Rational;
use crate::rounding::SoftCapBackend;
use crate::solver::{solve, standard_lp_value, SolveConfig, SolveError, Solved, SCHEMA_VERSION};

/// Largest solution count enumerated when checking a cut against integral points.
pub const ENUMERATION_LIMIT: usize = 250_000;
pub const GAP_SIZES: [u64; 3] = [2, 5, 10];
pub const RANDOM_COUNT: u64 = 50;
pub const RELAXATION_COUNT: u64 = 20;
pub const CUT_BATTERY_COUNT: u64 = 30;
pub const GAP_TIME_LIMIT: Duration = Duration::from_secs(10);
pub const RANDOM_TIME_LIMIT: Duration = Duration::from_secs(300);
pub const RATIO_LIMIT: i64 = 288;

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub seed: u64,
    pub exec: Execution,
    pub softcap: SoftCapBackend,
    pub max_iters: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { seed: 0, exec: Execution::Parallel, softcap: SoftCapBackend::Exact, max_iters: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InstanceRow {
    pub name: String,
    pub facilities: usize,
    pub clients: usize,
    pub standard_lp: Option<Rational>,
    pub lower_bound: Option<Rational>,
    pub cost: Option<Rational>,
    pub exact_opt: Option<Rational>,
    pub cuts: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RatioSummary {
    pub count: usize,
    pub min: Option<Rational>,
    pub median: Option<Rational>,
    pub max: Option<Rational>,
    pub mean: Option<Rational>,
    pub optimal: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
    pub ratios: RatioSummary,
    pub instances: Vec<InstanceRow>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite report serialises")
    }

    /// One `PASS`/`FAIL` line per criterion.
    pub fn table(&self) -> String {
        self.criteria
            .iter()
            .map(|c| format!("{} {:>2}  {:<40} {}\n", if c.passed { "PASS" } else { "FAIL" }, c.id, c.title, c.detail))
            .collect()
    }
}

/// Parameters of the criterion-2 random instances: up to 4 facilities, 8
/// clients, capacities in 1..=4; odd seeds use a zero metric.
pub fn random_instance(base: u64, k: u64) -> Instance {
    let seed = base.wrapping_mul(1_000_003).wrapping_add(k);
    let nf = 2 + (k % 3) as usize;
    let nd = 3 + (k % 6) as usize;
    let grid = if k % 2 == 1 { 0 } else { 6 };
    gen_random_instance(seed, nf, nd, &RandomParams { open_cost: (0, 40), capacity: (1, 4), grid })
}

/// Exhaustively checkable: at most 2 facilities, 3 clients, capacities 1..=3.
pub fn relaxation_instance(base: u64, k: u64) -> Instance {
    let seed = base.wrapping_mul(7_000_003).wrapping_add(k);
    let nf = 1 + (k % 2) as usize;
    let nd = 1 + (k % 3) as usize;
    gen_random_instance(seed, nf, nd, &RandomParams { open_cost: (0, 10), capacity: (1, 3), grid: 3 })
}

/// Larger capacities, where gap-style infeasibility and hence cuts are common.
pub fn cut_battery_instance(base: u64, k: u64) -> Instance {
    let seed = base.wrapping_mul(9_000_011).wrapping_add(k);
    let nf = 2 + (k % 2) as usize;
    let nd = 5 + (k % 4) as usize;
    let grid = if k.is_multiple_of(3) { 2 } else { 0 };
    gen_random_instance(seed, nf, nd, &RandomParams { open_cost: (0, 40), capacity: (5, 8), grid })
}

struct Run {
    name: String,
    inst: Instance,
    result: Result<Solved, SolveError>,
    opt: Option<Rational>,
}

fn run_all(cfg: &SuiteConfig, named: Vec<(String, Instance)>) -> (Vec<Run>, Duration) {
    let solve_cfg =
        SolveConfig { max_iters: cfg.max_iters, softcap: cfg.softcap, oracle: false, ..SolveConfig::default() };
    let start = Instant::now();
    let runs = batch::map(cfg.exec, &named, |(name, inst)| Run {
        name: name.clone(),
        inst: inst.clone(),
        result: solve(inst, &solve_cfg),
        opt: exact_opt(inst).ok().map(|o| o.value),
    });
    (runs, start.elapsed())
}

fn solved(run: &Run) -> Option<&Solved> {
    run.result.as_ref().ok()
}

fn row(run: &Run) -> InstanceRow {
    let s = solved(run);
    InstanceRow {
        name: run.name.clone(),
        facilities: run.inst.nf(),
        clients: run.inst.nd(),
        standard_lp: s.map(|s| s.report.standard_lp.value.clone()),
        lower_bound: s.map(|s| s.report.lower_bound.value.clone()),
        cost: s.and_then(|s| s.report.cost.as_ref().map(|c| c.value.clone())),
        exact_opt: run.opt.clone(),
        cuts: s.map_or(0, |s| s.cuts.len()),
        error: run.result.as_ref().err().map(ToString::to_string),
    }
}

fn criterion(id: u32, title: &'static str, failures: &[String], ok_detail: String) -> CriterionResult {
    let passed = failures.is_empty();
    let detail = if passed {
        ok_detail
    } else {
        let shown: Vec<&str> = failures.iter().take(8).map(String::as_str).collect();
        let more = if failures.len() > 8 { format!(" (+{} more)", failures.len() - 8) } else { String::new() };
        format!("{}{more}", shown.join("; "))
    };
    CriterionResult { id, title, passed, detail }
}

fn gap_criterion(gap: &[Run], elapsed: Duration) -> CriterionResult {
    let mut failures = Vec::new();
    let mut lp_values = Vec::new();
    for (run, &n) in gap.iter().zip(GAP_SIZES.iter()) {
        let expected = Rational::new(1, n as i64 + 1);
        match solved(run) {
            Some(s) => {
                let lp = &s.report.standard_lp.value;
                lp_values.push(lp.to_string());
                if *lp != expected {
                    failures.push(format!("n={n}: standard-LP value {lp}, expected {expected}"));
                }
                if s.report.cost.as_ref().map(|c| &c.value) != Some(&Rational::one()) {
                    failures
                        .push(format!("n={n}: solve cost {:?}", s.report.cost.as_ref().map(|c| c.value.to_string())));
                }
                if n >= 5 && (s.cuts.is_empty() || s.traces.first().is_none_or(|t| t.network_feasible)) {
                    failures.push(format!("n={n}: no cut before success or first network feasible"));
                }
            }
            None => failures.push(format!("n={n}: {}", run.result.as_ref().err().unwrap())),
        }
        if run.opt.as_ref() != Some(&Rational::one()) {
            failures.push(format!("n={n}: exact_opt {:?}", run.opt.as_ref().map(ToString::to_string)));
        }
    }
    if elapsed >= GAP_TIME_LIMIT {
        failures.push(format!("runtime {elapsed:?} over {GAP_TIME_LIMIT:?}"));
    }
    criterion(
        1,
        "gap family",
        &failures,
        format!("standard LP {}, OPT = C = 1, cuts before success for n >= 5", lp_values.join(", ")),
    )
}

fn semi_criterion(runs: &[&Run]) -> CriterionResult {
    let mut failures = Vec::new();
    let mut checked = 0;
    for run in runs {
        match solved(run) {
            Some(s) => {
                for t in &s.traces {
                    if t.semi_cost.is_some() {
                        checked += 1;
                        if t.cost_bound_holds != Some(true) {
                            failures
                                .push(format!("{}: semi cost {:?} vs point {}", run.name, t.semi_cost, t.point_cost));
                        }
                        if let Some(v) = &t.semi_violation {
                            failures.push(format!("{}: {v}", run.name));
                        }
                    }
                }
            }
            None => failures.push(format!("{}: {}", run.name, run.result.as_ref().err().unwrap())),
        }
    }
    criterion(2, "semi-integral cost within 8x", &failures, format!("{checked} semi-integral solutions checked"))
}

fn relaxation_criterion(cfg: &SuiteConfig) -> CriterionResult {
    let instances: Vec<Instance> = (0..RELAXATION_COUNT).map(|k| relaxation_instance(cfg.seed, k)).collect();
    let results = batch::map(cfg.exec, &instances, |inst| -> Result<usize, String> {
        let sols = enumerate_feasible_solutions(inst, ENUMERATION_LIMIT).ok_or("enumeration limit")?;
        let gs = enumerate_valid_integral_g(inst).map_err(|e| e.to_string())?;
        let mut checks = 0;
        for sol in &sols {
            let point = sol.to_fractional(inst);
            for g in &gs {
                let net = build_mfn(inst, g, &point.x, &point.y).map_err(|e| e.to_string())?;
                if !check_mfn_feasible(&net).map_err(|e| e.to_string())?.is_feasible() {
                    return Err(format!("infeasible at open {:?} assign {:?} g {}", sol.open, sol.assign, g.digest()));
                }
                checks += 1;
            }
        }
        Ok(checks)
    });
    let mut failures = Vec::new();
    let mut total = 0;
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(n) => total += n,
            Err(e) => failures.push(format!("instance {k}: {e}")),
        }
    }
    criterion(
        3,
        "relaxation property",
        &failures,
        format!("{RELAXATION_COUNT} instances, {total} (solution, g) pairs feasible"),
    )
}

fn cut_criterion(cfg: &SuiteConfig, runs: &[&Run], battery: &[Run]) -> CriterionResult {
    let records: Vec<(&Run, usize)> = runs
        .iter()
        .copied()
        .chain(battery.iter())
        .filter_map(|r| solved(r).map(|s| (r, s.cuts.len())))
        .flat_map(|(r, n)| (0..n).map(move |k| (r, k)))
        .collect();
    let results = batch::map(cfg.exec, &records, |(run, k)| -> Result<bool, String> {
        let rec = &solved(run).unwrap().cuts[*k];
        if rec.cut.is_satisfied_by(&rec.iterate) {
            return Err(format!("{}: cut {k} not violated by its iterate", run.name));
        }
        let Some(sols) = enumerate_feasible_solutions(&run.inst, ENUMERATION_LIMIT) else { return Ok(false) };
        match sols.iter().find(|s| !rec.cut.is_satisfied_by(&s.to_fractional(&run.inst))) {
            Some(s) => Err(format!("{}: cut {k} excludes integral open {:?} assign {:?}", run.name, s.open, s.assign)),
            None => Ok(true),
        }
    });
    let mut failures = Vec::new();
    let mut enumerated = 0;
    for r in &results {
        match r {
            Ok(true) => enumerated += 1,
            Ok(false) => {}
            Err(e) => failures.push(e.clone()),
        }
    }
    let from_main: usize = runs.iter().filter_map(|r| solved(r)).map(|s| s.cuts.len()).sum();
    let errors: Vec<String> =
        battery.iter().filter_map(|r| r.result.as_ref().err().map(|e| format!("{}: {e}", r.name))).collect();
    failures.extend(errors);
    criterion(
        4,
        "cut soundness",
        &failures,
        format!(
            "{} cuts ({from_main} from gap/random runs, {} from the supplementary battery), {enumerated} checked against all integral solutions",
            records.len(),
            records.len() - from_main
        ),
    )
}

fn property_criterion(runs: &[&Run]) -> CriterionResult {
    let mut failures = Vec::new();
    let mut count = 0;
    for run in runs {
        for t in solved(run).map(|s| s.traces.as_slice()).unwrap_or_default() {
            count += 1;
            for v in t.property_violations.iter().chain(&t.demand_half_violations) {
                failures.push(format!("{}: {v}", run.name));
            }
        }
    }
    criterion(5, "max-flow properties", &failures, format!("{count} b-matchings checked"))
}

fn constrained_criterion(runs: &[&Run]) -> CriterionResult {
    let mut failures = Vec::new();
    let mut count = 0;
    for run in runs {
        if let Err(SolveError::ConstrainedFlowInfeasible) = &run.result {
            failures.push(format!("{}: half-demand flow infeasible", run.name));
        }
        for t in solved(run).map(|s| s.traces.as_slice()).unwrap_or_default() {
            if t.raised_feasible == Some(true) {
                count += 1;
                if t.constrained_feasible != Some(true) {
                    failures.push(format!("{}: half-demand flow infeasible", run.name));
                }
            }
            if t.raised_feasible == Some(false) {
                failures.push(format!("{}: raised network infeasible", run.name));
            }
        }
    }
    criterion(
        6,
        "half-demand constrained flow",
        &failures,
        format!("{count} feasible base networks, all augmented LPs feasible"),
    )
}

fn summarize(mut ratios: Vec<Rational>) -> RatioSummary {
    ratios.sort();
    let count = ratios.len();
    let optimal = ratios.iter().filter(|r| **r == Rational::one()).count();
    let mean = (count > 0).then(|| ratios.iter().sum::<Rational>() / Rational::from(count));
    RatioSummary {
        count,
        min: ratios.first().cloned(),
        median: ratios.get(count / 2).cloned(),
        max: ratios.last().cloned(),
        mean,
        optimal,
    }
}

fn quality_criterion(random: &[Run], elapsed: Duration) -> (CriterionResult, RatioSummary) {
    let mut failures = Vec::new();
    let mut ratios = Vec::new();
    for run in random {
        let Some(s) = solved(run) else {
            failures.push(format!("{}: {}", run.name, run.result.as_ref().err().unwrap()));
            continue;
        };
        let (Some(cost), Some(opt)) = (s.report.cost.as_ref(), run.opt.as_ref()) else {
            failures.push(format!("{}: no integral solution or no oracle value", run.name));
            continue;
        };
        if !s.report.checks.solution_feasible {
            failures.push(format!("{}: infeasible integral solution", run.name));
        }
        if cost.value < *opt {
            failures.push(format!("{}: cost {} below exact optimum {opt}", run.name, cost.value));
        }
        if opt.is_zero() {
            if !cost.value.is_zero() {
                failures.push(format!("{}: positive cost on a zero-optimum instance", run.name));
            }
            continue;
        }
        let ratio = &cost.value / opt;
        if ratio > Rational::from_int(RATIO_LIMIT) {
            failures.push(format!("{}: ratio {ratio}", run.name));
        }
        ratios.push(ratio);
    }
    if elapsed >= RANDOM_TIME_LIMIT {
        failures.push(format!("runtime {elapsed:?} over {RANDOM_TIME_LIMIT:?}"));
    }
    let summary = summarize(ratios);
    let detail = format!(
        "{} instances, ratio min {} median {} max {}, {} optimal",
        summary.count,
        summary.min.as_ref().map_or("-".into(), |r| r.to_decimal_string(4)),
        summary.median.as_ref().map_or("-".into(), |r| r.to_decimal_string(4)),
        summary.max.as_ref().map_or("-".into(), |r| r.to_decimal_string(4)),
        summary.optimal
    );
    (criterion(7, "end-to-end quality vs exact optimum", &failures, detail), summary)
}

/// Every facility subset `A` of the (3,2,2)/demand-4 knapsack with `U(A) <= 4`.
pub fn knapsack_criterion() -> CriterionResult {
    let one = Rational::one();
    let inst = gen_knapsack_instance(&[3, 2, 2], &[one.clone(), one.clone(), one], 4).expect("valid knapsack");
    let mut failures = Vec::new();
    let mut checked = 0;
    for mask in 0u32..8 {
        let subset: Vec<usize> = (0..3).filter(|b| mask >> b & 1 == 1).collect();
        let held: u64 = subset.iter().map(|&i| inst.capacity(i)).sum();
        if held > 4 {
            continue;
        }
        checked += 1;
        let rest = 4 - held;
        let cut = match knapsack_cover_cut(&inst, &subset) {
            Ok(c) => c,
            Err(e) => {
                failures.push(format!("A={subset:?}: {e}"));
                continue;
            }
        };
        for i in 0..3 {
            let expected = if subset.contains(&i) { 0 } else { inst.capacity(i).min(rest) };
            if cut.y[i] != Rational::from(expected) {
                failures.push(format!("A={subset:?}: y{} coefficient {} expected {expected}", i + 1, cut.y[i]));
            }
        }
        if cut.x.iter().flatten().any(|c| !c.is_zero()) {
            failures.push(format!("A={subset:?}: nonzero x coefficient"));
        }
        if cut.rhs != Rational::from(rest) {
            failures.push(format!("A={subset:?}: rhs {} expected {rest}", cut.rhs));
        }
        let mut g = PartialAssignment::zero(3, 4);
        let mut next = 0;
        for &i in &subset {
            for _ in 0..inst.capacity(i) {
                g.g[i][next] = Rational::one();
                next += 1;
            }
        }
        let zeros = vec![vec![Rational::zero(); 4]; 3];
        let net =
            build_mfn(&inst, &g, &zeros, &[Rational::zero(), Rational::zero(), Rational::zero()]).expect("network");
        if !dual_point_feasible(&net, &cut.provenance.z, &cut.provenance.l) {
            failures.push(format!("A={subset:?}: (z, l) violates the dual constraints"));
        }
    }
    criterion(8, "knapsack-cover agreement", &failures, format!("{checked} subsets match min(U_i, 4 - U(A)) and rhs"))
}

fn dominance_criterion(all: &[&Run]) -> CriterionResult {
    let mut failures = Vec::new();
    for run in all {
        let Some(s) = solved(run) else {
            failures.push(format!("{}: {}", run.name, run.result.as_ref().err().unwrap()));
            continue;
        };
        match standard_lp_value(&run.inst) {
            Ok(std) => {
                if s.master_values.first() != Some(&std.value) {
                    failures.push(format!("{}: iteration-0 master differs from standard LP {}", run.name, std.value));
                }
            }
            Err(e) => failures.push(format!("{}: {e}", run.name)),
        }
        if !s.master_values.windows(2).all(|w| w[0] <= w[1]) {
            failures.push(format!("{}: master value decreased", run.name));
        }
    }
    criterion(9, "standard-LP dominance", &failures, format!("{} runs, master values nondecreasing", all.len()))
}

/// Runs every criterion.
pub fn run_suite(cfg: &SuiteConfig) -> SuiteReport {
    let gap_named: Vec<(String, Instance)> =
        GAP_SIZES.iter().map(|&n| (format!("gap{n}"), gen_gap_instance(n))).collect();
    let random_named: Vec<(String, Instance)> =
        (0..RANDOM_COUNT).map(|k| (format!("random{k}"), random_instance(cfg.seed, k))).collect();
    let battery_named: Vec<(String, Instance)> =
        (0..CUT_BATTERY_COUNT).map(|k| (format!("cutbattery{k}"), cut_battery_instance(cfg.seed, k))).collect();

    let (gap, gap_time) = run_all(cfg, gap_named);
    let (random, random_time) = run_all(cfg, random_named);
    let (battery, _) = run_all(cfg, battery_named);
    let main: Vec<&Run> = gap.iter().chain(random.iter()).collect();
    let everything: Vec<&Run> = main.iter().copied().chain(battery.iter()).collect();

    let (quality, ratios) = quality_criterion(&random, random_time);
    let criteria = vec![
        gap_criterion(&gap, gap_time),
        semi_criterion(&main),
        relaxation_criterion(cfg),
        cut_criterion(cfg, &main, &battery),
        property_criterion(&everything),
        constrained_criterion(&everything),
        quality,
        knapsack_criterion(),
        dominance_criterion(&everything),
    ];
    SuiteReport {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        criteria,
        ratios,
        instances: everything.iter().map(|r| row(r)).collect(),
    }
}
