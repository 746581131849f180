//! Cutting-plane driver: a master LP over the standard assignment rows plus
//! generated cuts, the relaxed separation step, and final rounding.

use serde::Serialize;
use thiserror::Error;

use crate::instances::{
    check_feasible_integral, exact_opt, fractional_cost, FractionalSolution, Instance, InstanceError, SolutionFile,
};
use crate::lp::{solve_lp, Direction, LinearProgram, LpError, LpStatus, Sense};
use crate::matching::{
    build_partial_assignment, check_demand_half, check_maxflow_properties, max_fractional_bmatching,
    residual_reachability, PropertyViolation,
};
use crate::mfn::{build_mfn, check_mfn_feasible, find_violated_cut, Cut, MfnError, SerializedCut};
use crate::rational::Rational;
use crate::rounding::{
    build_semi_integral, round_semi_integral, solve_constrained_flow, threshold_open, validate_semi_integral,
    RoundingError, SemiIntegralSolution, SemiViolation, SoftCapBackend,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("LP failure: {0}")]
    Lp(#[from] LpError),
    #[error(transparent)]
    Network(#[from] MfnError),
    #[error(transparent)]
    Rounding(#[from] RoundingError),
    #[error("master LP is infeasible: total capacity cannot serve every client")]
    InfeasibleMaster,
    #[error("half-demand flow infeasible although the raised network is feasible")]
    ConstrainedFlowInfeasible,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveConfig {
    pub max_iters: usize,
    pub softcap: SoftCapBackend,
    /// Opening values at or above this are rounded up to 1.
    pub threshold: Rational,
    /// Edge capacities of the b-matching are `edge_factor * x*`.
    pub edge_factor: Rational,
    /// Compute the exact optimum for ratio reporting when the instance allows it.
    pub oracle: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_iters: 200,
            softcap: SoftCapBackend::Exact,
            threshold: Rational::new(1, 4),
            edge_factor: Rational::from_int(2),
            oracle: true,
        }
    }
}

fn x_var(inst: &Instance, i: usize, j: usize) -> usize {
    i * inst.nd() + j
}

fn y_var(inst: &Instance, i: usize) -> usize {
    inst.nf() * inst.nd() + i
}

/// The standard relaxation: `x_ij <= y_i`, `sum_i x_ij = 1`, `sum_j x_ij <= U_i y_i`,
/// `0 <= x`, `0 <= y <= 1`.
pub fn standard_lp(inst: &Instance) -> LinearProgram {
    let (nf, nd) = (inst.nf(), inst.nd());
    let mut lp = LinearProgram::new(Direction::Minimize);
    for i in 0..nf {
        for j in 0..nd {
            let v = lp.add_nonneg(format!("x_{}_{}", inst.facility(i).id, inst.clients()[j]));
            lp.set_objective_coef(v, inst.dist(i, j).clone());
        }
    }
    for i in 0..nf {
        let v = lp.add_var(format!("y_{}", inst.facility(i).id), Some(Rational::zero()), Some(Rational::one()));
        lp.set_objective_coef(v, inst.open_cost(i).clone());
    }
    for i in 0..nf {
        for j in 0..nd {
            lp.add_constraint(
                format!("open_{i}_{j}"),
                vec![(x_var(inst, i, j), Rational::one()), (y_var(inst, i), -Rational::one())],
                Sense::Le,
                Rational::zero(),
            );
        }
    }
    for j in 0..nd {
        lp.add_constraint(
            format!("assign_{j}"),
            (0..nf).map(|i| (x_var(inst, i, j), Rational::one())).collect(),
            Sense::Eq,
            Rational::one(),
        );
    }
    for i in 0..nf {
        let mut terms: Vec<(usize, Rational)> = (0..nd).map(|j| (x_var(inst, i, j), Rational::one())).collect();
        terms.push((y_var(inst, i), -Rational::from(inst.capacity(i))));
        lp.add_constraint(format!("cap_{i}"), terms, Sense::Le, Rational::zero());
    }
    lp
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MasterSolution {
    pub point: FractionalSolution,
    pub value: Rational,
}

fn add_cut(inst: &Instance, lp: &mut LinearProgram, k: usize, cut: &Cut) {
    let mut terms = Vec::new();
    for i in 0..inst.nf() {
        for j in 0..inst.nd() {
            if !cut.x[i][j].is_zero() {
                terms.push((x_var(inst, i, j), cut.x[i][j].clone()));
            }
        }
        if !cut.y[i].is_zero() {
            terms.push((y_var(inst, i), cut.y[i].clone()));
        }
    }
    lp.add_constraint(format!("cut_{k}"), terms, Sense::Ge, cut.rhs.clone());
}

/// Optimal vertex of the standard rows plus `cuts`.
pub fn solve_master(inst: &Instance, cuts: &[Cut]) -> Result<MasterSolution, SolveError> {
    let mut lp = standard_lp(inst);
    for (k, cut) in cuts.iter().enumerate() {
        add_cut(inst, &mut lp, k, cut);
    }
    let res = solve_lp(&lp)?;
    if res.status != LpStatus::Optimal {
        return Err(SolveError::InfeasibleMaster);
    }
    let (nf, nd) = (inst.nf(), inst.nd());
    let x = (0..nf).map(|i| (0..nd).map(|j| res.primal[x_var(inst, i, j)].clone()).collect()).collect();
    let y = (0..nf).map(|i| res.primal[y_var(inst, i)].clone()).collect();
    Ok(MasterSolution { point: FractionalSolution { x, y }, value: res.objective })
}

/// Optimum of the standard relaxation alone.
pub fn standard_lp_value(inst: &Instance) -> Result<MasterSolution, SolveError> {
    solve_master(inst, &[])
}

/// Everything checked during one separation call.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SeparationTrace {
    pub large: Vec<usize>,
    pub matching_value: Rational,
    pub reachable_facilities: Vec<usize>,
    pub reachable_clients: Vec<usize>,
    pub property_violations: Vec<PropertyViolation>,
    pub demand_half_violations: Vec<PropertyViolation>,
    pub g_digest: String,
    pub demands: Vec<Rational>,
    pub network_feasible: bool,
    /// MFN(g*, x*, y') after thresholding; only evaluated when the network is feasible.
    pub raised_feasible: Option<bool>,
    pub constrained_feasible: Option<bool>,
    pub semi_violation: Option<SemiViolation>,
    pub point_cost: Rational,
    pub semi_cost: Option<Rational>,
    /// `c(x̂, ŷ) <= 8 c(x*, y*)`.
    pub cost_bound_holds: Option<bool>,
}

impl SeparationTrace {
    pub fn properties_ok(&self) -> bool {
        self.property_violations.is_empty() && self.demand_half_violations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Separation {
    Cut(Box<Cut>),
    SemiIntegral(Box<SemiIntegralSolution>),
}

/// One round of the relaxed separation oracle at `(x*, y*)`.
pub fn relaxed_separation(
    inst: &Instance,
    point: &FractionalSolution,
    cfg: &SolveConfig,
) -> Result<(Separation, SeparationTrace), SolveError> {
    let (nf, nd) = (inst.nf(), inst.nd());
    let th = threshold_open(&point.y, &cfg.threshold);
    let edge_caps: Vec<Vec<Rational>> =
        point.x.iter().map(|row| row.iter().map(|v| &cfg.edge_factor * v).collect()).collect();
    let caps: Vec<u64> = (0..nf).map(|i| inst.capacity(i)).collect();
    let bm = max_fractional_bmatching(&th.large, &edge_caps, &caps);
    let rs = residual_reachability(&bm);
    let property_violations = check_maxflow_properties(&bm, &rs);
    let g = build_partial_assignment(&bm, &rs);
    g.validate(inst).map_err(MfnError::from)?;
    let demand_half_violations = check_demand_half(&bm, &rs, &g);
    let point_cost = fractional_cost(inst, &point.x, &point.y);

    let net = build_mfn(inst, &g, &point.x, &point.y)?;
    let network_feasible = check_mfn_feasible(&net)?.is_feasible();
    let mut trace = SeparationTrace {
        large: (0..nf).filter(|&i| th.large[i]).collect(),
        matching_value: bm.value(),
        reachable_facilities: rs.facility_ids(),
        reachable_clients: rs.client_ids(),
        property_violations,
        demand_half_violations,
        g_digest: g.digest(),
        demands: g.demands(),
        network_feasible,
        raised_feasible: None,
        constrained_feasible: None,
        semi_violation: None,
        point_cost: point_cost.clone(),
        semi_cost: None,
        cost_bound_holds: None,
    };
    if !network_feasible {
        let cut = find_violated_cut(inst, &g, &point.x, &point.y)?;
        return Ok((Separation::Cut(Box::new(cut)), trace));
    }

    let raised = build_mfn(inst, &g, &point.x, &th.y)?;
    trace.raised_feasible = Some(check_mfn_feasible(&raised)?.is_feasible());
    let small = th.small();
    let cf = solve_constrained_flow(inst, &g, &point.x, &th.y, &small)?;
    trace.constrained_feasible = Some(cf.is_some());
    let Some(cf) = cf else {
        return Err(SolveError::ConstrainedFlowInfeasible);
    };
    let semi = build_semi_integral(&g, &cf, &point.y, &th.large)?;
    trace.semi_violation = validate_semi_integral(inst, &semi.x, &semi.y).err();
    let semi_cost = semi.cost(inst);
    trace.cost_bound_holds = Some(semi_cost <= Rational::from_int(8) * &point_cost);
    trace.semi_cost = Some(semi_cost);
    debug_assert_eq!(nd, semi.x.first().map_or(0, Vec::len));
    Ok((Separation::SemiIntegral(Box::new(semi)), trace))
}

/// An exact value with a decimal rendering for reading.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Exact {
    pub value: Rational,
    pub decimal: String,
}

impl From<&Rational> for Exact {
    fn from(v: &Rational) -> Self {
        Exact { value: v.clone(), decimal: v.to_decimal_string(6) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub master_value: Exact,
    pub outcome: &'static str,
    pub cut: Option<SerializedCut>,
    /// Cut left-hand side at the iterate (strictly below the right-hand side).
    pub cut_lhs_at_iterate: Option<Rational>,
    pub trace: SeparationTrace,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundingSummary {
    pub semi_cost: Exact,
    pub softcap_backend: SoftCapBackend,
    pub softcap_open: Vec<String>,
    pub softcap_cost: Exact,
    pub softcap_lp_cost: Exact,
    pub concatenated_assignment_cost: Exact,
    pub final_assignment_cost: Exact,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Checks {
    pub cuts_strictly_violated: bool,
    pub master_nondecreasing: bool,
    pub matching_properties: bool,
    pub semi_integral_valid: bool,
    pub cost_bound: bool,
    pub raised_feasible: bool,
    pub solution_feasible: bool,
    pub cost_at_least_lower_bound: bool,
}

impl Checks {
    pub fn all(&self) -> bool {
        self.cuts_strictly_violated
            && self.master_nondecreasing
            && self.matching_properties
            && self.semi_integral_valid
            && self.cost_bound
            && self.raised_feasible
            && self.solution_feasible
            && self.cost_at_least_lower_bound
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Solved,
    IterationCap,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SolveReport {
    pub schema_version: u32,
    pub facilities: usize,
    pub clients: usize,
    pub status: SolveStatus,
    pub standard_lp: Exact,
    pub lower_bound: Exact,
    pub cost: Option<Exact>,
    pub solution: Option<SolutionFile>,
    pub exact_opt: Option<Exact>,
    pub ratio_cost_to_lower_bound: Option<Exact>,
    pub ratio_cost_to_opt: Option<Exact>,
    pub cuts_added: usize,
    pub iterations: Vec<IterationLog>,
    pub rounding: Option<RoundingSummary>,
    pub checks: Checks,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// A generated cut with the iterate that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutRecord {
    pub cut: Cut,
    pub iterate: FractionalSolution,
}

#[derive(Clone, Debug)]
pub struct Solved {
    pub report: SolveReport,
    pub cuts: Vec<CutRecord>,
    pub master_values: Vec<Rational>,
    pub traces: Vec<SeparationTrace>,
    pub semi: Option<SemiIntegralSolution>,
}

fn ratio(a: &Rational, b: &Rational) -> Option<Exact> {
    (!b.is_zero()).then(|| Exact::from(&(a / b)))
}

/// Master loop: solve, separate, add the cut or round and stop.
pub fn solve(inst: &Instance, cfg: &SolveConfig) -> Result<Solved, SolveError> {
    let standard = standard_lp_value(inst)?;
    let mut cuts: Vec<CutRecord> = Vec::new();
    let mut logs = Vec::new();
    let mut master_values = Vec::new();
    let mut traces = Vec::new();
    let mut outcome = None;
    for iteration in 0..cfg.max_iters {
        let pool: Vec<Cut> = cuts.iter().map(|c| c.cut.clone()).collect();
        let master = solve_master(inst, &pool)?;
        master_values.push(master.value.clone());
        let (sep, trace) = relaxed_separation(inst, &master.point, cfg)?;
        log::debug!("iteration {iteration}: master {} network feasible {}", master.value, trace.network_feasible);
        traces.push(trace.clone());
        match sep {
            Separation::Cut(cut) => {
                logs.push(IterationLog {
                    iteration,
                    master_value: Exact::from(&master.value),
                    outcome: "cut",
                    cut: Some(cut.to_serialized(inst)),
                    cut_lhs_at_iterate: Some(cut.lhs(&master.point.x, &master.point.y)),
                    trace,
                });
                cuts.push(CutRecord { cut: *cut, iterate: master.point });
            }
            Separation::SemiIntegral(semi) => {
                logs.push(IterationLog {
                    iteration,
                    master_value: Exact::from(&master.value),
                    outcome: "semi-integral",
                    cut: None,
                    cut_lhs_at_iterate: None,
                    trace,
                });
                outcome = Some((master.value, *semi));
                break;
            }
        }
    }

    let lower = master_values.last().cloned().unwrap_or_else(|| standard.value.clone());
    let opt = if cfg.oracle && inst.nf() <= 12 { Some(exact_opt(inst)?.value) } else { None };
    let mut checks = Checks {
        cuts_strictly_violated: cuts.iter().all(|c| !c.cut.is_satisfied_by(&c.iterate)),
        master_nondecreasing: master_values.windows(2).all(|w| w[0] <= w[1]),
        matching_properties: traces.iter().all(SeparationTrace::properties_ok),
        semi_integral_valid: traces.iter().all(|t| t.semi_violation.is_none()),
        cost_bound: traces.iter().all(|t| t.cost_bound_holds != Some(false)),
        raised_feasible: traces.iter().all(|t| t.raised_feasible != Some(false)),
        solution_feasible: false,
        cost_at_least_lower_bound: false,
    };
    let mut report = SolveReport {
        schema_version: SCHEMA_VERSION,
        facilities: inst.nf(),
        clients: inst.nd(),
        status: SolveStatus::IterationCap,
        standard_lp: Exact::from(&standard.value),
        lower_bound: Exact::from(&lower),
        cost: None,
        solution: None,
        exact_opt: opt.as_ref().map(Exact::from),
        ratio_cost_to_lower_bound: None,
        ratio_cost_to_opt: None,
        cuts_added: cuts.len(),
        iterations: logs,
        rounding: None,
        checks: checks.clone(),
    };
    let Some((_, semi)) = outcome else {
        log::warn!("iteration cap {} reached; best lower bound {}", cfg.max_iters, lower);
        return Ok(Solved { report, cuts, master_values, traces, semi: None });
    };

    let rounded = round_semi_integral(inst, &semi, cfg.softcap)?;
    checks.solution_feasible = check_feasible_integral(inst, &rounded.solution);
    checks.cost_at_least_lower_bound = rounded.cost >= lower;
    report.status = SolveStatus::Solved;
    report.cost = Some(Exact::from(&rounded.cost));
    report.solution = Some(rounded.solution.to_file(inst));
    report.ratio_cost_to_lower_bound = ratio(&rounded.cost, &lower);
    report.ratio_cost_to_opt = opt.as_ref().and_then(|o| ratio(&rounded.cost, o));
    report.rounding = Some(RoundingSummary {
        semi_cost: Exact::from(&semi.cost(inst)),
        softcap_backend: rounded.soft_cap.backend,
        softcap_open: rounded.soft_cap.open.iter().map(|&i| inst.facility(i).id.clone()).collect(),
        softcap_cost: Exact::from(&rounded.soft_cap.cost),
        softcap_lp_cost: Exact::from(&rounded.soft_cap.lp_cost),
        concatenated_assignment_cost: Exact::from(&rounded.concatenated_assignment_cost),
        final_assignment_cost: Exact::from(&rounded.final_assignment_cost),
    });
    report.checks = checks;
    Ok(Solved { report, cuts, master_values, traces, semi: Some(semi) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_gap_instance, gen_random_instance, Facility, RandomParams};
    use crate::rational::q;

    fn r(n: i64) -> Rational {
        Rational::from_int(n)
    }

    #[test]
    fn standard_lp_on_gap_is_one_over_n() {
        for n in [2i64, 5, 10] {
            let m = standard_lp_value(&gen_gap_instance(n as u64)).unwrap();
            assert_eq!(m.value, q(1, n), "n = {n}");
            assert_eq!(m.point.y[1], q(1, n));
        }
    }

    #[test]
    fn forced_cut_lifts_master_to_one() {
        let inst = gen_gap_instance(5);
        let m = standard_lp_value(&inst).unwrap();
        let (sep, trace) = relaxed_separation(&inst, &m.point, &SolveConfig::default()).unwrap();
        assert!(!trace.network_feasible);
        assert!(trace.properties_ok());
        let Separation::Cut(cut) = sep else { panic!("expected a cut") };
        assert!(!cut.is_satisfied_by(&m.point));
        let lifted = solve_master(&inst, &[*cut]).unwrap();
        assert_eq!(lifted.value, r(1));
        assert_eq!(lifted.point.y[1], r(1));
    }

    #[test]
    fn single_facility_master() {
        let inst = Instance::new(
            vec![Facility { id: "f".into(), open_cost: q(7, 3), capacity: 3 }],
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![r(0); 4]; 4],
        )
        .unwrap();
        assert_eq!(standard_lp_value(&inst).unwrap().value, q(7, 3));
    }

    #[test]
    fn gap2_separation_is_semi_integral() {
        let inst = gen_gap_instance(2);
        let m = standard_lp_value(&inst).unwrap();
        assert_eq!(m.point.y, vec![r(1), q(1, 2)]);
        let (sep, trace) = relaxed_separation(&inst, &m.point, &SolveConfig::default()).unwrap();
        let Separation::SemiIntegral(semi) = sep else { panic!("expected semi-integral") };
        assert_eq!(trace.large, vec![0, 1]);
        assert!(trace.demands.iter().all(Rational::is_zero));
        assert_eq!(semi.y, vec![r(1), r(1)]);
        assert_eq!(semi.cost(&inst), r(1));
        assert_eq!(trace.cost_bound_holds, Some(true));
    }

    #[test]
    fn integral_point_separates_to_semi_integral() {
        let coords = [0i64, 2, 0, 2];
        let metric = coords.iter().map(|a| coords.iter().map(|b| r((a - b).abs())).collect()).collect();
        let t = Instance::new(
            vec![
                Facility { id: "a".into(), open_cost: r(1), capacity: 1 },
                Facility { id: "b".into(), open_cost: r(3), capacity: 2 },
            ],
            vec!["p".into(), "q".into()],
            metric,
        )
        .unwrap();
        let point = crate::instances::IntegralSolution { open: vec![0, 1], assign: vec![0, 1] }.to_fractional(&t);
        let (sep, trace) = relaxed_separation(&t, &point, &SolveConfig::default()).unwrap();
        assert!(matches!(sep, Separation::SemiIntegral(_)));
        assert_eq!(trace.semi_violation, None);
        let solved = solve(&t, &SolveConfig::default()).unwrap();
        let cost = solved.report.cost.unwrap().value;
        assert!(cost >= r(4) && cost <= r(5));
        assert!(solved.report.checks.all());
    }

    #[test]
    fn gap_solves_to_one() {
        let two = solve(&gen_gap_instance(2), &SolveConfig::default()).unwrap();
        assert_eq!(two.report.cost.as_ref().unwrap().value, r(1));
        assert_eq!(two.report.cuts_added, 0);
        let five = solve(&gen_gap_instance(5), &SolveConfig::default()).unwrap();
        assert_eq!(five.report.cost.as_ref().unwrap().value, r(1));
        assert!(five.report.cuts_added >= 1);
        assert!(!five.traces[0].network_feasible);
        assert!(five.report.checks.all());
    }

    #[test]
    fn iteration_cap_is_a_diagnostic() {
        let cfg = SolveConfig { max_iters: 1, ..SolveConfig::default() };
        let s = solve(&gen_gap_instance(5), &cfg).unwrap();
        assert_eq!(s.report.status, SolveStatus::IterationCap);
        assert!(s.report.cost.is_none());
        assert_eq!(s.report.lower_bound.value, q(1, 5));
    }

    #[test]
    fn reports_are_deterministic() {
        let inst = gen_random_instance(3, 3, 5, &RandomParams::default());
        let a = solve(&inst, &SolveConfig::default()).unwrap().report.to_json();
        let b = solve(&inst, &SolveConfig::default()).unwrap().report.to_json();
        assert_eq!(a, b);
    }
}
