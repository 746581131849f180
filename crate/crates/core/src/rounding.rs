//! From a fractional point whose network is feasible to an integral solution:
//! thresholding, the half-demand constrained flow, semi-integral construction,
//! the soft-capacitated residual step and the final integral assignment.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instances::{fractional_cost, Instance, IntegralSolution};
use crate::lp::{solve_lp, Direction, LinearProgram, LpError, LpStatus, Sense};
use crate::matching::{min_cost_integral_bmatching, CapacityShort};
use crate::mfn::{build_mfn, solve_multiflow, HalfDemandRows, MfnError, MfnFeasibility, MultiFlow, PartialAssignment};
use crate::rational::Rational;

#[derive(Debug, Error)]
pub enum RoundingError {
    #[error(transparent)]
    Network(#[from] MfnError),
    #[error("LP failure: {0}")]
    Lp(#[from] LpError),
    #[error("semi-integral input rejected: {0}")]
    NotSemiIntegral(SemiViolation),
    #[error("residual facilities cannot hold the residual demand")]
    ResidualShort,
    #[error("final assignment failed: {0}")]
    Assignment(#[from] CapacityShort),
    #[error("{0}")]
    Invariant(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Threshold {
    pub y: Vec<Rational>,
    /// `I`: facilities raised to 1.
    pub large: Vec<bool>,
}

impl Threshold {
    pub fn small(&self) -> Vec<bool> {
        self.large.iter().map(|b| !b).collect()
    }
}

/// Raises every `y_i >= threshold` to 1.
pub fn threshold_open(y: &[Rational], threshold: &Rational) -> Threshold {
    let large: Vec<bool> = y.iter().map(|v| v >= threshold).collect();
    let y = y.iter().zip(&large).map(|(v, &l)| if l { Rational::one() } else { v.clone() }).collect();
    Threshold { y, large }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConstrainedFlow {
    pub flow: MultiFlow,
    /// `h[i][j]`: commodity-`j` flow on `(i, i')`.
    pub h: Vec<Vec<Rational>>,
    /// `h(S, j)`.
    pub h_small: Vec<Rational>,
}

/// Multi-commodity flow for MFN(g, x, y') with `h(S, j) >= d_j / 2` for every
/// client. `None` when that system is infeasible.
pub fn solve_constrained_flow(
    inst: &Instance,
    g: &PartialAssignment,
    x: &[Vec<Rational>],
    y_prime: &[Rational],
    small: &[bool],
) -> Result<Option<ConstrainedFlow>, RoundingError> {
    let net = build_mfn(inst, g, x, y_prime)?;
    let MfnFeasibility::Feasible(flow) = solve_multiflow(&net, Some(HalfDemandRows { small }))? else {
        return Ok(None);
    };
    let h: Vec<Vec<Rational>> =
        (0..inst.nf()).map(|i| (0..inst.nd()).map(|j| flow.flows[j][net.oblivious(i)].clone()).collect()).collect();
    let h_small = (0..inst.nd()).map(|j| (0..inst.nf()).filter(|&i| small[i]).map(|i| h[i][j].clone()).sum()).collect();
    Ok(Some(ConstrainedFlow { flow, h, h_small }))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemiIntegralSolution {
    pub x: Vec<Vec<Rational>>,
    pub y: Vec<Rational>,
}

impl SemiIntegralSolution {
    /// `I = {i : y_i = 1}`.
    pub fn large(&self) -> Vec<bool> {
        self.y.iter().map(|v| *v == Rational::one()).collect()
    }

    /// `d̂_j = sum_{i in S} x_ij`.
    pub fn residual_demands(&self) -> Vec<Rational> {
        let large = self.large();
        let nd = self.x.first().map_or(0, Vec::len);
        (0..nd).map(|j| (0..self.y.len()).filter(|&i| !large[i]).map(|i| self.x[i][j].clone()).sum()).collect()
    }

    pub fn cost(&self, inst: &Instance) -> Rational {
        fractional_cost(inst, &self.x, &self.y)
    }
}

/// `ŷ = 1` on `I` and `2y*` on `S`; `x̂ = g*` on `I` and `d_j h(i,j) / h(S,j)` on `S`.
pub fn build_semi_integral(
    g: &PartialAssignment,
    flow: &ConstrainedFlow,
    y_star: &[Rational],
    large: &[bool],
) -> Result<SemiIntegralSolution, RoundingError> {
    let demands = g.demands();
    let nf = y_star.len();
    let nd = demands.len();
    let two = Rational::from(2u64);
    let y = (0..nf).map(|i| if large[i] { Rational::one() } else { &two * &y_star[i] }).collect();
    let mut x = vec![vec![Rational::zero(); nd]; nf];
    for j in 0..nd {
        if flow.h_small[j].is_zero() && !demands[j].is_zero() {
            return Err(RoundingError::Invariant(format!("h(S,{j}) = 0 with positive demand {}", demands[j])));
        }
        for i in 0..nf {
            x[i][j] = if large[i] {
                g.g[i][j].clone()
            } else if flow.h_small[j].is_zero() {
                Rational::zero()
            } else {
                &demands[j] * &flow.h[i][j] / &flow.h_small[j]
            };
        }
    }
    Ok(SemiIntegralSolution { x, y })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum SemiViolation {
    Shape,
    Negative {
        facility: usize,
        client: usize,
    },
    /// (i) `sum_i x_ij != 1`.
    NotAssigned {
        client: usize,
        total: Rational,
    },
    /// (i) `sum_j x_ij > y_i U_i`.
    OverCapacity {
        facility: usize,
    },
    /// (ii) `y_i` neither 1 nor in `[0, 1/2]`.
    Opening {
        facility: usize,
        value: Rational,
    },
    /// (iii) `x_ij > y_i d̂_j` on a small facility.
    AboveResidual {
        facility: usize,
        client: usize,
    },
}

impl fmt::Display for SemiViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemiViolation::Shape => write!(f, "dimensions do not match the instance"),
            SemiViolation::Negative { facility, client } => write!(f, "x[{facility}][{client}] is negative"),
            SemiViolation::NotAssigned { client, total } => write!(f, "(i) client {client} is assigned {total}, not 1"),
            SemiViolation::OverCapacity { facility } => write!(f, "(i) facility {facility} exceeds y_i U_i"),
            SemiViolation::Opening { facility, value } => {
                write!(f, "(ii) y[{facility}] = {value} is neither 1 nor at most 1/2")
            }
            SemiViolation::AboveResidual { facility, client } => {
                write!(f, "(iii) x[{facility}][{client}] exceeds y_i times the residual demand")
            }
        }
    }
}

/// Checks the three semi-integrality conditions and reports the first failure.
pub fn validate_semi_integral(inst: &Instance, x: &[Vec<Rational>], y: &[Rational]) -> Result<(), SemiViolation> {
    let (nf, nd) = (inst.nf(), inst.nd());
    if x.len() != nf || y.len() != nf || x.iter().any(|r| r.len() != nd) {
        return Err(SemiViolation::Shape);
    }
    for (i, row) in x.iter().enumerate() {
        if let Some(j) = row.iter().position(Rational::is_negative) {
            return Err(SemiViolation::Negative { facility: i, client: j });
        }
    }
    for j in 0..nd {
        let total: Rational = x.iter().map(|r| &r[j]).sum();
        if total != Rational::one() {
            return Err(SemiViolation::NotAssigned { client: j, total });
        }
    }
    for i in 0..nf {
        if x[i].iter().sum::<Rational>() > &y[i] * Rational::from(inst.capacity(i)) {
            return Err(SemiViolation::OverCapacity { facility: i });
        }
    }
    let half = Rational::new(1, 2);
    for (i, v) in y.iter().enumerate() {
        if *v != Rational::one() && (v.is_negative() || *v > half) {
            return Err(SemiViolation::Opening { facility: i, value: v.clone() });
        }
    }
    let semi = SemiIntegralSolution { x: x.to_vec(), y: y.to_vec() };
    let large = semi.large();
    let residual = semi.residual_demands();
    for i in (0..nf).filter(|&i| !large[i]) {
        for j in 0..nd {
            if x[i][j] > &y[i] * &residual[j] {
                return Err(SemiViolation::AboveResidual { facility: i, client: j });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SoftCapBackend {
    /// Enumerate subsets of the residual facilities, up to [`EXACT_SOFTCAP_LIMIT`].
    #[default]
    Exact,
    Greedy,
}

pub const EXACT_SOFTCAP_LIMIT: usize = 12;

impl std::str::FromStr for SoftCapBackend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(SoftCapBackend::Exact),
            "greedy" => Ok(SoftCapBackend::Greedy),
            other => Err(format!("unknown soft-cap backend `{other}` (expected exact or greedy)")),
        }
    }
}

/// Residual facility location: facilities `small` with capacity `U_i`, client
/// demands `demands`, and the fractional LP point it came from.
#[derive(Clone, Debug)]
pub struct ResidualProblem<'a> {
    pub inst: &'a Instance,
    pub small: Vec<usize>,
    pub demands: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SoftCapResult {
    pub backend: SoftCapBackend,
    pub open: Vec<usize>,
    /// Fractional assignment, facility-major over all facilities.
    pub x: Vec<Vec<Rational>>,
    pub cost: Rational,
    /// Cost of the residual LP point `(x̂^S, 2ŷ^S)`.
    pub lp_cost: Rational,
}

/// A fractional assignment and its cost.
type Transport = (Vec<Vec<Rational>>, Rational);

/// Min-cost transportation of `demands` into `open` with capacities `U_i`.
fn transport(inst: &Instance, open: &[usize], demands: &[Rational]) -> Result<Option<Transport>, LpError> {
    let nd = inst.nd();
    let mut x = vec![vec![Rational::zero(); nd]; inst.nf()];
    let clients: Vec<usize> = (0..nd).filter(|&j| demands[j].is_positive()).collect();
    if clients.is_empty() {
        return Ok(Some((x, Rational::zero())));
    }
    let mut lp = LinearProgram::new(Direction::Minimize);
    let vars: Vec<Vec<usize>> = open
        .iter()
        .map(|&i| {
            clients
                .iter()
                .map(|&j| {
                    let v = lp.add_nonneg(format!("x_{i}_{j}"));
                    lp.set_objective_coef(v, inst.dist(i, j).clone());
                    v
                })
                .collect()
        })
        .collect();
    for (k, &j) in clients.iter().enumerate() {
        lp.add_constraint(
            format!("demand_{j}"),
            vars.iter().map(|r| (r[k], Rational::one())).collect(),
            Sense::Eq,
            demands[j].clone(),
        );
    }
    for (a, &i) in open.iter().enumerate() {
        lp.add_constraint(
            format!("cap_{i}"),
            vars[a].iter().map(|&v| (v, Rational::one())).collect(),
            Sense::Le,
            Rational::from(inst.capacity(i)),
        );
    }
    let res = solve_lp(&lp)?;
    if res.status != LpStatus::Optimal {
        return Ok(None);
    }
    for (a, &i) in open.iter().enumerate() {
        for (k, &j) in clients.iter().enumerate() {
            x[i][j] = res.primal[vars[a][k]].clone();
        }
    }
    Ok(Some((x, res.objective)))
}

fn opening_cost(inst: &Instance, open: &[usize]) -> Rational {
    open.iter().map(|&i| inst.open_cost(i).clone()).sum()
}

/// Opens a subset of the residual facilities and assigns the residual demand to
/// it fractionally with capacities `2 U'_i = U_i`.
pub fn soft_cap_round(
    problem: &ResidualProblem<'_>,
    lp_cost: Rational,
    backend: SoftCapBackend,
) -> Result<SoftCapResult, RoundingError> {
    let inst = problem.inst;
    let need: Rational = problem.demands.iter().sum();
    if need.is_zero() {
        return Ok(SoftCapResult {
            backend,
            open: Vec::new(),
            x: vec![vec![Rational::zero(); inst.nd()]; inst.nf()],
            cost: Rational::zero(),
            lp_cost,
        });
    }
    let backend = if problem.small.len() > EXACT_SOFTCAP_LIMIT { SoftCapBackend::Greedy } else { backend };
    let best = match backend {
        SoftCapBackend::Exact => soft_cap_exact(problem, &need)?,
        SoftCapBackend::Greedy => soft_cap_greedy(problem, &need)?,
    };
    let (open, x, cost) = best.ok_or(RoundingError::ResidualShort)?;
    Ok(SoftCapResult { backend, open, x, cost, lp_cost })
}

type Candidate = Option<(Vec<usize>, Vec<Vec<Rational>>, Rational)>;

fn soft_cap_exact(problem: &ResidualProblem<'_>, need: &Rational) -> Result<Candidate, RoundingError> {
    let inst = problem.inst;
    let k = problem.small.len();
    let mut best: Candidate = None;
    for mask in 1usize..(1 << k) {
        let open: Vec<usize> = (0..k).filter(|b| mask >> b & 1 == 1).map(|b| problem.small[b]).collect();
        let cap: u64 = open.iter().map(|&i| inst.capacity(i)).sum();
        if Rational::from(cap) < *need {
            continue;
        }
        let opening = opening_cost(inst, &open);
        if best.as_ref().is_some_and(|b| opening >= b.2) {
            continue;
        }
        if let Some((x, assign)) = transport(inst, &open, &problem.demands)? {
            let total = opening + assign;
            if best.as_ref().is_none_or(|b| total < b.2) {
                best = Some((open, x, total));
            }
        }
    }
    Ok(best)
}

/// Repeatedly opens the facility with the lowest cost per unit of demand it can
/// absorb (opening cost plus its nearest remaining demand), then re-solves the
/// transportation problem over the opened set.
fn soft_cap_greedy(problem: &ResidualProblem<'_>, need: &Rational) -> Result<Candidate, RoundingError> {
    let inst = problem.inst;
    let mut remaining = problem.demands.clone();
    let mut left = need.clone();
    let mut open: Vec<usize> = Vec::new();
    while left.is_positive() {
        let mut best: Option<(Rational, usize, Vec<Rational>)> = None;
        for &i in problem.small.iter().filter(|i| !open.contains(i)) {
            let mut order: Vec<usize> = (0..inst.nd()).filter(|&j| remaining[j].is_positive()).collect();
            order.sort_by(|&a, &b| inst.dist(i, a).cmp(inst.dist(i, b)));
            let mut room = Rational::from(inst.capacity(i));
            let mut take = vec![Rational::zero(); inst.nd()];
            let mut cost = inst.open_cost(i).clone();
            let mut served = Rational::zero();
            for j in order {
                if !room.is_positive() {
                    break;
                }
                let amount = remaining[j].clone().min(room.clone());
                cost += inst.dist(i, j) * &amount;
                room -= &amount;
                served += &amount;
                take[j] = amount;
            }
            if served.is_zero() {
                continue;
            }
            let rate = cost / served;
            if best.as_ref().is_none_or(|b| rate < b.0) {
                best = Some((rate, i, take));
            }
        }
        let Some((_, i, take)) = best else { return Ok(None) };
        for (j, t) in take.iter().enumerate() {
            remaining[j] -= t;
            left -= t;
        }
        open.push(i);
    }
    open.sort_unstable();
    Ok(transport(inst, &open, &problem.demands)?.map(|(x, assign)| {
        let total = opening_cost(inst, &open) + assign;
        (open, x, total)
    }))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundingOutcome {
    pub solution: IntegralSolution,
    pub cost: Rational,
    pub soft_cap: SoftCapResult,
    /// The fractional assignment over `I ∪ T` before the final matching.
    pub concatenated: Vec<Vec<Rational>>,
    pub concatenated_assignment_cost: Rational,
    pub final_assignment_cost: Rational,
}

/// Opens `I` plus the soft-cap facilities and assigns every client by a
/// min-cost integral b-matching under the true capacities.
pub fn round_semi_integral(
    inst: &Instance,
    semi: &SemiIntegralSolution,
    backend: SoftCapBackend,
) -> Result<RoundingOutcome, RoundingError> {
    validate_semi_integral(inst, &semi.x, &semi.y).map_err(RoundingError::NotSemiIntegral)?;
    let (nf, nd) = (inst.nf(), inst.nd());
    let large = semi.large();
    let small: Vec<usize> = (0..nf).filter(|&i| !large[i]).collect();
    let demands = semi.residual_demands();
    let lp_cost: Rational = small
        .iter()
        .map(|&i| {
            let open = Rational::from(2u64) * &semi.y[i] * inst.open_cost(i);
            open + (0..nd).map(|j| inst.dist(i, j) * &semi.x[i][j]).sum::<Rational>()
        })
        .sum();
    let soft_cap = soft_cap_round(&ResidualProblem { inst, small, demands }, lp_cost, backend)?;

    let mut open: Vec<usize> = (0..nf).filter(|&i| large[i]).chain(soft_cap.open.iter().copied()).collect();
    open.sort_unstable();
    let mut concatenated = vec![vec![Rational::zero(); nd]; nf];
    for i in 0..nf {
        for j in 0..nd {
            concatenated[i][j] = if large[i] { semi.x[i][j].clone() } else { soft_cap.x[i][j].clone() };
        }
    }
    let concat_check = check_concatenated(inst, &open, &concatenated);
    if let Err(msg) = concat_check {
        return Err(RoundingError::Invariant(msg));
    }
    let concatenated_assignment_cost: Rational =
        (0..nf).flat_map(|i| (0..nd).map(move |j| (i, j))).map(|(i, j)| inst.dist(i, j) * &concatenated[i][j]).sum();

    let (assign, final_assignment_cost) = min_cost_integral_bmatching(inst, &open)?;
    if final_assignment_cost > concatenated_assignment_cost {
        return Err(RoundingError::Invariant("integral assignment costs more than the fractional one".into()));
    }
    let solution = IntegralSolution { open, assign };
    let cost = crate::instances::solution_cost(inst, &solution);
    Ok(RoundingOutcome { solution, cost, soft_cap, concatenated, concatenated_assignment_cost, final_assignment_cost })
}

/// Full assignment, capacity at open facilities, nothing at closed ones.
pub fn check_concatenated(inst: &Instance, open: &[usize], x: &[Vec<Rational>]) -> Result<(), String> {
    for j in 0..inst.nd() {
        let total: Rational = x.iter().map(|r| &r[j]).sum();
        if total != Rational::one() {
            return Err(format!("client {j} assigned {total} before the final matching"));
        }
    }
    for i in 0..inst.nf() {
        let load: Rational = x[i].iter().sum();
        if open.contains(&i) {
            if load > Rational::from(inst.capacity(i)) {
                return Err(format!("facility {i} over capacity before the final matching"));
            }
        } else if !load.is_zero() {
            return Err(format!("closed facility {i} carries assignment"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{exact_opt, gen_gap_instance, Facility};
    use crate::mfn::is_valid_multiflow;
    use crate::rational::q;

    fn r(n: i64) -> Rational {
        Rational::from_int(n)
    }

    #[test]
    fn threshold_examples() {
        let t = threshold_open(&[r(1), q(1, 5)], &q(1, 4));
        assert_eq!((t.y.clone(), t.large.clone()), (vec![r(1), q(1, 5)], vec![true, false]));
        let t = threshold_open(&[q(1, 4), q(1, 4)], &q(1, 4));
        assert_eq!(t.y, vec![r(1), r(1)]);
        assert!(t.small().iter().all(|s| !s));
        let t = threshold_open(&[r(0)], &q(1, 4));
        assert_eq!((t.y, t.large), (vec![r(0)], vec![false]));
    }

    fn gap5_saturating() -> (Instance, PartialAssignment, Vec<Vec<Rational>>) {
        let inst = gen_gap_instance(5);
        let mut g = PartialAssignment::zero(2, 6);
        for j in 0..5 {
            g.g[0][j] = r(1);
        }
        (inst, g, vec![vec![q(5, 6); 6], vec![q(1, 6); 6]])
    }

    #[test]
    fn gap5_constrained_flow_after_raising_y2() {
        let (inst, g, x) = gap5_saturating();
        let small = [false, true];
        let pre = solve_constrained_flow(&inst, &g, &x, &[r(1), q(1, 5)], &small).unwrap();
        assert!(pre.is_none());
        // With y2 = 1 the remaining client must still reach i2 through x_{2,6}=1/6 plus
        // reassignment paths through other sources.
        let cf = solve_constrained_flow(&inst, &g, &x, &[r(1), r(1)], &small).unwrap().unwrap();
        let net = build_mfn(&inst, &g, &x, &[r(1), r(1)]).unwrap();
        assert!(is_valid_multiflow(&net, &cf.flow));
        assert_eq!(cf.h_small, g.demands());
    }

    #[test]
    fn zero_demand_constrained_flow() {
        let inst = gen_gap_instance(1);
        let mut g = PartialAssignment::zero(2, 2);
        g.g[0][0] = r(1);
        g.g[1][1] = r(1);
        let cf =
            solve_constrained_flow(&inst, &g, &[vec![r(1), r(0)], vec![r(0), r(1)]], &[r(1), r(1)], &[false, false])
                .unwrap()
                .unwrap();
        assert!(cf.h_small.iter().all(Rational::is_zero));
        let semi = build_semi_integral(&g, &cf, &[r(1), r(1)], &[true, true]).unwrap();
        assert_eq!(semi.x, g.g);
        assert_eq!(semi.y, vec![r(1), r(1)]);
    }

    /// Three small facilities with y* = 1/5, one client with d = 1, h = (1/5, 1/5, 1/10).
    #[test]
    fn semi_integral_arithmetic() {
        let g = PartialAssignment::zero(3, 1);
        let cf = ConstrainedFlow {
            flow: MultiFlow { flows: vec![] },
            h: vec![vec![q(1, 5)], vec![q(1, 5)], vec![q(1, 10)]],
            h_small: vec![q(1, 2)],
        };
        let semi = build_semi_integral(&g, &cf, &vec![q(1, 5); 3], &[false; 3]).unwrap();
        assert_eq!(semi.x, vec![vec![q(2, 5)], vec![q(2, 5)], vec![q(1, 5)]]);
        assert_eq!(semi.y, vec![q(2, 5); 3]);
        let inst = Instance::new(
            (0..3).map(|i| Facility { id: format!("s{i}"), open_cost: r(1), capacity: 3 }).collect(),
            vec!["c".into()],
            vec![vec![r(0); 4]; 4],
        )
        .unwrap();
        assert_eq!(validate_semi_integral(&inst, &semi.x, &semi.y), Ok(()));
    }

    #[test]
    fn scaling_factor_one() {
        let mut g = PartialAssignment::zero(2, 1);
        g.g[0][0] = q(1, 2);
        let cf = ConstrainedFlow {
            flow: MultiFlow { flows: vec![] },
            h: vec![vec![r(0)], vec![q(1, 2)]],
            h_small: vec![q(1, 2)],
        };
        let semi = build_semi_integral(&g, &cf, &[r(1), q(1, 2)], &[true, false]).unwrap();
        assert_eq!(semi.x[1][0], q(1, 2));
    }

    #[test]
    fn validation_failures() {
        let inst = gen_gap_instance(2);
        let x = vec![vec![r(1), r(1), r(0)], vec![r(0), r(0), r(1)]];
        assert!(matches!(
            validate_semi_integral(&inst, &x, &[r(1), q(3, 5)]),
            Err(SemiViolation::Opening { facility: 1, .. })
        ));
        let short = vec![vec![q(9, 10), r(1), r(0)], vec![r(0), r(0), r(1)]];
        assert!(matches!(
            validate_semi_integral(&inst, &short, &[r(1), q(1, 2)]),
            Err(SemiViolation::NotAssigned { client: 0, .. })
        ));
        // x on a small facility above y times its residual demand.
        assert!(matches!(
            validate_semi_integral(&inst, &x, &[r(1), q(1, 2)]),
            Err(SemiViolation::AboveResidual { facility: 1, client: 2 })
        ));
    }

    fn zero_metric_instance(costs: &[i64], caps: &[u64], nd: usize) -> Instance {
        let n = costs.len() + nd;
        Instance::new(
            costs
                .iter()
                .zip(caps)
                .enumerate()
                .map(|(i, (&c, &u))| Facility { id: format!("s{i}"), open_cost: r(c), capacity: u })
                .collect(),
            (0..nd).map(|j| format!("c{j}")).collect(),
            vec![vec![r(0); n]; n],
        )
        .unwrap()
    }

    #[test]
    fn soft_cap_examples() {
        let inst = zero_metric_instance(&[1], &[2], 1);
        let none = soft_cap_round(
            &ResidualProblem { inst: &inst, small: vec![0], demands: vec![r(0)] },
            r(0),
            SoftCapBackend::Exact,
        )
        .unwrap();
        assert!(none.open.is_empty() && none.cost.is_zero());
        let one = soft_cap_round(
            &ResidualProblem { inst: &inst, small: vec![0], demands: vec![r(1)] },
            r(0),
            SoftCapBackend::Exact,
        )
        .unwrap();
        assert_eq!((one.open.clone(), one.cost.clone()), (vec![0], r(1)));
        let pair = zero_metric_instance(&[1, 10], &[2, 2], 1);
        for backend in [SoftCapBackend::Exact, SoftCapBackend::Greedy] {
            let res =
                soft_cap_round(&ResidualProblem { inst: &pair, small: vec![0, 1], demands: vec![r(1)] }, r(0), backend)
                    .unwrap();
            assert_eq!(res.open, vec![0]);
        }
    }

    #[test]
    fn exact_backend_is_minimal() {
        // Greedy opens the cheap-per-unit big facility; exact finds the cheaper pair.
        let inst = zero_metric_instance(&[3, 2, 2], &[4, 1, 1], 2);
        let p = ResidualProblem { inst: &inst, small: vec![0, 1, 2], demands: vec![r(1), r(1)] };
        let exact = soft_cap_round(&p, r(0), SoftCapBackend::Exact).unwrap();
        let greedy = soft_cap_round(&p, r(0), SoftCapBackend::Greedy).unwrap();
        assert_eq!(exact.cost, r(3));
        assert!(exact.cost <= greedy.cost);
        for mask in 1u32..8 {
            let open: Vec<usize> = (0..3).filter(|b| mask >> b & 1 == 1).collect();
            if let Some((_, assign)) = transport(&inst, &open, &p.demands).unwrap() {
                assert!(exact.cost <= opening_cost(&inst, &open) + assign);
            }
        }
    }

    #[test]
    fn gap5_post_cut_rounds_to_one() {
        let (inst, g, _) = gap5_saturating();
        let semi = SemiIntegralSolution {
            x: vec![g.g[0].clone(), vec![r(0), r(0), r(0), r(0), r(0), r(1)]],
            y: vec![r(1), r(1)],
        };
        let out = round_semi_integral(&inst, &semi, SoftCapBackend::Exact).unwrap();
        assert_eq!(out.solution.open, vec![0, 1]);
        assert_eq!(out.cost, r(1));
        assert_eq!(out.cost, exact_opt(&inst).unwrap().value);
    }

    #[test]
    fn empty_small_set_uses_large_only() {
        let inst = gen_gap_instance(2);
        let x = vec![vec![r(1), r(1), r(0)], vec![r(0), r(0), r(1)]];
        let semi = SemiIntegralSolution { x, y: vec![r(1), r(1)] };
        let out = round_semi_integral(&inst, &semi, SoftCapBackend::Greedy).unwrap();
        assert!(out.soft_cap.open.is_empty());
        assert_eq!(out.cost, r(1));
        assert!(crate::instances::check_feasible_integral(&inst, &out.solution));
    }
}
