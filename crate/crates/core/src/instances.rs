//! Capacitated facility location instances, integral solutions, generators and
//! the brute-force optimum oracle.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batch::{self, Execution};
use crate::matching;
use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Facility {
    pub id: String,
    pub open_cost: Rational,
    pub capacity: u64,
}

/// Facilities, clients and a metric over facilities-then-clients.
///
/// Point `a < nf` is facility `a`; point `nf + j` is client `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    facilities: Vec<Facility>,
    clients: Vec<String>,
    metric: Vec<Vec<Rational>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    MetricShape { expected: usize },
    DuplicateId(String),
    ZeroCapacity { facility: usize },
    NegativeOpenCost { facility: usize },
    NonzeroDiagonal { point: usize },
    NegativeDistance { a: usize, b: usize },
    Asymmetric { a: usize, b: usize },
    Triangle { a: usize, b: usize, c: usize },
    InsufficientCapacity { total: u64, clients: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MetricShape { expected } => write!(f, "metric must be a {expected}x{expected} matrix"),
            Violation::DuplicateId(id) => write!(f, "duplicate id `{id}`"),
            Violation::ZeroCapacity { facility } => write!(f, "facility {facility} has zero capacity"),
            Violation::NegativeOpenCost { facility } => write!(f, "facility {facility} has negative opening cost"),
            Violation::NonzeroDiagonal { point } => write!(f, "distance from point {point} to itself is nonzero"),
            Violation::NegativeDistance { a, b } => write!(f, "distance ({a},{b}) is negative"),
            Violation::Asymmetric { a, b } => write!(f, "distance ({a},{b}) differs from ({b},{a})"),
            Violation::Triangle { a, b, c } => {
                write!(f, "triangle inequality fails: d({a},{c}) > d({a},{b}) + d({b},{c})")
            }
            Violation::InsufficientCapacity { total, clients } => {
                write!(f, "total capacity {total} is below the {clients} clients")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid instance: {}", list(.0))]
    Invalid(Vec<Violation>),
    #[error("malformed instance file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("knapsack weights sum to {total}, below demand {demand}")]
    KnapsackShort { total: u64, demand: u64 },
    #[error("knapsack weights and costs differ in length ({weights} vs {costs})")]
    KnapsackLengths { weights: usize, costs: usize },
    #[error("instance has {facilities} facilities, above the oracle bound {bound}")]
    TooLarge { facilities: usize, bound: usize },
    #[error("total capacity is below the number of clients")]
    Infeasible,
    #[error("unknown id `{0}` in solution")]
    UnknownId(String),
}

fn list(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl Instance {
    /// Builds an instance and rejects it unless [`validate_instance`] is clean.
    pub fn new(
        facilities: Vec<Facility>,
        clients: Vec<String>,
        metric: Vec<Vec<Rational>>,
    ) -> Result<Self, InstanceError> {
        let inst = Self::from_parts_unchecked(facilities, clients, metric);
        let violations = validate_instance(&inst);
        if violations.is_empty() {
            Ok(inst)
        } else {
            Err(InstanceError::Invalid(violations))
        }
    }

    pub fn from_parts_unchecked(facilities: Vec<Facility>, clients: Vec<String>, metric: Vec<Vec<Rational>>) -> Self {
        Instance { facilities, clients, metric }
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let raw: Instance = serde_json::from_str(text)?;
        Self::new(raw.facilities, raw.clients, raw.metric)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialises")
    }

    pub fn nf(&self) -> usize {
        self.facilities.len()
    }

    pub fn nd(&self) -> usize {
        self.clients.len()
    }

    pub fn facilities(&self) -> &[Facility] {
        &self.facilities
    }

    pub fn facility(&self, i: usize) -> &Facility {
        &self.facilities[i]
    }

    pub fn clients(&self) -> &[String] {
        &self.clients
    }

    pub fn capacity(&self, i: usize) -> u64 {
        self.facilities[i].capacity
    }

    pub fn open_cost(&self, i: usize) -> &Rational {
        &self.facilities[i].open_cost
    }

    /// Facility-to-client distance `c_ij`.
    pub fn dist(&self, i: usize, j: usize) -> &Rational {
        &self.metric[i][self.nf() + j]
    }

    pub fn point_dist(&self, a: usize, b: usize) -> &Rational {
        &self.metric[a][b]
    }

    pub fn total_capacity(&self) -> u64 {
        self.facilities.iter().map(|f| f.capacity).sum()
    }

    pub fn has_zero_metric(&self) -> bool {
        self.metric.iter().flatten().all(Rational::is_zero)
    }

    pub fn facility_index(&self, id: &str) -> Option<usize> {
        self.facilities.iter().position(|f| f.id == id)
    }

    pub fn client_index(&self, id: &str) -> Option<usize> {
        self.clients.iter().position(|c| c == id)
    }
}

/// Every violated instance invariant, with indices into facilities-then-clients.
pub fn validate_instance(inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = inst.nf() + inst.nd();
    if inst.metric.len() != n || inst.metric.iter().any(|row| row.len() != n) {
        out.push(Violation::MetricShape { expected: n });
    }
    let mut seen = std::collections::BTreeSet::new();
    for id in inst.facilities.iter().map(|f| &f.id).chain(&inst.clients) {
        if !seen.insert(id) {
            out.push(Violation::DuplicateId(id.clone()));
        }
    }
    for (i, f) in inst.facilities.iter().enumerate() {
        if f.capacity == 0 {
            out.push(Violation::ZeroCapacity { facility: i });
        }
        if f.open_cost.is_negative() {
            out.push(Violation::NegativeOpenCost { facility: i });
        }
    }
    if out.iter().any(|v| matches!(v, Violation::MetricShape { .. })) {
        return out;
    }
    let m = &inst.metric;
    for a in 0..n {
        if !m[a][a].is_zero() {
            out.push(Violation::NonzeroDiagonal { point: a });
        }
        for b in 0..n {
            if m[a][b].is_negative() {
                out.push(Violation::NegativeDistance { a, b });
            }
            if a < b && m[a][b] != m[b][a] {
                out.push(Violation::Asymmetric { a, b });
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if a != c && b != a && b != c && m[a][c] > &m[a][b] + &m[b][c] {
                    out.push(Violation::Triangle { a, b, c });
                }
            }
        }
    }
    let total = inst.total_capacity();
    if total < inst.nd() as u64 {
        out.push(Violation::InsufficientCapacity { total, clients: inst.nd() });
    }
    out
}

fn zero_metric(n: usize) -> Vec<Vec<Rational>> {
    vec![vec![Rational::zero(); n]; n]
}

/// Two colocated facilities of capacity `n` (opening costs 0 and 1) and `n + 1`
/// clients; the standard assignment LP has an unbounded gap on this family.
pub fn gen_gap_instance(n: u64) -> Instance {
    assert!(n >= 1, "gap family starts at n = 1");
    let facilities = vec![
        Facility { id: "i1".into(), open_cost: Rational::zero(), capacity: n },
        Facility { id: "i2".into(), open_cost: Rational::one(), capacity: n },
    ];
    let clients: Vec<String> = (1..=n + 1).map(|r| format!("j{r}")).collect();
    let size = 2 + clients.len();
    Instance::from_parts_unchecked(facilities, clients, zero_metric(size))
}

/// Minimum knapsack as zero-metric facility location: item `k` becomes a
/// facility with capacity `weights[k]` and opening cost `costs[k]`.
pub fn gen_knapsack_instance(weights: &[u64], costs: &[Rational], demand: u64) -> Result<Instance, InstanceError> {
    if weights.len() != costs.len() {
        return Err(InstanceError::KnapsackLengths { weights: weights.len(), costs: costs.len() });
    }
    let total: u64 = weights.iter().sum();
    if total < demand {
        return Err(InstanceError::KnapsackShort { total, demand });
    }
    let facilities = weights
        .iter()
        .zip(costs)
        .enumerate()
        .map(|(k, (&w, c))| Facility { id: format!("item{}", k + 1), open_cost: c.clone(), capacity: w })
        .collect::<Vec<_>>();
    let clients: Vec<String> = (1..=demand).map(|r| format!("u{r}")).collect();
    let size = facilities.len() + clients.len();
    Instance::new(facilities, clients, zero_metric(size))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomParams {
    pub open_cost: (u64, u64),
    pub capacity: (u64, u64),
    /// Points are drawn from `[0, grid]^2`.
    pub grid: u64,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams { open_cost: (0, 10), capacity: (1, 4), grid: 10 }
    }
}

/// Deterministic random instance with an L1 grid metric.
///
/// When the drawn capacities cannot serve every client, the smallest
/// capacities are raised one unit at a time (beyond the range maximum only if
/// `nf * max < nd`).
pub fn gen_random_instance(seed: u64, nf: usize, nd: usize, params: &RandomParams) -> Instance {
    assert!(nf >= 1 && nd >= 1, "need at least one facility and one client");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (clo, chi) = params.open_cost;
    let (ulo, uhi) = (params.capacity.0.max(1), params.capacity.1.max(params.capacity.0.max(1)));
    let mut facilities: Vec<Facility> = (0..nf)
        .map(|i| Facility {
            id: format!("f{i}"),
            open_cost: Rational::from(rng.gen_range(clo..=chi.max(clo))),
            capacity: rng.gen_range(ulo..=uhi),
        })
        .collect();
    while facilities.iter().map(|f| f.capacity).sum::<u64>() < nd as u64 {
        let below_max = facilities.iter().enumerate().filter(|(_, f)| f.capacity < uhi).min_by_key(|(_, f)| f.capacity);
        let idx = match below_max {
            Some((i, _)) => i,
            None => facilities.iter().enumerate().min_by_key(|(_, f)| f.capacity).map(|(i, _)| i).unwrap(),
        };
        facilities[idx].capacity += 1;
    }
    let points: Vec<(i64, i64)> =
        (0..nf + nd).map(|_| (rng.gen_range(0..=params.grid) as i64, rng.gen_range(0..=params.grid) as i64)).collect();
    let metric = points
        .iter()
        .map(|a| points.iter().map(|b| Rational::from_int((a.0 - b.0).abs() + (a.1 - b.1).abs())).collect())
        .collect();
    let clients = (0..nd).map(|j| format!("c{j}")).collect();
    Instance::from_parts_unchecked(facilities, clients, metric)
}

/// An open set and a total client-to-facility map (facility indices).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegralSolution {
    pub open: Vec<usize>,
    pub assign: Vec<usize>,
}

/// File form of an integral solution, keyed by ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub open: Vec<String>,
    pub assign: BTreeMap<String, String>,
}

impl IntegralSolution {
    pub fn to_file(&self, inst: &Instance) -> SolutionFile {
        SolutionFile {
            open: self.open.iter().map(|&i| inst.facility(i).id.clone()).collect(),
            assign: self
                .assign
                .iter()
                .enumerate()
                .map(|(j, &i)| (inst.clients()[j].clone(), inst.facility(i).id.clone()))
                .collect(),
        }
    }

    pub fn from_file(inst: &Instance, file: &SolutionFile) -> Result<Self, InstanceError> {
        let fac = |id: &String| inst.facility_index(id).ok_or_else(|| InstanceError::UnknownId(id.clone()));
        let mut open = file.open.iter().map(fac).collect::<Result<Vec<_>, _>>()?;
        open.sort_unstable();
        open.dedup();
        let mut assign = vec![usize::MAX; inst.nd()];
        for (c, f) in &file.assign {
            let j = inst.client_index(c).ok_or_else(|| InstanceError::UnknownId(c.clone()))?;
            assign[j] = fac(f)?;
        }
        Ok(IntegralSolution { open, assign })
    }

    pub fn to_fractional(&self, inst: &Instance) -> FractionalSolution {
        let mut x = vec![vec![Rational::zero(); inst.nd()]; inst.nf()];
        let mut y = vec![Rational::zero(); inst.nf()];
        for &i in &self.open {
            y[i] = Rational::one();
        }
        for (j, &i) in self.assign.iter().enumerate() {
            x[i][j] = Rational::one();
        }
        FractionalSolution { x, y }
    }
}

/// Assignment variables `x` (facility-major) and opening variables `y`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FractionalSolution {
    pub x: Vec<Vec<Rational>>,
    pub y: Vec<Rational>,
}

/// `sum_i o_i y_i + sum_ij c_ij x_ij`.
pub fn fractional_cost(inst: &Instance, x: &[Vec<Rational>], y: &[Rational]) -> Rational {
    let opening: Rational = (0..inst.nf()).filter(|&i| !y[i].is_zero()).map(|i| inst.open_cost(i) * &y[i]).sum();
    let assignment: Rational = (0..inst.nf())
        .flat_map(|i| (0..inst.nd()).map(move |j| (i, j)))
        .filter(|&(i, j)| !x[i][j].is_zero())
        .map(|(i, j)| inst.dist(i, j) * &x[i][j])
        .sum();
    opening + assignment
}

pub fn solution_cost(inst: &Instance, sol: &IntegralSolution) -> Rational {
    let opening: Rational = sol.open.iter().map(|&i| inst.open_cost(i).clone()).sum();
    let assignment: Rational = sol.assign.iter().enumerate().map(|(j, &i)| inst.dist(i, j).clone()).sum();
    opening + assignment
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolutionViolation {
    WrongLength { expected: usize, got: usize },
    UnknownFacility { client: usize },
    AssignedToClosed { client: usize, facility: usize },
    Overloaded { facility: usize, load: u64, capacity: u64 },
}

impl fmt::Display for SolutionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolutionViolation::WrongLength { expected, got } => {
                write!(f, "assignment covers {got} clients, expected {expected}")
            }
            SolutionViolation::UnknownFacility { client } => {
                write!(f, "client {client} is not assigned to a known facility")
            }
            SolutionViolation::AssignedToClosed { client, facility } => {
                write!(f, "client {client} assigned to closed facility {facility}")
            }
            SolutionViolation::Overloaded { facility, load, capacity } => {
                write!(f, "capacity violation: facility {facility} serves {load} clients, capacity {capacity}")
            }
        }
    }
}

pub fn integral_violations(inst: &Instance, sol: &IntegralSolution) -> Vec<SolutionViolation> {
    let mut out = Vec::new();
    if sol.assign.len() != inst.nd() {
        out.push(SolutionViolation::WrongLength { expected: inst.nd(), got: sol.assign.len() });
        return out;
    }
    let mut open = vec![false; inst.nf()];
    for &i in &sol.open {
        if i < inst.nf() {
            open[i] = true;
        }
    }
    let mut load = vec![0u64; inst.nf()];
    for (j, &i) in sol.assign.iter().enumerate() {
        if i >= inst.nf() {
            out.push(SolutionViolation::UnknownFacility { client: j });
            continue;
        }
        if !open[i] {
            out.push(SolutionViolation::AssignedToClosed { client: j, facility: i });
        }
        load[i] += 1;
    }
    for (i, &l) in load.iter().enumerate() {
        if l > inst.capacity(i) {
            out.push(SolutionViolation::Overloaded { facility: i, load: l, capacity: inst.capacity(i) });
        }
    }
    out
}

pub fn check_feasible_integral(inst: &Instance, sol: &IntegralSolution) -> bool {
    integral_violations(inst, sol).is_empty()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExactOptimum {
    pub value: Rational,
    pub solution: IntegralSolution,
}

#[derive(Clone, Copy, Debug)]
pub struct ExactOptions {
    pub max_facilities: usize,
    pub exec: Execution,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions { max_facilities: 12, exec: Execution::Parallel }
    }
}

pub fn exact_opt(inst: &Instance) -> Result<ExactOptimum, InstanceError> {
    exact_opt_with(inst, ExactOptions::default())
}

/// Minimum over capacity-feasible open sets of opening cost plus the min-cost
/// integral assignment into that set.
pub fn exact_opt_with(inst: &Instance, opts: ExactOptions) -> Result<ExactOptimum, InstanceError> {
    let nf = inst.nf();
    if nf > opts.max_facilities {
        return Err(InstanceError::TooLarge { facilities: nf, bound: opts.max_facilities });
    }
    if inst.total_capacity() < inst.nd() as u64 {
        return Err(InstanceError::Infeasible);
    }
    if inst.nd() == 0 {
        return Ok(ExactOptimum {
            value: Rational::zero(),
            solution: IntegralSolution { open: Vec::new(), assign: Vec::new() },
        });
    }
    let candidates = batch::map_range(opts.exec, 1usize << nf, |mask| {
        let open: Vec<usize> = (0..nf).filter(|i| mask >> i & 1 == 1).collect();
        let cap: u64 = open.iter().map(|&i| inst.capacity(i)).sum();
        if cap < inst.nd() as u64 {
            return None;
        }
        let (assign, assign_cost) = matching::min_cost_integral_bmatching(inst, &open).ok()?;
        let opening: Rational = open.iter().map(|&i| inst.open_cost(i).clone()).sum();
        Some((opening + assign_cost, IntegralSolution { open, assign }))
    });
    candidates
        .into_iter()
        .flatten()
        .min_by(|a, b| a.0.cmp(&b.0))
        .map(|(value, solution)| ExactOptimum { value, solution })
        .ok_or(InstanceError::Infeasible)
}

/// All feasible integral solutions: every open set with enough capacity and every
/// capacity-respecting assignment into it. Returns `None` above `limit`.
pub fn enumerate_feasible_solutions(inst: &Instance, limit: usize) -> Option<Vec<IntegralSolution>> {
    let nf = inst.nf();
    let nd = inst.nd();
    let mut out = Vec::new();
    for mask in 0usize..(1 << nf) {
        let open: Vec<usize> = (0..nf).filter(|i| mask >> i & 1 == 1).collect();
        if open.is_empty() && nd > 0 {
            continue;
        }
        let mut load = vec![0u64; nf];
        let mut assign = vec![0usize; nd];
        if !extend_assignments(inst, &open, 0, &mut load, &mut assign, &mut out, limit) {
            return None;
        }
    }
    Some(out)
}

fn extend_assignments(
    inst: &Instance,
    open: &[usize],
    j: usize,
    load: &mut [u64],
    assign: &mut [usize],
    out: &mut Vec<IntegralSolution>,
    limit: usize,
) -> bool {
    if j == assign.len() {
        if out.len() >= limit {
            return false;
        }
        out.push(IntegralSolution { open: open.to_vec(), assign: assign.to_vec() });
        return true;
    }
    for &i in open {
        if load[i] < inst.capacity(i) {
            load[i] += 1;
            assign[j] = i;
            let ok = extend_assignments(inst, open, j + 1, load, assign, out, limit);
            load[i] -= 1;
            if !ok {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn r(n: i64) -> Rational {
        Rational::from_int(n)
    }

    /// Facilities a (o=1, U=1) at 0 and b (o=3, U=2) at 2; clients p at 0, q at 2.
    pub(crate) fn tiny1() -> Instance {
        let coords = [0i64, 2, 0, 2];
        let metric = coords.iter().map(|a| coords.iter().map(|b| r((a - b).abs())).collect()).collect();
        Instance::new(
            vec![
                Facility { id: "a".into(), open_cost: r(1), capacity: 1 },
                Facility { id: "b".into(), open_cost: r(3), capacity: 2 },
            ],
            vec!["p".into(), "q".into()],
            metric,
        )
        .unwrap()
    }

    #[test]
    fn colocated_points_are_a_metric() {
        let inst = Instance::from_parts_unchecked(
            vec![Facility { id: "f".into(), open_cost: r(0), capacity: 2 }],
            vec!["c1".into(), "c2".into()],
            zero_metric(3),
        );
        assert!(validate_instance(&inst).is_empty());
    }

    #[test]
    fn triangle_violation_is_reported_with_indices() {
        // a = facility 0, b = client 0, c = client 1.
        let metric = vec![vec![r(0), r(1), r(3)], vec![r(1), r(0), r(1)], vec![r(3), r(1), r(0)]];
        let inst = Instance::from_parts_unchecked(
            vec![Facility { id: "a".into(), open_cost: r(0), capacity: 2 }],
            vec!["b".into(), "c".into()],
            metric,
        );
        let v = validate_instance(&inst);
        assert!(v.contains(&Violation::Triangle { a: 0, b: 1, c: 2 }));
        assert!(v.contains(&Violation::Triangle { a: 2, b: 1, c: 0 }));
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn other_violations() {
        let metric = vec![vec![r(1), q(1, 2)], vec![r(1), r(0)]];
        let inst = Instance::from_parts_unchecked(
            vec![Facility { id: "x".into(), open_cost: r(-1), capacity: 0 }],
            vec!["x".into()],
            metric,
        );
        let v = validate_instance(&inst);
        for expected in [
            Violation::DuplicateId("x".into()),
            Violation::ZeroCapacity { facility: 0 },
            Violation::NegativeOpenCost { facility: 0 },
            Violation::NonzeroDiagonal { point: 0 },
            Violation::Asymmetric { a: 0, b: 1 },
            Violation::InsufficientCapacity { total: 0, clients: 1 },
        ] {
            assert!(v.contains(&expected), "missing {expected:?} in {v:?}");
        }
    }

    #[test]
    fn gap_family_shape() {
        let g2 = gen_gap_instance(2);
        assert_eq!((g2.nf(), g2.nd()), (2, 3));
        assert!(g2.has_zero_metric());
        let g5 = gen_gap_instance(5);
        assert_eq!((g5.capacity(0), g5.capacity(1)), (5, 5));
        assert_eq!((g5.open_cost(0), g5.open_cost(1)), (&r(0), &r(1)));
        assert!(validate_instance(&g5).is_empty());
        let g1 = gen_gap_instance(1);
        assert_eq!((g1.nd(), g1.capacity(0), g1.capacity(1)), (2, 1, 1));
    }

    #[test]
    fn knapsack_generator() {
        let inst = gen_knapsack_instance(&[3, 2, 2], &[r(1), r(1), r(1)], 4).unwrap();
        assert_eq!((inst.nf(), inst.nd()), (3, 4));
        let single = gen_knapsack_instance(&[3], &[q(7, 2)], 3).unwrap();
        assert_eq!(exact_opt(&single).unwrap().value, q(7, 2));
        let pair = gen_knapsack_instance(&[2, 2], &[r(1), r(5)], 2).unwrap();
        assert_eq!(exact_opt(&pair).unwrap().value, r(1));
        assert!(matches!(
            gen_knapsack_instance(&[1, 1], &[r(1), r(1)], 3),
            Err(InstanceError::KnapsackShort { total: 2, demand: 3 })
        ));
    }

    #[test]
    fn random_generator_is_deterministic_and_metric() {
        let p = RandomParams::default();
        let a = gen_random_instance(7, 3, 5, &p);
        assert_eq!(a, gen_random_instance(7, 3, 5, &p));
        assert_ne!(a.to_json(), gen_random_instance(8, 3, 5, &p).to_json());
        assert!(validate_instance(&a).is_empty());
        let tight = gen_random_instance(3, 2, 8, &p);
        assert!(tight.total_capacity() >= 8);
        assert!(tight.facilities().iter().all(|f| f.capacity <= 4));
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let inst = tiny1();
        let text = inst.to_json();
        assert_eq!(Instance::from_json(&text).unwrap(), inst);
        let hand = r#"{"facilities":[{"id":"f","open_cost":"5/2","capacity":1}],"clients":["c"],"metric":[[0,"1/3"],["1/3",0]]}"#;
        let parsed = Instance::from_json(hand).unwrap();
        assert_eq!(parsed.dist(0, 0), &q(1, 3));
        let short = r#"{"facilities":[{"id":"f","open_cost":0,"capacity":1}],"clients":["c","d"],"metric":[[0,0,0],[0,0,0],[0,0,0]]}"#;
        assert!(matches!(Instance::from_json(short), Err(InstanceError::Invalid(_))));
    }

    #[test]
    fn exact_opt_examples() {
        assert_eq!(exact_opt(&gen_gap_instance(2)).unwrap().value, r(1));
        let t = tiny1();
        let opt = exact_opt(&t).unwrap();
        assert_eq!(opt.value, r(4));
        assert_eq!(opt.solution, IntegralSolution { open: vec![0, 1], assign: vec![0, 1] });
        let single = Instance::new(
            vec![Facility { id: "f".into(), open_cost: q(9, 4), capacity: 1 }],
            vec!["c".into()],
            zero_metric(2),
        )
        .unwrap();
        assert_eq!(exact_opt(&single).unwrap().value, q(9, 4));
    }

    #[test]
    fn exact_opt_guards() {
        let big = gen_random_instance(1, 13, 3, &RandomParams::default());
        assert!(matches!(exact_opt(&big), Err(InstanceError::TooLarge { facilities: 13, bound: 12 })));
        let short = Instance::from_parts_unchecked(
            vec![Facility { id: "f".into(), open_cost: r(0), capacity: 1 }],
            vec!["c".into(), "d".into()],
            zero_metric(3),
        );
        assert!(matches!(exact_opt(&short), Err(InstanceError::Infeasible)));
    }

    #[test]
    fn cost_and_feasibility() {
        let g2 = gen_gap_instance(2);
        let both = IntegralSolution { open: vec![0, 1], assign: vec![0, 0, 1] };
        assert!(check_feasible_integral(&g2, &both));
        assert_eq!(solution_cost(&g2, &both), r(1));
        let t = tiny1();
        let only_b = IntegralSolution { open: vec![1], assign: vec![1, 1] };
        assert!(check_feasible_integral(&t, &only_b));
        assert_eq!(solution_cost(&t, &only_b), r(5));
        let none = IntegralSolution { open: vec![], assign: vec![0, 0] };
        assert!(!check_feasible_integral(&t, &none));
        let overloaded = IntegralSolution { open: vec![0], assign: vec![0, 0] };
        assert!(integral_violations(&t, &overloaded).contains(&SolutionViolation::Overloaded {
            facility: 0,
            load: 2,
            capacity: 1
        }));
    }

    #[test]
    fn solution_file_roundtrip() {
        let t = tiny1();
        let sol = IntegralSolution { open: vec![0, 1], assign: vec![0, 1] };
        let file = sol.to_file(&t);
        assert_eq!(IntegralSolution::from_file(&t, &file).unwrap(), sol);
    }

    /// Independent double loop over subsets and assignments.
    fn brute_force_opt(inst: &Instance) -> Rational {
        let nf = inst.nf();
        let nd = inst.nd();
        let mut best: Option<Rational> = None;
        for mask in 1usize..(1 << nf) {
            let total = nf.pow(nd as u32);
            for code in 0..total {
                let mut c = code;
                let assign: Vec<usize> = (0..nd)
                    .map(|_| {
                        let i = c % nf;
                        c /= nf;
                        i
                    })
                    .collect();
                let sol = IntegralSolution { open: (0..nf).filter(|i| mask >> i & 1 == 1).collect(), assign };
                if check_feasible_integral(inst, &sol) {
                    let v = solution_cost(inst, &sol);
                    if best.as_ref().is_none_or(|b| v < *b) {
                        best = Some(v);
                    }
                }
            }
        }
        best.unwrap()
    }

    #[test]
    fn exact_opt_matches_brute_force() {
        let p = RandomParams { open_cost: (0, 6), capacity: (1, 3), grid: 6 };
        for seed in 0..40u64 {
            let nf = 1 + (seed % 3) as usize;
            let nd = 1 + (seed % 4) as usize;
            let inst = gen_random_instance(seed, nf, nd, &p);
            let opt =
                exact_opt_with(&inst, ExactOptions { exec: Execution::Sequential, ..Default::default() }).unwrap();
            assert_eq!(opt.value, brute_force_opt(&inst), "seed {seed}");
            assert!(check_feasible_integral(&inst, &opt.solution));
            assert_eq!(solution_cost(&inst, &opt.solution), opt.value);
        }
    }

    #[test]
    fn gap_optimum_is_one() {
        for n in 1..=6 {
            assert_eq!(exact_opt(&gen_gap_instance(n)).unwrap().value, r(1), "n = {n}");
        }
    }

    #[test]
    fn enumeration_counts() {
        let t = tiny1();
        // {a}: infeasible (cap 1 < 2); {b}: 1 assignment; {a,b}: p,q in {a,b} with a holding ≤ 1 -> 3.
        assert_eq!(enumerate_feasible_solutions(&t, 100).unwrap().len(), 4);
        assert!(enumerate_feasible_solutions(&t, 2).is_none());
    }
}
