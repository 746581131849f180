//! The multi-commodity flow network MFN(g, x, y), its feasibility LP, and
//! violated-inequality extraction from the box-constrained dual.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::instances::{FractionalSolution, Instance};
use crate::lp::{solve_lp, Direction, LinearProgram, LpError, LpStatus, Sense};
use crate::rational::Rational;

/// A pre-assignment `g` (facility-major).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialAssignment {
    pub g: Vec<Vec<Rational>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PartialAssignmentError {
    #[error("g has shape {got:?}, expected {expected:?}")]
    Shape { expected: (usize, usize), got: (usize, usize) },
    #[error("g[{facility}][{client}] is negative")]
    Negative { facility: usize, client: usize },
    #[error("client {0} is assigned more than once")]
    ClientOver(usize),
    #[error("facility {0} is assigned beyond its capacity")]
    FacilityOver(usize),
}

impl PartialAssignment {
    pub fn new(g: Vec<Vec<Rational>>) -> Self {
        PartialAssignment { g }
    }

    pub fn zero(nf: usize, nd: usize) -> Self {
        PartialAssignment { g: vec![vec![Rational::zero(); nd]; nf] }
    }

    pub fn validate(&self, inst: &Instance) -> Result<(), PartialAssignmentError> {
        let got = (self.g.len(), self.g.first().map_or(0, Vec::len));
        if self.g.len() != inst.nf() || self.g.iter().any(|r| r.len() != inst.nd()) {
            return Err(PartialAssignmentError::Shape { expected: (inst.nf(), inst.nd()), got });
        }
        for (i, row) in self.g.iter().enumerate() {
            if let Some(j) = row.iter().position(Rational::is_negative) {
                return Err(PartialAssignmentError::Negative { facility: i, client: j });
            }
            if self.assigned_to(i) > Rational::from(inst.capacity(i)) {
                return Err(PartialAssignmentError::FacilityOver(i));
            }
        }
        if let Some(j) = self.demands().iter().position(Rational::is_negative) {
            return Err(PartialAssignmentError::ClientOver(j));
        }
        Ok(())
    }

    /// `d_j = 1 - sum_i g_ij`.
    pub fn demands(&self) -> Vec<Rational> {
        let nd = self.g.first().map_or(0, Vec::len);
        (0..nd).map(|j| Rational::one() - self.g.iter().map(|row| &row[j]).sum::<Rational>()).collect()
    }

    /// `G_i = sum_j g_ij`.
    pub fn assigned_to(&self, i: usize) -> Rational {
        self.g[i].iter().sum()
    }

    /// Hex SHA-256 over the canonical "p/q" rendering of `g`.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for row in &self.g {
            for v in row {
                h.update(v.to_string().as_bytes());
                h.update(b",");
            }
            h.update(b";");
        }
        hex::encode(h.finalize())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Node {
    Source(usize),
    Sink(usize),
    Facility(usize),
    FacilityOut(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ArcKind {
    /// `(i, i')`, shared by every commodity.
    Oblivious { facility: usize },
    /// `(j^s, i)`.
    Assign { facility: usize, client: usize },
    /// `(i, j^s)`.
    Reverse { facility: usize, client: usize },
    /// `(i', j^t)`, usable by commodity `j` only.
    Specific { facility: usize, client: usize },
}

/// `constant + sum coef * x_ij + sum coef * y_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LinearForm {
    pub constant: Rational,
    pub x: Vec<((usize, usize), Rational)>,
    pub y: Vec<(usize, Rational)>,
}

impl LinearForm {
    pub fn is_identically_zero(&self) -> bool {
        self.constant.is_zero() && self.x.iter().all(|t| t.1.is_zero()) && self.y.iter().all(|t| t.1.is_zero())
    }

    pub fn eval(&self, x: &[Vec<Rational>], y: &[Rational]) -> Rational {
        let mut v = self.constant.clone();
        for ((i, j), c) in &self.x {
            v += c * &x[*i][*j];
        }
        for (i, c) in &self.y {
            v += c * &y[*i];
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Arc {
    pub tail: Node,
    pub head: Node,
    pub kind: ArcKind,
    pub capacity: Rational,
    pub form: LinearForm,
}

/// MFN(g, x, y): one commodity per client, sending `d_j` from `j^s` to `j^t`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FlowNetwork {
    pub nf: usize,
    pub nd: usize,
    pub arcs: Vec<Arc>,
    pub demands: Vec<Rational>,
}

impl FlowNetwork {
    pub fn num_nodes(&self) -> usize {
        2 * self.nf + 2 * self.nd
    }

    pub fn node_index(&self, n: Node) -> usize {
        match n {
            Node::Source(j) => j,
            Node::Sink(j) => self.nd + j,
            Node::Facility(i) => 2 * self.nd + i,
            Node::FacilityOut(i) => 2 * self.nd + self.nf + i,
        }
    }

    pub fn oblivious(&self, i: usize) -> usize {
        i
    }

    pub fn assign_arc(&self, i: usize, j: usize) -> usize {
        self.nf + 3 * (i * self.nd + j)
    }

    pub fn reverse_arc(&self, i: usize, j: usize) -> usize {
        self.assign_arc(i, j) + 1
    }

    pub fn specific_arc(&self, i: usize, j: usize) -> usize {
        self.assign_arc(i, j) + 2
    }

    /// Whether commodity `j` may route along arc `a`.
    pub fn usable(&self, a: usize, j: usize) -> bool {
        match self.arcs[a].kind {
            ArcKind::Specific { client, .. } => client == j,
            _ => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MfnError {
    #[error("invalid partial assignment: {0}")]
    InvalidAssignment(#[from] PartialAssignmentError),
    #[error("{name} value {value} at {index:?} outside [0,1]")]
    OutOfBox { name: &'static str, index: (usize, usize), value: Rational },
    #[error("network is feasible; no violated inequality exists for this g")]
    Feasible,
    #[error("LP failure: {0}")]
    Lp(#[from] LpError),
    #[error("instance too large to enumerate ({facilities} facilities x {clients} clients, max capacity {capacity})")]
    TooLarge { facilities: usize, clients: usize, capacity: u64 },
    #[error("knapsack cover needs a zero metric")]
    NonzeroMetric,
    #[error("facility subset holds {held} clients, more than the {clients} available")]
    OversizedSubset { held: u64, clients: usize },
    #[error("facility index {0} out of range")]
    UnknownFacility(usize),
}

fn check_box(x: &[Vec<Rational>], y: &[Rational]) -> Result<(), MfnError> {
    let bad = |v: &Rational| v.is_negative() || v > &Rational::one();
    for (i, row) in x.iter().enumerate() {
        if let Some(j) = row.iter().position(bad) {
            return Err(MfnError::OutOfBox { name: "x", index: (i, j), value: row[j].clone() });
        }
    }
    if let Some(i) = y.iter().position(bad) {
        return Err(MfnError::OutOfBox { name: "y", index: (i, 0), value: y[i].clone() });
    }
    Ok(())
}

/// Builds MFN(g, x, y). Arcs are ordered: every `(i,i')`, then per `(i, j)` the
/// triple `(j^s,i)`, `(i,j^s)`, `(i',j^t)`. Zero-capacity arcs are kept.
pub fn build_mfn(
    inst: &Instance,
    g: &PartialAssignment,
    x: &[Vec<Rational>],
    y: &[Rational],
) -> Result<FlowNetwork, MfnError> {
    g.validate(inst)?;
    check_box(x, y)?;
    let (nf, nd) = (inst.nf(), inst.nd());
    let demands = g.demands();
    let mut arcs = Vec::with_capacity(nf + 3 * nf * nd);
    for i in 0..nf {
        let slack = Rational::from(inst.capacity(i)) - g.assigned_to(i);
        arcs.push(Arc {
            tail: Node::Facility(i),
            head: Node::FacilityOut(i),
            kind: ArcKind::Oblivious { facility: i },
            capacity: &y[i] * &slack,
            form: LinearForm { constant: Rational::zero(), x: vec![], y: vec![(i, slack)] },
        });
    }
    for i in 0..nf {
        for j in 0..nd {
            arcs.push(Arc {
                tail: Node::Source(j),
                head: Node::Facility(i),
                kind: ArcKind::Assign { facility: i, client: j },
                capacity: x[i][j].clone(),
                form: LinearForm { constant: Rational::zero(), x: vec![((i, j), Rational::one())], y: vec![] },
            });
            arcs.push(Arc {
                tail: Node::Facility(i),
                head: Node::Source(j),
                kind: ArcKind::Reverse { facility: i, client: j },
                capacity: g.g[i][j].clone(),
                form: LinearForm { constant: g.g[i][j].clone(), x: vec![], y: vec![] },
            });
            arcs.push(Arc {
                tail: Node::FacilityOut(i),
                head: Node::Sink(j),
                kind: ArcKind::Specific { facility: i, client: j },
                capacity: &y[i] * &demands[j],
                form: LinearForm { constant: Rational::zero(), x: vec![], y: vec![(i, demands[j].clone())] },
            });
        }
    }
    Ok(FlowNetwork { nf, nd, arcs, demands })
}

/// Per-commodity arc flows, `flows[j][a]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MultiFlow {
    pub flows: Vec<Vec<Rational>>,
}

impl MultiFlow {
    pub fn arc_total(&self, a: usize) -> Rational {
        self.flows.iter().map(|f| &f[a]).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum MfnFeasibility {
    Feasible(MultiFlow),
    Infeasible,
}

impl MfnFeasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, MfnFeasibility::Feasible(_))
    }
}

/// Extra rows `sum_{i in S} f_j(i,i') >= d_j / 2` for every commodity.
pub(crate) struct HalfDemandRows<'a> {
    pub small: &'a [bool],
}

/// Edge-based multi-commodity LP. Commodities with zero demand and arcs with zero
/// capacity carry no flow and are left out of the LP.
pub(crate) fn solve_multiflow(net: &FlowNetwork, extra: Option<HalfDemandRows<'_>>) -> Result<MfnFeasibility, LpError> {
    let mut lp = LinearProgram::new(Direction::Minimize);
    let na = net.arcs.len();
    let mut var: Vec<Vec<Option<usize>>> = vec![vec![None; na]; net.nd];
    let active: Vec<usize> = (0..net.nd).filter(|&j| net.demands[j].is_positive()).collect();
    for &j in &active {
        for a in 0..na {
            if net.usable(a, j) && net.arcs[a].capacity.is_positive() {
                var[j][a] = Some(lp.add_nonneg(format!("f_{j}_{a}")));
            }
        }
        let n = net.num_nodes();
        let mut rows: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); n];
        for a in 0..na {
            if let Some(v) = var[j][a] {
                rows[net.node_index(net.arcs[a].tail)].push((v, Rational::one()));
                rows[net.node_index(net.arcs[a].head)].push((v, -Rational::one()));
            }
        }
        let (src, snk) = (net.node_index(Node::Source(j)), net.node_index(Node::Sink(j)));
        for (node, terms) in rows.into_iter().enumerate() {
            if node == snk {
                continue;
            }
            let rhs = if node == src { net.demands[j].clone() } else { Rational::zero() };
            if terms.is_empty() {
                if rhs.is_zero() {
                    continue;
                }
                return Ok(MfnFeasibility::Infeasible);
            }
            lp.add_constraint(format!("flow_{j}_{node}"), terms, Sense::Eq, rhs);
        }
        if let Some(extra) = &extra {
            let terms: Vec<(usize, Rational)> = (0..net.nf)
                .filter(|&i| extra.small[i])
                .filter_map(|i| var[j][net.oblivious(i)].map(|v| (v, Rational::one())))
                .collect();
            let half = &net.demands[j] / Rational::from(2u64);
            if terms.is_empty() {
                return Ok(MfnFeasibility::Infeasible);
            }
            lp.add_constraint(format!("half_{j}"), terms, Sense::Ge, half);
        }
    }
    // After cancelling cycles no commodity puts more than its demand on an arc, so
    // a capacity covering the users' total demand never binds. Arcs (i,i') lie on
    // no cycle, so cancelling leaves the half-demand rows intact.
    for a in 0..na {
        let users: Vec<usize> = active.iter().copied().filter(|&j| var[j][a].is_some()).collect();
        let reach: Rational = users.iter().map(|&j| net.demands[j].clone()).sum();
        if users.is_empty() || net.arcs[a].capacity >= reach {
            continue;
        }
        let terms = users.iter().map(|&j| (var[j][a].unwrap(), Rational::one())).collect();
        lp.add_constraint(format!("cap_{a}"), terms, Sense::Le, net.arcs[a].capacity.clone());
    }
    let res = solve_lp(&lp)?;
    if res.status != LpStatus::Optimal {
        return Ok(MfnFeasibility::Infeasible);
    }
    let flows = (0..net.nd)
        .map(|j| var[j].iter().map(|v| v.map_or_else(Rational::zero, |v| res.primal[v].clone())).collect())
        .collect();
    Ok(MfnFeasibility::Feasible(MultiFlow { flows }))
}

/// Decides whether every commodity can route its demand simultaneously.
pub fn check_mfn_feasible(net: &FlowNetwork) -> Result<MfnFeasibility, LpError> {
    solve_multiflow(net, None)
}

/// Checks a multi-flow against conservation, demands and joint capacities.
pub fn is_valid_multiflow(net: &FlowNetwork, flow: &MultiFlow) -> bool {
    let na = net.arcs.len();
    if flow.flows.len() != net.nd || flow.flows.iter().any(|f| f.len() != na) {
        return false;
    }
    for j in 0..net.nd {
        let mut excess = vec![Rational::zero(); net.num_nodes()];
        for (a, f) in flow.flows[j].iter().enumerate() {
            if f.is_negative() || (!f.is_zero() && !net.usable(a, j)) {
                return false;
            }
            excess[net.node_index(net.arcs[a].tail)] -= f;
            excess[net.node_index(net.arcs[a].head)] += f;
        }
        for (node, e) in excess.iter().enumerate() {
            let expected = if node == net.node_index(Node::Source(j)) {
                -net.demands[j].clone()
            } else if node == net.node_index(Node::Sink(j)) {
                net.demands[j].clone()
            } else {
                Rational::zero()
            };
            if *e != expected {
                return false;
            }
        }
    }
    (0..na).all(|a| flow.arc_total(a) <= net.arcs[a].capacity)
}

/// A valid inequality `sum coef * x_ij + sum coef * y_i >= rhs`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cut {
    pub x: Vec<Vec<Rational>>,
    pub y: Vec<Rational>,
    pub rhs: Rational,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub g_digest: String,
    /// `z_j` per client.
    pub z: Vec<Rational>,
    /// `l_a` per arc, in network order.
    pub l: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutTerm {
    pub var: String,
    pub coef: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerializedCut {
    pub terms: Vec<CutTerm>,
    pub sense: String,
    pub rhs: Rational,
    pub g_digest: String,
    pub z: Vec<Rational>,
    pub l: Vec<Rational>,
}

impl Cut {
    pub fn lhs(&self, x: &[Vec<Rational>], y: &[Rational]) -> Rational {
        let mut v = Rational::zero();
        for (i, row) in self.x.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if !c.is_zero() {
                    v += c * &x[i][j];
                }
            }
        }
        for (i, c) in self.y.iter().enumerate() {
            if !c.is_zero() {
                v += c * &y[i];
            }
        }
        v
    }

    pub fn is_satisfied(&self, x: &[Vec<Rational>], y: &[Rational]) -> bool {
        self.lhs(x, y) >= self.rhs
    }

    pub fn is_satisfied_by(&self, sol: &FractionalSolution) -> bool {
        self.is_satisfied(&sol.x, &sol.y)
    }

    /// Nonzero terms keyed `x:<facility>:<client>` and `y:<facility>` by id.
    pub fn to_serialized(&self, inst: &Instance) -> SerializedCut {
        let mut terms = Vec::new();
        for (i, row) in self.x.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if !c.is_zero() {
                    terms.push(CutTerm {
                        var: format!("x:{}:{}", inst.facility(i).id, inst.clients()[j]),
                        coef: c.clone(),
                    });
                }
            }
        }
        for (i, c) in self.y.iter().enumerate() {
            if !c.is_zero() {
                terms.push(CutTerm { var: format!("y:{}", inst.facility(i).id), coef: c.clone() });
            }
        }
        SerializedCut {
            terms,
            sense: ">=".into(),
            rhs: self.rhs.clone(),
            g_digest: self.provenance.g_digest.clone(),
            z: self.provenance.z.clone(),
            l: self.provenance.l.clone(),
        }
    }

    pub fn describe(&self, inst: &Instance) -> String {
        let s = self.to_serialized(inst);
        let lhs: Vec<String> = s.terms.iter().map(|t| format!("{} {}", t.coef, t.var)).collect();
        let lhs = if lhs.is_empty() { "0".to_string() } else { lhs.join(" + ") };
        format!("{lhs} >= {}", s.rhs)
    }
}

/// Turns a dual point into the inequality `sum_j d_j z_j <= sum_a c_a(x,y) l_a`.
pub fn cut_from_dual(net: &FlowNetwork, g: &PartialAssignment, z: Vec<Rational>, l: Vec<Rational>) -> Cut {
    let mut x = vec![vec![Rational::zero(); net.nd]; net.nf];
    let mut y = vec![Rational::zero(); net.nf];
    let mut rhs: Rational = net.demands.iter().zip(&z).map(|(d, z)| d * z).sum();
    for (a, arc) in net.arcs.iter().enumerate() {
        if l[a].is_zero() {
            continue;
        }
        rhs -= &arc.form.constant * &l[a];
        for ((i, j), c) in &arc.form.x {
            x[*i][*j] += c * &l[a];
        }
        for (i, c) in &arc.form.y {
            y[*i] += c * &l[a];
        }
    }
    Cut { x, y, rhs, provenance: Provenance { g_digest: g.digest(), z, l } }
}

/// Shortest `l`-length from `j^s` to `j^t` for commodity `j` (Bellman-Ford;
/// lengths are nonnegative). `None` when `j^t` is unreachable.
pub fn commodity_distance(net: &FlowNetwork, l: &[Rational], j: usize) -> Option<Rational> {
    let n = net.num_nodes();
    let mut dist: Vec<Option<Rational>> = vec![None; n];
    dist[net.node_index(Node::Source(j))] = Some(Rational::zero());
    for _ in 0..n {
        let mut changed = false;
        for (a, arc) in net.arcs.iter().enumerate() {
            if !net.usable(a, j) {
                continue;
            }
            let (u, v) = (net.node_index(arc.tail), net.node_index(arc.head));
            if let Some(du) = dist[u].clone() {
                let cand = du + &l[a];
                if dist[v].as_ref().is_none_or(|dv| cand < *dv) {
                    dist[v] = Some(cand);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist[net.node_index(Node::Sink(j))].clone()
}

/// Whether `(z, l)` lies in the box-constrained dual region: `0 <= z, l <= 1`
/// and `z_j <= dist_l(j^s, j^t)` for every commodity.
pub fn dual_point_feasible(net: &FlowNetwork, z: &[Rational], l: &[Rational]) -> bool {
    let unit = |v: &Rational| !v.is_negative() && v <= &Rational::one();
    if z.len() != net.nd || l.len() != net.arcs.len() || !z.iter().all(unit) || !l.iter().all(unit) {
        return false;
    }
    (0..net.nd).all(|j| commodity_distance(net, l, j).is_none_or(|d| z[j] <= d))
}

/// `sum_a c_a l_a - sum_j d_j z_j` at the network's concrete capacities.
pub fn dual_objective(net: &FlowNetwork, z: &[Rational], l: &[Rational]) -> Rational {
    let cap: Rational = net.arcs.iter().zip(l).map(|(a, l)| &a.capacity * l).sum();
    let dem: Rational = net.demands.iter().zip(z).map(|(d, z)| d * z).sum();
    cap - dem
}

/// Minimises `sum_a c_a l_a - sum_j d_j z_j` over the dual box in node-potential
/// form and returns the optimal vertex `(z, l)` with its objective.
///
/// Arcs whose capacity form vanishes identically carry no flow for any `(x, y)`;
/// their length is fixed at 1, which costs nothing and only relaxes the potential
/// rows. Zero-demand commodities get `z_j = 0`.
pub fn solve_separation_dual(net: &FlowNetwork) -> Result<(Vec<Rational>, Vec<Rational>, Rational), LpError> {
    let na = net.arcs.len();
    let mut lp = LinearProgram::new(Direction::Minimize);
    let unit = || (Some(Rational::zero()), Some(Rational::one()));
    let fixed: Vec<bool> = net.arcs.iter().map(|a| a.form.is_identically_zero()).collect();
    let mut lvar = vec![None; na];
    for a in (0..na).filter(|&a| !fixed[a]) {
        // Sink arcs of zero-demand commodities appear in no potential row.
        if let ArcKind::Specific { client, .. } = net.arcs[a].kind {
            if net.demands[client].is_zero() {
                continue;
            }
        }
        let (lo, hi) = unit();
        let v = lp.add_var(format!("l_{a}"), lo, hi);
        lp.set_objective_coef(v, net.arcs[a].capacity.clone());
        lvar[a] = Some(v);
    }
    let mut zvar = vec![None; net.nd];
    for j in (0..net.nd).filter(|&j| net.demands[j].is_positive()) {
        let (lo, hi) = unit();
        let zj = lp.add_var(format!("z_{j}"), lo, hi);
        lp.set_objective_coef(zj, -net.demands[j].clone());
        zvar[j] = Some(zj);
        let src = net.node_index(Node::Source(j));
        let mut phi = vec![None; net.num_nodes()];
        for node in (0..net.num_nodes()).filter(|&n| n != src) {
            if node < 2 * net.nd && node >= net.nd && node != net.node_index(Node::Sink(j)) {
                continue;
            }
            phi[node] = Some(lp.add_nonneg(format!("phi_{j}_{node}")));
        }
        for a in (0..na).filter(|&a| net.usable(a, j)) {
            let (u, v) = (net.node_index(net.arcs[a].tail), net.node_index(net.arcs[a].head));
            // phi(v) - phi(u) - l_a <= 0, with phi(j^s) = 0.
            let mut terms = Vec::with_capacity(3);
            if let Some(pv) = phi[v] {
                terms.push((pv, Rational::one()));
            }
            if let Some(pu) = phi[u] {
                terms.push((pu, -Rational::one()));
            }
            let rhs = match lvar[a] {
                Some(la) => {
                    terms.push((la, -Rational::one()));
                    Rational::zero()
                }
                None => Rational::one(),
            };
            if terms.iter().any(|t| t.1.is_positive()) {
                lp.add_constraint(format!("pot_{j}_{a}"), terms, Sense::Le, rhs);
            }
        }
        let pt = phi[net.node_index(Node::Sink(j))].expect("sink potential");
        lp.add_constraint(
            format!("reach_{j}"),
            vec![(zj, Rational::one()), (pt, -Rational::one())],
            Sense::Le,
            Rational::zero(),
        );
    }
    let res = solve_lp(&lp)?;
    if res.status != LpStatus::Optimal {
        return Err(LpError::Internal("separation dual is bounded and nonempty"));
    }
    let z = zvar.iter().map(|v| v.map_or_else(Rational::zero, |v| res.primal[v].clone())).collect();
    let l = (0..na)
        .map(|a| match lvar[a] {
            Some(v) => res.primal[v].clone(),
            None if fixed[a] => Rational::one(),
            None => Rational::zero(),
        })
        .collect();
    Ok((z, l, res.objective))
}

/// A violated inequality for an infeasible MFN(g*, x*, y*).
///
/// Fails with [`MfnError::Feasible`] when the dual optimum is nonnegative.
pub fn find_violated_cut(
    inst: &Instance,
    g: &PartialAssignment,
    x: &[Vec<Rational>],
    y: &[Rational],
) -> Result<Cut, MfnError> {
    let net = build_mfn(inst, g, x, y)?;
    let (z, l, value) = solve_separation_dual(&net)?;
    if !value.is_negative() {
        return Err(MfnError::Feasible);
    }
    let cut = cut_from_dual(&net, g, z, l);
    if cut.is_satisfied(x, y) {
        return Err(LpError::Internal("dual optimum did not yield a violated inequality").into());
    }
    Ok(cut)
}

/// `x̄_ij` = commodity-`j` flow on `(j^s, i)` in a flow for MFN(0, x, y).
pub fn project_to_standard(net: &FlowNetwork, flow: &MultiFlow) -> Vec<Vec<Rational>> {
    (0..net.nf).map(|i| (0..net.nd).map(|j| flow.flows[j][net.assign_arc(i, j)].clone()).collect()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StandardViolation {
    AssignAboveOpen { facility: usize, client: usize },
    NotAssigned { client: usize },
    OverCapacity { facility: usize },
    OutOfBox,
}

/// Violated rows of `x <= y`, `sum_i x_ij = 1`, `sum_j x_ij <= U_i y_i`, `0 <= x, y <= 1`.
pub fn standard_violations(inst: &Instance, x: &[Vec<Rational>], y: &[Rational]) -> Vec<StandardViolation> {
    let mut out = Vec::new();
    if check_box(x, y).is_err() {
        out.push(StandardViolation::OutOfBox);
    }
    for i in 0..inst.nf() {
        for j in 0..inst.nd() {
            if x[i][j] > y[i] {
                out.push(StandardViolation::AssignAboveOpen { facility: i, client: j });
            }
        }
        if x[i].iter().sum::<Rational>() > Rational::from(inst.capacity(i)) * &y[i] {
            out.push(StandardViolation::OverCapacity { facility: i });
        }
    }
    for j in 0..inst.nd() {
        if x.iter().map(|row| &row[j]).sum::<Rational>() != Rational::one() {
            out.push(StandardViolation::NotAssigned { client: j });
        }
    }
    out
}

/// The flow-cover inequality for a zero-metric instance and a facility subset `A`
/// with `sum_A U_i <= |D|`: pre-assign clients to fill `A`, then cover the rest.
pub fn knapsack_cover_cut(inst: &Instance, subset: &[usize]) -> Result<Cut, MfnError> {
    if !inst.has_zero_metric() {
        return Err(MfnError::NonzeroMetric);
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= inst.nf()) {
        return Err(MfnError::UnknownFacility(bad));
    }
    let mut in_a = vec![false; inst.nf()];
    for &i in subset {
        in_a[i] = true;
    }
    let held: u64 = (0..inst.nf()).filter(|&i| in_a[i]).map(|i| inst.capacity(i)).sum();
    if held > inst.nd() as u64 {
        return Err(MfnError::OversizedSubset { held, clients: inst.nd() });
    }
    let mut g = PartialAssignment::zero(inst.nf(), inst.nd());
    let mut next = 0;
    for i in (0..inst.nf()).filter(|&i| in_a[i]) {
        for _ in 0..inst.capacity(i) {
            g.g[i][next] = Rational::one();
            next += 1;
        }
    }
    let rest = inst.nd() - next;
    let net =
        build_mfn(inst, &g, &vec![vec![Rational::zero(); inst.nd()]; inst.nf()], &vec![Rational::zero(); inst.nf()])?;
    let mut z = vec![Rational::zero(); inst.nd()];
    for zj in z.iter_mut().skip(next) {
        *zj = Rational::one();
    }
    let mut l = vec![Rational::zero(); net.arcs.len()];
    for i in 0..inst.nf() {
        if !in_a[i] && inst.capacity(i) > rest as u64 {
            for j in next..inst.nd() {
                l[net.specific_arc(i, j)] = Rational::one();
            }
        } else {
            l[net.oblivious(i)] = Rational::one();
        }
    }
    Ok(cut_from_dual(&net, &g, z, l))
}

/// Every 0/1 valid partial assignment, each once. Guarded to `nf * nd <= 9`
/// and capacities at most 3.
pub fn enumerate_valid_integral_g(inst: &Instance) -> Result<Vec<PartialAssignment>, MfnError> {
    let (nf, nd) = (inst.nf(), inst.nd());
    let max_cap = inst.facilities().iter().map(|f| f.capacity).max().unwrap_or(0);
    if nf * nd > 9 || max_cap > 3 {
        return Err(MfnError::TooLarge { facilities: nf, clients: nd, capacity: max_cap });
    }
    // Each client picks no facility (code nf) or one facility.
    let total = (nf + 1).pow(nd as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut g = PartialAssignment::zero(nf, nd);
        let mut load = vec![0u64; nf];
        let mut ok = true;
        for j in 0..nd {
            let pick = c % (nf + 1);
            c /= nf + 1;
            if pick < nf {
                load[pick] += 1;
                ok &= load[pick] <= inst.capacity(pick);
                g.g[pick][j] = Rational::one();
            }
        }
        if ok {
            out.push(g);
        }
    }
    Ok(out)
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Source(j) => write!(f, "s{j}"),
            Node::Sink(j) => write!(f, "t{j}"),
            Node::Facility(i) => write!(f, "f{i}"),
            Node::FacilityOut(i) => write!(f, "f{i}'"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{
        enumerate_feasible_solutions, gen_gap_instance, gen_knapsack_instance, gen_random_instance, Facility,
        RandomParams,
    };
    use crate::rational::q;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn r(n: i64) -> Rational {
        Rational::from_int(n)
    }

    /// Standard-LP optimum of GAP(n): y = (1, 1/n), x_{i1 j} = n/(n+1), x_{i2 j} = 1/(n+1).
    fn gap_point(n: i64) -> (Vec<Vec<Rational>>, Vec<Rational>) {
        let nd = (n + 1) as usize;
        (vec![vec![q(n, n + 1); nd], vec![q(1, n + 1); nd]], vec![r(1), q(1, n)])
    }

    /// g saturating i1 with the first n clients.
    fn gap_saturating(n: usize) -> PartialAssignment {
        let mut g = PartialAssignment::zero(2, n + 1);
        for j in 0..n {
            g.g[0][j] = r(1);
        }
        g
    }

    #[test]
    fn zero_g_network() {
        let inst = gen_gap_instance(2);
        let (x, y) = gap_point(2);
        let net = build_mfn(&inst, &PartialAssignment::zero(2, 3), &x, &y).unwrap();
        assert_eq!(net.demands, vec![r(1); 3]);
        assert_eq!(net.arcs[net.oblivious(0)].capacity, r(2));
        assert_eq!(net.arcs[net.oblivious(1)].capacity, r(1));
        assert_eq!(net.num_nodes(), 2 * 2 + 2 * 3);
        assert_eq!(net.arcs.len(), 2 + 3 * 2 * 3);
    }

    #[test]
    fn gap5_network_and_infeasibility() {
        let inst = gen_gap_instance(5);
        let (x, y) = gap_point(5);
        let g = gap_saturating(5);
        let net = build_mfn(&inst, &g, &x, &y).unwrap();
        assert_eq!(net.arcs[net.oblivious(0)].capacity, r(0));
        for j in 0..6 {
            assert_eq!(net.arcs[net.specific_arc(1, j)].capacity, q(1, 5) * &net.demands[j]);
        }
        assert_eq!(net.arcs[net.specific_arc(1, 5)].capacity, q(1, 5));
        assert_eq!(check_mfn_feasible(&net).unwrap(), MfnFeasibility::Infeasible);

        let cut = find_violated_cut(&inst, &g, &x, &y).unwrap();
        assert!(!cut.is_satisfied(&x, &y));
        assert!(dual_point_feasible(&net, &cut.provenance.z, &cut.provenance.l));
        // Any point with y2 = 1 and zero distances satisfies it; y2 < 1 cannot.
        let (mut x1, mut y1) = gap_point(5);
        y1[1] = r(1);
        x1[0] = vec![q(5, 6); 6];
        assert!(cut.is_satisfied(&x1, &y1));
    }

    #[test]
    fn all_zero_demands_are_feasible() {
        let inst = gen_gap_instance(1);
        let mut g = PartialAssignment::zero(2, 2);
        g.g[0][0] = r(1);
        g.g[1][1] = r(1);
        let net = build_mfn(&inst, &g, &[vec![r(0); 2], vec![r(0); 2]], &[r(0), r(0)]).unwrap();
        match check_mfn_feasible(&net).unwrap() {
            MfnFeasibility::Feasible(f) => assert!(f.flows.iter().flatten().all(Rational::is_zero)),
            MfnFeasibility::Infeasible => panic!("zero demand must be feasible"),
        }
    }

    #[test]
    fn invalid_inputs_rejected() {
        let inst = gen_gap_instance(1);
        let mut g = PartialAssignment::zero(2, 2);
        g.g[0][0] = q(2, 3);
        g.g[1][0] = q(2, 3);
        let x = vec![vec![r(0); 2]; 2];
        let y = vec![r(0); 2];
        assert!(matches!(
            build_mfn(&inst, &g, &x, &y),
            Err(MfnError::InvalidAssignment(PartialAssignmentError::ClientOver(0)))
        ));
        let y_bad = vec![r(2), r(0)];
        assert!(matches!(build_mfn(&inst, &PartialAssignment::zero(2, 2), &x, &y_bad), Err(MfnError::OutOfBox { .. })));
    }

    fn tiny1() -> Instance {
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
    fn integral_tiny1_feasible_for_every_integral_g() {
        let t = tiny1();
        let sol = crate::instances::IntegralSolution { open: vec![0, 1], assign: vec![0, 1] }.to_fractional(&t);
        for g in enumerate_valid_integral_g(&t).unwrap() {
            let net = build_mfn(&t, &g, &sol.x, &sol.y).unwrap();
            match check_mfn_feasible(&net).unwrap() {
                MfnFeasibility::Feasible(f) => assert!(is_valid_multiflow(&net, &f)),
                MfnFeasibility::Infeasible => panic!("relaxation violated for g = {:?}", g.g),
            }
        }
    }

    #[test]
    fn enumeration_counts() {
        let one = |cap: u64, nf: usize, nd: usize| {
            let facilities =
                (0..nf).map(|i| Facility { id: format!("f{i}"), open_cost: r(0), capacity: cap }).collect();
            let clients = (0..nd).map(|j| format!("c{j}")).collect();
            let n = nf + nd;
            Instance::from_parts_unchecked(facilities, clients, vec![vec![r(0); n]; n])
        };
        assert_eq!(enumerate_valid_integral_g(&one(1, 1, 1)).unwrap().len(), 2);
        assert_eq!(enumerate_valid_integral_g(&one(2, 1, 2)).unwrap().len(), 4);
        assert_eq!(enumerate_valid_integral_g(&one(1, 2, 1)).unwrap().len(), 3);
        assert!(enumerate_valid_integral_g(&one(1, 4, 3)).is_err());
        assert!(enumerate_valid_integral_g(&one(4, 1, 1)).is_err());
    }

    #[test]
    fn projection_examples() {
        let single = Instance::new(
            vec![Facility { id: "f".into(), open_cost: r(0), capacity: 1 }],
            vec!["c".into()],
            vec![vec![r(0); 2]; 2],
        )
        .unwrap();
        let net = build_mfn(&single, &PartialAssignment::zero(1, 1), &[vec![r(1)]], &[r(1)]).unwrap();
        let MfnFeasibility::Feasible(flow) = check_mfn_feasible(&net).unwrap() else { panic!() };
        assert_eq!(project_to_standard(&net, &flow), vec![vec![r(1)]]);

        let none =
            Instance::new(vec![Facility { id: "f".into(), open_cost: r(0), capacity: 1 }], vec![], vec![vec![r(0)]])
                .unwrap();
        let net = build_mfn(&none, &PartialAssignment::zero(1, 0), &[vec![]], &[r(0)]).unwrap();
        let flow = MultiFlow { flows: vec![] };
        assert_eq!(project_to_standard(&net, &flow), vec![Vec::<Rational>::new()]);
    }

    #[test]
    fn projection_on_random_tiny1_points() {
        let t = tiny1();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 10 {
            let x: Vec<Vec<Rational>> = (0..2).map(|_| (0..2).map(|_| q(rng.gen_range(0..=4), 4)).collect()).collect();
            let y: Vec<Rational> = (0..2).map(|_| q(rng.gen_range(0..=4), 4)).collect();
            let net = build_mfn(&t, &PartialAssignment::zero(2, 2), &x, &y).unwrap();
            if let MfnFeasibility::Feasible(flow) = check_mfn_feasible(&net).unwrap() {
                let xbar = project_to_standard(&net, &flow);
                assert!(standard_violations(&t, &xbar, &y).is_empty());
                for i in 0..2 {
                    for j in 0..2 {
                        assert!(xbar[i][j] <= x[i][j]);
                    }
                }
                checked += 1;
            }
        }
    }

    #[test]
    fn knapsack_cover_examples() {
        let inst = gen_knapsack_instance(&[3, 2, 2], &[r(1), r(1), r(1)], 4).unwrap();
        let empty = knapsack_cover_cut(&inst, &[]).unwrap();
        assert_eq!(empty.y, vec![r(3), r(2), r(2)]);
        assert_eq!(empty.rhs, r(4));
        let a1 = knapsack_cover_cut(&inst, &[0]).unwrap();
        assert_eq!(a1.y, vec![r(0), r(1), r(1)]);
        assert_eq!(a1.rhs, r(1));
        assert!(a1.x.iter().flatten().all(Rational::is_zero));
        let full = knapsack_cover_cut(&inst, &[1, 2]).unwrap();
        assert!(full.y.iter().all(Rational::is_zero) && full.rhs.is_zero());
        assert!(matches!(knapsack_cover_cut(&inst, &[0, 1]), Err(MfnError::OversizedSubset { held: 5, clients: 4 })));
        assert!(matches!(knapsack_cover_cut(&tiny1(), &[]), Err(MfnError::NonzeroMetric)));
    }

    #[test]
    fn cut_serialization() {
        let inst = gen_gap_instance(5);
        let (x, y) = gap_point(5);
        let cut = find_violated_cut(&inst, &gap_saturating(5), &x, &y).unwrap();
        let s = cut.to_serialized(&inst);
        assert_eq!(s.sense, ">=");
        assert!(s.terms.iter().all(|t| t.var.starts_with("x:") || t.var.starts_with("y:")));
        assert_eq!(s.g_digest.len(), 64);
        let text = serde_json::to_string(&s).unwrap();
        let back: SerializedCut = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    /// Node-potential dual optimum equals the path form evaluated by shortest paths:
    /// for the returned `l`, the best `z` is `min(1, dist)` per commodity.
    #[test]
    fn dual_vertex_is_path_optimal() {
        let p = RandomParams { open_cost: (0, 5), capacity: (1, 3), grid: 5 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..12 {
            let inst = gen_random_instance(seed, 2, 3, &p);
            let x: Vec<Vec<Rational>> = (0..2).map(|_| (0..3).map(|_| q(rng.gen_range(0..=3), 3)).collect()).collect();
            let y: Vec<Rational> = (0..2).map(|_| q(rng.gen_range(0..=3), 3)).collect();
            let net = build_mfn(&inst, &PartialAssignment::zero(2, 3), &x, &y).unwrap();
            let (z, l, value) = solve_separation_dual(&net).unwrap();
            assert!(dual_point_feasible(&net, &z, &l));
            assert_eq!(dual_objective(&net, &z, &l), value);
            for j in 0..3 {
                let best = commodity_distance(&net, &l, j).map_or(r(1), |d| d.min(r(1)));
                assert_eq!(z[j], best, "seed {seed} commodity {j}");
            }
            let feasible = check_mfn_feasible(&net).unwrap().is_feasible();
            assert_eq!(feasible, !value.is_negative(), "seed {seed}");
        }
    }

    /// Cuts found at random infeasible points hold at every integral solution.
    #[test]
    fn cuts_hold_at_integral_solutions() {
        let p = RandomParams { open_cost: (0, 5), capacity: (1, 3), grid: 4 };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut found = 0;
        for seed in 0..40 {
            let inst = gen_random_instance(seed, 2, 3, &p);
            let x: Vec<Vec<Rational>> = (0..2).map(|_| (0..3).map(|_| q(rng.gen_range(0..=2), 2)).collect()).collect();
            let y: Vec<Rational> = (0..2).map(|_| q(rng.gen_range(0..=2), 2)).collect();
            let gs = enumerate_valid_integral_g(&inst).unwrap();
            let g = &gs[rng.gen_range(0..gs.len())];
            match find_violated_cut(&inst, g, &x, &y) {
                Ok(cut) => {
                    found += 1;
                    for sol in enumerate_feasible_solutions(&inst, 10_000).unwrap() {
                        assert!(cut.is_satisfied_by(&sol.to_fractional(&inst)), "seed {seed}");
                    }
                }
                Err(MfnError::Feasible) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!(found > 5);
    }
}
