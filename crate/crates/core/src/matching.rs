//! Fractional capacitated b-matchings between clients and fully opened
//! facilities, the residual reachability sets built from them, and integral
//! min-cost assignment.

use std::collections::VecDeque;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::flow::{MaxFlow, MinCostFlow};
use crate::instances::Instance;
use crate::mfn::PartialAssignment;
use crate::rational::Rational;

/// A fractional b-matching `z` (facility-major, zero off `members`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BMatching {
    pub z: Vec<Vec<Rational>>,
    pub edge_caps: Vec<Vec<Rational>>,
    pub members: Vec<bool>,
    pub caps: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum BMatchingError {
    #[error("z[{facility}][{client}] outside [0, edge cap]")]
    EdgeBound { facility: usize, client: usize },
    #[error("client {0} is matched more than once")]
    ClientOver(usize),
    #[error("facility {0} exceeds its capacity")]
    FacilityOver(usize),
    #[error("facility {0} is not a member but carries matching weight")]
    NonMember(usize),
}

impl BMatching {
    /// Wraps a given `z` after checking the b-matching constraints.
    pub fn from_parts(
        z: Vec<Vec<Rational>>,
        edge_caps: Vec<Vec<Rational>>,
        members: Vec<bool>,
        caps: Vec<u64>,
    ) -> Result<Self, BMatchingError> {
        let bm = BMatching { z, edge_caps, members, caps };
        bm.check()?;
        Ok(bm)
    }

    pub fn check(&self) -> Result<(), BMatchingError> {
        for (i, row) in self.z.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if v.is_negative() || v > &self.edge_caps[i][j] {
                    return Err(BMatchingError::EdgeBound { facility: i, client: j });
                }
                if !self.members[i] && !v.is_zero() {
                    return Err(BMatchingError::NonMember(i));
                }
            }
            if self.load(i) > Rational::from(self.caps[i]) {
                return Err(BMatchingError::FacilityOver(i));
            }
        }
        for j in 0..self.nd() {
            if self.client_total(j) > Rational::one() {
                return Err(BMatchingError::ClientOver(j));
            }
        }
        Ok(())
    }

    pub fn nf(&self) -> usize {
        self.z.len()
    }

    pub fn nd(&self) -> usize {
        self.z.first().map_or(0, Vec::len)
    }

    pub fn load(&self, i: usize) -> Rational {
        self.z[i].iter().sum()
    }

    pub fn client_total(&self, j: usize) -> Rational {
        self.z.iter().map(|row| &row[j]).sum()
    }

    pub fn value(&self) -> Rational {
        (0..self.nf()).map(|i| self.load(i)).sum()
    }
}

/// Maximum fractional b-matching as a max-flow: source to each client (cap 1),
/// client to member facility (cap `edge_caps`), facility to sink (cap `caps`).
pub fn max_fractional_bmatching(members: &[bool], edge_caps: &[Vec<Rational>], caps: &[u64]) -> BMatching {
    let nf = members.len();
    let nd = edge_caps.first().map_or(0, Vec::len);
    let (s, t) = (nf + nd, nf + nd + 1);
    let mut g = MaxFlow::new(nf + nd + 2);
    for j in 0..nd {
        g.add_arc(s, nf + j, Rational::one());
    }
    let mut handles = vec![vec![None; nd]; nf];
    for i in (0..nf).filter(|&i| members[i]) {
        for j in 0..nd {
            if edge_caps[i][j].is_positive() {
                handles[i][j] = Some(g.add_arc(nf + j, i, edge_caps[i][j].clone()));
            }
        }
        g.add_arc(i, t, Rational::from(caps[i]));
    }
    g.run(s, t);
    let z = handles
        .iter()
        .map(|row| row.iter().map(|h| h.map_or_else(Rational::zero, |h| g.flow_on(h))).collect())
        .collect();
    BMatching { z, edge_caps: edge_caps.to_vec(), members: members.to_vec(), caps: caps.to_vec() }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ResidualSets {
    pub facilities: Vec<bool>,
    pub clients: Vec<bool>,
}

impl ResidualSets {
    pub fn facility_ids(&self) -> Vec<usize> {
        (0..self.facilities.len()).filter(|&i| self.facilities[i]).collect()
    }

    pub fn client_ids(&self) -> Vec<usize> {
        (0..self.clients.len()).filter(|&j| self.clients[j]).collect()
    }
}

/// Facilities and clients reachable from unsaturated clients over
/// `{(j,i): z < cap} ∪ {(i,j): z > 0}`, restricted to member facilities.
pub fn residual_reachability(bm: &BMatching) -> ResidualSets {
    let (nf, nd) = (bm.nf(), bm.nd());
    let mut facilities = vec![false; nf];
    let mut clients = vec![false; nd];
    let mut queue = VecDeque::new();
    for j in 0..nd {
        if bm.client_total(j) < Rational::one() {
            clients[j] = true;
            queue.push_back(j);
        }
    }
    while let Some(j) = queue.pop_front() {
        for i in 0..nf {
            if bm.members[i] && !facilities[i] && bm.z[i][j] < bm.edge_caps[i][j] {
                facilities[i] = true;
                for k in 0..nd {
                    if !clients[k] && bm.z[i][k].is_positive() {
                        clients[k] = true;
                        queue.push_back(k);
                    }
                }
            }
        }
    }
    ResidualSets { facilities, clients }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum PropertyViolation {
    /// (a) a reachable facility is not saturated.
    Unsaturated { facility: usize },
    /// (b) unreachable facility, reachable client, edge below its cap.
    EdgeBelowCap { facility: usize, client: usize },
    /// (c) reachable facility, unreachable client, positive weight.
    PositiveCrossEdge { facility: usize, client: usize },
    /// `d_j < sum over unreachable members of the edge caps` for reachable `j`.
    DemandBelowHalf { client: usize },
}

impl fmt::Display for PropertyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyViolation::Unsaturated { facility } => write!(f, "(a) facility {facility} in I_H is unsaturated"),
            PropertyViolation::EdgeBelowCap { facility, client } => {
                write!(f, "(b) z[{facility}][{client}] below 2x* with facility outside I_H, client in D_H")
            }
            PropertyViolation::PositiveCrossEdge { facility, client } => {
                write!(f, "(c) z[{facility}][{client}] positive with facility in I_H, client outside D_H")
            }
            PropertyViolation::DemandBelowHalf { client } => {
                write!(f, "client {client} in D_H has demand below its capped weight outside I_H")
            }
        }
    }
}

/// Checks the three max-flow properties of a maximum b-matching against its
/// reachability sets.
pub fn check_maxflow_properties(bm: &BMatching, rs: &ResidualSets) -> Vec<PropertyViolation> {
    let mut out = Vec::new();
    for i in (0..bm.nf()).filter(|&i| bm.members[i]) {
        if rs.facilities[i] && bm.load(i) != Rational::from(bm.caps[i]) {
            out.push(PropertyViolation::Unsaturated { facility: i });
        }
        for j in 0..bm.nd() {
            if !rs.facilities[i] && rs.clients[j] && bm.z[i][j] != bm.edge_caps[i][j] {
                out.push(PropertyViolation::EdgeBelowCap { facility: i, client: j });
            }
            if rs.facilities[i] && !rs.clients[j] && !bm.z[i][j].is_zero() {
                out.push(PropertyViolation::PositiveCrossEdge { facility: i, client: j });
            }
        }
    }
    out
}

/// For every reachable client: `d_j >= sum_{i in I \ I_H} edge_caps[i][j]`.
pub fn check_demand_half(bm: &BMatching, rs: &ResidualSets, g: &PartialAssignment) -> Vec<PropertyViolation> {
    let demands = g.demands();
    (0..bm.nd())
        .filter(|&j| rs.clients[j])
        .filter(|&j| {
            let outside: Rational =
                (0..bm.nf()).filter(|&i| bm.members[i] && !rs.facilities[i]).map(|i| bm.edge_caps[i][j].clone()).sum();
            demands[j] < outside
        })
        .map(|client| PropertyViolation::DemandBelowHalf { client })
        .collect()
}

/// `g*`: `z` on reachable members, `z` on unreachable members for unreachable
/// clients, zero elsewhere.
pub fn build_partial_assignment(bm: &BMatching, rs: &ResidualSets) -> PartialAssignment {
    let g = (0..bm.nf())
        .map(|i| {
            (0..bm.nd())
                .map(|j| {
                    let keep = bm.members[i] && (rs.facilities[i] || !rs.clients[j]);
                    if keep {
                        bm.z[i][j].clone()
                    } else {
                        Rational::zero()
                    }
                })
                .collect()
        })
        .collect();
    PartialAssignment::new(g)
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("open facilities hold {capacity} clients, {clients} need assignment")]
pub struct CapacityShort {
    pub capacity: u64,
    pub clients: usize,
}

/// Cheapest assignment of every client to `open` under capacities `U_i`, by
/// successive shortest paths. Returns the facility index per client and the cost.
pub fn min_cost_integral_bmatching(inst: &Instance, open: &[usize]) -> Result<(Vec<usize>, Rational), CapacityShort> {
    let caps: Vec<u64> = open.iter().map(|&i| inst.capacity(i)).collect();
    min_cost_assignment(inst, open, &caps)
}

/// As [`min_cost_integral_bmatching`] with explicit capacities per open facility.
pub fn min_cost_assignment(
    inst: &Instance,
    open: &[usize],
    caps: &[u64],
) -> Result<(Vec<usize>, Rational), CapacityShort> {
    let nd = inst.nd();
    let capacity: u64 = caps.iter().sum();
    if capacity < nd as u64 {
        return Err(CapacityShort { capacity, clients: nd });
    }
    let k = open.len();
    let (s, t) = (nd + k, nd + k + 1);
    let mut g = MinCostFlow::new(nd + k + 2);
    for j in 0..nd {
        g.add_arc(s, j, 1, Rational::zero());
    }
    let mut handles = Vec::with_capacity(nd * k);
    for j in 0..nd {
        for (a, &i) in open.iter().enumerate() {
            handles.push((j, i, g.add_arc(j, nd + a, 1, inst.dist(i, j).clone())));
        }
    }
    for (a, &cap) in caps.iter().enumerate() {
        g.add_arc(nd + a, t, cap, Rational::zero());
    }
    let (flow, cost) = g.run(s, t, nd as u64);
    if flow < nd as u64 {
        return Err(CapacityShort { capacity, clients: nd });
    }
    let mut assign = vec![usize::MAX; nd];
    for (j, i, h) in handles {
        if g.flow_on(h) == 1 {
            assign[j] = i;
        }
    }
    Ok((assign, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_gap_instance, gen_random_instance, Facility, RandomParams};
    use crate::lp::{solve_lp, Direction, LinearProgram, LpStatus, Sense};
    use crate::rational::q;
    use proptest::prelude::*;

    fn r(n: i64) -> Rational {
        Rational::from_int(n)
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
    fn single_facility_cut() {
        let bm = max_fractional_bmatching(&[true], &[vec![r(1), r(1)]], &[1]);
        assert_eq!(bm.value(), r(1));
        bm.check().unwrap();
    }

    #[test]
    fn zero_caps() {
        let bm = max_fractional_bmatching(&[true, true], &[vec![r(0); 3], vec![r(0); 3]], &[2, 2]);
        assert_eq!(bm.value(), r(0));
        assert!(bm.z.iter().flatten().all(Rational::is_zero));
    }

    #[test]
    fn gap5_matching_value() {
        let caps = vec![vec![q(5, 3); 6], vec![r(0); 6]];
        let bm = max_fractional_bmatching(&[true, false], &caps, &[5, 5]);
        assert_eq!(bm.value(), r(5));
        let rs = residual_reachability(&bm);
        assert!(check_maxflow_properties(&bm, &rs).is_empty());
    }

    /// The symmetric maximum matching with every client at 5/6.
    fn gap5_symmetric() -> BMatching {
        BMatching::from_parts(
            vec![vec![q(5, 6); 6], vec![r(0); 6]],
            vec![vec![q(5, 3); 6], vec![q(1, 3); 6]],
            vec![true, false],
            vec![5, 5],
        )
        .unwrap()
    }

    #[test]
    fn gap5_symmetric_reachability_and_g() {
        let bm = gap5_symmetric();
        let rs = residual_reachability(&bm);
        assert_eq!(rs.client_ids(), (0..6).collect::<Vec<_>>());
        assert_eq!(rs.facility_ids(), vec![0]);
        assert!(check_maxflow_properties(&bm, &rs).is_empty());
        let g = build_partial_assignment(&bm, &rs);
        assert_eq!(g.demands(), vec![q(1, 6); 6]);
        assert!(g.g[1].iter().all(Rational::is_zero));
        assert!(check_demand_half(&bm, &rs, &g).is_empty());
    }

    #[test]
    fn reachability_edge_cases() {
        let full = BMatching::from_parts(vec![vec![r(1)]], vec![vec![r(1)]], vec![true], vec![1]).unwrap();
        let rs = residual_reachability(&full);
        assert!(rs.client_ids().is_empty() && rs.facility_ids().is_empty());
        let g = build_partial_assignment(&full, &rs);
        assert_eq!(g.g, vec![vec![r(1)]]);

        let empty = BMatching::from_parts(vec![vec![r(0)]], vec![vec![r(1)]], vec![true], vec![1]).unwrap();
        let rs = residual_reachability(&empty);
        assert_eq!((rs.client_ids(), rs.facility_ids()), (vec![0], vec![0]));
        let g = build_partial_assignment(&empty, &rs);
        assert_eq!(g.demands(), vec![r(1)]);
    }

    #[test]
    fn unreachable_member_keeps_z_for_unreachable_clients_only() {
        // Facility 0 saturated by client 0 (edge at cap); client 1 unsaturated but
        // cannot reach facility 0 (its edge is also at cap 0).
        let bm =
            BMatching::from_parts(vec![vec![q(1, 2), r(0)]], vec![vec![q(1, 2), r(0)]], vec![true], vec![3]).unwrap();
        let rs = residual_reachability(&bm);
        assert_eq!(rs.client_ids(), vec![0, 1]);
        assert!(rs.facility_ids().is_empty());
        let g = build_partial_assignment(&bm, &rs);
        assert_eq!(g.g, vec![vec![r(0), r(0)]]);
        assert!(check_maxflow_properties(&bm, &rs).is_empty());
    }

    #[test]
    fn violations_are_detected() {
        // Non-maximum matching: facility reachable but unsaturated.
        let bm = BMatching::from_parts(vec![vec![r(0)]], vec![vec![r(1)]], vec![true], vec![1]).unwrap();
        let rs = residual_reachability(&bm);
        assert_eq!(check_maxflow_properties(&bm, &rs), vec![PropertyViolation::Unsaturated { facility: 0 }]);
    }

    #[test]
    fn min_cost_examples() {
        let t = tiny1();
        assert_eq!(min_cost_integral_bmatching(&t, &[0, 1]).unwrap(), (vec![0, 1], r(0)));
        assert_eq!(min_cost_integral_bmatching(&t, &[1]).unwrap(), (vec![1, 1], r(2)));
        assert!(min_cost_integral_bmatching(&t, &[0]).is_err());
        let g = gen_gap_instance(3);
        assert_eq!(min_cost_integral_bmatching(&g, &[0, 1]).unwrap().1, r(0));
    }

    /// Transportation LP: min sum c x, sum_i x_ij = 1, sum_j x_ij <= U_i, x >= 0.
    fn assignment_lp_value(inst: &Instance, open: &[usize]) -> Rational {
        let mut lp = LinearProgram::new(Direction::Minimize);
        let vars: Vec<Vec<usize>> = open
            .iter()
            .map(|&i| {
                (0..inst.nd())
                    .map(|j| {
                        let v = lp.add_nonneg(format!("x_{i}_{j}"));
                        lp.set_objective_coef(v, inst.dist(i, j).clone());
                        v
                    })
                    .collect()
            })
            .collect();
        for j in 0..inst.nd() {
            lp.add_constraint("assign", vars.iter().map(|row| (row[j], r(1))).collect(), Sense::Eq, r(1));
        }
        for (a, &i) in open.iter().enumerate() {
            lp.add_constraint(
                "cap",
                vars[a].iter().map(|&v| (v, r(1))).collect(),
                Sense::Le,
                Rational::from(inst.capacity(i)),
            );
        }
        let res = solve_lp(&lp).unwrap();
        assert_eq!(res.status, LpStatus::Optimal);
        res.objective
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn ssp_matches_transportation_lp(seed in 0u64..10_000, nf in 1usize..4, nd in 1usize..6) {
            let inst = gen_random_instance(seed, nf, nd, &RandomParams::default());
            let open: Vec<usize> = (0..nf).collect();
            let (assign, cost) = min_cost_integral_bmatching(&inst, &open).unwrap();
            prop_assert_eq!(&cost, &assignment_lp_value(&inst, &open));
            let mut load = vec![0u64; nf];
            for &i in &assign { load[i] += 1; }
            prop_assert!(load.iter().enumerate().all(|(i, &l)| l <= inst.capacity(i)));
        }

        #[test]
        fn maximum_matchings_satisfy_properties(
            raw in proptest::collection::vec(0i64..7, 12),
            member_bits in 0u8..8,
            caps in proptest::collection::vec(1u64..4, 3),
        ) {
            let members: Vec<bool> = (0..3).map(|i| member_bits >> i & 1 == 1).collect();
            let edge_caps: Vec<Vec<Rational>> = (0..3).map(|i| (0..4).map(|j| q(raw[i * 4 + j], 3)).collect()).collect();
            let bm = max_fractional_bmatching(&members, &edge_caps, &caps);
            prop_assert!(bm.check().is_ok());
            let rs = residual_reachability(&bm);
            prop_assert!(check_maxflow_properties(&bm, &rs).is_empty());
            let g = build_partial_assignment(&bm, &rs);
            prop_assert!(check_demand_half(&bm, &rs, &g).is_empty());
            for i in 0..3 {
                for j in 0..4 {
                    prop_assert!(g.g[i][j] <= bm.z[i][j]);
                }
            }
        }
    }
}
