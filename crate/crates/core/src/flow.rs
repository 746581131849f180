//! Single-commodity network flow: exact max-flow (Edmonds-Karp over rational
//! capacities) and successive-shortest-path min-cost flow (integral capacities,
//! rational costs).

use std::collections::VecDeque;

use crate::rational::Rational;

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    cap: Rational,
    rev: usize,
}

/// Residual graph for exact maximum flow.
#[derive(Clone, Debug)]
pub struct MaxFlow {
    adj: Vec<Vec<Edge>>,
    handles: Vec<(usize, usize, Rational)>,
}

impl MaxFlow {
    pub fn new(nodes: usize) -> Self {
        MaxFlow { adj: vec![Vec::new(); nodes], handles: Vec::new() }
    }

    /// Adds arc `u -> v` and returns a handle for [`MaxFlow::flow_on`].
    pub fn add_arc(&mut self, u: usize, v: usize, cap: Rational) -> usize {
        let ru = self.adj[u].len();
        let rv = self.adj[v].len() + usize::from(u == v);
        self.adj[u].push(Edge { to: v, cap: cap.clone(), rev: rv });
        self.adj[v].push(Edge { to: u, cap: Rational::zero(), rev: ru });
        self.handles.push((u, ru, cap));
        self.handles.len() - 1
    }

    pub fn flow_on(&self, handle: usize) -> Rational {
        let (u, idx, ref cap) = self.handles[handle];
        cap - &self.adj[u][idx].cap
    }

    /// Augments along BFS-shortest paths until none remain; returns the value.
    pub fn run(&mut self, s: usize, t: usize) -> Rational {
        let mut total = Rational::zero();
        loop {
            let mut prev: Vec<Option<(usize, usize)>> = vec![None; self.adj.len()];
            let mut seen = vec![false; self.adj.len()];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for (k, e) in self.adj[u].iter().enumerate() {
                    if e.cap.is_positive() && !seen[e.to] {
                        seen[e.to] = true;
                        prev[e.to] = Some((u, k));
                        queue.push_back(e.to);
                    }
                }
            }
            if !seen[t] {
                return total;
            }
            let mut bottleneck: Option<Rational> = None;
            let mut v = t;
            while let Some((u, k)) = prev[v] {
                let c = &self.adj[u][k].cap;
                if bottleneck.as_ref().is_none_or(|b| c < b) {
                    bottleneck = Some(c.clone());
                }
                v = u;
            }
            let b = bottleneck.expect("path from s to t has an arc");
            let mut v = t;
            while let Some((u, k)) = prev[v] {
                self.adj[u][k].cap -= &b;
                let rev = self.adj[u][k].rev;
                self.adj[v][rev].cap += &b;
                v = u;
            }
            total += b;
        }
    }
}

#[derive(Clone, Debug)]
struct CostEdge {
    to: usize,
    cap: u64,
    cost: Rational,
    rev: usize,
}

/// Min-cost flow with integral capacities. Every augmentation moves an integral
/// amount, so optimal flows are integral.
#[derive(Clone, Debug)]
pub struct MinCostFlow {
    adj: Vec<Vec<CostEdge>>,
    handles: Vec<(usize, usize, u64)>,
}

impl MinCostFlow {
    pub fn new(nodes: usize) -> Self {
        MinCostFlow { adj: vec![Vec::new(); nodes], handles: Vec::new() }
    }

    pub fn add_arc(&mut self, u: usize, v: usize, cap: u64, cost: Rational) -> usize {
        let ru = self.adj[u].len();
        let rv = self.adj[v].len() + usize::from(u == v);
        self.adj[u].push(CostEdge { to: v, cap, cost: cost.clone(), rev: rv });
        self.adj[v].push(CostEdge { to: u, cap: 0, cost: -cost, rev: ru });
        self.handles.push((u, ru, cap));
        self.handles.len() - 1
    }

    pub fn flow_on(&self, handle: usize) -> u64 {
        let (u, idx, cap) = self.handles[handle];
        cap - self.adj[u][idx].cap
    }

    /// Sends up to `limit` units from `s` to `t` at minimum cost using
    /// Bellman-Ford shortest paths. Returns `(flow, cost)`.
    pub fn run(&mut self, s: usize, t: usize, limit: u64) -> (u64, Rational) {
        let n = self.adj.len();
        let mut flow = 0u64;
        let mut cost = Rational::zero();
        while flow < limit {
            let mut dist: Vec<Option<Rational>> = vec![None; n];
            let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
            let mut in_queue = vec![false; n];
            dist[s] = Some(Rational::zero());
            let mut queue = VecDeque::from([s]);
            in_queue[s] = true;
            while let Some(u) = queue.pop_front() {
                in_queue[u] = false;
                let du = dist[u].clone().expect("queued nodes are labelled");
                for (k, e) in self.adj[u].iter().enumerate() {
                    if e.cap == 0 {
                        continue;
                    }
                    let nd = &du + &e.cost;
                    if dist[e.to].as_ref().is_none_or(|d| nd < *d) {
                        dist[e.to] = Some(nd);
                        prev[e.to] = Some((u, k));
                        if !in_queue[e.to] {
                            in_queue[e.to] = true;
                            queue.push_back(e.to);
                        }
                    }
                }
            }
            if dist[t].is_none() {
                break;
            }
            let mut push = limit - flow;
            let mut v = t;
            while let Some((u, k)) = prev[v] {
                push = push.min(self.adj[u][k].cap);
                v = u;
            }
            let mut v = t;
            while let Some((u, k)) = prev[v] {
                self.adj[u][k].cap -= push;
                let rev = self.adj[u][k].rev;
                self.adj[v][rev].cap += push;
                cost += &self.adj[u][k].cost * Rational::from(push);
                v = u;
            }
            flow += push;
        }
        (flow, cost)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn max_flow_with_fractional_capacities() {
        let mut g = MaxFlow::new(4);
        let a = g.add_arc(0, 1, q(1, 2));
        let b = g.add_arc(0, 2, q(2, 3));
        g.add_arc(1, 3, q(1, 1));
        g.add_arc(2, 3, q(1, 3));
        g.add_arc(1, 2, q(1, 1));
        assert_eq!(g.run(0, 3), q(5, 6));
        assert_eq!(g.flow_on(a) + g.flow_on(b), q(5, 6));
    }

    #[test]
    fn min_cost_prefers_cheap_paths() {
        // Two units from 0 to 3: path via 1 costs 1 (cap 1), via 2 costs 5.
        let mut g = MinCostFlow::new(4);
        g.add_arc(0, 1, 1, Rational::zero());
        g.add_arc(0, 2, 2, Rational::zero());
        let cheap = g.add_arc(1, 3, 1, q(1, 1));
        g.add_arc(2, 3, 2, q(5, 1));
        let (f, c) = g.run(0, 3, 2);
        assert_eq!(f, 2);
        assert_eq!(c, q(6, 1));
        assert_eq!(g.flow_on(cheap), 1);
    }
}
