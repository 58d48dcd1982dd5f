//! Max-flow (Dinic) over a generic capacity type and real-valued min-cost flow.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

/// Capacity arithmetic needed by [`MaxFlow`].
pub(crate) trait Capacity: Clone + PartialOrd {
    fn zero() -> Self;
    fn is_positive(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn min_of(&self, o: &Self) -> Self {
        if self <= o {
            self.clone()
        } else {
            o.clone()
        }
    }
}

impl Capacity for f64 {
    fn zero() -> Self {
        0.0
    }
    fn is_positive(&self) -> bool {
        *self > 0.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
}

impl Capacity for BigInt {
    fn zero() -> Self {
        Zero::zero()
    }
    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
}

/// Dinic's algorithm. Edges are stored in pairs `(e, e ^ 1)`.
pub(crate) struct MaxFlow<C> {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<C>,
    level: Vec<i64>,
    iter: Vec<usize>,
}

impl<C: Capacity> MaxFlow<C> {
    pub fn new(nodes: usize) -> Self {
        MaxFlow {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            level: vec![0; nodes],
            iter: vec![0; nodes],
        }
    }

    pub fn add_edge(&mut self, u: usize, v: usize, cap: C) -> usize {
        let e = self.to.len();
        self.to.push(v);
        self.cap.push(cap);
        self.adj[u].push(e);
        self.to.push(u);
        self.cap.push(C::zero());
        self.adj[v].push(e + 1);
        e
    }

    /// Flow currently routed through edge `e`.
    pub fn flow(&self, e: usize) -> C {
        self.cap[e ^ 1].clone()
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        let mut queue = std::collections::VecDeque::new();
        self.level[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if self.cap[e].is_positive() && self.level[v] < 0 {
                    self.level[v] = self.level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: C) -> C {
        if u == t {
            return pushed;
        }
        while self.iter[u] < self.adj[u].len() {
            let e = self.adj[u][self.iter[u]];
            let v = self.to[e];
            if self.cap[e].is_positive() && self.level[v] == self.level[u] + 1 {
                let d = self.dfs(v, t, pushed.min_of(&self.cap[e]));
                if d.is_positive() {
                    self.cap[e] = self.cap[e].sub(&d);
                    self.cap[e ^ 1] = self.cap[e ^ 1].add(&d);
                    return d;
                }
            }
            self.iter[u] += 1;
        }
        C::zero()
    }

    /// Maximum flow from `s` to `t`; `bound` must exceed any feasible flow.
    pub fn run(&mut self, s: usize, t: usize, bound: C) -> C {
        let mut total = C::zero();
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return total;
            }
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, bound.clone());
                if !f.is_positive() {
                    break;
                }
                total = total.add(&f);
            }
        }
    }
}

/// Successive-shortest-path min-cost flow with real capacities and costs.
///
/// Negative arc costs are allowed as long as there is no negative cycle;
/// potentials are initialised by Bellman–Ford.
pub(crate) struct MinCostFlow {
    n: usize,
    to: Vec<usize>,
    cap: Vec<f64>,
    cost: Vec<f64>,
    adj: Vec<Vec<usize>>,
    eps: f64,
    cycle_tol: f64,
}

/// Raised when the residual graph contains a negative-cost cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct NegativeCycle;

impl MinCostFlow {
    /// `eps` is the residual capacity below which an arc counts as saturated.
    pub fn new(n: usize, eps: f64) -> Self {
        MinCostFlow {
            n,
            to: Vec::new(),
            cap: Vec::new(),
            cost: Vec::new(),
            adj: vec![Vec::new(); n],
            eps,
            cycle_tol: 1e-12,
        }
    }

    /// Cycles cheaper than `-tol` count as negative; shallower ones are
    /// treated as rounding noise.
    pub fn with_cycle_tol(mut self, tol: f64) -> Self {
        self.cycle_tol = tol;
        self
    }

    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64, cost: f64) -> usize {
        let e = self.to.len();
        for (a, b, c, w) in [(u, v, cap, cost), (v, u, 0.0, -cost)] {
            self.to.push(b);
            self.cap.push(c);
            self.cost.push(w);
            self.adj[a].push(self.to.len() - 1);
        }
        e
    }

    pub fn flow(&self, e: usize) -> f64 {
        self.cap[e ^ 1]
    }

    /// Bellman–Ford distances from `s` over residual arcs.
    fn bellman_ford(&self, s: usize) -> Result<Vec<f64>, NegativeCycle> {
        let mut d = vec![f64::INFINITY; self.n];
        d[s] = 0.0;
        for round in 0..=self.n {
            let mut changed = false;
            for u in 0..self.n {
                if !d[u].is_finite() {
                    continue;
                }
                for &e in &self.adj[u] {
                    if self.cap[e] > self.eps {
                        let nd = d[u] + self.cost[e];
                        let v = self.to[e];
                        if nd < d[v] - self.cycle_tol * (1.0 + nd.abs()) {
                            d[v] = nd;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                return Ok(d);
            }
            if round == self.n {
                return Err(NegativeCycle);
            }
        }
        Ok(d)
    }

    /// True when some cycle of residual arcs has negative total cost.
    pub fn has_negative_cycle(&self) -> bool {
        let mut d = vec![0.0f64; self.n];
        for _ in 0..=self.n {
            let mut changed = false;
            for u in 0..self.n {
                for &e in &self.adj[u] {
                    if self.cap[e] > self.eps {
                        let nd = d[u] + self.cost[e];
                        let v = self.to[e];
                        if nd < d[v] - self.cycle_tol * (1.0 + nd.abs()) {
                            d[v] = nd;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                return false;
            }
        }
        true
    }

    /// Sends up to `limit` units from `s` to `t` at minimum cost.
    /// Returns `(flow, cost)`.
    pub fn run(&mut self, s: usize, t: usize, limit: f64) -> Result<(f64, f64), NegativeCycle> {
        let mut pot = self.bellman_ford(s)?;
        for p in pot.iter_mut() {
            if !p.is_finite() {
                *p = 0.0;
            }
        }
        let mut flow = 0.0;
        let mut cost = 0.0;
        let mut dist = vec![0.0; self.n];
        let mut prev = vec![usize::MAX; self.n];
        let mut done = vec![false; self.n];
        while flow < limit - self.eps {
            // Dense Dijkstra on reduced costs; graphs here are small.
            dist.iter_mut().for_each(|d| *d = f64::INFINITY);
            done.iter_mut().for_each(|d| *d = false);
            prev.iter_mut().for_each(|p| *p = usize::MAX);
            dist[s] = 0.0;
            loop {
                let mut u = usize::MAX;
                let mut best = f64::INFINITY;
                for v in 0..self.n {
                    if !done[v] && dist[v] < best {
                        best = dist[v];
                        u = v;
                    }
                }
                if u == usize::MAX {
                    break;
                }
                done[u] = true;
                for &e in &self.adj[u] {
                    if self.cap[e] > self.eps {
                        let v = self.to[e];
                        let rc = (self.cost[e] + pot[u] - pot[v]).max(0.0);
                        if dist[u] + rc < dist[v] {
                            dist[v] = dist[u] + rc;
                            prev[v] = e;
                        }
                    }
                }
            }
            if !dist[t].is_finite() {
                break;
            }
            for v in 0..self.n {
                if dist[v].is_finite() {
                    pot[v] += dist[v];
                }
            }
            let mut push = limit - flow;
            let mut v = t;
            while v != s {
                let e = prev[v];
                push = push.min(self.cap[e]);
                v = self.to[e ^ 1];
            }
            let mut v = t;
            while v != s {
                let e = prev[v];
                self.cap[e] -= push;
                self.cap[e ^ 1] += push;
                cost += push * self.cost[e];
                v = self.to[e ^ 1];
            }
            flow += push;
        }
        Ok((flow, cost))
    }
}
