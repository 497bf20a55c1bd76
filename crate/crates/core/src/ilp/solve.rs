//! Depth-first branch and bound for the contribution bounding problem.
//!
//! An optimality oracle for tiny instances only: the greedy solution warm
//! starts the incumbent, pruning uses LP-free bounds (per-edge residual
//! feasibility and total capacity slack), and a node cap keeps runaway
//! instances honest via the `optimal` flag. No LP relaxation and no
//! third-party solver; research-scale instances go through the LP-file
//! exports instead.

use std::time::{Duration, Instant};

use super::IlpError;
use crate::bounding::{greedy_dup, greedy_no_dup, BoundingResult, TieBreak};
use crate::hypergraph::{EdgeId, Hypergraph, Selection, UserId};

const MAX_EDGES: usize = 64;

#[derive(Clone, Copy, Debug)]
pub struct SolveLimits {
    pub max_nodes: u64,
    pub time_limit: Option<Duration>,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self {
            max_nodes: 50_000_000,
            time_limit: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExactResult {
    pub result: BoundingResult,
    /// False when a node or time cap stopped the search early.
    pub optimal: bool,
    pub nodes: u64,
}

struct Search<'a> {
    h: &'a Hypergraph,
    order: Vec<EdgeId>,
    k: usize,
    allow_dup: bool,
    load: Vec<usize>,
    current: Vec<u32>,
    current_total: usize,
    best: Vec<u32>,
    best_total: usize,
    nodes: u64,
    limits: SolveLimits,
    started: Instant,
    capped: bool,
    touched: Vec<usize>,
}

impl Search<'_> {
    fn residual_cap(&self, e: EdgeId) -> usize {
        self.h
            .edge(e)
            .users
            .iter()
            .map(|u| self.k - self.load[u.index()])
            .min()
            .unwrap_or(0)
    }

    fn apply(&mut self, pos: usize, mult: usize) {
        let e = self.order[pos];
        for u in &self.h.edge(e).users {
            self.load[u.index()] += mult;
        }
        self.current[pos] = mult as u32;
        self.current_total += mult;
    }

    fn revert(&mut self, pos: usize, mult: usize) {
        let e = self.order[pos];
        for u in &self.h.edge(e).users {
            self.load[u.index()] -= mult;
        }
        self.current[pos] = 0;
        self.current_total -= mult;
    }

    /// Upper bound on the total reachable from this node: per-edge residual
    /// feasibility summed over the undecided suffix, intersected with the
    /// capacity slack of users incident to a still-feasible edge divided by
    /// the smallest undecided arity.
    fn upper_bound(&mut self, pos: usize) -> usize {
        let mut residual_sum = 0usize;
        let mut min_arity = usize::MAX;
        self.touched.clear();
        for &e in &self.order[pos..] {
            let cap = self.residual_cap(e);
            if cap > 0 {
                residual_sum += if self.allow_dup { cap } else { 1 };
                min_arity = min_arity.min(self.h.arity(e));
                self.touched.extend(self.h.edge(e).users.iter().map(|u| u.index()));
            }
        }
        if residual_sum == 0 {
            return self.current_total;
        }
        self.touched.sort_unstable();
        self.touched.dedup();
        let incident_slack: usize = self
            .touched
            .iter()
            .map(|&u| self.k - self.load[u])
            .sum();
        self.current_total + residual_sum.min(incident_slack / min_arity)
    }

    fn out_of_budget(&mut self) -> bool {
        if self.nodes >= self.limits.max_nodes {
            self.capped = true;
            return true;
        }
        if let Some(limit) = self.limits.time_limit {
            if self.nodes.is_multiple_of(8192) && self.started.elapsed() > limit {
                self.capped = true;
                return true;
            }
        }
        false
    }

    fn dfs(&mut self, pos: usize) {
        self.nodes += 1;
        if self.current_total > self.best_total {
            self.best_total = self.current_total;
            self.best = self.current.clone();
        }
        if pos == self.order.len() || self.out_of_budget() {
            return;
        }
        if self.upper_bound(pos) <= self.best_total {
            return;
        }
        let cap = self.residual_cap(pos_edge(self, pos));
        let max_mult = if self.allow_dup { cap } else { cap.min(1) };
        // High multiplicity first: reach strong incumbents early.
        for mult in (0..=max_mult).rev() {
            self.apply(pos, mult);
            self.dfs(pos + 1);
            self.revert(pos, mult);
            if self.capped {
                return;
            }
        }
    }
}

fn pos_edge(s: &Search<'_>, pos: usize) -> EdgeId {
    s.order[pos]
}

/// Maximum-cardinality feasible selection by branch and bound. Instances
/// are capped at 64 edges; with duplicates each edge's multiplicity is
/// bounded by `k` through its users' capacities.
pub fn exact_solve_cb(
    h: &Hypergraph,
    k: usize,
    allow_dup: bool,
    limits: SolveLimits,
) -> Result<ExactResult, IlpError> {
    assert!(k >= 1);
    if h.num_edges() > MAX_EDGES {
        return Err(IlpError::TooManyEdges {
            edges: h.num_edges(),
            limit: MAX_EDGES,
        });
    }

    let warm = if allow_dup {
        greedy_dup(h, k, TieBreak::IdAscending)
    } else {
        greedy_no_dup(h, k, TieBreak::IdAscending)
    };

    let order = crate::bounding::sorted_order(h, TieBreak::IdAscending);
    let mut best = vec![0u32; order.len()];
    for (pos, &e) in order.iter().enumerate() {
        best[pos] = warm.output.multiplicity(e);
    }
    let mut search = Search {
        h,
        k,
        allow_dup,
        load: vec![0; h.num_users()],
        current: vec![0; order.len()],
        current_total: 0,
        best,
        best_total: warm.total_count,
        nodes: 0,
        limits,
        started: Instant::now(),
        capped: false,
        touched: Vec::new(),
        order,
    };
    search.dfs(0);

    let mut selection = Selection::new();
    for (pos, &e) in search.order.iter().enumerate() {
        for _ in 0..search.best[pos] {
            selection.add(e);
        }
    }
    Ok(ExactResult {
        optimal: !search.capped,
        nodes: search.nodes,
        result: crate::bounding::summarize_selection(h, selection),
    })
}

/// Builds the hard-instance family: one example per graph vertex, one user
/// per graph edge, each example attributed to its vertex's incident edges.
/// At `k = 1`, feasible selections are exactly independent sets. Isolated
/// vertices get a fresh private user so the hyperedge invariant holds; they
/// are always selectable, matching their role in an independent set.
pub fn independent_set_reduction(num_vertices: usize, edges: &[(u32, u32)]) -> Hypergraph {
    let mut incident: Vec<Vec<UserId>> = vec![Vec::new(); num_vertices];
    for (idx, &(a, b)) in edges.iter().enumerate() {
        incident[a as usize].push(UserId(idx as u32));
        incident[b as usize].push(UserId(idx as u32));
    }
    let mut next_user = edges.len() as u32;
    for inc in incident.iter_mut() {
        if inc.is_empty() {
            inc.push(UserId(next_user));
            next_user += 1;
        }
    }
    Hypergraph::new(next_user as usize, incident).unwrap()
}
