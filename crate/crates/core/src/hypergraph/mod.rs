//! Attributed-dataset data model: users, hyperedges, selections, schedules.
//!
//! An example is attributed to the set of users it may contain information
//! about; the attribution structure of a dataset is a hypergraph whose
//! vertices are users and whose hyperedges are examples. Everything
//! downstream (bounding, accounting, training) works against this module.
//!
//! Adjacency semantics: two datasets are treated as adjacent when they share
//! the same hypergraph but all example payloads incident to one user differ.
//! The predicates here ([`check_contribution_bound`], [`check_min_sep`])
//! decide whether a selection keeps every user's incident examples within
//! the limits the downstream noise calibration assumes. Node-level privacy
//! (adjacency that removes a vertex outright) is a strictly stronger notion
//! with no efficient training algorithms; nothing in this crate targets it.

mod io;

pub use io::{
    hypergraph_to_string, load_hypergraph, load_schedule, load_selection, save_hypergraph,
    save_schedule, save_selection, schedule_to_string, selection_to_string,
};

use std::collections::BTreeMap;

use thiserror::Error;

/// Dense index into the user ground set `[0, num_users)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct UserId(pub u32);

impl UserId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for UserId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dense edge (example) index, `[0, num_edges)`.
pub type EdgeId = usize;

/// One example's attribution set. Non-empty, no repeated user.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Hyperedge {
    pub id: EdgeId,
    pub users: Vec<UserId>,
}

impl Hyperedge {
    #[inline]
    pub fn arity(&self) -> usize {
        self.users.len()
    }
}

#[derive(Debug, Error)]
pub enum HypergraphError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("edge {edge}: empty user set")]
    EmptyEdge { edge: EdgeId },
    #[error("edge {edge}: repeated user {user}")]
    RepeatedUser { edge: EdgeId, user: UserId },
    #[error("edge {edge}: user {user} out of range (num_users = {num_users})")]
    UserOutOfRange {
        edge: EdgeId,
        user: UserId,
        num_users: usize,
    },
    #[error("edge {edge} not present in hypergraph ({num_edges} edges)")]
    UnknownEdge { edge: EdgeId, num_edges: usize },
    #[error("selection multiplicity for edge {edge} must be >= 1")]
    ZeroMultiplicity { edge: EdgeId },
}

/// Immutable attribution hypergraph. Users and edges are dense integer ids;
/// repeated user-sets across distinct edge ids are allowed.
#[derive(Clone, PartialEq, Debug)]
pub struct Hypergraph {
    num_users: usize,
    edges: Vec<Hyperedge>,
    degree_index: Vec<usize>,
}

impl Hypergraph {
    /// Builds a hypergraph from per-edge user sets, assigning dense edge ids
    /// in input order.
    pub fn new(
        num_users: usize,
        edge_users: Vec<Vec<UserId>>,
    ) -> Result<Self, HypergraphError> {
        let mut degree_index = vec![0usize; num_users];
        let mut edges = Vec::with_capacity(edge_users.len());
        let mut seen = vec![false; num_users];
        for (id, users) in edge_users.into_iter().enumerate() {
            if users.is_empty() {
                return Err(HypergraphError::EmptyEdge { edge: id });
            }
            for &u in &users {
                if u.index() >= num_users {
                    return Err(HypergraphError::UserOutOfRange {
                        edge: id,
                        user: u,
                        num_users,
                    });
                }
                if seen[u.index()] {
                    return Err(HypergraphError::RepeatedUser { edge: id, user: u });
                }
                seen[u.index()] = true;
            }
            for &u in &users {
                seen[u.index()] = false;
                degree_index[u.index()] += 1;
            }
            edges.push(Hyperedge { id, users });
        }
        Ok(Self {
            num_users,
            edges,
            degree_index,
        })
    }

    #[inline]
    pub fn num_users(&self) -> usize {
        self.num_users
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    #[inline]
    pub fn edges(&self) -> &[Hyperedge] {
        &self.edges
    }

    #[inline]
    pub fn edge(&self, id: EdgeId) -> &Hyperedge {
        &self.edges[id]
    }

    #[inline]
    pub fn arity(&self, id: EdgeId) -> usize {
        self.edges[id].users.len()
    }

    /// Incidence count per user, indexed by [`UserId`].
    #[inline]
    pub fn degrees(&self) -> &[usize] {
        &self.degree_index
    }

    pub fn max_degree(&self) -> usize {
        self.degree_index.iter().copied().max().unwrap_or(0)
    }

    pub fn contains_edge(&self, id: EdgeId) -> bool {
        id < self.edges.len()
    }
}

/// A contribution-bounded multiset of edge ids: `edge_id -> multiplicity`.
/// Multiplicity is explicit so the with-duplicates invariants stay directly
/// assertable.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Selection {
    counts: BTreeMap<EdgeId, u32>,
}

impl Selection {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates that every edge exists in `h` and every multiplicity is >= 1.
    pub fn from_counts(
        counts: BTreeMap<EdgeId, u32>,
        h: &Hypergraph,
    ) -> Result<Self, HypergraphError> {
        for (&edge, &mult) in &counts {
            if !h.contains_edge(edge) {
                return Err(HypergraphError::UnknownEdge {
                    edge,
                    num_edges: h.num_edges(),
                });
            }
            if mult == 0 {
                return Err(HypergraphError::ZeroMultiplicity { edge });
            }
        }
        Ok(Self { counts })
    }

    /// Adds one more copy of `edge`.
    pub fn add(&mut self, edge: EdgeId) {
        *self.counts.entry(edge).or_insert(0) += 1;
    }

    #[inline]
    pub fn multiplicity(&self, edge: EdgeId) -> u32 {
        self.counts.get(&edge).copied().unwrap_or(0)
    }

    /// Number of distinct edges selected.
    #[inline]
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    /// Total count including multiplicity.
    pub fn total(&self) -> usize {
        self.counts.values().map(|&m| m as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `(edge_id, multiplicity)` in ascending edge order.
    pub fn iter(&self) -> impl Iterator<Item = (EdgeId, u32)> + '_ {
        self.counts.iter().map(|(&e, &m)| (e, m))
    }

    /// Expands to a flat list of edge ids, multiplicities unrolled, in
    /// ascending edge order.
    pub fn expand(&self) -> Vec<EdgeId> {
        let mut out = Vec::with_capacity(self.total());
        for (edge, mult) in self.iter() {
            out.extend(std::iter::repeat_n(edge, mult as usize));
        }
        out
    }
}

impl FromIterator<(EdgeId, u32)> for Selection {
    fn from_iter<T: IntoIterator<Item = (EdgeId, u32)>>(iter: T) -> Self {
        Self {
            counts: iter.into_iter().collect(),
        }
    }
}

/// An ordered batch plan: edge occurrences grouped into batches of size
/// `batch_size` (the final batch may be shorter).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Schedule {
    batches: Vec<Vec<EdgeId>>,
    batch_size: usize,
}

impl Schedule {
    /// Chunks a flat insertion-ordered list into batches of `batch_size`.
    pub fn from_flat(flat: &[EdgeId], batch_size: usize) -> Self {
        assert!(batch_size >= 1, "batch_size must be >= 1");
        let batches = flat.chunks(batch_size).map(|c| c.to_vec()).collect();
        Self {
            batches,
            batch_size,
        }
    }

    pub fn from_batches(batches: Vec<Vec<EdgeId>>, batch_size: usize) -> Self {
        Self {
            batches,
            batch_size,
        }
    }

    #[inline]
    pub fn batches(&self) -> &[Vec<EdgeId>] {
        &self.batches
    }

    #[inline]
    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    #[inline]
    pub fn num_batches(&self) -> usize {
        self.batches.len()
    }

    /// Total edge occurrences across all batches.
    pub fn total(&self) -> usize {
        self.batches.iter().map(|b| b.len()).sum()
    }

    /// Flattened occurrence list in schedule order.
    pub fn flatten(&self) -> Vec<EdgeId> {
        self.batches.iter().flatten().copied().collect()
    }

    /// Multiset view of the schedule.
    pub fn to_selection(&self) -> Selection {
        let mut s = Selection::new();
        for batch in &self.batches {
            for &e in batch {
                s.add(e);
            }
        }
        s
    }
}

/// True iff every user's selected examples, counted with multiplicity,
/// number at most `k`.
pub fn check_contribution_bound(h: &Hypergraph, s: &Selection, k: usize) -> bool {
    debug_assert!(k >= 1);
    let mut load = vec![0usize; h.num_users()];
    for (edge, mult) in s.iter() {
        for u in &h.edge(edge).users {
            load[u.index()] += mult as usize;
            if load[u.index()] > k {
                return false;
            }
        }
    }
    true
}

/// Per-user contribution counts of a selection (with multiplicity).
pub fn contribution_counts(h: &Hypergraph, s: &Selection) -> Vec<usize> {
    let mut load = vec![0usize; h.num_users()];
    for (edge, mult) in s.iter() {
        for u in &h.edge(edge).users {
            load[u.index()] += mult as usize;
        }
    }
    load
}

/// Largest per-user contribution of a selection; 0 for an empty selection.
pub fn achieved_contribution_bound(h: &Hypergraph, s: &Selection) -> usize {
    contribution_counts(h, s).into_iter().max().unwrap_or(0)
}

/// True iff no window of `b` consecutive batches contains more than one
/// occurrence of any single user's edges. Windows truncated at the tail are
/// checked too, which is equivalent to requiring consecutive occurrences of
/// a user to sit at least `b` batches apart.
pub fn check_min_sep(h: &Hypergraph, sch: &Schedule, b: usize) -> bool {
    debug_assert!(b >= 1);
    let mut last = vec![usize::MAX; h.num_users()];
    for (t, batch) in sch.batches().iter().enumerate() {
        for &edge in batch {
            for u in &h.edge(edge).users {
                let prev = last[u.index()];
                if prev != usize::MAX && t - prev < b {
                    return false;
                }
                last[u.index()] = t;
            }
        }
    }
    true
}
