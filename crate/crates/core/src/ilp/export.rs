//! CPLEX-LP text rendering of the two integer programs.
//!
//! Naming is pinned: variables `x<i>` (or `x<i>_<t>` with a time index),
//! per-user capacity rows `u<j>`, per-(user, window) rows `w<j>_<t>`,
//! per-step batch rows `t<t>`.

use std::fs;
use std::path::Path;

use super::IlpError;
use crate::hypergraph::Hypergraph;

const MAX_VARIABLES: usize = 1_000_000;
const WRAP_COLUMN: usize = 72;

/// Accumulates `+`-joined terms with deterministic line wrapping.
struct TermLine {
    out: String,
    line_len: usize,
    any: bool,
}

impl TermLine {
    fn new(prefix: &str) -> Self {
        Self {
            out: prefix.to_string(),
            line_len: prefix.len(),
            any: false,
        }
    }

    fn push(&mut self, term: &str) {
        let piece_len = term.len() + if self.any { 3 } else { 1 };
        if self.line_len + piece_len > WRAP_COLUMN && self.any {
            self.out.push_str(" +\n   ");
            self.line_len = 3;
            self.out.push_str(term);
            self.line_len += term.len();
        } else {
            if self.any {
                self.out.push_str(" + ");
            } else {
                self.out.push(' ');
            }
            self.out.push_str(term);
            self.line_len += piece_len;
        }
        self.any = true;
    }

    fn finish(mut self, suffix: &str) -> String {
        self.out.push_str(suffix);
        self.out
    }
}

fn name_list(out: &mut String, names: impl Iterator<Item = String>) {
    let mut line_len = 0usize;
    for name in names {
        if line_len == 0 {
            out.push(' ');
            out.push_str(&name);
            line_len = 1 + name.len();
        } else if line_len + 1 + name.len() > WRAP_COLUMN {
            out.push_str("\n ");
            out.push_str(&name);
            line_len = 1 + name.len();
        } else {
            out.push(' ');
            out.push_str(&name);
            line_len += 1 + name.len();
        }
    }
    if line_len > 0 {
        out.push('\n');
    }
}

/// Maximize the number of selected examples subject to per-user capacity
/// `k`; binary variables without duplicates, general integers with.
pub fn render_cb_ilp(h: &Hypergraph, k: usize, allow_dup: bool) -> String {
    assert!(k >= 1);
    let mut out = String::new();
    out.push_str("Maximize\n");
    let mut obj = TermLine::new(" obj:");
    for e in 0..h.num_edges() {
        obj.push(&format!("x{e}"));
    }
    out.push_str(&obj.finish("\n"));

    out.push_str("Subject To\n");
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); h.num_users()];
    for edge in h.edges() {
        for u in &edge.users {
            incident[u.index()].push(edge.id);
        }
    }
    for (j, edges) in incident.iter().enumerate() {
        if edges.is_empty() {
            continue;
        }
        let mut row = TermLine::new(&format!(" u{j}:"));
        for &e in edges {
            row.push(&format!("x{e}"));
        }
        out.push_str(&row.finish(&format!(" <= {k}\n")));
    }

    if h.num_edges() > 0 {
        out.push_str(if allow_dup { "Generals\n" } else { "Binaries\n" });
        name_list(&mut out, (0..h.num_edges()).map(|e| format!("x{e}")));
    }
    out.push_str("End\n");
    out
}

pub fn export_cb_ilp(
    h: &Hypergraph,
    k: usize,
    allow_dup: bool,
    path: impl AsRef<Path>,
) -> Result<(), IlpError> {
    fs::write(path, render_cb_ilp(h, k, allow_dup))?;
    Ok(())
}

/// Minimize the contribution bound `k` of a `T x B` min-separation batch
/// assignment: one binary `x<i>_<t>` per (edge, step), window rows keeping
/// any user's occurrences at most one per `b` consecutive steps, per-user
/// totals tied to `k`, and exact batch-size rows.
///
/// Refuses instances above 10^6 variables; even research-scale instances
/// are out of reach for MIP solvers on this formulation.
pub fn render_minsep_ilp(
    h: &Hypergraph,
    num_batches: usize,
    batch_size: usize,
    min_sep: usize,
) -> Result<String, IlpError> {
    assert!(num_batches >= 1 && batch_size >= 1 && min_sep >= 1);
    if h.num_edges() == 0 {
        return Err(IlpError::EmptyGraph);
    }
    let variables = h.num_edges() * num_batches;
    if variables > MAX_VARIABLES {
        return Err(IlpError::TooManyVariables {
            variables,
            limit: MAX_VARIABLES,
        });
    }

    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); h.num_users()];
    for edge in h.edges() {
        for u in &edge.users {
            incident[u.index()].push(edge.id);
        }
    }

    let mut out = String::new();
    out.push_str("Minimize\n obj: k\nSubject To\n");
    // Window rows: for each user and window start, at most one occurrence.
    for (j, edges) in incident.iter().enumerate() {
        if edges.is_empty() {
            continue;
        }
        for t in 0..=num_batches.saturating_sub(min_sep) {
            let mut row = TermLine::new(&format!(" w{j}_{t}:"));
            for &e in edges {
                for step in t..(t + min_sep).min(num_batches) {
                    row.push(&format!("x{e}_{step}"));
                }
            }
            out.push_str(&row.finish(" <= 1\n"));
        }
    }
    // Per-user totals against the bound variable.
    for (j, edges) in incident.iter().enumerate() {
        if edges.is_empty() {
            continue;
        }
        let mut row = TermLine::new(&format!(" u{j}:"));
        for &e in edges {
            for t in 0..num_batches {
                row.push(&format!("x{e}_{t}"));
            }
        }
        out.push_str(&row.finish(" - k <= 0\n"));
    }
    // Exact batch sizes.
    for t in 0..num_batches {
        let mut row = TermLine::new(&format!(" t{t}:"));
        for e in 0..h.num_edges() {
            row.push(&format!("x{e}_{t}"));
        }
        out.push_str(&row.finish(&format!(" = {batch_size}\n")));
    }

    out.push_str("Generals\n k\n");
    out.push_str("Binaries\n");
    let mut names = Vec::with_capacity(variables);
    for e in 0..h.num_edges() {
        for t in 0..num_batches {
            names.push(format!("x{e}_{t}"));
        }
    }
    name_list(&mut out, names.into_iter());
    out.push_str("End\n");
    Ok(out)
}

pub fn export_minsep_ilp(
    h: &Hypergraph,
    num_batches: usize,
    batch_size: usize,
    min_sep: usize,
    path: impl AsRef<Path>,
) -> Result<(), IlpError> {
    let text = render_minsep_ilp(h, num_batches, batch_size, min_sep)?;
    fs::write(path, text)?;
    Ok(())
}
