//! Text formats for hypergraphs, selections, and schedules.
//!
//! Edge-list format (UTF-8, LF): first line `users=<m>`, then one line per
//! edge `<edge_id>\t<user>,<user>,...` with edge ids strictly increasing
//! from 0. Selection files are `<edge_id>\t<multiplicity>` lines; schedule
//! files are `<batch_index>\t<edge_id>` lines in flattening order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EdgeId, Hyperedge, Hypergraph, HypergraphError, Schedule, Selection, UserId};

fn parse_err(line: usize, reason: impl Into<String>) -> HypergraphError {
    HypergraphError::Parse {
        line,
        reason: reason.into(),
    }
}

/// Parses the edge-list format. Line numbers in errors are 1-based and
/// count the header.
pub fn parse_hypergraph(text: &str) -> Result<Hypergraph, HypergraphError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing `users=<m>` header"))?;
    let num_users: usize = header
        .strip_prefix("users=")
        .ok_or_else(|| parse_err(1, "expected `users=<m>` header"))?
        .trim()
        .parse()
        .map_err(|_| parse_err(1, "invalid user count"))?;

    let mut edge_users: Vec<Vec<UserId>> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            return Err(parse_err(lineno, "empty line"));
        }
        let (id_part, users_part) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(lineno, "expected `<edge_id>\\t<users>`"))?;
        let edge_id: EdgeId = id_part
            .parse()
            .map_err(|_| parse_err(lineno, "invalid edge id"))?;
        if edge_id != edge_users.len() {
            return Err(parse_err(
                lineno,
                format!(
                    "edge ids must increase densely from 0 (expected {}, got {})",
                    edge_users.len(),
                    edge_id
                ),
            ));
        }
        if users_part.is_empty() {
            return Err(parse_err(lineno, "empty user set"));
        }
        let mut users = Vec::new();
        for tok in users_part.split(',') {
            let raw: u32 = tok
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid user id `{tok}`")))?;
            let u = UserId(raw);
            if u.index() >= num_users {
                return Err(parse_err(
                    lineno,
                    format!("user {raw} out of range (users = {num_users})"),
                ));
            }
            if users.contains(&u) {
                return Err(parse_err(lineno, format!("repeated user {raw} in edge")));
            }
            users.push(u);
        }
        edge_users.push(users);
    }
    Hypergraph::new(num_users, edge_users)
}

pub fn load_hypergraph(path: impl AsRef<Path>) -> Result<Hypergraph, HypergraphError> {
    parse_hypergraph(&fs::read_to_string(path)?)
}

pub fn hypergraph_to_string(h: &Hypergraph) -> String {
    let mut out = String::new();
    writeln!(out, "users={}", h.num_users()).unwrap();
    for Hyperedge { id, users } in h.edges() {
        let list = users
            .iter()
            .map(|u| u.0.to_string())
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{id}\t{list}").unwrap();
    }
    out
}

pub fn save_hypergraph(h: &Hypergraph, path: impl AsRef<Path>) -> Result<(), HypergraphError> {
    fs::write(path, hypergraph_to_string(h))?;
    Ok(())
}

pub fn selection_to_string(s: &Selection) -> String {
    let mut out = String::new();
    for (edge, mult) in s.iter() {
        writeln!(out, "{edge}\t{mult}").unwrap();
    }
    out
}

pub fn save_selection(s: &Selection, path: impl AsRef<Path>) -> Result<(), HypergraphError> {
    fs::write(path, selection_to_string(s))?;
    Ok(())
}

pub fn load_selection(
    path: impl AsRef<Path>,
    h: &Hypergraph,
) -> Result<Selection, HypergraphError> {
    let text = fs::read_to_string(path)?;
    let mut counts = std::collections::BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let (edge_part, mult_part) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(lineno, "expected `<edge_id>\\t<multiplicity>`"))?;
        let edge: EdgeId = edge_part
            .parse()
            .map_err(|_| parse_err(lineno, "invalid edge id"))?;
        let mult: u32 = mult_part
            .parse()
            .map_err(|_| parse_err(lineno, "invalid multiplicity"))?;
        if counts.insert(edge, mult).is_some() {
            return Err(parse_err(lineno, format!("duplicate edge {edge}")));
        }
    }
    Selection::from_counts(counts, h)
}

pub fn schedule_to_string(sch: &Schedule) -> String {
    let mut out = String::new();
    for (t, batch) in sch.batches().iter().enumerate() {
        for &edge in batch {
            writeln!(out, "{t}\t{edge}").unwrap();
        }
    }
    out
}

pub fn save_schedule(sch: &Schedule, path: impl AsRef<Path>) -> Result<(), HypergraphError> {
    fs::write(path, schedule_to_string(sch))?;
    Ok(())
}

/// Loads a schedule, inferring the batch size from the first batch. Batch
/// indices must be dense and nondecreasing; only the final batch may be
/// short.
pub fn load_schedule(
    path: impl AsRef<Path>,
    h: &Hypergraph,
) -> Result<Schedule, HypergraphError> {
    let text = fs::read_to_string(path)?;
    let mut batches: Vec<Vec<EdgeId>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let (t_part, edge_part) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(lineno, "expected `<batch_index>\\t<edge_id>`"))?;
        let t: usize = t_part
            .parse()
            .map_err(|_| parse_err(lineno, "invalid batch index"))?;
        let edge: EdgeId = edge_part
            .parse()
            .map_err(|_| parse_err(lineno, "invalid edge id"))?;
        if !h.contains_edge(edge) {
            return Err(HypergraphError::UnknownEdge {
                edge,
                num_edges: h.num_edges(),
            });
        }
        if t == batches.len() {
            batches.push(Vec::new());
        } else if t + 1 != batches.len() {
            return Err(parse_err(
                lineno,
                format!("batch indices must be dense and nondecreasing (got {t})"),
            ));
        }
        batches[t].push(edge);
    }
    let batch_size = batches.first().map_or(1, |b| b.len());
    for (t, batch) in batches.iter().enumerate() {
        let last = t + 1 == batches.len();
        if batch.len() != batch_size && !(last && batch.len() < batch_size) {
            return Err(parse_err(
                1,
                format!("batch {t} has {} entries, expected {batch_size}", batch.len()),
            ));
        }
    }
    Ok(Schedule::from_batches(batches, batch_size))
}
