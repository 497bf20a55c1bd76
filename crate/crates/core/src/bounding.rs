//! Contribution-bounding algorithms.
//!
//! Maximizing the number of selected examples under a per-user contribution
//! bound is NP-hard (independent set reduces to it at `k = 1`), so the
//! workhorses here are greedy: a single pass without duplicates, repeated
//! passes with duplicates, a min-separation variant that builds a batch
//! schedule, and a bias-mitigating interleaved variant that alternates
//! between low- and high-arity candidates. Random baselines and Pareto
//! filtering support the bias studies.

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::hypergraph::{achieved_contribution_bound, EdgeId, Hypergraph, Schedule, Selection};
use crate::rng::{keyed_rng, stream};

/// Order of equal-arity edges in the greedy candidate stream. The sort key
/// itself is always ascending arity.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum TieBreak {
    /// Ascending edge id (fully reproducible default).
    #[default]
    IdAscending,
    /// Shuffle edge ids with the given seed before the stable arity sort,
    /// mimicking an arbitrary input order.
    SeededShuffle(u64),
}

/// Edge ids in greedy processing order: ascending arity, ties resolved per
/// `tie`.
pub fn sorted_order(h: &Hypergraph, tie: TieBreak) -> Vec<EdgeId> {
    let mut order: Vec<EdgeId> = (0..h.num_edges()).collect();
    if let TieBreak::SeededShuffle(seed) = tie {
        order.shuffle(&mut keyed_rng(seed, stream::BOUND_SHUFFLE, 0, 0));
    }
    order.sort_by_key(|&e| h.arity(e));
    order
}

/// A bounded output (`Selection` or `Schedule`) with its summary stats.
#[derive(Clone, Debug)]
pub struct Bounded<S> {
    pub output: S,
    /// Largest per-user contribution actually present, with multiplicity.
    pub achieved_k: usize,
    pub distinct_count: usize,
    pub total_count: usize,
    /// Mean arity over selected edges, counted with multiplicity.
    pub avg_arity: f64,
}

pub type BoundingResult = Bounded<Selection>;
pub type ScheduleResult = Bounded<Schedule>;

/// Summary stats of an arbitrary selection against its hypergraph.
pub fn summarize_selection(h: &Hypergraph, selection: Selection) -> BoundingResult {
    let distinct_count = selection.distinct();
    let total_count = selection.total();
    let arity_sum: usize = selection
        .iter()
        .map(|(e, m)| h.arity(e) * m as usize)
        .sum();
    let avg_arity = if total_count == 0 {
        0.0
    } else {
        arity_sum as f64 / total_count as f64
    };
    BoundingResult {
        achieved_k: achieved_contribution_bound(h, &selection),
        distinct_count,
        total_count,
        avg_arity,
        output: selection,
    }
}

fn schedule_stats(h: &Hypergraph, schedule: Schedule) -> ScheduleResult {
    let stats = summarize_selection(h, schedule.to_selection());
    ScheduleResult {
        output: schedule,
        achieved_k: stats.achieved_k,
        distinct_count: stats.distinct_count,
        total_count: stats.total_count,
        avg_arity: stats.avg_arity,
    }
}

/// Tracks per-user contribution counts against the bound `k`.
struct LoadTracker {
    load: Vec<usize>,
    k: usize,
}

impl LoadTracker {
    fn new(num_users: usize, k: usize) -> Self {
        assert!(k >= 1, "contribution bound must be >= 1");
        Self {
            load: vec![0; num_users],
            k,
        }
    }

    fn fits(&self, h: &Hypergraph, e: EdgeId) -> bool {
        h.edge(e).users.iter().all(|u| self.load[u.index()] < self.k)
    }

    fn commit(&mut self, h: &Hypergraph, e: EdgeId) {
        for u in &h.edge(e).users {
            self.load[u.index()] += 1;
        }
    }
}

/// Single pass in sorted order; an edge is taken iff all of its users are
/// still below `k`. The result is maximal: every excluded edge has a
/// saturated user.
pub fn greedy_no_dup(h: &Hypergraph, k: usize, tie: TieBreak) -> BoundingResult {
    let mut tracker = LoadTracker::new(h.num_users(), k);
    let mut selection = Selection::new();
    for e in sorted_order(h, tie) {
        if tracker.fits(h, e) {
            tracker.commit(h, e);
            selection.add(e);
        }
    }
    summarize_selection(h, selection)
}

/// Repeated passes in the same sorted order, adding duplicate copies while
/// the bound holds; terminates after the first pass that adds nothing. The
/// first pass reproduces [`greedy_no_dup`] exactly.
pub fn greedy_dup(h: &Hypergraph, k: usize, tie: TieBreak) -> BoundingResult {
    let order = sorted_order(h, tie);
    let mut tracker = LoadTracker::new(h.num_users(), k);
    let mut selection = Selection::new();
    loop {
        let mut added = false;
        for &e in &order {
            if tracker.fits(h, e) {
                tracker.commit(h, e);
                selection.add(e);
                added = true;
            }
        }
        if !added {
            break;
        }
    }
    summarize_selection(h, selection)
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no feasible schedule: a full pass added nothing at {placed}/{target} placements")]
pub struct NoSolution {
    pub placed: usize,
    pub target: usize,
}

/// Builds a `T * B` schedule by appending edges in repeated sorted order.
/// An edge is appended only if each of its users last occurred at least `b`
/// batches before the batch under construction (a partial final batch
/// counts as a batch). Fails if a full pass appends nothing first.
///
/// The post-hoc contribution bound of a successful schedule is at most
/// `ceil(T / b)`.
pub fn greedy_min_sep(
    h: &Hypergraph,
    num_batches: usize,
    batch_size: usize,
    min_sep: usize,
    tie: TieBreak,
) -> Result<ScheduleResult, NoSolution> {
    assert!(num_batches >= 1 && batch_size >= 1 && min_sep >= 1);
    let order = sorted_order(h, tie);
    let target = num_batches * batch_size;
    let mut last_batch = vec![usize::MAX; h.num_users()];
    let mut flat: Vec<EdgeId> = Vec::with_capacity(target);
    'fill: while flat.len() < target {
        let mut added = false;
        for &e in &order {
            let t = flat.len() / batch_size;
            let ok = h.edge(e).users.iter().all(|u| {
                let prev = last_batch[u.index()];
                prev == usize::MAX || t - prev >= min_sep
            });
            if ok {
                for u in &h.edge(e).users {
                    last_batch[u.index()] = t;
                }
                flat.push(e);
                added = true;
                if flat.len() == target {
                    break 'fill;
                }
            }
        }
        if !added {
            return Err(NoSolution {
                placed: flat.len(),
                target,
            });
        }
    }
    Ok(schedule_stats(h, Schedule::from_flat(&flat, batch_size)))
}

/// Parameters of the bias-mitigating interleaved variant: candidates
/// alternate between `c1` consecutive low-arity edges (arity <= `threshold`)
/// and `c2` high-arity ones.
#[derive(Clone, Copy, Debug)]
pub struct InterleaveSpec {
    pub threshold: usize,
    pub c1: usize,
    pub c2: usize,
    pub allow_dup: bool,
}

/// Greedy bounding over an interleaved candidate stream. Each group keeps
/// an independent cursor over its sorted edges; insertion and termination
/// follow [`greedy_dup`] (or [`greedy_no_dup`] when `allow_dup` is false).
/// A group that completes a full wrap without any addition is drained
/// permanently; loads never decrease, so its edges can never fit again.
pub fn greedy_interleaved(
    h: &Hypergraph,
    k: usize,
    spec: &InterleaveSpec,
    tie: TieBreak,
) -> BoundingResult {
    assert!(spec.threshold >= 1 && spec.c1 >= 1 && spec.c2 >= 1);
    let order = sorted_order(h, tie);
    let small: Vec<EdgeId> = order
        .iter()
        .copied()
        .filter(|&e| h.arity(e) <= spec.threshold)
        .collect();
    let large: Vec<EdgeId> = order
        .iter()
        .copied()
        .filter(|&e| h.arity(e) > spec.threshold)
        .collect();

    let mut tracker = LoadTracker::new(h.num_users(), k);
    let mut selection = Selection::new();

    // Cursor state per group: next index, consecutive failures, done flag.
    let mut cursor = [0usize; 2];
    let mut stale = [0usize; 2];
    let groups = [&small, &large];
    let mut done = [small.is_empty(), large.is_empty()];
    let runs = [spec.c1, spec.c2];

    while !done[0] || !done[1] {
        for g in 0..2 {
            if done[g] {
                continue;
            }
            let edges = groups[g];
            for _ in 0..runs[g] {
                if spec.allow_dup {
                    let e = edges[cursor[g] % edges.len()];
                    cursor[g] += 1;
                    if tracker.fits(h, e) {
                        tracker.commit(h, e);
                        selection.add(e);
                        stale[g] = 0;
                    } else {
                        stale[g] += 1;
                        if stale[g] >= edges.len() {
                            done[g] = true;
                            break;
                        }
                    }
                } else {
                    if cursor[g] >= edges.len() {
                        done[g] = true;
                        break;
                    }
                    let e = edges[cursor[g]];
                    cursor[g] += 1;
                    if tracker.fits(h, e) {
                        tracker.commit(h, e);
                        selection.add(e);
                    }
                    if cursor[g] == edges.len() {
                        done[g] = true;
                        break;
                    }
                }
            }
        }
    }
    summarize_selection(h, selection)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BaselinePool {
    All,
    /// Edges with arity <= median arity.
    Low,
    /// Edges with arity > median arity.
    High,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("baseline pool has {pool} edges, cannot sample {target}")]
pub struct PoolTooSmall {
    pub pool: usize,
    pub target: usize,
}

/// Median edge arity (mean of the two middle values for even counts).
pub fn median_arity(h: &Hypergraph) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    let mut arities: Vec<usize> = h.edges().iter().map(|e| e.arity()).collect();
    arities.sort_unstable();
    let n = arities.len();
    if n % 2 == 1 {
        arities[n / 2] as f64
    } else {
        (arities[n / 2 - 1] + arities[n / 2]) as f64 / 2.0
    }
}

/// Edge ids eligible for a baseline pool: all edges, arity at most the
/// median, or arity above the median.
pub fn baseline_pool(h: &Hypergraph, pool: BaselinePool) -> Vec<EdgeId> {
    let median = median_arity(h);
    (0..h.num_edges())
        .filter(|&e| match pool {
            BaselinePool::All => true,
            BaselinePool::Low => (h.arity(e) as f64) <= median,
            BaselinePool::High => (h.arity(e) as f64) > median,
        })
        .collect()
}

/// Uniform sample of `target_size` distinct edges from the chosen pool.
/// Carries no contribution-bound guarantee; this is the ablation baseline.
pub fn random_baseline(
    h: &Hypergraph,
    target_size: usize,
    pool: BaselinePool,
    seed: u64,
) -> Result<Selection, PoolTooSmall> {
    let eligible = baseline_pool(h, pool);
    if eligible.len() < target_size {
        return Err(PoolTooSmall {
            pool: eligible.len(),
            target: target_size,
        });
    }
    let mut rng = keyed_rng(seed, stream::BOUND_BASELINE, 0, 0);
    let picks = rand::seq::index::sample(&mut rng, eligible.len(), target_size);
    Ok(picks.into_iter().map(|i| (eligible[i], 1)).collect())
}

/// Indices of points not strictly dominated when maximizing both
/// coordinates: `j` dominates `i` iff `j >= i` in both and `>` in at least
/// one. Ties survive. Returned in ascending input order.
pub fn pareto_filter(points: &[(f64, f64)]) -> Vec<usize> {
    let mut by_size: Vec<usize> = (0..points.len()).collect();
    by_size.sort_by(|&a, &b| {
        points[b]
            .0
            .total_cmp(&points[a].0)
            .then(points[b].1.total_cmp(&points[a].1))
    });
    let mut keep = Vec::new();
    let mut best_higher_size = f64::NEG_INFINITY;
    let mut i = 0;
    while i < by_size.len() {
        // Group of equal first coordinate.
        let mut j = i;
        while j < by_size.len() && points[by_size[j]].0 == points[by_size[i]].0 {
            j += 1;
        }
        let group = &by_size[i..j];
        let group_max = group
            .iter()
            .map(|&idx| points[idx].1)
            .fold(f64::NEG_INFINITY, f64::max);
        for &idx in group {
            let a = points[idx].1;
            let dominated = best_higher_size >= a || a < group_max;
            if !dominated {
                keep.push(idx);
            }
        }
        best_higher_size = best_higher_size.max(group_max);
        i = j;
    }
    keep.sort_unstable();
    keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fig1;
    use crate::graphgen::{gen_regular, GraphGenSpec};
    use crate::hypergraph::{check_contribution_bound, check_min_sep, Hypergraph, UserId};

    const TIE: TieBreak = TieBreak::IdAscending;

    fn ids(sel: &Selection) -> Vec<EdgeId> {
        sel.iter().map(|(e, _)| e).collect()
    }

    #[test]
    fn sorted_order_fig1() {
        assert_eq!(sorted_order(&fig1(), TIE), vec![0, 2, 3, 4, 1]);
    }

    #[test]
    fn no_dup_fig1() {
        let h = fig1();
        let r = greedy_no_dup(&h, 2, TIE);
        assert_eq!(ids(&r.output), vec![0, 2, 4]);
        assert_eq!(r.total_count, 3);
        assert_eq!(r.achieved_k, 2);
        assert!(check_contribution_bound(&h, &r.output, 2));
    }

    #[test]
    fn no_dup_unconstrained_takes_everything() {
        let h = fig1();
        let r = greedy_no_dup(&h, h.max_degree(), TIE);
        assert_eq!(r.distinct_count, h.num_edges());
    }

    #[test]
    fn no_dup_star() {
        let h = Hypergraph::new(1, vec![vec![UserId(0)]; 5]).unwrap();
        let r = greedy_no_dup(&h, 2, TIE);
        assert_eq!(ids(&r.output), vec![0, 1]);
    }

    #[test]
    fn no_dup_is_maximal() {
        let h = fig1();
        for k in 1..=4 {
            let r = greedy_no_dup(&h, k, TIE);
            let loads = crate::hypergraph::contribution_counts(&h, &r.output);
            for e in 0..h.num_edges() {
                if r.output.multiplicity(e) == 0 {
                    assert!(
                        h.edge(e).users.iter().any(|u| loads[u.index()] == k),
                        "edge {e} could still be added at k={k}"
                    );
                }
            }
        }
    }

    #[test]
    fn dup_two_singletons() {
        let h = Hypergraph::new(1, vec![vec![UserId(0)], vec![UserId(0)]]).unwrap();
        let r = greedy_dup(&h, 3, TIE);
        assert_eq!(r.output.multiplicity(0), 2);
        assert_eq!(r.output.multiplicity(1), 1);
        assert_eq!(r.total_count, 3);
        assert_eq!(r.achieved_k, 3);
    }

    #[test]
    fn dup_single_shared_user_k1() {
        let h = Hypergraph::new(1, vec![vec![UserId(0)]; 4]).unwrap();
        let r = greedy_dup(&h, 1, TIE);
        assert_eq!(r.total_count, 1);
        assert_eq!(ids(&r.output), vec![0]);
    }

    #[test]
    fn dup_first_pass_matches_no_dup() {
        let h = fig1();
        let dup = greedy_dup(&h, 2, TIE);
        let nodup = greedy_no_dup(&h, 2, TIE);
        assert_eq!(ids(&dup.output), ids(&nodup.output));
        // Saturated graph: the second pass adds nothing here.
        assert_eq!(dup.total_count, nodup.total_count);
    }

    #[test]
    fn min_sep_three_singletons() {
        let h =
            Hypergraph::new(3, vec![vec![UserId(0)], vec![UserId(1)], vec![UserId(2)]]).unwrap();
        let r = greedy_min_sep(&h, 4, 1, 2, TIE).unwrap();
        assert_eq!(r.output.flatten(), vec![0, 1, 2, 0]);
        assert_eq!(r.achieved_k, 2);
        assert!(check_min_sep(&h, &r.output, 2));
    }

    #[test]
    fn min_sep_impossible() {
        let h = Hypergraph::new(1, vec![vec![UserId(0)]]).unwrap();
        let err = greedy_min_sep(&h, 2, 1, 2, TIE).unwrap_err();
        assert_eq!(
            err,
            NoSolution {
                placed: 1,
                target: 2
            }
        );
    }

    #[test]
    fn min_sep_b1_takes_sorted_prefix() {
        let h = Hypergraph::new(
            4,
            vec![
                vec![UserId(0)],
                vec![UserId(1)],
                vec![UserId(2)],
                vec![UserId(3)],
            ],
        )
        .unwrap();
        let r = greedy_min_sep(&h, 3, 1, 1, TIE).unwrap();
        assert_eq!(r.output.flatten(), vec![0, 1, 2]);
        assert_eq!(r.achieved_k, 1);
    }

    #[test]
    fn min_sep_post_hoc_bound() {
        let h = gen_regular(&GraphGenSpec {
            num_edges: 60,
            expected_arity: 2.0,
            expected_degree: 3.0,
            skew_alpha: 0.0,
            seed: 4,
        })
        .unwrap();
        for (t, b) in [(6usize, 2usize), (8, 3), (5, 5)] {
            if let Ok(r) = greedy_min_sep(&h, t, 4, b, TIE) {
                assert!(r.achieved_k <= t.div_ceil(b));
                assert!(check_min_sep(&h, &r.output, b));
            }
        }
    }

    #[test]
    fn interleaved_degenerate_split_equals_dup() {
        let h = fig1();
        for k in 1..=3 {
            let spec = InterleaveSpec {
                threshold: 3,
                c1: 2,
                c2: 1,
                allow_dup: true,
            };
            let inter = greedy_interleaved(&h, k, &spec, TIE);
            let dup = greedy_dup(&h, k, TIE);
            assert_eq!(inter.output, dup.output, "k={k}");
        }
    }

    #[test]
    fn interleaved_no_dup_degenerate_equals_no_dup() {
        let h = fig1();
        let spec = InterleaveSpec {
            threshold: 3,
            c1: 1,
            c2: 1,
            allow_dup: false,
        };
        let inter = greedy_interleaved(&h, 2, &spec, TIE);
        assert_eq!(inter.output, greedy_no_dup(&h, 2, TIE).output);
    }

    #[test]
    fn interleaved_alternates_groups() {
        // Two disjoint edges per arity group; with k = 1 and c1 = c2 = 1
        // every candidate fits, so all four are chosen.
        let h = Hypergraph::new(
            6,
            vec![
                vec![UserId(0)],
                vec![UserId(1)],
                vec![UserId(2), UserId(3)],
                vec![UserId(4), UserId(5)],
            ],
        )
        .unwrap();
        let spec = InterleaveSpec {
            threshold: 1,
            c1: 1,
            c2: 1,
            allow_dup: false,
        };
        let r = greedy_interleaved(&h, 1, &spec, TIE);
        assert_eq!(ids(&r.output), vec![0, 1, 2, 3]);
    }

    #[test]
    fn interleaved_reaches_high_arity_before_small_group_saturates() {
        // Plain no-dup on fig1 at k=2 blocks the arity-3 edge behind the
        // arity-2 ones; interleaving attempts it second, so it gets in.
        let h = fig1();
        let spec = InterleaveSpec {
            threshold: 2,
            c1: 1,
            c2: 1,
            allow_dup: false,
        };
        let r = greedy_interleaved(&h, 2, &spec, TIE);
        assert_eq!(ids(&r.output), vec![0, 1, 4]);
        assert_eq!(r.output.multiplicity(1), 1, "arity-3 edge selected");
        assert!(check_contribution_bound(&h, &r.output, 2));
    }

    #[test]
    fn random_baseline_pools() {
        let h = fig1();
        // Arities (2,3,2,2,2): median 2, so the high pool is exactly {e2}.
        assert_eq!(median_arity(&h), 2.0);
        assert_eq!(baseline_pool(&h, BaselinePool::High), vec![1]);

        let all = random_baseline(&h, h.num_edges(), BaselinePool::All, 0).unwrap();
        assert_eq!(ids(&all), vec![0, 1, 2, 3, 4]);

        let none = random_baseline(&h, 0, BaselinePool::Low, 0).unwrap();
        assert!(none.is_empty());

        let high = random_baseline(&h, 1, BaselinePool::High, 0).unwrap();
        assert_eq!(ids(&high), vec![1]);
        assert_eq!(
            random_baseline(&h, 2, BaselinePool::High, 0),
            Err(PoolTooSmall { pool: 1, target: 2 })
        );
    }

    #[test]
    fn median_even_count_averages() {
        let h = Hypergraph::new(
            4,
            vec![
                vec![UserId(0)],
                vec![UserId(0), UserId(1)],
                vec![UserId(0), UserId(1), UserId(2)],
                vec![UserId(0), UserId(1), UserId(2), UserId(3)],
            ],
        )
        .unwrap();
        assert_eq!(median_arity(&h), 2.5);
        assert_eq!(baseline_pool(&h, BaselinePool::High), vec![2, 3]);
    }

    #[test]
    fn pareto_examples() {
        assert_eq!(
            pareto_filter(&[(100.0, 1.2), (90.0, 1.5), (80.0, 1.4)]),
            vec![0, 1]
        );
        assert_eq!(pareto_filter(&[(5.0, 5.0)]), vec![0]);
        assert_eq!(pareto_filter(&[(3.0, 1.0), (3.0, 1.0)]), vec![0, 1]);
    }

    fn brute_force_pareto(points: &[(f64, f64)]) -> Vec<usize> {
        (0..points.len())
            .filter(|&i| {
                !points.iter().enumerate().any(|(j, &(s, a))| {
                    j != i
                        && s >= points[i].0
                        && a >= points[i].1
                        && (s > points[i].0 || a > points[i].1)
                })
            })
            .collect()
    }

    #[test]
    fn pareto_matches_brute_force() {
        use rand::Rng;
        let mut rng = keyed_rng(12, 0xFF, 0, 0);
        for _ in 0..200 {
            let n = rng.random_range(0..12);
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    (
                        rng.random_range(0..6) as f64,
                        rng.random_range(0..6) as f64 / 2.0,
                    )
                })
                .collect();
            assert_eq!(pareto_filter(&pts), brute_force_pareto(&pts), "{pts:?}");
        }
    }

    #[test]
    fn feasibility_on_random_graphs() {
        for seed in 0..30 {
            let h = gen_regular(&GraphGenSpec {
                num_edges: 40,
                expected_arity: 2.0,
                expected_degree: 2.5,
                skew_alpha: 0.0,
                seed,
            })
            .unwrap();
            for k in 1..=3 {
                let a = greedy_no_dup(&h, k, TIE);
                assert!(check_contribution_bound(&h, &a.output, k));
                assert!(a.achieved_k <= k);

                let b = greedy_dup(&h, k, TIE);
                assert!(check_contribution_bound(&h, &b.output, k));
                assert_eq!(
                    ids(&a.output),
                    ids(&b.output),
                    "distinct support must match the single pass"
                );

                let spec = InterleaveSpec {
                    threshold: 2,
                    c1: 2,
                    c2: 3,
                    allow_dup: true,
                };
                let c = greedy_interleaved(&h, k, &spec, TIE);
                assert!(check_contribution_bound(&h, &c.output, k));
            }
        }
    }

    #[test]
    fn deterministic_under_seeded_shuffle() {
        let h = fig1();
        let a = greedy_no_dup(&h, 2, TieBreak::SeededShuffle(5));
        let b = greedy_no_dup(&h, 2, TieBreak::SeededShuffle(5));
        assert_eq!(a.output, b.output);
        // Arity ordering still dominates the shuffle.
        let order = sorted_order(&h, TieBreak::SeededShuffle(5));
        assert_eq!(order[4], 1, "arity-3 edge sorts last regardless of shuffle");
    }
}
