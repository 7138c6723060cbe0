//! Max-min filter selection.
//!
//! Selecting `K` filters whose pairwise distances are all at least `theta` is
//! the same as finding an independent set of size `K` in the conflict graph
//! that joins every pair closer than `theta`. [`fbs_select`] bisects on
//! `theta`, deciding each step with the exact solver in
//! [`max_independent_set`]; [`full_search`] enumerates all `K`-subsets and
//! serves as the optimality oracle.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::AdjacencyMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectionError {
    #[error("need at least 2 filters to optimize pairwise distances, got {0}")]
    TooFewFilters(usize),
    #[error("cannot select {k} filters from {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be at least {min}, got {k}")]
    KTooSmall { k: usize, min: usize },
    #[error("iteration count must be at least 1")]
    ZeroIterations,
    #[error("full search over {combinations} combinations exceeds the guard of {guard}")]
    GuardExceeded { combinations: u128, guard: u128 },
    #[error("a minimum pairwise distance needs at least 2 selected filters, got {0}")]
    SingletonSelection(usize),
    #[error("index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("selection of size {have} cannot be trimmed up to {want}")]
    TrimTooSmall { have: usize, want: usize },
}

/// Fixed-size set of node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
struct NodeSet {
    words: Vec<u64>,
}

impl NodeSet {
    fn empty(n: usize) -> Self {
        NodeSet {
            words: vec![0; n.div_ceil(64)],
        }
    }

    fn full(n: usize) -> Self {
        let mut s = Self::empty(n);
        for i in 0..n {
            s.insert(i);
        }
        s
    }

    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    fn contains(&self, i: usize) -> bool {
        self.words[i / 64] & (1 << (i % 64)) != 0
    }

    fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// `self \ other`
    fn difference(&self, other: &NodeSet) -> NodeSet {
        NodeSet {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & !b)
                .collect(),
        }
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &bits)| {
            let mut bits = bits;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w * 64 + b)
            })
        })
    }
}

/// Undirected graph whose edges join filters that may not be chosen together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictGraph {
    node_count: usize,
    neighbors: Vec<NodeSet>,
}

impl ConflictGraph {
    pub fn empty(node_count: usize) -> Self {
        ConflictGraph {
            node_count,
            neighbors: vec![NodeSet::empty(node_count); node_count],
        }
    }

    /// Conflict graph with an edge for every listed pair; duplicates collapse.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self, SelectionError> {
        let mut g = Self::empty(node_count);
        for &(i, j) in edges {
            for index in [i, j] {
                if index >= node_count {
                    return Err(SelectionError::IndexOutOfRange {
                        index,
                        n: node_count,
                    });
                }
            }
            if i == j {
                return Err(SelectionError::SelfLoop(i));
            }
            g.neighbors[i].insert(j);
            g.neighbors[j].insert(i);
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].contains(j)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].count()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(NodeSet::count).sum::<usize>() / 2
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.node_count)
            .flat_map(|i| {
                self.neighbors[i]
                    .iter()
                    .filter(move |&j| j > i)
                    .map(move |j| (i, j))
            })
            .collect()
    }

    pub fn is_independent(&self, nodes: &[usize]) -> bool {
        nodes
            .iter()
            .enumerate()
            .all(|(a, &i)| nodes[a + 1..].iter().all(|&j| !self.has_edge(i, j)))
    }
}

/// Edge `(i, j)` iff `i != j` and `a_ij < theta`.
pub fn build_conflict_graph(adjacency: &AdjacencyMatrix, theta: f64) -> ConflictGraph {
    let n = adjacency.len();
    let mut g = ConflictGraph::empty(n);
    for (i, j, d) in adjacency.pairs() {
        if d < theta {
            g.neighbors[i].insert(j);
            g.neighbors[j].insert(i);
        }
    }
    g
}

/// Sorted, duplicate-free filter indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SelectionVector(Vec<usize>);

impl SelectionVector {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        SelectionVector(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }
}

/// How much work the independent-set solver does per call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityMode {
    /// Stop as soon as an independent set reaching the target is found.
    #[default]
    EarlyExit,
    /// Always prove a maximum independent set.
    ExactMax,
}

/// Outcome of one independent-set solve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MisOutcome {
    pub set: SelectionVector,
    /// Branch-and-bound nodes expanded.
    pub nodes: u64,
}

/// Exact maximum independent set (or, in early-exit mode, the first set found
/// of size at least `target`).
pub fn max_independent_set(
    graph: &ConflictGraph,
    target: Option<usize>,
    mode: FeasibilityMode,
) -> SelectionVector {
    solve_mis(graph, target, mode).set
}

/// As [`max_independent_set`], also reporting the search effort.
///
/// Branch and bound in the style of MCQ: candidates are greedily partitioned
/// into cliques of the conflict graph (an independent set takes at most one
/// node per clique), which bounds how far the current set can still grow.
/// Vertices are ordered by increasing conflict degree, ties by index, so the
/// highest-degree candidates are branched on first. A min-degree greedy set
/// seeds the incumbent.
pub fn solve_mis(
    graph: &ConflictGraph,
    target: Option<usize>,
    mode: FeasibilityMode,
) -> MisOutcome {
    let n = graph.node_count;
    let target = match mode {
        FeasibilityMode::EarlyExit => target,
        FeasibilityMode::ExactMax => None,
    };
    let greedy = greedy_independent_set(graph);
    let mut solver = MisSolver {
        graph,
        order: vertex_order(graph),
        best: greedy,
        target,
        nodes: 0,
        done: false,
    };
    if n > 0 && !solver.reached_target() {
        let mut current = Vec::new();
        solver.expand(&mut current, NodeSet::full(n));
    }
    MisOutcome {
        set: SelectionVector::new(solver.best),
        nodes: solver.nodes,
    }
}

fn vertex_order(graph: &ConflictGraph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..graph.node_count).collect();
    order.sort_by_key(|&v| (graph.degree(v), v));
    order
}

/// Repeatedly takes the remaining vertex of fewest remaining neighbors
/// (lowest index on ties) and discards its neighbors.
fn greedy_independent_set(graph: &ConflictGraph) -> Vec<usize> {
    let n = graph.node_count;
    let mut alive = NodeSet::full(n);
    let mut chosen = Vec::new();
    while !alive.is_empty() {
        let v = alive
            .iter()
            .min_by_key(|&v| {
                (
                    graph.neighbors[v]
                        .iter()
                        .filter(|&u| alive.contains(u))
                        .count(),
                    v,
                )
            })
            .expect("nonempty");
        chosen.push(v);
        alive.remove(v);
        for u in graph.neighbors[v].iter() {
            alive.remove(u);
        }
    }
    chosen
}

struct MisSolver<'g> {
    graph: &'g ConflictGraph,
    order: Vec<usize>,
    best: Vec<usize>,
    target: Option<usize>,
    nodes: u64,
    done: bool,
}

impl MisSolver<'_> {
    fn reached_target(&self) -> bool {
        self.target.is_some_and(|t| self.best.len() >= t)
    }

    /// Candidates in vertex order, grouped into cliques; returns the vertices
    /// sorted by clique number and, for each, the number of cliques covering
    /// it and every vertex before it.
    fn clique_cover(&self, candidates: &NodeSet) -> (Vec<usize>, Vec<usize>) {
        let mut classes: Vec<(NodeSet, Vec<usize>)> = Vec::new();
        for &v in self.order.iter().filter(|&&v| candidates.contains(v)) {
            let nbrs = &self.graph.neighbors[v];
            match classes
                .iter_mut()
                .find(|(members, _)| members.difference(nbrs).is_empty())
            {
                Some((members, list)) => {
                    members.insert(v);
                    list.push(v);
                }
                None => {
                    let mut members = NodeSet::empty(self.graph.node_count);
                    members.insert(v);
                    classes.push((members, vec![v]));
                }
            }
        }
        let mut vertices = Vec::with_capacity(candidates.count());
        let mut bounds = Vec::with_capacity(vertices.capacity());
        for (c, (_, list)) in classes.into_iter().enumerate() {
            for v in list {
                vertices.push(v);
                bounds.push(c + 1);
            }
        }
        (vertices, bounds)
    }

    fn expand(&mut self, current: &mut Vec<usize>, mut candidates: NodeSet) {
        self.nodes += 1;
        let (vertices, bounds) = self.clique_cover(&candidates);
        for k in (0..vertices.len()).rev() {
            if self.done || current.len() + bounds[k] <= self.best.len() {
                return;
            }
            let v = vertices[k];
            current.push(v);
            let mut next = candidates.difference(&self.graph.neighbors[v]);
            next.remove(v);
            if current.len() > self.best.len() {
                self.best = current.clone();
                if self.reached_target() {
                    self.done = true;
                }
            }
            if !self.done && !next.is_empty() {
                self.expand(current, next);
            }
            current.pop();
            candidates.remove(v);
        }
    }
}

/// Parameters of the threshold bisection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbsConfig {
    /// Number of filters to select.
    pub k: usize,
    /// Bisection steps.
    pub iterations: usize,
    pub feasibility_mode: FeasibilityMode,
    /// Start the bracket at `min(A) = 0` (diagonal included) instead of the
    /// smallest off-diagonal distance.
    #[serde(default)]
    pub literal_min: bool,
    /// Stop early once the bracket is narrower than this.
    #[serde(default)]
    pub min_bracket: Option<f64>,
}

impl FbsConfig {
    pub fn new(k: usize) -> Self {
        FbsConfig {
            k,
            iterations: 20,
            feasibility_mode: FeasibilityMode::EarlyExit,
            literal_min: false,
            min_bracket: None,
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn validate(&self, n: usize) -> Result<(), SelectionError> {
        if self.k < 1 {
            return Err(SelectionError::KTooSmall { k: self.k, min: 1 });
        }
        if self.k > n {
            return Err(SelectionError::KTooLarge { k: self.k, n });
        }
        if self.iterations < 1 {
            return Err(SelectionError::ZeroIterations);
        }
        Ok(())
    }
}

/// Search interval `[lo, hi]` for the best achievable minimum distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn midpoint(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Raises the lower bound to `theta` when feasible, else lowers the upper.
    pub fn update(&mut self, theta: f64, feasible: bool) {
        if feasible {
            self.lo = theta;
        } else {
            self.hi = theta;
        }
    }
}

/// One bisection step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbsStep {
    pub theta: f64,
    /// Size of the independent set returned by the feasibility check.
    pub set_size: usize,
    pub feasible: bool,
    /// Bracket after the update.
    pub bracket: Bracket,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    Fbs,
    Full,
}

/// The chosen filters and how they were found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: SearchMethod,
    pub selection: SelectionVector,
    pub selected_ids: Vec<String>,
    /// Minimum pairwise distance of the selection, recomputed from the
    /// adjacency matrix.
    pub achieved_min_distance: f64,
    pub theta_bounds_final: Bracket,
    pub initial_bracket: Bracket,
    pub iterations_run: usize,
    pub feasibility_calls: usize,
    /// Branch-and-bound nodes (bisection) or subsets visited (full search).
    pub search_nodes: u64,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub steps: Vec<FbsStep>,
}

fn check_instance(adjacency: &AdjacencyMatrix, k: usize) -> Result<(), SelectionError> {
    let n = adjacency.len();
    if n < 2 {
        return Err(SelectionError::TooFewFilters(n));
    }
    if k > n {
        return Err(SelectionError::KTooLarge { k, n });
    }
    if k < 2 {
        return Err(SelectionError::KTooSmall { k, min: 2 });
    }
    Ok(())
}

fn ids_of(adjacency: &AdjacencyMatrix, selection: &SelectionVector) -> Vec<String> {
    selection
        .indices()
        .iter()
        .map(|&i| adjacency.ids()[i].clone())
        .collect()
}

/// Bisection on the distance threshold with an exact feasibility check per
/// step. Returns the last feasible selection, trimmed to exactly `k`.
pub fn fbs_select(
    adjacency: &AdjacencyMatrix,
    cfg: &FbsConfig,
) -> Result<SelectionResult, SelectionError> {
    let start = Instant::now();
    let n = adjacency.len();
    check_instance(adjacency, cfg.k)?;
    cfg.validate(n)?;

    let lo = if cfg.literal_min {
        0.0
    } else {
        adjacency.min_off_diagonal().expect("n >= 2")
    };
    let initial = Bracket {
        lo,
        hi: adjacency.max_entry(),
    };
    let mut bracket = initial;
    // No pair is closer than the initial lower bound, so every node is
    // compatible there.
    let mut feasible_set = SelectionVector::new((0..n).collect());
    let mut steps = Vec::with_capacity(cfg.iterations);
    let mut search_nodes = 0;

    for _ in 0..cfg.iterations {
        let theta = bracket.midpoint();
        let graph = build_conflict_graph(adjacency, theta);
        let outcome = solve_mis(&graph, Some(cfg.k), cfg.feasibility_mode);
        search_nodes += outcome.nodes;
        let feasible = outcome.set.len() >= cfg.k;
        bracket.update(theta, feasible);
        steps.push(FbsStep {
            theta,
            set_size: outcome.set.len(),
            feasible,
            bracket,
        });
        if feasible {
            feasible_set = outcome.set;
        }
        if cfg.min_bracket.is_some_and(|w| bracket.width() < w) {
            break;
        }
    }

    let selection = trim_selection(&feasible_set, adjacency, cfg.k)?;
    let achieved = min_pairwise_distance(&selection, adjacency)?;
    Ok(SelectionResult {
        method: SearchMethod::Fbs,
        selected_ids: ids_of(adjacency, &selection),
        selection,
        achieved_min_distance: achieved,
        theta_bounds_final: bracket,
        initial_bracket: initial,
        iterations_run: steps.len(),
        feasibility_calls: steps.len(),
        search_nodes,
        wall_time_s: start.elapsed().as_secs_f64(),
        steps,
    })
}

/// Number of `k`-subsets of `n` items, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Limits and switches for [`full_search_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullSearchOptions {
    /// Largest number of combinations the search will enumerate.
    pub guard: u128,
    /// Abandon partial subsets that can no longer beat the incumbent.
    pub prune: bool,
}

impl Default for FullSearchOptions {
    fn default() -> Self {
        FullSearchOptions {
            guard: 1_000_000_000,
            prune: true,
        }
    }
}

pub fn full_search(
    adjacency: &AdjacencyMatrix,
    k: usize,
) -> Result<SelectionResult, SelectionError> {
    full_search_with(adjacency, k, FullSearchOptions::default())
}

/// Exhaustive search for the `k`-subset with the largest minimum pairwise
/// distance. Ties resolve to the lexicographically smallest index set.
pub fn full_search_with(
    adjacency: &AdjacencyMatrix,
    k: usize,
    options: FullSearchOptions,
) -> Result<SelectionResult, SelectionError> {
    let start = Instant::now();
    check_instance(adjacency, k)?;
    let n = adjacency.len();
    let combinations = binomial(n, k);
    if combinations > options.guard {
        return Err(SelectionError::GuardExceeded {
            combinations,
            guard: options.guard,
        });
    }
    let mut search = SubsetSearch {
        adjacency,
        k,
        prune: options.prune,
        chosen: Vec::with_capacity(k),
        best: Vec::new(),
        best_value: f64::NEG_INFINITY,
        visited: 0,
    };
    search.descend(0, f64::INFINITY);
    let selection = SelectionVector::new(search.best);
    let achieved = search.best_value;
    let bracket = Bracket {
        lo: achieved,
        hi: achieved,
    };
    Ok(SelectionResult {
        method: SearchMethod::Full,
        selected_ids: ids_of(adjacency, &selection),
        selection,
        achieved_min_distance: achieved,
        theta_bounds_final: bracket,
        initial_bracket: bracket,
        iterations_run: 0,
        feasibility_calls: 0,
        search_nodes: search.visited,
        wall_time_s: start.elapsed().as_secs_f64(),
        steps: Vec::new(),
    })
}

struct SubsetSearch<'a> {
    adjacency: &'a AdjacencyMatrix,
    k: usize,
    prune: bool,
    chosen: Vec<usize>,
    best: Vec<usize>,
    best_value: f64,
    visited: u64,
}

impl SubsetSearch<'_> {
    fn descend(&mut self, first: usize, running_min: f64) {
        self.visited += 1;
        if self.chosen.len() == self.k {
            if running_min > self.best_value {
                self.best_value = running_min;
                self.best = self.chosen.clone();
            }
            return;
        }
        let n = self.adjacency.len();
        let remaining = self.k - self.chosen.len();
        for v in first..=n - remaining {
            let row = self.adjacency.row(v);
            let next_min = self.chosen.iter().fold(running_min, |m, &c| m.min(row[c]));
            // Minima only shrink as nodes are added, and an equal value would
            // lose the tie to the incumbent found earlier.
            if self.prune && next_min <= self.best_value {
                continue;
            }
            self.chosen.push(v);
            self.descend(v + 1, next_min);
            self.chosen.pop();
        }
    }
}

/// Drops nodes until `k` remain, each time removing the node closest to the
/// rest of the selection (the larger index on ties).
pub fn trim_selection(
    selection: &SelectionVector,
    adjacency: &AdjacencyMatrix,
    k: usize,
) -> Result<SelectionVector, SelectionError> {
    if selection.len() < k {
        return Err(SelectionError::TrimTooSmall {
            have: selection.len(),
            want: k,
        });
    }
    let mut chosen = selection.indices().to_vec();
    while chosen.len() > k {
        let nearest = |i: usize| {
            chosen
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| adjacency.get(i, j))
                .fold(f64::INFINITY, f64::min)
        };
        let mut drop = 0;
        let mut drop_distance = f64::INFINITY;
        for (pos, &i) in chosen.iter().enumerate() {
            let d = nearest(i);
            // `chosen` is ascending, so `<=` prefers the larger index on ties
            if d <= drop_distance {
                drop = pos;
                drop_distance = d;
            }
        }
        chosen.remove(drop);
    }
    Ok(SelectionVector(chosen))
}

pub fn min_pairwise_distance(
    selection: &SelectionVector,
    adjacency: &AdjacencyMatrix,
) -> Result<f64, SelectionError> {
    let idx = selection.indices();
    if idx.len() < 2 {
        return Err(SelectionError::SingletonSelection(idx.len()));
    }
    if let Some(&index) = idx.iter().find(|&&i| i >= adjacency.len()) {
        return Err(SelectionError::IndexOutOfRange {
            index,
            n: adjacency.len(),
        });
    }
    let mut m = f64::INFINITY;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            m = m.min(adjacency.get(i, j));
        }
    }
    Ok(m)
}
