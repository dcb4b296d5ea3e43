//! Space-time filtration graphs, clique (simplex) counts, Betti-0/1 and
//! bootstrap distributions of simplex counts.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedSpec;
use crate::stats::{mean, quantile_sorted, sample_sd, sorted_copy};

pub const MAX_DIM: usize = 7;
pub const DEFAULT_MAX_DIM: usize = 5;
pub const DEFAULT_CLIQUE_BUDGET: u64 = 100_000_000;
pub const TRIANGLE_BUDGET: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiltrationParams {
    pub epsilon: f64,
    pub tau: Option<f64>,
    pub max_dim: usize,
}

impl FiltrationParams {
    pub fn new(epsilon: f64, tau: Option<f64>, max_dim: usize) -> Result<Self> {
        let p = Self { epsilon, tau, max_dim };
        p.validate()?;
        Ok(p)
    }

    pub fn spatial(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, None, DEFAULT_MAX_DIM)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        if let Some(t) = self.tau {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!("tau must be > 0, got {t}")));
            }
        }
        check_max_dim(self.max_dim)
    }
}

fn check_max_dim(max_dim: usize) -> Result<()> {
    if !(1..=MAX_DIM).contains(&max_dim) {
        return Err(Error::InvalidParameter(format!("max_dim must lie in 1..={MAX_DIM}, got {max_dim}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedPointCloud {
    points: DMatrix<f64>,
    timestamps: Option<Vec<f64>>,
}

impl TimedPointCloud {
    pub fn new(points: DMatrix<f64>, timestamps: Option<Vec<f64>>) -> Result<Self> {
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("point cloud contains non-finite values".into()));
        }
        if let Some(t) = &timestamps {
            if t.len() != points.nrows() {
                return Err(Error::Shape(format!("{} timestamps for {} points", t.len(), points.nrows())));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("timestamps contain non-finite values".into()));
            }
        }
        Ok(Self { points, timestamps })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn timestamps(&self) -> Option<&[f64]> {
        self.timestamps.as_deref()
    }

    /// Sub-cloud on the given row indices, in that order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let points = DMatrix::from_fn(rows.len(), self.points.ncols(), |i, c| self.points[(rows[i], c)]);
        let timestamps = self.timestamps.as_ref().map(|t| rows.iter().map(|&r| t[r]).collect());
        Self { points, timestamps }
    }
}

/// Undirected simple graph stored as adjacency bitsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiltrationGraph {
    m: usize,
    words: usize,
    adj: Vec<u64>,
}

impl FiltrationGraph {
    pub fn empty(m: usize) -> Self {
        let words = m.div_ceil(64).max(1);
        Self { m, words, adj: vec![0; m * words] }
    }

    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(m);
        for &(i, j) in edges {
            if i >= m || j >= m || i == j {
                return Err(Error::InvalidParameter(format!("invalid edge ({i}, {j}) for {m} vertices")));
            }
            g.add_edge(i, j);
        }
        Ok(g)
    }

    fn add_edge(&mut self, i: usize, j: usize) {
        self.adj[i * self.words + j / 64] |= 1 << (j % 64);
        self.adj[j * self.words + i / 64] |= 1 << (i % 64);
    }

    pub fn vertex_count(&self) -> usize {
        self.m
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.adj[i * self.words..(i + 1) * self.words]
    }

    /// Edges `(i, j)` with `i < j` in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.m {
            for j in (i + 1)..self.m {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> u64 {
        let twice: u64 = self.adj.iter().map(|w| w.count_ones() as u64).sum();
        twice / 2
    }

    /// Bitset of neighbours of `v` with index greater than `v`.
    fn higher_neighbors(&self, v: usize) -> Vec<u64> {
        let mut out = self.row(v).to_vec();
        for (w, word) in out.iter_mut().enumerate() {
            let lo = w * 64;
            if lo + 64 <= v + 1 {
                *word = 0;
            } else if lo <= v {
                let keep = v + 1 - lo;
                *word &= !((1u64 << keep) - 1);
            }
        }
        out
    }

    /// Graph with vertices renamed so that old vertex `v` becomes `perm[v]`.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let mut g = Self::empty(self.m);
        for (i, j) in self.edges() {
            g.add_edge(perm[i], perm[j]);
        }
        g
    }
}

pub fn build_filtration_graph(cloud: &TimedPointCloud, params: &FiltrationParams) -> Result<FiltrationGraph> {
    params.validate()?;
    let times = match (params.tau, cloud.timestamps()) {
        (Some(_), None) => return Err(Error::MissingTimestamps),
        (Some(tau), Some(t)) => Some((tau, t)),
        (None, _) => None,
    };
    let m = cloud.len();
    let p = &cloud.points;
    let mut g = FiltrationGraph::empty(m);
    for i in 0..m {
        for j in (i + 1)..m {
            if let Some((tau, t)) = times {
                if (t[i] - t[j]).abs() > tau {
                    continue;
                }
            }
            let d = (p.row(i) - p.row(j)).norm();
            if d <= params.epsilon {
                g.add_edge(i, j);
            }
        }
    }
    Ok(g)
}

/// Counts of cliques with 1..=`depth_limit`+1 vertices reachable from `root`
/// through strictly increasing vertex order.
fn expand(
    g: &FiltrationGraph,
    cand: &[u64],
    depth: usize,
    depth_limit: usize,
    counts: &mut [u64],
    total: &AtomicU64,
    budget: u64,
    abort: &AtomicBool,
) {
    if abort.load(Ordering::Relaxed) {
        return;
    }
    for (w, &word) in cand.iter().enumerate() {
        let mut bits = word;
        while bits != 0 {
            let u = w * 64 + bits.trailing_zeros() as usize;
            bits &= bits - 1;
            counts[depth] += 1;
            if total.fetch_add(1, Ordering::Relaxed) + 1 > budget {
                abort.store(true, Ordering::Relaxed);
                return;
            }
            if depth < depth_limit {
                let next: Vec<u64> = cand.iter().zip(g.row(u)).enumerate().map(|(k, (&c, &n))| {
                    // only vertices after u keep the order strict
                    let mask = if (k + 1) * 64 <= u + 1 {
                        0
                    } else if k * 64 <= u {
                        !((1u64 << (u + 1 - k * 64)) - 1)
                    } else {
                        u64::MAX
                    };
                    c & n & mask
                }).collect();
                if next.iter().any(|&x| x != 0) {
                    expand(g, &next, depth + 1, depth_limit, counts, total, budget, abort);
                }
            }
        }
    }
}

fn count_to_depth(g: &FiltrationGraph, depth_limit: usize, budget: u64) -> Option<Vec<u64>> {
    let total = AtomicU64::new(0);
    let abort = AtomicBool::new(false);
    let partial: Vec<Vec<u64>> = (0..g.m)
        .into_par_iter()
        .map(|root| {
            let mut counts = vec![0u64; depth_limit + 1];
            let cand = g.higher_neighbors(root);
            expand(g, &cand, 1, depth_limit, &mut counts, &total, budget, &abort);
            counts
        })
        .collect();
    if abort.load(Ordering::Relaxed) {
        return None;
    }
    let mut counts = vec![0u64; depth_limit + 1];
    counts[0] = g.m as u64;
    for c in partial {
        for (k, v) in c.into_iter().enumerate().skip(1) {
            counts[k] += v;
        }
    }
    Some(counts)
}

/// `counts[k]` = number of k-simplices (cliques on k+1 vertices), k = 0..=max_dim.
pub fn simplex_counts(graph: &FiltrationGraph, max_dim: usize) -> Result<Vec<u64>> {
    simplex_counts_with_budget(graph, max_dim, DEFAULT_CLIQUE_BUDGET)
}

/// As [`simplex_counts`], failing once more than `budget` simplices of
/// dimension ≥ 1 have been enumerated. `dim_reached` is the highest
/// dimension whose cumulative count fits in the budget.
pub fn simplex_counts_with_budget(graph: &FiltrationGraph, max_dim: usize, budget: u64) -> Result<Vec<u64>> {
    check_max_dim(max_dim)?;
    if let Some(c) = count_to_depth(graph, max_dim, budget) {
        return Ok(c);
    }
    let mut dim_reached = 0;
    for d in 1..max_dim {
        if count_to_depth(graph, d, budget).is_none() {
            break;
        }
        dim_reached = d;
    }
    Err(Error::BudgetExceeded { budget, dim_reached })
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

pub fn betti0(graph: &FiltrationGraph) -> u64 {
    let mut parent: Vec<usize> = (0..graph.m).collect();
    let mut components = graph.m as u64;
    for (i, j) in graph.edges() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
            components -= 1;
        }
    }
    components
}

fn triangles(graph: &FiltrationGraph, limit: usize) -> Option<Vec<[usize; 3]>> {
    let mut out = Vec::new();
    for (i, j) in graph.edges() {
        for k in (j + 1)..graph.m {
            if graph.has_edge(i, k) && graph.has_edge(j, k) {
                if out.len() == limit {
                    return None;
                }
                out.push([i, j, k]);
            }
        }
    }
    Some(out)
}

/// Rank over GF(2) of a matrix given as sparse columns (sorted row indices).
pub fn gf2_rank(columns: Vec<Vec<usize>>) -> usize {
    let mut pivots: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut rank = 0;
    for mut col in columns {
        while let Some(&low) = col.last() {
            match pivots.get(&low) {
                Some(p) => col = symmetric_difference(&col, p),
                None => {
                    pivots.insert(low, col);
                    rank += 1;
                    break;
                }
            }
        }
    }
    rank
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// `(betti0, betti1)` of the clique complex; `betti1` is `None` when the
/// graph has more than [`TRIANGLE_BUDGET`] triangles.
pub fn betti_numbers(graph: &FiltrationGraph) -> (u64, Option<u64>) {
    let b0 = betti0(graph);
    let Some(tris) = triangles(graph, TRIANGLE_BUDGET) else {
        return (b0, None);
    };
    let edges = graph.edges();
    let index: HashMap<(usize, usize), usize> = edges.iter().enumerate().map(|(k, &e)| (e, k)).collect();
    let columns: Vec<Vec<usize>> = tris
        .iter()
        .map(|&[i, j, k]| {
            let mut col = vec![index[&(i, j)], index[&(i, k)], index[&(j, k)]];
            col.sort_unstable();
            col
        })
        .collect();
    let rank = gf2_rank(columns) as u64;
    let b1 = edges.len() as u64 + b0 - graph.m as u64 - rank;
    (b0, Some(b1))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplicialProfile {
    pub counts: Vec<u64>,
    pub betti0: u64,
    pub betti1: Option<u64>,
    pub edge_count: u64,
}

pub fn simplicial_profile(graph: &FiltrationGraph, max_dim: usize) -> Result<SimplicialProfile> {
    let counts = simplex_counts(graph, max_dim)?;
    let (betti0, betti1) = betti_numbers(graph);
    Ok(SimplicialProfile { edge_count: counts[1], counts, betti0, betti1 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountDistribution {
    pub mean: f64,
    pub sd: f64,
    pub p2_5: f64,
    pub p50: f64,
    pub p97_5: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    /// One distribution per dimension 0..=max_dim.
    pub per_dim: Vec<CountDistribution>,
    /// `replicates[k][d]` = d-simplex count of replicate k.
    pub replicates: Vec<Vec<u64>>,
}

/// Sorted row indices drawn without replacement for replicate `k`.
pub fn bootstrap_indices(m: usize, sample_size: usize, seed: &SeedSpec, k: u64) -> Vec<usize> {
    let mut rng = seed.child(k).stream();
    let mut idx = rand::seq::index::sample(&mut rng, m, sample_size).into_vec();
    idx.sort_unstable();
    idx
}

pub fn witness_bootstrap(
    cloud: &TimedPointCloud,
    params: &FiltrationParams,
    n_samples: usize,
    sample_size: usize,
    seed: &SeedSpec,
) -> Result<BootstrapSummary> {
    params.validate()?;
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    if sample_size > cloud.len() {
        return Err(Error::SampleTooLarge { sample_size, available: cloud.len() });
    }
    if sample_size == 0 {
        return Err(Error::InvalidParameter("sample_size must be >= 1".into()));
    }
    if params.tau.is_some() && cloud.timestamps().is_none() {
        return Err(Error::MissingTimestamps);
    }
    let replicates: Vec<Vec<u64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|k| {
            let sub = cloud.select(&bootstrap_indices(cloud.len(), sample_size, seed, k));
            let g = build_filtration_graph(&sub, params)?;
            simplex_counts(&g, params.max_dim)
        })
        .collect::<Result<_>>()?;
    let per_dim = (0..=params.max_dim)
        .map(|d| {
            let values: Vec<f64> = replicates.iter().map(|r| r[d] as f64).collect();
            let sorted = sorted_copy(&values);
            CountDistribution {
                mean: mean(&values),
                sd: sample_sd(&values),
                p2_5: quantile_sorted(&sorted, 0.025),
                p50: quantile_sorted(&sorted, 0.5),
                p97_5: quantile_sorted(&sorted, 0.975),
            }
        })
        .collect();
    Ok(BootstrapSummary { per_dim, replicates })
}
