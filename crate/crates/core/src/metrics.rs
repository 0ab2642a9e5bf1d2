//! Topology statistics: graph summary, multiplicity and min-cut diversity
//! distributions, greedy address-coverage ordering and scale-down.

use std::collections::{BTreeMap, HashSet, VecDeque};

use rayon::prelude::*;
use thiserror::Error;

use crate::flow::FlowNetwork;
use crate::ingest::{AsRelGraph, MembershipTable, PrefixCounts};
use crate::topology::{Asn, Multigraph, NodeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("graph is empty")]
    Empty,
    #[error("graph is not connected ({0} components)")]
    Disconnected(usize),
    #[error("unknown IXP {0}")]
    UnknownNode(NodeId),
    #[error("source and destination are both IXP {0}")]
    SameEndpoints(NodeId),
    #[error("no values")]
    NoValues,
    #[error("scale-down factor must be at least 1")]
    InvalidFactor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSummary {
    pub node_count: usize,
    pub edge_count: usize,
    pub diameter: usize,
    /// Pathlets per IXP, |E|/|V|.
    pub avg_node_degree: f64,
    /// Pathlets per directly connected ordered IXP pair.
    pub avg_edge_multiplicity: f64,
    pub avg_shortest_path_len: f64,
    pub avg_clustering_coeff: f64,
}

/// Undirected simple neighbour sets (sorted) of the collapsed graph.
fn simple_neighbours(g: &Multigraph) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); g.node_count()];
    for e in 0..g.edge_count() {
        let (u, v) = (g.src_index(e), g.dst_index(e));
        adj[u].push(v);
        adj[v].push(u);
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

fn bfs(adj: &[Vec<usize>], s: usize, dist: &mut [usize]) {
    dist.fill(usize::MAX);
    dist[s] = 0;
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
    }
}

/// Number of ordered node pairs joined by at least one pathlet.
pub fn connected_ordered_pairs(g: &Multigraph) -> usize {
    (0..g.node_count())
        .map(|u| {
            let mut dsts: Vec<usize> = g.out_edges(u).iter().map(|&e| g.dst_index(e)).collect();
            dsts.dedup();
            dsts.len()
        })
        .sum()
}

/// Table-1 style statistics. Hop distances and clustering are taken on the
/// undirected simple graph obtained by collapsing parallel edges.
pub fn graph_summary(g: &Multigraph) -> Result<GraphSummary, MetricsError> {
    let n = g.node_count();
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    let comps = g.weak_components().len();
    if comps > 1 {
        return Err(MetricsError::Disconnected(comps));
    }
    let adj = simple_neighbours(g);
    let (diameter, hop_sum) = (0..n)
        .into_par_iter()
        .map_init(
            || vec![0usize; n],
            |dist, s| {
                bfs(&adj, s, dist);
                let far = dist.iter().copied().max().unwrap_or(0);
                let sum: usize = dist.iter().sum();
                (far, sum)
            },
        )
        .reduce(|| (0, 0), |a, b| (a.0.max(b.0), a.1 + b.1));
    let pairs = n * (n - 1);
    let avg_sp = if pairs == 0 { 0.0 } else { hop_sum as f64 / pairs as f64 };

    let mut clustering = 0.0;
    for u in 0..n {
        let k = adj[u].len();
        if k < 2 {
            continue;
        }
        let mut links = 0usize;
        for (i, &a) in adj[u].iter().enumerate() {
            for &b in &adj[u][i + 1..] {
                if adj[a].binary_search(&b).is_ok() {
                    links += 1;
                }
            }
        }
        clustering += 2.0 * links as f64 / (k * (k - 1)) as f64;
    }
    let ordered = connected_ordered_pairs(g);
    Ok(GraphSummary {
        node_count: n,
        edge_count: g.edge_count(),
        diameter,
        avg_node_degree: g.edge_count() as f64 / n as f64,
        avg_edge_multiplicity: if ordered == 0 { 0.0 } else { g.edge_count() as f64 / ordered as f64 },
        avg_shortest_path_len: avg_sp,
        avg_clustering_coeff: clustering / n as f64,
    })
}

/// Multiplicity of every unordered directly connected IXP pair: the larger
/// of the two directed parallel-edge counts. Keys are node indices, `u < v`.
pub fn pair_multiplicities(g: &Multigraph) -> BTreeMap<(usize, usize), usize> {
    let mut out: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for u in 0..g.node_count() {
        let list = g.out_edges(u);
        let mut i = 0;
        while i < list.len() {
            let v = g.dst_index(list[i]);
            let j = i + g.edges_between(u, v).len();
            let key = (u.min(v), u.max(v));
            let m = out.entry(key).or_insert(0);
            *m = (*m).max(j - i);
            i = j;
        }
    }
    out
}

/// multiplicity → number of unordered connected IXP pairs.
pub fn edge_multiplicity_distribution(g: &Multigraph) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for m in pair_multiplicities(g).into_values() {
        *hist.entry(m).or_insert(0) += 1;
    }
    hist
}

fn unit_network(g: &Multigraph) -> FlowNetwork {
    let mut f = FlowNetwork::new(g.node_count());
    for e in 0..g.edge_count() {
        f.add_arc(g.src_index(e), g.dst_index(e), 1);
    }
    f
}

/// Number of edge-disjoint pathlet paths from `src` to `dst` (unit-capacity
/// max-flow).
pub fn path_diversity(g: &Multigraph, src: NodeId, dst: NodeId) -> Result<u64, MetricsError> {
    let s = g.node_index(src).ok_or(MetricsError::UnknownNode(src))?;
    let t = g.node_index(dst).ok_or(MetricsError::UnknownNode(dst))?;
    if s == t {
        return Err(MetricsError::SameEndpoints(src));
    }
    Ok(unit_network(g).max_flow(s, t))
}

/// Diversity for many ordered pairs at once, in input order.
pub fn path_diversity_many(g: &Multigraph, pairs: &[(NodeId, NodeId)]) -> Result<Vec<u64>, MetricsError> {
    let base = unit_network(g);
    let idx: Vec<(usize, usize)> = pairs
        .iter()
        .map(|&(a, b)| {
            let s = g.node_index(a).ok_or(MetricsError::UnknownNode(a))?;
            let t = g.node_index(b).ok_or(MetricsError::UnknownNode(b))?;
            if s == t {
                return Err(MetricsError::SameEndpoints(a));
            }
            Ok((s, t))
        })
        .collect::<Result<_, _>>()?;
    Ok(idx.par_iter().map(|&(s, t)| base.max_flow(s, t)).collect())
}

/// Every ordered pair of distinct IXPs, by node index order.
pub fn all_ordered_pairs(g: &Multigraph) -> Vec<(NodeId, NodeId)> {
    let ids: Vec<NodeId> = g.nodes().iter().map(|n| n.id).collect();
    let mut out = Vec::with_capacity(ids.len() * ids.len().saturating_sub(1));
    for &a in &ids {
        for &b in &ids {
            if a != b {
                out.push((a, b));
            }
        }
    }
    out
}

pub fn histogram<T: Ord + Copy>(values: &[T]) -> BTreeMap<T, usize> {
    let mut h = BTreeMap::new();
    for &v in values {
        *h.entry(v).or_insert(0) += 1;
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoveragePoint {
    pub ixp_id: NodeId,
    pub cumulative_direct: u64,
    pub cumulative_one_hop: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoverageCurve {
    pub points: Vec<CoveragePoint>,
}

impl CoverageCurve {
    pub fn order(&self) -> Vec<NodeId> {
        self.points.iter().map(|p| p.ixp_id).collect()
    }
}

/// Greedy IXP order by marginal non-overlapping member address space; ties go
/// to the smaller IXP id. The one-hop column follows the same order and also
/// counts the direct customers of members.
pub fn greedy_coverage_order(m: &MembershipTable, prefixes: &PrefixCounts, as_rel: Option<&AsRelGraph>) -> CoverageCurve {
    let members = m.members_by_ixp();
    let customers = as_rel.map(|r| r.customers()).unwrap_or_default();
    let ixps: Vec<(NodeId, &Vec<Asn>)> = members.iter().map(|(&i, v)| (i, v)).collect();
    let mut taken = vec![false; ixps.len()];
    let mut covered: HashSet<Asn> = HashSet::new();
    let mut covered_hop: HashSet<Asn> = HashSet::new();
    let (mut direct, mut one_hop) = (0u64, 0u64);
    let mut points = Vec::with_capacity(ixps.len());
    for _ in 0..ixps.len() {
        let mut best: Option<(usize, u64)> = None;
        for (k, (_, mem)) in ixps.iter().enumerate() {
            if taken[k] {
                continue;
            }
            let gain: u64 = mem
                .iter()
                .filter(|a| !covered.contains(a))
                .map(|&a| prefixes.get(a))
                .sum();
            // ids ascend with k, so strict > keeps the smaller id on ties
            if best.is_none_or(|(_, bg)| gain > bg) {
                best = Some((k, gain));
            }
        }
        let (k, gain) = best.expect("untaken IXP remains");
        taken[k] = true;
        direct += gain;
        for &a in ixps[k].1 {
            covered.insert(a);
            let cone = std::iter::once(a).chain(customers.get(&a).into_iter().flatten().copied());
            for c in cone {
                if covered_hop.insert(c) {
                    one_hop += prefixes.get(c);
                }
            }
        }
        points.push(CoveragePoint {
            ixp_id: ixps[k].0,
            cumulative_direct: direct,
            cumulative_one_hop: one_hop,
        });
    }
    CoverageCurve { points }
}

/// Keeps the first ⌈N/sdf⌉ IXPs of `order` that are nodes of `g`, then the
/// largest connected component.
pub fn scale_down(g: &Multigraph, order: &[NodeId], sdf: usize) -> Result<Multigraph, MetricsError> {
    if sdf == 0 {
        return Err(MetricsError::InvalidFactor);
    }
    let keep_n = g.node_count().div_ceil(sdf);
    let keep: HashSet<NodeId> = order
        .iter()
        .copied()
        .filter(|&id| g.node_index(id).is_some())
        .take(keep_n)
        .collect();
    let out = g.induced_subgraph(&keep).largest_component();
    if out.node_count() == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Percentiles {
    pub p1: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p99: f64,
    pub p99_9: f64,
}

/// Nearest-rank percentile of sorted data: the value at rank ⌈p/100·n⌉.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    // guard against p/100·n landing a hair above an integer
    let rank = (p * n as f64 / 100.0 - 1e-9).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn distribution_percentiles(values: &[f64]) -> Result<Percentiles, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::NoValues);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(Percentiles {
        p1: nearest_rank(&v, 1.0),
        p25: nearest_rank(&v, 25.0),
        p50: nearest_rank(&v, 50.0),
        p75: nearest_rank(&v, 75.0),
        p99: nearest_rank(&v, 99.0),
        p99_9: nearest_rank(&v, 99.9),
    })
}
