use std::collections::HashSet;

use log::debug;

use super::{cut_partition, Packing, SolverBudget, SolverError, SolverSolution};
use crate::topology::{Multigraph, Path, Request};

/// Picks at most one of the given candidate paths per request, respecting
/// `capacities` (indexed like the graph's edges) and accepting every
/// request in `forced`. Candidates over the latency bound are ignored.
pub fn solve_heurpaths(
    g: &Multigraph,
    requests: &[Request],
    candidates: &[Vec<Path>],
    capacities: &[f64],
    forced: &HashSet<u64>,
    budget: &SolverBudget,
) -> Result<SolverSolution, SolverError> {
    if candidates.len() != requests.len() {
        return Err(SolverError::LengthMismatch {
            what: "candidate sets",
            expected: requests.len(),
            got: candidates.len(),
        });
    }
    if capacities.len() != g.edge_count() {
        return Err(SolverError::LengthMismatch {
            what: "capacities",
            expected: g.edge_count(),
            got: capacities.len(),
        });
    }
    let pool = build_packing(g, requests, candidates, capacities, forced)?;
    Ok(pool.solve(budget.max_nodes))
}

/// Packing over owned candidate lists, remembering which path each
/// candidate came from.
pub(crate) struct CandidatePool<'a> {
    packing: Packing,
    paths: Vec<Vec<&'a Path>>,
}

impl CandidatePool<'_> {
    pub fn solve(&self, max_nodes: u64) -> SolverSolution {
        let res = self.packing.solve(max_nodes);
        let paths: Vec<Option<Path>> = res
            .choice
            .iter()
            .enumerate()
            .map(|(i, c)| c.map(|c| self.paths[i][c].clone()))
            .collect();
        SolverSolution {
            status: res.status,
            objective: paths.iter().flatten().count(),
            paths,
            nodes_explored: res.nodes,
        }
    }
}

pub(crate) fn build_packing<'a>(
    g: &Multigraph,
    requests: &[Request],
    candidates: &'a [Vec<Path>],
    capacities: &[f64],
    forced: &HashSet<u64>,
) -> Result<CandidatePool<'a>, SolverError> {
    let ids: HashSet<u64> = requests.iter().map(|r| r.id).collect();
    if let Some(&f) = forced.iter().find(|f| !ids.contains(f)) {
        return Err(SolverError::UnknownForced(f));
    }
    let mut sets = Vec::with_capacity(requests.len());
    let mut kept = Vec::with_capacity(requests.len());
    // Every path leaves its source on its first edge and enters its sink on
    // its last, which gives two cut partitions.
    let mut firsts = Vec::with_capacity(requests.len());
    let mut lasts = Vec::with_capacity(requests.len());
    for (r, cands) in requests.iter().zip(candidates) {
        let mut seen = HashSet::new();
        let mut s = Vec::new();
        let mut k = Vec::new();
        let (mut first, mut last) = (Some(Vec::new()), Some(Vec::new()));
        for p in cands {
            if p.total_latency_ms > r.max_latency_ms {
                debug!("request {}: dropping candidate over latency bound", r.id);
                continue;
            }
            let mut edges = Vec::with_capacity(p.edge_ids.len());
            for &id in &p.edge_ids {
                edges.push(g.edge_index(id).ok_or(SolverError::UnknownEdge(id))?);
            }
            match (edges.first(), edges.last()) {
                (Some(&a), Some(&b)) => {
                    if let (Some(f), Some(l)) = (&mut first, &mut last) {
                        f.push(a);
                        l.push(b);
                    }
                }
                _ => (first, last) = (None, None),
            }
            edges.sort_unstable();
            edges.dedup();
            if seen.insert(edges.clone()) {
                s.push(edges);
                k.push(p);
            }
        }
        firsts.push(first.filter(|f| !f.is_empty()));
        lasts.push(last.filter(|l| !l.is_empty()));
        sets.push(s);
        kept.push(k);
    }
    Ok(CandidatePool {
        packing: Packing {
            demand: requests.iter().map(|r| r.min_bandwidth).collect(),
            candidates: sets,
            forced: requests.iter().map(|r| forced.contains(&r.id)).collect(),
            capacity: capacities.to_vec(),
            cuts: vec![cut_partition(&firsts), cut_partition(&lasts)],
        },
        paths: kept,
    })
}
