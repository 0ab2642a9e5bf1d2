use std::cmp::Ordering;

use thiserror::Error;

use crate::topology::{EdgeId, Multigraph, Path};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectError {
    #[error("no candidate paths")]
    Empty,
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("edge {0} has zero latency")]
    ZeroLatency(EdgeId),
    #[error("edge {0} belongs to a parallel set with zero bandwidth")]
    ZeroBandwidth(EdgeId),
}

/// InvU(e) = (b(e) / min b over E(u,v)) · (max lat over E(u,v) / lat(e)) / |E(u,v)|,
/// on static capacities.
pub fn inverse_utility(g: &Multigraph, edge: EdgeId) -> Result<f64, SelectError> {
    let idx = g.edge_index(edge).ok_or(SelectError::UnknownEdge(edge))?;
    let e = g.edge(idx);
    if e.latency_ms <= 0.0 {
        return Err(SelectError::ZeroLatency(edge));
    }
    let group = g.edges_between(g.src_index(idx), g.dst_index(idx));
    let min_bw = group.iter().map(|&i| g.edge(i).bandwidth).fold(f64::INFINITY, f64::min);
    let max_lat = group.iter().map(|&i| g.edge(i).latency_ms).fold(0.0, f64::max);
    if min_bw <= 0.0 {
        return Err(SelectError::ZeroBandwidth(edge));
    }
    Ok((e.bandwidth / min_bw) * (max_lat / e.latency_ms) / group.len() as f64)
}

/// Sum of edge InvU along the path.
pub fn path_score(g: &Multigraph, p: &Path) -> Result<f64, SelectError> {
    p.edge_ids.iter().map(|&e| inverse_utility(g, e)).sum()
}

/// Fewest hops first, then lowest InvU score, then lowest latency, then
/// lexicographically smallest edge ids.
pub fn select_best<'p>(paths: &'p [Path], g: &Multigraph) -> Result<&'p Path, SelectError> {
    let mut best: Option<(&Path, f64)> = None;
    for p in paths {
        let score = path_score(g, p)?;
        let better = match best {
            None => true,
            Some((b, bs)) => {
                let ord = p
                    .hop_count()
                    .cmp(&b.hop_count())
                    .then(score.total_cmp(&bs))
                    .then(p.total_latency_ms.total_cmp(&b.total_latency_ms))
                    .then_with(|| p.edge_ids.cmp(&b.edge_ids));
                ord == Ordering::Less
            }
        };
        if better {
            best = Some((p, score));
        }
    }
    best.map(|(p, _)| p).ok_or(SelectError::Empty)
}
