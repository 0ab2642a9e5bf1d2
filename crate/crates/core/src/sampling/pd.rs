use super::context::RequestContext;
use crate::topology::Path;

/// Path Dijkstra: repeated latency-shortest paths, each removing the edges of
/// its predecessors so that the results are pairwise edge-disjoint.
pub fn sample_pd(ctx: &RequestContext<'_>, k: usize) -> Vec<Path> {
    let Some(first) = ctx.shortest_path() else {
        return Vec::new();
    };
    let g = ctx.graph;
    let mut mask = ctx.mask.clone();
    let mut banned = vec![false; g.node_count()];
    let mut out: Vec<Path> = Vec::with_capacity(k);
    let mut next = Some(first.clone());
    while let Some(p) = next.take() {
        if p.edge_ids.is_empty() {
            // a zero-hop path has no edges to remove; retire its source link instead
            let s = g.node_index(p.access_src.ixp).expect("access IXP in graph");
            banned[s] = true;
        }
        for &id in &p.edge_ids {
            mask.remove(g.edge_index(id).expect("edge in graph"));
        }
        out.push(p);
        if out.len() >= k {
            break;
        }
        next = ctx
            .search(&mask, &banned, |_, _, _, run| run.first().copied())
            .filter(|p| p.total_latency_ms <= ctx.latency_bound());
    }
    out
}
