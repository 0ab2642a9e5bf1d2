use rand::Rng;

use super::context::RequestContext;
use super::SimRng;
use crate::topology::Path;

/// One randomized Dijkstra run. Per scanned neighbour, the parallel edges
/// that can still complete within the bound (d_Q(u) + lat(e) + d_t(v) ≤ l_R)
/// are kept and one of them is drawn uniformly.
pub fn gd_once(ctx: &RequestContext<'_>, rng: &mut SimRng) -> Option<Path> {
    if !ctx.is_feasible() {
        return None;
    }
    let g = ctx.graph;
    let bound = ctx.latency_bound();
    let d_t = &ctx.dist_to_sink;
    let banned = vec![false; g.node_count()];
    let mut eligible = Vec::new();
    ctx.search(&ctx.mask, &banned, |_, du, v, run| {
        eligible.clear();
        eligible.extend(
            run.iter()
                .copied()
                .filter(|&e| du + g.edge(e).latency_ms + d_t[v] <= bound),
        );
        match eligible.len() {
            0 => None,
            1 => Some(eligible[0]),
            n => Some(eligible[rng.random_range(0..n)]),
        }
    })
    .filter(|p| p.total_latency_ms <= bound)
}

/// `k` independent randomized Dijkstra runs, de-duplicated in first-seen order.
pub fn sample_gd(ctx: &RequestContext<'_>, k: usize, rng: &mut SimRng) -> Vec<Path> {
    let Some(fallback) = ctx.shortest_path() else {
        return Vec::new();
    };
    let mut out: Vec<Path> = Vec::new();
    for _ in 0..k {
        let p = gd_once(ctx, rng).unwrap_or_else(|| fallback.clone());
        if !out.iter().any(|q| q.key() == p.key()) {
            out.push(p);
        }
    }
    out
}
