use rand::Rng;

use super::context::RequestContext;
use super::SimRng;
use crate::topology::Path;

pub const MAX_RESTARTS: usize = 10;

enum Step {
    Sink,
    Hop(usize, usize),
}

/// One guided walk from a random usable source link. From `u`, a neighbour
/// `v` is eligible if d_t(v) < d_t(u) and the walk can still finish in
/// time through it; a neighbour and then one of its eligible parallel edges
/// are drawn uniformly. Returns `None` on a dead end.
pub fn gw_once(ctx: &RequestContext<'_>, rng: &mut SimRng) -> Option<Path> {
    let g = ctx.graph;
    let bound = ctx.latency_bound();
    let d_t = &ctx.dist_to_sink;
    let starts: Vec<(usize, f64)> = ctx
        .endpoints
        .source_links
        .iter()
        .copied()
        .filter(|&(i, l)| l + d_t[i] <= bound)
        .collect();
    if starts.is_empty() {
        return None;
    }
    let (s, s_lat) = starts[rng.random_range(0..starts.len())];
    let mut u = s;
    let mut lat = 0.0 + s_lat;
    let mut edges = Vec::new();
    let mut options: Vec<Step> = Vec::new();
    let mut buf = Vec::new();
    let mut parallel: Vec<usize> = Vec::new();
    // strictly decreasing d_t bounds the walk by |V| hops
    for _ in 0..=g.node_count() {
        options.clear();
        if let Some(l) = ctx.endpoints.sink_latency[u] {
            if lat + l <= bound {
                options.push(Step::Sink);
            }
        }
        ctx.for_each_run(&ctx.mask, u, &mut buf, |v, run| {
            if d_t[v] >= d_t[u] {
                return;
            }
            let n_ok = run
                .iter()
                .filter(|&&e| lat + g.edge(e).latency_ms + d_t[v] <= bound)
                .count();
            if n_ok > 0 {
                options.push(Step::Hop(v, n_ok));
            }
        });
        if options.is_empty() {
            return None;
        }
        match options[rng.random_range(0..options.len())] {
            Step::Sink => {
                let src = ctx.source_access(s, s_lat);
                let dst = ctx.sink_access(u).expect("sink access");
                let p = Path::from_indices(g, src, &edges, dst);
                return (p.total_latency_ms <= bound).then_some(p);
            }
            Step::Hop(v, n_ok) => {
                parallel.clear();
                parallel.extend(
                    g.edges_between(u, v)
                        .iter()
                        .copied()
                        .filter(|&e| ctx.mask.contains(e) && lat + g.edge(e).latency_ms + d_t[v] <= bound),
                );
                debug_assert_eq!(parallel.len(), n_ok);
                let e = parallel[rng.random_range(0..parallel.len())];
                lat += g.edge(e).latency_ms;
                edges.push(e);
                u = v;
            }
        }
    }
    None
}

/// `k` guided walks, de-duplicated. A walk that dead-ends (only possible
/// through rounding or zero-latency edges) is restarted; after
/// [`MAX_RESTARTS`] the latency-shortest path is used instead.
pub fn sample_gw(ctx: &RequestContext<'_>, k: usize, rng: &mut SimRng) -> Vec<Path> {
    let Some(fallback) = ctx.shortest_path() else {
        return Vec::new();
    };
    let mut out: Vec<Path> = Vec::new();
    for _ in 0..k {
        let p = (0..=MAX_RESTARTS)
            .find_map(|_| gw_once(ctx, rng))
            .unwrap_or_else(|| fallback.clone());
        if !out.iter().any(|q| q.key() == p.key()) {
            out.push(p);
        }
    }
    out
}
