use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::topology::{
    attach_virtual_endpoints, collapse_min_latency, prune_with_view, Access, AugmentedGraph, CapacityView,
    CollapsedGraph, EdgeMask, Multigraph, Path, Request,
};

/// Min-heap entry ordered by distance, then node index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Parent {
    Unreached,
    Source,
    Edge(usize),
}

/// Everything the samplers share for one request: pruned edge set E¹, its
/// min-latency collapse, the virtual endpoints and the remaining-latency
/// labels d_t towards the super sink.
#[derive(Debug, Clone)]
pub struct RequestContext<'a> {
    pub graph: &'a Multigraph,
    pub request: &'a Request,
    pub view: CapacityView,
    pub mask: EdgeMask,
    pub collapsed: CollapsedGraph,
    pub endpoints: AugmentedGraph,
    /// d_t per IXP index; infinite when the sink is unreachable.
    pub dist_to_sink: Vec<f64>,
    shortest: Option<Path>,
}

impl<'a> RequestContext<'a> {
    pub fn new(graph: &'a Multigraph, request: &'a Request, view: CapacityView) -> Self {
        let mask = prune_with_view(graph, request, view);
        let collapsed = collapse_min_latency(graph, &mask);
        let endpoints = attach_virtual_endpoints(graph, request);
        let dist_to_sink = reverse_labels(&collapsed, &endpoints, graph);
        let mut ctx = RequestContext {
            graph,
            request,
            view,
            mask,
            collapsed,
            endpoints,
            dist_to_sink,
            shortest: None,
        };
        let banned = vec![false; graph.node_count()];
        ctx.shortest = ctx
            .search(&ctx.mask, &banned, |_, _, _, run| run.first().copied())
            .filter(|p| p.total_latency_ms <= request.max_latency_ms);
        ctx
    }

    /// d_t of the super source.
    pub fn source_distance(&self) -> f64 {
        self.endpoints
            .source_links
            .iter()
            .map(|&(i, l)| l + self.dist_to_sink[i])
            .fold(f64::INFINITY, f64::min)
    }

    /// The latency-shortest feasible path, if any exists.
    pub fn shortest_path(&self) -> Option<&Path> {
        self.shortest.as_ref()
    }

    pub fn is_feasible(&self) -> bool {
        self.shortest.is_some()
    }

    pub fn latency_bound(&self) -> f64 {
        self.request.max_latency_ms
    }

    pub(crate) fn source_access(&self, ixp: usize, latency_ms: f64) -> Access {
        Access::new(self.graph.node(ixp).id, latency_ms)
    }

    pub(crate) fn sink_access(&self, ixp: usize) -> Option<Access> {
        self.endpoints.sink_latency[ixp].map(|l| Access::new(self.graph.node(ixp).id, l))
    }

    /// Calls `f(v, run)` for every neighbour `v` of `u` with the masked
    /// parallel edges E¹(u,v), ordered by latency then edge id.
    pub(crate) fn for_each_run<F>(&self, mask: &EdgeMask, u: usize, buf: &mut Vec<usize>, mut f: F)
    where
        F: FnMut(usize, &[usize]),
    {
        let out = self.graph.out_edges(u);
        let mut i = 0;
        while i < out.len() {
            let v = self.graph.dst_index(out[i]);
            buf.clear();
            while i < out.len() && self.graph.dst_index(out[i]) == v {
                if mask.contains(out[i]) {
                    buf.push(out[i]);
                }
                i += 1;
            }
            if !buf.is_empty() {
                f(v, buf);
            }
        }
    }

    /// Dijkstra from the super source over `mask`. For every scanned
    /// neighbour `choose(u, d_u, v, run)` picks the parallel edge to relax;
    /// `None` skips the neighbour. Sink links are relaxed only when
    /// `d_u + access ≤ l_R`. Source links of `banned` IXPs are unused.
    pub(crate) fn search<C>(&self, mask: &EdgeMask, banned: &[bool], mut choose: C) -> Option<Path>
    where
        C: FnMut(usize, f64, usize, &[usize]) -> Option<usize>,
    {
        let g = self.graph;
        let n = g.node_count();
        let bound = self.request.max_latency_ms;
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![Parent::Unreached; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        for &(i, l) in &self.endpoints.source_links {
            if banned[i] {
                continue;
            }
            let d = 0.0 + l;
            if d < dist[i] {
                dist[i] = d;
                parent[i] = Parent::Source;
                heap.push(Entry { dist: d, node: i });
            }
        }
        let mut best_sink: Option<(f64, usize)> = None;
        let mut buf = Vec::new();
        while let Some(Entry { dist: du, node: u }) = heap.pop() {
            if done[u] || du > dist[u] {
                continue;
            }
            if let Some((bs, _)) = best_sink {
                if du >= bs {
                    break;
                }
            }
            done[u] = true;
            if let Some(l) = self.endpoints.sink_latency[u] {
                let d = du + l;
                if d <= bound && best_sink.is_none_or(|(bs, _)| d < bs) {
                    best_sink = Some((d, u));
                }
            }
            let mut relaxed: Vec<(usize, usize, f64)> = Vec::new();
            self.for_each_run(mask, u, &mut buf, |v, run| {
                if done[v] {
                    return;
                }
                if let Some(e) = choose(u, du, v, run) {
                    let d = du + g.edge(e).latency_ms;
                    relaxed.push((v, e, d));
                }
            });
            for (v, e, d) in relaxed {
                if d < dist[v] {
                    dist[v] = d;
                    parent[v] = Parent::Edge(e);
                    heap.push(Entry { dist: d, node: v });
                }
            }
        }
        let (_, t) = best_sink?;
        let mut edges = Vec::new();
        let mut cur = t;
        loop {
            match parent[cur] {
                Parent::Source => break,
                Parent::Edge(e) => {
                    edges.push(e);
                    cur = g.src_index(e);
                }
                Parent::Unreached => unreachable!("settled node without parent"),
            }
        }
        edges.reverse();
        let src_lat = self
            .endpoints
            .source_links
            .iter()
            .find(|&&(i, _)| i == cur)
            .map(|&(_, l)| l)
            .expect("path starts at a source link");
        let access_src = self.source_access(cur, src_lat);
        let access_dst = self.sink_access(t).expect("path ends at a sink link");
        Some(Path::from_indices(g, access_src, &edges, access_dst))
    }
}

/// d_t: reverse Dijkstra from the super sink over the collapsed graph.
fn reverse_labels(cg: &CollapsedGraph, aug: &AugmentedGraph, g: &Multigraph) -> Vec<f64> {
    let n = cg.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    for (i, l) in aug.sink_links() {
        if l < dist[i] {
            dist[i] = l;
            heap.push(Entry { dist: l, node: i });
        }
    }
    while let Some(Entry { dist: dv, node: v }) = heap.pop() {
        if dv > dist[v] {
            continue;
        }
        for &(u, e) in cg.incoming(v) {
            let d = g.edge(e).latency_ms + dv;
            if d < dist[u] {
                dist[u] = d;
                heap.push(Entry { dist: d, node: u });
            }
        }
    }
    dist
}
