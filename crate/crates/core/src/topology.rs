//! Directed pathlet multigraph over IXPs, plus the per-request views the
//! samplers and solvers build on: bandwidth/latency pruning, min-latency
//! collapsing and virtual endpoint attachment.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

pub type NodeId = u32;
pub type EdgeId = u32;
pub type Asn = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("edge {edge} references unknown node {node}")]
    DanglingEndpoint { edge: EdgeId, node: NodeId },
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("duplicate edge id {0}")]
    DuplicateEdge(EdgeId),
    #[error("edge {0} is a self-loop")]
    SelfLoop(EdgeId),
    #[error("edge {edge}: {reason}")]
    InvalidEdge { edge: EdgeId, reason: &'static str },
    #[error("coordinates out of range: lat {lat}, lon {lon}")]
    InvalidCoordinates { lat: f64, lon: f64 },
    #[error("unknown edge id {0}")]
    UnknownEdge(EdgeId),
    #[error("edge {edge} has residual {residual} < requested {requested}")]
    InsufficientResidual {
        edge: EdgeId,
        residual: f64,
        requested: f64,
    },
    #[error("invalid request {id}: {reason}")]
    InvalidRequest { id: u64, reason: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self, TopologyError> {
        if !(-90.0..=90.0).contains(&lat_deg) || !(-180.0..=180.0).contains(&lon_deg) {
            return Err(TopologyError::InvalidCoordinates {
                lat: lat_deg,
                lon: lon_deg,
            });
        }
        Ok(GeoPoint { lat_deg, lon_deg })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IxpNode {
    pub id: NodeId,
    pub name: String,
    /// Absent only in synthetic graphs built without geography.
    pub location: Option<GeoPoint>,
}

impl IxpNode {
    pub fn new(id: NodeId, name: impl Into<String>) -> Self {
        IxpNode {
            id,
            name: name.into(),
            location: None,
        }
    }

    pub fn located(id: NodeId, name: impl Into<String>, location: GeoPoint) -> Self {
        IxpNode {
            id,
            name: name.into(),
            location: Some(location),
        }
    }
}

/// A transit pathlet offered by one provider between two IXPs.
#[derive(Debug, Clone, PartialEq)]
pub struct PathletEdge {
    pub id: EdgeId,
    pub src: NodeId,
    pub dst: NodeId,
    pub provider_asn: Asn,
    pub bandwidth: f64,
    pub latency_ms: f64,
    residual: f64,
}

impl PathletEdge {
    pub fn new(
        id: EdgeId,
        src: NodeId,
        dst: NodeId,
        provider_asn: Asn,
        bandwidth: f64,
        latency_ms: f64,
    ) -> Self {
        PathletEdge {
            id,
            src,
            dst,
            provider_asn,
            bandwidth,
            latency_ms,
            residual: bandwidth,
        }
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn used(&self) -> f64 {
        self.bandwidth - self.residual
    }
}

/// Capacity of a link; virtual access links are never capacity constrained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity {
    Finite(f64),
    Unbounded,
}

/// Which bandwidth figure a per-request view prunes against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CapacityView {
    /// Current residual bandwidth (online admission).
    #[default]
    Residual,
    /// Static capacity, i.e. the empty graph (reconfiguration, offline sampling).
    Full,
}

#[derive(Debug, Clone)]
pub struct Multigraph {
    nodes: Vec<IxpNode>,
    node_pos: HashMap<NodeId, usize>,
    edges: Vec<PathletEdge>,
    edge_pos: HashMap<EdgeId, usize>,
    /// Sorted by (dst index, latency, edge id) so parallel groups are contiguous
    /// and their first member is the min-latency representative.
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

impl Multigraph {
    pub fn build(nodes: Vec<IxpNode>, edges: Vec<PathletEdge>) -> Result<Self, TopologyError> {
        let mut node_pos = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if node_pos.insert(n.id, i).is_some() {
                return Err(TopologyError::DuplicateNode(n.id));
            }
        }
        let mut edge_pos = HashMap::with_capacity(edges.len());
        let mut out_adj = vec![Vec::new(); nodes.len()];
        let mut in_adj = vec![Vec::new(); nodes.len()];
        let mut edges = edges;
        for (i, e) in edges.iter_mut().enumerate() {
            let s = *node_pos.get(&e.src).ok_or(TopologyError::DanglingEndpoint {
                edge: e.id,
                node: e.src,
            })?;
            let d = *node_pos.get(&e.dst).ok_or(TopologyError::DanglingEndpoint {
                edge: e.id,
                node: e.dst,
            })?;
            if s == d {
                return Err(TopologyError::SelfLoop(e.id));
            }
            if !(e.bandwidth.is_finite() && e.bandwidth >= 0.0) {
                return Err(TopologyError::InvalidEdge {
                    edge: e.id,
                    reason: "bandwidth must be finite and non-negative",
                });
            }
            if !(e.latency_ms.is_finite() && e.latency_ms >= 0.0) {
                return Err(TopologyError::InvalidEdge {
                    edge: e.id,
                    reason: "latency must be finite and non-negative",
                });
            }
            if edge_pos.insert(e.id, i).is_some() {
                return Err(TopologyError::DuplicateEdge(e.id));
            }
            e.residual = e.bandwidth;
            out_adj[s].push(i);
            in_adj[d].push(i);
        }
        let mut g = Multigraph {
            nodes,
            node_pos,
            edges,
            edge_pos,
            out_adj,
            in_adj,
        };
        g.sort_adjacency();
        Ok(g)
    }

    pub fn empty() -> Self {
        Multigraph::build(Vec::new(), Vec::new()).expect("empty graph is valid")
    }

    fn sort_adjacency(&mut self) {
        let edges = &self.edges;
        let pos = &self.node_pos;
        for list in self.out_adj.iter_mut() {
            list.sort_by(|&a, &b| {
                let (ea, eb) = (&edges[a], &edges[b]);
                pos[&ea.dst]
                    .cmp(&pos[&eb.dst])
                    .then(ea.latency_ms.total_cmp(&eb.latency_ms))
                    .then(ea.id.cmp(&eb.id))
            });
        }
        for list in self.in_adj.iter_mut() {
            list.sort_by(|&a, &b| {
                let (ea, eb) = (&edges[a], &edges[b]);
                pos[&ea.src]
                    .cmp(&pos[&eb.src])
                    .then(ea.latency_ms.total_cmp(&eb.latency_ms))
                    .then(ea.id.cmp(&eb.id))
            });
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[IxpNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[PathletEdge] {
        &self.edges
    }

    pub fn node(&self, idx: usize) -> &IxpNode {
        &self.nodes[idx]
    }

    pub fn edge(&self, idx: usize) -> &PathletEdge {
        &self.edges[idx]
    }

    pub fn node_index(&self, id: NodeId) -> Option<usize> {
        self.node_pos.get(&id).copied()
    }

    pub fn edge_index(&self, id: EdgeId) -> Option<usize> {
        self.edge_pos.get(&id).copied()
    }

    pub fn edge_by_id(&self, id: EdgeId) -> Option<&PathletEdge> {
        self.edge_index(id).map(|i| &self.edges[i])
    }

    /// Edge indices leaving `node`, grouped by destination.
    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out_adj[node]
    }

    pub fn in_edges(&self, node: usize) -> &[usize] {
        &self.in_adj[node]
    }

    pub fn src_index(&self, edge: usize) -> usize {
        self.node_pos[&self.edges[edge].src]
    }

    pub fn dst_index(&self, edge: usize) -> usize {
        self.node_pos[&self.edges[edge].dst]
    }

    /// All parallel edges from `u` to `v` (node indices), i.e. E_G(u,v).
    pub fn edges_between(&self, u: usize, v: usize) -> &[usize] {
        let list = &self.out_adj[u];
        let start = list.partition_point(|&e| self.dst_index(e) < v);
        let end = list.partition_point(|&e| self.dst_index(e) <= v);
        &list[start..end]
    }

    pub fn edge_indices(&self, ids: &[EdgeId]) -> Result<Vec<usize>, TopologyError> {
        ids.iter()
            .map(|&id| self.edge_index(id).ok_or(TopologyError::UnknownEdge(id)))
            .collect()
    }

    pub fn total_capacity(&self) -> f64 {
        self.edges.iter().map(|e| e.bandwidth).sum()
    }

    pub fn total_used(&self) -> f64 {
        self.edges.iter().map(|e| e.used()).sum()
    }

    pub fn available(&self, edge: usize, view: CapacityView) -> f64 {
        match view {
            CapacityView::Residual => self.edges[edge].residual,
            CapacityView::Full => self.edges[edge].bandwidth,
        }
    }

    /// Reserves `amount` on every listed edge, or on none of them.
    pub(crate) fn reserve(&mut self, edges: &[usize], amount: f64) -> Result<(), TopologyError> {
        for &e in edges {
            let edge = &self.edges[e];
            if edge.residual < amount {
                return Err(TopologyError::InsufficientResidual {
                    edge: edge.id,
                    residual: edge.residual,
                    requested: amount,
                });
            }
        }
        for &e in edges {
            self.edges[e].residual -= amount;
        }
        Ok(())
    }

    pub(crate) fn release(&mut self, edges: &[usize], amount: f64) {
        for &e in edges {
            let edge = &mut self.edges[e];
            edge.residual = (edge.residual + amount).min(edge.bandwidth);
        }
    }

    pub(crate) fn restore_residuals(&mut self, residuals: &[f64]) {
        for (e, &r) in self.edges.iter_mut().zip(residuals) {
            e.residual = r;
        }
    }

    pub fn reset_residuals(&mut self) {
        for e in &mut self.edges {
            e.residual = e.bandwidth;
        }
    }

    /// Rebuilds the graph with every edge passed through `f` (residuals reset).
    pub fn map_edges<F>(&self, mut f: F) -> Result<Multigraph, TopologyError>
    where
        F: FnMut(&IxpNode, &IxpNode, &PathletEdge) -> PathletEdge,
    {
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let s = &self.nodes[self.node_pos[&e.src]];
                let d = &self.nodes[self.node_pos[&e.dst]];
                f(s, d, e)
            })
            .collect();
        Multigraph::build(self.nodes.clone(), edges)
    }

    /// Subgraph induced by `keep`, preserving node and edge order.
    pub fn induced_subgraph(&self, keep: &HashSet<NodeId>) -> Multigraph {
        let nodes: Vec<IxpNode> = self
            .nodes
            .iter()
            .filter(|n| keep.contains(&n.id))
            .cloned()
            .collect();
        let edges: Vec<PathletEdge> = self
            .edges
            .iter()
            .filter(|e| keep.contains(&e.src) && keep.contains(&e.dst))
            .map(|e| PathletEdge::new(e.id, e.src, e.dst, e.provider_asn, e.bandwidth, e.latency_ms))
            .collect();
        Multigraph::build(nodes, edges).expect("induced subgraph of a valid graph is valid")
    }

    /// Weakly connected components as lists of node indices, in order of
    /// their smallest member index.
    pub fn weak_components(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            comp[start] = id;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                let nbrs = self.out_adj[u]
                    .iter()
                    .map(|&e| self.dst_index(e))
                    .chain(self.in_adj[u].iter().map(|&e| self.src_index(e)));
                for v in nbrs {
                    if comp[v] == usize::MAX {
                        comp[v] = id;
                        members.push(v);
                        queue.push_back(v);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn is_weakly_connected(&self) -> bool {
        self.weak_components().len() <= 1
    }

    /// Largest weakly connected component. Ties go to the component holding
    /// the smallest node id.
    pub fn largest_component(&self) -> Multigraph {
        let comps = self.weak_components();
        let best = comps.iter().max_by(|a, b| {
            a.len().cmp(&b.len()).then_with(|| {
                let ma = a.iter().map(|&i| self.nodes[i].id).min();
                let mb = b.iter().map(|&i| self.nodes[i].id).min();
                mb.cmp(&ma)
            })
        });
        match best {
            None => self.clone(),
            Some(members) => {
                let keep: HashSet<NodeId> = members.iter().map(|&i| self.nodes[i].id).collect();
                self.induced_subgraph(&keep)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Access {
    pub ixp: NodeId,
    pub latency_ms: f64,
}

impl Access {
    pub fn new(ixp: NodeId, latency_ms: f64) -> Self {
        Access { ixp, latency_ms }
    }
}

/// End-to-end connection demand between two IP endpoints, each reachable
/// over one or more access IXPs.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: u64,
    pub src_access: Vec<Access>,
    pub dst_access: Vec<Access>,
    pub min_bandwidth: f64,
    pub max_latency_ms: f64,
}

impl Request {
    pub fn new(
        id: u64,
        src_access: Vec<Access>,
        dst_access: Vec<Access>,
        min_bandwidth: f64,
        max_latency_ms: f64,
    ) -> Result<Self, TopologyError> {
        let invalid = |reason| TopologyError::InvalidRequest { id, reason };
        if src_access.is_empty() || dst_access.is_empty() {
            return Err(invalid("access lists must be non-empty"));
        }
        if src_access
            .iter()
            .chain(&dst_access)
            .any(|a| !(a.latency_ms.is_finite() && a.latency_ms >= 0.0))
        {
            return Err(invalid("access latencies must be finite and non-negative"));
        }
        if !(min_bandwidth.is_finite() && min_bandwidth >= 0.0) {
            return Err(invalid("min bandwidth must be finite and non-negative"));
        }
        if !(max_latency_ms.is_finite() && max_latency_ms > 0.0) {
            return Err(invalid("max latency must be positive"));
        }
        Ok(Request {
            id,
            src_access,
            dst_access,
            min_bandwidth,
            max_latency_ms,
        })
    }

    /// Single-IXP endpoints with zero access latency.
    pub fn between(
        id: u64,
        src: NodeId,
        dst: NodeId,
        min_bandwidth: f64,
        max_latency_ms: f64,
    ) -> Result<Self, TopologyError> {
        Request::new(
            id,
            vec![Access::new(src, 0.0)],
            vec![Access::new(dst, 0.0)],
            min_bandwidth,
            max_latency_ms,
        )
    }
}

/// An embedding candidate: access link, transit pathlets, access link.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub edge_ids: Vec<EdgeId>,
    pub total_latency_ms: f64,
    pub access_src: Access,
    pub access_dst: Access,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathViolation {
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("edges do not form a walk from the source access IXP to the destination access IXP")]
    Disconnected,
    #[error("node {0} visited twice")]
    RepeatedNode(NodeId),
    #[error("latency {actual} exceeds bound {bound}")]
    Latency { actual: f64, bound: f64 },
    #[error("edge {edge} offers {available} < {required}")]
    Bandwidth {
        edge: EdgeId,
        available: f64,
        required: f64,
    },
    #[error("access IXP {0} is not offered by the request")]
    ForeignAccess(NodeId),
    #[error("cached latency {cached} differs from recomputed {recomputed}")]
    LatencyMismatch { cached: f64, recomputed: f64 },
}

impl Path {
    /// Builds a path from edge indices; latency is accumulated in path order.
    pub fn from_indices(g: &Multigraph, access_src: Access, edges: &[usize], access_dst: Access) -> Self {
        let mut lat = 0.0 + access_src.latency_ms;
        for &e in edges {
            lat += g.edge(e).latency_ms;
        }
        lat += access_dst.latency_ms;
        Path {
            edge_ids: edges.iter().map(|&e| g.edge(e).id).collect(),
            total_latency_ms: lat,
            access_src,
            access_dst,
        }
    }

    pub fn hop_count(&self) -> usize {
        self.edge_ids.len()
    }

    /// Identity used for de-duplication.
    pub fn key(&self) -> (NodeId, &[EdgeId], NodeId) {
        (self.access_src.ixp, &self.edge_ids, self.access_dst.ixp)
    }

    /// IXPs visited, in order.
    pub fn node_sequence(&self, g: &Multigraph) -> Result<Vec<NodeId>, PathViolation> {
        let mut seq = vec![self.access_src.ixp];
        for &id in &self.edge_ids {
            let e = g.edge_by_id(id).ok_or(PathViolation::UnknownEdge(id))?;
            if e.src != *seq.last().expect("non-empty") {
                return Err(PathViolation::Disconnected);
            }
            seq.push(e.dst);
        }
        if *seq.last().expect("non-empty") != self.access_dst.ixp {
            return Err(PathViolation::Disconnected);
        }
        Ok(seq)
    }

    /// Checks every structural and QoS invariant of this path for `r`.
    pub fn validate(&self, g: &Multigraph, r: &Request, view: CapacityView) -> Result<(), PathViolation> {
        if !r.src_access.contains(&self.access_src) {
            return Err(PathViolation::ForeignAccess(self.access_src.ixp));
        }
        if !r.dst_access.contains(&self.access_dst) {
            return Err(PathViolation::ForeignAccess(self.access_dst.ixp));
        }
        let seq = self.node_sequence(g)?;
        let mut seen = HashSet::new();
        for n in &seq {
            if !seen.insert(*n) {
                return Err(PathViolation::RepeatedNode(*n));
            }
        }
        let idx = g
            .edge_indices(&self.edge_ids)
            .map_err(|_| PathViolation::Disconnected)?;
        let recomputed = Path::from_indices(g, self.access_src, &idx, self.access_dst).total_latency_ms;
        if recomputed != self.total_latency_ms {
            return Err(PathViolation::LatencyMismatch {
                cached: self.total_latency_ms,
                recomputed,
            });
        }
        if self.total_latency_ms > r.max_latency_ms {
            return Err(PathViolation::Latency {
                actual: self.total_latency_ms,
                bound: r.max_latency_ms,
            });
        }
        for &e in &idx {
            let available = g.available(e, view);
            if available < r.min_bandwidth {
                return Err(PathViolation::Bandwidth {
                    edge: g.edge(e).id,
                    available,
                    required: r.min_bandwidth,
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.edge_ids.iter().map(|e| e.to_string()).collect();
        write!(
            f,
            "{}=>[{}]=>{} ({:.3} ms)",
            self.access_src.ixp,
            ids.join(";"),
            self.access_dst.ixp,
            self.total_latency_ms
        )
    }
}

/// Membership bit per edge index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMask(Vec<bool>);

impl EdgeMask {
    pub fn all(g: &Multigraph) -> Self {
        EdgeMask(vec![true; g.edge_count()])
    }

    pub fn none(g: &Multigraph) -> Self {
        EdgeMask(vec![false; g.edge_count()])
    }

    #[inline]
    pub fn contains(&self, edge: usize) -> bool {
        self.0[edge]
    }

    pub fn insert(&mut self, edge: usize) {
        self.0[edge] = true;
    }

    pub fn remove(&mut self, edge: usize) {
        self.0[edge] = false;
    }

    pub fn len(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn ids(&self, g: &Multigraph) -> Vec<EdgeId> {
        let mut ids: Vec<EdgeId> = self.indices().map(|i| g.edge(i).id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn is_subset(&self, other: &EdgeMask) -> bool {
        self.0.iter().zip(&other.0).all(|(&a, &b)| !a || b)
    }
}

/// E¹: edges with enough bandwidth that are not by themselves too slow.
pub fn prune_by_request(g: &Multigraph, r: &Request) -> EdgeMask {
    prune_with_view(g, r, CapacityView::Residual)
}

pub fn prune_with_view(g: &Multigraph, r: &Request, view: CapacityView) -> EdgeMask {
    EdgeMask(
        (0..g.edge_count())
            .map(|e| g.available(e, view) >= r.min_bandwidth && g.edge(e).latency_ms <= r.max_latency_ms)
            .collect(),
    )
}

/// Simple-graph projection keeping one min-latency edge per ordered node pair.
#[derive(Debug, Clone)]
pub struct CollapsedGraph {
    /// `(dst index, representative edge index)` per source node.
    out: Vec<Vec<(usize, usize)>>,
    /// `(src index, representative edge index)` per destination node.
    inc: Vec<Vec<(usize, usize)>>,
}

impl CollapsedGraph {
    pub fn out(&self, u: usize) -> &[(usize, usize)] {
        &self.out[u]
    }

    pub fn incoming(&self, v: usize) -> &[(usize, usize)] {
        &self.inc[v]
    }

    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    pub fn representative(&self, u: usize, v: usize) -> Option<usize> {
        self.out[u]
            .binary_search_by(|&(d, _)| d.cmp(&v))
            .ok()
            .map(|i| self.out[u][i].1)
    }

    pub fn representatives(&self, g: &Multigraph) -> EdgeMask {
        let mut mask = EdgeMask::none(g);
        for list in &self.out {
            for &(_, e) in list {
                mask.insert(e);
            }
        }
        mask
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }
}

pub fn collapse_min_latency(g: &Multigraph, edge_set: &EdgeMask) -> CollapsedGraph {
    let n = g.node_count();
    let mut out = vec![Vec::new(); n];
    let mut inc = vec![Vec::new(); n];
    for (u, list) in out.iter_mut().enumerate() {
        let mut last_dst = usize::MAX;
        for &e in g.out_edges(u) {
            if !edge_set.contains(e) {
                continue;
            }
            let v = g.dst_index(e);
            if v != last_dst {
                // adjacency order makes the first hit of each run the argmin
                list.push((v, e));
                last_dst = v;
            }
        }
    }
    for (u, list) in out.iter().enumerate() {
        for &(v, e) in list {
            inc[v].push((u, e));
        }
    }
    CollapsedGraph { out, inc }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    SuperSource,
    SuperSink,
    Ixp(NodeId),
}

/// Access link between a super terminal and an IXP; never capacity limited.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualEdge {
    pub from: Endpoint,
    pub to: Endpoint,
    pub latency_ms: f64,
    pub capacity: Capacity,
}

/// Request-specific extension of the IXP graph with a super source and sink.
/// Node indices `0..n` are IXPs; `n` is the super source and `n + 1` the sink.
#[derive(Debug, Clone)]
pub struct AugmentedGraph {
    pub super_source: usize,
    pub super_sink: usize,
    /// `(ixp index, access latency)` for every usable source access IXP.
    pub source_links: Vec<(usize, f64)>,
    /// Access latency towards the sink, per IXP index.
    pub sink_latency: Vec<Option<f64>>,
    pub virtual_edges: Vec<VirtualEdge>,
}

impl AugmentedGraph {
    pub fn sink_links(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.sink_latency
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|l| (i, l)))
    }
}

/// Attaches the request's endpoints. Access IXPs absent from `g` are ignored;
/// a repeated access IXP keeps its smallest access latency.
pub fn attach_virtual_endpoints(g: &Multigraph, r: &Request) -> AugmentedGraph {
    let n = g.node_count();
    let mut src_best: Vec<Option<f64>> = vec![None; n];
    for a in &r.src_access {
        if let Some(i) = g.node_index(a.ixp) {
            let slot = &mut src_best[i];
            *slot = Some(slot.map_or(a.latency_ms, |l: f64| l.min(a.latency_ms)));
        }
    }
    let mut sink_latency: Vec<Option<f64>> = vec![None; n];
    for a in &r.dst_access {
        if let Some(i) = g.node_index(a.ixp) {
            let slot = &mut sink_latency[i];
            *slot = Some(slot.map_or(a.latency_ms, |l: f64| l.min(a.latency_ms)));
        }
    }
    let source_links: Vec<(usize, f64)> = src_best
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|l| (i, l)))
        .collect();
    let mut virtual_edges = Vec::new();
    for &(i, l) in &source_links {
        virtual_edges.push(VirtualEdge {
            from: Endpoint::SuperSource,
            to: Endpoint::Ixp(g.node(i).id),
            latency_ms: l,
            capacity: Capacity::Unbounded,
        });
    }
    for (i, l) in sink_latency.iter().enumerate() {
        if let Some(l) = *l {
            virtual_edges.push(VirtualEdge {
                from: Endpoint::Ixp(g.node(i).id),
                to: Endpoint::SuperSink,
                latency_ms: l,
                capacity: Capacity::Unbounded,
            });
        }
    }
    AugmentedGraph {
        super_source: n,
        super_sink: n + 1,
        source_links,
        sink_latency,
        virtual_edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(id: EdgeId, s: NodeId, d: NodeId, bw: f64, lat: f64) -> PathletEdge {
        PathletEdge::new(id, s, d, 64500 + id, bw, lat)
    }

    fn nodes(n: u32) -> Vec<IxpNode> {
        (0..n).map(|i| IxpNode::new(i, format!("ixp{i}"))).collect()
    }

    #[test]
    fn minimal_graph() {
        let g = Multigraph::build(nodes(2), vec![edge(7, 0, 1, 1.0, 5.0)]).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.out_edges(0), &[0]);
        assert_eq!(g.in_edges(1), &[0]);
        assert_eq!(g.edge(0).residual(), 1.0);
    }

    #[test]
    fn empty_graph_is_valid() {
        let g = Multigraph::build(vec![], vec![]).unwrap();
        assert_eq!(g.node_count(), 0);
        assert_eq!(g.edge_count(), 0);
        assert!(g.is_weakly_connected());
    }

    #[test]
    fn parallel_edges_preserved() {
        let input = vec![edge(1, 0, 1, 1.0, 3.0), edge(2, 0, 1, 1.0, 4.0), edge(3, 1, 2, 1.0, 1.0)];
        let expected = input.iter().filter(|e| e.src == 0 && e.dst == 1).count();
        let g = Multigraph::build(nodes(3), input).unwrap();
        assert_eq!(g.edges_between(0, 1).len(), expected);
        assert_eq!(g.edges_between(1, 2).len(), 1);
        assert!(g.edges_between(1, 0).is_empty());
    }

    #[test]
    fn dangling_endpoint_names_edge() {
        let err = Multigraph::build(nodes(2), vec![edge(9, 0, 5, 1.0, 1.0)]).unwrap_err();
        assert_eq!(err, TopologyError::DanglingEndpoint { edge: 9, node: 5 });
        assert!(err.to_string().contains("edge 9"));
    }

    #[test]
    fn rejects_self_loops_and_duplicates() {
        assert_eq!(
            Multigraph::build(nodes(2), vec![edge(1, 1, 1, 1.0, 1.0)]).unwrap_err(),
            TopologyError::SelfLoop(1)
        );
        assert_eq!(
            Multigraph::build(nodes(2), vec![edge(1, 0, 1, 1.0, 1.0), edge(1, 1, 0, 1.0, 1.0)]).unwrap_err(),
            TopologyError::DuplicateEdge(1)
        );
        let mut ns = nodes(2);
        ns.push(IxpNode::new(0, "again"));
        assert_eq!(Multigraph::build(ns, vec![]).unwrap_err(), TopologyError::DuplicateNode(0));
    }

    #[test]
    fn prune_noop_and_exhausted() {
        let g = Multigraph::build(nodes(3), vec![edge(1, 0, 1, 2.0, 5.0), edge(2, 1, 2, 3.0, 7.0)]).unwrap();
        let r = Request::between(0, 0, 2, 1.0, 100.0).unwrap();
        assert_eq!(prune_by_request(&g, &r).len(), 2);

        let mut g = Multigraph::build(nodes(2), vec![edge(1, 0, 1, 1.0, 5.0)]).unwrap();
        g.reserve(&[0], 1.0).unwrap();
        let r = Request::between(0, 0, 1, 1.0, 100.0).unwrap();
        assert!(prune_by_request(&g, &r).is_empty());
        assert_eq!(prune_with_view(&g, &r, CapacityView::Full).len(), 1);
    }

    #[test]
    fn prune_matches_per_edge_predicate() {
        let raw = [(1.0, 5.0), (0.5, 1.0), (2.0, 40.0), (1.0, 30.0), (3.0, 30.5)];
        let es: Vec<PathletEdge> = raw
            .iter()
            .enumerate()
            .map(|(i, &(bw, lat))| edge(i as u32, (i % 3) as u32, ((i + 1) % 3) as u32, bw, lat))
            .collect();
        let g = Multigraph::build(nodes(3), es).unwrap();
        let r = Request::between(0, 0, 2, 1.0, 30.0).unwrap();
        let mask = prune_by_request(&g, &r);
        let expected: Vec<EdgeId> = raw
            .iter()
            .enumerate()
            .filter(|(_, &(bw, lat))| bw >= 1.0 && lat <= 30.0)
            .map(|(i, _)| i as u32)
            .collect();
        assert_eq!(mask.ids(&g), expected);
    }

    #[test]
    fn collapse_keeps_min_latency_with_id_tiebreak() {
        let g = Multigraph::build(
            nodes(2),
            vec![edge(4, 0, 1, 1.0, 7.0), edge(5, 0, 1, 1.0, 3.0), edge(6, 0, 1, 1.0, 5.0), edge(2, 0, 1, 1.0, 3.0)],
        )
        .unwrap();
        let c = collapse_min_latency(&g, &EdgeMask::all(&g));
        let rep = c.representative(0, 1).unwrap();
        assert_eq!(g.edge(rep).latency_ms, 3.0);
        assert_eq!(g.edge(rep).id, 2);
        assert_eq!(c.edge_count(), 1);
    }

    #[test]
    fn collapse_singleton() {
        let g = Multigraph::build(nodes(2), vec![edge(1, 0, 1, 1.0, 9.0)]).unwrap();
        let c = collapse_min_latency(&g, &EdgeMask::all(&g));
        assert_eq!(c.representative(0, 1), Some(0));
        assert_eq!(c.representative(1, 0), None);
    }

    #[test]
    fn virtual_endpoint_counts() {
        let g = Multigraph::build(nodes(5), vec![]).unwrap();
        let r = Request::between(0, 0, 1, 1.0, 10.0).unwrap();
        assert_eq!(attach_virtual_endpoints(&g, &r).virtual_edges.len(), 2);
        let r = Request::new(
            1,
            vec![Access::new(0, 1.0), Access::new(1, 2.0), Access::new(2, 3.0)],
            vec![Access::new(3, 1.0), Access::new(4, 1.0)],
            1.0,
            10.0,
        )
        .unwrap();
        let aug = attach_virtual_endpoints(&g, &r);
        assert_eq!(aug.virtual_edges.len(), 5);
        assert!(aug.virtual_edges.iter().all(|v| v.capacity == Capacity::Unbounded));
        assert_eq!(aug.super_source, 5);
        assert_eq!(aug.super_sink, 6);
    }

    #[test]
    fn augmentation_leaves_utilization_totals_alone() {
        let g = Multigraph::build(nodes(3), vec![edge(1, 0, 1, 2.0, 1.0), edge(2, 1, 2, 4.0, 1.0)]).unwrap();
        let before = (g.total_capacity(), g.total_used());
        let r = Request::between(0, 0, 2, 1.0, 10.0).unwrap();
        let _aug = attach_virtual_endpoints(&g, &r);
        assert_eq!(before, (g.total_capacity(), g.total_used()));
    }

    #[test]
    fn reserve_is_all_or_nothing() {
        let mut g = Multigraph::build(nodes(3), vec![edge(1, 0, 1, 1.0, 1.0), edge(2, 1, 2, 0.5, 1.0)]).unwrap();
        assert!(g.reserve(&[0, 1], 1.0).is_err());
        assert_eq!(g.edge(0).residual(), 1.0);
        g.reserve(&[0], 1.0).unwrap();
        assert_eq!(g.edge(0).residual(), 0.0);
        g.release(&[0], 5.0);
        assert_eq!(g.edge(0).residual(), 1.0);
    }

    #[test]
    fn largest_component_extraction() {
        let g = Multigraph::build(
            nodes(5),
            vec![edge(1, 0, 1, 1.0, 1.0), edge(2, 1, 2, 1.0, 1.0), edge(3, 3, 4, 1.0, 1.0)],
        )
        .unwrap();
        let lc = g.largest_component();
        assert_eq!(lc.node_count(), 3);
        assert_eq!(lc.edge_count(), 2);
        assert!(lc.is_weakly_connected());
    }

    #[test]
    fn request_validation() {
        assert!(Request::new(1, vec![], vec![Access::new(0, 0.0)], 1.0, 10.0).is_err());
        assert!(Request::new(1, vec![Access::new(0, -1.0)], vec![Access::new(0, 0.0)], 1.0, 10.0).is_err());
        assert!(Request::new(1, vec![Access::new(0, 0.0)], vec![Access::new(0, 0.0)], 1.0, 0.0).is_err());
    }

    #[test]
    fn path_validation_catches_violations() {
        let g = Multigraph::build(nodes(3), vec![edge(1, 0, 1, 1.0, 5.0), edge(2, 1, 2, 1.0, 5.0)]).unwrap();
        let r = Request::between(0, 0, 2, 1.0, 10.0).unwrap();
        let p = Path::from_indices(&g, r.src_access[0], &[0, 1], r.dst_access[0]);
        assert_eq!(p.total_latency_ms, 10.0);
        assert_eq!(p.hop_count(), 2);
        p.validate(&g, &r, CapacityView::Residual).unwrap();
        let tight = Request::between(0, 0, 2, 1.0, 9.0).unwrap();
        assert!(matches!(
            p.validate(&g, &tight, CapacityView::Residual),
            Err(PathViolation::Latency { .. })
        ));
        let broken = Path::from_indices(&g, r.src_access[0], &[1], r.dst_access[0]);
        assert_eq!(broken.validate(&g, &r, CapacityView::Residual), Err(PathViolation::Disconnected));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_graph() -> impl Strategy<Value = Multigraph> {
            (2u32..7).prop_flat_map(|n| {
                proptest::collection::vec((0..n, 0..n, 0u32..4, 1u32..50), 0..25).prop_map(move |raw| {
                    let es = raw
                        .into_iter()
                        .filter(|(s, d, _, _)| s != d)
                        .enumerate()
                        .map(|(i, (s, d, bw, lat))| edge(i as u32, s, d, bw as f64, lat as f64))
                        .collect();
                    Multigraph::build(nodes(n), es).unwrap()
                })
            })
        }

        proptest! {
            #[test]
            fn collapse_is_idempotent(g in arb_graph()) {
                let first = collapse_min_latency(&g, &EdgeMask::all(&g));
                let reps = first.representatives(&g);
                let second = collapse_min_latency(&g, &reps);
                prop_assert_eq!(second.representatives(&g), reps);
            }

            #[test]
            fn collapse_matches_per_pair_scan(g in arb_graph()) {
                let c = collapse_min_latency(&g, &EdgeMask::all(&g));
                for u in 0..g.node_count() {
                    for v in 0..g.node_count() {
                        let best = g.edges().iter().enumerate()
                            .filter(|(_, e)| g.node_index(e.src) == Some(u) && g.node_index(e.dst) == Some(v))
                            .min_by(|a, b| a.1.latency_ms.total_cmp(&b.1.latency_ms).then(a.1.id.cmp(&b.1.id)))
                            .map(|(i, _)| i);
                        prop_assert_eq!(c.representative(u, v), best);
                    }
                }
            }

            #[test]
            fn prune_subset_and_monotone(g in arb_graph(), bw in 0u32..4, lat in 1u32..60, dbw in 0u32..3, dlat in 0u32..20) {
                let strict = Request::between(0, 0, 1, bw as f64, lat as f64).unwrap();
                let loose = Request::between(0, 0, 1, bw.saturating_sub(dbw) as f64, (lat + dlat) as f64).unwrap();
                let a = prune_by_request(&g, &strict);
                let b = prune_by_request(&g, &loose);
                prop_assert!(a.is_subset(&EdgeMask::all(&g)));
                prop_assert!(a.is_subset(&b));
            }
        }
    }
}
