//! Integral max-flow (Dinic). On unit-capacity networks this runs in
//! O(E·min(√E, V^(2/3))).

use std::collections::VecDeque;
use std::sync::OnceLock;

/// Flow network with integer capacities. Arcs are appended freely; the
/// first query freezes them into a compressed adjacency that later queries
/// share, so queries take `&self` and can run in parallel.
#[derive(Debug, Clone, Default)]
pub struct FlowNetwork {
    nodes: usize,
    arcs: Vec<(u32, u32, u64)>,
    csr: OnceLock<Csr>,
}

#[derive(Debug, Clone)]
struct Csr {
    start: Vec<usize>,
    to: Vec<u32>,
    rev: Vec<u32>,
    cap: Vec<u64>,
}

pub const INFINITE: u64 = u64::MAX / 4;

impl Csr {
    fn build(nodes: usize, arcs: &[(u32, u32, u64)]) -> Csr {
        let mut start = vec![0usize; nodes + 1];
        for &(a, b, _) in arcs {
            start[a as usize + 1] += 1;
            start[b as usize + 1] += 1;
        }
        for i in 0..nodes {
            start[i + 1] += start[i];
        }
        let m = start[nodes];
        let mut fill = start.clone();
        let (mut to, mut rev, mut cap) = (vec![0u32; m], vec![0u32; m], vec![0u64; m]);
        for &(a, b, c) in arcs {
            let (i, j) = (fill[a as usize], fill[b as usize] + usize::from(a == b));
            fill[a as usize] += 1;
            fill[b as usize] += 1;
            (to[i], rev[i], cap[i]) = (b, j as u32, c);
            (to[j], rev[j], cap[j]) = (a, i as u32, 0);
        }
        Csr { start, to, rev, cap }
    }
}

struct Run<'a> {
    g: &'a Csr,
    cap: Vec<u64>,
    level: Vec<u32>,
    next: Vec<usize>,
    sink: Vec<bool>,
}

impl Run<'_> {
    fn levels(&mut self, s: usize) -> bool {
        self.level.fill(u32::MAX);
        self.level[s] = 0;
        let mut reached = u32::MAX;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            let l = self.level[u];
            if l >= reached {
                break;
            }
            for i in self.g.start[u]..self.g.start[u + 1] {
                let v = self.g.to[i] as usize;
                if self.cap[i] > 0 && self.level[v] == u32::MAX {
                    self.level[v] = l + 1;
                    if self.sink[v] {
                        reached = l + 1;
                    } else {
                        queue.push_back(v);
                    }
                }
            }
        }
        reached != u32::MAX
    }

    // Iterative blocking-flow DFS; recursion depth would otherwise follow path length.
    fn augment(&mut self, s: usize, stack: &mut Vec<(usize, usize)>) -> u64 {
        stack.clear();
        let mut u = s;
        loop {
            if self.sink[u] {
                let bottleneck = stack.iter().map(|&(_, i)| self.cap[i]).min().unwrap_or(INFINITE);
                for &(_, i) in stack.iter() {
                    self.cap[i] -= bottleneck;
                    self.cap[self.g.rev[i] as usize] += bottleneck;
                }
                return bottleneck;
            }
            let mut advanced = false;
            while self.next[u] < self.g.start[u + 1] {
                let i = self.next[u];
                let v = self.g.to[i] as usize;
                if self.cap[i] > 0 && self.level[v] == self.level[u] + 1 {
                    stack.push((u, i));
                    u = v;
                    advanced = true;
                    break;
                }
                self.next[u] += 1;
            }
            if !advanced {
                match stack.pop() {
                    None => return 0,
                    Some((prev, _)) => {
                        self.next[prev] += 1;
                        u = prev;
                    }
                }
            }
        }
    }
}

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        FlowNetwork {
            nodes: n,
            ..Default::default()
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn add_node(&mut self) -> usize {
        self.csr = OnceLock::new();
        self.nodes += 1;
        self.nodes - 1
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cap: u64) {
        assert!(from < self.nodes && to < self.nodes, "arc endpoint out of range");
        self.csr = OnceLock::new();
        self.arcs.push((from as u32, to as u32, cap));
    }

    /// Maximum s-t flow value.
    pub fn max_flow(&self, s: usize, t: usize) -> u64 {
        self.max_flow_to_any(s, &[t])
    }

    /// Maximum flow from `s` into the union of `sinks`.
    pub fn max_flow_to_any(&self, s: usize, sinks: &[usize]) -> u64 {
        let n = self.nodes;
        let mut sink = vec![false; n];
        for &t in sinks {
            sink[t] = true;
        }
        if sink[s] {
            return 0;
        }
        let g = self.csr.get_or_init(|| Csr::build(n, &self.arcs));
        let mut run = Run {
            g,
            cap: g.cap.clone(),
            level: vec![0; n],
            next: vec![0; n],
            sink,
        };
        let mut total = 0u64;
        let mut stack = Vec::new();
        while run.levels(s) {
            run.next.copy_from_slice(&g.start[..n]);
            loop {
                let f = run.augment(s, &mut stack);
                if f == 0 {
                    break;
                }
                total = total.saturating_add(f);
            }
        }
        total
    }
}
