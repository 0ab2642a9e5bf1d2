use std::collections::HashSet;

use super::heurpaths::build_packing;
use super::{SolveStatus, SolverBudget, SolverError, SolverSolution};
use crate::sampling::RequestContext;
use crate::topology::{CapacityView, Multigraph, Path, Request};

/// All IXP-simple paths meeting both bounds of `r` under `view`, except
/// those that extend a shorter feasible path (their edge sets are
/// supersets). The flag is set when `cap` cut the enumeration short.
pub fn enumerate_feasible_paths(g: &Multigraph, r: &Request, view: CapacityView, cap: usize) -> (Vec<Path>, bool) {
    let ctx = RequestContext::new(g, r, view);
    let mut out = Vec::new();
    if !ctx.is_feasible() {
        return (out, false);
    }
    let mut walk = Walk {
        ctx: &ctx,
        on_path: vec![false; g.node_count()],
        edges: Vec::new(),
        out: &mut out,
        cap,
        truncated: false,
    };
    for &(s, l) in &ctx.endpoints.source_links {
        if l + ctx.dist_to_sink[s] > r.max_latency_ms {
            continue;
        }
        walk.on_path[s] = true;
        walk.extend(s, s, l, l);
        walk.on_path[s] = false;
        if walk.truncated {
            break;
        }
    }
    let truncated = walk.truncated;
    (out, truncated)
}

struct Walk<'a, 'c> {
    ctx: &'a RequestContext<'c>,
    on_path: Vec<bool>,
    edges: Vec<usize>,
    out: &'a mut Vec<Path>,
    cap: usize,
    truncated: bool,
}

impl Walk<'_, '_> {
    fn extend(&mut self, start: usize, u: usize, src_lat: f64, d: f64) {
        let g = self.ctx.graph;
        let bound = self.ctx.request.max_latency_ms;
        if let Some(l) = self.ctx.endpoints.sink_latency[u] {
            if d + l <= bound {
                let p = Path::from_indices(
                    g,
                    self.ctx.source_access(start, src_lat),
                    &self.edges,
                    self.ctx.sink_access(u).expect("sink link"),
                );
                if p.total_latency_ms <= bound {
                    if self.out.len() == self.cap {
                        self.truncated = true;
                        return;
                    }
                    self.out.push(p);
                    return;
                }
            }
        }
        for &e in g.out_edges(u) {
            if self.truncated {
                return;
            }
            let v = g.dst_index(e);
            if self.on_path[v] || !self.ctx.mask.contains(e) {
                continue;
            }
            let dv = d + g.edge(e).latency_ms;
            if dv + self.ctx.dist_to_sink[v] > bound {
                continue;
            }
            self.on_path[v] = true;
            self.edges.push(e);
            self.extend(start, v, src_lat, dv);
            self.edges.pop();
            self.on_path[v] = false;
        }
    }
}

/// Exact QMRP on the current residual capacities: every feasible path of
/// every request is a candidate and the packing is solved to optimality
/// within `budget`.
pub fn solve_optflow(
    g: &Multigraph,
    requests: &[Request],
    forced: &HashSet<u64>,
    budget: &SolverBudget,
) -> Result<SolverSolution, SolverError> {
    let mut truncated = false;
    let candidates: Vec<Vec<Path>> = requests
        .iter()
        .map(|r| {
            let (p, t) = enumerate_feasible_paths(g, r, CapacityView::Residual, budget.max_paths_per_request);
            truncated |= t;
            p
        })
        .collect();
    let capacities: Vec<f64> = g.edges().iter().map(|e| e.residual()).collect();
    let mut sol = build_packing(g, requests, &candidates, &capacities, forced)?.solve(budget.max_nodes);
    if truncated {
        sol.status = match sol.status {
            SolveStatus::Optimal => SolveStatus::Feasible,
            SolveStatus::Infeasible => SolveStatus::Unknown,
            s => s,
        };
    }
    Ok(sol)
}
