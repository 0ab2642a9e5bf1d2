//! Exact offline embedding: path-based packing solved by branch and bound,
//! full path enumeration on top of it, and online/offline reconfiguration.

mod heurpaths;
mod optflow;
mod reconfig;

pub use heurpaths::solve_heurpaths;
pub use optflow::{enumerate_feasible_paths, solve_optflow};
pub use reconfig::{reconfigure_and_embed, run_hybrid, HybridConfig, ReconfigOutcome};

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::topology::{EdgeId, Path};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    /// Search completed; the objective is optimal.
    Optimal,
    /// Budget exhausted with an incumbent that accepts every forced request.
    Feasible,
    /// Search completed and no assignment accepts every forced request.
    Infeasible,
    /// Budget exhausted before any forced-feasible assignment was found.
    Unknown,
}

impl SolveStatus {
    pub fn is_optimal(self) -> bool {
        self == SolveStatus::Optimal
    }

    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverBudget {
    /// Branch-and-bound nodes before giving up on proving optimality.
    pub max_nodes: u64,
    /// Enumeration cap per request; hitting it voids the optimality claim.
    pub max_paths_per_request: usize,
}

impl Default for SolverBudget {
    fn default() -> Self {
        SolverBudget {
            max_nodes: 2_000_000,
            max_paths_per_request: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSolution {
    pub status: SolveStatus,
    pub objective: usize,
    /// Chosen path per request, aligned with the input order.
    pub paths: Vec<Option<Path>>,
    pub nodes_explored: u64,
}

impl SolverSolution {
    pub fn accepted_ids<'a>(&'a self, requests: &'a [crate::Request]) -> impl Iterator<Item = u64> + 'a {
        requests
            .iter()
            .zip(&self.paths)
            .filter(|(_, p)| p.is_some())
            .map(|(r, _)| r.id)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("{what}: expected {expected} entries, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("candidate path uses unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("forced request {0} is not in the request set")]
    UnknownForced(u64),
}

/// Pick at most one candidate per item so that no edge's capacity is
/// exceeded, maximizing the number of items served; forced items must be
/// served.
#[derive(Debug, Clone)]
pub(crate) struct Packing {
    pub demand: Vec<f64>,
    /// Per item, per candidate: distinct edge indices.
    pub candidates: Vec<Vec<Vec<usize>>>,
    pub forced: Vec<bool>,
    pub capacity: Vec<f64>,
    /// Partitions of items into cuts; see [`Cut`].
    pub cuts: Vec<Vec<Cut>>,
}

/// Every candidate of every member uses at least one of `edges`, so the
/// members served together demand no more than the cut's free capacity.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Cut {
    pub edges: Vec<usize>,
    pub members: Vec<usize>,
}

/// Groups items whose hitting sets share an edge. `hits[i]` is a set of
/// edges met by every candidate of item `i`, or `None` if there is none.
pub(crate) fn cut_partition(hits: &[Option<Vec<usize>>]) -> Vec<Cut> {
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut x = x;
        while parent[x] != r {
            (x, parent[x]) = (parent[x], r);
        }
        r
    }
    let mut parent: Vec<usize> = (0..hits.len()).collect();
    let mut owner: HashMap<usize, usize> = HashMap::new();
    for (i, h) in hits.iter().enumerate() {
        for &e in h.iter().flatten() {
            let j = *owner.entry(e).or_insert(i);
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            parent[a] = b;
        }
    }
    let mut groups: BTreeMap<usize, Cut> = BTreeMap::new();
    for (i, h) in hits.iter().enumerate() {
        let Some(h) = h else { continue };
        let root = find(&mut parent, i);
        let cut = groups.entry(root).or_insert_with(|| Cut {
            edges: Vec::new(),
            members: Vec::new(),
        });
        cut.members.push(i);
        cut.edges.extend(h);
    }
    groups
        .into_values()
        .map(|mut c| {
            c.edges.sort_unstable();
            c.edges.dedup();
            c
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PackResult {
    pub status: SolveStatus,
    pub choice: Vec<Option<usize>>,
    pub nodes: u64,
}

struct Search<'a> {
    p: &'a Packing,
    order: Vec<usize>,
    /// Candidate indices per item, fewest edges first.
    tries: Vec<Vec<usize>>,
    cap: Vec<f64>,
    choice: Vec<Option<usize>>,
    served: usize,
    best: Option<(usize, Vec<Option<usize>>)>,
    nodes: u64,
    max_nodes: u64,
    aborted: bool,
    scratch: Vec<f64>,
    /// Position of each item in `order`.
    pos: Vec<usize>,
    servable: Vec<bool>,
}

impl Packing {
    pub fn solve(&self, max_nodes: u64) -> PackResult {
        let n = self.demand.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (!self.forced[i], self.candidates[i].len(), i));
        let tries = self
            .candidates
            .iter()
            .map(|c| {
                let mut t: Vec<usize> = (0..c.len()).collect();
                t.sort_by_key(|&j| c[j].len());
                t
            })
            .collect();
        let mut pos = vec![0; n];
        for (k, &i) in order.iter().enumerate() {
            pos[i] = k;
        }
        let mut s = Search {
            p: self,
            pos,
            servable: vec![false; n],
            order,
            tries,
            cap: self.capacity.clone(),
            choice: vec![None; n],
            served: 0,
            best: None,
            nodes: 0,
            max_nodes,
            aborted: false,
            scratch: Vec::new(),
        };
        s.dfs(0);
        let status = match (&s.best, s.aborted) {
            (Some(_), false) => SolveStatus::Optimal,
            (Some(_), true) => SolveStatus::Feasible,
            (None, false) => SolveStatus::Infeasible,
            (None, true) => SolveStatus::Unknown,
        };
        PackResult {
            status,
            choice: s.best.map(|b| b.1).unwrap_or_else(|| vec![None; n]),
            nodes: s.nodes,
        }
    }
}

impl Search<'_> {
    fn fits(&self, item: usize, cand: usize) -> bool {
        let d = self.p.demand[item];
        self.p.candidates[item][cand].iter().all(|&e| self.cap[e] + EPS >= d)
    }

    /// Upper bound on items still servable from depth `depth`, or `None`
    /// when a forced item can no longer be served.
    fn bound(&mut self, depth: usize) -> Option<usize> {
        let mut costs = std::mem::take(&mut self.scratch);
        costs.clear();
        for &item in &self.order[depth..] {
            let d = self.p.demand[item];
            let cheapest = self.tries[item]
                .iter()
                .find(|&&c| self.fits(item, c))
                .map(|&c| d * self.p.candidates[item][c].len() as f64);
            self.servable[item] = cheapest.is_some();
            match cheapest {
                Some(c) => costs.push(c),
                None if self.p.forced[item] => {
                    self.scratch = costs;
                    return None;
                }
                None => {}
            }
        }
        // aggregated capacity relaxation
        costs.sort_by(f64::total_cmp);
        let mut free: f64 = self.cap.iter().sum::<f64>() + EPS;
        let mut k = 0;
        for &c in &costs {
            if c > free {
                break;
            }
            free -= c;
            k += 1;
        }
        let open = costs.len();
        for partition in &self.p.cuts {
            let mut total = open;
            for cut in partition {
                costs.clear();
                costs.extend(
                    cut.members
                        .iter()
                        .filter(|&&i| self.pos[i] >= depth && self.servable[i])
                        .map(|&i| self.p.demand[i]),
                );
                costs.sort_by(f64::total_cmp);
                let mut free: f64 = cut.edges.iter().map(|&e| self.cap[e]).sum::<f64>() + EPS;
                let mut fit = 0;
                for &d in costs.iter() {
                    if d > free {
                        break;
                    }
                    free -= d;
                    fit += 1;
                }
                total -= costs.len() - fit;
            }
            k = k.min(total);
        }
        self.scratch = costs;
        Some(k)
    }

    fn dfs(&mut self, depth: usize) {
        if self.aborted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            self.aborted = true;
            return;
        }
        if depth == self.order.len() {
            if self.best.as_ref().is_none_or(|b| self.served > b.0) {
                self.best = Some((self.served, self.choice.clone()));
            }
            return;
        }
        let Some(rest) = self.bound(depth) else {
            return;
        };
        if let Some((b, _)) = &self.best {
            if self.served + rest <= *b {
                return;
            }
        }
        let item = self.order[depth];
        let d = self.p.demand[item];
        for t in 0..self.tries[item].len() {
            let c = self.tries[item][t];
            if !self.fits(item, c) {
                continue;
            }
            for &e in &self.p.candidates[item][c] {
                self.cap[e] -= d;
            }
            self.choice[item] = Some(c);
            self.served += 1;
            self.dfs(depth + 1);
            self.served -= 1;
            self.choice[item] = None;
            for &e in &self.p.candidates[item][c] {
                self.cap[e] += d;
            }
            if self.aborted || self.best.as_ref().is_some_and(|b| b.0 == self.order.len()) {
                return;
            }
        }
        if !self.p.forced[item] {
            self.dfs(depth + 1);
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::sampling::SimRng;

    /// Exhaustive assignment search.
    fn brute(p: &Packing) -> Option<usize> {
        fn go(p: &Packing, i: usize, cap: &mut Vec<f64>) -> Option<usize> {
            if i == p.demand.len() {
                return Some(0);
            }
            let mut best = if p.forced[i] { None } else { go(p, i + 1, cap) };
            for c in &p.candidates[i] {
                if c.iter().all(|&e| cap[e] + EPS >= p.demand[i]) {
                    c.iter().for_each(|&e| cap[e] -= p.demand[i]);
                    if let Some(v) = go(p, i + 1, cap) {
                        best = best.max(Some(v + 1));
                    }
                    c.iter().for_each(|&e| cap[e] += p.demand[i]);
                }
            }
            best
        }
        go(p, 0, &mut p.capacity.clone())
    }

    fn check(p: &Packing, r: &PackResult) {
        let mut load = vec![0.0; p.capacity.len()];
        for (i, c) in r.choice.iter().enumerate() {
            match c {
                Some(c) => p.candidates[i][*c].iter().for_each(|&e| load[e] += p.demand[i]),
                None => assert!(!p.forced[i] || !r.status.has_solution()),
            }
        }
        for (l, c) in load.iter().zip(&p.capacity) {
            assert!(*l <= c + 1e-6);
        }
    }

    pub(crate) fn random_packing(seed: u64, items: usize, cands: usize, forced: bool) -> Packing {
        let mut rng = SimRng::seed_from_u64(seed);
        let edges = rng.random_range(3..12);
        let candidates: Vec<Vec<Vec<usize>>> = (0..items)
            .map(|_| {
                (0..rng.random_range(0..=cands))
                    .map(|_| {
                        let mut c: Vec<usize> = (0..rng.random_range(1..4)).map(|_| rng.random_range(0..edges)).collect();
                        c.sort_unstable();
                        c.dedup();
                        c
                    })
                    .collect()
            })
            .collect();
        // Smallest and largest edge of each candidate: two hitting-set families.
        let hits = |pick: fn(&[usize]) -> usize| -> Vec<Option<Vec<usize>>> {
            candidates.iter().map(|c| (!c.is_empty()).then(|| c.iter().map(|x| pick(x)).collect())).collect()
        };
        let cuts = vec![cut_partition(&hits(|c| c[0])), cut_partition(&hits(|c| c[c.len() - 1]))];
        Packing {
            demand: (0..items).map(|_| rng.random_range(1..3) as f64).collect(),
            candidates,
            forced: (0..items).map(|_| forced && rng.random_bool(0.2)).collect(),
            capacity: (0..edges).map(|_| rng.random_range(1..4) as f64).collect(),
            cuts,
        }
    }

    #[test]
    fn no_items_is_optimal_zero() {
        let p = Packing {
            demand: vec![],
            candidates: vec![],
            forced: vec![],
            capacity: vec![1.0],
            cuts: vec![],
        };
        let r = p.solve(100);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.choice.is_empty());
    }

    #[test]
    fn forced_without_candidates_is_infeasible() {
        let p = Packing {
            demand: vec![1.0],
            candidates: vec![vec![]],
            forced: vec![true],
            capacity: vec![1.0],
            cuts: vec![],
        };
        assert_eq!(p.solve(100).status, SolveStatus::Infeasible);
    }

    #[test]
    fn cut_partition_merges_items_sharing_edges() {
        let cuts = cut_partition(&[Some(vec![0, 1]), None, Some(vec![1, 2]), Some(vec![5]), Some(vec![2])]);
        assert_eq!(
            cuts,
            vec![
                Cut {
                    edges: vec![0, 1, 2],
                    members: vec![0, 2, 4],
                },
                Cut {
                    edges: vec![5],
                    members: vec![3],
                },
            ]
        );
    }

    #[test]
    fn cut_bound_closes_a_shared_bottleneck() {
        // Twelve items whose every candidate starts on one of two unit edges,
        // each candidate then using its own private edges.
        let n = 12;
        let mut next = 2;
        let candidates: Vec<Vec<Vec<usize>>> = (0..n)
            .map(|i| {
                (0..4)
                    .map(|j| {
                        let c = vec![(i + j) % 2, next, next + 1];
                        next += 2;
                        c
                    })
                    .collect()
            })
            .collect();
        let hits: Vec<Option<Vec<usize>>> = candidates.iter().map(|c| Some(c.iter().map(|x| x[0]).collect())).collect();
        let mut p = Packing {
            demand: vec![1.0; n],
            candidates,
            forced: vec![false; n],
            capacity: vec![1.0; next],
            cuts: vec![],
        };
        let loose = p.solve(1_000_000);
        p.cuts = vec![cut_partition(&hits)];
        let r = p.solve(1_000_000);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(loose.status, SolveStatus::Optimal);
        assert_eq!(r.choice.iter().flatten().count(), 2);
        assert_eq!(loose.choice.iter().flatten().count(), 2);
        assert!(r.nodes * 10 < loose.nodes, "{} vs {}", r.nodes, loose.nodes);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let p = random_packing(1, 10, 5, false);
        let r = p.solve(3);
        assert!(matches!(r.status, SolveStatus::Feasible | SolveStatus::Unknown));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn matches_exhaustive_search(seed in any::<u64>(), forced in any::<bool>()) {
            let p = random_packing(seed, 8, 4, forced);
            let r = p.solve(u64::MAX);
            check(&p, &r);
            match brute(&p) {
                Some(v) => {
                    prop_assert_eq!(r.status, SolveStatus::Optimal);
                    prop_assert_eq!(r.choice.iter().flatten().count(), v);
                }
                None => prop_assert_eq!(r.status, SolveStatus::Infeasible),
            }
        }
    }
}
