use std::collections::HashSet;
use std::time::Instant;

use log::debug;
use rand::SeedableRng;

use super::{solve_heurpaths, SolveStatus, SolverBudget};
use crate::engine::{Decision, Engine, EngineConfig, RunMetrics};
use crate::sampling::{RequestContext, SimRng};
use crate::topology::{CapacityView, Path, Request};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridConfig {
    /// Candidate paths sampled per request during reconfiguration.
    pub k: usize,
    pub budget: SolverBudget,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            k: 20,
            budget: SolverBudget::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReconfigOutcome {
    /// The request was admitted; `moved` earlier requests changed path.
    Admitted { moved: usize, reservation: usize },
    /// No feasible path even with every reservation released.
    InfeasibleOnEmpty,
    /// The conflicting requests cannot be re-embedded together with it.
    NotEmbeddable(SolveStatus),
}

fn sample_full(engine: &Engine, r: &Request, k: usize, rng: &mut SimRng) -> Vec<Path> {
    let ctx = RequestContext::new(engine.graph(), r, CapacityView::Full);
    if !ctx.is_feasible() {
        return Vec::new();
    }
    engine.config().sampler.sample(&ctx, k, rng)
}

/// Tries to admit the rejected request `r` by re-routing the accepted
/// requests its candidate paths collide with. State is untouched unless
/// the request is admitted.
pub fn reconfigure_and_embed(engine: &mut Engine, r: &Request, cfg: &HybridConfig, rng: &mut SimRng) -> ReconfigOutcome {
    let own = sample_full(engine, r, cfg.k, rng);
    if own.is_empty() {
        return ReconfigOutcome::InfeasibleOnEmpty;
    }
    let g = engine.graph();
    let touched: HashSet<u32> = own.iter().flat_map(|p| p.edge_ids.iter().copied()).collect();
    let conflicts: Vec<usize> = engine
        .reservations()
        .iter()
        .enumerate()
        .filter(|(_, res)| res.edge_ids().iter().any(|e| touched.contains(e)))
        .map(|(i, _)| i)
        .collect();

    let mut capacities: Vec<f64> = g.edges().iter().map(|e| e.residual()).collect();
    let mut requests = Vec::with_capacity(conflicts.len() + 1);
    let mut candidates = Vec::with_capacity(conflicts.len() + 1);
    for &i in &conflicts {
        let res = &engine.reservations()[i];
        for &e in &res.edges {
            capacities[e] += res.reserved_bandwidth;
        }
        let mut c = vec![res.path.clone()];
        for p in sample_full(engine, &res.request, cfg.k, rng) {
            if p.key() != res.path.key() {
                c.push(p);
            }
        }
        requests.push(res.request.clone());
        candidates.push(c);
    }
    requests.push(r.clone());
    candidates.push(own);

    let forced: HashSet<u64> = requests.iter().map(|q| q.id).collect();
    let sol = match solve_heurpaths(g, &requests, &candidates, &capacities, &forced, &cfg.budget) {
        Ok(s) => s,
        Err(e) => {
            debug!("request {}: reconfiguration input rejected: {e}", r.id);
            return ReconfigOutcome::NotEmbeddable(SolveStatus::Unknown);
        }
    };
    if !sol.status.has_solution() {
        return ReconfigOutcome::NotEmbeddable(sol.status);
    }
    let mut paths = sol.paths.into_iter().map(|p| p.expect("all requests forced"));
    let moves: Vec<(usize, Path)> = conflicts
        .iter()
        .zip(paths.by_ref())
        .filter(|(&i, p)| engine.reservations()[i].path != *p)
        .map(|(&i, p)| (i, p))
        .collect();
    let new_path = paths.next().expect("rejected request is last");
    let moved = moves.len();
    match engine.swap(&moves, (r, new_path)) {
        Ok(()) => ReconfigOutcome::Admitted {
            moved,
            reservation: engine.reservations().len() - 1,
        },
        Err(e) => {
            debug!("request {}: swap failed: {e}", r.id);
            ReconfigOutcome::NotEmbeddable(SolveStatus::Unknown)
        }
    }
}

/// Online sample-select with reconfiguration as the fallback for every
/// rejection. Reconfiguration draws from its own RNG stream so the online
/// decisions up to the first rejection match [`crate::engine::run_online`].
pub fn run_hybrid(g: &crate::Multigraph, requests: &[Request], config: &EngineConfig, hybrid: &HybridConfig) -> RunMetrics {
    let mut engine = Engine::new(g.clone(), config.clone());
    let mut rng = SimRng::seed_from_u64(config.seed);
    rng.set_stream(1);
    for r in requests {
        let start = Instant::now();
        let mut d = engine.try_embed(r);
        if !d.is_accepted() {
            if let ReconfigOutcome::Admitted { reservation, moved } = reconfigure_and_embed(&mut engine, r, hybrid, &mut rng) {
                debug!("request {} admitted after moving {moved}", r.id);
                d = Decision::Accepted(reservation);
            }
        }
        engine.record(r, &d, start);
    }
    engine.metrics()
}
