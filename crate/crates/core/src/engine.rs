//! Online admission loop: sample, select, reserve, one request at a time.

use std::collections::HashSet;
use std::sync::Arc;
use std::time::Instant;

use log::{debug, warn};
use rand::SeedableRng;
use thiserror::Error;

use crate::metrics::nearest_rank;
use crate::sampling::{select_best, PathSampler, RequestContext, SimRng};
use crate::topology::{CapacityView, EdgeId, Multigraph, Path, Request, TopologyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("graph has zero total capacity")]
    ZeroCapacity,
}

/// Occupied fraction of inter-IXP capacity.
pub fn utilization(g: &Multigraph) -> Result<f64, EngineError> {
    let total = g.total_capacity();
    if total <= 0.0 {
        return Err(EngineError::ZeroCapacity);
    }
    Ok((g.total_used() / total).clamp(0.0, 1.0))
}

/// An admitted request and the bandwidth it holds on each path edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Reservation {
    pub request: Request,
    pub path: Path,
    /// Edge indices of `path` in the engine graph.
    pub edges: Vec<usize>,
    pub reserved_bandwidth: f64,
}

impl Reservation {
    pub fn request_id(&self) -> u64 {
        self.request.id
    }

    pub fn edge_ids(&self) -> &[EdgeId] {
        &self.path.edge_ids
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub accepted: usize,
    pub rejected: usize,
    /// Accepted over total; 1.0 when the stream was empty.
    pub acceptance_ratio: f64,
    /// Set when no request was offered and the ratio is the convention.
    pub empty_stream: bool,
    pub utilization: f64,
    /// Wall-clock microseconds per request, in arrival order.
    pub times_us: Vec<f64>,
}

impl RunMetrics {
    pub fn mean_time_us(&self) -> f64 {
        if self.times_us.is_empty() {
            return 0.0;
        }
        self.times_us.iter().sum::<f64>() / self.times_us.len() as f64
    }

    pub fn p99_time_us(&self) -> f64 {
        self.time_percentile(99.0)
    }

    pub fn median_time_us(&self) -> f64 {
        self.time_percentile(50.0)
    }

    fn time_percentile(&self, p: f64) -> f64 {
        if self.times_us.is_empty() {
            return 0.0;
        }
        let mut t = self.times_us.clone();
        t.sort_by(f64::total_cmp);
        nearest_rank(&t, p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    /// Index into [`Engine::reservations`].
    Accepted(usize),
    Rejected(RejectReason),
}

impl Decision {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Decision::Accepted(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RejectReason {
    NoFeasiblePath,
    Internal(String),
}

#[derive(Clone)]
pub struct EngineConfig {
    pub sampler: Arc<dyn PathSampler>,
    pub k: usize,
    pub seed: u64,
}

impl EngineConfig {
    pub fn new(sampler: Arc<dyn PathSampler>, k: usize, seed: u64) -> Self {
        EngineConfig { sampler, k, seed }
    }
}

impl std::fmt::Debug for EngineConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EngineConfig")
            .field("sampler", &self.sampler.name())
            .field("k", &self.k)
            .field("seed", &self.seed)
            .finish()
    }
}

/// Single-writer engine owning the residual state of one run.
pub struct Engine {
    graph: Multigraph,
    config: EngineConfig,
    rng: SimRng,
    reservations: Vec<Reservation>,
    accepted: usize,
    rejected: usize,
    times_us: Vec<f64>,
}

impl Engine {
    pub fn new(graph: Multigraph, config: EngineConfig) -> Self {
        let rng = SimRng::seed_from_u64(config.seed);
        Engine {
            graph,
            config,
            rng,
            reservations: Vec::new(),
            accepted: 0,
            rejected: 0,
            times_us: Vec::new(),
        }
    }

    pub fn graph(&self) -> &Multigraph {
        &self.graph
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn reservations(&self) -> &[Reservation] {
        &self.reservations
    }

    pub fn into_graph(self) -> Multigraph {
        self.graph
    }

    /// Sample, select and reserve without touching the counters.
    pub fn try_embed(&mut self, r: &Request) -> Decision {
        let path = {
            let ctx = RequestContext::new(&self.graph, r, CapacityView::Residual);
            if !ctx.is_feasible() {
                return Decision::Rejected(RejectReason::NoFeasiblePath);
            }
            let paths = self.config.sampler.sample(&ctx, self.config.k, &mut self.rng);
            if paths.is_empty() {
                return Decision::Rejected(RejectReason::NoFeasiblePath);
            }
            match select_best(&paths, &self.graph) {
                Ok(p) => p.clone(),
                Err(e) => {
                    warn!("request {}: selection failed: {e}", r.id);
                    return Decision::Rejected(RejectReason::Internal(e.to_string()));
                }
            }
        };
        match self.commit(r, path) {
            Ok(i) => Decision::Accepted(i),
            Err(e) => {
                warn!("request {}: {e}", r.id);
                Decision::Rejected(RejectReason::Internal(e))
            }
        }
    }

    /// Validates `path` against the residual graph and reserves it.
    pub(crate) fn commit(&mut self, r: &Request, path: Path) -> Result<usize, String> {
        path.validate(&self.graph, r, CapacityView::Residual)
            .map_err(|e| format!("sampled path rejected: {e}"))?;
        let edges = self.graph.edge_indices(&path.edge_ids).map_err(|e| e.to_string())?;
        self.graph
            .reserve(&edges, r.min_bandwidth)
            .map_err(|e| e.to_string())?;
        self.reservations.push(Reservation {
            request: r.clone(),
            path,
            edges,
            reserved_bandwidth: r.min_bandwidth,
        });
        Ok(self.reservations.len() - 1)
    }

    /// Replaces the paths of reservations `moves` and admits `new`, all or
    /// nothing.
    pub(crate) fn swap(&mut self, moves: &[(usize, Path)], new: (&Request, Path)) -> Result<(), TopologyError> {
        let snapshot: Vec<f64> = self.graph.edges().iter().map(|e| e.residual()).collect();
        for &(i, _) in moves {
            let res = &self.reservations[i];
            self.graph.release(&res.edges, res.reserved_bandwidth);
        }
        let mut plan = Vec::with_capacity(moves.len() + 1);
        let mut result = Ok(());
        for (i, p) in moves {
            let bw = self.reservations[*i].reserved_bandwidth;
            match self.graph.edge_indices(&p.edge_ids).and_then(|e| self.graph.reserve(&e, bw).map(|_| e)) {
                Ok(e) => plan.push((Some(*i), p.clone(), e)),
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }
        if result.is_ok() {
            let (r, p) = &new;
            match self
                .graph
                .edge_indices(&p.edge_ids)
                .and_then(|e| self.graph.reserve(&e, r.min_bandwidth).map(|_| e))
            {
                Ok(e) => plan.push((None, p.clone(), e)),
                Err(e) => result = Err(e),
            }
        }
        if let Err(e) = result {
            self.graph.restore_residuals(&snapshot);
            return Err(e);
        }
        for (slot, path, edges) in plan {
            match slot {
                Some(i) => {
                    let res = &mut self.reservations[i];
                    res.path = path;
                    res.edges = edges;
                }
                None => self.reservations.push(Reservation {
                    request: new.0.clone(),
                    path,
                    edges,
                    reserved_bandwidth: new.0.min_bandwidth,
                }),
            }
        }
        Ok(())
    }

    /// Offers one request, timing sample, select and reserve.
    pub fn offer(&mut self, r: &Request) -> Decision {
        let start = Instant::now();
        let d = self.try_embed(r);
        self.record(r, &d, start);
        d
    }

    pub(crate) fn record(&mut self, r: &Request, d: &Decision, start: Instant) {
        self.times_us.push(start.elapsed().as_secs_f64() * 1e6);
        if d.is_accepted() {
            self.accepted += 1;
        } else {
            self.rejected += 1;
            debug!("request {} rejected: {d:?}", r.id);
        }
    }

    pub fn metrics(&self) -> RunMetrics {
        let total = self.accepted + self.rejected;
        RunMetrics {
            accepted: self.accepted,
            rejected: self.rejected,
            acceptance_ratio: if total == 0 {
                1.0
            } else {
                self.accepted as f64 / total as f64
            },
            empty_stream: total == 0,
            utilization: utilization(&self.graph).unwrap_or(0.0),
            times_us: self.times_us.clone(),
        }
    }

    /// Request ids currently holding a reservation.
    pub fn accepted_ids(&self) -> HashSet<u64> {
        self.reservations.iter().map(|r| r.request.id).collect()
    }
}

/// Embeds `requests` in arrival order; reservations are never released.
pub fn run_online(g: &Multigraph, requests: &[Request], config: &EngineConfig) -> RunMetrics {
    let mut engine = Engine::new(g.clone(), config.clone());
    for r in requests {
        engine.offer(r);
    }
    engine.metrics()
}
