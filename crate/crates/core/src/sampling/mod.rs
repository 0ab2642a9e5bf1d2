//! The feasibility oracle and the sample stage of sample-select.

mod context;
pub mod gd;
pub mod gw;
pub mod pd;
mod registry;
mod select;

pub use context::RequestContext;
pub use gd::sample_gd;
pub use gw::sample_gw;
pub use pd::sample_pd;
pub use registry::{GuidedDijkstra, GuidedWalk, PerturbedDijkstra, PathSampler, SamplerKind, SamplerRegistry};
pub use select::{inverse_utility, path_score, select_best, SelectError};

use crate::topology::{CapacityView, Multigraph, Path, Request};

/// RNG used by every randomized sampler.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Prune, collapse and run a latency-shortest-path search; the result is
/// present iff some path meets both the bandwidth and the latency bound.
pub fn exists_feasible_path(g: &Multigraph, r: &Request) -> Option<Path> {
    RequestContext::new(g, r, CapacityView::Residual).shortest_path().cloned()
}
