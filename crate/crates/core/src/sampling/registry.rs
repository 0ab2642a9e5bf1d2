use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::context::RequestContext;
use super::{gd, gw, pd, SimRng};
use crate::topology::Path;

/// A sample stage of sample-select: returns up to `k` distinct feasible
/// paths, or none iff the request is infeasible.
pub trait PathSampler: Send + Sync {
    fn name(&self) -> &'static str;
    fn sample(&self, ctx: &RequestContext<'_>, k: usize, rng: &mut SimRng) -> Vec<Path>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PerturbedDijkstra;

#[derive(Debug, Clone, Copy, Default)]
pub struct GuidedDijkstra;

#[derive(Debug, Clone, Copy, Default)]
pub struct GuidedWalk;

impl PathSampler for PerturbedDijkstra {
    fn name(&self) -> &'static str {
        "pd"
    }

    fn sample(&self, ctx: &RequestContext<'_>, k: usize, _rng: &mut SimRng) -> Vec<Path> {
        pd::sample_pd(ctx, k)
    }
}

impl PathSampler for GuidedDijkstra {
    fn name(&self) -> &'static str {
        "gd"
    }

    fn sample(&self, ctx: &RequestContext<'_>, k: usize, rng: &mut SimRng) -> Vec<Path> {
        gd::sample_gd(ctx, k, rng)
    }
}

impl PathSampler for GuidedWalk {
    fn name(&self) -> &'static str {
        "gw"
    }

    fn sample(&self, ctx: &RequestContext<'_>, k: usize, rng: &mut SimRng) -> Vec<Path> {
        gw::sample_gw(ctx, k, rng)
    }
}

/// The built-in samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SamplerKind {
    Pd,
    Gd,
    Gw,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 3] = [SamplerKind::Pd, SamplerKind::Gd, SamplerKind::Gw];

    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::Pd => "pd",
            SamplerKind::Gd => "gd",
            SamplerKind::Gw => "gw",
        }
    }

    pub fn sampler(self) -> Arc<dyn PathSampler> {
        match self {
            SamplerKind::Pd => Arc::new(PerturbedDijkstra),
            SamplerKind::Gd => Arc::new(GuidedDijkstra),
            SamplerKind::Gw => Arc::new(GuidedWalk),
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pd" => Ok(SamplerKind::Pd),
            "gd" => Ok(SamplerKind::Gd),
            "gw" => Ok(SamplerKind::Gw),
            other => Err(format!("unknown sampler `{other}` (expected pd, gd or gw)")),
        }
    }
}

/// Samplers by name. Starts with pd, gd and gw; callers may add their own.
#[derive(Clone)]
pub struct SamplerRegistry {
    entries: BTreeMap<String, Arc<dyn PathSampler>>,
}

impl Default for SamplerRegistry {
    fn default() -> Self {
        let mut r = SamplerRegistry {
            entries: BTreeMap::new(),
        };
        for kind in SamplerKind::ALL {
            r.register(kind.sampler());
        }
        r
    }
}

impl SamplerRegistry {
    pub fn new() -> Self {
        SamplerRegistry::default()
    }

    /// Adds or replaces the sampler registered under its name.
    pub fn register(&mut self, sampler: Arc<dyn PathSampler>) {
        self.entries.insert(sampler.name().to_string(), sampler);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn PathSampler>> {
        self.entries.get(&name.to_ascii_lowercase()).cloned()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl fmt::Debug for SamplerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}
