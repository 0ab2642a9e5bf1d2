//! Distance-based latency model and the online request generator.

use std::collections::BTreeMap;
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::ingest::{IngestError, MembershipTable, Parsed, PrefixCounts};
use crate::topology::{Access, Asn, GeoPoint, Multigraph, NodeId, PathletEdge, Request, TopologyError};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Error)]
pub enum LatencyError {
    #[error("invalid latency model parameters: {0}")]
    InvalidParams(&'static str),
    #[error("IXP {0} has no coordinates")]
    Unlocated(NodeId),
    #[error("endpoint catalog is empty")]
    EmptyCatalog,
    #[error("invalid request parameters: {0}")]
    InvalidRequestParams(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// rtt(d) = a·d + b + X with X ~ N(0, σ²); one-way latency is half the rtt,
/// floored at `floor_ms`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyModelParams {
    pub a_ms_per_km: f64,
    pub b_ms: f64,
    pub sigma_ms: f64,
    pub floor_ms: f64,
}

impl Default for LatencyModelParams {
    fn default() -> Self {
        LatencyModelParams {
            a_ms_per_km: 0.016,
            b_ms: 26.0,
            sigma_ms: 14.0,
            floor_ms: 1.0,
        }
    }
}

impl LatencyModelParams {
    pub fn validate(&self) -> Result<(), LatencyError> {
        if !(self.a_ms_per_km.is_finite() && self.a_ms_per_km > 0.0) {
            return Err(LatencyError::InvalidParams("a must be positive"));
        }
        if !(self.b_ms.is_finite() && self.b_ms >= 0.0) {
            return Err(LatencyError::InvalidParams("b must be non-negative"));
        }
        if !(self.sigma_ms.is_finite() && self.sigma_ms >= 0.0) {
            return Err(LatencyError::InvalidParams("sigma must be non-negative"));
        }
        if !(self.floor_ms.is_finite() && self.floor_ms > 0.0) {
            return Err(LatencyError::InvalidParams("floor must be positive"));
        }
        Ok(())
    }

    pub fn mean_rtt(&self, distance_km: f64) -> f64 {
        self.a_ms_per_km * distance_km + self.b_ms
    }
}

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn haversine_km(p1: GeoPoint, p2: GeoPoint) -> f64 {
    let (phi1, phi2) = (p1.lat_deg.to_radians(), p2.lat_deg.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (p2.lon_deg - p1.lon_deg).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Unclamped rtt sample.
pub fn sample_rtt<R: Rng + ?Sized>(params: &LatencyModelParams, distance_km: f64, rng: &mut R) -> f64 {
    let noise = if params.sigma_ms > 0.0 {
        Normal::new(0.0, params.sigma_ms).expect("validated sigma").sample(rng)
    } else {
        0.0
    };
    params.mean_rtt(distance_km) + noise
}

pub fn sample_pathlet_latency<R: Rng + ?Sized>(params: &LatencyModelParams, distance_km: f64, rng: &mut R) -> f64 {
    (0.5 * sample_rtt(params, distance_km, rng)).max(params.floor_ms)
}

fn keyed_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Assigns every pathlet an independent latency sample keyed on
/// (seed, edge id), and unit capacity.
pub fn annotate_latencies(g: &Multigraph, params: &LatencyModelParams, seed: u64) -> Result<Multigraph, LatencyError> {
    params.validate()?;
    if let Some(n) = g.nodes().iter().find(|n| n.location.is_none()) {
        return Err(LatencyError::Unlocated(n.id));
    }
    Ok(g.map_edges(|s, d, e| {
        let dist = haversine_km(s.location.expect("checked"), d.location.expect("checked"));
        let mut rng = keyed_rng(seed, e.id as u64);
        let lat = sample_pathlet_latency(params, dist, &mut rng);
        PathletEdge::new(e.id, e.src, e.dst, e.provider_asn, 1.0, lat)
    })?)
}

/// Ordinary least-squares fit of rtt = a·d + b; returns (a, b, residual σ).
pub fn fit_linear(samples: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = samples.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / nf;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / nf;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let ss: f64 = samples.iter().map(|s| (s.1 - a * s.0 - b).powi(2)).sum();
    Some((a, b, (ss / (nf - 2.0)).sqrt()))
}

/// `n` (distance, rtt) pairs with distances drawn uniformly from [0, max_km).
pub fn generate_rtt_samples(params: &LatencyModelParams, n: usize, max_km: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let d = rng.random_range(0.0..max_km);
            (d, sample_rtt(params, d, &mut rng))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub asn: Asn,
    pub location: GeoPoint,
    pub address_count: u64,
    pub member_ixps: Vec<NodeId>,
}

/// Request endpoints: one representative coordinate per AS.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EndpointCatalog {
    pub entries: Vec<CatalogEntry>,
}

impl EndpointCatalog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Keeps member IXPs that are nodes of `g`, dropping entries left with none.
    pub fn restrict_to(&self, g: &Multigraph) -> EndpointCatalog {
        let entries = self
            .entries
            .iter()
            .filter_map(|e| {
                let ixps: Vec<NodeId> = e
                    .member_ixps
                    .iter()
                    .copied()
                    .filter(|&i| g.node_index(i).is_some())
                    .collect();
                (!ixps.is_empty()).then(|| CatalogEntry {
                    member_ixps: ixps,
                    ..e.clone()
                })
            })
            .collect();
        EndpointCatalog { entries }
    }
}

/// `asn,lat_deg,lon_deg,address_count,ixp_id[;ixp_id...]`
pub fn parse_endpoint_catalog<R: Read>(input: R) -> Result<Parsed<EndpointCatalog>, IngestError> {
    let mut by_asn: BTreeMap<Asn, CatalogEntry> = BTreeMap::new();
    let parsed = crate::ingest::parse_records(input, "asn", |line| {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(format!("expected 5 fields, found {}", f.len()));
        }
        let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| format!("invalid {what} `{s}`"));
        let asn: Asn = f[0].parse().map_err(|_| format!("invalid asn `{}`", f[0]))?;
        let location = GeoPoint::new(num(f[1], "lat_deg")?, num(f[2], "lon_deg")?).map_err(|e| e.to_string())?;
        let address_count: u64 = f[3].parse().map_err(|_| format!("invalid address_count `{}`", f[3]))?;
        let mut member_ixps = Vec::new();
        for id in f[4].split(';').map(str::trim).filter(|s| !s.is_empty()) {
            member_ixps.push(id.parse::<NodeId>().map_err(|_| format!("invalid ixp_id `{id}`"))?);
        }
        member_ixps.sort_unstable();
        member_ixps.dedup();
        if member_ixps.is_empty() {
            return Err("no member IXPs".into());
        }
        if by_asn.contains_key(&asn) {
            return Err(format!("duplicate asn {asn}"));
        }
        by_asn.insert(
            asn,
            CatalogEntry {
                asn,
                location,
                address_count,
                member_ixps,
            },
        );
        Ok(())
    })?;
    Ok(Parsed {
        value: EndpointCatalog {
            entries: by_asn.into_values().collect(),
        },
        warnings: parsed.0,
        data_lines: parsed.1,
    })
}

pub fn write_endpoint_catalog<W: std::io::Write>(cat: &EndpointCatalog, mut out: W) -> std::io::Result<()> {
    writeln!(out, "asn,lat_deg,lon_deg,address_count,ixp_ids")?;
    for e in &cat.entries {
        let ixps: Vec<String> = e.member_ixps.iter().map(|i| i.to_string()).collect();
        writeln!(
            out,
            "{},{},{},{},{}",
            e.asn,
            e.location.lat_deg,
            e.location.lon_deg,
            e.address_count,
            ixps.join(";")
        )?;
    }
    Ok(())
}

/// Builds a catalog from membership data, placing each AS at the centroid of
/// its member IXPs in `g` (which must be located). ASes with no address
/// space or no IXP in `g` are skipped.
pub fn derive_catalog(g: &Multigraph, m: &MembershipTable, prefixes: &PrefixCounts) -> EndpointCatalog {
    let mut entries = Vec::new();
    for (asn, ixps) in m.ixps_by_asn() {
        let count = prefixes.get(asn);
        if count == 0 {
            continue;
        }
        let located: Vec<(NodeId, GeoPoint)> = ixps
            .iter()
            .filter_map(|&i| g.node_index(i).and_then(|idx| g.node(idx).location).map(|l| (i, l)))
            .collect();
        if located.is_empty() {
            continue;
        }
        entries.push(CatalogEntry {
            asn,
            location: spherical_centroid(located.iter().map(|x| x.1)),
            address_count: count,
            member_ixps: located.iter().map(|x| x.0).collect(),
        });
    }
    EndpointCatalog { entries }
}

fn spherical_centroid(points: impl Iterator<Item = GeoPoint>) -> GeoPoint {
    let (mut x, mut y, mut z, mut n) = (0.0, 0.0, 0.0, 0usize);
    for p in points {
        let (la, lo) = (p.lat_deg.to_radians(), p.lon_deg.to_radians());
        x += la.cos() * lo.cos();
        y += la.cos() * lo.sin();
        z += la.sin();
        n += 1;
    }
    let (x, y, z) = (x / n as f64, y / n as f64, z / n as f64);
    let lat = z.atan2((x * x + y * y).sqrt()).to_degrees().clamp(-90.0, 90.0);
    let lon = y.atan2(x).to_degrees().clamp(-180.0, 180.0);
    GeoPoint::new(lat, lon).expect("clamped")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestParams {
    pub n: usize,
    pub latency_lo_ms: f64,
    pub latency_hi_ms: f64,
    pub bandwidth: f64,
    pub seed: u64,
}

impl RequestParams {
    pub fn unitary(n: usize, latency_lo_ms: f64, latency_hi_ms: f64, seed: u64) -> Self {
        RequestParams {
            n,
            latency_lo_ms,
            latency_hi_ms,
            bandwidth: 1.0,
            seed,
        }
    }
}

fn weighted_index(cumulative: &[f64], rng: &mut impl Rng) -> usize {
    let total = *cumulative.last().expect("non-empty");
    let x = rng.random::<f64>() * total;
    cumulative.partition_point(|&c| c <= x).min(cumulative.len() - 1)
}

/// Request stream with endpoints drawn proportionally to address space and
/// latency bounds uniform in [lo, hi). Access latencies come from the model
/// applied to the AS-to-IXP distance.
pub fn generate_requests(
    g: &Multigraph,
    catalog: &EndpointCatalog,
    params: &LatencyModelParams,
    rp: &RequestParams,
) -> Result<Vec<Request>, LatencyError> {
    params.validate()?;
    if catalog.is_empty() {
        return Err(LatencyError::EmptyCatalog);
    }
    if rp.n == 0 {
        return Err(LatencyError::InvalidRequestParams("n must be at least 1".into()));
    }
    if !(rp.latency_lo_ms.is_finite() && rp.latency_hi_ms.is_finite() && rp.latency_lo_ms > 0.0 && rp.latency_lo_ms < rp.latency_hi_ms) {
        return Err(LatencyError::InvalidRequestParams(format!(
            "latency range must satisfy 0 < lo < hi, got {}:{}",
            rp.latency_lo_ms, rp.latency_hi_ms
        )));
    }
    let mut acc = 0.0;
    let cumulative: Vec<f64> = catalog
        .entries
        .iter()
        .map(|e| {
            acc += e.address_count as f64;
            acc
        })
        .collect();
    if acc <= 0.0 {
        return Err(LatencyError::EmptyCatalog);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rp.seed);
    let mut out = Vec::with_capacity(rp.n);
    for id in 0..rp.n as u64 {
        let s = &catalog.entries[weighted_index(&cumulative, &mut rng)];
        let t = &catalog.entries[weighted_index(&cumulative, &mut rng)];
        let src = access_list(g, s, params, &mut rng)?;
        let dst = access_list(g, t, params, &mut rng)?;
        let l = rng.random_range(rp.latency_lo_ms..rp.latency_hi_ms);
        out.push(Request::new(id, src, dst, rp.bandwidth, l)?);
    }
    Ok(out)
}

fn access_list(
    g: &Multigraph,
    e: &CatalogEntry,
    params: &LatencyModelParams,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Access>, LatencyError> {
    e.member_ixps
        .iter()
        .map(|&ixp| {
            let loc = g
                .node_index(ixp)
                .and_then(|i| g.node(i).location)
                .ok_or(LatencyError::Unlocated(ixp))?;
            let lat = sample_pathlet_latency(params, haversine_km(e.location, loc), rng);
            Ok(Access::new(ixp, lat))
        })
        .collect()
}
