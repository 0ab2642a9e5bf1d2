//! Peering dataset parsers, IXP multigraph construction and synthetic
//! Euro-IX-like datasets for desk-scale experiments.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use thiserror::Error;

use crate::topology::{Asn, GeoPoint, IxpNode, Multigraph, NodeId, PathletEdge, TopologyError};

/// Fraction of malformed data lines above which a parse is rejected outright.
pub const MAX_MALFORMED_FRACTION: f64 = 0.10;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{malformed} of {total} data lines are malformed (first: line {first_line}: {first_reason})")]
    TooManyMalformed {
        malformed: usize,
        total: usize,
        first_line: usize,
        first_reason: String,
    },
    #[error("resulting graph is empty")]
    EmptyGraph,
    #[error("invalid synthetic parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// One rejected input line.
#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    pub line: usize,
    pub reason: String,
}

/// Parsed value plus the line-level problems that were skipped.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<LineError>,
    pub data_lines: usize,
}

/// Runs `parse_line` over every non-blank, non-comment line. Lines that fail
/// become warnings unless they exceed [`MAX_MALFORMED_FRACTION`]. A first
/// line that fails and starts with `header_prefix` is treated as a header.
pub(crate) fn parse_records<R, F>(input: R, header_prefix: &str, mut parse_line: F) -> Result<(Vec<LineError>, usize), IngestError>
where
    R: Read,
    F: FnMut(&str) -> Result<(), String>,
{
    let mut reader = BufReader::new(input);
    let mut buf = Vec::new();
    let mut warnings = Vec::new();
    let mut data_lines = 0usize;
    let mut line_no = 0usize;
    let mut seen_data = false;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let text = String::from_utf8_lossy(&buf);
        let line = text.trim_end_matches(['\n', '\r']).trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_data && line.to_ascii_lowercase().starts_with(header_prefix) {
            seen_data = true;
            continue;
        }
        seen_data = true;
        data_lines += 1;
        if let Err(reason) = parse_line(line) {
            warnings.push(LineError { line: line_no, reason });
        }
    }
    if data_lines > 0 && warnings.len() as f64 > MAX_MALFORMED_FRACTION * data_lines as f64 {
        let first = &warnings[0];
        return Err(IngestError::TooManyMalformed {
            malformed: warnings.len(),
            total: data_lines,
            first_line: first.line,
            first_reason: first.reason.clone(),
        });
    }
    Ok((warnings, data_lines))
}

fn field<T: std::str::FromStr>(raw: Option<&str>, what: &str) -> Result<T, String> {
    let raw = raw.ok_or_else(|| format!("missing {what}"))?.trim();
    raw.parse::<T>().map_err(|_| format!("invalid {what} `{raw}`"))
}

/// IXP membership rows `(ixp_id, asn)`, sorted and unique.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MembershipTable {
    rows: BTreeSet<(NodeId, Asn)>,
}

impl MembershipTable {
    pub fn from_rows<I: IntoIterator<Item = (NodeId, Asn)>>(rows: I) -> Self {
        MembershipTable {
            rows: rows.into_iter().collect(),
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = (NodeId, Asn)> + '_ {
        self.rows.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ixps(&self) -> BTreeSet<NodeId> {
        self.rows.iter().map(|r| r.0).collect()
    }

    pub fn asns(&self) -> BTreeSet<Asn> {
        self.rows.iter().map(|r| r.1).collect()
    }

    pub fn members_by_ixp(&self) -> BTreeMap<NodeId, Vec<Asn>> {
        let mut out: BTreeMap<NodeId, Vec<Asn>> = BTreeMap::new();
        for &(ixp, asn) in &self.rows {
            out.entry(ixp).or_default().push(asn);
        }
        out
    }

    pub fn ixps_by_asn(&self) -> BTreeMap<Asn, Vec<NodeId>> {
        let mut out: BTreeMap<Asn, Vec<NodeId>> = BTreeMap::new();
        for &(ixp, asn) in &self.rows {
            out.entry(asn).or_default().push(ixp);
        }
        out
    }
}

pub fn parse_membership<R: Read>(input: R) -> Result<Parsed<MembershipTable>, IngestError> {
    let mut rows = BTreeSet::new();
    let (warnings, data_lines) = parse_records(input, "ixp_id", |line| {
        let mut it = line.split(',');
        let ixp: NodeId = field(it.next(), "ixp_id")?;
        let asn: Asn = field(it.next(), "asn")?;
        if it.next().is_some() {
            return Err("too many fields".into());
        }
        rows.insert((ixp, asn));
        Ok(())
    })?;
    Ok(Parsed {
        value: MembershipTable { rows },
        warnings,
        data_lines,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IxpLocation {
    pub ixp_id: NodeId,
    pub name: String,
    pub location: GeoPoint,
}

/// `ixp_id,name,lat_deg,lon_deg`; the name may itself contain commas.
pub fn parse_locations<R: Read>(input: R) -> Result<Parsed<Vec<IxpLocation>>, IngestError> {
    let mut out: BTreeMap<NodeId, IxpLocation> = BTreeMap::new();
    let (warnings, data_lines) = parse_records(input, "ixp_id", |line| {
        let (id, rest) = line.split_once(',').ok_or("missing fields")?;
        let (rest, lon) = rest.rsplit_once(',').ok_or("missing longitude")?;
        let (name, lat) = rest.rsplit_once(',').ok_or("missing latitude")?;
        let ixp_id: NodeId = field(Some(id), "ixp_id")?;
        let lat: f64 = field(Some(lat), "lat_deg")?;
        let lon: f64 = field(Some(lon), "lon_deg")?;
        let location = GeoPoint::new(lat, lon).map_err(|e| e.to_string())?;
        if out.contains_key(&ixp_id) {
            return Err(format!("duplicate ixp_id {ixp_id}"));
        }
        out.insert(
            ixp_id,
            IxpLocation {
                ixp_id,
                name: name.trim().to_string(),
                location,
            },
        );
        Ok(())
    })?;
    Ok(Parsed {
        value: out.into_values().collect(),
        warnings,
        data_lines,
    })
}

/// Announced IPv4 address count per AS.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrefixCounts(pub BTreeMap<Asn, u64>);

impl PrefixCounts {
    pub fn get(&self, asn: Asn) -> u64 {
        self.0.get(&asn).copied().unwrap_or(0)
    }
}

pub fn parse_prefix_counts<R: Read>(input: R) -> Result<Parsed<PrefixCounts>, IngestError> {
    let mut out = BTreeMap::new();
    let (warnings, data_lines) = parse_records(input, "asn", |line| {
        let mut it = line.split(',');
        let asn: Asn = field(it.next(), "asn")?;
        let count: u64 = field(it.next(), "ipv4_address_count")?;
        if it.next().is_some() {
            return Err("too many fields".into());
        }
        if out.insert(asn, count).is_some() {
            return Err(format!("duplicate asn {asn}"));
        }
        Ok(())
    })?;
    Ok(Parsed {
        value: PrefixCounts(out),
        warnings,
        data_lines,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relationship {
    /// First AS is the provider of the second.
    ProviderCustomer,
    Peer,
}

/// AS relationships: provider→customer links and undirected peerings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AsRelGraph {
    p2c: BTreeSet<(Asn, Asn)>,
    p2p: BTreeSet<(Asn, Asn)>,
}

fn ordered(a: Asn, b: Asn) -> (Asn, Asn) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl AsRelGraph {
    pub fn new() -> Self {
        AsRelGraph::default()
    }

    fn has_pair(&self, a: Asn, b: Asn) -> bool {
        self.p2p.contains(&ordered(a, b)) || self.p2c.contains(&(a, b)) || self.p2c.contains(&(b, a))
    }

    pub fn add_provider_customer(&mut self, provider: Asn, customer: Asn) -> Result<(), String> {
        if provider == customer {
            return Err(format!("self relationship for AS{provider}"));
        }
        if self.has_pair(provider, customer) {
            return Err(format!("AS{provider}-AS{customer} already related"));
        }
        self.p2c.insert((provider, customer));
        Ok(())
    }

    pub fn add_peering(&mut self, a: Asn, b: Asn) -> Result<(), String> {
        if a == b {
            return Err(format!("self relationship for AS{a}"));
        }
        if self.has_pair(a, b) {
            return Err(format!("AS{a}-AS{b} already related"));
        }
        self.p2p.insert(ordered(a, b));
        Ok(())
    }

    pub fn relationship(&self, a: Asn, b: Asn) -> Option<(Asn, Asn, Relationship)> {
        if self.p2c.contains(&(a, b)) {
            Some((a, b, Relationship::ProviderCustomer))
        } else if self.p2c.contains(&(b, a)) {
            Some((b, a, Relationship::ProviderCustomer))
        } else if self.p2p.contains(&ordered(a, b)) {
            let (x, y) = ordered(a, b);
            Some((x, y, Relationship::Peer))
        } else {
            None
        }
    }

    pub fn provider_customer_links(&self) -> impl Iterator<Item = (Asn, Asn)> + '_ {
        self.p2c.iter().copied()
    }

    pub fn peer_links(&self) -> impl Iterator<Item = (Asn, Asn)> + '_ {
        self.p2p.iter().copied()
    }

    pub fn p2c_count(&self) -> usize {
        self.p2c.len()
    }

    pub fn p2p_count(&self) -> usize {
        self.p2p.len()
    }

    pub fn link_count(&self) -> usize {
        self.p2c.len() + self.p2p.len()
    }

    pub fn asns(&self) -> BTreeSet<Asn> {
        self.p2c
            .iter()
            .chain(&self.p2p)
            .flat_map(|&(a, b)| [a, b])
            .collect()
    }

    pub fn customers(&self) -> BTreeMap<Asn, Vec<Asn>> {
        let mut out: BTreeMap<Asn, Vec<Asn>> = BTreeMap::new();
        for &(p, c) in &self.p2c {
            out.entry(p).or_default().push(c);
        }
        out
    }
}

/// CAIDA serial-1 `as1|as2|rel`: rel −1 means as1 provides transit to as2,
/// 0 means peers. Trailing fields (serial-2 source tags) are ignored.
pub fn parse_as_relationships<R: Read>(input: R) -> Result<Parsed<AsRelGraph>, IngestError> {
    let mut g = AsRelGraph::new();
    let (warnings, data_lines) = parse_records(input, "as1", |line| {
        let mut it = line.split('|');
        let a: Asn = field(it.next(), "as1")?;
        let b: Asn = field(it.next(), "as2")?;
        let rel: i32 = field(it.next(), "rel")?;
        match rel {
            -1 => g.add_provider_customer(a, b),
            0 => g.add_peering(a, b),
            other => Err(format!("unknown relationship {other}")),
        }
    })?;
    Ok(Parsed {
        value: g,
        warnings,
        data_lines,
    })
}

/// IXPs that survive the membership filter: at least one member announcing
/// a non-zero address count.
pub fn announcing_ixps(m: &MembershipTable, prefixes: &PrefixCounts) -> BTreeSet<NodeId> {
    m.members_by_ixp()
        .into_iter()
        .filter(|(_, members)| members.iter().any(|&a| prefixes.get(a) > 0))
        .map(|(ixp, _)| ixp)
        .collect()
}

/// Full pathlet expansion before connectivity filtering: one directed edge per
/// AS per ordered pair of retained IXPs it is a member of.
pub fn expand_memberships(
    m: &MembershipTable,
    locations: &[IxpLocation],
    prefixes: &PrefixCounts,
) -> Result<Multigraph, IngestError> {
    let retained = announcing_ixps(m, prefixes);
    let loc: HashMap<NodeId, &IxpLocation> = locations.iter().map(|l| (l.ixp_id, l)).collect();
    let nodes: Vec<IxpNode> = retained
        .iter()
        .map(|&id| match loc.get(&id) {
            Some(l) => IxpNode::located(id, l.name.clone(), l.location),
            None => IxpNode::new(id, format!("IXP-{id}")),
        })
        .collect();
    let mut edges = Vec::new();
    let mut next_id: u32 = 0;
    for (asn, ixps) in m.ixps_by_asn() {
        let present: Vec<NodeId> = ixps.into_iter().filter(|i| retained.contains(i)).collect();
        for &a in &present {
            for &b in &present {
                if a != b {
                    edges.push(PathletEdge::new(next_id, a, b, asn, 1.0, 0.0));
                    next_id += 1;
                }
            }
        }
    }
    Ok(Multigraph::build(nodes, edges)?)
}

/// IXP multigraph restricted to its largest connected component. Bandwidth is
/// unitary and latency zero until annotated.
pub fn build_ixp_multigraph(
    m: &MembershipTable,
    locations: &[IxpLocation],
    prefixes: &PrefixCounts,
) -> Result<Multigraph, IngestError> {
    let full = expand_memberships(m, locations, prefixes)?;
    let g = full.largest_component();
    if g.node_count() == 0 || g.edge_count() == 0 {
        return Err(IngestError::EmptyGraph);
    }
    Ok(g)
}

/// Discrete AS-to-IXP participation law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParticipationDistribution {
    /// P(k) ∝ k^(−exponent) for k in 1..=max_ixps (capped at the IXP count).
    PowerLaw { exponent: f64, max_ixps: usize },
}

impl ParticipationDistribution {
    fn weights(&self, n_ixps: usize) -> Result<Vec<f64>, IngestError> {
        match *self {
            ParticipationDistribution::PowerLaw { exponent, max_ixps } => {
                if !(exponent.is_finite() && exponent > 0.0) {
                    return Err(IngestError::InvalidParameters(format!(
                        "participation exponent must be positive, got {exponent}"
                    )));
                }
                if max_ixps == 0 {
                    return Err(IngestError::InvalidParameters("max_ixps must be at least 1".into()));
                }
                let kmax = max_ixps.min(n_ixps);
                Ok((1..=kmax).map(|k| (k as f64).powf(-exponent)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_ixps: usize,
    pub n_ases: usize,
    pub participation: ParticipationDistribution,
    /// Zipf exponent of IXP attractiveness when an AS picks its IXPs.
    pub ixp_popularity: f64,
    /// Share of ASes announcing no addresses.
    pub silent_fraction: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Roughly Euro-IX sized: ~230 IXPs and ~45k pathlets before scaling
    /// down; a quarter of the coverage order keeps ~58 IXPs and ~16k pathlets.
    pub fn euro_ix_like(seed: u64) -> Self {
        SyntheticConfig {
            n_ixps: 232,
            n_ases: 3200,
            participation: ParticipationDistribution::PowerLaw {
                exponent: 2.2,
                max_ixps: 40,
            },
            ixp_popularity: 1.0,
            silent_fraction: 0.05,
            seed,
        }
    }

    pub fn small(n_ixps: usize, n_ases: usize, seed: u64) -> Self {
        SyntheticConfig {
            n_ixps,
            n_ases,
            participation: ParticipationDistribution::PowerLaw {
                exponent: 1.8,
                max_ixps: n_ixps,
            },
            ixp_popularity: 0.8,
            silent_fraction: 0.05,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub membership: MembershipTable,
    pub locations: Vec<IxpLocation>,
    pub prefix_counts: PrefixCounts,
}

// (weight, lat range, lon range)
const REGIONS: [(f64, (f64, f64), (f64, f64)); 5] = [
    (0.55, (36.0, 60.0), (-9.0, 30.0)),    // Europe
    (0.22, (25.0, 50.0), (-123.0, -70.0)), // North America
    (0.13, (1.0, 40.0), (100.0, 140.0)),   // East/South-East Asia
    (0.05, (-35.0, -5.0), (-70.0, -35.0)), // South America
    (0.05, (-38.0, -20.0), (115.0, 153.0)), // Oceania
];

pub const SYNTHETIC_FIRST_ASN: Asn = 10_000;

fn sample_index(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

/// Deterministic synthetic membership, geography and address counts. A small
/// share of ASes joins many IXPs; popular IXPs attract most members.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticDataset, IngestError> {
    if cfg.n_ixps < 2 {
        return Err(IngestError::InvalidParameters("n_ixps must be at least 2".into()));
    }
    if cfg.n_ases == 0 {
        return Err(IngestError::InvalidParameters("n_ases must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&cfg.silent_fraction) {
        return Err(IngestError::InvalidParameters("silent_fraction must lie in [0,1)".into()));
    }
    if !(cfg.ixp_popularity.is_finite() && cfg.ixp_popularity >= 0.0) {
        return Err(IngestError::InvalidParameters("ixp_popularity must be non-negative".into()));
    }
    let k_weights = cfg.participation.weights(cfg.n_ixps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let region_weights: Vec<f64> = REGIONS.iter().map(|r| r.0).collect();
    let mut locations = Vec::with_capacity(cfg.n_ixps);
    for i in 0..cfg.n_ixps {
        let (_, (lat0, lat1), (lon0, lon1)) = REGIONS[sample_index(&region_weights, &mut rng)];
        let lat = rng.random_range(lat0..lat1);
        let lon = rng.random_range(lon0..lon1);
        locations.push(IxpLocation {
            ixp_id: i as NodeId + 1,
            name: format!("SYN-IX-{}", i + 1),
            location: GeoPoint::new(lat, lon).expect("region boxes are in range"),
        });
    }

    let popularity: Vec<f64> = (0..cfg.n_ixps)
        .map(|r| ((r + 1) as f64).powf(-cfg.ixp_popularity))
        .collect();
    let size = LogNormal::new(9.0, 2.0).expect("valid lognormal");
    let mut rows = BTreeSet::new();
    let mut prefixes = BTreeMap::new();
    let mut keyed: Vec<(f64, usize)> = Vec::with_capacity(cfg.n_ixps);
    for a in 0..cfg.n_ases {
        let asn = SYNTHETIC_FIRST_ASN + a as Asn;
        let k = sample_index(&k_weights, &mut rng) + 1;
        // weighted sampling without replacement (Efraimidis–Spirakis keys)
        keyed.clear();
        for (i, w) in popularity.iter().enumerate() {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            keyed.push((u.ln() / w, i));
        }
        keyed.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        for &(_, i) in keyed.iter().take(k) {
            rows.insert((i as NodeId + 1, asn));
        }
        let silent = rng.random::<f64>() < cfg.silent_fraction;
        let count = if silent {
            0
        } else {
            (size.sample(&mut rng) * (k as f64).sqrt()).round().max(1.0) as u64
        };
        prefixes.insert(asn, count);
    }
    Ok(SyntheticDataset {
        membership: MembershipTable { rows },
        locations,
        prefix_counts: PrefixCounts(prefixes),
    })
}

/// Tiered customer-provider hierarchy over `asns`, which are taken in rank
/// order (largest first): a peering tier-1 clique, a tier-2 layer buying
/// transit from tier-1 and peering sparsely, and stubs.
pub fn generate_as_relationships(asns: &[Asn], seed: u64) -> AsRelGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a512);
    let mut g = AsRelGraph::new();
    let n = asns.len();
    if n < 2 {
        return g;
    }
    let t1 = (n / 100).clamp(2, 12).min(n);
    let t2 = ((n * 15) / 100).max(1).min(n - t1);
    let tier1 = &asns[..t1];
    let tier2 = &asns[t1..t1 + t2];
    let stubs = &asns[t1 + t2..];
    for i in 0..tier1.len() {
        for j in i + 1..tier1.len() {
            let _ = g.add_peering(tier1[i], tier1[j]);
        }
    }
    for &a in tier2 {
        let n_prov = rng.random_range(1..=2.min(tier1.len()));
        for &p in tier1.choose_multiple(&mut rng, n_prov) {
            let _ = g.add_provider_customer(p, a);
        }
    }
    for i in 0..tier2.len() {
        for j in i + 1..tier2.len() {
            if rng.random::<f64>() < 0.08 {
                let _ = g.add_peering(tier2[i], tier2[j]);
            }
        }
    }
    let upstream: Vec<Asn> = if tier2.is_empty() { tier1.to_vec() } else { tier2.to_vec() };
    for &a in stubs {
        let n_prov = rng.random_range(1..=2.min(upstream.len()));
        for &p in upstream.choose_multiple(&mut rng, n_prov) {
            let _ = g.add_provider_customer(p, a);
        }
        if rng.random::<f64>() < 0.1 {
            if let Some(&p) = tier1.choose(&mut rng) {
                let _ = g.add_provider_customer(p, a);
            }
        }
    }
    g
}

/// Orders ASes by IXP participation (then announced addresses, then ASN) so
/// that [`generate_as_relationships`] puts the best-connected ones on top.
pub fn rank_asns(m: &MembershipTable, prefixes: &PrefixCounts) -> Vec<Asn> {
    let by_asn = m.ixps_by_asn();
    let mut all: Vec<Asn> = by_asn.keys().copied().collect();
    let extra: HashSet<Asn> = prefixes.0.keys().copied().filter(|a| !by_asn.contains_key(a)).collect();
    all.extend(extra);
    all.sort_by(|a, b| {
        let ka = by_asn.get(a).map_or(0, Vec::len);
        let kb = by_asn.get(b).map_or(0, Vec::len);
        kb.cmp(&ka)
            .then(prefixes.get(*b).cmp(&prefixes.get(*a)))
            .then(a.cmp(b))
    });
    all
}
