//! Policy-compliant AS-level path diversity: automaton product graphs over
//! AS relationships, p2p augmentation from IXP co-membership, and weighted
//! endpoint sampling.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::flow::{FlowNetwork, INFINITE};
use crate::ingest::{AsRelGraph, MembershipTable, PrefixCounts, Relationship};
use crate::topology::Asn;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("AS{0} is not in the relationship graph")]
    UnknownAs(Asn),
    #[error("source and destination are both AS{0}")]
    SameEndpoints(Asn),
    #[error("no AS announces any address space")]
    ZeroWeights,
    #[error("could not draw distinct endpoints after {0} attempts")]
    RedrawLimit(usize),
    #[error("pair count must be at least 1")]
    NoPairs,
}

/// Direction-aware link label as seen while traversing it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    /// Customer to provider (uphill).
    C2p,
    P2p,
    /// Provider to customer (downhill).
    P2c,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyScenario {
    /// Valley-free with at most one peering link at the top.
    PointyPeak,
    /// Any number of consecutive peering links at the top.
    WidePeak,
    /// Peering links anywhere on the uphill and the downhill part.
    WithSteps,
    Unrestricted,
}

const UP: usize = 0;
const PEAK: usize = 1;
const DOWN: usize = 2;

impl PolicyScenario {
    pub const ALL: [PolicyScenario; 4] = [
        PolicyScenario::PointyPeak,
        PolicyScenario::WidePeak,
        PolicyScenario::WithSteps,
        PolicyScenario::Unrestricted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyScenario::PointyPeak => "pointy-peak",
            PolicyScenario::WidePeak => "wide-peak",
            PolicyScenario::WithSteps => "with-steps",
            PolicyScenario::Unrestricted => "unrestricted",
        }
    }

    pub fn state_count(self) -> usize {
        match self {
            PolicyScenario::PointyPeak | PolicyScenario::WidePeak => 3,
            PolicyScenario::WithSteps => 2,
            PolicyScenario::Unrestricted => 1,
        }
    }

    /// Transition function; state 0 is the start state and every state accepts.
    pub fn step(self, state: usize, label: Label) -> Option<usize> {
        use Label::*;
        match self {
            PolicyScenario::Unrestricted => Some(0),
            PolicyScenario::WithSteps => match (state, label) {
                (0, C2p | P2p) => Some(0),
                (0, P2c) | (1, P2c | P2p) => Some(1),
                _ => None,
            },
            PolicyScenario::PointyPeak | PolicyScenario::WidePeak => match (state, label) {
                (UP, C2p) => Some(UP),
                (UP, P2p) => Some(PEAK),
                (PEAK, P2p) if self == PolicyScenario::WidePeak => Some(PEAK),
                (_, P2c) => Some(DOWN),
                _ => None,
            },
        }
    }

    /// Whether a label sequence is accepted.
    pub fn accepts(self, labels: &[Label]) -> bool {
        let mut s = 0;
        for &l in labels {
            match self.step(s, l) {
                Some(n) => s = n,
                None => return false,
            }
        }
        true
    }
}

impl fmt::Display for PolicyScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyScenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyScenario::ALL
            .into_iter()
            .find(|p| p.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown policy scenario `{s}`"))
    }
}

/// Label for traversing from `a` to `b`, if the ASes are related.
pub fn traversal_label(rel: &AsRelGraph, a: Asn, b: Asn) -> Option<Label> {
    rel.relationship(a, b).map(|(x, _, kind)| match kind {
        Relationship::Peer => Label::P2p,
        Relationship::ProviderCustomer if x == a => Label::P2c,
        Relationship::ProviderCustomer => Label::C2p,
    })
}

/// Adds peering links between ASes that share an IXP and have no
/// relationship yet. Candidates are shuffled with `seed` and the first
/// round(fraction·n) are added, so larger fractions extend smaller ones.
pub fn augment_p2p(rel: &AsRelGraph, m: &MembershipTable, fraction: f64, seed: u64) -> AsRelGraph {
    let mut out = rel.clone();
    if fraction <= 0.0 {
        return out;
    }
    let mut candidates: BTreeSet<(Asn, Asn)> = BTreeSet::new();
    for members in m.members_by_ixp().into_values() {
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                if rel.relationship(a, b).is_none() {
                    candidates.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    let mut candidates: Vec<(Asn, Asn)> = candidates.into_iter().collect();
    candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = ((fraction.min(1.0) * candidates.len() as f64).round() as usize).min(candidates.len());
    for &(a, b) in &candidates[..take] {
        out.add_peering(a, b).expect("candidate pairs are unrelated");
    }
    out
}

/// Flow network over (AS, automaton state). Each direction of an AS link is
/// one unit-capacity arc. When several states of `a` may traverse `a → b`
/// with label ℓ, the arc leaves a hub shared by all of `a`'s ℓ-links that
/// every such `(a, s)` feeds; when ℓ can lead to several states, it enters
/// a hub shared by all of `b`'s incoming ℓ-links that fans out to each
/// `(b, δ(s, ℓ))`.
///
/// For the valley-free automata every label has a single target state, so
/// flow cannot switch layers on a link and the value is exactly the
/// number of link-disjoint compliant paths (states only advance, so a walk
/// that revisits an AS shortcuts to a simple path). With steps, a peering
/// link carries flow from both the uphill and downhill layers into either
/// and the value is an upper bound. The value is monotone in the scenario
/// order and under link additions.
#[derive(Debug, Clone)]
pub struct PolicyGraph {
    scenario: PolicyScenario,
    as_index: BTreeMap<Asn, usize>,
    network: FlowNetwork,
    transition_arcs: usize,
    link_count: usize,
}

impl PolicyGraph {
    pub fn scenario(&self) -> PolicyScenario {
        self.scenario
    }

    pub fn layer_count(&self) -> usize {
        self.scenario.state_count()
    }

    pub fn as_count(&self) -> usize {
        self.as_index.len()
    }

    /// Entry arcs from layered AS nodes into link gadgets.
    pub fn transition_arc_count(&self) -> usize {
        self.transition_arcs
    }

    pub fn link_count(&self) -> usize {
        self.link_count
    }

    fn node(&self, asn: Asn, state: usize) -> Result<usize, PolicyError> {
        self.as_index
            .get(&asn)
            .map(|&i| i * self.layer_count() + state)
            .ok_or(PolicyError::UnknownAs(asn))
    }
}

pub fn build_policy_graph(rel: &AsRelGraph, scenario: PolicyScenario) -> PolicyGraph {
    let as_index: BTreeMap<Asn, usize> = rel.asns().into_iter().enumerate().map(|(i, a)| (a, i)).collect();
    let states = scenario.state_count();
    let mut network = FlowNetwork::new(as_index.len() * states);
    let mut transition_arcs = 0;
    let mut fan_in: HashMap<(usize, Label), usize> = HashMap::new();
    let mut fan_out: HashMap<(usize, Label), usize> = HashMap::new();
    let links: Vec<(Asn, Asn)> = rel.provider_customer_links().chain(rel.peer_links()).collect();
    for &(a, b) in &links {
        for (from, to) in [(a, b), (b, a)] {
            let label = traversal_label(rel, from, to).expect("listed link");
            let (u, v) = (as_index[&from], as_index[&to]);
            let steps: Vec<(usize, usize)> = (0..states).filter_map(|s| scenario.step(s, label).map(|t| (s, t))).collect();
            transition_arcs += steps.len();
            let mut targets: Vec<usize> = steps.iter().map(|&(_, t)| t).collect();
            targets.sort_unstable();
            targets.dedup();
            let entry = match steps[..] {
                [] => continue,
                [(s, _)] => u * states + s,
                _ => *fan_in.entry((u, label)).or_insert_with(|| {
                    let h = network.add_node();
                    for &(s, _) in &steps {
                        network.add_arc(u * states + s, h, INFINITE);
                    }
                    h
                }),
            };
            let exit = match targets[..] {
                [t] => v * states + t,
                _ => *fan_out.entry((v, label)).or_insert_with(|| {
                    let h = network.add_node();
                    for &t in &targets {
                        network.add_arc(h, v * states + t, INFINITE);
                    }
                    h
                }),
            };
            network.add_arc(entry, exit, 1);
        }
    }
    PolicyGraph {
        scenario,
        as_index,
        network,
        transition_arcs,
        link_count: links.len(),
    }
}

/// Max-flow from the source AS in the start state to the destination AS in
/// any state.
pub fn policy_path_diversity(pg: &PolicyGraph, src: Asn, dst: Asn) -> Result<u64, PolicyError> {
    if src == dst {
        return Err(PolicyError::SameEndpoints(src));
    }
    let s = pg.node(src, 0)?;
    pg.node(dst, 0)?;
    let sinks = (0..pg.layer_count()).map(|state| pg.node(dst, state)).collect::<Result<Vec<_>, _>>()?;
    Ok(pg.network.max_flow_to_any(s, &sinks))
}

pub const MAX_REDRAWS: usize = 100;

/// Endpoint pairs drawn independently with probability proportional to
/// announced addresses, among the ASes of `rel`. A pair with equal ends is
/// redrawn, up to [`MAX_REDRAWS`] times.
pub fn sample_weighted_pairs(
    rel: &AsRelGraph,
    prefixes: &PrefixCounts,
    n: usize,
    seed: u64,
) -> Result<Vec<(Asn, Asn)>, PolicyError> {
    if n == 0 {
        return Err(PolicyError::NoPairs);
    }
    let asns: Vec<Asn> = rel.asns().into_iter().collect();
    let mut acc = 0.0;
    let cumulative: Vec<f64> = asns
        .iter()
        .map(|&a| {
            acc += prefixes.get(a) as f64;
            acc
        })
        .collect();
    if acc <= 0.0 {
        return Err(PolicyError::ZeroWeights);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let x = rng.random::<f64>() * acc;
        asns[cumulative.partition_point(|&c| c <= x).min(asns.len() - 1)]
    };
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pair = None;
        for _ in 0..MAX_REDRAWS {
            let (a, b) = (draw(&mut rng), draw(&mut rng));
            if a != b {
                pair = Some((a, b));
                break;
            }
        }
        out.push(pair.ok_or(PolicyError::RedrawLimit(MAX_REDRAWS))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::ingest::generate_as_relationships;

    fn rel(p2c: &[(Asn, Asn)], p2p: &[(Asn, Asn)]) -> AsRelGraph {
        let mut g = AsRelGraph::new();
        for &(a, b) in p2c {
            g.add_provider_customer(a, b).unwrap();
        }
        for &(a, b) in p2p {
            g.add_peering(a, b).unwrap();
        }
        g
    }

    /// Maximum number of AS-simple compliant paths, no two sharing a link
    /// in the same direction.
    fn brute_force(rel: &AsRelGraph, sc: PolicyScenario, src: Asn, dst: Asn) -> usize {
        let asns: Vec<Asn> = rel.asns().into_iter().collect();
        let links: Vec<(Asn, Asn)> = rel.provider_customer_links().chain(rel.peer_links()).collect();
        let link_id = |a: Asn, b: Asn| {
            let i = links.iter().position(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a)).unwrap();
            2 * i + usize::from(a > b)
        };
        let mut paths: Vec<u128> = Vec::new();
        fn dfs(
            u: Asn,
            dst: Asn,
            state: usize,
            sc: PolicyScenario,
            rel: &AsRelGraph,
            asns: &[Asn],
            seen: &mut HashSet<Asn>,
            used: u128,
            link_id: &dyn Fn(Asn, Asn) -> usize,
            out: &mut Vec<u128>,
        ) {
            if u == dst {
                out.push(used);
                return;
            }
            for &v in asns {
                if seen.contains(&v) {
                    continue;
                }
                let Some(l) = traversal_label(rel, u, v) else { continue };
                let Some(t) = sc.step(state, l) else { continue };
                seen.insert(v);
                dfs(v, dst, t, sc, rel, asns, seen, used | 1 << link_id(u, v), link_id, out);
                seen.remove(&v);
            }
        }
        let mut seen = HashSet::from([src]);
        dfs(src, dst, 0, sc, rel, &asns, &mut seen, 0, &link_id, &mut paths);
        fn pack(ps: &[u128], used: u128) -> usize {
            match ps.split_first() {
                None => 0,
                Some((&p, rest)) => {
                    let skip = pack(rest, used);
                    if p & used == 0 {
                        skip.max(1 + pack(rest, used | p))
                    } else {
                        skip
                    }
                }
            }
        }
        pack(&paths, 0)
    }

    #[test]
    fn automata_hand_traces() {
        use Label::*;
        let pp = PolicyScenario::PointyPeak;
        assert!(pp.accepts(&[C2p, C2p, P2p, P2c]));
        assert!(!pp.accepts(&[P2p, P2p]));
        assert!(!pp.accepts(&[P2c, C2p]));
        assert!(PolicyScenario::WidePeak.accepts(&[C2p, P2p, P2p, P2c]));
        assert!(!PolicyScenario::WidePeak.accepts(&[P2p, C2p]));
        assert!(PolicyScenario::WithSteps.accepts(&[C2p, P2p, C2p, P2c, P2p, P2c]));
        assert!(!PolicyScenario::WithSteps.accepts(&[P2c, C2p]));
        assert!(PolicyScenario::Unrestricted.accepts(&[P2c, C2p, P2p]));
    }

    #[test]
    fn unrestricted_is_single_layer_expansion() {
        let r = rel(&[(1, 2), (1, 3)], &[(2, 3)]);
        let pg = build_policy_graph(&r, PolicyScenario::Unrestricted);
        assert_eq!(pg.layer_count(), 1);
        assert_eq!(pg.transition_arc_count(), 2 * r.link_count());
    }

    #[test]
    fn canonical_valley_free_chain() {
        // 1 is a customer of 2, which provides for 3
        let r = rel(&[(2, 1), (2, 3)], &[]);
        let pg = build_policy_graph(&r, PolicyScenario::PointyPeak);
        assert_eq!(policy_path_diversity(&pg, 1, 3).unwrap(), 1);
    }

    #[test]
    fn two_peerings_need_wide_peak() {
        let r = rel(&[], &[(1, 2), (2, 3)]);
        let pp = build_policy_graph(&r, PolicyScenario::PointyPeak);
        let wp = build_policy_graph(&r, PolicyScenario::WidePeak);
        assert_eq!(policy_path_diversity(&pp, 1, 3).unwrap(), 0);
        assert_eq!(policy_path_diversity(&wp, 1, 3).unwrap(), 1);
    }

    #[test]
    fn valley_is_rejected() {
        // 1 → 2 downhill, then 2 → 3 uphill
        let r = rel(&[(1, 2), (3, 2)], &[]);
        for sc in [PolicyScenario::PointyPeak, PolicyScenario::WidePeak, PolicyScenario::WithSteps] {
            assert_eq!(policy_path_diversity(&build_policy_graph(&r, sc), 1, 3).unwrap(), 0, "{sc}");
        }
        let un = build_policy_graph(&r, PolicyScenario::Unrestricted);
        assert_eq!(policy_path_diversity(&un, 1, 3).unwrap(), 1);
    }

    #[test]
    fn errors() {
        let r = rel(&[(1, 2)], &[]);
        let pg = build_policy_graph(&r, PolicyScenario::WidePeak);
        assert_eq!(policy_path_diversity(&pg, 1, 1), Err(PolicyError::SameEndpoints(1)));
        assert_eq!(policy_path_diversity(&pg, 1, 9), Err(PolicyError::UnknownAs(9)));
        let disconnected = rel(&[(1, 2), (3, 4)], &[]);
        let pg = build_policy_graph(&disconnected, PolicyScenario::Unrestricted);
        assert_eq!(policy_path_diversity(&pg, 1, 4).unwrap(), 0);
    }

    /// Two tier-1 peers (1, 2) with two transit customers each; stubs below.
    fn seven_as_fixture() -> AsRelGraph {
        rel(&[(1, 3), (1, 4), (2, 5), (2, 4), (3, 6), (4, 6), (5, 7), (4, 7)], &[(1, 2), (3, 4)])
    }

    #[test]
    fn seven_as_fixture_against_brute_force() {
        let r = seven_as_fixture();
        let asns: Vec<Asn> = r.asns().into_iter().collect();
        for sc in PolicyScenario::ALL {
            let pg = build_policy_graph(&r, sc);
            for &a in &asns {
                for &b in &asns {
                    if a != b {
                        let flow = policy_path_diversity(&pg, a, b).unwrap() as usize;
                        let exact = brute_force(&r, sc, a, b);
                        if sc == PolicyScenario::WithSteps {
                            assert!(flow >= exact, "{sc} {a}->{b}");
                        } else {
                            assert_eq!(flow, exact, "{sc} {a}->{b}");
                        }
                    }
                }
            }
        }
    }

    fn random_rel(seed: u64, n: u32) -> AsRelGraph {
        let asns: Vec<Asn> = (1..=n).collect();
        let mut r = generate_as_relationships(&asns, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..n / 2 {
            let (a, b) = (rng.random_range(1..=n), rng.random_range(1..=n));
            if a != b && r.relationship(a, b).is_none() {
                r.add_peering(a, b).unwrap();
            }
        }
        r
    }

    #[test]
    fn flow_matches_packing_except_with_steps_bound() {
        for seed in 0..25 {
            let r = random_rel(seed, 9);
            if r.link_count() > 60 {
                continue;
            }
            let asns: Vec<Asn> = r.asns().into_iter().collect();
            for sc in PolicyScenario::ALL {
                let pg = build_policy_graph(&r, sc);
                for (i, &a) in asns.iter().enumerate().take(4) {
                    let b = asns[(i * 3 + 5) % asns.len()];
                    if a == b {
                        continue;
                    }
                    let flow = policy_path_diversity(&pg, a, b).unwrap() as usize;
                    let exact = brute_force(&r, sc, a, b);
                    assert!(flow >= exact, "{sc}: {flow} < {exact}");
                    if sc != PolicyScenario::WithSteps {
                        assert_eq!(flow, exact, "{sc} {a}->{b}");
                    }
                }
            }
        }
    }

    #[test]
    fn augmentation_counts_and_nesting() {
        let m = MembershipTable::from_rows([(1, 10), (1, 11), (1, 12)]);
        let base = AsRelGraph::new();
        assert_eq!(augment_p2p(&base, &m, 0.0, 1), base);
        assert_eq!(augment_p2p(&base, &m, 1.0, 1).p2p_count(), 3);

        let mut rows = Vec::new();
        for a in 0..15 {
            rows.push((7, 100 + a));
        }
        let m = MembershipTable::from_rows(rows);
        let mut existing = AsRelGraph::new();
        let mut pairs = Vec::new();
        for a in 0..15 {
            for b in a + 1..15 {
                pairs.push((100 + a, 100 + b));
            }
        }
        // 105 co-member pairs, 5 already related: 100 candidates
        for &(a, b) in &pairs[..5] {
            existing.add_provider_customer(a, b).unwrap();
        }
        let half = augment_p2p(&existing, &m, 0.5, 42);
        assert_eq!(half.p2p_count(), 50);
        assert_eq!(half, augment_p2p(&existing, &m, 0.5, 42));
        let quarter = augment_p2p(&existing, &m, 0.25, 42);
        let q: HashSet<_> = quarter.peer_links().collect();
        let h: HashSet<_> = half.peer_links().collect();
        assert!(q.is_subset(&h));
    }

    #[test]
    fn pair_sampling() {
        let r = rel(&[(1, 2), (2, 3)], &[]);
        let only_one = PrefixCounts([(1, 10)].into_iter().collect());
        assert_eq!(sample_weighted_pairs(&r, &only_one, 1, 0), Err(PolicyError::RedrawLimit(MAX_REDRAWS)));
        let none = PrefixCounts::default();
        assert_eq!(sample_weighted_pairs(&r, &none, 1, 0), Err(PolicyError::ZeroWeights));

        let two = rel(&[(1, 2)], &[]);
        let w = PrefixCounts([(1, 5), (2, 5)].into_iter().collect());
        let pairs = sample_weighted_pairs(&two, &w, 10_000, 3).unwrap();
        assert_eq!(pairs, sample_weighted_pairs(&two, &w, 10_000, 3).unwrap());
        let forward = pairs.iter().filter(|&&p| p == (1, 2)).count() as f64;
        let sigma = (10_000.0f64 * 0.25).sqrt();
        assert!((forward - 5000.0).abs() <= 3.0 * sigma, "{forward}");
    }

    #[test]
    fn scenario_chain_and_augmentation_monotone() {
        let asns: Vec<Asn> = (1..=60).collect();
        let base = generate_as_relationships(&asns, 5);
        let m = MembershipTable::from_rows((1..=60).map(|a| (1 + a % 4, a)));
        let w = PrefixCounts(asns.iter().map(|&a| (a, 1 + a as u64 % 7)).collect());
        let pairs = sample_weighted_pairs(&base, &w, 40, 9).unwrap();
        let mut prev: Option<Vec<[u64; 4]>> = None;
        for frac in [0.0, 0.25, 0.5] {
            let r = augment_p2p(&base, &m, frac, 11);
            let graphs: Vec<PolicyGraph> = PolicyScenario::ALL.iter().map(|&s| build_policy_graph(&r, s)).collect();
            let vals: Vec<[u64; 4]> = pairs
                .iter()
                .map(|&(a, b)| {
                    let v: Vec<u64> = graphs.iter().map(|g| policy_path_diversity(g, a, b).unwrap()).collect();
                    [v[0], v[1], v[2], v[3]]
                })
                .collect();
            for v in &vals {
                assert!(v[0] <= v[1] && v[1] <= v[2] && v[2] <= v[3], "{v:?}");
            }
            if let Some(p) = &prev {
                for (old, new) in p.iter().zip(&vals) {
                    assert!(old.iter().zip(new).all(|(o, n)| o <= n));
                }
            }
            prev = Some(vals);
        }
    }
}
