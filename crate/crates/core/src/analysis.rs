//! Snapshot analysis: per-SDF topology statistics, multiplicity and path
//! diversity distributions, the coverage curve, and policy-constrained
//! diversity across scenarios.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::ingest::{build_ixp_multigraph, AsRelGraph, IngestError, IxpLocation, MembershipTable, PrefixCounts};
use crate::metrics::{
    all_ordered_pairs, distribution_percentiles, edge_multiplicity_distribution, graph_summary, greedy_coverage_order,
    histogram, path_diversity_many, scale_down, CoverageCurve, GraphSummary, MetricsError,
};
use crate::policy::{
    augment_p2p, build_policy_graph, policy_path_diversity, sample_weighted_pairs, PolicyError, PolicyScenario,
};
use crate::topology::{Multigraph, NodeId};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("writing {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

pub const SUMMARY_HEADER: &str =
    "sdf,nodes,edges,diameter,avg_node_degree,avg_edge_multiplicity,avg_shortest_path_len,avg_clustering_coeff";
pub const POLICY_HEADER: &str = "scenario,p2p_fraction,mean,median,p99";

#[derive(Debug, Clone, PartialEq)]
pub struct SdfAnalysis {
    pub sdf: usize,
    pub summary: GraphSummary,
    /// Parallel pathlets per directly connected unordered IXP pair.
    pub multiplicity: BTreeMap<usize, usize>,
    /// Edge-disjoint path counts over the analysed ordered pairs.
    pub diversity: BTreeMap<u64, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub per_sdf: Vec<SdfAnalysis>,
    pub coverage: CoverageCurve,
}

/// Up to `max` ordered pairs; a seeded uniform subset when there are more.
pub fn diversity_pairs(g: &Multigraph, max: usize, seed: u64) -> Vec<(NodeId, NodeId)> {
    let all = all_ordered_pairs(g);
    if all.len() <= max {
        return all;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, all.len(), max).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| all[i]).collect()
}

pub fn analyze_snapshot(
    m: &MembershipTable,
    locations: &[IxpLocation],
    prefixes: &PrefixCounts,
    rel: Option<&AsRelGraph>,
    sdfs: &[usize],
    max_pairs: usize,
    seed: u64,
) -> Result<AnalysisReport, AnalysisError> {
    let g = build_ixp_multigraph(m, locations, prefixes)?;
    let coverage = greedy_coverage_order(m, prefixes, rel);
    let order = coverage.order();
    let per_sdf = sdfs
        .iter()
        .map(|&sdf| {
            let s = scale_down(&g, &order, sdf)?;
            let summary = graph_summary(&s)?;
            let multiplicity = edge_multiplicity_distribution(&s);
            let pairs = diversity_pairs(&s, max_pairs, seed ^ sdf as u64);
            let diversity = histogram(&path_diversity_many(&s, &pairs)?);
            Ok(SdfAnalysis {
                sdf,
                summary,
                multiplicity,
                diversity,
            })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    Ok(AnalysisReport { per_sdf, coverage })
}

fn value_count<K: std::fmt::Display>(h: &BTreeMap<K, usize>) -> String {
    let mut s = String::from("value,count\n");
    for (v, c) in h {
        let _ = writeln!(s, "{v},{c}");
    }
    s
}

impl AnalysisReport {
    pub fn summary_csv(&self) -> String {
        let mut s = format!("{SUMMARY_HEADER}\n");
        for a in &self.per_sdf {
            let m = &a.summary;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                a.sdf,
                m.node_count,
                m.edge_count,
                m.diameter,
                m.avg_node_degree,
                m.avg_edge_multiplicity,
                m.avg_shortest_path_len,
                m.avg_clustering_coeff
            );
        }
        s
    }

    pub fn coverage_csv(&self) -> String {
        let mut s = String::from("rank,ixp_id,cumulative_direct,cumulative_one_hop\n");
        for (i, p) in self.coverage.points.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{}", i + 1, p.ixp_id, p.cumulative_direct, p.cumulative_one_hop);
        }
        s
    }

    /// Multiplicity percentiles per SDF over directly connected pairs.
    pub fn percentiles_csv(&self) -> String {
        let mut s = String::from("sdf,p1,p25,p50,p75,p99,p99_9\n");
        for a in &self.per_sdf {
            let values: Vec<f64> = a
                .multiplicity
                .iter()
                .flat_map(|(&v, &c)| std::iter::repeat_n(v as f64, c))
                .collect();
            if let Ok(p) = distribution_percentiles(&values) {
                let _ = writeln!(s, "{},{},{},{},{},{},{}", a.sdf, p.p1, p.p25, p.p50, p.p75, p.p99, p.p99_9);
            }
        }
        s
    }

    /// File name and content of every output, in a fixed order.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("summary.csv".to_string(), self.summary_csv()),
            ("coverage.csv".to_string(), self.coverage_csv()),
            ("multiplicity_percentiles.csv".to_string(), self.percentiles_csv()),
        ];
        for a in &self.per_sdf {
            out.push((format!("multiplicity_sdf{}.csv", a.sdf), value_count(&a.multiplicity)));
            out.push((format!("diversity_sdf{}.csv", a.sdf), value_count(&a.diversity)));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<(), AnalysisError> {
        write_all(dir, &self.files())
    }
}

fn write_all(dir: &Path, files: &[(String, String)]) -> Result<(), AnalysisError> {
    let err = |p: &Path| {
        let path = p.display().to_string();
        move |source| AnalysisError::Output { path, source }
    };
    fs::create_dir_all(dir).map_err(err(dir))?;
    for (name, content) in files {
        let p = dir.join(name);
        fs::write(&p, content).map_err(err(&p))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRow {
    pub scenario: PolicyScenario,
    pub p2p_fraction: f64,
    pub mean: f64,
    pub median: f64,
    pub p99: f64,
    /// Per-pair values, aligned with the sampled pairs.
    pub values: Vec<u64>,
}

/// Diversity of `n_pairs` address-weighted AS pairs under every scenario and
/// every peering augmentation fraction. The same pairs are used throughout.
pub fn policy_diversity_table(
    rel: &AsRelGraph,
    m: &MembershipTable,
    prefixes: &PrefixCounts,
    fractions: &[f64],
    n_pairs: usize,
    seed: u64,
) -> Result<(Vec<(u32, u32)>, Vec<PolicyRow>), AnalysisError> {
    let pairs = sample_weighted_pairs(rel, prefixes, n_pairs, seed)?;
    let mut rows = Vec::new();
    for &fraction in fractions {
        let augmented = augment_p2p(rel, m, fraction, seed);
        for scenario in PolicyScenario::ALL {
            let pg = build_policy_graph(&augmented, scenario);
            let values = pairs
                .par_iter()
                .map(|&(a, b)| policy_path_diversity(&pg, a, b))
                .collect::<Result<Vec<u64>, _>>()?;
            let f: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            let p = distribution_percentiles(&f)?;
            rows.push(PolicyRow {
                scenario,
                p2p_fraction: fraction,
                mean: f.iter().sum::<f64>() / f.len() as f64,
                median: p.p50,
                p99: p.p99,
                values,
            });
        }
    }
    Ok((pairs, rows))
}

pub fn policy_csv(rows: &[PolicyRow]) -> String {
    let mut s = format!("{POLICY_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.scenario, r.p2p_fraction, r.mean, r.median, r.p99);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_as_relationships, generate_synthetic, SyntheticConfig};

    #[test]
    fn analysis_is_deterministic_and_consistent() {
        let d = generate_synthetic(&SyntheticConfig::small(20, 300, 3)).unwrap();
        let run = || analyze_snapshot(&d.membership, &d.locations, &d.prefix_counts, None, &[1, 2], 100, 5).unwrap();
        let a = run();
        assert_eq!(a.files(), run().files());
        for s in &a.per_sdf {
            let pairs: usize = s.multiplicity.values().sum();
            let weighted: usize = s.multiplicity.iter().map(|(v, c)| v * c).sum();
            assert!(weighted <= s.summary.edge_count);
            assert!(pairs > 0);
            assert_eq!(s.diversity.values().sum::<usize>(), 100.min(s.summary.node_count * (s.summary.node_count - 1)));
        }
        assert!(a.summary_csv().starts_with(SUMMARY_HEADER));
        assert_eq!(a.files().len(), 3 + 2 * 2);
    }

    #[test]
    fn policy_table_rows_follow_scenarios() {
        let d = generate_synthetic(&SyntheticConfig::small(10, 60, 2)).unwrap();
        let asns: Vec<u32> = d.membership.asns().into_iter().collect();
        let rel = generate_as_relationships(&asns, 2);
        let (pairs, rows) = policy_diversity_table(&rel, &d.membership, &d.prefix_counts, &[0.0, 0.5], 30, 1).unwrap();
        assert_eq!(pairs.len(), 30);
        assert_eq!(rows.len(), 8);
        for chunk in rows.chunks(4) {
            for w in chunk.windows(2) {
                assert!(w[0].values.iter().zip(&w[1].values).all(|(a, b)| a <= b));
            }
        }
        assert_eq!(policy_csv(&rows).lines().count(), 9);
    }
}
