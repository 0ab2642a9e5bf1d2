use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pathstitch::ingest::{generate_as_relationships, generate_synthetic, rank_asns, SyntheticConfig};
use pathstitch::io::{write_as_relationships, write_locations, write_membership, write_prefix_counts};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathstitch"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small snapshot (membership, locations, prefixes, relationships) in `dir`.
fn snapshot(dir: &Path) {
    let d = generate_synthetic(&SyntheticConfig::small(24, 260, 11)).unwrap();
    let rel = generate_as_relationships(&rank_asns(&d.membership, &d.prefix_counts), 11);
    write_membership(&d.membership, fs::File::create(dir.join("membership.csv")).unwrap()).unwrap();
    write_locations(&d.locations, fs::File::create(dir.join("ixp_locations.csv")).unwrap()).unwrap();
    write_prefix_counts(&d.prefix_counts, fs::File::create(dir.join("prefix_counts.csv")).unwrap()).unwrap();
    write_as_relationships(&rel, fs::File::create(dir.join("as_rel.txt")).unwrap()).unwrap();
}

fn snapshot_flags(dir: &Path) -> Vec<String> {
    vec![
        "--membership".into(),
        s(&dir.join("membership.csv")).into(),
        "--locations".into(),
        s(&dir.join("ixp_locations.csv")).into(),
        "--prefixes".into(),
        s(&dir.join("prefix_counts.csv")).into(),
    ]
}

#[test]
fn ingest_files_writes_graph_and_catalog() {
    let tmp = TempDir::new().unwrap();
    snapshot(tmp.path());
    let out = tmp.path().join("ingested");
    let mut args = vec!["ingest".to_string(), "--out".into(), s(&out).into()];
    args.extend(snapshot_flags(tmp.path()));
    args.extend(["--relationships".into(), s(&tmp.path().join("as_rel.txt")).into()]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(&args);
    for f in ["membership.csv", "ixp_locations.csv", "prefix_counts.csv", "as_rel.txt", "nodes.csv", "edges.csv", "endpoint_catalog.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let edges = fs::read_to_string(out.join("edges.csv")).unwrap();
    assert!(edges.starts_with("edge_id,src,dst,provider_asn,bandwidth,latency_ms\n"));
    assert!(edges.lines().count() > 1);
    // Round trips through the reader used by solve-offline.
    let g = pathstitch::io::read_graph(
        fs::File::open(out.join("nodes.csv")).unwrap(),
        fs::File::open(out.join("edges.csv")).unwrap(),
    )
    .unwrap();
    assert!(g.warnings.is_empty());
    assert_eq!(g.value.edge_count(), edges.lines().count() - 1);
    assert!(g.value.edges().iter().all(|e| e.latency_ms > 0.0));
}

#[test]
fn ingest_synthetic_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["ingest", "--synthetic", "--seed", "4", "--out", s(&a)]);
    ok(&["ingest", "--synthetic", "--seed", "4", "--out", s(&b)]);
    for f in ["as_rel.txt", "edges.csv", "endpoint_catalog.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn analyze_is_byte_identical_across_reruns() {
    let tmp = TempDir::new().unwrap();
    snapshot(tmp.path());
    let outs = [tmp.path().join("r1"), tmp.path().join("r2")];
    for out in &outs {
        let mut args = vec!["analyze".to_string(), "--sdf".into(), "1,2,4".into(), "--diversity-pairs".into(), "150".into()];
        args.extend(snapshot_flags(tmp.path()));
        args.extend(["--relationships".into(), s(&tmp.path().join("as_rel.txt")).into(), "--out".into(), s(out).into()]);
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        ok(&args);
    }
    let summary = fs::read_to_string(outs[0].join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.starts_with("sdf,nodes,edges,diameter,"));
    let names: Vec<_> = {
        let mut v: Vec<_> = fs::read_dir(&outs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    assert_eq!(names.len(), 3 + 2 * 3);
    for n in names {
        assert_eq!(fs::read(outs[0].join(&n)).unwrap(), fs::read(outs[1].join(&n)).unwrap(), "{n:?}");
    }
    assert!(fs::read_to_string(outs[0].join("diversity_sdf1.csv")).unwrap().starts_with("value,count\n"));
}

#[test]
fn policy_div_writes_one_row_per_scenario_and_fraction() {
    let tmp = TempDir::new().unwrap();
    snapshot(tmp.path());
    let out = tmp.path().join("policy.csv");
    let d = tmp.path();
    ok(&[
        "policy-div",
        "--relationships",
        s(&d.join("as_rel.txt")),
        "--membership",
        s(&d.join("membership.csv")),
        "--prefixes",
        s(&d.join("prefix_counts.csv")),
        "--pairs",
        "40",
        "--fractions",
        "0,1",
        "--out",
        s(&out),
    ]);
    let csv = fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "scenario,p2p_fraction,mean,median,p99");
    assert_eq!(lines.len(), 1 + 2 * 4);
    assert!(lines[1].starts_with("pointy-peak,0,"));
}

fn simulate_args(d: &Path, out: &Path, extra: &[&str]) -> Vec<String> {
    let mut args = vec!["simulate".to_string()];
    args.extend(snapshot_flags(d));
    args.extend(["--out".into(), s(out).into()]);
    args.extend(extra.iter().map(|x| x.to_string()));
    args
}

#[test]
fn simulate_without_timing_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    snapshot(tmp.path());
    let extra = [
        "--mode", "online,hybrid", "--algo", "pd,gw", "--sdf", "2", "--k", "5", "--lat-range", "100:150",
        "--lat-range", "250:300", "--requests", "60", "--runs", "2", "--seed", "3", "--no-timing",
    ];
    let outs = [tmp.path().join("s1"), tmp.path().join("s2")];
    for out in &outs {
        let args = simulate_args(tmp.path(), out, &extra);
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    }
    for f in ["results.csv", "aggregate.csv", "summary.txt"] {
        assert_eq!(fs::read(outs[0].join(f)).unwrap(), fs::read(outs[1].join(f)).unwrap(), "{f}");
    }
    let results = fs::read_to_string(outs[0].join("results.csv")).unwrap();
    // 2 modes x 2 algos x 2 ranges x 2 runs
    assert_eq!(results.lines().count(), 1 + 16);
    let aggregate = fs::read_to_string(outs[0].join("aggregate.csv")).unwrap();
    assert_eq!(aggregate.lines().count(), 1 + 8);
}

#[test]
fn config_file_with_flag_overrides() {
    let tmp = TempDir::new().unwrap();
    snapshot(tmp.path());
    let cfg = tmp.path().join("exp.cfg");
    fs::write(&cfg, "# one point\nmode = online\nalgo = gd\nsdf = 2\nk = 20\nlat_range = 200:250\nrequests = 500\nruns = 1\n").unwrap();
    let out = tmp.path().join("single");
    let args = simulate_args(tmp.path(), &out, &["--config", s(&cfg), "--requests", "10"]);
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    let rows: Vec<&str> = results.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("0,online,gd,2,20,200,250,10,"), "{}", rows[1]);
    assert_eq!(fs::read_to_string(out.join("aggregate.csv")).unwrap().lines().count(), 2);
}

#[test]
fn solve_offline_writes_paths() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(d.join("n.csv"), "node_id,name,lat_deg,lon_deg\n0,a,,\n1,b,,\n2,c,,\n3,d,,\n").unwrap();
    fs::write(
        d.join("e.csv"),
        "edge_id,src,dst,provider_asn,bandwidth,latency_ms\n0,0,1,1,1,1\n1,1,3,1,1,1\n2,0,2,1,1,1\n3,2,3,1,1,1.5\n",
    )
    .unwrap();
    fs::write(
        d.join("r.csv"),
        "request_id,min_bandwidth,max_latency_ms,src_access,dst_access\n1,1,20,0:0,3:0\n2,1,20,1:0,3:0\n3,1,20,0:0,3:0\n",
    )
    .unwrap();
    let out = d.join("sol.csv");
    ok(&[
        "solve-offline",
        "--nodes",
        s(&d.join("n.csv")),
        "--edges",
        s(&d.join("e.csv")),
        "--requests",
        s(&d.join("r.csv")),
        "--out",
        s(&out),
    ]);
    assert_eq!(
        fs::read_to_string(out).unwrap(),
        "request_id,accepted,edge_id_sequence\n1,1,2;3\n2,1,1\n3,0,\n"
    );
}

#[test]
fn bad_inputs_exit_non_zero_with_diagnostic() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("missing.csv");
    let cases: Vec<Vec<&str>> = vec![
        vec!["analyze", "--membership", s(&missing), "--prefixes", s(&missing), "--out", s(tmp.path())],
        vec!["simulate", "--mode", "bogus", "--out", s(tmp.path())],
        vec!["simulate", "--runs", "0", "--out", s(tmp.path())],
        vec!["simulate", "--lat-range", "300:100", "--out", s(tmp.path())],
        vec!["simulate", "--config", s(&missing)],
    ];
    for args in cases {
        let out = run(&args);
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.starts_with("error: "), "{args:?}: {err}");
    }
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "colour = blue\n").unwrap();
    let out = run(&["simulate", "--config", s(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}
