//! CSV writers for every input format, plus graph and request instance
//! files. Floats use the shortest round-trip representation, so writing is
//! deterministic and reading back is lossless.

use std::io::{Read, Write};

use crate::ingest::{
    parse_records, AsRelGraph, IngestError, IxpLocation, MembershipTable, Parsed, PrefixCounts,
};
use crate::topology::{Access, EdgeId, GeoPoint, IxpNode, Multigraph, NodeId, PathletEdge, Request};

pub const NODES_HEADER: &str = "node_id,name,lat_deg,lon_deg";
pub const EDGES_HEADER: &str = "edge_id,src,dst,provider_asn,bandwidth,latency_ms";
pub const REQUESTS_HEADER: &str = "request_id,min_bandwidth,max_latency_ms,src_access,dst_access";

pub fn write_membership<W: Write>(m: &MembershipTable, mut out: W) -> std::io::Result<()> {
    writeln!(out, "ixp_id,asn")?;
    for (ixp, asn) in m.rows() {
        writeln!(out, "{ixp},{asn}")?;
    }
    Ok(())
}

pub fn write_locations<W: Write>(locs: &[IxpLocation], mut out: W) -> std::io::Result<()> {
    writeln!(out, "ixp_id,name,lat_deg,lon_deg")?;
    for l in locs {
        writeln!(out, "{},{},{},{}", l.ixp_id, l.name, l.location.lat_deg, l.location.lon_deg)?;
    }
    Ok(())
}

pub fn write_prefix_counts<W: Write>(p: &PrefixCounts, mut out: W) -> std::io::Result<()> {
    writeln!(out, "asn,ipv4_address_count")?;
    for (asn, c) in &p.0 {
        writeln!(out, "{asn},{c}")?;
    }
    Ok(())
}

pub fn write_as_relationships<W: Write>(rel: &AsRelGraph, mut out: W) -> std::io::Result<()> {
    writeln!(out, "as1|as2|rel")?;
    for (p, c) in rel.provider_customer_links() {
        writeln!(out, "{p}|{c}|-1")?;
    }
    for (a, b) in rel.peer_links() {
        writeln!(out, "{a}|{b}|0")?;
    }
    Ok(())
}

/// Nodes and edges as two CSV streams; residual state is not stored.
pub fn write_graph<W1: Write, W2: Write>(g: &Multigraph, mut nodes: W1, mut edges: W2) -> std::io::Result<()> {
    writeln!(nodes, "{NODES_HEADER}")?;
    for n in g.nodes() {
        match n.location {
            Some(p) => writeln!(nodes, "{},{},{},{}", n.id, n.name, p.lat_deg, p.lon_deg)?,
            None => writeln!(nodes, "{},{},,", n.id, n.name)?,
        }
    }
    writeln!(edges, "{EDGES_HEADER}")?;
    for e in g.edges() {
        writeln!(
            edges,
            "{},{},{},{},{},{}",
            e.id, e.src, e.dst, e.provider_asn, e.bandwidth, e.latency_ms
        )?;
    }
    Ok(())
}

fn num<T: std::str::FromStr>(raw: &str, what: &str) -> Result<T, String> {
    raw.trim().parse::<T>().map_err(|_| format!("invalid {what} `{}`", raw.trim()))
}

pub fn read_graph<R1: Read, R2: Read>(nodes: R1, edges: R2) -> Result<Parsed<Multigraph>, IngestError> {
    let mut ns = Vec::new();
    let (mut warnings, mut data_lines) = parse_records(nodes, "node_id", |line| {
        let (id, rest) = line.split_once(',').ok_or("missing fields")?;
        let (rest, lon) = rest.rsplit_once(',').ok_or("missing longitude")?;
        let (name, lat) = rest.rsplit_once(',').ok_or("missing latitude")?;
        let id: NodeId = num(id, "node_id")?;
        let name = name.trim().to_string();
        let node = match (lat.trim(), lon.trim()) {
            ("", "") => IxpNode::new(id, name),
            (lat, lon) => {
                let p = GeoPoint::new(num(lat, "lat_deg")?, num(lon, "lon_deg")?).map_err(|e| e.to_string())?;
                IxpNode::located(id, name, p)
            }
        };
        ns.push(node);
        Ok(())
    })?;
    let mut es = Vec::new();
    let (w, d) = parse_records(edges, "edge_id", |line| {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(format!("expected 6 fields, got {}", f.len()));
        }
        es.push(PathletEdge::new(
            num::<EdgeId>(f[0], "edge_id")?,
            num(f[1], "src")?,
            num(f[2], "dst")?,
            num(f[3], "provider_asn")?,
            num(f[4], "bandwidth")?,
            num(f[5], "latency_ms")?,
        ));
        Ok(())
    })?;
    warnings.extend(w);
    data_lines += d;
    let value = Multigraph::build(ns, es)?;
    Ok(Parsed {
        value,
        warnings,
        data_lines,
    })
}

fn format_access(a: &[Access]) -> String {
    a.iter()
        .map(|x| format!("{}:{}", x.ixp, x.latency_ms))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_access(raw: &str) -> Result<Vec<Access>, String> {
    raw.split(';')
        .map(|item| {
            let (ixp, lat) = item.split_once(':').ok_or_else(|| format!("invalid access `{item}`"))?;
            Ok(Access::new(num(ixp, "access ixp")?, num(lat, "access latency")?))
        })
        .collect()
}

/// One request per line; access lists are `ixp:latency_ms` joined by `;`.
pub fn write_requests<W: Write>(reqs: &[Request], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{REQUESTS_HEADER}")?;
    for r in reqs {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.id,
            r.min_bandwidth,
            r.max_latency_ms,
            format_access(&r.src_access),
            format_access(&r.dst_access)
        )?;
    }
    Ok(())
}

pub fn read_requests<R: Read>(input: R) -> Result<Parsed<Vec<Request>>, IngestError> {
    let mut out = Vec::new();
    let (warnings, data_lines) = parse_records(input, "request_id", |line| {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(format!("expected 5 fields, got {}", f.len()));
        }
        let r = Request::new(
            num(f[0], "request_id")?,
            parse_access(f[3])?,
            parse_access(f[4])?,
            num(f[1], "min_bandwidth")?,
            num(f[2], "max_latency_ms")?,
        )
        .map_err(|e| e.to_string())?;
        out.push(r);
        Ok(())
    })?;
    Ok(Parsed {
        value: out,
        warnings,
        data_lines,
    })
}
