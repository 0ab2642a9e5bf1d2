//! Path stitching over inter-IXP pathlet multigraphs.
//!
//! The crate covers the whole pipeline: building the IXP multigraph from
//! peering data, topology and policy analysis, online sample-select
//! admission of QoS requests, and exact offline embedding with
//! reconfiguration.

pub mod analysis;
pub mod engine;
pub mod experiment;
pub mod flow;
pub mod ingest;
pub mod io;
pub mod latency;
pub mod metrics;
pub mod policy;
pub mod sampling;
pub mod solver;
pub mod topology;

pub use topology::{
    Access, CapacityView, EdgeId, EdgeMask, IxpNode, Multigraph, NodeId, Path, PathletEdge, Request,
};
