//! Market data model: resource nodes with integer capacities, participant
//! groups with demand models, and weighted edges between them.

mod generate;
mod io;
mod validate;

pub use generate::{generate_crowdsourcing, generate_ridehail, CrowdParams, ResponseShape, RideHailParams};
pub use io::{read_instance, write_instance, EdgeEntry, GroupEntry, InstanceFile, ResourceEntry, ResponseEntry};
pub use validate::{validate_instance, GroupVerdict, Removal, RemovalReason, Side, ValidationReport};

use crate::demand::DemandModel;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("resource {id}: capacity must be ≥ 1 (got {capacity})")]
    BadCapacity { id: String, capacity: i64 },
    #[error("edge ({u}, {v}) references unknown node {missing}")]
    UnknownNode { u: String, v: String, missing: String },
    #[error("duplicate node id {0}")]
    DuplicateId(String),
    #[error("edge ({u}, {v}) has non-finite weight")]
    BadWeight { u: String, v: String },
    #[error("group {id}: price domain {domain} is not an interval")]
    NonIntervalDomain { id: String, domain: String },
    #[error("group {id}: acceptance probability {p} at price {x} is outside [0, 1]")]
    ResponseOutOfRange { id: String, x: f64, p: f64 },
    #[error("group {id}: {reason}")]
    BadResponse { id: String, reason: String },
    #[error("invalid generator parameter: {0}")]
    BadParameter(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub id: String,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub id: String,
    pub demand: DemandModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub resource: usize,
    pub group: usize,
    pub weight: f64,
}

/// Provenance of generated instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub generator: String,
    pub synthetic: bool,
    pub seed: u64,
    pub params: serde_json::Value,
}

/// A validated market. Nodes without edges and groups that can never
/// produce a profitable match are removed at construction; the removals
/// are kept in [`MarketInstance::report`].
#[derive(Debug, Clone)]
pub struct MarketInstance {
    resources: Vec<Resource>,
    groups: Vec<Group>,
    edges: Vec<Edge>,
    meta: Option<InstanceMeta>,
    report: ValidationReport,
    resource_edges: Vec<Vec<usize>>,
    group_edges: Vec<Vec<usize>>,
}

impl PartialEq for MarketInstance {
    fn eq(&self, other: &Self) -> bool {
        self.resources == other.resources
            && self.groups == other.groups
            && self.edges == other.edges
            && self.meta == other.meta
    }
}

impl MarketInstance {
    pub fn builder() -> InstanceBuilder {
        InstanceBuilder::default()
    }

    pub fn resources(&self) -> &[Resource] {
        &self.resources
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn meta(&self) -> Option<&InstanceMeta> {
        self.meta.as_ref()
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    /// Edge indices incident to group `v`.
    pub fn group_edges(&self, v: usize) -> &[usize] {
        &self.group_edges[v]
    }

    /// Edge indices incident to resource `u`.
    pub fn resource_edges(&self, u: usize) -> &[usize] {
        &self.resource_edges[u]
    }

    pub fn group_index(&self, id: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.id == id)
    }

    pub fn total_capacity(&self) -> u64 {
        self.resources.iter().map(|r| u64::from(r.capacity)).sum()
    }

    pub fn max_count(&self) -> u32 {
        self.groups.iter().map(|g| g.demand.count).max().unwrap_or(0)
    }

    /// Largest `|w_e + x|` over edges for prices in the given vector.
    pub fn max_edge_value(&self, prices: &[f64]) -> f64 {
        self.edges.iter().map(|e| (e.weight + prices[e.group]).abs()).fold(0.0, f64::max)
    }

    pub fn to_file(&self) -> InstanceFile {
        io::to_file(self)
    }

    pub fn from_file(file: InstanceFile) -> Result<Self, InstanceError> {
        io::from_file(file)
    }

    fn assemble(raw: RawInstance) -> Result<Self, InstanceError> {
        let report = validate_instance(&raw)?;
        let keep_group: Vec<bool> = raw.groups.iter().map(|g| !report.is_removed(Side::Group, &g.id)).collect();
        let keep_resource: Vec<bool> =
            raw.resources.iter().map(|r| !report.is_removed(Side::Resource, &r.id)).collect();
        let remap = |keep: &[bool]| {
            let mut next = 0;
            keep.iter()
                .map(|&k| {
                    k.then(|| {
                        next += 1;
                        next - 1
                    })
                })
                .collect::<Vec<Option<usize>>>()
        };
        let group_map = remap(&keep_group);
        let resource_map = remap(&keep_resource);
        let edges: Vec<Edge> = raw
            .edges
            .iter()
            .filter_map(|&(u, v, w)| {
                Some(Edge { resource: resource_map[u]?, group: group_map[v]?, weight: w })
            })
            .collect();
        let resources: Vec<Resource> =
            raw.resources.into_iter().zip(&keep_resource).filter(|(_, &k)| k).map(|(r, _)| r).collect();
        let groups: Vec<Group> =
            raw.groups.into_iter().zip(&keep_group).filter(|(_, &k)| k).map(|(g, _)| g).collect();
        let mut resource_edges = vec![Vec::new(); resources.len()];
        let mut group_edges = vec![Vec::new(); groups.len()];
        for (i, e) in edges.iter().enumerate() {
            resource_edges[e.resource].push(i);
            group_edges[e.group].push(i);
        }
        Ok(Self { resources, groups, edges, meta: raw.meta, report, resource_edges, group_edges })
    }
}

/// Structurally checked but not yet validated instance data.
#[derive(Debug, Clone, Default)]
pub struct RawInstance {
    pub resources: Vec<Resource>,
    pub groups: Vec<Group>,
    /// `(resource index, group index, weight)`.
    pub edges: Vec<(usize, usize, f64)>,
    pub meta: Option<InstanceMeta>,
}

#[derive(Debug, Default)]
pub struct InstanceBuilder {
    resources: Vec<(String, i64)>,
    groups: Vec<Group>,
    edges: Vec<(String, String, f64)>,
    meta: Option<InstanceMeta>,
}

impl InstanceBuilder {
    pub fn resource(mut self, id: impl Into<String>, capacity: i64) -> Self {
        self.resources.push((id.into(), capacity));
        self
    }

    pub fn group(mut self, id: impl Into<String>, demand: DemandModel) -> Self {
        self.groups.push(Group { id: id.into(), demand });
        self
    }

    pub fn edge(mut self, u: impl Into<String>, v: impl Into<String>, weight: f64) -> Self {
        self.edges.push((u.into(), v.into(), weight));
        self
    }

    pub fn meta(mut self, meta: InstanceMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn raw(self) -> Result<RawInstance, InstanceError> {
        let mut resources = Vec::with_capacity(self.resources.len());
        for (id, capacity) in self.resources {
            if capacity < 1 || capacity > i64::from(u32::MAX) {
                return Err(InstanceError::BadCapacity { id, capacity });
            }
            resources.push(Resource { id, capacity: capacity as u32 });
        }
        let mut seen = std::collections::HashSet::new();
        for id in resources.iter().map(|r| &r.id).chain(self.groups.iter().map(|g| &g.id)) {
            if !seen.insert(id.as_str()) {
                return Err(InstanceError::DuplicateId(id.clone()));
            }
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for (u, v, w) in self.edges {
            let ui = resources.iter().position(|r| r.id == u);
            let vi = self.groups.iter().position(|g| g.id == v);
            let (ui, vi) = match (ui, vi) {
                (Some(a), Some(b)) => (a, b),
                (None, _) => return Err(InstanceError::UnknownNode { missing: u.clone(), u, v }),
                (_, None) => return Err(InstanceError::UnknownNode { missing: v.clone(), u, v }),
            };
            if !w.is_finite() {
                return Err(InstanceError::BadWeight { u, v });
            }
            edges.push((ui, vi, w));
        }
        Ok(RawInstance { resources, groups: self.groups, edges, meta: self.meta })
    }

    pub fn build(self) -> Result<MarketInstance, InstanceError> {
        MarketInstance::assemble(self.raw()?)
    }
}
