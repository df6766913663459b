//! JSON instance files.
//!
//! ```json
//! {
//!   "resources": [{"id": "u0", "capacity": 1}],
//!   "groups": [{"id": "v0", "family": "binomial", "n": 1,
//!               "response": {"kind": "linear", "params": {"q": 10.0},
//!                            "domain": {"lo": 10.0, "hi": 15.0}}}],
//!   "edges": [{"u": "u0", "v": "v0", "w": -2.5}]
//! }
//! ```
//!
//! `domain` may be omitted (the response's natural domain is used) and a
//! `null` bound means unbounded. Reals are written in shortest round-trip
//! form, so reading a written file reproduces every value bit for bit.

use super::{InstanceError, InstanceMeta, MarketInstance};
use crate::demand::{DemandModel, Family, Interval, PriceResponse};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<InstanceMeta>,
    pub resources: Vec<ResourceEntry>,
    pub groups: Vec<GroupEntry>,
    pub edges: Vec<EdgeEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceEntry {
    pub id: String,
    pub capacity: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEntry {
    pub id: String,
    pub family: Family,
    pub n: u32,
    pub response: ResponseEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseEntry {
    #[serde(flatten)]
    pub model: PriceResponse,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEntry {
    pub u: String,
    pub v: String,
    pub w: f64,
}

pub(super) fn to_file(inst: &MarketInstance) -> InstanceFile {
    InstanceFile {
        meta: inst.meta.clone(),
        resources: inst
            .resources
            .iter()
            .map(|r| ResourceEntry { id: r.id.clone(), capacity: i64::from(r.capacity) })
            .collect(),
        groups: inst
            .groups
            .iter()
            .map(|g| GroupEntry {
                id: g.id.clone(),
                family: g.demand.family,
                n: g.demand.count,
                response: ResponseEntry { model: g.demand.response.clone(), domain: Some(g.demand.domain) },
            })
            .collect(),
        edges: inst
            .edges
            .iter()
            .map(|e| EdgeEntry {
                u: inst.resources[e.resource].id.clone(),
                v: inst.groups[e.group].id.clone(),
                w: e.weight,
            })
            .collect(),
    }
}

pub(super) fn from_file(file: InstanceFile) -> Result<MarketInstance, InstanceError> {
    let mut b = MarketInstance::builder();
    for r in file.resources {
        b = b.resource(r.id, r.capacity);
    }
    for g in file.groups {
        let mut model = DemandModel::new(g.family, g.n, g.response.model);
        if let Some(domain) = g.response.domain {
            model = model.with_domain(domain);
        }
        b = b.group(g.id, model);
    }
    for e in file.edges {
        b = b.edge(e.u, e.v, e.w);
    }
    if let Some(meta) = file.meta {
        b = b.meta(meta);
    }
    b.build()
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<MarketInstance, InstanceError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| InstanceError::Io { path: path.to_path_buf(), source })?;
    let file: InstanceFile = serde_json::from_str(&text)
        .map_err(|e| InstanceError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    MarketInstance::from_file(file)
}

pub fn write_instance(inst: &MarketInstance, path: impl AsRef<Path>) -> Result<(), InstanceError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(&inst.to_file()).expect("instance serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| InstanceError::Io { path: path.to_path_buf(), source })
}
