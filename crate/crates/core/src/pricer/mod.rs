//! Price selection.
//!
//! [`solve_prices`] builds the pricing flow network, in which each group's
//! revenue is a convex cost of the demand level routed through it, solves it
//! on a grid and reads prices back off the group flows. The single-price and
//! grid-search baselines live in [`baselines`].

mod baselines;

pub use baselines::{
    aggregate_demand, mean_weight, price_capped_mrp, price_grid_search, price_mrp, GridSearchConfig, SearchMode,
};

use crate::demand::{DemandError, PriceStatus};
use crate::flow::{grid_floor, solve_convex_mcf, ArcId, CostCurve, FlowError, FlowNetwork, FlowSolution, NodeId};
use crate::instance::MarketInstance;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PricingError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error("group {group}: {source}")]
    Demand { group: String, source: DemandError },
    #[error("grid step must be positive and finite, got {0}")]
    InvalidDelta(f64),
    #[error("market has no groups to price")]
    EmptyMarket,
    #[error("search needs {needed} evaluations, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error("price file: {0}")]
    PriceFile(String),
    #[error("{path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}

/// Prices for every group of an instance, in group order.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceAssignment {
    pub prices: Vec<f64>,
    pub statuses: Vec<PriceStatus>,
    /// Surrogate objective the method reports for its prices.
    pub fhat: f64,
    /// Flow the prices were read from, when the method solved one.
    pub flow: Option<FlowSolution>,
    pub notes: Vec<String>,
}

/// Pricing flow network with handles to its nodes and arc groups.
#[derive(Debug, Clone)]
pub struct FpNetwork {
    pub network: FlowNetwork,
    pub source: NodeId,
    pub sink: NodeId,
    pub resource_nodes: Vec<NodeId>,
    pub group_nodes: Vec<NodeId>,
    /// Source to resource, one per resource.
    pub resource_arcs: Vec<ArcId>,
    /// Resource to group, one per instance edge.
    pub edge_arcs: Vec<ArcId>,
    /// Group to sink, carrying the revenue cost.
    pub group_arcs: Vec<ArcId>,
    /// Free source to sink arc absorbing unused supply.
    pub bypass: ArcId,
    /// Supply pushed from source to sink.
    pub supply: f64,
}

/// Default grid step: a thousandth of the largest group size.
pub fn default_delta(inst: &MarketInstance) -> f64 {
    1e-3 * f64::from(inst.max_count().max(1))
}

/// Builds the pricing network on the `delta` grid.
///
/// Source supply is the smaller of total resource capacity and total demand
/// ceiling, both rounded down to the grid, so the bypass arc can always
/// carry whatever the market leaves unmatched.
pub fn build_fp_network(inst: &MarketInstance, delta: f64) -> Result<FpNetwork, PricingError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(PricingError::InvalidDelta(delta));
    }
    let mut net = FlowNetwork::new();
    let source = net.add_node("s");
    let resource_nodes: Vec<NodeId> = inst.resources().iter().map(|r| net.add_node(r.id.clone())).collect();
    let group_nodes: Vec<NodeId> = inst.groups().iter().map(|g| net.add_node(g.id.clone())).collect();
    let sink = net.add_node("t");

    let resource_arcs: Vec<ArcId> = inst
        .resources()
        .iter()
        .zip(&resource_nodes)
        .map(|(r, &node)| net.add_arc(source, node, f64::from(r.capacity), CostCurve::Zero))
        .collect();
    let ceilings: Vec<f64> = inst.groups().iter().map(|g| g.demand.demand_ceiling()).collect();
    let edge_arcs: Vec<ArcId> = inst
        .edges()
        .iter()
        .map(|e| {
            let cap = f64::from(inst.resources()[e.resource].capacity).min(ceilings[e.group]);
            net.add_arc(
                resource_nodes[e.resource],
                group_nodes[e.group],
                cap,
                CostCurve::Linear { slope: -e.weight },
            )
        })
        .collect();
    let group_arcs: Vec<ArcId> = inst
        .groups()
        .iter()
        .zip(&group_nodes)
        .zip(&ceilings)
        .map(|((g, &node), &cap)| net.add_arc(node, sink, cap, CostCurve::Revenue(Box::new(g.demand.clone()))))
        .collect();

    let demand_units: i64 = ceilings.iter().map(|&c| grid_floor(c, delta)).sum();
    let capacity_units: i64 = inst.resources().iter().map(|r| grid_floor(f64::from(r.capacity), delta)).sum();
    let supply = demand_units.min(capacity_units) as f64 * delta;
    let bypass = net.add_arc(source, sink, supply, CostCurve::Zero);
    net.set_balance(source, supply);
    net.set_balance(sink, -supply);

    Ok(FpNetwork { network: net, source, sink, resource_nodes, group_nodes, resource_arcs, edge_arcs, group_arcs, bypass, supply })
}

/// Optimal prices from the pricing flow on the `delta` grid.
///
/// Each group's price is the one whose mean demand equals the flow into
/// the sink from that group. The reported surrogate objective is the total
/// edge value `(x_v + w_e) z_e` over the solved flow.
pub fn solve_prices(inst: &MarketInstance, delta: f64) -> Result<PriceAssignment, PricingError> {
    let fp = build_fp_network(inst, delta)?;
    let sol = solve_convex_mcf(&fp.network, delta)?;
    log::debug!(
        "pricing flow solved: {} phases, {} augmentations, objective {:e}",
        sol.stats.phases,
        sol.stats.augmentations,
        sol.objective
    );
    let mut prices = Vec::with_capacity(inst.groups().len());
    let mut statuses = Vec::with_capacity(inst.groups().len());
    for (g, &arc) in inst.groups().iter().zip(&fp.group_arcs) {
        let (x, status) = g
            .demand
            .inverse_mean_demand(sol.flow(arc))
            .map_err(|source| PricingError::Demand { group: g.id.clone(), source })?;
        prices.push(x);
        statuses.push(status);
    }
    let fhat = inst
        .edges()
        .iter()
        .zip(&fp.edge_arcs)
        .map(|(e, &arc)| (prices[e.group] + e.weight) * sol.flow(arc))
        .sum();
    let mut notes = Vec::new();
    let closed = statuses.iter().filter(|&&s| s == PriceStatus::MarketClosed).count();
    if closed > 0 {
        notes.push(format!("{closed} group(s) priced out of the market"));
    }
    let clamped = statuses.iter().filter(|&&s| s == PriceStatus::ClampedCeiling).count();
    if clamped > 0 {
        notes.push(format!("{clamped} group(s) clamped below the demand supremum"));
    }
    Ok(PriceAssignment { prices, statuses, fhat, flow: Some(sol), notes })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceEntry {
    pub price: f64,
    pub status: PriceStatus,
}

/// Price file contents keyed by group id.
pub fn price_map(inst: &MarketInstance, assignment: &PriceAssignment) -> BTreeMap<String, PriceEntry> {
    inst.groups()
        .iter()
        .zip(assignment.prices.iter().zip(&assignment.statuses))
        .map(|(g, (&price, &status))| (g.id.clone(), PriceEntry { price, status }))
        .collect()
}

pub fn write_prices(
    inst: &MarketInstance,
    assignment: &PriceAssignment,
    path: impl AsRef<Path>,
) -> Result<(), PricingError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(&price_map(inst, assignment)).expect("prices serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| PricingError::Io { path: path.to_path_buf(), source })
}

/// Reads a price file, returning prices in the instance's group order.
/// Every group must be present and every price inside its domain.
pub fn read_prices(inst: &MarketInstance, path: impl AsRef<Path>) -> Result<Vec<f64>, PricingError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| PricingError::Io { path: path.to_path_buf(), source })?;
    let map: BTreeMap<String, PriceEntry> =
        serde_json::from_str(&text).map_err(|e| PricingError::PriceFile(format!("{}: {e}", path.display())))?;
    inst.groups()
        .iter()
        .map(|g| {
            let entry = map.get(&g.id).ok_or_else(|| PricingError::PriceFile(format!("no price for group {}", g.id)))?;
            if !g.demand.domain.contains(entry.price) {
                return Err(PricingError::PriceFile(format!(
                    "price {} for group {} is outside {}",
                    entry.price, g.id, g.demand.domain
                )));
            }
            Ok(entry.price)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{DemandModel, Family, PriceResponse};

    fn one_by_one(q: f64, w: f64) -> MarketInstance {
        MarketInstance::builder()
            .resource("u", 1)
            .group("v", DemandModel::new(Family::Binomial, 1, PriceResponse::Linear { q }))
            .edge("u", "v", w)
            .build()
            .unwrap()
    }

    #[test]
    fn network_shape() {
        let inst = one_by_one(10.0, -2.0);
        let fp = build_fp_network(&inst, 0.25).unwrap();
        assert_eq!(fp.network.arc_count(), 1 + 1 + 1 + 1);
        assert_eq!(fp.network.node_count(), 4);
        assert_eq!(fp.supply, 1.0);
        assert_eq!(fp.network.balance(fp.source), 1.0);
    }

    #[test]
    fn interior_optimum_single_edge() {
        // value (x - 5)(3 - x/2): best at x = 5.5 with value 0.125
        let inst = one_by_one(4.0, -5.0);
        let pa = solve_prices(&inst, 1.0 / 8192.0).unwrap();
        assert!((pa.prices[0] - 5.5).abs() < 1e-3, "{:?}", pa.prices);
        assert!((pa.fhat - 0.125).abs() < 1e-5, "{}", pa.fhat);
        assert_eq!(pa.statuses[0], PriceStatus::Interior);
    }

    #[test]
    fn free_edge_prices_at_floor() {
        let inst = one_by_one(10.0, 0.0);
        let pa = solve_prices(&inst, 1.0 / 1024.0).unwrap();
        assert_eq!(pa.prices[0], 10.0);
        assert_eq!(pa.fhat, 10.0);
    }

    #[test]
    fn rejects_bad_delta() {
        let inst = one_by_one(10.0, 0.0);
        assert!(matches!(solve_prices(&inst, 0.0), Err(PricingError::InvalidDelta(_))));
    }

    #[test]
    fn price_file_round_trip() {
        let inst = one_by_one(4.0, -5.0);
        let pa = solve_prices(&inst, 1.0 / 64.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        write_prices(&inst, &pa, &path).unwrap();
        assert_eq!(read_prices(&inst, &path).unwrap(), pa.prices);
        std::fs::write(&path, r#"{"v": {"price": 99.0, "status": "interior"}}"#).unwrap();
        assert!(read_prices(&inst, &path).is_err());
    }
}
