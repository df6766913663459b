//! Min-cost flow with separable convex arc costs, solved exactly on a
//! uniform grid of step `delta` by capacity scaling.

mod dimacs;
mod scaling;

pub use dimacs::{write_network, write_solution};
pub use scaling::{solve_convex_mcf, solve_linear_mcf};

use crate::demand::DemandModel;
use thiserror::Error;

pub type NodeId = usize;
pub type ArcId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("infeasible: {unmet} units of supply cannot reach any demand; cut side: {cut:?}")]
    Infeasible { unmet: f64, cut: Vec<String> },
    #[error("non-convex cost on arc {arc} near flow {level}: marginal cost drops from {before} to {after}")]
    NonConvexDetected { arc: ArcId, level: f64, before: f64, after: f64 },
    #[error("grid step must be positive and finite, got {0}")]
    InvalidDelta(f64),
    #[error("balance {value} of node {node} is not a multiple of the grid step {delta}")]
    BalanceNotOnGrid { node: String, value: f64, delta: f64 },
    #[error("balances sum to {0} grid units instead of zero")]
    Unbalanced(i64),
    #[error("arc {0} has a negative or non-finite capacity")]
    BadCapacity(ArcId),
    #[error("arc {0} does not have a linear cost")]
    NotLinear(ArcId),
    #[error("{0} must be integral for the linear solver")]
    NotIntegral(String),
}

/// Piecewise linear cost through `(0, 0)` and the given breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    points: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    /// `points` are `(z, cost)` pairs with strictly increasing `z > 0`; the
    /// curve starts at the origin and extends the last slope beyond the
    /// final breakpoint.
    pub fn new(points: Vec<(f64, f64)>) -> Option<Self> {
        let mut all = vec![(0.0, 0.0)];
        all.extend(points);
        if all.windows(2).any(|w| w[1].0 <= w[0].0) || all.len() < 2 {
            return None;
        }
        Some(Self { points: all })
    }

    /// Convex curve from per-segment slopes on a uniform breakpoint spacing.
    pub fn from_slopes(step: f64, slopes: &[f64]) -> Option<Self> {
        let mut acc = 0.0;
        let points = slopes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                acc += s * step;
                ((i + 1) as f64 * step, acc)
            })
            .collect();
        Self::new(points)
    }

    fn eval(&self, z: f64) -> f64 {
        let k = self.points.partition_point(|p| p.0 <= z).clamp(1, self.points.len() - 1);
        let (z0, c0) = self.points[k - 1];
        let (z1, c1) = self.points[k];
        c0 + (c1 - c0) * (z - z0) / (z1 - z0)
    }
}

/// Cost of carrying `z` units on an arc. Every variant is zero at `z = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum CostCurve {
    Zero,
    Linear { slope: f64 },
    Quadratic { quad: f64, lin: f64 },
    Piecewise(PiecewiseLinear),
    /// `-x(z) z` where `x(z)` is the price that makes the mean demand equal
    /// `z`.
    Revenue(Box<DemandModel>),
}

impl CostCurve {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            CostCurve::Zero => 0.0,
            CostCurve::Linear { slope } => slope * z,
            CostCurve::Quadratic { quad, lin } => quad * z * z + lin * z,
            CostCurve::Piecewise(p) => p.eval(z),
            CostCurve::Revenue(m) => m.revenue_cost_clamped(z),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, CostCurve::Zero | CostCurve::Linear { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CostCurve::Zero => "zero",
            CostCurve::Linear { .. } => "linear",
            CostCurve::Quadratic { .. } => "quadratic",
            CostCurve::Piecewise(_) => "piecewise",
            CostCurve::Revenue(_) => "revenue",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowArc {
    pub tail: NodeId,
    pub head: NodeId,
    pub capacity: f64,
    pub cost: CostCurve,
}

/// Directed network with per-arc capacities, cost curves and node balances
/// (positive = supply, negative = demand).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowNetwork {
    labels: Vec<String>,
    balances: Vec<f64>,
    arcs: Vec<FlowArc>,
}

impl FlowNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, label: impl Into<String>) -> NodeId {
        self.labels.push(label.into());
        self.balances.push(0.0);
        self.labels.len() - 1
    }

    pub fn add_arc(&mut self, tail: NodeId, head: NodeId, capacity: f64, cost: CostCurve) -> ArcId {
        assert!(tail < self.labels.len() && head < self.labels.len(), "arc endpoint out of range");
        self.arcs.push(FlowArc { tail, head, capacity, cost });
        self.arcs.len() - 1
    }

    pub fn set_balance(&mut self, node: NodeId, balance: f64) {
        self.balances[node] = balance;
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[FlowArc] {
        &self.arcs
    }

    pub fn arc(&self, id: ArcId) -> &FlowArc {
        &self.arcs[id]
    }

    pub fn balance(&self, node: NodeId) -> f64 {
        self.balances[node]
    }

    pub fn balances(&self) -> &[f64] {
        &self.balances
    }

    pub fn label(&self, node: NodeId) -> &str {
        &self.labels[node]
    }

    /// Capacity of `arc` in grid units of size `delta`, rounded down.
    pub fn capacity_units(&self, arc: ArcId, delta: f64) -> i64 {
        grid_floor(self.arcs[arc].capacity, delta)
    }
}

pub(crate) fn grid_floor(value: f64, delta: f64) -> i64 {
    let units = value / delta;
    (units + 1e-9 * units.abs().max(1.0)).floor() as i64
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub phases: usize,
    pub augmentations: usize,
    pub saturating_pushes: usize,
    pub shortest_path_runs: usize,
    pub initial_scale: i64,
}

/// Grid flow returned by the solvers: arc flows are integer multiples of
/// `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub units: Vec<i64>,
    pub delta: f64,
    pub objective: f64,
    pub stats: SolverStats,
}

impl FlowSolution {
    pub fn flow(&self, arc: ArcId) -> f64 {
        self.units[arc] as f64 * self.delta
    }

    /// Net outflow minus inflow at every node, in grid units.
    pub fn net_outflow_units(&self, net: &FlowNetwork) -> Vec<i64> {
        let mut out = vec![0i64; net.node_count()];
        for (a, arc) in net.arcs().iter().enumerate() {
            out[arc.tail] += self.units[a];
            out[arc.head] -= self.units[a];
        }
        out
    }
}
