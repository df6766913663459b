//! Evaluating a price vector: the profit of the best matching for one
//! demand realization, the surrogate objective (best fractional matching
//! against mean demands), and the expected realized profit by sampling or
//! by exact enumeration.

use crate::demand::DemandError;
use crate::flow::{solve_convex_mcf, solve_linear_mcf, CostCurve, FlowError, FlowNetwork};
use crate::instance::MarketInstance;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use thiserror::Error;

/// Default tail mass dropped from each Poisson support in exact evaluation.
pub const DEFAULT_TAIL_EPS: f64 = 1e-9;
/// Default cap on the number of joint demand outcomes enumerated exactly.
pub const DEFAULT_OUTCOME_BUDGET: u64 = 4096;

/// Grid used for the surrogate objective is `2^-SURROGATE_BITS` times the
/// group size rounded up to a power of two.
const SURROGATE_BITS: i32 = 20;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("group {group}: {source}")]
    Demand { group: String, source: DemandError },
    #[error("expected {expected} prices, got {got}")]
    PriceCount { expected: usize, got: usize },
    #[error("expected {expected} realized demands, got {got}")]
    RealizationLength { expected: usize, got: usize },
    #[error("group {group}: realized demand {value} exceeds population {count}")]
    ExceedsPopulation { group: String, value: u64, count: u32 },
    #[error("exact evaluation needs {needed} outcomes, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error("at least one sample is required")]
    NoSamples,
}

/// Realized demand of every group, in group order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Realization {
    pub demand: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub profit: f64,
    /// Matched units on each instance edge.
    pub matched: Vec<u64>,
}

/// Most profitable b-matching for realized demands: resource `u` serves at
/// most its capacity, group `v` at most its realized demand, and a match on
/// edge `(u, v)` earns `x_v + w_e`.
pub fn match_profit(
    inst: &MarketInstance,
    prices: &[f64],
    realization: &Realization,
) -> Result<MatchResult, EvalError> {
    check_prices(inst, prices)?;
    let demand = &realization.demand;
    if demand.len() != inst.groups().len() {
        return Err(EvalError::RealizationLength { expected: inst.groups().len(), got: demand.len() });
    }
    for (g, &xi) in inst.groups().iter().zip(demand) {
        if g.demand.family == crate::demand::Family::Binomial && xi > u64::from(g.demand.count) {
            return Err(EvalError::ExceedsPopulation { group: g.id.clone(), value: xi, count: g.demand.count });
        }
    }
    let caps: Vec<f64> = demand.iter().map(|&d| d as f64).collect();
    let (net, edge_arcs) = matching_network(inst, prices, &caps, 1.0);
    let mut matched = vec![0u64; inst.edges().len()];
    if net.balance(0) == 0.0 {
        return Ok(MatchResult { profit: 0.0, matched });
    }
    let sol = solve_linear_mcf(&net)?;
    let mut profit = 0.0;
    for (e, arc) in edge_arcs.iter().enumerate() {
        if let Some(arc) = *arc {
            let units = sol.units[arc] as u64;
            matched[e] = units;
            profit += (prices[inst.edges()[e].group] + inst.edges()[e].weight) * units as f64;
        }
    }
    Ok(MatchResult { profit, matched })
}

/// Bipartite matching network with group capacities `caps`, rounded down to
/// the `delta` grid. Only edges with positive value get an arc; the
/// returned vector maps instance edges to arcs.
fn matching_network(
    inst: &MarketInstance,
    prices: &[f64],
    caps: &[f64],
    delta: f64,
) -> (FlowNetwork, Vec<Option<usize>>) {
    let mut net = FlowNetwork::new();
    let s = net.add_node("s");
    let us: Vec<usize> = inst.resources().iter().map(|r| net.add_node(r.id.clone())).collect();
    let vs: Vec<usize> = inst.groups().iter().map(|g| net.add_node(g.id.clone())).collect();
    let t = net.add_node("t");
    for (r, &u) in inst.resources().iter().zip(&us) {
        net.add_arc(s, u, f64::from(r.capacity), CostCurve::Zero);
    }
    let edge_arcs = inst
        .edges()
        .iter()
        .map(|e| {
            let value = prices[e.group] + e.weight;
            (value > 0.0).then(|| {
                let cap = f64::from(inst.resources()[e.resource].capacity).min(caps[e.group]);
                net.add_arc(us[e.resource], vs[e.group], cap, CostCurve::Linear { slope: -value })
            })
        })
        .collect();
    for (&cap, &v) in caps.iter().zip(&vs) {
        net.add_arc(v, t, cap, CostCurve::Zero);
    }
    let demand_units: i64 = caps.iter().map(|&c| crate::flow::grid_floor(c, delta)).sum();
    let capacity_units: i64 =
        inst.resources().iter().map(|r| crate::flow::grid_floor(f64::from(r.capacity), delta)).sum();
    let supply = demand_units.min(capacity_units) as f64 * delta;
    net.add_arc(s, t, supply, CostCurve::Zero);
    net.set_balance(s, supply);
    net.set_balance(t, -supply);
    (net, edge_arcs)
}

fn check_prices(inst: &MarketInstance, prices: &[f64]) -> Result<(), EvalError> {
    if prices.len() != inst.groups().len() {
        return Err(EvalError::PriceCount { expected: inst.groups().len(), got: prices.len() });
    }
    for (g, &x) in inst.groups().iter().zip(prices) {
        g.demand.mean_demand(x).map_err(|source| EvalError::Demand { group: g.id.clone(), source })?;
    }
    Ok(())
}

/// Surrogate objective at fixed prices, computed on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurrogateValue {
    pub value: f64,
    /// The exact value lies in `[value, value + tolerance]`.
    pub tolerance: f64,
    pub delta: f64,
}

/// Grid step used by [`fhat`]: a power of two, so integer capacities sit
/// exactly on the grid.
pub fn surrogate_delta(inst: &MarketInstance) -> f64 {
    let n = f64::from(inst.max_count().max(1));
    2f64.powi(n.log2().ceil() as i32 - SURROGATE_BITS)
}

/// Best fractional matching value when each group's capacity is its mean
/// demand at the given price.
pub fn fhat(inst: &MarketInstance, prices: &[f64]) -> Result<SurrogateValue, EvalError> {
    fhat_on_grid(inst, prices, surrogate_delta(inst))
}

pub fn fhat_on_grid(inst: &MarketInstance, prices: &[f64], delta: f64) -> Result<SurrogateValue, EvalError> {
    check_prices(inst, prices)?;
    let caps: Vec<f64> = inst
        .groups()
        .iter()
        .zip(prices)
        .map(|(g, &x)| g.demand.mean_demand(x).expect("price checked"))
        .collect();
    let (net, edge_arcs) = matching_network(inst, prices, &caps, delta);
    let top = inst.edges().iter().map(|e| (prices[e.group] + e.weight).max(0.0)).fold(0.0, f64::max);
    let tolerance = top * delta * (inst.resources().len() + inst.groups().len()) as f64;
    if net.balance(0) == 0.0 {
        return Ok(SurrogateValue { value: 0.0, tolerance, delta });
    }
    let sol = solve_convex_mcf(&net, delta)?;
    let value = inst
        .edges()
        .iter()
        .zip(&edge_arcs)
        .filter_map(|(e, arc)| arc.map(|a| (prices[e.group] + e.weight) * sol.flow(a)))
        .sum();
    Ok(SurrogateValue { value, tolerance, delta })
}

/// Monte Carlo estimate of the expected realized profit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub profits: Vec<f64>,
}

/// Averages the realized profit over `samples` independent demand draws.
/// Draw `i` uses its own stream of a generator seeded with `seed`, so the
/// result does not depend on thread scheduling.
pub fn estimate_expected_profit(
    inst: &MarketInstance,
    prices: &[f64],
    samples: usize,
    seed: u64,
) -> Result<SampleEstimate, EvalError> {
    check_prices(inst, prices)?;
    if samples == 0 {
        return Err(EvalError::NoSamples);
    }
    let profits: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let demand = inst
                .groups()
                .iter()
                .zip(prices)
                .map(|(g, &x)| g.demand.mass(x).sample(&mut rng))
                .collect();
            match_profit(inst, prices, &Realization { demand }).map(|m| m.profit)
        })
        .collect::<Result<_, _>>()?;
    let n = profits.len() as f64;
    let mean = profits.iter().sum::<f64>() / n;
    let stderr = if profits.len() > 1 {
        let var = profits.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(SampleEstimate { mean, stderr, profits })
}

/// Expected realized profit by enumerating joint demand outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactValue {
    /// Expectation over the enumerated outcomes; a lower bound on the full
    /// expectation when supports were truncated.
    pub value: f64,
    /// The full expectation is at most `value + truncation_bound`.
    pub truncation_bound: f64,
    pub outcomes: u64,
}

/// Enumerates every joint outcome of the realized demands. Poisson supports
/// are cut where the remaining tail mass is at most `eps`; fails when more
/// than `budget` outcomes would be needed.
pub fn exact_expected_profit(
    inst: &MarketInstance,
    prices: &[f64],
    eps: f64,
    budget: u64,
) -> Result<ExactValue, EvalError> {
    check_prices(inst, prices)?;
    let mut supports = Vec::with_capacity(prices.len());
    let mut kept = 1.0;
    for (g, &x) in inst.groups().iter().zip(prices) {
        let (masses, tail) = g.demand.mass(x).truncated_support(eps);
        kept *= 1.0 - tail;
        supports.push(masses);
    }
    let needed = supports.iter().try_fold(1u128, |acc, s| acc.checked_mul(s.len() as u128)).unwrap_or(u128::MAX);
    if needed > u128::from(budget) {
        return Err(EvalError::BudgetExceeded { needed, budget });
    }
    let terms: Vec<f64> = (0..needed as u64)
        .into_par_iter()
        .map(|mut idx| {
            let mut prob = 1.0;
            let mut demand = Vec::with_capacity(supports.len());
            for s in &supports {
                let k = idx % s.len() as u64;
                idx /= s.len() as u64;
                prob *= s[k as usize];
                demand.push(k);
            }
            if prob == 0.0 {
                return Ok(0.0);
            }
            match_profit(inst, prices, &Realization { demand }).map(|m| prob * m.profit)
        })
        .collect::<Result<_, _>>()?;
    let value = terms.iter().sum();
    let best_value = inst.edges().iter().map(|e| (prices[e.group] + e.weight).max(0.0)).fold(0.0, f64::max);
    let truncation_bound = (1.0 - kept).max(0.0) * inst.total_capacity() as f64 * best_value;
    Ok(ExactValue { value, truncation_bound, outcomes: needed as u64 })
}

/// Comparison of an expected profit against the surrogate bounds
/// `(1 - 1/e) fhat <= E <= fhat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundVerdict {
    pub fhat: f64,
    pub expected: f64,
    pub slack: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

impl BoundVerdict {
    pub fn new(surrogate: &SurrogateValue, expected: f64, extra_slack: f64) -> Self {
        let fhat = surrogate.value;
        let slack = surrogate.tolerance + extra_slack + 1e-9 * (1.0 + fhat.abs());
        let ratio = 1.0 - (-1f64).exp();
        Self {
            fhat,
            expected,
            slack,
            lower_ok: ratio * fhat - slack <= expected,
            upper_ok: expected <= fhat + slack,
        }
    }

    pub fn holds(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

/// Checks the surrogate bounds against the exact expected profit.
pub fn check_bounds(
    inst: &MarketInstance,
    prices: &[f64],
    eps: f64,
    budget: u64,
) -> Result<BoundVerdict, EvalError> {
    let surrogate = fhat(inst, prices)?;
    let exact = exact_expected_profit(inst, prices, eps, budget)?;
    Ok(BoundVerdict::new(&surrogate, exact.value, exact.truncation_bound))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub samples: usize,
    pub seed: u64,
    pub exact: bool,
    pub eps: f64,
    pub budget: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { samples: 100, seed: 0, exact: false, eps: DEFAULT_TAIL_EPS, budget: DEFAULT_OUTCOME_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub fhat: f64,
    pub fhat_tolerance: f64,
    pub expected_profit: f64,
    /// Standard error of the sample mean; zero for exact evaluation.
    pub stderr: f64,
    pub exact: bool,
    /// Number of samples or enumerated outcomes.
    pub evaluations: u64,
    pub truncation_bound: f64,
    pub bounds: BoundVerdict,
    #[serde(skip)]
    pub sample_profits: Vec<f64>,
}

/// Surrogate objective plus expected realized profit, with the bound check.
/// Sampled estimates widen the bound slack by three standard errors.
pub fn evaluate(inst: &MarketInstance, prices: &[f64], config: &EvalConfig) -> Result<EvalReport, EvalError> {
    let surrogate = fhat(inst, prices)?;
    if config.exact {
        let exact = exact_expected_profit(inst, prices, config.eps, config.budget)?;
        Ok(EvalReport {
            fhat: surrogate.value,
            fhat_tolerance: surrogate.tolerance,
            expected_profit: exact.value,
            stderr: 0.0,
            exact: true,
            evaluations: exact.outcomes,
            truncation_bound: exact.truncation_bound,
            bounds: BoundVerdict::new(&surrogate, exact.value, exact.truncation_bound),
            sample_profits: Vec::new(),
        })
    } else {
        let est = estimate_expected_profit(inst, prices, config.samples, config.seed)?;
        Ok(EvalReport {
            fhat: surrogate.value,
            fhat_tolerance: surrogate.tolerance,
            expected_profit: est.mean,
            stderr: est.stderr,
            exact: false,
            evaluations: config.samples as u64,
            truncation_bound: 0.0,
            bounds: BoundVerdict::new(&surrogate, est.mean, 3.0 * est.stderr),
            sample_profits: est.profits,
        })
    }
}

/// Writes one `sample,profit` row per draw.
pub fn write_sample_csv(profits: &[f64], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "sample,profit")?;
    for (i, p) in profits.iter().enumerate() {
        writeln!(out, "{i},{p:?}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{DemandModel, Family, PriceResponse};

    fn inst(w: &[(usize, usize, f64)], caps: &[i64], groups: usize) -> MarketInstance {
        let mut b = MarketInstance::builder();
        for (i, &c) in caps.iter().enumerate() {
            b = b.resource(format!("u{i}"), c);
        }
        for j in 0..groups {
            b = b.group(format!("v{j}"), DemandModel::new(Family::Binomial, 2, PriceResponse::Linear { q: 10.0 }));
        }
        for &(u, v, weight) in w {
            b = b.edge(format!("u{u}"), format!("v{v}"), weight);
        }
        b.build().unwrap()
    }

    #[test]
    fn matching_picks_best_pairs() {
        let m = inst(&[(0, 0, 1.0), (0, 1, 2.0), (1, 0, -10.5)], &[1, 1], 2);
        let r = match_profit(&m, &[10.0, 10.0], &Realization { demand: vec![2, 1] }).unwrap();
        assert_eq!(r.profit, 12.0);
        assert_eq!(r.matched, vec![0, 1, 0]);
    }

    #[test]
    fn matching_rejects_impossible_demand() {
        let m = inst(&[(0, 0, 1.0)], &[1], 1);
        let err = match_profit(&m, &[10.0], &Realization { demand: vec![3] }).unwrap_err();
        assert!(matches!(err, EvalError::ExceedsPopulation { .. }));
        let err = match_profit(&m, &[9.0], &Realization { demand: vec![1] }).unwrap_err();
        assert!(matches!(err, EvalError::Demand { .. }));
    }

    #[test]
    fn surrogate_of_single_edge() {
        // mean demand 2 (3 - x/5) at x = 12.5 is 1, capped by capacity 1
        let m = inst(&[(0, 0, -2.0)], &[2], 1);
        let s = fhat(&m, &[12.5]).unwrap();
        assert!((s.value - 10.5).abs() <= s.tolerance + 1e-12, "{s:?}");
        assert!(s.value <= 10.5 + 1e-12);
    }

    #[test]
    fn exact_matches_hand_computation() {
        // xi ~ Bin(2, 1/2), one unit of capacity: E = 0.75 (x + w)
        let m = inst(&[(0, 0, -2.0)], &[1], 1);
        let e = exact_expected_profit(&m, &[12.5], DEFAULT_TAIL_EPS, 100).unwrap();
        assert!((e.value - 0.75 * 10.5).abs() < 1e-12);
        assert_eq!(e.outcomes, 3);
        assert_eq!(e.truncation_bound, 0.0);
    }

    #[test]
    fn sampling_is_reproducible_and_close() {
        let m = inst(&[(0, 0, -2.0)], &[1], 1);
        let a = estimate_expected_profit(&m, &[12.5], 4000, 7).unwrap();
        let b = estimate_expected_profit(&m, &[12.5], 4000, 7).unwrap();
        assert_eq!(a, b);
        assert!((a.mean - 0.75 * 10.5).abs() < 4.0 * a.stderr + 1e-9, "{} ± {}", a.mean, a.stderr);
    }

    #[test]
    fn budget_is_enforced() {
        let m = inst(&[(0, 0, 1.0), (0, 1, 1.0)], &[1], 2);
        let err = exact_expected_profit(&m, &[11.0, 11.0], DEFAULT_TAIL_EPS, 8).unwrap_err();
        assert!(matches!(err, EvalError::BudgetExceeded { needed: 9, budget: 8 }));
    }

    #[test]
    fn bounds_hold_on_small_market() {
        let m = inst(&[(0, 0, -1.0), (0, 1, -1.5), (1, 1, -0.5)], &[1, 2], 2);
        let v = check_bounds(&m, &[12.0, 11.0], DEFAULT_TAIL_EPS, 100).unwrap();
        assert!(v.holds(), "{v:?}");
    }
}
