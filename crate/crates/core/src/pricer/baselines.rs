//! Reference pricing methods: one common price for every group (plain and
//! capacity-capped), and a search over per-group price grids.

use super::{PriceAssignment, PricingError};
use crate::demand::{DemandModel, PriceStatus};
use crate::eval::fhat;
use crate::instance::MarketInstance;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Acceptance tail cut off when an unbounded price domain is searched.
const SEARCH_TAIL: f64 = 1e-4;
const SCAN_POINTS: usize = 256;
const MAX_SWEEPS: usize = 50;

/// Average edge weight, the per-match value a common price is added to.
pub fn mean_weight(inst: &MarketInstance) -> f64 {
    let edges = inst.edges();
    if edges.is_empty() {
        return 0.0;
    }
    edges.iter().map(|e| e.weight).sum::<f64>() / edges.len() as f64
}

/// Total mean demand when every group is offered price `x`. Outside a
/// group's domain its acceptance is held at the nearest end's value.
pub fn aggregate_demand(inst: &MarketInstance, x: f64) -> f64 {
    inst.groups()
        .iter()
        .map(|g| f64::from(g.demand.count) * g.demand.acceptance(g.demand.domain.clamp(x)))
        .sum()
}

/// Single price maximizing `(x + w̄) D(x)`, where `w̄` is the mean edge
/// weight and `D` the aggregate demand.
pub fn price_mrp(inst: &MarketInstance) -> Result<PriceAssignment, PricingError> {
    let w = mean_weight(inst);
    common_price(inst, "mrp", |x| (x + w) * aggregate_demand(inst, x))
}

/// Single price maximizing `(x + w̄) min(total capacity, D(x))`.
pub fn price_capped_mrp(inst: &MarketInstance) -> Result<PriceAssignment, PricingError> {
    let w = mean_weight(inst);
    let cap = inst.total_capacity() as f64;
    common_price(inst, "capped mrp", |x| (x + w) * aggregate_demand(inst, x).min(cap))
}

fn common_price(
    inst: &MarketInstance,
    name: &str,
    objective: impl Fn(f64) -> f64,
) -> Result<PriceAssignment, PricingError> {
    if inst.groups().is_empty() {
        return Err(PricingError::EmptyMarket);
    }
    let mut breaks: Vec<f64> = Vec::new();
    for g in inst.groups() {
        let (a, b) = search_window(&g.demand);
        breaks.extend([a, b]);
        breaks.extend(g.demand.domain.lo);
        breaks.extend(g.demand.domain.hi);
    }
    let lo = breaks.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = breaks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    breaks.retain(|b| (lo..=hi).contains(b));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let x = maximize_piecewise(&objective, &breaks);
    log::debug!("{name}: common price {x}, objective {}", objective(x));

    let mut prices = Vec::with_capacity(inst.groups().len());
    let mut statuses = Vec::with_capacity(inst.groups().len());
    let mut projected = 0;
    for g in inst.groups() {
        let d = &g.demand;
        let xv = d.domain.clamp(x);
        let status = if x < d.domain.lower() {
            PriceStatus::ClampedCeiling
        } else if x > d.domain.upper() || f64::from(d.count) * d.acceptance(xv) < d.demand_floor() {
            PriceStatus::MarketClosed
        } else {
            PriceStatus::Interior
        };
        if xv != x {
            projected += 1;
        }
        prices.push(xv);
        statuses.push(status);
    }
    let mut notes = vec![format!("{name} common price {x}")];
    if projected > 0 {
        notes.push(format!("common price projected into {projected} group domain(s)"));
    }
    let value = fhat(inst, &prices)?.value;
    Ok(PriceAssignment { prices, statuses, fhat: value, flow: None, notes })
}

/// Finite stretch of prices worth searching for one group.
fn search_window(d: &DemandModel) -> (f64, f64) {
    d.response.window_with_tail(&d.domain, SEARCH_TAIL)
}

/// Maximizes `f` over `[breaks[0], breaks.last()]`, treating each stretch
/// between consecutive breakpoints separately: a uniform scan locates the
/// best bracket, golden-section search refines it, and every breakpoint is
/// also tried.
fn maximize_piecewise(f: &impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    let mut best = (breaks[0], f(breaks[0]));
    let consider = |x: f64, best: &mut (f64, f64)| {
        let v = f(x);
        if v > best.1 {
            *best = (x, v);
        }
    };
    for piece in breaks.windows(2) {
        let (a, b) = (piece[0], piece[1]);
        consider(b, &mut best);
        let step = (b - a) / SCAN_POINTS as f64;
        let mut arg = 0;
        let mut top = f64::NEG_INFINITY;
        for i in 0..=SCAN_POINTS {
            let v = f(a + step * i as f64);
            if v > top {
                top = v;
                arg = i;
            }
        }
        let lo = a + step * arg.saturating_sub(1) as f64;
        let hi = (a + step * (arg + 1) as f64).min(b);
        consider(golden_section(f, lo, hi), &mut best);
        consider(a + step * arg as f64, &mut best);
    }
    best.0
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let tol = 1e-12 * (a.abs() + b.abs()).max(1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Exhaustive when the product grid fits the budget, coordinate ascent
    /// otherwise.
    Auto,
    Exhaustive,
    Coordinate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSearchConfig {
    pub points_per_group: usize,
    /// Largest number of price vectors an exhaustive search may evaluate.
    pub budget: u64,
    pub mode: SearchMode,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        Self { points_per_group: 9, budget: 100_000, mode: SearchMode::Auto }
    }
}

/// Best price vector over a per-group grid, scored by the surrogate
/// objective at those prices.
pub fn price_grid_search(inst: &MarketInstance, config: &GridSearchConfig) -> Result<PriceAssignment, PricingError> {
    if inst.groups().is_empty() {
        return Err(PricingError::EmptyMarket);
    }
    let k = config.points_per_group.max(1);
    let grids: Vec<Vec<f64>> = inst
        .groups()
        .iter()
        .map(|g| {
            let (a, b) = search_window(&g.demand);
            if k == 1 {
                vec![0.5 * (a + b)]
            } else {
                (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
            }
        })
        .collect();
    let total = (k as u128).checked_pow(grids.len() as u32).unwrap_or(u128::MAX);
    let exhaustive = match config.mode {
        SearchMode::Exhaustive if total > u128::from(config.budget) => {
            return Err(PricingError::BudgetExceeded { needed: total, budget: config.budget })
        }
        SearchMode::Exhaustive => true,
        SearchMode::Coordinate => false,
        SearchMode::Auto => total <= u128::from(config.budget),
    };
    let score = |prices: &[f64]| -> Result<f64, PricingError> {
        Ok(fhat(inst, prices)?.value)
    };

    let (prices, value, note) = if exhaustive {
        let values: Vec<f64> = (0..total as u64)
            .into_par_iter()
            .map(|idx| score(&decode(idx, &grids)))
            .collect::<Result<_, _>>()?;
        let (best, &value) = values
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc });
        (decode(best as u64, &grids), value, format!("exhaustive search over {total} price vectors"))
    } else {
        let mut choice = vec![k / 2; grids.len()];
        let mut current: Vec<f64> = choice.iter().zip(&grids).map(|(&i, g)| g[i]).collect();
        let mut value = score(&current)?;
        let mut sweeps = 0;
        loop {
            sweeps += 1;
            let mut improved = false;
            for v in 0..grids.len() {
                let trials: Vec<f64> = (0..k)
                    .into_par_iter()
                    .map(|i| {
                        let mut p = current.clone();
                        p[v] = grids[v][i];
                        score(&p)
                    })
                    .collect::<Result<_, _>>()?;
                for (i, &t) in trials.iter().enumerate() {
                    if t > value + 1e-12 * value.abs().max(1.0) {
                        value = t;
                        choice[v] = i;
                        improved = true;
                    }
                }
                current[v] = grids[v][choice[v]];
            }
            if !improved || sweeps >= MAX_SWEEPS {
                break;
            }
        }
        (current, value, format!("coordinate ascent, {sweeps} sweep(s)"))
    };

    let statuses = inst
        .groups()
        .iter()
        .zip(&prices)
        .map(|(g, &x)| {
            let d = &g.demand;
            if f64::from(d.count) * d.acceptance(x) < d.demand_floor() {
                PriceStatus::MarketClosed
            } else {
                PriceStatus::Interior
            }
        })
        .collect();
    Ok(PriceAssignment { prices, statuses, fhat: value, flow: None, notes: vec![note] })
}

fn decode(mut idx: u64, grids: &[Vec<f64>]) -> Vec<f64> {
    grids
        .iter()
        .map(|g| {
            let k = g.len() as u64;
            let x = g[(idx % k) as usize];
            idx /= k;
            x
        })
        .collect()
}
