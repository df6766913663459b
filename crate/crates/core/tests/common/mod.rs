//! Independent oracles shared by the integration tests: brute-force flow
//! and matching enumeration, a Bellman-Ford residual check, and direct
//! probability mass formulas.

#![allow(dead_code)]

use priceflow::demand::{DemandModel, Family, PriceResponse};
use priceflow::flow::{CostCurve, FlowNetwork, PiecewiseLinear};
use priceflow::instance::MarketInstance;
use rand::Rng;
use std::collections::HashMap;

/// Test-side description of a flow network on a unit grid of size `delta`.
#[derive(Debug, Clone)]
pub struct NetSpec {
    pub nodes: usize,
    /// Balance of each node in grid units.
    pub balance: Vec<i64>,
    pub arcs: Vec<ArcSpec>,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct ArcSpec {
    pub tail: usize,
    pub head: usize,
    /// Nondecreasing cost slope of each unit step; its length is the
    /// capacity in units.
    pub slopes: Vec<i64>,
}

impl ArcSpec {
    /// Cost of `units` grid units, summed step by step.
    pub fn cost(&self, units: i64, delta: f64) -> f64 {
        self.slopes[..units as usize].iter().map(|&s| s as f64 * delta).sum()
    }
}

impl NetSpec {
    pub fn random(rng: &mut impl Rng) -> Self {
        let nodes = rng.random_range(2..=5);
        let n_arcs = rng.random_range(1..=8);
        let delta = [1.0, 0.5, 0.25, 0.125][rng.random_range(0..4)];
        let mut arcs = Vec::with_capacity(n_arcs);
        for _ in 0..n_arcs {
            let tail = rng.random_range(0..nodes);
            let mut head = rng.random_range(0..nodes - 1);
            if head >= tail {
                head += 1;
            }
            let levels = rng.random_range(0..=5);
            let mut slopes: Vec<i64> = (0..levels).map(|_| rng.random_range(-6..=6)).collect();
            slopes.sort_unstable();
            arcs.push(ArcSpec { tail, head, slopes });
        }
        // balances drawn from a random feasible flow most of the time, so
        // most networks are feasible but some are not
        let mut balance = vec![0i64; nodes];
        for a in &arcs {
            let f = rng.random_range(0..=a.slopes.len() as i64);
            balance[a.tail] += f;
            balance[a.head] -= f;
        }
        if rng.random_bool(0.15) {
            let i = rng.random_range(0..nodes);
            let j = (i + 1) % nodes;
            balance[i] += 1;
            balance[j] -= 1;
        }
        Self { nodes, balance, arcs, delta }
    }

    pub fn network(&self) -> FlowNetwork {
        let mut net = FlowNetwork::new();
        for i in 0..self.nodes {
            net.add_node(format!("n{i}"));
        }
        for a in &self.arcs {
            let cost = if a.slopes.is_empty() {
                CostCurve::Zero
            } else {
                let slopes: Vec<f64> = a.slopes.iter().map(|&s| s as f64).collect();
                CostCurve::Piecewise(PiecewiseLinear::from_slopes(self.delta, &slopes).unwrap())
            };
            net.add_arc(a.tail, a.head, a.slopes.len() as f64 * self.delta, cost);
        }
        for (i, &b) in self.balance.iter().enumerate() {
            net.set_balance(i, b as f64 * self.delta);
        }
        net
    }

    /// Minimum cost over every grid flow meeting the balances, by
    /// enumeration with node-conservation pruning.
    pub fn brute_force(&self) -> Option<(f64, Vec<i64>)> {
        let mut last_touch = vec![None; self.nodes];
        for (i, a) in self.arcs.iter().enumerate() {
            last_touch[a.tail] = Some(i);
            last_touch[a.head] = Some(i);
        }
        if (0..self.nodes).any(|v| last_touch[v].is_none() && self.balance[v] != 0) {
            return None;
        }
        let mut best: Option<(f64, Vec<i64>)> = None;
        let mut flow = vec![0i64; self.arcs.len()];
        let mut net = vec![0i64; self.nodes];
        self.search(0, &mut flow, &mut net, &last_touch, &mut best);
        best
    }

    fn search(
        &self,
        i: usize,
        flow: &mut Vec<i64>,
        net: &mut Vec<i64>,
        last_touch: &[Option<usize>],
        best: &mut Option<(f64, Vec<i64>)>,
    ) {
        if i == self.arcs.len() {
            let cost: f64 = self.arcs.iter().zip(flow.iter()).map(|(a, &f)| a.cost(f, self.delta)).sum();
            if best.as_ref().is_none_or(|b| cost < b.0) {
                *best = Some((cost, flow.clone()));
            }
            return;
        }
        let a = &self.arcs[i];
        for f in 0..=a.slopes.len() as i64 {
            flow[i] = f;
            net[a.tail] += f;
            net[a.head] -= f;
            let closed = [a.tail, a.head]
                .iter()
                .all(|&v| last_touch[v] != Some(i) || net[v] == self.balance[v]);
            if closed {
                self.search(i + 1, flow, net, last_touch, best);
            }
            net[a.tail] -= f;
            net[a.head] += f;
        }
        flow[i] = 0;
    }

    /// Whether the residual graph of `flow` has a cycle of unit moves with
    /// total cost below `-tol`, by Bellman-Ford from a virtual root.
    pub fn has_negative_cycle(&self, flow: &[i64], tol: f64) -> bool {
        let mut edges = Vec::new();
        for (a, &f) in self.arcs.iter().zip(flow) {
            let here = a.cost(f, self.delta);
            if f < a.slopes.len() as i64 {
                edges.push((a.tail, a.head, a.cost(f + 1, self.delta) - here));
            }
            if f > 0 {
                edges.push((a.head, a.tail, a.cost(f - 1, self.delta) - here));
            }
        }
        let mut dist = vec![0.0f64; self.nodes];
        for _ in 0..self.nodes {
            let mut changed = false;
            for &(u, v, c) in &edges {
                if dist[u] + c < dist[v] - tol {
                    dist[v] = dist[u] + c;
                    changed = true;
                }
            }
            if !changed {
                return false;
            }
        }
        true
    }

    pub fn cost_scale(&self) -> f64 {
        self.arcs
            .iter()
            .flat_map(|a| a.slopes.iter())
            .map(|&s| (s as f64 * self.delta).abs())
            .fold(1.0, f64::max)
    }
}

/// `P(xi = k)` straight from the closed-form mass functions.
pub fn pmf(family: Family, n: u32, p: f64, k: u64) -> f64 {
    match family {
        Family::Binomial => {
            if k > u64::from(n) {
                return 0.0;
            }
            let mut choose = 1.0;
            for i in 0..k {
                choose *= (u64::from(n) - i) as f64 / (i + 1) as f64;
            }
            choose * p.powi(k as i32) * (1.0 - p).powi((u64::from(n) - k) as i32)
        }
        Family::Poisson => {
            let lambda = f64::from(n) * p;
            let mut fact = 1.0;
            for i in 1..=k {
                fact *= i as f64;
            }
            (-lambda).exp() * lambda.powi(k as i32) / fact
        }
    }
}

/// Expected matching value by enumeration with the closed-form masses.
/// Poisson supports run until the remaining tail is below `tail`. Returns
/// the value and the probability mass covered.
pub fn brute_force_expectation(inst: &MarketInstance, prices: &[f64], tail: f64) -> (f64, f64) {
    let groups = inst.groups();
    let supports: Vec<Vec<f64>> = groups
        .iter()
        .zip(prices)
        .map(|(g, &x)| {
            let p = g.demand.acceptance(x);
            let mut masses = Vec::new();
            let mut total = 0.0;
            for k in 0..200u64 {
                let m = pmf(g.demand.family, g.demand.count, p, k);
                masses.push(m);
                total += m;
                let done = match g.demand.family {
                    Family::Binomial => k >= u64::from(g.demand.count),
                    Family::Poisson => 1.0 - total <= tail,
                };
                if done {
                    break;
                }
            }
            masses
        })
        .collect();
    // demand above what a group's neighbours can serve never matters
    let reach: Vec<u64> = (0..groups.len())
        .map(|v| inst.group_edges(v).iter().map(|&e| u64::from(inst.resources()[inst.edges()[e].resource].capacity)).sum())
        .collect();
    let mut memo: HashMap<Vec<u64>, f64> = HashMap::new();
    let mut idx = vec![0usize; groups.len()];
    let mut total = 0.0;
    let mut covered = 0.0;
    loop {
        let prob: f64 = idx.iter().zip(&supports).map(|(&k, s)| s[k]).product();
        let demand: Vec<u64> = idx.iter().zip(&reach).map(|(&k, &r)| (k as u64).min(r)).collect();
        if prob > 0.0 {
            let value = *memo.entry(demand).or_insert_with_key(|d| best_matching_any(inst, prices, d));
            total += prob * value;
        }
        covered += prob;
        let mut i = 0;
        loop {
            if i == idx.len() {
                return (total, covered);
            }
            idx[i] += 1;
            if idx[i] < supports[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Brute-force matching for arbitrary demands: multiplicities range up to
/// the smaller endpoint capacity of each edge.
pub fn best_matching_any(inst: &MarketInstance, prices: &[f64], demand: &[u64]) -> f64 {
    let edges = inst.edges();
    let caps: Vec<u64> = inst.resources().iter().map(|r| u64::from(r.capacity)).collect();
    let limits: Vec<u64> = edges.iter().map(|e| caps[e.resource].min(demand[e.group])).collect();
    let mut best = 0.0f64;
    let mut z = vec![0u64; edges.len()];
    loop {
        let mut used_u = vec![0u64; caps.len()];
        let mut used_v = vec![0u64; demand.len()];
        let mut value = 0.0;
        for (e, &k) in edges.iter().zip(&z) {
            used_u[e.resource] += k;
            used_v[e.group] += k;
            value += (prices[e.group] + e.weight) * k as f64;
        }
        let ok = used_u.iter().zip(&caps).all(|(a, b)| a <= b) && used_v.iter().zip(demand).all(|(a, b)| a <= b);
        if ok && value > best {
            best = value;
        }
        let mut i = 0;
        loop {
            if i == z.len() {
                return best;
            }
            z[i] += 1;
            if z[i] <= limits[i] {
                break;
            }
            z[i] = 0;
            i += 1;
        }
    }
}

pub fn linear(family: Family, n: u32, q: f64) -> DemandModel {
    DemandModel::new(family, n, PriceResponse::Linear { q })
}

pub fn logistic(family: Family, n: u32, q: f64, beta: f64, gamma: f64) -> DemandModel {
    DemandModel::new(family, n, PriceResponse::Logistic { q, beta, gamma })
}

/// Random price inside the part of the group's domain where demand moves.
pub fn random_price(model: &DemandModel, rng: &mut impl Rng) -> f64 {
    let (a, b) = model.response.window_with_tail(&model.domain, 1e-3);
    rng.random_range(a..=b)
}
