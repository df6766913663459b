use super::{grid_floor, ArcId, FlowError, FlowNetwork, FlowSolution, NodeId, SolverStats};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

/// Solves the network with every arc flow restricted to multiples of
/// `delta`, returning a grid flow of minimum total cost.
///
/// Capacities are rounded down to the grid and balances must already be
/// grid multiples. Arc costs must be convex; a decreasing marginal cost met
/// during the solve aborts with [`FlowError::NonConvexDetected`].
///
/// The solver runs capacity scaling: in the phase with step `K` every
/// residual move carries `K` units and costs the exact cost difference of
/// that move, so the last phase (`K = 1`) ends with no negative residual
/// cycle on the unit grid.
pub fn solve_convex_mcf(net: &FlowNetwork, delta: f64) -> Result<FlowSolution, FlowError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(FlowError::InvalidDelta(delta));
    }
    let mut solver = Scaler::new(net, delta)?;
    solver.run()?;
    Ok(solver.into_solution())
}

/// Integral min-cost flow for linear costs with integral capacities and
/// balances.
pub fn solve_linear_mcf(net: &FlowNetwork) -> Result<FlowSolution, FlowError> {
    for (a, arc) in net.arcs().iter().enumerate() {
        if !arc.cost.is_linear() {
            return Err(FlowError::NotLinear(a));
        }
        if arc.capacity.fract() != 0.0 {
            return Err(FlowError::NotIntegral(format!("capacity of arc {a}")));
        }
    }
    for (i, b) in net.balances().iter().enumerate() {
        if b.fract() != 0.0 {
            return Err(FlowError::NotIntegral(format!("balance of node {}", net.label(i))));
        }
    }
    solve_convex_mcf(net, 1.0)
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    node: NodeId,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Scaler<'a> {
    net: &'a FlowNetwork,
    delta: f64,
    cap: Vec<i64>,
    flow: Vec<i64>,
    excess: Vec<i64>,
    potential: Vec<f64>,
    // (arc, true) when the node is the arc's tail
    adjacency: Vec<Vec<(ArcId, bool)>>,
    tol: f64,
    convexity_tol: f64,
    stats: SolverStats,
}

impl<'a> Scaler<'a> {
    fn new(net: &'a FlowNetwork, delta: f64) -> Result<Self, FlowError> {
        let n = net.node_count();
        let mut cap = Vec::with_capacity(net.arc_count());
        let mut adjacency = vec![Vec::new(); n];
        for (a, arc) in net.arcs().iter().enumerate() {
            if !(arc.capacity.is_finite() && arc.capacity >= 0.0) {
                return Err(FlowError::BadCapacity(a));
            }
            cap.push(grid_floor(arc.capacity, delta));
            adjacency[arc.tail].push((a, true));
            adjacency[arc.head].push((a, false));
        }
        let mut excess = Vec::with_capacity(n);
        for (i, &b) in net.balances().iter().enumerate() {
            let units = b / delta;
            let rounded = units.round();
            if !units.is_finite() || (units - rounded).abs() > 1e-6 * rounded.abs().max(1.0) {
                return Err(FlowError::BalanceNotOnGrid { node: net.label(i).to_string(), value: b, delta });
            }
            excess.push(rounded as i64);
        }
        let total: i64 = excess.iter().sum();
        if total != 0 {
            return Err(FlowError::Unbalanced(total));
        }

        let mut scale = 0.0f64;
        for (a, arc) in net.arcs().iter().enumerate() {
            let c = &arc.cost;
            let top = cap[a] as f64 * delta;
            scale = scale
                .max(c.eval(top).abs())
                .max((c.eval(delta)).abs())
                .max((c.eval(top) - c.eval((top - delta).max(0.0))).abs());
        }
        let scale = scale.max(f64::MIN_POSITIVE);
        let solver = Self {
            net,
            delta,
            flow: vec![0; cap.len()],
            cap,
            excess,
            potential: vec![0.0; n],
            adjacency,
            tol: 1e-12 * scale,
            convexity_tol: 1e-9 * scale,
            stats: SolverStats::default(),
        };
        for arc in 0..solver.cap.len() {
            solver.check_sampled_convexity(arc)?;
        }
        Ok(solver)
    }

    /// Secant slopes between a few dozen sampled grid levels must not
    /// decrease. The on-the-fly check in `move_cost` covers the levels the
    /// solver actually visits.
    fn check_sampled_convexity(&self, arc: ArcId) -> Result<(), FlowError> {
        const SAMPLES: i64 = 64;
        let cap = self.cap[arc];
        let mut levels: Vec<i64> = (0..=SAMPLES).map(|i| i * cap / SAMPLES).collect();
        levels.extend([1.min(cap), (cap - 1).max(0)]);
        levels.sort_unstable();
        levels.dedup();
        let mut prev: Option<f64> = None;
        for w in levels.windows(2) {
            let slope = (self.cost_at(arc, w[1]) - self.cost_at(arc, w[0])) / (w[1] - w[0]) as f64;
            if let Some(p) = prev {
                if slope < p - self.convexity_tol {
                    return Err(FlowError::NonConvexDetected {
                        arc,
                        level: w[0] as f64 * self.delta,
                        before: p,
                        after: slope,
                    });
                }
            }
            prev = Some(slope);
        }
        Ok(())
    }

    fn cost_at(&self, arc: ArcId, units: i64) -> f64 {
        self.net.arcs()[arc].cost.eval(units as f64 * self.delta)
    }

    /// Cost per unit of moving `step` units along the residual copy of `arc`,
    /// or `None` if the move does not fit. Per-unit costs keep node
    /// potentials meaningful from one phase to the next. Also checks that the
    /// forward marginal is not below the backward one at the current level.
    fn move_cost(&self, arc: ArcId, forward: bool, step: i64) -> Result<Option<f64>, FlowError> {
        let f = self.flow[arc];
        let here = self.cost_at(arc, f);
        let up = (f + step <= self.cap[arc]).then(|| self.cost_at(arc, f + step) - here);
        let down = (f - step >= 0).then(|| self.cost_at(arc, f - step) - here);
        if let (Some(u), Some(d)) = (up, down) {
            // convexity: g(f+K) - g(f) >= g(f) - g(f-K)
            if u < -d - self.convexity_tol {
                return Err(FlowError::NonConvexDetected {
                    arc,
                    level: f as f64 * self.delta,
                    before: -d,
                    after: u,
                });
            }
        }
        let per_unit = 1.0 / step as f64;
        Ok(if forward { up } else { down }.map(|c| c * per_unit))
    }

    fn reduced(&self, arc: ArcId, forward: bool, cost: f64) -> f64 {
        let a = &self.net.arcs()[arc];
        let (from, to) = if forward { (a.tail, a.head) } else { (a.head, a.tail) };
        cost + self.potential[from] - self.potential[to]
    }

    fn push(&mut self, arc: ArcId, forward: bool, step: i64) {
        let a = &self.net.arcs()[arc];
        let (from, to) = if forward { (a.tail, a.head) } else { (a.head, a.tail) };
        self.flow[arc] += if forward { step } else { -step };
        self.excess[from] -= step;
        self.excess[to] += step;
    }

    fn run(&mut self) -> Result<(), FlowError> {
        let largest = self
            .cap
            .iter()
            .chain(self.excess.iter())
            .map(|v| v.abs())
            .max()
            .unwrap_or(0)
            .max(1);
        let mut step = 1i64 << (63 - largest.leading_zeros() as i64);
        self.stats.initial_scale = step;
        loop {
            self.stats.phases += 1;
            self.saturate_negative(step)?;
            while self.augment(step)? {}
            if step == 1 {
                break;
            }
            step /= 2;
        }
        if self.excess.iter().any(|&e| e != 0) {
            return Err(self.infeasibility());
        }
        Ok(())
    }

    /// Moves `step` units along every residual arc whose reduced cost is
    /// negative until none is left.
    fn saturate_negative(&mut self, step: i64) -> Result<(), FlowError> {
        for arc in 0..self.cap.len() {
            for forward in [true, false] {
                while let Some(c) = self.move_cost(arc, forward, step)? {
                    if self.reduced(arc, forward, c) * step as f64 >= -self.tol {
                        break;
                    }
                    self.push(arc, forward, step);
                    self.stats.saturating_pushes += 1;
                }
            }
        }
        Ok(())
    }

    /// One shortest-path augmentation of `step` units from the set of nodes
    /// with excess at least `step` to the nearest node with deficit at least
    /// `step`. Returns false when no such pair is connected.
    fn augment(&mut self, step: i64) -> Result<bool, FlowError> {
        let n = self.net.node_count();
        if !self.excess.iter().any(|&e| e >= step) || !self.excess.iter().any(|&e| e <= -step) {
            return Ok(false);
        }
        self.stats.shortest_path_runs += 1;
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        let mut pred: Vec<Option<(ArcId, bool)>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        for (i, &e) in self.excess.iter().enumerate() {
            if e >= step {
                dist[i] = 0.0;
                heap.push(HeapItem { dist: 0.0, node: i });
            }
        }
        let mut target = None;
        while let Some(HeapItem { dist: d, node: i }) = heap.pop() {
            if done[i] || d > dist[i] {
                continue;
            }
            done[i] = true;
            if self.excess[i] <= -step {
                target = Some(i);
                break;
            }
            for k in 0..self.adjacency[i].len() {
                let (arc, at_tail) = self.adjacency[i][k];
                let Some(c) = self.move_cost(arc, at_tail, step)? else {
                    continue;
                };
                let a = &self.net.arcs()[arc];
                let j = if at_tail { a.head } else { a.tail };
                if done[j] {
                    continue;
                }
                let nd = d + self.reduced(arc, at_tail, c).max(0.0);
                if nd < dist[j] {
                    dist[j] = nd;
                    pred[j] = Some((arc, at_tail));
                    heap.push(HeapItem { dist: nd, node: j });
                }
            }
        }
        let Some(t) = target else {
            return Ok(false);
        };
        let dt = dist[t];
        for (p, &d) in self.potential.iter_mut().zip(&dist) {
            *p += d.min(dt);
        }
        let mut node = t;
        while let Some((arc, forward)) = pred[node] {
            self.push(arc, forward, step);
            let a = &self.net.arcs()[arc];
            node = if forward { a.tail } else { a.head };
        }
        self.stats.augmentations += 1;
        Ok(true)
    }

    fn infeasibility(&self) -> FlowError {
        let n = self.net.node_count();
        let mut seen = vec![false; n];
        let mut queue: VecDeque<NodeId> = (0..n).filter(|&i| self.excess[i] > 0).collect();
        for &i in &queue {
            seen[i] = true;
        }
        while let Some(i) = queue.pop_front() {
            for &(arc, at_tail) in &self.adjacency[i] {
                let a = &self.net.arcs()[arc];
                let (open, j) = if at_tail {
                    (self.flow[arc] < self.cap[arc], a.head)
                } else {
                    (self.flow[arc] > 0, a.tail)
                };
                if open && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        let unmet: i64 = self.excess.iter().filter(|&&e| e > 0).sum();
        FlowError::Infeasible {
            unmet: unmet as f64 * self.delta,
            cut: (0..n).filter(|&i| seen[i]).map(|i| self.net.label(i).to_string()).collect(),
        }
    }

    fn into_solution(self) -> FlowSolution {
        let objective = (0..self.flow.len()).map(|a| self.cost_at(a, self.flow[a])).sum();
        FlowSolution { units: self.flow, delta: self.delta, objective, stats: self.stats }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{CostCurve, PiecewiseLinear};

    fn two_node() -> (FlowNetwork, NodeId, NodeId) {
        let mut net = FlowNetwork::new();
        let s = net.add_node("s");
        let t = net.add_node("t");
        (net, s, t)
    }

    #[test]
    fn forced_single_arc() {
        let (mut net, s, t) = two_node();
        net.add_arc(s, t, 1.0, CostCurve::Quadratic { quad: 1.0, lin: 0.0 });
        net.set_balance(s, 1.0);
        net.set_balance(t, -1.0);
        let sol = solve_convex_mcf(&net, 0.25).unwrap();
        assert_eq!(sol.units, vec![4]);
        assert_eq!(sol.objective, 1.0);
    }

    #[test]
    fn parallel_arcs_match_enumeration() {
        let (mut net, s, t) = two_node();
        net.add_arc(s, t, 2.0, CostCurve::Quadratic { quad: 1.0, lin: 0.0 });
        net.add_arc(s, t, 2.0, CostCurve::Linear { slope: 2.0 });
        net.set_balance(s, 2.0);
        net.set_balance(t, -2.0);
        let delta = 0.5;
        let sol = solve_convex_mcf(&net, delta).unwrap();
        // all 25 grid points (y1, y2) in [0, 4]^2, keeping those that carry 4 units
        let mut best = f64::INFINITY;
        for y1 in 0..=4 {
            for y2 in 0..=4 {
                if y1 + y2 == 4 {
                    let z1 = y1 as f64 * delta;
                    let z2 = y2 as f64 * delta;
                    best = best.min(z1 * z1 + 2.0 * z2);
                }
            }
        }
        assert_eq!(sol.objective, best);
        assert_eq!(best, 3.0);
    }

    #[test]
    fn zero_costs_give_zero_objective() {
        let mut net = FlowNetwork::new();
        let nodes: Vec<_> = (0..4).map(|i| net.add_node(format!("n{i}"))).collect();
        net.add_arc(nodes[0], nodes[1], 3.0, CostCurve::Zero);
        net.add_arc(nodes[1], nodes[3], 3.0, CostCurve::Zero);
        net.add_arc(nodes[0], nodes[2], 3.0, CostCurve::Zero);
        net.add_arc(nodes[2], nodes[3], 3.0, CostCurve::Zero);
        net.set_balance(nodes[0], 4.0);
        net.set_balance(nodes[3], -4.0);
        let sol = solve_linear_mcf(&net).unwrap();
        assert_eq!(sol.objective, 0.0);
        let out = sol.net_outflow_units(&net);
        assert_eq!(out, vec![4, 0, 0, -4]);
    }

    #[test]
    fn assignment_two_by_two() {
        let mut net = FlowNetwork::new();
        let s = net.add_node("s");
        let u = [net.add_node("u1"), net.add_node("u2")];
        let v = [net.add_node("v1"), net.add_node("v2")];
        let t = net.add_node("t");
        let costs = [[-5.0, -3.0], [-4.0, -6.0]];
        for i in 0..2 {
            net.add_arc(s, u[i], 1.0, CostCurve::Zero);
            net.add_arc(v[i], t, 1.0, CostCurve::Zero);
            for j in 0..2 {
                net.add_arc(u[i], v[j], 1.0, CostCurve::Linear { slope: costs[i][j] });
            }
        }
        net.add_arc(s, t, 2.0, CostCurve::Zero);
        net.set_balance(s, 2.0);
        net.set_balance(t, -2.0);
        let sol = solve_linear_mcf(&net).unwrap();
        assert_eq!(sol.objective, -11.0);
    }

    #[test]
    fn costly_arcs_left_empty_with_free_bypass() {
        let (mut net, s, t) = two_node();
        let mid = net.add_node("m");
        let a = net.add_arc(s, mid, 5.0, CostCurve::Linear { slope: 1.0 });
        let b = net.add_arc(mid, t, 5.0, CostCurve::Linear { slope: 2.0 });
        net.add_arc(s, t, 5.0, CostCurve::Zero);
        net.set_balance(s, 5.0);
        net.set_balance(t, -5.0);
        let sol = solve_linear_mcf(&net).unwrap();
        assert_eq!((sol.units[a], sol.units[b], sol.objective), (0, 0, 0.0));
    }

    #[test]
    fn negative_first_increment_is_saturated() {
        let (mut net, s, t) = two_node();
        // cycle s -> t -> s with profitable forward arc
        let st = net.add_arc(s, t, 3.0, CostCurve::Piecewise(PiecewiseLinear::from_slopes(1.0, &[-4.0, -1.0, 2.0]).unwrap()));
        let ts = net.add_arc(t, s, 3.0, CostCurve::Linear { slope: 1.0 });
        let sol = solve_convex_mcf(&net, 1.0).unwrap();
        assert_eq!((sol.units[st], sol.units[ts]), (2, 2));
        assert_eq!(sol.objective, -5.0 + 2.0);
    }

    #[test]
    fn infeasible_reports_cut() {
        let (mut net, s, t) = two_node();
        net.add_arc(s, t, 1.0, CostCurve::Zero);
        net.set_balance(s, 2.0);
        net.set_balance(t, -2.0);
        match solve_linear_mcf(&net) {
            Err(FlowError::Infeasible { unmet, cut }) => {
                assert_eq!(unmet, 1.0);
                assert_eq!(cut, vec!["s".to_string()]);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn concave_cost_is_rejected() {
        let (mut net, s, t) = two_node();
        net.add_arc(s, t, 4.0, CostCurve::Quadratic { quad: -1.0, lin: 0.0 });
        net.add_arc(s, t, 4.0, CostCurve::Linear { slope: -3.0 });
        net.set_balance(s, 4.0);
        net.set_balance(t, -4.0);
        assert!(matches!(solve_convex_mcf(&net, 1.0), Err(FlowError::NonConvexDetected { .. })));
    }

    #[test]
    fn rejects_bad_inputs() {
        let (mut net, s, t) = two_node();
        net.add_arc(s, t, 1.0, CostCurve::Zero);
        net.set_balance(s, 0.3);
        net.set_balance(t, -0.3);
        assert!(matches!(solve_convex_mcf(&net, 0.25), Err(FlowError::BalanceNotOnGrid { .. })));
        assert!(matches!(solve_convex_mcf(&net, 0.0), Err(FlowError::InvalidDelta(_))));
        net.set_balance(t, 0.0);
        assert!(matches!(solve_convex_mcf(&net, 0.1), Err(FlowError::Unbalanced(3))));
        let mut q = FlowNetwork::new();
        let a = q.add_node("a");
        let b = q.add_node("b");
        q.add_arc(a, b, 1.0, CostCurve::Quadratic { quad: 1.0, lin: 0.0 });
        assert!(matches!(solve_linear_mcf(&q), Err(FlowError::NotLinear(0))));
    }

    #[test]
    fn large_capacities_take_few_phases() {
        let (mut net, s, t) = two_node();
        net.add_arc(s, t, 1.0, CostCurve::Quadratic { quad: 1.0, lin: -1.0 });
        net.add_arc(s, t, 1.0, CostCurve::Zero);
        net.set_balance(s, 1.0);
        net.set_balance(t, -1.0);
        let delta = 1.0 / 1_048_576.0;
        let sol = solve_convex_mcf(&net, delta).unwrap();
        // z^2 - z is minimized at z = 1/2
        assert!((sol.flow(0) - 0.5).abs() <= delta);
        assert!(sol.stats.phases <= 22);
        assert!(sol.stats.augmentations < 200);
    }
}
