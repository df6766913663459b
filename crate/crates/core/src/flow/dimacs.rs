//! DIMACS-like text dumps for debugging. Costs are not linear in general, so
//! each arc line carries the cost of its first grid unit and a comment line
//! records the curve kind. Node ids are 1-based as in DIMACS.

use super::{FlowNetwork, FlowSolution};
use std::fmt::Write;

pub fn write_network(net: &FlowNetwork, delta: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "c priceflow network, grid step {delta:e}");
    let _ = writeln!(out, "p min {} {}", net.node_count(), net.arc_count());
    for i in 0..net.node_count() {
        let _ = writeln!(out, "c node {} {}", i + 1, net.label(i));
        let supply = (net.balance(i) / delta).round() as i64;
        if supply != 0 {
            let _ = writeln!(out, "n {} {}", i + 1, supply);
        }
    }
    for (a, arc) in net.arcs().iter().enumerate() {
        let _ = writeln!(
            out,
            "a {} {} 0 {} {:e}",
            arc.tail + 1,
            arc.head + 1,
            net.capacity_units(a, delta),
            arc.cost.eval(delta)
        );
        let _ = writeln!(out, "c cost {} {}", a + 1, arc.cost.kind());
    }
    out
}

pub fn write_solution(net: &FlowNetwork, sol: &FlowSolution) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "s {:e}", sol.objective);
    for (a, arc) in net.arcs().iter().enumerate() {
        if sol.units[a] != 0 {
            let _ = writeln!(out, "f {} {} {}", arc.tail + 1, arc.head + 1, sol.units[a]);
        }
    }
    out
}
