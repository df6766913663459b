//! Joint pricing and bipartite b-matching under price-dependent stochastic
//! demand.
//!
//! Prices are chosen by solving a convex min-cost flow over the market
//! graph, where each group's revenue enters as a convex cost of the demand
//! level it is asked to supply. The crate also carries single-price and
//! grid-search baselines and the tools to evaluate any price vector against
//! realized demand.

pub mod demand;
pub mod flow;
pub mod instance;
pub mod eval;
pub mod pricer;
pub mod cli;
