//! Synthetic market generators for ride-hailing and crowdsourcing.
//!
//! Geometry and skill distributions are synthetic stand-ins for trip and
//! worker data; every generated instance carries its generator parameters in
//! its metadata.

use super::{InstanceError, InstanceMeta, MarketInstance};
use crate::demand::{DemandModel, Family, PriceResponse};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseShape {
    Linear,
    Logistic,
}

impl FromStr for ResponseShape {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linear" => Ok(Self::Linear),
            "logistic" | "sigmoid" => Ok(Self::Logistic),
            other => Err(format!("unknown response shape {other:?} (expected linear or logistic)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RideHailParams {
    pub num_taxis: usize,
    pub num_groups: usize,
    /// Side of the square service region.
    pub region_km: f64,
    /// Travel speed; `f64::INFINITY` makes every trip free.
    pub speed_kmh: f64,
    /// Base fare per trip kilometre.
    pub fare_per_km: f64,
    pub min_trip_km: f64,
    /// Opportunity cost per hour of driving.
    pub hourly_cost: f64,
    /// Areas per side of the region; 0 places points uniformly, otherwise
    /// points sit at a random area centroid plus Gaussian noise.
    pub areas_per_side: u32,
    pub centroid_noise_km: f64,
    pub response: ResponseShape,
}

impl Default for RideHailParams {
    fn default() -> Self {
        Self {
            num_taxis: 10,
            num_groups: 10,
            region_km: 10.0,
            speed_kmh: 20.0,
            fare_per_km: 2.5,
            min_trip_km: 0.5,
            hourly_cost: 18.0,
            areas_per_side: 0,
            centroid_noise_km: 0.3,
            response: ResponseShape::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrowdParams {
    pub num_tasks: usize,
    pub num_worker_types: usize,
    pub max_task_capacity: u32,
    pub num_topics: usize,
    /// Probability that a worker type can take a task type.
    pub edge_density: f64,
    pub accuracy_min: f64,
    pub accuracy_max: f64,
    /// Spread of per-topic accuracy around a worker type's mean accuracy.
    pub accuracy_noise: f64,
    pub base_wage_min: f64,
    pub base_wage_max: f64,
    pub participants: u32,
    pub family: Family,
    pub response: ResponseShape,
}

impl Default for CrowdParams {
    fn default() -> Self {
        Self {
            num_tasks: 8,
            num_worker_types: 12,
            max_task_capacity: 3,
            num_topics: 4,
            edge_density: 1.0,
            accuracy_min: 0.4,
            accuracy_max: 0.95,
            accuracy_noise: 0.1,
            base_wage_min: -0.4,
            base_wage_max: -0.1,
            participants: 1,
            family: Family::Binomial,
            response: ResponseShape::Linear,
        }
    }
}

fn check(cond: bool, what: &str) -> Result<(), InstanceError> {
    if cond {
        Ok(())
    } else {
        Err(InstanceError::BadParameter(what.to_string()))
    }
}

fn meta<P: Serialize>(generator: &str, seed: u64, params: &P) -> InstanceMeta {
    InstanceMeta {
        generator: generator.to_string(),
        synthetic: true,
        seed,
        params: serde_json::to_value(params).expect("parameters serialize"),
    }
}

/// Ride-hailing market: unit-capacity taxis and single-requester groups
/// (`Bin(1, p)`), with edge weight `-hourly_cost * tau` where `tau` is the
/// pickup plus trip time, and base fare proportional to trip length.
pub fn generate_ridehail(seed: u64, params: &RideHailParams) -> Result<MarketInstance, InstanceError> {
    check(params.num_taxis > 0 && params.num_groups > 0, "taxi and group counts must be positive")?;
    check(params.region_km > 0.0 && params.region_km.is_finite(), "region_km must be positive")?;
    check(params.speed_kmh > 0.0, "speed_kmh must be positive")?;
    check(params.fare_per_km > 0.0 && params.fare_per_km.is_finite(), "fare_per_km must be positive")?;
    check(params.min_trip_km > 0.0, "min_trip_km must be positive")?;
    check(params.hourly_cost >= 0.0 && params.hourly_cost.is_finite(), "hourly_cost must be non-negative")?;
    check(params.centroid_noise_km >= 0.0, "centroid_noise_km must be non-negative")?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, params.centroid_noise_km).expect("noise is finite");
    let place = |rng: &mut ChaCha8Rng| -> (f64, f64) {
        let side = params.region_km;
        if params.areas_per_side == 0 {
            return (rng.random_range(0.0..side), rng.random_range(0.0..side));
        }
        let k = params.areas_per_side;
        let cell = side / f64::from(k);
        let (i, j) = (rng.random_range(0..k), rng.random_range(0..k));
        let cx = (f64::from(i) + 0.5) * cell + noise.sample(rng);
        let cy = (f64::from(j) + 0.5) * cell + noise.sample(rng);
        (cx.clamp(0.0, side), cy.clamp(0.0, side))
    };
    let taxis: Vec<(f64, f64)> = (0..params.num_taxis).map(|_| place(&mut rng)).collect();
    let trips: Vec<((f64, f64), (f64, f64))> =
        (0..params.num_groups).map(|_| (place(&mut rng), place(&mut rng))).collect();

    let dist = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    let mut b = MarketInstance::builder().meta(meta("ridehail", seed, params));
    for i in 0..params.num_taxis {
        b = b.resource(format!("taxi{i}"), 1);
    }
    for (j, &(origin, dest)) in trips.iter().enumerate() {
        let trip = dist(origin, dest).max(params.min_trip_km);
        let q = params.fare_per_km * trip;
        let response = match params.response {
            ResponseShape::Linear => PriceResponse::Linear { q },
            ResponseShape::Logistic => PriceResponse::Logistic { q, beta: 1.3, gamma: 0.3 * 3f64.sqrt() / PI },
        };
        b = b.group(format!("req{j}"), DemandModel::new(Family::Binomial, 1, response));
        for (i, &taxi) in taxis.iter().enumerate() {
            let hours = (dist(taxi, origin) + trip) / params.speed_kmh;
            let w = -params.hourly_cost * hours;
            b = b.edge(format!("taxi{i}"), format!("req{j}"), if w == 0.0 { 0.0 } else { w });
        }
    }
    b.build()
}

/// Crowdsourcing market: task types with capacities, worker types whose
/// per-topic accuracy is the edge weight, and wages (negative prices) around
/// a base wage drawn uniformly from `[base_wage_min, base_wage_max]`.
pub fn generate_crowdsourcing(seed: u64, params: &CrowdParams) -> Result<MarketInstance, InstanceError> {
    check(params.num_tasks > 0 && params.num_worker_types > 0, "task and worker counts must be positive")?;
    check(params.max_task_capacity >= 1, "max_task_capacity must be at least 1")?;
    check(params.num_topics >= 1, "num_topics must be at least 1")?;
    check((0.0..=1.0).contains(&params.edge_density), "edge_density must lie in [0, 1]")?;
    check(
        0.0 <= params.accuracy_min && params.accuracy_min <= params.accuracy_max && params.accuracy_max <= 1.0,
        "accuracies must satisfy 0 <= min <= max <= 1",
    )?;
    check(params.accuracy_noise >= 0.0, "accuracy_noise must be non-negative")?;
    check(
        params.base_wage_min < params.base_wage_max && params.base_wage_max < 0.0,
        "base wages must satisfy min < max < 0",
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, params.accuracy_noise).expect("noise is finite");
    let capacities: Vec<u32> =
        (0..params.num_tasks).map(|_| rng.random_range(1..=params.max_task_capacity)).collect();
    let topics: Vec<usize> = (0..params.num_tasks).map(|_| rng.random_range(0..params.num_topics)).collect();
    let mut accuracy = vec![vec![0.0; params.num_topics]; params.num_worker_types];
    let mut wages = Vec::with_capacity(params.num_worker_types);
    for row in accuracy.iter_mut() {
        let mean = rng.random_range(params.accuracy_min..=params.accuracy_max);
        for a in row.iter_mut() {
            *a = (mean + noise.sample(&mut rng)).clamp(0.0, 1.0);
        }
        wages.push(rng.random_range(params.base_wage_min..params.base_wage_max));
    }
    let mut linked = vec![vec![false; params.num_worker_types]; params.num_tasks];
    for row in linked.iter_mut() {
        for cell in row.iter_mut() {
            *cell = rng.random_bool(params.edge_density);
        }
    }
    // every node keeps at least one edge
    for row in linked.iter_mut() {
        if !row.iter().any(|&l| l) {
            row[rng.random_range(0..params.num_worker_types)] = true;
        }
    }
    for v in 0..params.num_worker_types {
        if !linked.iter().any(|row| row[v]) {
            let u = rng.random_range(0..params.num_tasks);
            linked[u][v] = true;
        }
    }

    let mut b = MarketInstance::builder().meta(meta("crowdsourcing", seed, params));
    for (u, &c) in capacities.iter().enumerate() {
        b = b.resource(format!("task{u}"), i64::from(c));
    }
    for (v, &q) in wages.iter().enumerate() {
        let response = match params.response {
            ResponseShape::Linear => PriceResponse::Linear { q },
            ResponseShape::Logistic => PriceResponse::Logistic { q, beta: 1.25, gamma: 0.25 / PI },
        };
        b = b.group(format!("worker{v}"), DemandModel::new(params.family, params.participants, response));
    }
    for u in 0..params.num_tasks {
        for v in 0..params.num_worker_types {
            if linked[u][v] {
                b = b.edge(format!("task{u}"), format!("worker{v}"), accuracy[v][topics[u]]);
            }
        }
    }
    b.build()
}
