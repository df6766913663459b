use super::{InstanceError, RawInstance};
use crate::demand::{DemandModel, PriceResponse};
use serde::Serialize;

const GRID_POINTS: usize = 101;
const LOG_CONCAVITY_TOL: f64 = 1e-9;
const VANISHING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Resource,
    Group,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    /// No incident edge.
    Isolated,
    /// `n = 0`: demand is identically zero.
    NoParticipants,
    /// No admissible price makes any incident edge profitable.
    Unprofitable,
    NotDecreasing,
    NotLogConcave,
    /// Acceptance does not vanish at the top of the price domain.
    NoVanishingDemand,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Removal {
    pub id: String,
    pub side: Side,
    pub reason: RemovalReason,
}

/// Per-group outcome of the demand-model checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupVerdict {
    pub id: String,
    pub decreasing: bool,
    pub log_concave: bool,
    pub vanishes_at_top: bool,
}

impl GroupVerdict {
    pub fn passed(&self) -> bool {
        self.decreasing && self.log_concave && self.vanishes_at_top
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub groups: Vec<GroupVerdict>,
    pub removed: Vec<Removal>,
}

impl ValidationReport {
    pub fn is_removed(&self, side: Side, id: &str) -> bool {
        self.removed.iter().any(|r| r.side == side && r.id == id)
    }
}

/// Checks every group's demand model and the graph conditions, returning
/// which nodes a [`MarketInstance`](super::MarketInstance) built from `raw`
/// would drop.
///
/// Malformed responses (parameters, non-interval domains, probabilities
/// outside `[0, 1]`) are errors. Models that break monotonicity,
/// log-concavity or the vanishing-demand condition, groups with no
/// participants, and groups that cannot be priced into profit are flagged
/// for removal instead.
pub fn validate_instance(raw: &RawInstance) -> Result<ValidationReport, InstanceError> {
    let mut report = ValidationReport::default();
    let mut group_degree = vec![0usize; raw.groups.len()];
    let mut best_weight = vec![f64::NEG_INFINITY; raw.groups.len()];
    for &(_, v, w) in &raw.edges {
        group_degree[v] += 1;
        best_weight[v] = best_weight[v].max(w);
    }

    let mut group_kept = vec![true; raw.groups.len()];
    for (v, group) in raw.groups.iter().enumerate() {
        let verdict = check_model(&group.id, &group.demand)?;
        let reason = if !verdict.decreasing {
            Some(RemovalReason::NotDecreasing)
        } else if !verdict.log_concave {
            Some(RemovalReason::NotLogConcave)
        } else if !verdict.vanishes_at_top {
            Some(RemovalReason::NoVanishingDemand)
        } else if group_degree[v] == 0 {
            Some(RemovalReason::Isolated)
        } else if group.demand.count == 0 {
            Some(RemovalReason::NoParticipants)
        } else if group.demand.domain.hi.is_some_and(|hi| hi <= -best_weight[v]) {
            Some(RemovalReason::Unprofitable)
        } else {
            None
        };
        report.groups.push(verdict);
        if let Some(reason) = reason {
            group_kept[v] = false;
            report.removed.push(Removal { id: group.id.clone(), side: Side::Group, reason });
        }
    }

    let mut resource_degree = vec![0usize; raw.resources.len()];
    for &(u, v, _) in &raw.edges {
        if group_kept[v] {
            resource_degree[u] += 1;
        }
    }
    for (u, r) in raw.resources.iter().enumerate() {
        if resource_degree[u] == 0 {
            report.removed.push(Removal { id: r.id.clone(), side: Side::Resource, reason: RemovalReason::Isolated });
        }
    }
    Ok(report)
}

fn check_model(id: &str, model: &DemandModel) -> Result<GroupVerdict, InstanceError> {
    let response = &model.response;
    response
        .check_parameters()
        .map_err(|e| InstanceError::BadResponse { id: id.to_string(), reason: e.to_string() })?;
    let domain = model.domain;
    if !domain.is_valid() {
        return Err(InstanceError::NonIntervalDomain { id: id.to_string(), domain: domain.to_string() });
    }
    if let PriceResponse::Custom(_) = response {
        if !domain.is_subset_of(&response.natural_domain()) {
            return Err(InstanceError::BadResponse {
                id: id.to_string(),
                reason: format!("domain {domain} exceeds the tabulated range {}", response.natural_domain()),
            });
        }
    }

    let (a, b) = response.window(&domain);
    let grid: Vec<f64> = (1..=GRID_POINTS).map(|i| a + (b - a) * i as f64 / (GRID_POINTS + 1) as f64).collect();
    let mut verdict = GroupVerdict { id: id.to_string(), decreasing: true, log_concave: true, vanishes_at_top: true };

    verdict.decreasing = grid.iter().all(|&x| response.dp(x) < 0.0);
    if !verdict.decreasing {
        return Ok(verdict);
    }

    let ends = [domain.lo, domain.hi];
    for x in grid.iter().copied().chain(ends.into_iter().flatten()) {
        let p = response.p(x);
        if !(-1e-12..=1.0 + 1e-12).contains(&p) {
            return Err(InstanceError::ResponseOutOfRange { id: id.to_string(), x, p });
        }
    }

    let hazards: Vec<f64> = grid
        .iter()
        .filter_map(|&x| {
            let p = response.p(x);
            (p > 0.0).then(|| response.dp(x) / p)
        })
        .collect();
    verdict.log_concave =
        hazards.windows(2).all(|w| w[1] <= w[0] + LOG_CONCAVITY_TOL * w[0].abs().max(1.0));

    let top = match domain.hi {
        Some(hi) => response.p(hi),
        None => response.p(b + 1e3 * response.scale().max(b.abs()).max(1.0)),
    };
    verdict.vanishes_at_top = top <= VANISHING_TOL;
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{Family, Interval, TabulatedResponse};
    use crate::instance::{Group, Resource};
    use std::f64::consts::PI;

    fn single(model: DemandModel) -> RawInstance {
        RawInstance {
            resources: vec![Resource { id: "u".into(), capacity: 1 }],
            groups: vec![Group { id: "v".into(), demand: model }],
            edges: vec![(0, 0, 0.0)],
            meta: None,
        }
    }

    #[test]
    fn linear_passes() {
        let m = DemandModel::new(Family::Binomial, 1, PriceResponse::Linear { q: 10.0 });
        assert_eq!(m.response.p(10.0), 1.0);
        assert_eq!(m.response.p(15.0), 0.0);
        let rep = validate_instance(&single(m)).unwrap();
        assert!(rep.groups[0].passed());
        assert!(rep.removed.is_empty());
    }

    #[test]
    fn logistic_passes() {
        let m = DemandModel::new(
            Family::Binomial,
            1,
            PriceResponse::Logistic { q: 10.0, beta: 1.3, gamma: 0.3 * 3f64.sqrt() / PI },
        );
        assert!((m.response.p(13.0) - 0.5).abs() < 1e-15);
        let rep = validate_instance(&single(m)).unwrap();
        assert!(rep.groups[0].passed(), "{rep:?}");
    }

    #[test]
    fn increasing_custom_fails() {
        let xs: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let ps = xs.iter().map(|x| x.exp()).collect();
        let m = DemandModel::new(Family::Binomial, 1, PriceResponse::Custom(TabulatedResponse::new(xs, ps).unwrap()));
        let rep = validate_instance(&single(m)).unwrap();
        assert!(!rep.groups[0].decreasing);
        assert_eq!(rep.removed[0].reason, RemovalReason::NotDecreasing);
    }

    #[test]
    fn log_convex_custom_fails() {
        // steep, flat, steep: p'/p rises across the flat stretch
        let xs = vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        let ps = vec![1.0, 0.3, 0.25, 0.2, 0.02, 0.0];
        let m = DemandModel::new(Family::Binomial, 1, PriceResponse::Custom(TabulatedResponse::new(xs, ps).unwrap()));
        let rep = validate_instance(&single(m)).unwrap();
        assert!(rep.groups[0].decreasing);
        assert!(!rep.groups[0].log_concave);
    }

    #[test]
    fn non_vanishing_top_is_flagged() {
        let m = DemandModel::new(Family::Binomial, 1, PriceResponse::Linear { q: 10.0 })
            .with_domain(Interval::closed(10.0, 14.0));
        let rep = validate_instance(&single(m)).unwrap();
        assert!(!rep.groups[0].vanishes_at_top);
        assert_eq!(rep.removed[0].reason, RemovalReason::NoVanishingDemand);
    }

    #[test]
    fn out_of_range_response_is_an_error() {
        let m = DemandModel::new(Family::Binomial, 1, PriceResponse::Linear { q: 10.0 })
            .with_domain(Interval::closed(8.0, 15.0));
        let err = validate_instance(&single(m)).unwrap_err();
        assert!(matches!(err, InstanceError::ResponseOutOfRange { .. }));
    }

    #[test]
    fn reversed_domain_is_an_error() {
        let m = DemandModel::new(Family::Binomial, 1, PriceResponse::Linear { q: 10.0 })
            .with_domain(Interval::closed(15.0, 10.0));
        assert!(matches!(validate_instance(&single(m)), Err(InstanceError::NonIntervalDomain { .. })));
    }
}
