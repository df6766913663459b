//! Price-dependent demand: acceptance curves, the mean-demand map
//! `z = n * p(x)` with its inverse, the revenue cost curve used by the
//! pricing flow network, and the probability mass code shared by sampling
//! and exact enumeration.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative demand level below which a group is treated as closed.
pub const DEFAULT_FLOOR_REL: f64 = 1e-9;
/// Relative gap kept below an unattained demand supremum.
pub const DEFAULT_CEILING_REL: f64 = 1e-9;

const LOGISTIC_WINDOW: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemandError {
    #[error("price {x} outside domain {domain}")]
    PriceOutsideDomain { x: f64, domain: Interval },
    #[error("demand level {z} outside range [0, {max}]")]
    DemandOutsideRange { z: f64, max: f64 },
    #[error("group has no potential participants (n = 0)")]
    NoParticipants,
    #[error("invalid response parameters: {0}")]
    InvalidParameters(String),
}

/// Price interval. `None` marks an unbounded side; finite ends are closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo: Some(lo), hi: Some(hi) }
    }

    pub fn real_line() -> Self {
        Self { lo: None, hi: None }
    }

    pub fn lower(&self) -> f64 {
        self.lo.unwrap_or(f64::NEG_INFINITY)
    }

    pub fn upper(&self) -> f64 {
        self.hi.unwrap_or(f64::INFINITY)
    }

    pub fn is_valid(&self) -> bool {
        let finite = self.lo.is_none_or(f64::is_finite) && self.hi.is_none_or(f64::is_finite);
        finite && self.lower() < self.upper()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower() && x <= self.upper()
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lower()).min(self.upper())
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        self.lower() >= other.lower() && self.upper() <= other.upper()
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.lo, self.hi) {
            (Some(a), Some(b)) => write!(f, "[{a}, {b}]"),
            (Some(a), None) => write!(f, "[{a}, inf)"),
            (None, Some(b)) => write!(f, "(-inf, {b}]"),
            (None, None) => write!(f, "(-inf, inf)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Binomial,
    Poisson,
}

/// Outcome of turning a demand level back into a price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceStatus {
    Interior,
    ClampedCeiling,
    MarketClosed,
}

/// Acceptance probability as a function of price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum PriceResponse {
    /// Falls linearly from 1 to 0 between `q` and `1.5 q` (whichever is
    /// smaller is the price at which everyone accepts).
    Linear { q: f64 },
    /// `1 - 1 / (1 + exp(-(x - beta q) / (gamma |q|)))`.
    Logistic { q: f64, beta: f64, gamma: f64 },
    Custom(TabulatedResponse),
}

impl PriceResponse {
    pub fn check_parameters(&self) -> Result<(), DemandError> {
        match *self {
            PriceResponse::Linear { q } if !(q.is_finite() && q != 0.0) => Err(
                DemandError::InvalidParameters(format!("linear response needs finite q != 0, got {q}")),
            ),
            PriceResponse::Logistic { q, beta, gamma }
                if !(q.is_finite() && q != 0.0 && beta.is_finite() && gamma.is_finite() && gamma > 0.0) =>
            {
                Err(DemandError::InvalidParameters(format!(
                    "logistic response needs finite q != 0, finite beta and gamma > 0 (q={q}, beta={beta}, gamma={gamma})"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Domain the response is defined on when no narrower one is given.
    pub fn natural_domain(&self) -> Interval {
        match self {
            PriceResponse::Linear { q } => {
                let (a, b) = (*q, 1.5 * q);
                Interval::closed(a.min(b), a.max(b))
            }
            PriceResponse::Logistic { .. } => Interval::real_line(),
            PriceResponse::Custom(t) => Interval::closed(t.xs[0], *t.xs.last().unwrap()),
        }
    }

    /// Characteristic price magnitude, used to size probes and tolerances.
    pub fn scale(&self) -> f64 {
        match self {
            PriceResponse::Linear { q } | PriceResponse::Logistic { q, .. } => q.abs(),
            PriceResponse::Custom(t) => (t.xs.last().unwrap() - t.xs[0]).abs(),
        }
    }

    pub fn p(&self, x: f64) -> f64 {
        match self {
            PriceResponse::Linear { q } => {
                let (lo, hi) = linear_ends(*q);
                (hi - x) / (hi - lo)
            }
            PriceResponse::Logistic { q, beta, gamma } => {
                let t = (x - beta * q) / (gamma * q.abs());
                if t > 0.0 {
                    let e = (-t).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + t.exp())
                }
            }
            PriceResponse::Custom(t) => t.eval(x),
        }
    }

    pub fn dp(&self, x: f64) -> f64 {
        match self {
            PriceResponse::Linear { q } => {
                let (lo, hi) = linear_ends(*q);
                -1.0 / (hi - lo)
            }
            PriceResponse::Logistic { q, gamma, .. } => {
                let p = self.p(x);
                -p * (1.0 - p) / (gamma * q.abs())
            }
            PriceResponse::Custom(t) => t.derivative(x),
        }
    }

    /// Price with `p(x) = prob`, searched inside `domain`.
    pub fn inverse(&self, prob: f64, domain: &Interval) -> f64 {
        let x = match self {
            PriceResponse::Linear { q } => {
                let (lo, hi) = linear_ends(*q);
                hi - prob * (hi - lo)
            }
            PriceResponse::Logistic { q, beta, gamma } => {
                beta * q + gamma * q.abs() * ((1.0 - prob).ln() - prob.ln())
            }
            PriceResponse::Custom(_) => self.bisect(prob, domain),
        };
        domain.clamp(x)
    }

    fn bisect(&self, prob: f64, domain: &Interval) -> f64 {
        let (mut a, mut b) = self.window(domain);
        let tol = 1e-12 * self.scale().max(f64::MIN_POSITIVE);
        // p is decreasing: p(a) >= prob >= p(b) once bracketed
        while b - a > tol {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.p(mid) > prob {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    /// Finite price window inside `domain` carrying essentially all of the
    /// response's variation.
    pub fn window(&self, domain: &Interval) -> (f64, f64) {
        self.window_with_tail(domain, (-LOGISTIC_WINDOW).exp())
    }

    /// Finite price window inside `domain`; on an unbounded side it stops
    /// where the acceptance probability is within `tail` of 0 or 1.
    pub fn window_with_tail(&self, domain: &Interval, tail: f64) -> (f64, f64) {
        let (a, b) = match self {
            PriceResponse::Logistic { q, beta, gamma } => {
                let c = beta * q;
                let w = ((1.0 - tail) / tail).ln() * gamma * q.abs();
                (c - w, c + w)
            }
            _ => {
                let nat = self.natural_domain();
                (nat.lower(), nat.upper())
            }
        };
        let lo = domain.lo.map_or(a, |l| l.max(a.min(domain.upper())));
        let hi = domain.hi.map_or(b, |h| h.min(b.max(domain.lower())));
        if lo < hi {
            (lo, hi)
        } else {
            (domain.lower().max(lo.min(hi)), domain.upper().min(lo.max(hi)))
        }
    }
}

fn linear_ends(q: f64) -> (f64, f64) {
    let (a, b) = (q, 1.5 * q);
    (a.min(b), a.max(b))
}

/// Tabulated acceptance curve interpolated with a monotone (Fritsch-Carlson)
/// cubic Hermite spline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableSpec", into = "TableSpec")]
pub struct TabulatedResponse {
    xs: Vec<f64>,
    ps: Vec<f64>,
    slopes: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TableSpec {
    x: Vec<f64>,
    p: Vec<f64>,
}

impl TryFrom<TableSpec> for TabulatedResponse {
    type Error = DemandError;
    fn try_from(spec: TableSpec) -> Result<Self, Self::Error> {
        TabulatedResponse::new(spec.x, spec.p)
    }
}

impl From<TabulatedResponse> for TableSpec {
    fn from(t: TabulatedResponse) -> Self {
        TableSpec { x: t.xs, p: t.ps }
    }
}

impl TabulatedResponse {
    pub fn new(xs: Vec<f64>, ps: Vec<f64>) -> Result<Self, DemandError> {
        if xs.len() < 2 || xs.len() != ps.len() {
            return Err(DemandError::InvalidParameters(
                "custom response needs at least two (x, p) pairs of equal length".into(),
            ));
        }
        if xs.iter().chain(&ps).any(|v| !v.is_finite()) {
            return Err(DemandError::InvalidParameters("custom response values must be finite".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DemandError::InvalidParameters(
                "custom response x values must be strictly increasing".into(),
            ));
        }
        let slopes = pchip_slopes(&xs, &ps);
        Ok(Self { xs, ps, slopes })
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ps.iter().copied())
    }

    fn segment(&self, x: f64) -> usize {
        let k = self.xs.partition_point(|&xi| xi <= x);
        k.clamp(1, self.xs.len() - 1) - 1
    }

    fn eval(&self, x: f64) -> f64 {
        let k = self.segment(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ps[k] + h10 * h * self.slopes[k] + h01 * self.ps[k + 1] + h11 * h * self.slopes[k + 1]
    }

    fn derivative(&self, x: f64) -> f64 {
        let k = self.segment(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        d00 * self.ps[k] + d10 * self.slopes[k] + d01 * self.ps[k + 1] + d11 * self.slopes[k + 1]
    }
}

fn pchip_slopes(xs: &[f64], ps: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let secant: Vec<f64> = (0..n - 1).map(|k| (ps[k + 1] - ps[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    d[0] = secant[0];
    d[n - 1] = secant[n - 2];
    for k in 1..n - 1 {
        let (s0, s1) = (secant[k - 1], secant[k]);
        if s0 * s1 > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / s0 + w2 / s1);
        }
    }
    d
}

/// Demand model of one participant group: `xi ~ Bin(n, p(x))` or
/// `xi ~ Po(n p(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandModel {
    pub family: Family,
    pub count: u32,
    pub response: PriceResponse,
    pub domain: Interval,
}

impl DemandModel {
    pub fn new(family: Family, count: u32, response: PriceResponse) -> Self {
        let domain = response.natural_domain();
        Self { family, count, response, domain }
    }

    pub fn with_domain(mut self, domain: Interval) -> Self {
        self.domain = domain;
        self
    }

    fn n(&self) -> f64 {
        f64::from(self.count)
    }

    fn check_price(&self, x: f64) -> Result<(), DemandError> {
        if x.is_nan() || !self.domain.contains(x) {
            return Err(DemandError::PriceOutsideDomain { x, domain: self.domain });
        }
        Ok(())
    }

    /// Acceptance probability clamped into `[0, 1]`.
    pub fn acceptance(&self, x: f64) -> f64 {
        self.response.p(x).clamp(0.0, 1.0)
    }

    /// Mean demand `n p(x)`.
    pub fn mean_demand(&self, x: f64) -> Result<f64, DemandError> {
        self.check_price(x)?;
        Ok(self.n() * self.acceptance(x))
    }

    pub fn mean_demand_derivative(&self, x: f64) -> f64 {
        self.n() * self.response.dp(x)
    }

    /// Largest acceptance probability over the domain (a limit when the
    /// domain is unbounded below).
    pub fn sup_acceptance(&self) -> f64 {
        match self.domain.lo {
            Some(lo) => self.acceptance(lo),
            None => 1.0,
        }
    }

    /// Whether the supremum of the mean demand is attained by some price.
    pub fn ceiling_attained(&self) -> bool {
        self.domain.lo.is_some()
    }

    /// Whether zero demand is attained by some price.
    pub fn floor_attained(&self) -> bool {
        self.domain.hi.is_some()
    }

    pub fn max_mean_demand(&self) -> f64 {
        self.n() * self.sup_acceptance()
    }

    /// Largest demand level usable as a flow capacity.
    pub fn demand_ceiling(&self) -> f64 {
        if self.ceiling_attained() {
            self.max_mean_demand()
        } else {
            (1.0 - DEFAULT_CEILING_REL) * self.max_mean_demand()
        }
    }

    pub fn demand_floor(&self) -> f64 {
        DEFAULT_FLOOR_REL * self.n()
    }

    /// Price at which the mean demand equals the floor level.
    pub fn price_cap(&self) -> f64 {
        if self.count == 0 {
            return self.domain.upper();
        }
        self.response.inverse(self.demand_floor() / self.n(), &self.domain)
    }

    /// Price realizing mean demand `z`, with boundary handling for levels the
    /// domain cannot attain.
    pub fn inverse_mean_demand(&self, z: f64) -> Result<(f64, PriceStatus), DemandError> {
        if self.count == 0 {
            return Err(DemandError::NoParticipants);
        }
        let n = self.n();
        let max = self.max_mean_demand();
        let slack = 1e-9 * n;
        if z.is_nan() || z < -slack || z > max + slack {
            return Err(DemandError::DemandOutsideRange { z, max });
        }
        if z < self.demand_floor() {
            let x = if self.floor_attained() {
                self.response.inverse(z.max(0.0) / n, &self.domain)
            } else {
                self.price_cap()
            };
            return Ok((x, PriceStatus::MarketClosed));
        }
        let ceiling = self.demand_ceiling();
        if z > ceiling {
            if self.ceiling_attained() {
                return Ok((self.domain.lower(), PriceStatus::Interior));
            }
            return Ok((self.response.inverse(ceiling / n, &self.domain), PriceStatus::ClampedCeiling));
        }
        Ok((self.response.inverse(z / n, &self.domain), PriceStatus::Interior))
    }

    /// `-x(z) z`, the negated revenue at mean demand `z`; zero at `z = 0`.
    pub fn revenue_cost(&self, z: f64) -> Result<f64, DemandError> {
        if self.count == 0 {
            return Err(DemandError::NoParticipants);
        }
        let max = self.max_mean_demand();
        if z.is_nan() || z < -1e-9 * self.n() || z > max * (1.0 + 1e-9) {
            return Err(DemandError::DemandOutsideRange { z, max });
        }
        Ok(self.revenue_cost_clamped(z))
    }

    /// Same as [`revenue_cost`](Self::revenue_cost) with `z` clamped into
    /// `[0, demand_ceiling]` instead of failing.
    pub fn revenue_cost_clamped(&self, z: f64) -> f64 {
        if z <= 0.0 || self.count == 0 {
            return 0.0;
        }
        let z = z.min(self.demand_ceiling());
        let x = self.response.inverse(z / self.n(), &self.domain);
        -x * z
    }

    /// Probability mass of `xi` at price `x`.
    pub fn mass(&self, x: f64) -> MassFunction {
        let p = self.acceptance(x);
        match self.family {
            Family::Binomial => MassFunction::Binomial { n: self.count, p },
            Family::Poisson => MassFunction::Poisson { lambda: self.n() * p },
        }
    }

    /// Draws the realized capacity `xi` at price `x`.
    pub fn sample_capacity<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> Result<u64, DemandError> {
        self.check_price(x)?;
        Ok(self.mass(x).sample(rng))
    }
}

/// Poisson rates at or above this use rejection sampling instead of inversion.
pub const POISSON_INVERSION_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MassFunction {
    Binomial { n: u32, p: f64 },
    Poisson { lambda: f64 },
}

impl MassFunction {
    /// Point masses in support order, computed by a log-space recurrence.
    pub fn terms(&self) -> MassTerms {
        match *self {
            MassFunction::Binomial { n, p } => MassTerms {
                dist: *self,
                k: 0,
                log_mass: if p >= 1.0 {
                    if n == 0 { 0.0 } else { f64::NEG_INFINITY }
                } else {
                    f64::from(n) * (-p).ln_1p()
                },
            },
            MassFunction::Poisson { lambda } => MassTerms { dist: *self, k: 0, log_mass: -lambda },
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            MassFunction::Binomial { n, p } => f64::from(n) * p,
            MassFunction::Poisson { lambda } => lambda,
        }
    }

    /// Masses `P(xi = k)` for `k = 0..=K`, where `K` is the full support for
    /// binomials and the smallest level with tail mass at most `eps` for
    /// Poisson. Returns the masses and the mass left out.
    pub fn truncated_support(&self, eps: f64) -> (Vec<f64>, f64) {
        let mut masses = Vec::new();
        let mut total = 0.0;
        match *self {
            MassFunction::Binomial { n, .. } => {
                masses.extend(self.terms().take(n as usize + 1).map(|(_, m)| m));
                total = masses.iter().sum();
            }
            MassFunction::Poisson { lambda } => {
                let limit = (lambda + 60.0 * lambda.sqrt() + 60.0).ceil() as u64;
                for (k, m) in self.terms() {
                    masses.push(m);
                    total += m;
                    if 1.0 - total <= eps || k >= limit {
                        break;
                    }
                }
            }
        }
        (masses, (1.0 - total).max(0.0))
    }

    /// Smallest `k` with cumulative mass above `u`.
    pub fn quantile(&self, u: f64) -> u64 {
        let mut cumulative = 0.0;
        let mut last = 0;
        for (k, m) in self.terms() {
            cumulative += m;
            last = k;
            if u < cumulative {
                return k;
            }
            if let MassFunction::Binomial { n, .. } = *self {
                if k >= u64::from(n) {
                    return k;
                }
            } else if m == 0.0 && cumulative > 0.5 {
                return k;
            }
        }
        last
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            MassFunction::Poisson { lambda } if lambda >= POISSON_INVERSION_LIMIT => {
                let dist = rand_distr::Poisson::new(lambda).expect("positive finite rate");
                let draw: f64 = dist.sample(rng);
                draw as u64
            }
            _ => {
                let u: f64 = rng.random();
                self.quantile(u)
            }
        }
    }
}

/// Iterator over `(k, P(xi = k))`.
#[derive(Debug, Clone)]
pub struct MassTerms {
    dist: MassFunction,
    k: u64,
    log_mass: f64,
}

impl Iterator for MassTerms {
    type Item = (u64, f64);

    fn next(&mut self) -> Option<(u64, f64)> {
        let k = self.k;
        let mass = match self.dist {
            MassFunction::Binomial { n, p } => {
                if k > u64::from(n) {
                    return None;
                }
                if p >= 1.0 {
                    if k == u64::from(n) { 1.0 } else { 0.0 }
                } else if p <= 0.0 {
                    if k == 0 { 1.0 } else { 0.0 }
                } else {
                    let m = self.log_mass.exp();
                    let nk = f64::from(n) - k as f64;
                    self.log_mass += nk.ln() - ((k + 1) as f64).ln() + p.ln() - (-p).ln_1p();
                    m
                }
            }
            MassFunction::Poisson { lambda } => {
                if lambda <= 0.0 {
                    if k == 0 { 1.0 } else { 0.0 }
                } else {
                    let m = self.log_mass.exp();
                    self.log_mass += lambda.ln() - ((k + 1) as f64).ln();
                    m
                }
            }
        };
        self.k += 1;
        Some((k, mass))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn linear(q: f64, n: u32) -> DemandModel {
        DemandModel::new(Family::Binomial, n, PriceResponse::Linear { q })
    }

    fn logistic(q: f64, n: u32) -> DemandModel {
        DemandModel::new(
            Family::Binomial,
            n,
            PriceResponse::Logistic { q, beta: 1.3, gamma: 0.3 * 3f64.sqrt() / PI },
        )
    }

    #[test]
    fn linear_mean_demand_endpoints() {
        let m = linear(10.0, 1);
        assert_eq!(m.mean_demand(10.0).unwrap(), 1.0);
        assert_eq!(m.mean_demand(15.0).unwrap(), 0.0);
        assert!(matches!(m.mean_demand(16.0), Err(DemandError::PriceOutsideDomain { .. })));
    }

    #[test]
    fn negative_linear_matches_wage_form() {
        let m = DemandModel::new(Family::Poisson, 1, PriceResponse::Linear { q: -0.2 });
        assert!((m.mean_demand(-0.2).unwrap() - 0.0).abs() < 1e-15);
        assert!((m.mean_demand(-0.3).unwrap() - 1.0).abs() < 1e-12);
        // (2/q) x - 2 at an interior point
        let x = -0.25;
        assert!((m.mean_demand(x).unwrap() - (2.0 / -0.2 * x - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn logistic_midpoint() {
        let m = logistic(10.0, 4);
        assert!((m.mean_demand(13.0).unwrap() - 2.0).abs() < 1e-12);
        let (x, s) = logistic(10.0, 1).inverse_mean_demand(0.5).unwrap();
        assert!((x - 13.0).abs() < 1e-12);
        assert_eq!(s, PriceStatus::Interior);
    }

    #[test]
    fn linear_inverse_midpoint() {
        let (x, s) = linear(10.0, 1).inverse_mean_demand(0.5).unwrap();
        assert!((x - 12.5).abs() < 1e-12);
        assert_eq!(s, PriceStatus::Interior);
    }

    #[test]
    fn logistic_zero_demand_closes_market() {
        let m = logistic(10.0, 1);
        let (x, s) = m.inverse_mean_demand(0.0).unwrap();
        assert_eq!(s, PriceStatus::MarketClosed);
        assert!(x.is_finite());
        assert!(m.mean_demand(x).unwrap() <= 1e-9 * (1.0 + 1e-6));
    }

    #[test]
    fn logistic_full_demand_is_clamped() {
        let m = logistic(10.0, 2);
        let (x, s) = m.inverse_mean_demand(2.0).unwrap();
        assert_eq!(s, PriceStatus::ClampedCeiling);
        assert!(x.is_finite());
        assert!(m.inverse_mean_demand(2.1).is_err());
    }

    #[test]
    fn revenue_cost_examples() {
        let m = linear(10.0, 1);
        assert_eq!(m.revenue_cost(0.0).unwrap(), 0.0);
        assert_eq!(logistic(10.0, 1).revenue_cost(0.0).unwrap(), 0.0);
        assert!((m.revenue_cost(0.5).unwrap() + 6.25).abs() < 1e-12);
        let c = |z| m.revenue_cost(z).unwrap();
        assert!(c(0.25) + c(0.75) >= 2.0 * c(0.5));
    }

    #[test]
    fn bernoulli_degenerate_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let closed = linear(10.0, 1);
        for _ in 0..200 {
            assert_eq!(closed.sample_capacity(15.0, &mut rng).unwrap(), 0);
            assert_eq!(closed.sample_capacity(10.0, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn poisson_sample_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dist = MassFunction::Poisson { lambda: 2.0 };
        let n = 100_000;
        let sum: u64 = (0..n).map(|_| dist.sample(&mut rng)).sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 2.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn large_poisson_uses_rejection_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dist = MassFunction::Poisson { lambda: 50.0 };
        let n = 20_000;
        let mean = (0..n).map(|_| dist.sample(&mut rng)).sum::<u64>() as f64 / n as f64;
        // 3 sigma with sigma = sqrt(50 / 2e4)
        assert!((mean - 50.0).abs() < 3.0 * (50.0f64 / n as f64).sqrt());
    }

    #[test]
    fn binomial_masses_sum_to_one() {
        let (m, tail) = MassFunction::Binomial { n: 5, p: 0.3 }.truncated_support(1e-9);
        assert_eq!(m.len(), 6);
        assert!(tail < 1e-14);
        assert!((m[2] - 10.0 * 0.09 * 0.343).abs() < 1e-14);
    }

    #[test]
    fn poisson_truncation_respects_eps() {
        let (m, tail) = MassFunction::Poisson { lambda: 0.5 }.truncated_support(1e-9);
        assert!(tail <= 1e-9);
        // one fewer term would leave more than eps behind
        let kept: f64 = m[..m.len() - 1].iter().sum();
        assert!(1.0 - kept > 1e-9);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let d = MassFunction::Binomial { n: 2, p: 0.5 };
        assert_eq!(d.quantile(0.0), 0);
        assert_eq!(d.quantile(0.2499), 0);
        assert_eq!(d.quantile(0.25), 1);
        assert_eq!(d.quantile(0.7499), 1);
        assert_eq!(d.quantile(0.75), 2);
        assert_eq!(d.quantile(0.999_999_999_999), 2);
    }

    #[test]
    fn tabulated_interpolates_and_inverts() {
        let t = TabulatedResponse::new(vec![0.0, 1.0, 2.0, 4.0], vec![1.0, 0.6, 0.3, 0.0]).unwrap();
        let r = PriceResponse::Custom(t);
        assert!((r.p(1.0) - 0.6).abs() < 1e-15);
        assert!(r.dp(1.5) < 0.0);
        let dom = r.natural_domain();
        let x = r.inverse(0.45, &dom);
        assert!((r.p(x) - 0.45).abs() < 1e-9);
        // monotone between knots
        let mut prev = r.p(0.0);
        for i in 1..=400 {
            let v = r.p(4.0 * i as f64 / 400.0);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn analytic_derivative_matches_finite_difference() {
        let models = [linear(7.0, 3), logistic(10.0, 2), logistic(-0.3, 1)];
        for m in &models {
            let (a, b) = m.response.window(&m.domain);
            for i in 1..=100 {
                let x = a + (b - a) * i as f64 / 101.0;
                let h = 1e-6 * m.response.scale();
                let fd = (m.response.p(x + h) - m.response.p(x - h)) / (2.0 * h);
                let an = m.response.dp(x);
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "{m:?} at {x}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn response_json_shape() {
        let r = PriceResponse::Logistic { q: 10.0, beta: 1.3, gamma: 0.25 };
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"kind":"logistic","params":{"q":10.0,"beta":1.3,"gamma":0.25}}"#);
        let bad = serde_json::from_str::<PriceResponse>(r#"{"kind":"cubic","params":{}}"#);
        assert!(bad.unwrap_err().to_string().contains("unknown variant"));
    }
}
