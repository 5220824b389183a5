//! The operator's side: storage cost, revenue and the optimal caching price.
//!
//! Followers' equilibrium quantities scale linearly with `1/price - 1`, so the
//! operator's utility collapses to a function of two price-independent
//! coefficients: `t` (total requested files per unit of `1/price - 1`) and `r`
//! (the same, weighted by each provider's mean copy count `f(p_m)`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::follower::{self, FollowerError};
use crate::model::{CpParams, Market, QuantityProfile};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LeaderError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("market is infeasible: optimal price {price} is not below 1 (capacity {capacity} too small for demand)")]
    InfeasibleMarket { price: f64, capacity: f64 },
    #[error(transparent)]
    Follower(#[from] FollowerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn of(n: i64) -> Self {
        if n % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// How `f(p_m)` is chosen while the quantities are still continuous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParityConvention {
    #[default]
    Even,
    Odd,
    /// Price once under the even branch, then re-price with the parities of
    /// the rounded equilibrium quantities at that price.
    Rounded,
}

/// Mean copy count per file of a provider's requested set.
pub fn f_pm(cp: &CpParams, parity: Parity) -> f64 {
    match parity {
        Parity::Odd => cp.p_mean,
        Parity::Even => cp.p_mean + cp.delta_p / 2.0,
    }
}

/// Total stored copies `d`. Parity comes from `q.rounded` when present and
/// from `fallback` otherwise.
pub fn cached_copies(q: &QuantityProfile, market: &Market, fallback: Parity) -> f64 {
    market
        .cps
        .iter()
        .enumerate()
        .map(|(m, cp)| {
            let parity = q.rounded.as_ref().map_or(fallback, |r| Parity::of(r[m]));
            q.q[m] * f_pm(cp, parity)
        })
        .sum()
}

/// Barrier storage cost. Infinite outside `0 < d < capacity`.
pub fn mno_cost(capacity: f64, d: f64) -> f64 {
    if d > 0.0 && d < capacity {
        1.0 / (capacity - d)
    } else {
        f64::INFINITY
    }
}

pub fn mno_revenue(price: f64, q: &QuantityProfile) -> f64 {
    price * q.total()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RtCoefficients {
    pub r: f64,
    pub t: f64,
}

pub const DEFAULT_PROBE_PRICE: f64 = 0.5;

/// `r` and `t` with the default even-branch `f(p_m)`.
pub fn rt_coefficients(market: &Market) -> Result<RtCoefficients, LeaderError> {
    rt_coefficients_with(market, &vec![Parity::Even; market.num_cps()], DEFAULT_PROBE_PRICE)
}

/// Derives `r` and `t` from the equilibrium at `probe`, dividing out `1/probe - 1`.
pub fn rt_coefficients_with(market: &Market, parities: &[Parity], probe: f64) -> Result<RtCoefficients, LeaderError> {
    let ne = follower::solve_ne_linear(market, probe)?;
    let scale = 1.0 / probe - 1.0;
    let t = ne.profile.total() / scale;
    let r = market
        .cps
        .iter()
        .zip(&ne.profile.q)
        .zip(parities)
        .map(|((cp, &q), &parity)| q * f_pm(cp, parity))
        .sum::<f64>()
        / scale;
    Ok(RtCoefficients { r, t })
}

/// Operator's optimal price with its feasibility metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceDecision {
    pub price: f64,
    pub feasible_range: (f64, f64),
    pub r: f64,
    pub t: f64,
    /// `du_o/dprice` evaluated at `price`.
    pub stationarity_residual: f64,
}

/// The operator's utility as a function of price for a fixed market.
#[derive(Debug, Clone, PartialEq)]
pub struct PricingModel {
    pub capacity: f64,
    pub coefficients: RtCoefficients,
}

impl PricingModel {
    pub fn new(market: &Market) -> Result<Self, LeaderError> {
        Self::with_convention(market, ParityConvention::Even)
    }

    pub fn with_convention(market: &Market, convention: ParityConvention) -> Result<Self, LeaderError> {
        let m = market.num_cps();
        let parities = match convention {
            ParityConvention::Even => vec![Parity::Even; m],
            ParityConvention::Odd => vec![Parity::Odd; m],
            ParityConvention::Rounded => {
                let first = Self::with_convention(market, ParityConvention::Even)?.optimal_price()?;
                let q = follower::solve_ne_linear(market, first.price)?.profile;
                let rounded = follower::round_uncoded(&q).rounded.unwrap_or_default();
                rounded.into_iter().map(Parity::of).collect()
            }
        };
        let coefficients = rt_coefficients_with(market, &parities, DEFAULT_PROBE_PRICE)?;
        Ok(Self { capacity: market.capacity(), coefficients })
    }

    pub fn from_coefficients(capacity: f64, r: f64, t: f64) -> Self {
        Self { capacity, coefficients: RtCoefficients { r, t } }
    }

    /// `u_o = (1 - price) t - 1 / (S - (1/price - 1) r)`, or `-inf` once the
    /// stored copies reach capacity.
    pub fn utility(&self, price: f64) -> Result<f64, LeaderError> {
        if !(price > 0.0 && price < 1.0) {
            return Err(LeaderError::Domain(format!("price {price} outside (0, 1)")));
        }
        let RtCoefficients { r, t } = self.coefficients;
        let d = (1.0 / price - 1.0) * r;
        if d >= self.capacity {
            return Ok(f64::NEG_INFINITY);
        }
        Ok((1.0 - price) * t - 1.0 / (self.capacity - d))
    }

    /// `r / (S price - (1 - price) r)^2 - t`.
    pub fn marginal_utility(&self, price: f64) -> f64 {
        let RtCoefficients { r, t } = self.coefficients;
        let gap = self.capacity * price - (1.0 - price) * r;
        r / (gap * gap) - t
    }

    /// Open interval `(r / (S + r), 1)` of prices that keep the barrier finite.
    pub fn feasible_range(&self) -> (f64, f64) {
        let r = self.coefficients.r;
        (r / (self.capacity + r), 1.0)
    }

    /// `(sqrt(r/t) + r) / (S + r)`, the unique stationary point in the feasible range.
    pub fn optimal_price(&self) -> Result<PriceDecision, LeaderError> {
        let RtCoefficients { r, t } = self.coefficients;
        let price = ((r / t).sqrt() + r) / (self.capacity + r);
        if !(price > 0.0 && price < 1.0) {
            return Err(LeaderError::InfeasibleMarket { price, capacity: self.capacity });
        }
        let feasible_range = self.feasible_range();
        debug_assert!(feasible_range.0 < price && price < feasible_range.1);
        let stationarity_residual = self.marginal_utility(price);
        debug_assert!(stationarity_residual.abs() <= 1e-9 * t.max(1.0), "residual {stationarity_residual}");
        Ok(PriceDecision { price, feasible_range, r, t, stationarity_residual })
    }
}

pub fn mno_utility(price: f64, market: &Market) -> Result<f64, LeaderError> {
    PricingModel::new(market)?.utility(price)
}

pub fn optimal_price(market: &Market) -> Result<PriceDecision, LeaderError> {
    PricingModel::new(market)?.optimal_price()
}

pub fn feasible_price_range(market: &Market) -> Result<(f64, f64), LeaderError> {
    Ok(PricingModel::new(market)?.feasible_range())
}

/// Operator utility evaluated directly on a (possibly rounded) profile:
/// revenue minus barrier cost of the copies it stores.
pub fn mno_utility_on_profile(price: f64, q: &QuantityProfile, market: &Market, fallback: Parity) -> f64 {
    let d = cached_copies(q, market, fallback);
    let revenue = match &q.rounded {
        Some(r) => price * r.iter().sum::<i64>() as f64,
        None => mno_revenue(price, q),
    };
    revenue - mno_cost(market.capacity(), d)
}
