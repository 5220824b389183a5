//! Parameter sweeps behind the command-line experiments.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::follower;
use crate::leader::{self, Parity, PricingModel};
use crate::model::{validate_market, CpParams, Market, MarketConfig};
use crate::stackelberg::StackelbergError;
use crate::{format_float, oracle};

/// One point of an operator-utility curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSweepRow {
    pub price: f64,
    pub mno_utility: f64,
    pub revenue: f64,
    pub cost: f64,
    pub cached_copies: f64,
    /// Stored copies stay strictly inside the capacity.
    pub feasible: bool,
    pub capacity: f64,
    pub optimal: bool,
}

impl PriceSweepRow {
    pub fn csv_header() -> Vec<String> {
        ["pi", "u_o", "R_o", "C_o", "d", "feasible", "S", "optimal"].map(String::from).to_vec()
    }

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            format_float(self.price),
            format_float(self.mno_utility),
            format_float(self.revenue),
            format_float(self.cost),
            format_float(self.cached_copies),
            self.feasible.to_string(),
            format_float(self.capacity),
            self.optimal.to_string(),
        ]
    }
}

/// Evaluates the operator at `price` through a fresh follower solve.
pub fn price_point(market: &Market, model: &PricingModel, price: f64, optimal: bool) -> Result<PriceSweepRow, StackelbergError> {
    let q = follower::solve_ne_linear(market, price)?.profile;
    let d = leader::cached_copies(&q, market, Parity::Even);
    Ok(PriceSweepRow {
        price,
        mno_utility: model.utility(price)?,
        revenue: leader::mno_revenue(price, &q),
        cost: leader::mno_cost(market.capacity(), d),
        cached_copies: d,
        feasible: d > 0.0 && d < market.capacity(),
        capacity: market.capacity(),
        optimal,
    })
}

/// Uniform grid of `points` prices on `[lo, hi]`.
pub fn price_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Sweeps `prices` for one market and inserts the optimal price, flagged, at its
/// sorted position when it falls inside the swept interval. A price equal to the
/// optimum (to 1e-12 relative) is flagged instead of duplicated.
pub fn price_sweep(market: &Market, prices: &[f64]) -> Result<Vec<PriceSweepRow>, StackelbergError> {
    let model = PricingModel::new(market)?;
    let optimum = model.optimal_price()?.price;
    let is_opt = |p: f64| (p - optimum).abs() <= 1e-12 * optimum;

    let mut points: Vec<(f64, bool)> = prices.iter().map(|&p| (p, is_opt(p))).collect();
    let lo = prices.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = prices.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if prices.len() > 1 && !points.iter().any(|p| p.1) && lo < optimum && optimum < hi {
        points.push((optimum, true));
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    points.into_iter().map(|(p, opt)| price_point(market, &model, p, opt)).collect()
}

/// Default sweep bounds: the union of the feasible ranges of `markets`, shrunk
/// by the oracle margin.
pub fn auto_bounds(markets: &[Market]) -> Result<(f64, f64), StackelbergError> {
    let mut lo = f64::INFINITY;
    for m in markets {
        lo = lo.min(PricingModel::new(m)?.feasible_range().0);
    }
    Ok((lo + oracle::GRID_SHRINK, 1.0 - oracle::GRID_SHRINK))
}

/// Traffic loads for an `m`-provider market: `alpha_k = m + k + shift`, `k = 1..=m`.
pub fn alpha_rule(m: usize, shift: f64) -> Vec<f64> {
    (1..=m).map(|k| (m + k) as f64 + shift).collect()
}

/// Market with `alphas` built from a template's fleet and first provider.
pub fn market_with_alphas(template: &MarketConfig, alphas: &[f64]) -> Result<Market, StackelbergError> {
    let base = template.cps.first().cloned().unwrap_or(CpParams::new(2.0, 1.0, 0.0, 1));
    let cps = alphas.iter().map(|&alpha| CpParams { alpha, ..base.clone() }).collect();
    validate_market(&MarketConfig { fleet: template.fleet.clone(), cps }).map_err(StackelbergError::Validation)
}

/// A provider's utility at the equilibrium and at half and double its quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpSweepRow {
    pub num_cps: usize,
    pub cp: usize,
    pub alpha: f64,
    pub price: f64,
    pub q_star: f64,
    pub u_star: f64,
    pub u_half: f64,
    pub u_double: f64,
}

impl CpSweepRow {
    pub fn csv_header() -> Vec<String> {
        ["M", "cp", "alpha", "pi_star", "q_star", "u_star", "u_half", "u_double"].map(String::from).to_vec()
    }

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.num_cps.to_string(),
            self.cp.to_string(),
            format_float(self.alpha),
            format_float(self.price),
            format_float(self.q_star),
            format_float(self.u_star),
            format_float(self.u_half),
            format_float(self.u_double),
        ]
    }
}

/// For each provider count in `range`, prices the market optimally and reports
/// every provider's utility at `q*`, `q*/2` and `2 q*` (others held at `q*`).
pub fn cp_sweep(template: &MarketConfig, range: RangeInclusive<usize>, shift: f64) -> Result<Vec<CpSweepRow>, StackelbergError> {
    let mut rows = Vec::new();
    for m_count in range {
        let market = market_with_alphas(template, &alpha_rule(m_count, shift))?;
        let price = PricingModel::new(&market)?.optimal_price()?.price;
        let q = follower::solve_ne_linear(&market, price)?.profile;
        for (m, cp) in market.cps.iter().enumerate() {
            let u = |x: f64| follower::cp_utility_in(&market, price, &q.with_entry(m, x), m);
            rows.push(CpSweepRow {
                num_cps: m_count,
                cp: m + 1,
                alpha: cp.alpha,
                price,
                q_star: q.q[m],
                u_star: u(q.q[m])?,
                u_half: u(q.q[m] / 2.0)?,
                u_double: u(2.0 * q.q[m])?,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template(s: f64) -> MarketConfig {
        MarketConfig::new(vec![s], vec![CpParams::new(5.0, 1.0, 0.2, 1000), CpParams::new(7.0, 1.0, 0.2, 1000)])
    }

    #[test]
    fn alpha_rule_values() {
        assert_eq!(alpha_rule(2, 0.0), vec![3.0, 4.0]);
        assert_eq!(alpha_rule(3, -1.0), vec![3.0, 4.0, 5.0]);
    }

    #[test]
    fn grid_endpoints() {
        assert_eq!(price_grid(0.1, 0.5, 5), vec![0.1, 0.2, 0.30000000000000004, 0.4, 0.5]);
        assert_eq!(price_grid(0.2, 0.9, 1), vec![0.2]);
    }

    #[test]
    fn sweep_flags_single_optimal_price() {
        let market = validate_market(&template(100.0)).unwrap();
        let opt = leader::optimal_price(&market).unwrap().price;
        let rows = price_sweep(&market, &[opt]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].optimal && rows[0].feasible);
    }

    #[test]
    fn sweep_maximum_at_flagged_row() {
        let market = validate_market(&template(100.0)).unwrap();
        let (lo, hi) = auto_bounds(std::slice::from_ref(&market)).unwrap();
        let rows = price_sweep(&market, &price_grid(lo, hi, 500)).unwrap();
        assert_eq!(rows.len(), 501);
        let best = rows.iter().max_by(|a, b| a.mno_utility.total_cmp(&b.mno_utility)).unwrap();
        assert!(best.optimal);
        assert_eq!(rows.iter().filter(|r| r.optimal).count(), 1);
        assert!(rows.windows(2).all(|w| w[0].price < w[1].price));
    }

    #[test]
    fn infeasible_prices_marked() {
        let market = validate_market(&template(100.0)).unwrap();
        let (lower, _) = leader::feasible_price_range(&market).unwrap();
        let rows = price_sweep(&market, &[lower * 0.5]).unwrap();
        assert!(!rows[0].feasible);
        assert_eq!(rows[0].mno_utility, f64::NEG_INFINITY);
    }

    #[test]
    fn cp_sweep_rejects_bad_alpha_rule() {
        assert!(matches!(cp_sweep(&template(100.0), 2..=4, -3.5), Err(StackelbergError::Validation(_))));
    }

    #[test]
    fn cp_sweep_row_count() {
        let rows = cp_sweep(&template(100.0), 2..=4, 0.0).unwrap();
        assert_eq!(rows.len(), 2 + 3 + 4);
        assert!(rows.iter().all(|r| r.u_star > r.u_half && r.u_star > r.u_double));
    }
}
