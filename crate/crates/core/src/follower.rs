//! The content providers' non-cooperative sub-game.
//!
//! Each provider `m` picks a quantity `q_m >= 0` of files to cache, earning
//! `log(1 + q_m / (1 + J_m / alpha_m))` in user satisfaction and paying
//! `price * q_m`. `J_m` is the total quantity requested by the others.
//!
//! The Nash equilibrium is obtained by solving the stacked first-order
//! conditions as a dense `M x M` linear system ([`solve_ne_linear`]); the
//! printed closed form ([`ne_closed_form`]) is kept alongside for
//! cross-checking.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Market, QuantityProfile};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FollowerError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("equilibrium system is singular")]
    SingularSystem,
    #[error("best-response dynamics did not converge after {} rounds (residual {})", .0.rounds(), .0.final_residual)]
    NonConvergence(Box<BrTrace>),
}

fn domain(msg: impl Into<String>) -> FollowerError {
    FollowerError::Domain(msg.into())
}

/// User satisfaction of a provider, in nats.
pub fn cp_revenue(q_m: f64, others: f64, alpha: f64) -> Result<f64, FollowerError> {
    if !(q_m >= 0.0 && others >= 0.0 && alpha > 0.0) {
        return Err(domain(format!("cp_revenue(q={q_m}, J={others}, alpha={alpha})")));
    }
    Ok((q_m / (1.0 + others / alpha)).ln_1p())
}

/// Amount paid to the operator.
pub fn cp_cost(price: f64, q_m: f64) -> Result<f64, FollowerError> {
    if !(price >= 0.0 && q_m >= 0.0) {
        return Err(domain(format!("cp_cost(price={price}, q={q_m})")));
    }
    Ok(price * q_m)
}

pub fn cp_utility(price: f64, q_m: f64, others: f64, alpha: f64) -> Result<f64, FollowerError> {
    Ok(cp_revenue(q_m, others, alpha)? - cp_cost(price, q_m)?)
}

/// Utility of provider `m` under the full profile `q`.
pub fn cp_utility_in(market: &Market, price: f64, q: &QuantityProfile, m: usize) -> Result<f64, FollowerError> {
    cp_utility(price, q.q[m], q.others(m), market.cps[m].alpha)
}

/// Unique maximizer of [`cp_utility`] over `q_m >= 0`:
/// `max(0, 1/price - 1 - J_m/alpha)`.
pub fn best_response(price: f64, others: f64, alpha: f64) -> Result<f64, FollowerError> {
    if !(price > 0.0) {
        return Err(domain(format!("best_response needs a positive price, got {price}")));
    }
    if !(others >= 0.0 && alpha > 0.0) {
        return Err(domain(format!("best_response(J={others}, alpha={alpha})")));
    }
    Ok((1.0 / price - 1.0 - others / alpha).max(0.0))
}

/// Update order used by [`br_dynamics`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BrSchedule {
    /// Every provider responds to the previous round's profile.
    #[default]
    Simultaneous,
    /// Providers respond in index order, each seeing the updates made before it.
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub schedule: BrSchedule,
}

impl Default for BrOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 10_000, schedule: BrSchedule::Simultaneous }
    }
}

/// Recorded run of best-response dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrTrace {
    /// Profiles visited, starting with the initial one.
    pub iterations: Vec<QuantityProfile>,
    /// Max-norm change that produced each profile; `residuals[0]` belongs to the
    /// initial profile and is `None`.
    pub residuals: Vec<Option<f64>>,
    pub converged: bool,
    pub final_residual: f64,
}

impl BrTrace {
    /// Number of best-response rounds performed.
    pub fn rounds(&self) -> usize {
        self.iterations.len() - 1
    }

    pub fn last(&self) -> &QuantityProfile {
        self.iterations.last().expect("trace always holds the initial profile")
    }

    pub fn csv_header(&self) -> Vec<String> {
        let m = self.iterations[0].len();
        let mut header = vec!["iter".to_string()];
        header.extend((1..=m).map(|i| format!("q_{i}")));
        header.push("residual".into());
        header
    }

    /// One record per profile: `iter, q_1, ..., q_M, residual`.
    pub fn csv_records(&self) -> Vec<Vec<String>> {
        self.iterations
            .iter()
            .zip(&self.residuals)
            .enumerate()
            .map(|(i, (p, r))| {
                let mut row = vec![i.to_string()];
                row.extend(p.q.iter().map(|&x| crate::format_float(x)));
                row.push(r.map(crate::format_float).unwrap_or_default());
                row
            })
            .collect()
    }
}

/// Iterates best responses from `initial` until the max-norm change of a round
/// drops to `tol`. A run that exhausts `max_iter` rounds is returned as
/// [`FollowerError::NonConvergence`] carrying the full trace.
pub fn br_dynamics(
    market: &Market,
    price: f64,
    initial: &QuantityProfile,
    opts: &BrOptions,
) -> Result<BrTrace, FollowerError> {
    if !(price > 0.0 && price < 1.0) {
        return Err(domain(format!("price {price} outside (0, 1)")));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(domain("br_dynamics needs tol > 0 and max_iter >= 1"));
    }
    if initial.len() != market.num_cps() || !initial.is_nonnegative() {
        return Err(domain("initial profile must be non-negative with one entry per CP"));
    }

    let alphas = market.alphas();
    let mut current = QuantityProfile::new(initial.q.clone());
    let mut trace = BrTrace {
        iterations: vec![current.clone()],
        residuals: vec![None],
        converged: false,
        final_residual: f64::INFINITY,
    };

    for _ in 0..opts.max_iter {
        let next = match opts.schedule {
            BrSchedule::Simultaneous => {
                let total = current.total();
                let mut q = Vec::with_capacity(alphas.len());
                for (m, &alpha) in alphas.iter().enumerate() {
                    q.push(best_response(price, total - current.q[m], alpha)?);
                }
                QuantityProfile::new(q)
            }
            BrSchedule::Sequential => {
                let mut next = current.clone();
                for (m, &alpha) in alphas.iter().enumerate() {
                    next.q[m] = best_response(price, next.others(m), alpha)?;
                }
                next
            }
        };
        let residual = next.max_abs_diff(&current);
        trace.iterations.push(next.clone());
        trace.residuals.push(Some(residual));
        trace.final_residual = residual;
        current = next;
        if residual <= opts.tol {
            trace.converged = true;
            return Ok(trace);
        }
    }
    Err(FollowerError::NonConvergence(Box::new(trace)))
}

/// Equilibrium profile together with the indices that had to be clamped to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeSolution {
    pub profile: QuantityProfile,
    pub clamped: Vec<usize>,
}

/// Solves `D q = C` where `D` has ones on the diagonal and `1/alpha_m` elsewhere
/// in row `m`, and every entry of `C` is `1/price - 1`.
///
/// Negative components (which the interior analysis does not allow for) are
/// clamped to zero and listed in [`NeSolution::clamped`].
pub fn solve_ne_linear(market: &Market, price: f64) -> Result<NeSolution, FollowerError> {
    if !(price > 0.0 && price < 1.0) {
        return Err(domain(format!("price {price} outside (0, 1)")));
    }
    let alphas = market.alphas();
    let m = alphas.len();
    let d = DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { 1.0 / alphas[i] });
    let c = DVector::from_element(m, 1.0 / price - 1.0);
    let q = d.lu().solve(&c).ok_or(FollowerError::SingularSystem)?;

    let mut clamped = Vec::new();
    let q = q
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if x < 0.0 {
                clamped.push(i);
                0.0
            } else {
                x
            }
        })
        .collect();
    Ok(NeSolution { profile: QuantityProfile::new(q), clamped })
}

/// Closed-form equilibrium, transcribed term by term (`a_m`, `b_m`, `D`).
///
/// Empty sums are zero and empty products one, which yields the two-provider
/// special case. A single provider has no interaction terms and gets
/// `1/price - 1`.
pub fn closed_form_quantities(alphas: &[f64], price: f64) -> Result<Vec<f64>, FollowerError> {
    if !(price > 0.0 && price < 1.0) {
        return Err(domain(format!("price {price} outside (0, 1)")));
    }
    if alphas.is_empty() {
        return Err(domain("no providers"));
    }
    if let Some(a) = alphas.iter().find(|&&a| a == 1.0 || a == 0.0 || !a.is_finite()) {
        return Err(domain(format!("closed form undefined for alpha = {a}")));
    }
    let scale = 1.0 / price - 1.0;
    let m_count = alphas.len();
    if m_count == 1 {
        return Ok(vec![scale]);
    }

    let a1 = alphas[0];
    let a_last = alphas[m_count - 1];
    let k1 = (1.0 - a1) / a1;
    let k_last = (1.0 - a_last) / a_last;
    // indices 1.. are providers 2..=M
    let rest = 1..m_count;

    let d = (1.0 - k1 * rest.clone().map(|l| 1.0 / (alphas[l] - 1.0)).sum::<f64>())
        * rest.clone().map(|l| 1.0 - 1.0 / alphas[l]).product::<f64>();

    let quantities = (0..m_count)
        .map(|m| {
            let am = alphas[m];
            let (a, b) = if m == 0 {
                let inner = 1..m_count - 1;
                let sum: f64 = inner.clone().map(|l| (a1 - alphas[l]) / ((alphas[l] - 1.0) * a1)).sum();
                let prod: f64 = inner.map(|l| 1.0 - 1.0 / alphas[l]).product();
                (1.0 - 1.0 / a1 - k_last * sum, prod)
            } else {
                let others = rest.clone().filter(|&l| l != m);
                let sum: f64 = others.clone().map(|l| (am - alphas[l]) / ((alphas[l] - 1.0) * am)).sum();
                let prod: f64 = others.map(|l| 1.0 - 1.0 / alphas[l]).product();
                (1.0 - 1.0 / am - k1 * sum, prod)
            };
            scale * a * b / d
        })
        .collect();
    Ok(quantities)
}

pub fn ne_closed_form(market: &Market, price: f64) -> Result<QuantityProfile, FollowerError> {
    closed_form_quantities(&market.alphas(), price).map(QuantityProfile::new)
}

/// Largest relative gap between the closed form and the linear solve.
pub fn closed_form_discrepancy(market: &Market, price: f64) -> Result<f64, FollowerError> {
    let linear = solve_ne_linear(market, price)?.profile;
    let closed = ne_closed_form(market, price)?;
    Ok(linear
        .q
        .iter()
        .zip(&closed.q)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max))
}

/// Nearest-integer rounding for uncoded caching. Ties go away from zero.
pub fn round_uncoded(q: &QuantityProfile) -> QuantityProfile {
    QuantityProfile { q: q.q.clone(), rounded: Some(q.q.iter().map(|&x| x.round() as i64).collect()) }
}

/// Caps each quantity at its provider's catalog size. Returns the clamped indices.
pub fn clamp_to_catalog(market: &Market, q: &mut QuantityProfile) -> Vec<usize> {
    let mut clamped = Vec::new();
    for (m, cp) in market.cps.iter().enumerate() {
        let cap = cp.catalog_size as f64;
        if q.q[m] > cap {
            q.q[m] = cap;
            clamped.push(m);
        }
    }
    clamped
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CpParams, MarketConfig};

    const LN2: f64 = std::f64::consts::LN_2;

    fn market(alphas: &[f64]) -> Market {
        let cps = alphas.iter().map(|&a| CpParams::new(a, 1.0, 0.2, 1000)).collect();
        Market::new(MarketConfig::new(vec![100.0], cps)).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn revenue_examples() {
        assert_eq!(cp_revenue(0.0, 5.0, 5.0).unwrap(), 0.0);
        assert!(close(cp_revenue(1.0, 0.0, 3.3).unwrap(), LN2, 1e-15));
        assert!(close(cp_revenue(2.0, 3.0, 6.0).unwrap(), 0.847_297_860_387_203_6, 1e-15));
        assert!(cp_revenue(-1.0, 0.0, 5.0).is_err());
        assert!(cp_revenue(1.0, -1.0, 5.0).is_err());
        assert!(cp_revenue(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn cost_examples() {
        assert!(close(cp_cost(0.3, 2.0).unwrap(), 0.6, 1e-15));
        assert_eq!(cp_cost(0.0, 7.0).unwrap(), 0.0);
        assert_eq!(cp_cost(1.0, 0.0).unwrap(), 0.0);
        assert!(cp_cost(-0.1, 1.0).is_err());
    }

    #[test]
    fn utility_examples() {
        assert_eq!(cp_utility(0.3, 0.0, 0.0, 5.0).unwrap(), 0.0);
        assert!(close(cp_utility(0.3, 1.0, 0.0, 5.0).unwrap(), 0.393_147_180_559_945_3, 1e-15));
        let at_ne = cp_utility(0.3, 98.0 / 51.0, 35.0 / 17.0, 5.0).unwrap();
        assert!(close(at_ne, 0.282_661_729_798_912_3, 1e-14));
        for dq in [-0.1, 0.1] {
            assert!(cp_utility(0.3, 98.0 / 51.0 + dq, 35.0 / 17.0, 5.0).unwrap() < at_ne);
        }
    }

    #[test]
    fn best_response_examples() {
        assert_eq!(best_response(1.0, 0.0, 5.0).unwrap(), 0.0);
        assert!(close(best_response(0.3, 0.0, 5.0).unwrap(), 7.0 / 3.0, 1e-15));
        assert!(close(best_response(0.3, 35.0 / 17.0, 5.0).unwrap(), 98.0 / 51.0, 1e-14));
        assert!(best_response(0.0, 0.0, 5.0).is_err());
        assert!(best_response(-0.5, 0.0, 5.0).is_err());
        // large competitors push the response to the boundary
        assert_eq!(best_response(0.3, 100.0, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn linear_solve_examples() {
        let ne = solve_ne_linear(&market(&[5.0, 7.0]), 0.3).unwrap();
        assert!(ne.clamped.is_empty());
        assert!(close(ne.profile.q[0], 98.0 / 51.0, 1e-14));
        assert!(close(ne.profile.q[1], 35.0 / 17.0, 1e-14));

        let single = solve_ne_linear(&market(&[3.0]), 0.5).unwrap();
        assert_eq!(single.profile.q, vec![1.0]);

        let three = solve_ne_linear(&market(&[4.0, 5.0, 6.0]), 0.2).unwrap().profile;
        for (x, exact) in three.q.iter().zip([268.0 / 107.0, 308.0 / 107.0, 332.0 / 107.0]) {
            assert!(close(*x, exact, 1e-13));
        }
        assert!(solve_ne_linear(&market(&[5.0, 7.0]), 1.0).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let q = ne_closed_form(&market(&[5.0, 7.0]), 0.3).unwrap();
        assert!(close(q.q[0], 98.0 / 51.0, 1e-14));
        assert!(close(q.q[1], 35.0 / 17.0, 1e-14));

        let alpha = 4.5;
        let price = 0.15;
        let q = ne_closed_form(&market(&[alpha, alpha]), price).unwrap();
        let expected = (1.0 / price - 1.0) * alpha / (alpha + 1.0);
        assert!(close(q.q[0], expected, 1e-13) && close(q.q[1], expected, 1e-13));

        let q = ne_closed_form(&market(&[2.0]), 0.25).unwrap();
        assert_eq!(q.q, vec![3.0]);

        assert!(closed_form_quantities(&[1.0, 5.0], 0.3).is_err());
    }

    #[test]
    fn br_dynamics_scenario() {
        let m = market(&[5.0, 7.0]);
        let trace = br_dynamics(&m, 0.3, &QuantityProfile::zeros(2), &BrOptions::default()).unwrap();
        assert!(trace.converged);
        assert!(trace.final_residual <= 1e-9);
        assert_eq!(trace.iterations[0].q, vec![0.0, 0.0]);
        assert!(close(trace.last().q[0], 98.0 / 51.0, 1e-9));
        assert!(close(trace.last().q[1], 35.0 / 17.0, 1e-9));

        let seq = BrOptions { schedule: BrSchedule::Sequential, ..Default::default() };
        let trace = br_dynamics(&m, 0.3, &QuantityProfile::zeros(2), &seq).unwrap();
        assert!(close(trace.last().q[0], 98.0 / 51.0, 1e-9));
    }

    #[test]
    fn br_dynamics_from_fixed_point() {
        let m = market(&[4.0]);
        let start = QuantityProfile::new(vec![1.0 / 0.4 - 1.0]);
        let trace = br_dynamics(&m, 0.4, &start, &BrOptions::default()).unwrap();
        assert_eq!(trace.rounds(), 1);
        assert_eq!(trace.final_residual, 0.0);
    }

    #[test]
    fn br_dynamics_non_convergence_keeps_trace() {
        let opts = BrOptions { tol: 1e-15, max_iter: 3, ..Default::default() };
        match br_dynamics(&market(&[5.0, 7.0]), 0.3, &QuantityProfile::zeros(2), &opts) {
            Err(FollowerError::NonConvergence(trace)) => {
                assert_eq!(trace.iterations.len(), 4);
                assert!(!trace.converged);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn trace_csv_layout() {
        let trace = br_dynamics(&market(&[5.0, 7.0]), 0.3, &QuantityProfile::zeros(2), &BrOptions::default()).unwrap();
        assert_eq!(trace.csv_header(), ["iter", "q_1", "q_2", "residual"]);
        let rows = trace.csv_records();
        assert_eq!(rows.len(), trace.iterations.len());
        assert_eq!(rows[0], ["0", "0", "0", ""]);
    }

    #[test]
    fn rounding() {
        let r = round_uncoded(&QuantityProfile::new(vec![1.92157, 2.05882]));
        assert_eq!(r.rounded, Some(vec![2, 2]));
        assert_eq!(r.q, vec![1.92157, 2.05882]);
        assert_eq!(round_uncoded(&QuantityProfile::new(vec![0.5])).rounded, Some(vec![1]));
        assert_eq!(round_uncoded(&QuantityProfile::new(vec![2.5])).rounded, Some(vec![3]));
        assert_eq!(round_uncoded(&QuantityProfile::new(vec![0.0])).rounded, Some(vec![0]));
    }

    #[test]
    fn catalog_clamp() {
        let cps = vec![CpParams::new(5.0, 1.0, 0.2, 1), CpParams::new(7.0, 1.0, 0.2, 10)];
        let m = Market::new(MarketConfig::new(vec![100.0], cps)).unwrap();
        let mut q = solve_ne_linear(&m, 0.3).unwrap().profile;
        assert_eq!(clamp_to_catalog(&m, &mut q), vec![0]);
        assert_eq!(q.q[0], 1.0);
    }
}
