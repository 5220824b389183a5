//! Brute-force checkers for the analytic results.
//!
//! Utilities are re-evaluated here from their definitions; nothing in this
//! module calls the best-response formula, the equilibrium solvers or the
//! optimal-price formula.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::leader::PricingModel;
use crate::model::{Market, QuantityProfile};

/// Absolute utility gain tolerated before a deviation counts as profitable.
pub const NE_GAIN_TOL: f64 = 1e-12;
pub const GOLDEN_TOL: f64 = 1e-10;
pub const GRID_SHRINK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub passed: bool,
    pub worst_violation: f64,
    pub witness: Option<String>,
}

fn provider_utility(price: f64, q_m: f64, others: f64, alpha: f64) -> f64 {
    (1.0 + q_m / (1.0 + others / alpha)).ln() - price * q_m
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
/// Endpoints are compared against the interior estimate so boundary maxima
/// are found exactly.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    golden_section_max_by(|a, b| f(a) - f(b), lo, hi, tol)
}

/// Golden-section search driven by a difference `gain(a, b) = f(a) - f(b)`.
///
/// Near a flat optimum `f(a)` and `f(b)` agree to machine precision long
/// before `a` and `b` do; a difference evaluated without cancellation keeps
/// the bracket shrinking down to `tol`.
pub fn golden_section_max_by<G: Fn(f64, f64) -> f64>(gain: G, lo: f64, hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    while b - a > tol {
        if gain(c, d) >= 0.0 {
            b = d;
            d = c;
            c = b - inv_phi * (b - a);
        } else {
            a = c;
            c = d;
            d = a + inv_phi * (b - a);
        }
    }
    let mut best = 0.5 * (a + b);
    for x in [lo, hi] {
        if gain(x, best) > 0.0 {
            best = x;
        }
    }
    best
}

/// Maximizes a provider's utility over `[0, search_bound]` numerically.
pub fn numeric_best_response(price: f64, others: f64, alpha: f64, search_bound: f64) -> f64 {
    let k = 1.0 + others / alpha;
    // u(a) - u(b) = ln((k + a) / (k + b)) - price (a - b)
    let gain = |a: f64, b: f64| ((a - b) / (k + b)).ln_1p() - price * (a - b);
    golden_section_max_by(gain, 0.0, search_bound, GOLDEN_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridArgmax {
    pub price: f64,
    pub utility: f64,
    /// Distance between neighbouring grid prices.
    pub spacing: f64,
}

/// Argmax of the operator utility over `grid_points` uniformly spaced prices
/// in the feasible range, shrunk by [`GRID_SHRINK`] at both ends. Ties go to the
/// smaller price, so the parallel reduction is deterministic.
pub fn grid_argmax_price(model: &PricingModel, grid_points: usize) -> GridArgmax {
    assert!(grid_points >= 2, "grid needs at least two points");
    let (lower, upper) = model.feasible_range();
    let lo = lower + GRID_SHRINK;
    let hi = upper - GRID_SHRINK;
    let spacing = (hi - lo) / (grid_points - 1) as f64;

    let (best_i, utility) = (0..grid_points)
        .into_par_iter()
        .map(|i| {
            let price = lo + spacing * i as f64;
            (i, model.utility(price).unwrap_or(f64::NEG_INFINITY))
        })
        .reduce(
            || (usize::MAX, f64::NEG_INFINITY),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    GridArgmax { price: lo + spacing * best_i as f64, utility, spacing }
}

/// Unilateral deviation applied to one provider's quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Deviation {
    /// `q_m + delta`
    Absolute(f64),
    /// `q_m * (1 + delta)`
    Relative(f64),
}

impl Deviation {
    fn apply(self, q: f64) -> f64 {
        match self {
            Deviation::Absolute(d) => (q + d).max(0.0),
            Deviation::Relative(d) => (q * (1.0 + d)).max(0.0),
        }
    }
}

/// Checks that no provider gains by moving its own quantity while the others
/// stay fixed. `worst_violation` is the largest gain found.
pub fn verify_ne(market: &Market, price: f64, q: &QuantityProfile, deviations: &[Deviation]) -> OracleVerdict {
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    for (m, cp) in market.cps.iter().enumerate() {
        let others: f64 = q.q.iter().enumerate().filter(|&(l, _)| l != m).map(|(_, x)| x).sum();
        let base = provider_utility(price, q.q[m], others, cp.alpha);
        for &dev in deviations {
            let moved = dev.apply(q.q[m]);
            let gain = provider_utility(price, moved, others, cp.alpha) - base;
            if gain > worst {
                worst = gain;
                if gain > NE_GAIN_TOL {
                    witness = Some(format!("CP {m}: q {} -> {moved} gains {gain:e}", q.q[m]));
                }
            }
        }
    }
    if worst == f64::NEG_INFINITY {
        worst = 0.0;
    }
    OracleVerdict { passed: worst <= NE_GAIN_TOL, worst_violation: worst, witness }
}

/// The standard deviation set: `±0.1`, `±0.01` absolute and `±1%`, `±10%` relative.
pub fn standard_deviations() -> Vec<Deviation> {
    let mut devs = Vec::new();
    for d in [0.1, 0.01] {
        devs.push(Deviation::Absolute(d));
        devs.push(Deviation::Absolute(-d));
        devs.push(Deviation::Relative(d));
        devs.push(Deviation::Relative(-d));
    }
    devs
}
