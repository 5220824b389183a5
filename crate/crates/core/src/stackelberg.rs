//! One-shot leader/follower game: price first, then the providers' equilibrium.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::follower::{self, BrOptions, BrTrace, FollowerError};
use crate::leader::{self, LeaderError, Parity, ParityConvention, PriceDecision, PricingModel};
use crate::model::{validate_market, Market, MarketConfig, QuantityProfile, ValidationErrors};
use crate::oracle;

/// Relative gap above which the closed form is reported as disagreeing.
pub const CLOSED_FORM_TOL: f64 = 1e-9;
/// Max-norm gap tolerated between the best-response fixed point and the linear solve.
pub const BR_AGREEMENT_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum StackelbergError {
    #[error("invalid market:\n{0}")]
    Validation(ValidationErrors),
    #[error(transparent)]
    Leader(LeaderError),
    #[error(transparent)]
    Follower(FollowerError),
}

impl From<LeaderError> for StackelbergError {
    fn from(e: LeaderError) -> Self {
        match e {
            LeaderError::Follower(f) => StackelbergError::Follower(f),
            other => StackelbergError::Leader(other),
        }
    }
}

impl From<FollowerError> for StackelbergError {
    fn from(e: FollowerError) -> Self {
        StackelbergError::Follower(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub parity: ParityConvention,
    /// Run best-response dynamics at the optimal price and compare with the solve.
    pub run_br: bool,
    /// Start of the dynamics; zeros when `None`.
    pub br_initial: Option<Vec<f64>>,
    pub br: BrOptions,
    /// Cap quantities at the catalog size.
    pub strict_catalog: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            parity: ParityConvention::Even,
            run_br: true,
            br_initial: None,
            br: BrOptions::default(),
            strict_catalog: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityUsage {
    pub d: f64,
    #[serde(rename = "S")]
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    /// Equilibrium component was negative and clamped to zero.
    ClampedComponent { cp: usize },
    /// Quantity exceeded the catalog size and was capped.
    CatalogClamped { cp: usize },
    ClosedFormMismatch { max_rel_diff: f64 },
    BrMismatch { max_abs_diff: f64 },
    NeVerificationFailed { worst_gain: f64 },
    /// Stored copies reach capacity at the equilibrium.
    Infeasible { d: f64, capacity: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub price: PriceDecision,
    pub quantities: QuantityProfile,
    pub per_cp_utilities: Vec<f64>,
    pub mno_utility: f64,
    /// Operator utility recomputed on the rounded quantities; for reporting only.
    pub mno_utility_rounded: f64,
    pub capacity_used: CapacityUsage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub br_trace: Option<BrTrace>,
    pub diagnostics: Vec<Diagnostic>,
}

impl EquilibriumReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    pub fn is_infeasible(&self) -> bool {
        self.diagnostics.iter().any(|d| matches!(d, Diagnostic::Infeasible { .. }))
    }

    pub fn csv_header() -> Vec<String> {
        ["cp", "price", "q", "q_rounded", "u_m", "u_o", "d", "S"].map(String::from).to_vec()
    }

    /// One flattened record per provider.
    pub fn csv_records(&self) -> Vec<Vec<String>> {
        let f = crate::format_float;
        let rounded = self.quantities.rounded.clone().unwrap_or_default();
        (0..self.quantities.len())
            .map(|m| {
                vec![
                    (m + 1).to_string(),
                    f(self.price.price),
                    f(self.quantities.q[m]),
                    rounded.get(m).map(|n| n.to_string()).unwrap_or_default(),
                    f(self.per_cp_utilities[m]),
                    f(self.mno_utility),
                    f(self.capacity_used.d),
                    f(self.capacity_used.s),
                ]
            })
            .collect()
    }
}

/// Validates `config`, then solves the game.
pub fn solve_stackelberg(config: &MarketConfig, options: &SolveOptions) -> Result<EquilibriumReport, StackelbergError> {
    let market = validate_market(config).map_err(StackelbergError::Validation)?;
    solve_market(&market, options)
}

pub fn solve_market(market: &Market, options: &SolveOptions) -> Result<EquilibriumReport, StackelbergError> {
    let model = PricingModel::with_convention(market, options.parity)?;
    let decision = model.optimal_price()?;
    let price = decision.price;
    let mut diagnostics = Vec::new();

    let ne = follower::solve_ne_linear(market, price)?;
    diagnostics.extend(ne.clamped.iter().map(|&cp| Diagnostic::ClampedComponent { cp }));
    let mut q = ne.profile;

    let mismatch = follower::closed_form_discrepancy(market, price)?;
    if mismatch > CLOSED_FORM_TOL {
        diagnostics.push(Diagnostic::ClosedFormMismatch { max_rel_diff: mismatch });
    }

    let br_trace = if options.run_br {
        let initial = QuantityProfile::new(options.br_initial.clone().unwrap_or_else(|| vec![0.0; market.num_cps()]));
        let trace = follower::br_dynamics(market, price, &initial, &options.br)?;
        let gap = trace.last().max_abs_diff(&q);
        if gap > BR_AGREEMENT_TOL {
            diagnostics.push(Diagnostic::BrMismatch { max_abs_diff: gap });
        }
        Some(trace)
    } else {
        None
    };

    let verdict = oracle::verify_ne(market, price, &q, &oracle::standard_deviations());
    if !verdict.passed {
        diagnostics.push(Diagnostic::NeVerificationFailed { worst_gain: verdict.worst_violation });
    }

    if options.strict_catalog {
        let capped = follower::clamp_to_catalog(market, &mut q);
        diagnostics.extend(capped.into_iter().map(|cp| Diagnostic::CatalogClamped { cp }));
    }

    let quantities = follower::round_uncoded(&q);
    let per_cp_utilities = (0..market.num_cps())
        .map(|m| follower::cp_utility_in(market, price, &q, m))
        .collect::<Result<Vec<_>, _>>()?;
    let mno_utility = model.utility(price)?;
    let mno_utility_rounded = leader::mno_utility_on_profile(price, &quantities, market, Parity::Even);

    let d = leader::cached_copies(&q, market, Parity::Even);
    let s = market.capacity();
    if !(d < s) {
        diagnostics.push(Diagnostic::Infeasible { d, capacity: s });
    }

    Ok(EquilibriumReport {
        price: decision,
        quantities,
        per_cp_utilities,
        mno_utility,
        mno_utility_rounded,
        capacity_used: CapacityUsage { d, s },
        br_trace,
        diagnostics,
    })
}
