//! Stackelberg pricing game between a mobile network operator, which charges a
//! per-file price for caching at its small base stations, and content
//! providers competing for that cache space.
//!
//! * [`model`]: market instance and validation
//! * [`follower`]: providers' utilities, best responses and Nash equilibrium
//! * [`leader`]: operator utility and optimal price
//! * [`stackelberg`]: end-to-end solve producing an [`EquilibriumReport`]
//! * [`oracle`]: brute-force verifiers
//! * [`scenario`]: price and provider-count sweeps

pub mod follower;
pub mod leader;
pub mod model;
pub mod oracle;
pub mod scenario;
pub mod stackelberg;

pub use follower::{BrOptions, BrSchedule, BrTrace, FollowerError, NeSolution};
pub use leader::{LeaderError, Parity, ParityConvention, PriceDecision, PricingModel, RtCoefficients};
pub use model::{CpParams, Market, MarketConfig, QuantityProfile, SbsFleet, ValidationError, ValidationErrors};
pub use oracle::{Deviation, OracleVerdict};
pub use stackelberg::{Diagnostic, EquilibriumReport, SolveOptions, StackelbergError};

/// Formats a float with 12 significant digits, `%g` style.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    const DIGITS: i32 = 12;
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::format_float;

    #[test]
    fn float_formatting() {
        assert_eq!(format_float(98.0 / 51.0), "1.92156862745");
        assert_eq!(format_float(0.3), "0.3");
        assert_eq!(format_float(100.0), "100");
        assert_eq!(format_float(-1.0 / 95.6), "-0.010460251046");
        assert_eq!(format_float(1.5e-9), "1.5e-9");
        assert_eq!(format_float(f64::NEG_INFINITY), "-inf");
        assert_eq!(format_float(0.0), "0");
    }
}
