//! Market instance: small-cell fleet, content providers and quantity profiles.

use std::fmt;
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cache sizes of the small base stations, in files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SbsFleet {
    pub capacities: Vec<f64>,
}

impl SbsFleet {
    pub fn new(capacities: Vec<f64>) -> Self {
        Self { capacities }
    }

    /// Aggregate cache capacity `S`.
    pub fn total(&self) -> f64 {
        total_capacity(self)
    }
}

/// Exact sum of the per-SBS capacities.
pub fn total_capacity(fleet: &SbsFleet) -> f64 {
    fleet.capacities.iter().sum()
}

/// One content provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpParams {
    /// Traffic load: amount of requests generated by the provider's users.
    pub alpha: f64,
    /// Mean copy weight of the provider's requested files.
    pub p_mean: f64,
    /// Quantization step of the copy weights.
    pub delta_p: f64,
    /// Number of files in the provider's catalog.
    pub catalog_size: u64,
}

impl CpParams {
    pub fn new(alpha: f64, p_mean: f64, delta_p: f64, catalog_size: u64) -> Self {
        Self { alpha, p_mean, delta_p, catalog_size }
    }
}

/// A raw, unvalidated game instance as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    #[serde(rename = "sbs_capacities")]
    pub fleet: SbsFleet,
    pub cps: Vec<CpParams>,
}

impl MarketConfig {
    pub fn new(capacities: Vec<f64>, cps: Vec<CpParams>) -> Self {
        Self { fleet: SbsFleet::new(capacities), cps }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("market config is always serializable")
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("SBS capacity list is empty")]
    EmptyFleet,
    #[error("SBS {n} has invalid capacity {value}")]
    NegativeCapacity { n: usize, value: f64 },
    #[error("total cache capacity must be positive, got {0}")]
    NonPositiveCapacity(f64),
    #[error("content provider list is empty")]
    EmptyCpList,
    #[error("CP {m}: alpha = {alpha} must exceed 1 and be at least M = {required}")]
    AlphaTooSmall { m: usize, alpha: f64, required: usize },
    #[error("CP {m}: {reason}")]
    BadQuantization { m: usize, reason: String },
}

/// Every violation found in a config, in discovery order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

/// Collects all invariant violations of `config`. Returns the config unchanged
/// (wrapped as a [`Market`]) when none are found.
pub fn validate_market(config: &MarketConfig) -> Result<Market, ValidationErrors> {
    let mut errors = Vec::new();

    let caps = &config.fleet.capacities;
    if caps.is_empty() {
        errors.push(ValidationError::EmptyFleet);
    }
    for (n, &s) in caps.iter().enumerate() {
        if !(s.is_finite() && s >= 0.0) {
            errors.push(ValidationError::NegativeCapacity { n, value: s });
        }
    }
    let total = total_capacity(&config.fleet);
    if !(total > 0.0 && total.is_finite()) {
        errors.push(ValidationError::NonPositiveCapacity(total));
    }

    let m_count = config.cps.len();
    if m_count == 0 {
        errors.push(ValidationError::EmptyCpList);
    }
    for (m, cp) in config.cps.iter().enumerate() {
        let alpha_ok = cp.alpha.is_finite() && cp.alpha > 1.0 && cp.alpha >= m_count as f64;
        if !alpha_ok {
            errors.push(ValidationError::AlphaTooSmall { m, alpha: cp.alpha, required: m_count });
        }
        if !(cp.p_mean.is_finite() && cp.p_mean > 0.0) {
            errors.push(ValidationError::BadQuantization {
                m,
                reason: format!("p_mean = {} must be positive", cp.p_mean),
            });
        }
        if !(cp.delta_p.is_finite() && cp.delta_p >= 0.0) {
            errors.push(ValidationError::BadQuantization {
                m,
                reason: format!("delta_p = {} must be non-negative", cp.delta_p),
            });
        }
        if cp.catalog_size == 0 {
            errors.push(ValidationError::BadQuantization {
                m,
                reason: "catalog_size must be at least 1".into(),
            });
        }
    }

    if errors.is_empty() {
        Ok(Market { config: config.clone(), total })
    } else {
        Err(ValidationErrors(errors))
    }
}

/// A validated market. Dereferences to the underlying [`MarketConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    config: MarketConfig,
    total: f64,
}

impl Market {
    pub fn new(config: MarketConfig) -> Result<Self, ValidationErrors> {
        validate_market(&config)
    }

    pub fn config(&self) -> &MarketConfig {
        &self.config
    }

    pub fn into_config(self) -> MarketConfig {
        self.config
    }

    /// Number of content providers `M`.
    pub fn num_cps(&self) -> usize {
        self.config.cps.len()
    }

    /// Total capacity `S`.
    pub fn capacity(&self) -> f64 {
        self.total
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.config.cps.iter().map(|cp| cp.alpha).collect()
    }

    /// Same providers with a single SBS of total capacity `s`.
    pub fn with_capacity(&self, s: f64) -> Result<Market, ValidationErrors> {
        validate_market(&MarketConfig { fleet: SbsFleet::new(vec![s]), cps: self.config.cps.clone() })
    }
}

impl Deref for Market {
    type Target = MarketConfig;

    fn deref(&self) -> &MarketConfig {
        &self.config
    }
}

/// Per-CP caching request quantities, continuous and optionally rounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityProfile {
    pub q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounded: Option<Vec<i64>>,
}

impl QuantityProfile {
    pub fn new(q: Vec<f64>) -> Self {
        Self { q, rounded: None }
    }

    pub fn zeros(m: usize) -> Self {
        Self::new(vec![0.0; m])
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.q.iter().sum()
    }

    /// `J_m`: the quantity requested by every provider except `m`.
    pub fn others(&self, m: usize) -> f64 {
        self.q.iter().enumerate().filter(|&(l, _)| l != m).map(|(_, &x)| x).sum()
    }

    /// Copy of the profile with entry `m` replaced.
    pub fn with_entry(&self, m: usize, value: f64) -> Self {
        let mut q = self.q.clone();
        q[m] = value;
        Self::new(q)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.q.iter().all(|&x| x >= 0.0)
    }

    /// Max-norm distance between the continuous parts.
    pub fn max_abs_diff(&self, other: &QuantityProfile) -> f64 {
        self.q.iter().zip(&other.q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cp(alpha: f64) -> CpParams {
        CpParams::new(alpha, 1.0, 0.2, 100)
    }

    #[test]
    fn total_capacity_examples() {
        assert_eq!(total_capacity(&SbsFleet::new(vec![10.0, 10.0, 10.0])), 30.0);
        assert_eq!(total_capacity(&SbsFleet::new(vec![0.0])), 0.0);
        assert_eq!(total_capacity(&SbsFleet::new(vec![2.5, 7.5])), 10.0);
    }

    #[test]
    fn two_cp_scenario_is_valid() {
        let config = MarketConfig::new(vec![100.0], vec![cp(5.0), cp(7.0)]);
        let market = validate_market(&config).unwrap();
        assert_eq!(market.config(), &config);
        assert_eq!(market.capacity(), 100.0);
    }

    #[test]
    fn alpha_below_cp_count_rejected() {
        let config = MarketConfig::new(vec![100.0], vec![cp(5.0), cp(2.5), cp(4.0)]);
        let errs = validate_market(&config).unwrap_err();
        assert_eq!(errs.0, vec![ValidationError::AlphaTooSmall { m: 1, alpha: 2.5, required: 3 }]);
    }

    #[test]
    fn alpha_must_exceed_one_even_for_single_cp() {
        let config = MarketConfig::new(vec![10.0], vec![cp(1.0)]);
        assert!(matches!(
            validate_market(&config).unwrap_err().0[..],
            [ValidationError::AlphaTooSmall { m: 0, .. }]
        ));
    }

    #[test]
    fn all_violations_reported() {
        let config = MarketConfig::new(vec![], vec![]);
        let errs = validate_market(&config).unwrap_err().0;
        assert!(errs.contains(&ValidationError::EmptyFleet));
        assert!(errs.contains(&ValidationError::NonPositiveCapacity(0.0)));
        assert!(errs.contains(&ValidationError::EmptyCpList));

        let bad = CpParams::new(0.5, -1.0, -0.1, 0);
        let errs = validate_market(&MarketConfig::new(vec![-1.0, 0.5], vec![bad])).unwrap_err().0;
        assert_eq!(errs.len(), 6, "{errs:?}");
    }

    #[test]
    fn validation_is_idempotent() {
        let config = MarketConfig::new(vec![40.0, 60.0], vec![cp(5.0), cp(7.0)]);
        let once = validate_market(&config).unwrap();
        let twice = validate_market(once.config()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn json_schema_round_trip_and_unknown_fields() {
        let text = r#"{"sbs_capacities":[50,50],"cps":[
            {"alpha":5,"p_mean":1,"delta_p":0.2,"catalog_size":1000},
            {"alpha":7,"p_mean":1,"delta_p":0.2,"catalog_size":1000}]}"#;
        let config = MarketConfig::from_json(text).unwrap();
        assert_eq!(config.fleet.total(), 100.0);
        assert_eq!(config.cps[1].alpha, 7.0);
        assert_eq!(MarketConfig::from_json(&config.to_json()).unwrap(), config);

        let extra = r#"{"sbs_capacities":[1],"cps":[],"foo":1}"#;
        assert!(MarketConfig::from_json(extra).is_err());
        let extra_cp = r#"{"sbs_capacities":[1],"cps":[{"alpha":5,"p_mean":1,"delta_p":0.2,"catalog_size":1,"x":0}]}"#;
        assert!(MarketConfig::from_json(extra_cp).is_err());
    }

    #[test]
    fn others_sum() {
        let q = QuantityProfile::new(vec![1.0, 2.0, 4.0]);
        assert_eq!(q.others(0), 6.0);
        assert_eq!(q.others(2), 3.0);
        assert_eq!(q.total(), 7.0);
    }
}
