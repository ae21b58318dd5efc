//! Downlink achievable rates: closed form and Monte Carlo.

mod closed_form;
mod exact;
mod monte_carlo;

use serde::Serialize;

pub use closed_form::{
    closed_form_rates, dac_term, delta, interference_term, los_inner_product, noise_term, psi, signal_term,
    AnalyticRates, MomentTerms,
};
pub use exact::ExactMoments;
pub use monte_carlo::{moment_oracles, monte_carlo_rates, MomentComparison, MomentKind, McOptions};

/// Which expressions supply the four expectation terms of the rate formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentModel {
    /// Exact second and fourth moments of the cascaded Rician channel.
    #[default]
    Exact,
    /// The reduced polynomial forms commonly quoted for this system, taken
    /// literally. Off by a few percent against simulation; kept for
    /// comparison.
    Simplified,
}

impl std::str::FromStr for MomentModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Self::Exact),
            "simplified" => Ok(Self::Simplified),
            other => Err(format!("unknown moment model '{other}' (expected exact | simplified)")),
        }
    }
}

impl std::fmt::Display for MomentModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Exact => "exact",
            Self::Simplified => "simplified",
        })
    }
}

/// Per-user rate terms and rates, in bits/s/Hz.
///
/// For closed-form results the terms are the analytic expectations; for
/// Monte Carlo results they are the sample means of the same quantities
/// (`‖f_k‖⁴`, `|f_k^H f_i|²`, `T_r f_k^H R f_k`, `T_r`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateBreakdown {
    pub signal: Vec<f64>,
    /// `interference[k][i]`, zero on the diagonal.
    pub interference: Vec<Vec<f64>>,
    pub dac: Vec<f64>,
    pub noise: Vec<f64>,
    pub sinr: Vec<f64>,
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    /// Standard errors of the Monte Carlo means.
    pub rate_stderr: Option<Vec<f64>>,
    pub sum_rate_stderr: Option<f64>,
    /// Analytic terms that came out negative and were clamped to zero.
    pub clamped_terms: usize,
}
