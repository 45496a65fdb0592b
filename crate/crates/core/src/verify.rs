//! Margin, radius and radius-to-margin inequalities evaluated with the
//! measured spectral errors of a selection run.

use std::fmt;

use serde::Serialize;

use crate::pipeline::SelectionReport;

/// Relative slack for the margin inequality.
pub const MARGIN_SLACK: f64 = 1e-6;
/// Relative slack for the radius and ratio inequalities.
pub const RADIUS_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckStatus {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    /// The bound is vacuous or its inputs were not measured.
    #[serde(rename = "na")]
    NotApplicable,
}

impl CheckStatus {
    fn from_bool(ok: bool) -> Self {
        if ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == CheckStatus::Pass
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::NotApplicable => "na",
        }
    }
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub spectral_error: Option<f64>,
    pub radius_spectral_error: Option<f64>,
    pub margin_full: f64,
    pub margin_sampled: f64,
    pub radius_full: Option<f64>,
    pub radius_sampled: Option<f64>,
    /// `(1 − ‖E‖/(1 − ‖E‖))·γ*²`, when `‖E‖ < 1`.
    pub margin_sq_lower_bound: Option<f64>,
    /// `γ̃*² ≥ (1 − ‖E‖/(1 − ‖E‖))·γ*²`.
    pub margin: CheckStatus,
    /// `B̃² ≤ (1 + δ)²(1 + ‖E_B‖)·B²`.
    pub radius: CheckStatus,
    /// `max(‖E_B‖, ‖E‖/(1 − ‖E‖))`: the smallest ε for which the margin and radius
    /// inequalities read `γ̃*² ≥ (1 − ε)γ*²` and `B̃² ≤ (1 + ε)B²`.
    pub epsilon_hat: Option<f64>,
    /// `B̃²/γ̃*² ≤ (1 + δ)²·((1 + ε̂)/(1 − ε̂))·B²/γ*²`.
    pub ratio: CheckStatus,
}

pub fn verify_margin_bound(report: &SelectionReport) -> BoundReport {
    let g2 = report.margin_full.powi(2);
    let gs2 = report.margin_sampled.powi(2);
    let e = report.spectral_error.filter(|e| e.is_finite());

    let margin_sq_lower_bound = e.filter(|&e| e < 1.0).map(|e| (1.0 - e / (1.0 - e)) * g2);
    let margin = match margin_sq_lower_bound {
        Some(bound) => CheckStatus::from_bool(gs2 >= bound - MARGIN_SLACK * g2),
        None => CheckStatus::NotApplicable,
    };

    let inflation = (1.0 + report.meb_delta).powi(2);
    let radius = match (
        report.radius_full,
        report.radius_sampled,
        report.radius_spectral_error,
    ) {
        (Some(b), Some(bs), Some(eb)) => {
            CheckStatus::from_bool(bs * bs <= inflation * (1.0 + eb) * b * b * (1.0 + RADIUS_SLACK))
        }
        _ => CheckStatus::NotApplicable,
    };

    let epsilon_hat = e
        .filter(|&e| e < 1.0)
        .zip(report.radius_spectral_error)
        .map(|(e, eb)| eb.max(e / (1.0 - e)));
    let ratio = match (epsilon_hat, report.radius_full, report.radius_sampled) {
        (Some(eps), Some(b), Some(bs)) if eps < 1.0 && g2 > 0.0 && gs2 > 0.0 => {
            let lhs = bs * bs / gs2;
            let rhs = inflation * (1.0 + eps) / (1.0 - eps) * b * b / g2;
            CheckStatus::from_bool(lhs <= rhs * (1.0 + MARGIN_SLACK))
        }
        _ => CheckStatus::NotApplicable,
    };

    BoundReport {
        spectral_error: report.spectral_error,
        radius_spectral_error: report.radius_spectral_error,
        margin_full: report.margin_full,
        margin_sampled: report.margin_sampled,
        radius_full: report.radius_full,
        radius_sampled: report.radius_sampled,
        margin_sq_lower_bound,
        margin,
        radius,
        epsilon_hat,
        ratio,
    }
}
