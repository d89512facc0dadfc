//! Dynamics-dependent margin bound and the margin-based risk bound.
//!
//! `β = 1 − cos²θ₁`, with `θ₁` the smallest principal angle between
//! `range(O1)` and `range(O2)`. On normalized data the chain
//! `β / √(2(n1+n2)) ≤ ρ_M ≤ ρ_D` holds, where `ρ_M` is the margin of the
//! model-based weights `vec(Q)` and `ρ_D` that of the trained SVM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modelbased::build;
use crate::numerics::{default_rank_tol, principal_angle_cosines, rank_from_singular_values, svd, Matrix};
use crate::svm::{margin_on_dataset, train_hard_margin, SvmModel};
use crate::sysmodel::{observability_matrix, require_feasible, LinearSystem};
use crate::trajectories::Dataset;

/// Slack allowed in each link of the margin chain.
pub const CHAIN_TOL: f64 = 1e-8;
/// Largest relative change of β between horizons `N` and `2N` accepted as converged.
pub const BETA_CONVERGENCE_TOL: f64 = 0.05;

fn range_basis(sys: &LinearSystem, horizon: usize, system: usize) -> Result<Matrix> {
    let o = observability_matrix(sys, horizon)?.matrix;
    let f = svd(&o)?;
    let rank = rank_from_singular_values(&f.s, default_rank_tol(&o));
    if rank < sys.n() {
        return Err(Error::RankDeficient {
            system,
            rank,
            n: sys.n(),
        });
    }
    Ok(f.leading_left(sys.n()))
}

/// Squared sine of the smallest principal angle between the two observability ranges.
pub fn beta(sys1: &LinearSystem, sys2: &LinearSystem, horizon: usize) -> Result<f64> {
    require_feasible(sys1, sys2, horizon)?;
    let u1 = range_basis(sys1, horizon, 1)?;
    let u2 = range_basis(sys2, horizon, 2)?;
    let cosines = principal_angle_cosines(&u1, &u2)?;
    let cmax = cosines.first().copied().unwrap_or(0.0);
    Ok((1.0 - cmax * cmax).clamp(0.0, 1.0))
}

/// β at `N` and `2N`, used as a finite-horizon proxy for the infinite horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    #[serde(rename = "N")]
    pub horizon: usize,
    pub beta: f64,
    pub beta_2n: f64,
    pub relative_change: f64,
    pub converged: bool,
}

pub fn beta_with_convergence(sys1: &LinearSystem, sys2: &LinearSystem, horizon: usize) -> Result<BetaEstimate> {
    let b1 = beta(sys1, sys2, horizon)?;
    let b2 = beta(sys1, sys2, 2 * horizon)?;
    let relative_change = (b2 - b1).abs() / b1.abs().max(f64::MIN_POSITIVE);
    Ok(BetaEstimate {
        horizon,
        beta: b1,
        beta_2n: b2,
        relative_change,
        converged: relative_change < BETA_CONVERGENCE_TOL,
    })
}

/// `β / √(2(n1+n2))`.
pub fn margin_bound(beta: f64, n1: usize, n2: usize) -> f64 {
    beta / (2.0 * (n1 + n2) as f64).sqrt()
}

/// Inputs of the margin-based expected-risk bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskBoundInput {
    #[serde(rename = "L")]
    pub l: usize,
    pub rho: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub eta: f64,
    pub c: f64,
}

impl RiskBoundInput {
    /// Normalized features (`R = 1`) and `c = 1`.
    pub fn normalized(l: usize, rho: f64, eta: f64) -> Self {
        RiskBoundInput { l, rho, r: 1.0, eta, c: 1.0 }
    }
}

/// `(c/L)·((R²/ρ²)·ln²L + ln(1/η))`, up to the unspecified constant `c`.
pub fn risk_bound(inp: &RiskBoundInput) -> Result<f64> {
    if inp.l == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    if !(inp.rho > 0.0) || !(inp.c > 0.0) || !(inp.r >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need rho > 0, c > 0, R >= 0; got rho={}, c={}, R={}",
            inp.rho, inp.c, inp.r
        )));
    }
    if !(inp.eta > 0.0 && inp.eta < 1.0) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0, 1), got {}", inp.eta)));
    }
    let l = inp.l as f64;
    let ln_l = l.ln();
    Ok(inp.c / l * ((inp.r / inp.rho).powi(2) * ln_l * ln_l + (1.0 / inp.eta).ln()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    #[serde(rename = "rho_M")]
    pub rho_m: f64,
    #[serde(rename = "rho_D")]
    pub rho_d: f64,
    pub beta: f64,
    pub bound: f64,
    pub n1: usize,
    pub n2: usize,
    #[serde(rename = "N")]
    pub horizon: usize,
    /// `ρ_M − bound`.
    pub slack_bound: f64,
    /// `ρ_D − ρ_M`.
    pub slack_svm: f64,
    pub chain_tol: f64,
    pub svm_kkt_residual: f64,
}

impl MarginReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Margin chain for an SVM already trained on `data` with normalization.
pub fn margin_chain_for_model(
    sys1: &LinearSystem,
    sys2: &LinearSystem,
    horizon: usize,
    data: &Dataset,
    model: &SvmModel,
) -> Result<MarginReport> {
    if !model.normalized {
        return Err(Error::InvalidParameter(
            "margin chain requires an SVM trained on normalized data".into(),
        ));
    }
    if data.horizon() != horizon {
        return Err(Error::DimensionMismatch {
            context: "dataset horizon",
            expected: horizon,
            found: data.horizon(),
        });
    }
    let classifier = build(sys1, sys2, horizon)?;
    let beta = beta(sys1, sys2, horizon)?;
    let bound = margin_bound(beta, sys1.n(), sys2.n());
    let rho_m = margin_on_dataset(classifier.w_m(), data)?;
    let rho_d = model.margin;
    let report = MarginReport {
        rho_m,
        rho_d,
        beta,
        bound,
        n1: sys1.n(),
        n2: sys2.n(),
        horizon,
        slack_bound: rho_m - bound,
        slack_svm: rho_d - rho_m,
        chain_tol: CHAIN_TOL,
        svm_kkt_residual: model.kkt_residual,
    };
    if report.slack_bound < -CHAIN_TOL {
        return Err(Error::ChainViolation(format!(
            "rho_M = {rho_m:e} below bound {bound:e}"
        )));
    }
    if report.slack_svm < -CHAIN_TOL {
        return Err(Error::ChainViolation(format!(
            "rho_D = {rho_d:e} below rho_M = {rho_m:e}"
        )));
    }
    Ok(report)
}

/// Trains the hard-margin SVM on normalized `data` and checks the margin chain.
pub fn margin_chain_report(
    sys1: &LinearSystem,
    sys2: &LinearSystem,
    horizon: usize,
    data: &Dataset,
) -> Result<MarginReport> {
    let model = train_hard_margin(data, true)?;
    margin_chain_for_model(sys1, sys2, horizon, data, &model)
}
