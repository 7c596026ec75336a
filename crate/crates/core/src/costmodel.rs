//! Coefficient-estimator variance under the cost model
//! `C_tot = N_xi (C_xi + C_eta N_eta)`, where `C_xi` is the fixed cost of
//! re-sampling the parameters and `C_eta` the cost of one particle history.
//! Sample counts are treated as real numbers here.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UqError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    #[serde(rename = "total")]
    pub c_total: f64,
    #[serde(rename = "xi")]
    pub c_xi: f64,
    #[serde(rename = "eta")]
    pub c_eta: f64,
}

impl CostModel {
    pub fn new(c_total: f64, c_xi: f64, c_eta: f64) -> Result<Self> {
        let m = CostModel { c_total, c_xi, c_eta };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_total > 0.0 && self.c_xi >= 0.0 && self.c_eta > 0.0)
            || !(self.c_total.is_finite() && self.c_xi.is_finite() && self.c_eta.is_finite())
        {
            return Err(UqError::pre(format!(
                "cost model needs total > 0, xi >= 0, eta > 0 (got {}, {}, {})",
                self.c_total, self.c_xi, self.c_eta
            )));
        }
        Ok(())
    }

    /// Cost of one parameter sample with `n_eta` histories.
    pub fn cost_per_sample(&self, n_eta: f64) -> f64 {
        self.c_xi + self.c_eta * n_eta
    }

    /// `N_xi = C_tot / (C_xi + C_eta N_eta)`.
    pub fn samples_for_budget(&self, n_eta: f64) -> Result<f64> {
        if !(n_eta > 0.0) {
            return Err(UqError::pre("n_eta must be positive"));
        }
        Ok(self.c_total / self.cost_per_sample(n_eta))
    }
}

/// Moments entering the variance of the `k`-th coefficient estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientMoments {
    /// `Var_xi[Q Psi_k]`
    pub var_qpsi: f64,
    /// `E_xi[Psi_k^2 sigma_eta^2]`, with `sigma_eta^2` the per-history variance.
    pub noise_term: f64,
    pub b_k: f64,
}

impl CoefficientMoments {
    pub fn new(var_qpsi: f64, noise_term: f64, b_k: f64) -> Result<Self> {
        if !(var_qpsi >= 0.0 && noise_term >= 0.0 && b_k > 0.0) {
            return Err(UqError::pre(format!(
                "moments need var_qpsi >= 0, noise_term >= 0, b_k > 0 (got {var_qpsi}, {noise_term}, {b_k})"
            )));
        }
        Ok(CoefficientMoments { var_qpsi, noise_term, b_k })
    }
}

/// `Var[beta_k] = (C_xi + C_eta N_eta) / C_tot * (Var[Q Psi_k] + E[Psi_k^2 sigma^2] / N_eta) / b_k^2`.
pub fn coefficient_variance_model(cost: &CostModel, m: &CoefficientMoments, n_eta: f64) -> Result<f64> {
    let n_xi = cost.samples_for_budget(n_eta)?;
    Ok((m.var_qpsi + m.noise_term / n_eta) / (m.b_k * m.b_k * n_xi))
}

/// Break-even history count: at equal budget the direct estimator
/// (`N_eta = 1`) has lower variance than any nested `N_eta` strictly above
/// `(E[Psi_k^2 sigma^2] / Var[Q Psi_k]) (C_xi / C_eta)`.
pub fn break_even_nested(cost: &CostModel, m: &CoefficientMoments) -> Result<f64> {
    if !(m.var_qpsi > 0.0) {
        return Err(UqError::DegenerateSignal);
    }
    Ok(m.noise_term / m.var_qpsi * (cost.c_xi / cost.c_eta))
}
