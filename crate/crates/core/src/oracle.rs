//! Exact reference statistics for the slab transmittance.
//!
//! `Q(xi) = prod_m exp(-Sigma_m(xi_m) dx_m)` is a product of independent
//! factors, so every moment and every ANOVA partial variance is available
//! in closed form.

use serde::{Deserialize, Serialize};

use crate::costmodel::CoefficientMoments;
use crate::error::{Result, UqError};
use crate::polybasis::{MultiIndex, MultiIndexBasis, TensorRule};
use crate::transport::{Material, SlabProblem};

/// `sinh(x) / x`, with a series branch near zero.
pub fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

/// `E[exp(-p Sigma(xi) dx)] = exp(-p Sigma0 dx) sinh(p SigmaDelta dx) / (p SigmaDelta dx)`.
pub fn exact_factor_moment(material: &Material, power: u32) -> Result<f64> {
    if power == 0 {
        return Err(UqError::pre("moment power must be at least 1"));
    }
    let p = power as f64;
    let a = p * material.sigma0() * material.dx();
    let h = p * material.sigma_delta() * material.dx();
    Ok((-a).exp() * sinhc(h))
}

fn factor_moments(problem: &SlabProblem) -> Vec<(f64, f64)> {
    problem
        .materials()
        .iter()
        .map(|m| {
            (
                exact_factor_moment(m, 1).expect("power 1"),
                exact_factor_moment(m, 2).expect("power 2"),
            )
        })
        .collect()
}

pub fn exact_mean(problem: &SlabProblem) -> f64 {
    factor_moments(problem).iter().map(|(m1, _)| m1).product()
}

pub fn exact_variance(problem: &SlabProblem) -> f64 {
    let f = factor_moments(problem);
    let m1: f64 = f.iter().map(|(a, _)| a).product();
    let m2: f64 = f.iter().map(|(_, b)| b).product();
    (m2 - m1 * m1).max(0.0)
}

/// Spectral projection of `f` with a tensor Gauss rule of `level` points per axis.
pub fn project_function(
    f: impl Fn(&[f64]) -> f64,
    basis: &MultiIndexBasis,
    level: usize,
) -> Result<Vec<f64>> {
    let rule = TensorRule::new(level, basis.dim())?;
    let mut acc = vec![0.0; basis.len()];
    rule.for_each(|x, w| {
        let q = f(x) * w;
        for (a, psi) in acc.iter_mut().zip(basis.eval_unchecked(x)) {
            *a += q * psi;
        }
    });
    Ok(acc.iter().zip(basis.norms()).map(|(a, b)| a / b).collect())
}

fn transmittance(problem: &SlabProblem, x: &[f64]) -> f64 {
    let tau: f64 = problem
        .materials()
        .iter()
        .zip(x)
        .map(|(m, &xi)| (m.sigma0() + m.sigma_delta() * xi) * m.dx())
        .sum();
    (-tau).exp()
}

/// Exact-QoI PC coefficients by tensor quadrature.
pub fn quadrature_coefficients(
    problem: &SlabProblem,
    basis: &MultiIndexBasis,
    level: usize,
) -> Result<Vec<f64>> {
    if basis.dim() != problem.dim() {
        return Err(UqError::DimensionMismatch {
            expected: problem.dim(),
            got: basis.dim(),
        });
    }
    project_function(|x| transmittance(problem, x), basis, level)
}

/// Quadrature coefficients starting at `n0 + 2` points per axis, doubling the
/// level until no coefficient moves by more than `1e-10`.
pub fn converged_coefficients(problem: &SlabProblem, basis: &MultiIndexBasis) -> Result<Vec<f64>> {
    let mut level = basis.total_order() as usize + 2;
    let mut prev = quadrature_coefficients(problem, basis, level)?;
    loop {
        level *= 2;
        let next = quadrature_coefficients(problem, basis, level)?;
        let moved = prev
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if moved <= 1e-10 || level > 256 {
            return Ok(next);
        }
        prev = next;
    }
}

/// Exact ANOVA decomposition of the product QoI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSobol {
    pub first: Vec<f64>,
    pub total: Vec<f64>,
    /// `(group, S_u)` for every non-empty group `u`.
    pub groups: Vec<(Vec<usize>, f64)>,
}

/// Partial variance of group `u` is `prod_{i in u} v_i prod_{i not in u} mu_i^2`.
pub fn exact_sobol(problem: &SlabProblem) -> ExactSobol {
    let f = factor_moments(problem);
    let d = f.len();
    let var = exact_variance(problem);
    let mut first = vec![0.0; d];
    let mut total = vec![0.0; d];
    let mut groups = Vec::with_capacity((1 << d) - 1);
    for mask in 1usize..(1 << d) {
        let group: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
        let v_u: f64 = f
            .iter()
            .enumerate()
            .map(|(i, (m1, m2))| {
                if mask & (1 << i) != 0 {
                    m2 - m1 * m1
                } else {
                    m1 * m1
                }
            })
            .product();
        let s_u = if var > 0.0 { v_u / var } else { 0.0 };
        if let [only] = group[..] {
            first[only] = s_u;
        }
        for &i in &group {
            total[i] += s_u;
        }
        groups.push((group, s_u));
    }
    ExactSobol {
        first,
        total,
        groups,
    }
}

/// Exact moments of the `k`-th coefficient estimator for a Bernoulli tally,
/// where the per-history variance is `Q (1 - Q)`.
pub fn coefficient_moments(
    problem: &SlabProblem,
    index: &MultiIndex,
    level: usize,
) -> Result<CoefficientMoments> {
    if index.dim() != problem.dim() {
        return Err(UqError::DimensionMismatch {
            expected: problem.dim(),
            got: index.dim(),
        });
    }
    let rule = TensorRule::new(level, problem.dim())?;
    let (mut e_qpsi, mut e_q2psi2, mut e_noise) = (0.0, 0.0, 0.0);
    rule.for_each(|x, w| {
        let q = transmittance(problem, x);
        let psi = index.eval(x);
        e_qpsi += w * q * psi;
        e_q2psi2 += w * q * q * psi * psi;
        e_noise += w * psi * psi * q * (1.0 - q);
    });
    CoefficientMoments::new(
        (e_q2psi2 - e_qpsi * e_qpsi).max(0.0),
        e_noise.max(0.0),
        index.norm(),
    )
}

/// `mean((x - exact)^2)`.
pub fn mse(estimates: &[f64], exact: f64) -> Result<f64> {
    if estimates.is_empty() {
        return Err(UqError::EmptyInput("MSE needs at least one estimate"));
    }
    Ok(estimates.iter().map(|x| (x - exact).powi(2)).sum::<f64>() / estimates.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactStatistics {
    pub mean: f64,
    pub variance: f64,
    pub coefficients: Vec<f64>,
    pub sobol_first: Vec<f64>,
    pub sobol_total: Vec<f64>,
}

pub fn exact_statistics(problem: &SlabProblem, basis: &MultiIndexBasis) -> Result<ExactStatistics> {
    let sobol = exact_sobol(problem);
    Ok(ExactStatistics {
        mean: exact_mean(problem),
        variance: exact_variance(problem),
        coefficients: converged_coefficients(problem, basis)?,
        sobol_first: sobol.first,
        sobol_total: sobol.total,
    })
}
