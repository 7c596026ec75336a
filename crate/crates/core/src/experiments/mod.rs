//! Study harness: configs, repetition loops, reports and the oracle summary
//! printed by `uqpc oracle`.

pub mod config;
pub mod report;
pub mod seed;
pub mod study;

use serde::Serialize;

pub use config::{Cell, Method, StudyConfig, StudyKind};
pub use report::{emit_density, Histogram, StudyReport};
pub use study::{run_gsa_study, run_response_study, run_study, run_variance_study};

use crate::error::Result;
use crate::oracle;
use crate::polybasis::MultiIndexBasis;

/// Exact statistics of a configured problem, as printed by `uqpc oracle`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSummary {
    pub d: usize,
    pub n0: u32,
    pub mean: f64,
    pub variance: f64,
    /// `E[exp(-p Sigma dx)]` per material for `p = 1, 2`.
    pub factor_moments: Vec<[f64; 2]>,
    pub sobol_first: Vec<f64>,
    pub sobol_total: Vec<f64>,
    /// Quadrature PC coefficients at total degree `n0`.
    pub coefficients: Vec<f64>,
    /// `beta_0` and `sum_{k>=1} beta_k^2 b_k` of those coefficients.
    pub pc_mean: f64,
    pub pc_variance: f64,
}

pub fn oracle_summary(config: &StudyConfig) -> Result<OracleSummary> {
    let problem = &config.problem;
    let basis = MultiIndexBasis::total_degree(problem.dim(), config.n0)?;
    let stats = oracle::exact_statistics(problem, &basis)?;
    let pc_variance = stats
        .coefficients
        .iter()
        .zip(basis.norms())
        .skip(1)
        .map(|(b, n)| b * b * n)
        .sum();
    let factor_moments = problem
        .materials()
        .iter()
        .map(|m| Ok([oracle::exact_factor_moment(m, 1)?, oracle::exact_factor_moment(m, 2)?]))
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleSummary {
        d: problem.dim(),
        n0: config.n0,
        mean: stats.mean,
        variance: stats.variance,
        factor_moments,
        sobol_first: stats.sobol_first,
        sobol_total: stats.sobol_total,
        pc_mean: stats.coefficients[0],
        pc_variance,
        coefficients: stats.coefficients,
    })
}
