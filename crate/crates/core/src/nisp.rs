//! Non-intrusive spectral projection (NISP) from noisy transport tallies.
//!
//! Coefficients are sample means `beta_k = mean_i(Psi_k(xi_i) Q~_i) / b_k`.
//! Because every coefficient is built from the same tallies, the estimators
//! are correlated; the covariance is estimated jointly from the per-sample
//! products `Y_ik = Psi_k(xi_i) Q~_i / b_k` and can be split into a part due
//! to `xi` alone and a part due to Monte Carlo noise when the per-sample
//! noise variance is available (two or more histories per sample).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UqError};
use crate::polybasis::MultiIndexBasis;
use crate::transport::{ParamSample, SlabProblem};

/// `N_xi` parameter samples with their noisy QoI and per-sample noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    samples: Vec<ParamSample>,
    qtilde: Vec<f64>,
    sigma2eta: Option<Vec<f64>>,
    n_eta: usize,
}

impl TrainingData {
    pub fn new(
        samples: Vec<ParamSample>,
        qtilde: Vec<f64>,
        sigma2eta: Option<Vec<f64>>,
        n_eta: usize,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(UqError::EmptyInput("training data needs at least one sample"));
        }
        if n_eta == 0 {
            return Err(UqError::pre("n_eta must be at least 1"));
        }
        if qtilde.len() != samples.len() {
            return Err(UqError::DimensionMismatch {
                expected: samples.len(),
                got: qtilde.len(),
            });
        }
        let d = samples[0].dim();
        if let Some(bad) = samples.iter().find(|s| s.dim() != d) {
            return Err(UqError::DimensionMismatch {
                expected: d,
                got: bad.dim(),
            });
        }
        if qtilde.iter().any(|q| !q.is_finite()) {
            return Err(UqError::pre("QoI values must be finite"));
        }
        match (&sigma2eta, n_eta) {
            (None, 1) => {}
            (Some(_), 1) => {
                return Err(UqError::pre("noise variance given with a single history per sample"))
            }
            (None, _) => {
                return Err(UqError::pre(
                    "noise variance required with two or more histories per sample",
                ))
            }
            (Some(v), _) => {
                if v.len() != samples.len() {
                    return Err(UqError::DimensionMismatch {
                        expected: samples.len(),
                        got: v.len(),
                    });
                }
                if v.iter().any(|s| !(*s >= 0.0)) {
                    return Err(UqError::pre("noise variances must be nonnegative"));
                }
            }
        }
        Ok(TrainingData {
            samples,
            qtilde,
            sigma2eta,
            n_eta,
        })
    }

    /// Draws `n_xi` fresh parameter samples and tallies `n_eta` histories at each.
    pub fn simulate<R: Rng + ?Sized>(
        problem: &SlabProblem,
        n_xi: usize,
        n_eta: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(n_xi);
        let mut q = Vec::with_capacity(n_xi);
        let mut s2 = Vec::with_capacity(n_xi);
        for _ in 0..n_xi {
            let xi = ParamSample::sample(problem.dim(), rng);
            let t = problem.simulate_histories(&xi, n_eta, rng)?;
            samples.push(xi);
            q.push(t.qtilde);
            if let Some(v) = t.sigma2eta {
                s2.push(v);
            }
        }
        TrainingData::new(samples, q, (n_eta >= 2).then_some(s2), n_eta)
    }

    /// Noise-free data: `Q~ = Q(xi)` exactly, with zero noise variance when
    /// `n_eta >= 2` so the data set still carries the nested layout.
    pub fn noise_free(problem: &SlabProblem, samples: Vec<ParamSample>, n_eta: usize) -> Result<Self> {
        let q = samples
            .iter()
            .map(|s| problem.analytic_transmittance(s))
            .collect::<Result<Vec<_>>>()?;
        let s2 = (n_eta >= 2).then(|| vec![0.0; samples.len()]);
        TrainingData::new(samples, q, s2, n_eta)
    }

    pub fn n_xi(&self) -> usize {
        self.samples.len()
    }

    pub fn n_eta(&self) -> usize {
        self.n_eta
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn samples(&self) -> &[ParamSample] {
        &self.samples
    }

    pub fn qtilde(&self) -> &[f64] {
        &self.qtilde
    }

    pub fn sigma2eta(&self) -> Option<&[f64]> {
        self.sigma2eta.as_deref()
    }
}

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `v^T M v` restricted to indices where `keep` is true.
    pub fn quadratic_form(&self, v: &[f64], keep: impl Fn(usize) -> bool) -> f64 {
        let mut acc = 0.0;
        for i in (0..self.n).filter(|&i| keep(i)) {
            let mut row = 0.0;
            for j in (0..self.n).filter(|&j| keep(j)) {
                row += self.get(i, j) * v[j];
            }
            acc += v[i] * row;
        }
        acc
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = UqError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(UqError::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            data.extend(r);
        }
        Ok(SymMatrix { n, data })
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.data.chunks(m.n.max(1)).take(m.n).map(<[f64]>::to_vec).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub n_xi: usize,
    pub n_eta: usize,
}

/// A PC surrogate: basis, estimated coefficients and their uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceSurrogate {
    pub basis: MultiIndexBasis,
    pub coefficients: Vec<f64>,
    /// Joint (`xi` + noise) covariance of the coefficient estimators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_covariance: Option<SymMatrix>,
    /// Covariance with the Monte Carlo noise contribution removed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_corrected_covariance: Option<SymMatrix>,
    /// `true` for retained terms; `None` means nothing was trimmed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trimmed_mask: Option<Vec<bool>>,
    pub provenance: Provenance,
}

fn check_dims(data: &TrainingData, basis: &MultiIndexBasis) -> Result<()> {
    if data.dim() != basis.dim() {
        return Err(UqError::DimensionMismatch {
            expected: basis.dim(),
            got: data.dim(),
        });
    }
    Ok(())
}

/// Row-major `N_xi x (P+1)` table of `Psi_k(xi_i)`.
fn design_matrix(data: &TrainingData, basis: &MultiIndexBasis) -> Vec<f64> {
    let mut psi = Vec::with_capacity(data.n_xi() * basis.len());
    for s in data.samples() {
        psi.extend(basis.eval_unchecked(s.values()));
    }
    psi
}

/// Sample-mean projection of the noisy QoI. `n_eta = 1` is the direct estimator.
pub fn estimate_coefficients(data: &TrainingData, basis: &MultiIndexBasis) -> Result<PceSurrogate> {
    check_dims(data, basis)?;
    let psi = design_matrix(data, basis);
    Ok(PceSurrogate {
        basis: basis.clone(),
        coefficients: project(&psi, data, basis),
        coefficient_covariance: None,
        noise_corrected_covariance: None,
        trimmed_mask: None,
        provenance: Provenance {
            n_xi: data.n_xi(),
            n_eta: data.n_eta(),
        },
    })
}

fn project(psi: &[f64], data: &TrainingData, basis: &MultiIndexBasis) -> Vec<f64> {
    let p = basis.len();
    let mut acc = vec![0.0; p];
    for (row, &q) in psi.chunks_exact(p).zip(data.qtilde()) {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += v * q;
        }
    }
    let n = data.n_xi() as f64;
    acc.iter()
        .zip(basis.norms())
        .map(|(a, b)| a / (n * b))
        .collect()
}

/// Joint covariance of the coefficient estimators: the sample covariance of
/// `Y_ik = Psi_k Q~ / b_k` (divisor `N_xi - 1`) over `N_xi`.
pub fn coefficient_covariance(data: &TrainingData, basis: &MultiIndexBasis) -> Result<SymMatrix> {
    check_dims(data, basis)?;
    let psi = design_matrix(data, basis);
    covariance_from_design(&psi, data, basis)
}

fn covariance_from_design(psi: &[f64], data: &TrainingData, basis: &MultiIndexBasis) -> Result<SymMatrix> {
    let n_xi = data.n_xi();
    if n_xi < 2 {
        return Err(UqError::InsufficientSamples {
            needed: 2,
            got: n_xi,
        });
    }
    let p = basis.len();
    let norms = basis.norms();
    let means = project(psi, data, basis);
    let mut cov = SymMatrix::zeros(p);
    let mut centered = vec![0.0; p];
    for (row, &q) in psi.chunks_exact(p).zip(data.qtilde()) {
        for k in 0..p {
            centered[k] = row[k] * q / norms[k] - means[k];
        }
        for k in 0..p {
            let ck = centered[k];
            for r in k..p {
                cov.data[k * p + r] += ck * centered[r];
            }
        }
    }
    let scale = 1.0 / ((n_xi as f64 - 1.0) * n_xi as f64);
    for k in 0..p {
        for r in k..p {
            let v = cov.data[k * p + r] * scale;
            cov.set_sym(k, r, v);
        }
    }
    Ok(cov)
}

/// Covariance of the coefficient estimators due to `xi` alone: the joint
/// covariance minus `mean_i(Psi_k Psi_r sigma2_i / N_eta) / (N_xi b_k b_r)`.
pub fn noise_corrected_covariance(data: &TrainingData, basis: &MultiIndexBasis) -> Result<SymMatrix> {
    check_dims(data, basis)?;
    let psi = design_matrix(data, basis);
    let total = covariance_from_design(&psi, data, basis)?;
    noise_corrected_from(total, &psi, data, basis)
}

fn noise_corrected_from(
    mut cov: SymMatrix,
    psi: &[f64],
    data: &TrainingData,
    basis: &MultiIndexBasis,
) -> Result<SymMatrix> {
    let s2 = data.sigma2eta().ok_or(UqError::NoiseVarianceUnavailable)?;
    let p = basis.len();
    let norms = basis.norms();
    let mut corr = SymMatrix::zeros(p);
    for (row, &s) in psi.chunks_exact(p).zip(s2) {
        if s == 0.0 {
            continue;
        }
        for k in 0..p {
            let a = row[k] * s;
            for r in k..p {
                corr.data[k * p + r] += a * row[r];
            }
        }
    }
    let n_xi = data.n_xi() as f64;
    let scale = 1.0 / (n_xi * n_xi * data.n_eta() as f64);
    for k in 0..p {
        for r in k..p {
            let v = cov.get(k, r) - corr.data[k * p + r] * scale / (norms[k] * norms[r]);
            cov.set_sym(k, r, v);
        }
    }
    Ok(cov)
}

/// Coefficients plus every covariance the data supports: the joint one when
/// `N_xi >= 2` and the noise-corrected one when `N_eta >= 2` as well.
pub fn fit_surrogate(data: &TrainingData, basis: &MultiIndexBasis) -> Result<PceSurrogate> {
    check_dims(data, basis)?;
    let psi = design_matrix(data, basis);
    let coefficients = project(&psi, data, basis);
    let (joint, corrected) = if data.n_xi() >= 2 {
        let joint = covariance_from_design(&psi, data, basis)?;
        let corrected = if data.sigma2eta().is_some() {
            Some(noise_corrected_from(joint.clone(), &psi, data, basis)?)
        } else {
            None
        };
        (Some(joint), corrected)
    } else {
        (None, None)
    };
    Ok(PceSurrogate {
        basis: basis.clone(),
        coefficients,
        coefficient_covariance: joint,
        noise_corrected_covariance: corrected,
        trimmed_mask: None,
        provenance: Provenance {
            n_xi: data.n_xi(),
            n_eta: data.n_eta(),
        },
    })
}

/// Variance deconvolution: `s^2(Q~) - mean_i(sigma2_i) / N_eta`.
pub fn variance_deconvolution(data: &TrainingData) -> Result<f64> {
    let s2 = data.sigma2eta().ok_or(UqError::NoiseVarianceUnavailable)?;
    let n = data.n_xi();
    if n < 2 {
        return Err(UqError::InsufficientSamples { needed: 2, got: n });
    }
    let q = data.qtilde();
    let mean = q.iter().sum::<f64>() / n as f64;
    let total = q.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let noise = s2.iter().sum::<f64>() / (n as f64 * data.n_eta() as f64);
    Ok(total - noise)
}

/// Target variance for [`PceSurrogate::trim`]: variance deconvolution when the
/// noise variance is available, otherwise the bias-corrected PC variance.
pub fn trim_target(data: &TrainingData, surrogate: &PceSurrogate) -> Result<f64> {
    if data.sigma2eta().is_some() && data.n_xi() >= 2 {
        variance_deconvolution(data)
    } else {
        surrogate.variance_unbiased()
    }
}

/// First-order and total Sobol indices, one entry per input variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolIndices {
    pub first: Vec<f64>,
    pub total: Vec<f64>,
}

impl PceSurrogate {
    /// Wraps exact or externally computed coefficients.
    pub fn from_coefficients(basis: MultiIndexBasis, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(UqError::DimensionMismatch {
                expected: basis.len(),
                got: coefficients.len(),
            });
        }
        Ok(PceSurrogate {
            basis,
            coefficients,
            coefficient_covariance: None,
            noise_corrected_covariance: None,
            trimmed_mask: None,
            provenance: Provenance { n_xi: 0, n_eta: 0 },
        })
    }

    pub fn is_retained(&self, k: usize) -> bool {
        self.trimmed_mask.as_ref().is_none_or(|m| m[k])
    }

    pub fn retained_count(&self) -> usize {
        (0..self.coefficients.len()).filter(|&k| self.is_retained(k)).count()
    }

    pub fn mean(&self) -> f64 {
        self.coefficients[0]
    }

    fn covariance(&self, noise_corrected: bool) -> Result<&SymMatrix> {
        if noise_corrected {
            self.noise_corrected_covariance
                .as_ref()
                .ok_or(UqError::MissingCovariance("noise-corrected"))
        } else {
            self.coefficient_covariance
                .as_ref()
                .ok_or(UqError::MissingCovariance("coefficient"))
        }
    }

    /// Per-term variance contributions `c_k * b_k` for `k >= 1`, with `c_k`
    /// either `beta_k^2` or the bias-corrected `beta_k^2 - Var[beta_k]`.
    /// Entry 0 is always 0.
    pub fn term_contributions(&self, unbiased: bool) -> Result<Vec<f64>> {
        let norms = self.basis.norms();
        let var = if unbiased {
            Some(self.covariance(false)?.diagonal())
        } else {
            None
        };
        Ok((0..self.coefficients.len())
            .map(|k| {
                if k == 0 {
                    return 0.0;
                }
                let b = self.coefficients[k];
                let sq = match &var {
                    Some(v) => b * b - v[k],
                    None => b * b,
                };
                sq * norms[k]
            })
            .collect())
    }

    fn retained_sum(&self, contributions: &[f64]) -> f64 {
        contributions
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(k, _)| self.is_retained(*k))
            .map(|(_, v)| v)
            .sum()
    }

    /// `sum_{k>=1} beta_k^2 b_k` over retained terms.
    pub fn variance_biased(&self) -> f64 {
        let c = self
            .term_contributions(false)
            .expect("raw contributions need no covariance");
        self.retained_sum(&c)
    }

    /// `sum_{k>=1} (beta_k^2 - Var[beta_k]) b_k` over retained terms. May be negative.
    pub fn variance_unbiased(&self) -> Result<f64> {
        let c = self.term_contributions(true)?;
        Ok(self.retained_sum(&c))
    }

    /// Keeps the smallest set of largest variance contributions whose sum
    /// reaches `min(target, total)`; the mean term is always kept. Uses the
    /// bias-corrected contributions when a covariance is attached.
    pub fn trim(&self, target: f64) -> PceSurrogate {
        let contributions = match self.term_contributions(true) {
            Ok(c) => c,
            Err(_) => self.term_contributions(false).expect("raw contributions"),
        };
        let p = self.coefficients.len();
        let mut order: Vec<usize> = (1..p).filter(|&k| self.is_retained(k)).collect();
        order.sort_by(|&a, &b| contributions[b].total_cmp(&contributions[a]).then(a.cmp(&b)));
        let total: f64 = order.iter().map(|&k| contributions[k]).sum();
        let threshold = target.min(total);

        let mut mask = vec![false; p];
        mask[0] = true;
        if target > 0.0 && threshold > 0.0 {
            let mut cum = 0.0;
            for &k in &order {
                if cum >= threshold {
                    break;
                }
                mask[k] = true;
                cum += contributions[k];
            }
        }
        PceSurrogate {
            trimmed_mask: Some(mask),
            ..self.clone()
        }
    }

    /// `beta_0 + sum_{k>=1, retained} beta_k Psi_k(xi)`.
    pub fn predict(&self, xi: &ParamSample) -> Result<f64> {
        let psi = self.basis.eval(xi)?;
        Ok(psi
            .iter()
            .zip(&self.coefficients)
            .enumerate()
            .filter(|(k, _)| self.is_retained(*k))
            .map(|(_, (p, b))| p * b)
            .sum())
    }

    /// Standard deviation of `Psi(xi)^T beta` over retained terms `k >= 1`.
    pub fn prediction_stddev(&self, xi: &ParamSample, use_noise_corrected: bool) -> Result<f64> {
        let cov = self.covariance(use_noise_corrected)?;
        let psi = self.basis.eval(xi)?;
        let v = cov.quadratic_form(&psi, |k| k >= 1 && self.is_retained(k));
        Ok(v.max(0.0).sqrt())
    }

    /// Sobol indices from the retained terms. A term counts towards the
    /// first-order index of `i` when `i` is its only active variable, and
    /// towards the total index of `i` whenever `i` is active.
    pub fn sobol_indices(&self, use_unbiased: bool) -> Result<SobolIndices> {
        let c = self.term_contributions(use_unbiased)?;
        let d = self.basis.dim();
        let mut first = vec![0.0; d];
        let mut total = vec![0.0; d];
        let mut denom = 0.0;
        for (k, idx) in self.basis.indices().iter().enumerate().skip(1) {
            if !self.is_retained(k) {
                continue;
            }
            denom += c[k];
            let active: Vec<usize> = idx.active_variables().collect();
            if let [only] = active[..] {
                first[only] += c[k];
            }
            for i in active {
                total[i] += c[k];
            }
        }
        if denom == 0.0 || !denom.is_finite() {
            return Err(UqError::UndefinedSobol);
        }
        first.iter_mut().chain(total.iter_mut()).for_each(|v| *v /= denom);
        Ok(SobolIndices { first, total })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polybasis::MultiIndex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn xi(v: &[f64]) -> ParamSample {
        ParamSample::new(v.to_vec()).unwrap()
    }

    fn random_samples(d: usize, n: usize, seed: u64) -> Vec<ParamSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| ParamSample::sample(d, &mut rng)).collect()
    }

    fn from_fn(d: usize, n: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> TrainingData {
        let s = random_samples(d, n, seed);
        let q = s.iter().map(|x| f(x.values())).collect();
        TrainingData::new(s, q, None, 1).unwrap()
    }

    /// Brute-force covariance straight from the definition, for comparison.
    fn brute_cov(data: &TrainingData, basis: &MultiIndexBasis) -> Vec<Vec<f64>> {
        let n = data.n_xi() as f64;
        let p = basis.len();
        let y: Vec<Vec<f64>> = data
            .samples()
            .iter()
            .zip(data.qtilde())
            .map(|(s, q)| {
                basis
                    .indices()
                    .iter()
                    .map(|m| m.eval(s.values()) * q / m.norm())
                    .collect()
            })
            .collect();
        let mean: Vec<f64> = (0..p).map(|k| y.iter().map(|r| r[k]).sum::<f64>() / n).collect();
        (0..p)
            .map(|k| {
                (0..p)
                    .map(|r| {
                        y.iter()
                            .map(|row| (row[k] - mean[k]) * (row[r] - mean[r]))
                            .sum::<f64>()
                            / ((n - 1.0) * n)
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn training_data_validation() {
        let s = random_samples(2, 3, 1);
        assert!(TrainingData::new(s.clone(), vec![0.1; 3], None, 1).is_ok());
        assert!(TrainingData::new(s.clone(), vec![0.1; 2], None, 1).is_err());
        assert!(TrainingData::new(s.clone(), vec![0.1; 3], None, 2).is_err());
        assert!(TrainingData::new(s.clone(), vec![0.1; 3], Some(vec![0.0; 3]), 1).is_err());
        assert!(TrainingData::new(s.clone(), vec![0.1; 3], Some(vec![-0.1, 0.0, 0.0]), 2).is_err());
        assert!(TrainingData::new(vec![], vec![], None, 1).is_err());
        let mixed = vec![xi(&[0.0]), xi(&[0.0, 0.1])];
        assert!(TrainingData::new(mixed, vec![0.0; 2], None, 1).is_err());
    }

    #[test]
    fn constant_qoi_projects_to_mean() {
        let data = from_fn(2, 50, 2, |_| 0.7);
        let basis = MultiIndexBasis::total_degree(2, 3).unwrap();
        let s = estimate_coefficients(&data, &basis).unwrap();
        assert!((s.mean() - 0.7).abs() < 1e-15);
        for (k, m) in basis.indices().iter().enumerate().skip(1) {
            let expect = data
                .samples()
                .iter()
                .map(|x| 0.7 * m.eval(x.values()) / m.norm())
                .sum::<f64>()
                / 50.0;
            assert!((s.coefficients[k] - expect).abs() < 1e-12);
        }
        let wrong = MultiIndexBasis::total_degree(3, 1).unwrap();
        assert!(estimate_coefficients(&data, &wrong).is_err());
    }

    #[test]
    fn linear_qoi_large_sample() {
        let n = 1_000_000;
        let data = from_fn(1, n, 3, |x| x[0]);
        let basis = MultiIndexBasis::total_degree(1, 2).unwrap();
        let s = fit_surrogate(&data, &basis).unwrap();
        let se = s.coefficient_covariance.as_ref().unwrap().get(1, 1).sqrt();
        assert!((s.coefficients[1] - 1.0).abs() < 3.0 * se);
    }

    #[test]
    fn covariance_matches_brute_force() {
        let problem = SlabProblem::attenuation_3d();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = TrainingData::simulate(&problem, 40, 3, &mut rng).unwrap();
        let basis = MultiIndexBasis::total_degree(3, 2).unwrap();
        let cov = coefficient_covariance(&data, &basis).unwrap();
        let brute = brute_cov(&data, &basis);
        for k in 0..basis.len() {
            for r in 0..basis.len() {
                assert!((cov.get(k, r) - brute[k][r]).abs() < 1e-12);
                assert_eq!(cov.get(k, r), cov.get(r, k));
            }
        }
    }

    #[test]
    fn constant_qoi_covariance() {
        let data = from_fn(1, 30, 5, |_| 0.4);
        let basis = MultiIndexBasis::total_degree(1, 3).unwrap();
        let cov = coefficient_covariance(&data, &basis).unwrap();
        let brute = brute_cov(&data, &basis);
        for k in 0..4 {
            assert!(cov.get(0, k).abs() < 1e-15);
            for r in 0..4 {
                assert!((cov.get(k, r) - brute[k][r]).abs() < 1e-12);
            }
        }
        let one = from_fn(1, 1, 5, |_| 0.4);
        assert!(matches!(
            coefficient_covariance(&one, &basis),
            Err(UqError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn noise_correction_requires_nested_data() {
        let data = from_fn(1, 10, 6, |x| x[0]);
        let basis = MultiIndexBasis::total_degree(1, 2).unwrap();
        assert!(matches!(
            noise_corrected_covariance(&data, &basis),
            Err(UqError::NoiseVarianceUnavailable)
        ));
        assert!(matches!(variance_deconvolution(&data), Err(UqError::NoiseVarianceUnavailable)));
    }

    #[test]
    fn noise_free_correction_is_identity() {
        let problem = SlabProblem::attenuation_1d();
        let data = TrainingData::noise_free(&problem, random_samples(1, 60, 7), 4).unwrap();
        let basis = MultiIndexBasis::total_degree(1, 4).unwrap();
        let joint = coefficient_covariance(&data, &basis).unwrap();
        let corrected = noise_corrected_covariance(&data, &basis).unwrap();
        assert_eq!(joint, corrected);

        let q = data.qtilde();
        let m = q.iter().sum::<f64>() / 60.0;
        let s2 = q.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 59.0;
        assert_eq!(variance_deconvolution(&data).unwrap(), s2);
    }

    #[test]
    fn noise_correction_subtracts_expected_term() {
        let problem = SlabProblem::attenuation_1d();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = TrainingData::simulate(&problem, 25, 5, &mut rng).unwrap();
        let basis = MultiIndexBasis::total_degree(1, 3).unwrap();
        let joint = coefficient_covariance(&data, &basis).unwrap();
        let corrected = noise_corrected_covariance(&data, &basis).unwrap();
        let s2 = data.sigma2eta().unwrap();
        for (k, mk) in basis.indices().iter().enumerate() {
            for (r, mr) in basis.indices().iter().enumerate() {
                let term = data
                    .samples()
                    .iter()
                    .zip(s2)
                    .map(|(x, s)| mk.eval(x.values()) * mr.eval(x.values()) * s / 5.0)
                    .sum::<f64>()
                    / 25.0;
                let expect = joint.get(k, r) - term / (25.0 * mk.norm() * mr.norm());
                assert!((corrected.get(k, r) - expect).abs() < 1e-12);
            }
            // correction on the diagonal is a mean of nonnegative terms
            assert!(corrected.get(k, k) <= joint.get(k, k));
        }
    }

    fn surrogate(coeffs: Vec<f64>, d: usize, n0: u32) -> PceSurrogate {
        let basis = MultiIndexBasis::total_degree(d, n0).unwrap();
        PceSurrogate::from_coefficients(basis, coeffs).unwrap()
    }

    #[test]
    fn moments_from_coefficients() {
        let s = surrogate(vec![0.3, 0.0, 0.0], 1, 2);
        assert_eq!(s.mean(), 0.3);
        assert_eq!(s.variance_biased(), 0.0);

        let s = surrogate(vec![0.0, 2.0], 1, 1);
        assert!((s.variance_biased() - 4.0 / 3.0).abs() < 1e-15);
        assert!(matches!(s.variance_unbiased(), Err(UqError::MissingCovariance(_))));

        let mut z = s.clone();
        z.coefficient_covariance = Some(SymMatrix::zeros(2));
        assert_eq!(z.variance_unbiased().unwrap(), z.variance_biased());
    }

    #[test]
    fn biased_dominates_unbiased() {
        let problem = SlabProblem::attenuation_3d();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = TrainingData::simulate(&problem, 30, 1, &mut rng).unwrap();
        let basis = MultiIndexBasis::total_degree(3, 3).unwrap();
        let s = fit_surrogate(&data, &basis).unwrap();
        assert!(s.variance_biased() >= s.variance_unbiased().unwrap());
    }

    #[test]
    fn trim_rule() {
        // d = 1, n0 = 3, norms 1/3, 1/5, 1/7: pick coefficients so the
        // contributions are {0.5, 0.3, 0.2} in shuffled term order.
        let b = |v: f64, norm: f64| (v / norm).sqrt();
        let s = surrogate(vec![0.1, b(0.3, 1.0 / 3.0), b(0.2, 0.2), b(0.5, 1.0 / 7.0)], 1, 3);
        let t = s.trim(0.7);
        assert_eq!(t.trimmed_mask.as_deref(), Some(&[true, true, false, true][..]));
        assert!((t.variance_biased() - 0.8).abs() < 1e-12);

        let none = s.trim(5.0);
        assert_eq!(none.retained_count(), 4);
        let none = s.trim(1.0);
        assert_eq!(none.retained_count(), 4);

        for target in [0.0, -1.0] {
            let mean_only = s.trim(target);
            assert_eq!(mean_only.retained_count(), 1);
            assert_eq!(mean_only.variance_biased(), 0.0);
            assert_eq!(mean_only.predict(&xi(&[0.4])).unwrap(), 0.1);
        }
        assert_eq!(s.trim(0.49).retained_count(), 2);
        assert_eq!(s.trim(0.50001).retained_count(), 3);
    }

    #[test]
    fn trim_drops_negative_contributions() {
        let mut s = surrogate(vec![0.5, 0.3, 0.01, 0.2], 1, 3);
        let mut cov = SymMatrix::zeros(4);
        cov.set_sym(2, 2, 0.05);
        s.coefficient_covariance = Some(cov);
        let c = s.term_contributions(true).unwrap();
        assert!(c[2] < 0.0);
        // total = 0.03 - 0.00998 + 0.04/7 < 0.03, so the largest term alone reaches it
        let t = s.trim(10.0);
        assert_eq!(t.trimmed_mask.as_deref(), Some(&[true, true, false, false][..]));
        assert!(t.variance_unbiased().unwrap() > 0.0);
    }

    #[test]
    fn prediction() {
        let s = surrogate(vec![0.0, 1.0], 1, 1);
        assert!((s.predict(&xi(&[0.3])).unwrap() - 0.3).abs() < 1e-15);
        assert!(s.predict(&xi(&[0.3, 0.1])).is_err());

        let mut s = surrogate(vec![0.2, 0.4, 0.1], 1, 2);
        assert!(matches!(s.prediction_stddev(&xi(&[0.5]), false), Err(UqError::MissingCovariance(_))));
        s.coefficient_covariance = Some(SymMatrix::zeros(3));
        assert_eq!(s.prediction_stddev(&xi(&[0.5]), false).unwrap(), 0.0);
        s.coefficient_covariance = Some(SymMatrix::identity(3));
        let sd = s.prediction_stddev(&xi(&[0.5]), false).unwrap();
        assert!((sd - 0.265625f64.sqrt()).abs() < 1e-15);
        assert!(s.prediction_stddev(&xi(&[0.5]), true).is_err());
    }

    #[test]
    fn sobol_single_variable() {
        let mut s = surrogate(vec![0.4, -0.2, 0.05, 0.01], 1, 3);
        let idx = s.sobol_indices(false).unwrap();
        assert_eq!((idx.first[0], idx.total[0]), (1.0, 1.0));
        s.coefficient_covariance = Some(SymMatrix::identity(4));
        let idx = s.sobol_indices(true).unwrap();
        assert!((idx.first[0] - 1.0).abs() < 1e-12);

        let flat = surrogate(vec![0.4, 0.0, 0.0], 1, 2);
        assert!(matches!(flat.sobol_indices(false), Err(UqError::UndefinedSobol)));
    }

    #[test]
    fn sobol_additive_and_interaction() {
        let basis = MultiIndexBasis::total_degree(2, 2).unwrap();
        // (0,0) (1,0) (0,1) (2,0) (1,1) (0,2)
        let s = PceSurrogate::from_coefficients(basis.clone(), vec![1.0, 0.5, -0.3, 0.2, 0.0, 0.1]).unwrap();
        let idx = s.sobol_indices(false).unwrap();
        assert!((idx.first.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert_eq!(idx.first, idx.total);

        let s = PceSurrogate::from_coefficients(basis, vec![1.0, 0.5, -0.3, 0.0, 0.4, 0.0]).unwrap();
        let idx = s.sobol_indices(false).unwrap();
        let v = [0.25 / 3.0, 0.09 / 3.0, 0.16 / 9.0];
        let tot: f64 = v.iter().sum();
        assert!((idx.first[0] - v[0] / tot).abs() < 1e-14);
        assert!((idx.total[1] - (v[1] + v[2]) / tot).abs() < 1e-14);
        assert!(idx.first.iter().sum::<f64>() < 1.0);
    }

    #[test]
    fn trimmed_terms_leave_sobol_and_prediction() {
        let basis = MultiIndexBasis::total_degree(2, 1).unwrap();
        let mut s = PceSurrogate::from_coefficients(basis, vec![0.5, 0.3, 0.2]).unwrap();
        s.trimmed_mask = Some(vec![true, true, false]);
        let idx = s.sobol_indices(false).unwrap();
        assert_eq!(idx.first, vec![1.0, 0.0]);
        assert!((s.predict(&xi(&[0.5, 1.0])).unwrap() - 0.65).abs() < 1e-15);
    }

    #[test]
    fn surrogate_json_round_trip() {
        let problem = SlabProblem::attenuation_1d();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let data = TrainingData::simulate(&problem, 20, 2, &mut rng).unwrap();
        let basis = MultiIndexBasis::total_degree(1, 3).unwrap();
        let s = fit_surrogate(&data, &basis).unwrap().trim(0.01);
        let back: PceSurrogate = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        let _ = MultiIndex::zeros(1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn covariance_is_psd(seed in 0u64..10_000, n_eta in 1usize..5, v in proptest::collection::vec(-1.0f64..1.0, 10)) {
                let problem = SlabProblem::attenuation_3d();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let data = TrainingData::simulate(&problem, 15, n_eta, &mut rng).unwrap();
                let basis = MultiIndexBasis::total_degree(3, 2).unwrap();
                let cov = coefficient_covariance(&data, &basis).unwrap();
                prop_assert!(cov.quadratic_form(&v, |_| true) >= -1e-10);
            }

            #[test]
            fn trim_never_goes_negative(seed in 0u64..10_000, n_eta in 1usize..4, target in 0.0f64..0.1) {
                let problem = SlabProblem::attenuation_3d();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let data = TrainingData::simulate(&problem, 25, n_eta, &mut rng).unwrap();
                let basis = MultiIndexBasis::total_degree(3, 3).unwrap();
                let s = fit_surrogate(&data, &basis).unwrap();
                let t = s.trim(target);
                prop_assert!(t.variance_unbiased().unwrap() >= 0.0);
                prop_assert!(t.is_retained(0));
                prop_assert!(t.retained_count() <= s.retained_count());
            }
        }
    }
}
