//! Analog Monte Carlo for a 1D, mono-energetic, absorption-only slab.
//!
//! The slab is a stack of `d` material sections hit by a normally incident
//! beam at `x = 0`. Section `m` has an uncertain total cross section
//! `sigma0_m + sigma_delta_m * xi_m` with `xi_m ~ U(-1, 1)`. The tallied
//! quantity is the transmittance, the probability of leaking at `x = L`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UqError};

/// One material section of the slab.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MaterialSpec", into = "MaterialSpec")]
pub struct Material {
    sigma0: f64,
    sigma_delta: f64,
    dx: f64,
}

/// Serialized form of a [`Material`]: either mean/half-width or interval
/// endpoints. `dx` defaults to 1 cm.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaterialSpec {
    Mean {
        sigma0: f64,
        #[serde(rename = "sigmaDelta", alias = "sigma_delta")]
        sigma_delta: f64,
        #[serde(default = "default_dx")]
        dx: f64,
    },
    Interval {
        lo: f64,
        hi: f64,
        #[serde(default = "default_dx")]
        dx: f64,
    },
}

fn default_dx() -> f64 {
    1.0
}

impl TryFrom<MaterialSpec> for Material {
    type Error = UqError;

    fn try_from(spec: MaterialSpec) -> Result<Self> {
        match spec {
            MaterialSpec::Mean {
                sigma0,
                sigma_delta,
                dx,
            } => Material::new(sigma0, sigma_delta, dx),
            MaterialSpec::Interval { lo, hi, dx } => {
                if !(hi >= lo) {
                    return Err(UqError::pre(format!(
                        "cross-section interval [{lo}, {hi}] is empty"
                    )));
                }
                Material::new(0.5 * (lo + hi), 0.5 * (hi - lo), dx)
            }
        }
    }
}

impl From<Material> for MaterialSpec {
    fn from(m: Material) -> Self {
        MaterialSpec::Mean {
            sigma0: m.sigma0,
            sigma_delta: m.sigma_delta,
            dx: m.dx,
        }
    }
}

impl Material {
    pub fn new(sigma0: f64, sigma_delta: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(UqError::pre(format!("section width must be positive, got {dx}")));
        }
        if !(sigma_delta >= 0.0 && sigma_delta.is_finite()) {
            return Err(UqError::pre(format!(
                "cross-section half-width must be nonnegative, got {sigma_delta}"
            )));
        }
        // Tolerate round-off from the (lo, hi) conversion when lo == 0.
        if !(sigma0.is_finite() && sigma0 - sigma_delta >= -1e-15 * sigma0.abs().max(1.0)) {
            return Err(UqError::pre(format!(
                "cross section goes negative: sigma0 = {sigma0}, sigmaDelta = {sigma_delta}"
            )));
        }
        Ok(Material {
            sigma0,
            sigma_delta,
            dx,
        })
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn sigma_delta(&self) -> f64 {
        self.sigma_delta
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    fn cross_section(&self, xi: f64) -> f64 {
        (self.sigma0 + self.sigma_delta * xi).max(0.0)
    }
}

/// Slab geometry plus the uncertain cross-section model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Material>", into = "Vec<Material>")]
pub struct SlabProblem {
    materials: Vec<Material>,
}

impl TryFrom<Vec<Material>> for SlabProblem {
    type Error = UqError;

    fn try_from(materials: Vec<Material>) -> Result<Self> {
        SlabProblem::new(materials)
    }
}

impl From<SlabProblem> for Vec<Material> {
    fn from(p: SlabProblem) -> Self {
        p.materials
    }
}

impl SlabProblem {
    pub fn new(materials: Vec<Material>) -> Result<Self> {
        if materials.is_empty() {
            return Err(UqError::pre("slab needs at least one material section"));
        }
        Ok(SlabProblem { materials })
    }

    /// Single 1 cm section with `Sigma_t ~ U(0.05, 1.95)`.
    pub fn attenuation_1d() -> Self {
        SlabProblem {
            materials: vec![Material {
                sigma0: 1.0,
                sigma_delta: 0.95,
                dx: 1.0,
            }],
        }
    }

    /// Three 1 cm sections, each with `Sigma_t ~ U(0.01, 0.59)`.
    pub fn attenuation_3d() -> Self {
        let m = Material {
            sigma0: 0.3,
            sigma_delta: 0.29,
            dx: 1.0,
        };
        SlabProblem {
            materials: vec![m; 3],
        }
    }

    /// Number of uncertain parameters (one per section).
    pub fn dim(&self) -> usize {
        self.materials.len()
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn length(&self) -> f64 {
        self.materials.iter().map(|m| m.dx).sum()
    }

    pub fn check_sample(&self, xi: &ParamSample) -> Result<()> {
        if xi.dim() != self.dim() {
            return Err(UqError::DimensionMismatch {
                expected: self.dim(),
                got: xi.dim(),
            });
        }
        Ok(())
    }

    pub fn cross_section(&self, m: usize, xi_m: f64) -> Result<f64> {
        let mat = self.materials.get(m).ok_or_else(|| {
            UqError::pre(format!("material index {m} out of range for d = {}", self.dim()))
        })?;
        if !(-1.0..=1.0).contains(&xi_m) {
            return Err(UqError::pre(format!("xi_m = {xi_m} outside [-1, 1]")));
        }
        Ok(mat.cross_section(xi_m))
    }

    /// Per-section optical thickness `Sigma_t,m(xi_m) * dx_m`.
    fn section_depths(&self, xi: &ParamSample) -> Vec<f64> {
        self.materials
            .iter()
            .zip(xi.values())
            .map(|(m, &x)| m.cross_section(x) * m.dx)
            .collect()
    }

    pub fn total_optical_depth(&self, xi: &ParamSample) -> Result<f64> {
        self.check_sample(xi)?;
        Ok(self.section_depths(xi).iter().sum())
    }

    /// Closed-form transmittance `exp(-tau(xi))`.
    pub fn analytic_transmittance(&self, xi: &ParamSample) -> Result<f64> {
        Ok((-self.total_optical_depth(xi)?).exp())
    }

    /// Runs `n_eta` particle histories at a fixed parameter sample.
    ///
    /// Each history draws an optical-depth budget `-ln(u)` and walks the
    /// sections in order; it scores 1 if it leaves the slab at `x = L`.
    pub fn simulate_histories<R: Rng + ?Sized>(
        &self,
        xi: &ParamSample,
        n_eta: usize,
        rng: &mut R,
    ) -> Result<HistoryTally> {
        self.check_sample(xi)?;
        if n_eta == 0 {
            return Err(UqError::pre("n_eta must be at least 1"));
        }
        let depths = self.section_depths(xi);
        let mut leaked = 0usize;
        for _ in 0..n_eta {
            // u in (0, 1] so the budget is finite.
            let u: f64 = 1.0 - rng.gen::<f64>();
            let mut budget = -u.ln();
            let mut absorbed = false;
            for &tau in &depths {
                if tau > budget {
                    absorbed = true;
                    break;
                }
                budget -= tau;
            }
            if !absorbed {
                leaked += 1;
            }
        }
        Ok(HistoryTally::from_counts(leaked, n_eta))
    }
}

/// A point `xi` in `[-1, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamSample(Vec<f64>);

impl TryFrom<Vec<f64>> for ParamSample {
    type Error = UqError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ParamSample::new(v)
    }
}

impl From<ParamSample> for Vec<f64> {
    fn from(p: ParamSample) -> Self {
        p.0
    }
}

impl ParamSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(UqError::pre("parameter sample must have at least one component"));
        }
        if let Some(bad) = values.iter().find(|x| !(-1.0..=1.0).contains(*x)) {
            return Err(UqError::pre(format!("parameter component {bad} outside [-1, 1]")));
        }
        Ok(ParamSample(values))
    }

    /// Draws `xi ~ U(-1, 1)^d`.
    pub fn sample<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        ParamSample((0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Per-sample tally of `n_eta` Bernoulli history outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryTally {
    pub qtilde: f64,
    /// Unbiased sample variance of the outcomes; `None` when `n_eta == 1`.
    pub sigma2eta: Option<f64>,
    pub n_eta: usize,
}

impl HistoryTally {
    pub fn from_counts(successes: usize, n_eta: usize) -> Self {
        assert!(n_eta >= 1 && successes <= n_eta);
        let n = n_eta as f64;
        let s = successes as f64;
        let qtilde = s / n;
        // sum (f - q)^2 = s (1 - q) for 0/1 outcomes
        let sigma2eta = (n_eta >= 2).then(|| s * (1.0 - qtilde) / (n - 1.0));
        HistoryTally {
            qtilde,
            sigma2eta,
            n_eta,
        }
    }
}
