//! Study results and their on-disk layout.
//!
//! Files written by [`StudyReport::write_to`]:
//!
//! | file | columns / content |
//! |------|-------------------|
//! | `records.csv` | `n_xi,n_eta,method,repetition,estimate` |
//! | `summary.json` | exact statistics, per-cell MSE / bias / repetition variance |
//! | `density_nxi<N>_neta<M>_<method>.csv` | `bin_lo,bin_hi,density,count` |
//! | `response_nxi<N>_neta<M>_b<r>_<full\|trim>.csv` | `xi,predict,band_lo,band_hi,analytic` |
//! | `gsa.csv` | `n_xi,n_eta,method,repetition,variable,first_order,total_order` |
//!
//! Floats are written in Rust's shortest round-trip form, so identical
//! results give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Result, UqError};
use crate::experiments::config::{Method, StudyKind};

/// Equal-width histogram normalised to unit integral.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<usize>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn integral(&self) -> f64 {
        self.density.iter().map(|d| d * self.width).sum()
    }
}

/// Bins `values` over `[min, max]`. A degenerate range collapses to a single
/// unit-width bin centred on the value.
pub fn emit_density(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(UqError::EmptyInput("density needs at least one value"));
    }
    if bins == 0 {
        return Err(UqError::pre("density needs at least one bin"));
    }
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(UqError::EmptyInput("density needs at least one finite value"));
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = finite.len() as f64;
    if hi == lo {
        return Ok(Histogram {
            lo: lo - 0.5,
            width: 1.0,
            counts: vec![finite.len()],
            density: vec![1.0],
        });
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in &finite {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let density = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    Ok(Histogram {
        lo,
        width,
        counts,
        density,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceRecord {
    pub n_xi: usize,
    pub n_eta: usize,
    pub method: Method,
    pub repetition: usize,
    pub estimate: f64,
}

/// Repetition statistics of one method at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub n_xi: usize,
    pub n_eta: usize,
    pub method: Method,
    pub available: bool,
    pub repetitions: usize,
    pub mean: f64,
    pub bias: f64,
    /// Repetition variance with divisor `R`, so `mse = bias^2 + variance`.
    pub variance: f64,
    /// Standard error of the repetition mean (divisor `R - 1`).
    pub std_error: f64,
    pub mse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realized_cost: Option<f64>,
}

impl CellSummary {
    pub fn from_estimates(
        n_xi: usize,
        n_eta: usize,
        method: Method,
        estimates: &[f64],
        exact: f64,
        realized_cost: Option<f64>,
    ) -> Result<Self> {
        let r = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / r;
        let ss = estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
        let std_error = if estimates.len() > 1 {
            (ss / (r - 1.0) / r).sqrt()
        } else {
            f64::NAN
        };
        Ok(CellSummary {
            n_xi,
            n_eta,
            method,
            available: true,
            repetitions: estimates.len(),
            mean,
            bias: mean - exact,
            variance: ss / r,
            std_error,
            mse: crate::oracle::mse(estimates, exact)?,
            realized_cost,
        })
    }

    pub fn unavailable(n_xi: usize, n_eta: usize, method: Method) -> Self {
        CellSummary {
            n_xi,
            n_eta,
            method,
            available: false,
            repetitions: 0,
            mean: f64::NAN,
            bias: f64::NAN,
            variance: f64::NAN,
            std_error: f64::NAN,
            mse: f64::NAN,
            realized_cost: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityRecord {
    pub n_xi: usize,
    pub n_eta: usize,
    pub method: Method,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GsaRecord {
    pub n_xi: usize,
    pub n_eta: usize,
    pub method: Method,
    pub repetition: usize,
    pub first: Vec<f64>,
    pub total: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GsaSummary {
    pub n_xi: usize,
    pub n_eta: usize,
    pub method: Method,
    pub variable: usize,
    pub first_mean: f64,
    pub first_std_error: f64,
    pub total_mean: f64,
    pub total_std_error: f64,
    pub exact_first: f64,
    pub exact_total: f64,
    /// Realizations where the indices were undefined (zero variance).
    pub undefined: usize,
}

/// One surrogate build evaluated on a `xi` grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseCurve {
    pub n_xi: usize,
    pub n_eta: usize,
    pub build: usize,
    pub trimmed: bool,
    pub retained_terms: usize,
    pub xi: Vec<f64>,
    pub predict: Vec<f64>,
    pub stddev: Vec<f64>,
    pub analytic: Vec<f64>,
    /// Exact-coefficient PC on the same retained terms.
    pub projection: Vec<f64>,
}

impl ResponseCurve {
    /// Fraction of grid points where the exact projection lies in the ±2σ band.
    pub fn coverage(&self) -> f64 {
        let hit = self
            .predict
            .iter()
            .zip(&self.stddev)
            .zip(&self.projection)
            .filter(|((p, s), e)| (*p - *e).abs() <= 2.0 * *s)
            .count();
        hit as f64 / self.predict.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactSummary {
    pub mean: f64,
    pub variance: f64,
    pub sobol_first: Vec<f64>,
    pub sobol_total: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub kind: StudyKind,
    pub master_seed: u64,
    pub n0: u32,
    pub exact: ExactSummary,
    pub records: Vec<VarianceRecord>,
    pub cells: Vec<CellSummary>,
    #[serde(skip)]
    pub densities: Vec<DensityRecord>,
    #[serde(skip)]
    pub gsa: Vec<GsaRecord>,
    pub gsa_summary: Vec<GsaSummary>,
    #[serde(skip)]
    pub responses: Vec<ResponseCurve>,
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:?}")
    }
}

impl StudyReport {
    pub fn records_csv(&self) -> String {
        let mut s = String::from("n_xi,n_eta,method,repetition,estimate\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.n_xi,
                r.n_eta,
                r.method,
                r.repetition,
                fmt_f64(r.estimate)
            );
        }
        s
    }

    pub fn gsa_csv(&self) -> String {
        let mut s = String::from("n_xi,n_eta,method,repetition,variable,first_order,total_order\n");
        for g in &self.gsa {
            for (i, (f, t)) in g.first.iter().zip(&g.total).enumerate() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    g.n_xi,
                    g.n_eta,
                    g.method,
                    g.repetition,
                    i + 1,
                    fmt_f64(*f),
                    fmt_f64(*t)
                );
            }
        }
        s
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        if self.kind == StudyKind::Variance {
            fs::write(dir.join("records.csv"), self.records_csv())?;
        }
        fs::write(dir.join("summary.json"), self.summary_json()?)?;
        for d in &self.densities {
            let mut s = String::from("bin_lo,bin_hi,density,count\n");
            let h = &d.histogram;
            for (b, (dens, count)) in h.density.iter().zip(&h.counts).enumerate() {
                let lo = h.lo + b as f64 * h.width;
                let _ = writeln!(s, "{},{},{},{}", fmt_f64(lo), fmt_f64(lo + h.width), fmt_f64(*dens), count);
            }
            let name = format!("density_nxi{}_neta{}_{}.csv", d.n_xi, d.n_eta, d.method);
            fs::write(dir.join(name), s)?;
        }
        if !self.gsa.is_empty() {
            fs::write(dir.join("gsa.csv"), self.gsa_csv())?;
        }
        for c in &self.responses {
            let mut s = String::from("xi,predict,band_lo,band_hi,analytic\n");
            for i in 0..c.xi.len() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    fmt_f64(c.xi[i]),
                    fmt_f64(c.predict[i]),
                    fmt_f64(c.predict[i] - 2.0 * c.stddev[i]),
                    fmt_f64(c.predict[i] + 2.0 * c.stddev[i]),
                    fmt_f64(c.analytic[i])
                );
            }
            let variant = if c.trimmed { "trim" } else { "full" };
            let name = format!("response_nxi{}_neta{}_b{}_{}.csv", c.n_xi, c.n_eta, c.build, variant);
            fs::write(dir.join(name), s)?;
        }
        Ok(())
    }
}
