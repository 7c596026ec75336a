//! Repetition studies over `(N_xi, N_eta)` grids.
//!
//! Each `(repetition, cell)` pair is an independent work unit. Sample `i` of
//! a unit draws its parameters and its histories from
//! [`seed::stream`](super::seed::stream)`(master_seed, repetition, cell, i)`,
//! and within a unit every method sees the same training data.

use rayon::prelude::*;

use crate::error::{Result, UqError};
use crate::experiments::config::{Cell, Method, StudyConfig, StudyKind};
use crate::experiments::report::{
    emit_density, CellSummary, DensityRecord, ExactSummary, GsaRecord, GsaSummary, ResponseCurve,
    StudyReport, VarianceRecord,
};
use crate::experiments::seed;
use crate::nisp::{self, PceSurrogate, TrainingData};
use crate::oracle;
use crate::polybasis::MultiIndexBasis;
use crate::transport::{ParamSample, SlabProblem};

/// Training set for one work unit.
pub fn training_data(
    problem: &SlabProblem,
    cell: Cell,
    noise_free: bool,
    master_seed: u64,
    repetition: usize,
    cell_index: usize,
) -> Result<TrainingData> {
    let d = problem.dim();
    let mut samples = Vec::with_capacity(cell.n_xi);
    let mut q = Vec::with_capacity(cell.n_xi);
    let mut s2 = Vec::with_capacity(cell.n_xi);
    for i in 0..cell.n_xi {
        let mut rng = seed::stream(master_seed, repetition as u64, cell_index as u64, i as u64);
        let xi = ParamSample::sample(d, &mut rng);
        if noise_free {
            q.push(problem.analytic_transmittance(&xi)?);
            s2.push(0.0);
        } else {
            let t = problem.simulate_histories(&xi, cell.n_eta, &mut rng)?;
            q.push(t.qtilde);
            s2.push(t.sigma2eta.unwrap_or(0.0));
        }
        samples.push(xi);
    }
    TrainingData::new(samples, q, (cell.n_eta >= 2).then_some(s2), cell.n_eta)
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| UqError::Config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn exact_summary(problem: &SlabProblem) -> ExactSummary {
    let s = oracle::exact_sobol(problem);
    ExactSummary {
        mean: oracle::exact_mean(problem),
        variance: oracle::exact_variance(problem),
        sobol_first: s.first,
        sobol_total: s.total,
    }
}

/// Variance estimate of one method on one fitted surrogate.
pub fn estimate_variance(method: Method, data: &TrainingData, surrogate: &PceSurrogate) -> Result<f64> {
    match method {
        Method::PcMc21 => Ok(surrogate.variance_biased()),
        Method::PcBias => surrogate.variance_unbiased(),
        Method::PcBiasTrim => {
            let target = nisp::trim_target(data, surrogate)?;
            surrogate.trim(target).variance_unbiased()
        }
        Method::VarDeconv => nisp::variance_deconvolution(data),
    }
}

fn methods_for(config: &StudyConfig, n_eta: usize) -> Vec<Method> {
    config
        .methods
        .iter()
        .copied()
        .filter(|m| m.available(n_eta))
        .collect()
}

fn work_units(cells: &[Cell], repetitions: usize) -> Vec<(usize, usize)> {
    (0..cells.len())
        .flat_map(|g| (0..repetitions).map(move |r| (g, r)))
        .collect()
}

pub fn run_variance_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let cells = config.cells()?;
    let basis = MultiIndexBasis::total_degree(config.problem.dim(), config.n0)?;
    let exact = exact_summary(&config.problem);
    let needs_fit = config.methods.iter().any(|m| *m != Method::VarDeconv);

    let units = work_units(&cells, config.repetitions);
    let results: Vec<Result<Vec<f64>>> = in_pool(config.workers, || {
        units
            .par_iter()
            .map(|&(g, r)| {
                let cell = cells[g];
                let data = training_data(&config.problem, cell, config.noise_free, config.master_seed, r, g)?;
                let surrogate = if needs_fit {
                    Some(nisp::fit_surrogate(&data, &basis)?)
                } else {
                    None
                };
                methods_for(config, cell.n_eta)
                    .into_iter()
                    .map(|m| match &surrogate {
                        Some(s) => estimate_variance(m, &data, s),
                        None => nisp::variance_deconvolution(&data),
                    })
                    .collect()
            })
            .collect()
    })?;
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    let mut summaries = Vec::new();
    let mut densities = Vec::new();
    for (g, cell) in cells.iter().enumerate() {
        let unit = &results[g * config.repetitions..(g + 1) * config.repetitions];
        let realized_cost = config
            .cost
            .map(|c| cell.n_xi as f64 * c.cost_per_sample(cell.n_eta as f64));
        let mut col = 0;
        for &method in &config.methods {
            if !method.available(cell.n_eta) {
                summaries.push(CellSummary::unavailable(cell.n_xi, cell.n_eta, method));
                continue;
            }
            let estimates: Vec<f64> = unit.iter().map(|row| row[col]).collect();
            col += 1;
            records.extend(estimates.iter().enumerate().map(|(r, &estimate)| VarianceRecord {
                n_xi: cell.n_xi,
                n_eta: cell.n_eta,
                method,
                repetition: r,
                estimate,
            }));
            summaries.push(CellSummary::from_estimates(
                cell.n_xi,
                cell.n_eta,
                method,
                &estimates,
                exact.variance,
                realized_cost,
            )?);
            densities.push(DensityRecord {
                n_xi: cell.n_xi,
                n_eta: cell.n_eta,
                method,
                histogram: emit_density(&estimates, config.bins)?,
            });
        }
    }
    Ok(StudyReport {
        kind: StudyKind::Variance,
        master_seed: config.master_seed,
        n0: config.n0,
        exact,
        records,
        cells: summaries,
        densities,
        gsa: Vec::new(),
        gsa_summary: Vec::new(),
        responses: Vec::new(),
    })
}

/// Evaluation points: `xi_1` sweeps `[-1, 1]`, other components stay at 0.
fn response_grid(d: usize, points: usize) -> Vec<ParamSample> {
    (0..points)
        .map(|j| {
            let mut v = vec![0.0; d];
            v[0] = (-1.0 + 2.0 * j as f64 / (points - 1) as f64).clamp(-1.0, 1.0);
            ParamSample::new(v).expect("grid point inside the box")
        })
        .collect()
}

fn response_curve(
    surrogate: &PceSurrogate,
    exact: &PceSurrogate,
    problem: &SlabProblem,
    grid: &[ParamSample],
    noise_corrected: bool,
    cell: Cell,
    build: usize,
) -> Result<ResponseCurve> {
    let projection = PceSurrogate {
        trimmed_mask: surrogate.trimmed_mask.clone(),
        ..exact.clone()
    };
    let mut curve = ResponseCurve {
        n_xi: cell.n_xi,
        n_eta: cell.n_eta,
        build,
        trimmed: surrogate.trimmed_mask.is_some(),
        retained_terms: surrogate.retained_count(),
        xi: Vec::with_capacity(grid.len()),
        predict: Vec::with_capacity(grid.len()),
        stddev: Vec::with_capacity(grid.len()),
        analytic: Vec::with_capacity(grid.len()),
        projection: Vec::with_capacity(grid.len()),
    };
    for x in grid {
        curve.xi.push(x.values()[0]);
        curve.predict.push(surrogate.predict(x)?);
        curve.stddev.push(surrogate.prediction_stddev(x, noise_corrected)?);
        curve.analytic.push(problem.analytic_transmittance(x)?);
        curve.projection.push(projection.predict(x)?);
    }
    Ok(curve)
}

/// PC response curves with ±2σ bands for `repetitions` independent builds per
/// cell, with and without trim. Bands use the noise-corrected covariance
/// when `N_eta >= 2`.
pub fn run_response_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let cells = config.cells()?;
    let basis = MultiIndexBasis::total_degree(config.problem.dim(), config.n0)?;
    let exact_coeffs = oracle::converged_coefficients(&config.problem, &basis)?;
    let exact_pc = PceSurrogate::from_coefficients(basis.clone(), exact_coeffs)?;
    let grid = response_grid(config.problem.dim(), config.points);

    let units = work_units(&cells, config.repetitions);
    let results: Vec<Result<[ResponseCurve; 2]>> = in_pool(config.workers, || {
        units
            .par_iter()
            .map(|&(g, r)| {
                let cell = cells[g];
                let data = training_data(&config.problem, cell, config.noise_free, config.master_seed, r, g)?;
                let full = nisp::fit_surrogate(&data, &basis)?;
                let trimmed = full.trim(nisp::trim_target(&data, &full)?);
                let corrected = cell.n_eta >= 2;
                Ok([
                    response_curve(&full, &exact_pc, &config.problem, &grid, corrected, cell, r)?,
                    response_curve(&trimmed, &exact_pc, &config.problem, &grid, corrected, cell, r)?,
                ])
            })
            .collect()
    })?;
    let mut responses = Vec::with_capacity(2 * units.len());
    for pair in results {
        responses.extend(pair?);
    }
    Ok(StudyReport {
        kind: StudyKind::Response,
        master_seed: config.master_seed,
        n0: config.n0,
        exact: exact_summary(&config.problem),
        records: Vec::new(),
        cells: Vec::new(),
        densities: Vec::new(),
        gsa: Vec::new(),
        gsa_summary: Vec::new(),
        responses,
    })
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n;
    let se = if v.len() > 1 {
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        f64::NAN
    };
    (m, se)
}

/// Sobol index distributions. `pc_bias` uses the untrimmed bias-corrected
/// surrogate, `pc_bias_trim` the trimmed one and `pc_mc21` raw squared
/// coefficients; `var_deconv` has no sensitivity counterpart and is skipped.
pub fn run_gsa_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let cells = config.cells()?;
    let d = config.problem.dim();
    let basis = MultiIndexBasis::total_degree(d, config.n0)?;
    let exact = exact_summary(&config.problem);
    let methods: Vec<Method> = config
        .methods
        .iter()
        .copied()
        .filter(|m| *m != Method::VarDeconv)
        .collect();

    let units = work_units(&cells, config.repetitions);
    let results: Vec<Result<Vec<GsaRecord>>> = in_pool(config.workers, || {
        units
            .par_iter()
            .map(|&(g, r)| {
                let cell = cells[g];
                let data = training_data(&config.problem, cell, config.noise_free, config.master_seed, r, g)?;
                let full = nisp::fit_surrogate(&data, &basis)?;
                methods
                    .iter()
                    .map(|&method| {
                        let indices = match method {
                            Method::PcMc21 => full.sobol_indices(false),
                            Method::PcBias => full.sobol_indices(true),
                            Method::PcBiasTrim => full.trim(nisp::trim_target(&data, &full)?).sobol_indices(true),
                            Method::VarDeconv => unreachable!(),
                        };
                        let (first, total) = match indices {
                            Ok(s) => (s.first, s.total),
                            Err(UqError::UndefinedSobol) => (vec![f64::NAN; d], vec![f64::NAN; d]),
                            Err(e) => return Err(e),
                        };
                        Ok(GsaRecord {
                            n_xi: cell.n_xi,
                            n_eta: cell.n_eta,
                            method,
                            repetition: r,
                            first,
                            total,
                        })
                    })
                    .collect()
            })
            .collect()
    })?;
    let mut by_unit = Vec::with_capacity(results.len());
    for r in results {
        by_unit.push(r?);
    }

    // canonical order: cell, method, repetition
    let mut gsa = Vec::with_capacity(by_unit.len() * methods.len());
    let mut gsa_summary = Vec::new();
    for (g, cell) in cells.iter().enumerate() {
        let unit = &by_unit[g * config.repetitions..(g + 1) * config.repetitions];
        for (mi, &method) in methods.iter().enumerate() {
            let recs: Vec<&GsaRecord> = unit.iter().map(|u| &u[mi]).collect();
            gsa.extend(recs.iter().map(|r| (*r).clone()));
            let defined: Vec<&GsaRecord> = recs.iter().copied().filter(|r| !r.first[0].is_nan()).collect();
            for i in 0..d {
                let first: Vec<f64> = defined.iter().map(|r| r.first[i]).collect();
                let total: Vec<f64> = defined.iter().map(|r| r.total[i]).collect();
                let (fm, fse) = mean_and_se(&first);
                let (tm, tse) = mean_and_se(&total);
                gsa_summary.push(GsaSummary {
                    n_xi: cell.n_xi,
                    n_eta: cell.n_eta,
                    method,
                    variable: i + 1,
                    first_mean: fm,
                    first_std_error: fse,
                    total_mean: tm,
                    total_std_error: tse,
                    exact_first: exact.sobol_first[i],
                    exact_total: exact.sobol_total[i],
                    undefined: recs.len() - defined.len(),
                });
            }
        }
    }
    Ok(StudyReport {
        kind: StudyKind::Gsa,
        master_seed: config.master_seed,
        n0: config.n0,
        exact,
        records: Vec::new(),
        cells: Vec::new(),
        densities: Vec::new(),
        gsa,
        gsa_summary,
        responses: Vec::new(),
    })
}

/// Dispatches on the configured study kind.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    match config.kind {
        StudyKind::Variance => run_variance_study(config),
        StudyKind::Response => run_response_study(config),
        StudyKind::Gsa => run_gsa_study(config),
    }
}
