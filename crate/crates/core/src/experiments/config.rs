use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::costmodel::CostModel;
use crate::error::{Result, UqError};
use crate::transport::SlabProblem;

/// Variance estimators compared by the studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// `sum beta_k^2 b_k` with plain squared coefficients.
    PcMc21,
    /// Bias-corrected squared coefficients.
    PcBias,
    /// Bias-corrected and trimmed.
    PcBiasTrim,
    /// Variance deconvolution on the raw tallies.
    VarDeconv,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::PcMc21,
        Method::PcBias,
        Method::PcBiasTrim,
        Method::VarDeconv,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::PcMc21 => "pc_mc21",
            Method::PcBias => "pc_bias",
            Method::PcBiasTrim => "pc_bias_trim",
            Method::VarDeconv => "var_deconv",
        }
    }

    /// Whether the method can run with `n_eta` histories per sample.
    pub fn available(&self, n_eta: usize) -> bool {
        !matches!(self, Method::VarDeconv) || n_eta >= 2
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    #[default]
    Variance,
    Response,
    Gsa,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    #[serde(default)]
    d: Option<usize>,
    materials: SlabProblem,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PceSection {
    n0: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudySection {
    #[serde(default)]
    kind: StudyKind,
    #[serde(default)]
    n_xi_grid: Vec<usize>,
    n_eta_grid: Vec<usize>,
    #[serde(default = "default_repetitions")]
    repetitions: usize,
    methods: Vec<Method>,
    #[serde(default)]
    noise_free: bool,
    #[serde(default = "default_bins")]
    bins: usize,
    #[serde(default = "default_points")]
    points: usize,
}

fn default_repetitions() -> usize {
    200
}

fn default_bins() -> usize {
    40
}

fn default_points() -> usize {
    101
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    seed: u64,
    problem: ProblemSection,
    pce: PceSection,
    study: StudySection,
    #[serde(default)]
    cost: Option<CostModel>,
    #[serde(default)]
    outputs: Option<PathBuf>,
}

/// A validated study description.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub problem: SlabProblem,
    pub n0: u32,
    pub n_xi_grid: Vec<usize>,
    pub n_eta_grid: Vec<usize>,
    pub repetitions: usize,
    pub methods: Vec<Method>,
    pub cost: Option<CostModel>,
    pub master_seed: u64,
    /// Train on the exact transmittance instead of simulated tallies.
    pub noise_free: bool,
    pub bins: usize,
    /// Points of the `xi` grid for response curves.
    pub points: usize,
    pub outputs: Option<PathBuf>,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

/// One `(N_xi, N_eta)` grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub n_xi: usize,
    pub n_eta: usize,
}

impl StudyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| UqError::Config(e.to_string()))?;
        if let Some(d) = file.problem.d {
            if d != file.problem.materials.dim() {
                return Err(UqError::Config(format!(
                    "problem.d = {d} but {} materials are listed",
                    file.problem.materials.dim()
                )));
            }
        }
        let cfg = StudyConfig {
            kind: file.study.kind,
            problem: file.problem.materials,
            n0: file.pce.n0,
            n_xi_grid: file.study.n_xi_grid,
            n_eta_grid: file.study.n_eta_grid,
            repetitions: file.study.repetitions,
            methods: file.study.methods,
            cost: file.cost,
            master_seed: file.seed,
            noise_free: file.study.noise_free,
            bins: file.study.bins,
            points: file.study.points,
            outputs: file.outputs,
            workers: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UqError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Variance study on the given problem with every method enabled.
    pub fn variance_study(problem: SlabProblem, n0: u32, n_xi: Vec<usize>, n_eta: Vec<usize>, repetitions: usize, seed: u64) -> Self {
        StudyConfig {
            kind: StudyKind::Variance,
            problem,
            n0,
            n_xi_grid: n_xi,
            n_eta_grid: n_eta,
            repetitions,
            methods: Method::ALL.to_vec(),
            cost: None,
            master_seed: seed,
            noise_free: false,
            bins: default_bins(),
            points: default_points(),
            outputs: None,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(UqError::Config(m));
        if self.n_eta_grid.is_empty() {
            return err("study.n_eta_grid is empty".into());
        }
        if self.n_xi_grid.is_empty() && self.cost.is_none() {
            return err("study.n_xi_grid is empty and no cost budget is given".into());
        }
        if self.n_eta_grid.contains(&0) || self.n_xi_grid.contains(&0) {
            return err("grid entries must be positive".into());
        }
        if self.repetitions == 0 {
            return err("study.repetitions must be at least 1".into());
        }
        if self.methods.is_empty() {
            return err("study.methods is empty".into());
        }
        if self.bins == 0 {
            return err("study.bins must be at least 1".into());
        }
        if self.points < 2 && self.kind == StudyKind::Response {
            return err("study.points must be at least 2".into());
        }
        if let Some(c) = &self.cost {
            c.validate().map_err(|e| UqError::Config(e.to_string()))?;
        }
        if self.workers == Some(0) {
            return err("workers must be at least 1".into());
        }
        let needs_cov = self.kind != StudyKind::Variance
            || self.methods.iter().any(|m| matches!(m, Method::PcBias | Method::PcBiasTrim));
        let cells = self.cells()?;
        if needs_cov {
            if let Some(c) = cells.iter().find(|c| c.n_xi < 2) {
                return err(format!("N_xi = {} is too small for coefficient variances", c.n_xi));
            }
        }
        if self.kind == StudyKind::Gsa
            && !self.methods.iter().any(|m| matches!(m, Method::PcBias | Method::PcBiasTrim))
        {
            return err("GSA study needs pc_bias and/or pc_bias_trim".into());
        }
        Ok(())
    }

    /// Grid points in canonical order: `N_xi` major, `N_eta` minor. With a cost
    /// budget and no explicit `N_xi` grid, `N_xi` is the budget-exhausting
    /// count rounded down.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        if self.n_xi_grid.is_empty() {
            let cost = self
                .cost
                .as_ref()
                .ok_or_else(|| UqError::Config("no N_xi grid and no cost budget".into()))?;
            return self
                .n_eta_grid
                .iter()
                .map(|&n_eta| {
                    let n_xi = cost.samples_for_budget(n_eta as f64)?.floor() as usize;
                    if n_xi == 0 {
                        return Err(UqError::Config(format!(
                            "budget {} buys no sample at N_eta = {n_eta}",
                            cost.c_total
                        )));
                    }
                    Ok(Cell { n_xi, n_eta })
                })
                .collect();
        }
        Ok(self
            .n_xi_grid
            .iter()
            .flat_map(|&n_xi| self.n_eta_grid.iter().map(move |&n_eta| Cell { n_xi, n_eta }))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const D3: &str = r#"
seed = 7
[problem]
d = 3
materials = [ { lo = 0.01, hi = 0.59 }, { lo = 0.01, hi = 0.59 }, { lo = 0.01, hi = 0.59 } ]
[pce]
n0 = 4
[study]
n_xi_grid = [25, 2000]
n_eta_grid = [1, 2]
repetitions = 10
methods = ["pc_mc21", "pc_bias", "pc_bias_trim", "var_deconv"]
"#;

    #[test]
    fn parses_and_orders_cells() {
        let c = StudyConfig::from_toml_str(D3).unwrap();
        assert_eq!(c.problem.dim(), 3);
        assert_eq!(c.master_seed, 7);
        assert_eq!(c.kind, StudyKind::Variance);
        assert_eq!(c.bins, 40);
        let cells: Vec<(usize, usize)> = c.cells().unwrap().iter().map(|c| (c.n_xi, c.n_eta)).collect();
        assert_eq!(cells, vec![(25, 1), (25, 2), (2000, 1), (2000, 2)]);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad_d = D3.replace("d = 3", "d = 2");
        assert!(matches!(StudyConfig::from_toml_str(&bad_d), Err(UqError::Config(_))));
        let empty = D3.replace("n_eta_grid = [1, 2]", "n_eta_grid = []");
        assert!(StudyConfig::from_toml_str(&empty).is_err());
        let zero = D3.replace("repetitions = 10", "repetitions = 0");
        assert!(StudyConfig::from_toml_str(&zero).is_err());
        let method = D3.replace("\"var_deconv\"", "\"kriging\"");
        assert!(StudyConfig::from_toml_str(&method).is_err());
        let tiny = D3.replace("[25, 2000]", "[1, 2000]");
        assert!(StudyConfig::from_toml_str(&tiny).is_err());
        let neg = D3.replace("lo = 0.01, hi = 0.59 }, {", "sigma0 = 0.1, sigmaDelta = 0.2 }, {");
        assert!(StudyConfig::from_toml_str(&neg).is_err());
    }

    #[test]
    fn budget_driven_cells() {
        let text = D3
            .replace("n_xi_grid = [25, 2000]\n", "")
            .replace("n_eta_grid = [1, 2]", "n_eta_grid = [1, 2, 10, 50]")
            + "[cost]\ntotal = 2310.0\nxi = 5.0\neta = 1.0\n";
        let c = StudyConfig::from_toml_str(&text).unwrap();
        let n: Vec<usize> = c.cells().unwrap().iter().map(|c| c.n_xi).collect();
        assert_eq!(n, vec![385, 330, 154, 42]);
    }
}
