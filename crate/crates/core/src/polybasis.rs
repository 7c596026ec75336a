//! Legendre chaos basis on `[-1, 1]^d` under the uniform probability measure.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UqError};
use crate::transport::ParamSample;

/// Per-variable polynomial degrees of one basis term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(degrees: Vec<u32>) -> Self {
        MultiIndex(degrees)
    }

    pub fn zeros(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    pub fn degrees(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&n| n == 0)
    }

    /// Variables with a nonzero degree in this term.
    pub fn active_variables(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(i, _)| i)
    }

    /// `E[Psi^2] = prod_i 1 / (2 n_i + 1)` for the uniform density on `[-1, 1]^d`.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&n| 1.0 / (2 * n + 1) as f64).product()
    }

    /// Evaluates `prod_i P_{n_i}(x_i)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&n, &xi)| eval_legendre(n, xi))
            .product()
    }
}

/// Total-degree Legendre basis with graded-lexicographic ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisRecord", into = "BasisRecord")]
pub struct MultiIndexBasis {
    d: usize,
    n0: u32,
    indices: Vec<MultiIndex>,
    norms: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BasisRecord {
    d: usize,
    n0: u32,
    indices: Vec<MultiIndex>,
}

impl TryFrom<BasisRecord> for MultiIndexBasis {
    type Error = UqError;

    fn try_from(r: BasisRecord) -> Result<Self> {
        let basis = MultiIndexBasis::total_degree(r.d, r.n0)?;
        if basis.indices != r.indices {
            return Err(UqError::Config(format!(
                "multi-index list does not match the total-degree basis (d = {}, n0 = {})",
                r.d, r.n0
            )));
        }
        Ok(basis)
    }
}

impl From<MultiIndexBasis> for BasisRecord {
    fn from(b: MultiIndexBasis) -> Self {
        BasisRecord {
            d: b.d,
            n0: b.n0,
            indices: b.indices,
        }
    }
}

impl MultiIndexBasis {
    /// All multi-indices of total degree `<= n0`, grade by grade. Within a
    /// grade the ordering is lexicographic with the first variable's degree
    /// descending, so for `d = 2, n0 = 2` the order is
    /// `(0,0) (1,0) (0,1) (2,0) (1,1) (0,2)`.
    pub fn total_degree(d: usize, n0: u32) -> Result<Self> {
        if d == 0 {
            return Err(UqError::pre("basis dimension must be at least 1"));
        }
        let mut indices = Vec::new();
        for grade in 0..=n0 {
            let mut current = vec![0u32; d];
            push_grade(&mut indices, &mut current, 0, grade);
        }
        let norms = indices.iter().map(MultiIndex::norm).collect();
        Ok(MultiIndexBasis {
            d,
            n0,
            indices,
            norms,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn total_order(&self) -> u32 {
        self.n0
    }

    /// Number of terms, `P + 1`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// `Psi_k(xi)` for every term `k`.
    pub fn eval(&self, xi: &ParamSample) -> Result<Vec<f64>> {
        if xi.dim() != self.d {
            return Err(UqError::DimensionMismatch {
                expected: self.d,
                got: xi.dim(),
            });
        }
        Ok(self.eval_unchecked(xi.values()))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> Vec<f64> {
        // Tabulate P_0..P_n0 once per variable.
        let n = self.n0 as usize;
        let table: Vec<Vec<f64>> = x.iter().map(|&xi| legendre_table(n, xi)).collect();
        self.indices
            .iter()
            .map(|idx| {
                idx.degrees()
                    .iter()
                    .zip(&table)
                    .map(|(&deg, row)| row[deg as usize])
                    .product()
            })
            .collect()
    }
}

fn push_grade(out: &mut Vec<MultiIndex>, current: &mut [u32], pos: usize, remaining: u32) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(MultiIndex(current.to_vec()));
        current[pos] = 0;
        return;
    }
    for deg in (0..=remaining).rev() {
        current[pos] = deg;
        push_grade(out, current, pos + 1, remaining - deg);
    }
    current[pos] = 0;
}

/// Legendre polynomial `P_n(x)` by the three-term recurrence.
pub fn eval_legendre(n: u32, x: f64) -> f64 {
    let (mut p_prev, mut p) = (1.0, x);
    if n == 0 {
        return 1.0;
    }
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0) * x * p - k * p_prev) / (k + 1.0);
        p_prev = p;
        p = next;
    }
    p
}

/// `[P_0(x), ..., P_n(x)]`.
fn legendre_table(n: usize, x: f64) -> Vec<f64> {
    let mut t = Vec::with_capacity(n + 1);
    t.push(1.0);
    if n >= 1 {
        t.push(x);
    }
    for k in 1..n {
        let kf = k as f64;
        t.push(((2.0 * kf + 1.0) * x * t[k] - kf * t[k - 1]) / (kf + 1.0));
    }
    t
}

/// `E[P_n^2] = 1 / (2n + 1)` per factor.
pub fn basis_norm(index: &MultiIndex) -> f64 {
    index.norm()
}

/// Gauss-Legendre nodes with weights normalised to the uniform probability
/// density on `[-1, 1]` (weights sum to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn gauss_legendre_rule(n: usize) -> Result<GaussRule> {
    if n == 0 {
        return Err(UqError::pre("Gauss rule needs at least one node"));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess for the i-th largest root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-14 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        // Standard weight 2 / ((1 - x^2) P_n'(x)^2), halved for the probability density.
        let w = 1.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(GaussRule { nodes, weights })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let t = legendre_table(n, x);
    let p = t[n];
    let pm1 = if n >= 1 { t[n - 1] } else { 0.0 };
    let d = n as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

/// Tensor-product Gauss rule on `[-1, 1]^d`, iterated point by point.
pub struct TensorRule {
    rule: GaussRule,
    d: usize,
}

impl TensorRule {
    pub fn new(level: usize, d: usize) -> Result<Self> {
        Ok(TensorRule {
            rule: gauss_legendre_rule(level)?,
            d,
        })
    }

    pub fn len(&self) -> usize {
        self.rule.nodes.len().pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Calls `f(point, weight)` for every tensor node.
    pub fn for_each(&self, mut f: impl FnMut(&[f64], f64)) {
        let n = self.rule.nodes.len();
        let mut counter = vec![0usize; self.d];
        let mut point = vec![0.0; self.d];
        for _ in 0..self.len() {
            let mut w = 1.0;
            for (j, &c) in counter.iter().enumerate() {
                point[j] = self.rule.nodes[c];
                w *= self.rule.weights[c];
            }
            f(&point, w);
            for c in counter.iter_mut() {
                *c += 1;
                if *c < n {
                    break;
                }
                *c = 0;
            }
        }
    }
}
