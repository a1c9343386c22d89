//! Composite problems `min f(x) + g(y)  s.t.  Ax + By = c` with a finite-sum
//! smooth part and a weighted-L1 nonsmooth part.
//!
//! Two built-in models are provided: fused logistic regression (`A` is the
//! first-difference matrix) and graph-guided regularized lasso with a sigmoid
//! loss (`A = [G; I]`). Both use `B = -I` and `c = 0`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;

/// Exponent arguments are clamped to `[-EXP_CLAMP, EXP_CLAMP]` in gradients.
pub const EXP_CLAMP: f64 = 35.0;

pub const DEFAULT_CORR_THRESHOLD: f64 = 0.7;

/// Linear coupling `Ax + By = c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
    /// `λ_min(A^T A)`.
    pub varsigma_a: f64,
    /// `‖A^T A‖`, from power iteration.
    pub opnorm_ata: f64,
}

impl ConstraintSpec {
    /// Validates dimensions and full column rank of `A`.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        let m = a.nrows();
        if b.nrows() != m || c.len() != m {
            return Err(Error::Dimension(format!(
                "A has {m} rows, B has {}, c has {}",
                b.nrows(),
                c.len()
            )));
        }
        let (varsigma_a, _) = linalg::gram_extreme_eigenvalues(&a)?;
        let opnorm_ata = linalg::gram_opnorm(&a);
        Ok(Self {
            a,
            b,
            c,
            varsigma_a,
            opnorm_ata,
        })
    }

    /// `A x - y = 0`.
    pub fn split_identity(a: DMatrix<f64>) -> Result<Self> {
        let m = a.nrows();
        Self::new(a, -DMatrix::identity(m, m), DVector::zeros(m))
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn d1(&self) -> usize {
        self.a.ncols()
    }

    pub fn d2(&self) -> usize {
        self.b.ncols()
    }

    /// True when `B = -I`, the only shape the closed-form y-step handles.
    pub fn b_is_neg_identity(&self) -> bool {
        self.b.is_square()
            && self
                .b
                .iter()
                .enumerate()
                .all(|(k, &v)| {
                    let (i, j) = (k % self.b.nrows(), k / self.b.nrows());
                    v == if i == j { -1.0 } else { 0.0 }
                })
    }

    /// `Ax + By - c`.
    pub fn residual(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * y - &self.c
    }

    /// Writes `A.csv`, `B.csv` and `c.csv` into `dir`.
    pub fn save_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_matrix_csv(&dir.join("A.csv"), &self.a)?;
        write_matrix_csv(&dir.join("B.csv"), &self.b)?;
        let c = DMatrix::from_column_slice(self.c.len(), 1, self.c.as_slice());
        write_matrix_csv(&dir.join("c.csv"), &c)
    }

    /// Reads a constraint saved by [`ConstraintSpec::save_csv`].
    pub fn load_csv(dir: &Path) -> Result<Self> {
        let a = read_matrix_csv(&dir.join("A.csv"))?;
        let b = read_matrix_csv(&dir.join("B.csv"))?;
        let c = read_matrix_csv(&dir.join("c.csv"))?;
        if c.ncols() != 1 {
            return Err(Error::Dimension("c.csv must have one column".into()));
        }
        Self::new(a, b, DVector::from_column_slice(c.as_slice()))
    }
}

/// Dense matrix as headerless CSV, one row per line.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| format!("{v}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(Error::Parse {
                    line: line + 1,
                    msg: format!("expected {c} columns, found {}", rec.len()),
                })
            }
            _ => {}
        }
        for field in rec.iter() {
            values.push(field.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: line + 1,
                msg: format!("bad number '{field}'"),
            })?);
        }
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, cols.unwrap_or(0), &values))
}

/// Nonsmooth part `g(y) = weight·‖y‖₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonsmoothSpec {
    pub weight: f64,
}

impl NonsmoothSpec {
    pub fn weighted_l1(weight: f64) -> Result<Self> {
        if !(weight >= 0.0) {
            return Err(Error::InvalidInput(format!("L1 weight {weight} < 0")));
        }
        Ok(Self { weight })
    }

    pub fn value(&self, y: &DVector<f64>) -> f64 {
        self.weight * y.iter().map(|v| v.abs()).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `log(1 + exp(-b aᵀx))`
    Logistic,
    /// `1 / (1 + exp(b aᵀx))`
    Sigmoid,
}

impl Loss {
    /// Loss value at margin `z = b aᵀx`.
    pub fn value(self, z: f64) -> f64 {
        match self {
            // softplus(-z), stable for either sign
            Loss::Logistic => (-z).max(0.0) + (-z.abs()).exp().ln_1p(),
            Loss::Sigmoid => {
                if z > 0.0 {
                    let e = (-z).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + z.exp())
                }
            }
        }
    }

    /// Derivative of the loss with respect to the margin.
    pub fn dmargin(self, z: f64) -> f64 {
        let z = z.clamp(-EXP_CLAMP, EXP_CLAMP);
        match self {
            Loss::Logistic => -1.0 / (1.0 + z.exp()),
            Loss::Sigmoid => {
                let e = (-z.abs()).exp();
                -e / ((1.0 + e) * (1.0 + e))
            }
        }
    }

    /// Supremum of the second derivative in the margin.
    pub fn curvature_bound(self) -> f64 {
        match self {
            Loss::Logistic => 0.25,
            Loss::Sigmoid => 1.0 / (6.0 * 3f64.sqrt()),
        }
    }
}

/// A finite-sum composite problem instance.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub dataset: Dataset,
    pub loss: Loss,
    /// `ℓ2`, folded into every component `f_i`.
    pub ridge: f64,
    pub constraint: ConstraintSpec,
    pub g: NonsmoothSpec,
}

impl ProblemInstance {
    pub fn new(
        dataset: Dataset,
        loss: Loss,
        ridge: f64,
        constraint: ConstraintSpec,
        g: NonsmoothSpec,
    ) -> Result<Self> {
        if !(ridge >= 0.0) {
            return Err(Error::InvalidInput(format!("ridge {ridge} < 0")));
        }
        if constraint.d1() != dataset.d() {
            return Err(Error::Dimension(format!(
                "A has {} columns but data has {} features",
                constraint.d1(),
                dataset.d()
            )));
        }
        Ok(Self {
            dataset,
            loss,
            ridge,
            constraint,
            g,
        })
    }

    /// Same model on different samples (e.g. the held-out half).
    pub fn with_dataset(&self, dataset: Dataset) -> Result<Self> {
        Self::new(
            dataset,
            self.loss,
            self.ridge,
            self.constraint.clone(),
            self.g,
        )
    }

    pub fn n(&self) -> usize {
        self.dataset.n()
    }

    pub fn d1(&self) -> usize {
        self.constraint.d1()
    }

    #[inline]
    fn margin(&self, i: usize, x: &[f64]) -> f64 {
        let a = self.dataset.row(i);
        self.dataset.label(i) * a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>()
    }

    /// Adds `scale · (data part of ∇f_i(x))` into `out`; the ridge term is
    /// left to the caller.
    #[inline]
    pub(crate) fn accumulate_data_grad(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let b = self.dataset.label(i);
        let coef = scale * b * self.loss.dmargin(self.margin(i, x));
        for (o, a) in out.iter_mut().zip(self.dataset.row(i)) {
            *o += coef * a;
        }
    }

    /// `f_i(x)` including the ridge term.
    pub fn component_value(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.loss.value(self.margin(i, x.as_slice())) + 0.5 * self.ridge * x.norm_squared()
    }

    /// `∇f_i(x)`.
    pub fn grad_component(&self, i: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
        if i >= self.n() {
            return Err(Error::InvalidInput(format!(
                "component {i} out of range for n={}",
                self.n()
            )));
        }
        let mut g = x * self.ridge;
        self.accumulate_data_grad(i, x.as_slice(), 1.0, g.as_mut_slice());
        Ok(g)
    }

    /// `f(x) = (1/n) Σ f_i(x)`.
    pub fn smooth_value(&self, x: &DVector<f64>) -> f64 {
        let xs = x.as_slice();
        let sum: f64 = (0..self.n())
            .map(|i| self.loss.value(self.margin(i, xs)))
            .sum();
        sum / self.n() as f64 + 0.5 * self.ridge * x.norm_squared()
    }

    /// `∇f(x)`, summed in index order.
    pub fn full_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut acc = DVector::zeros(x.len());
        for i in 0..self.n() {
            self.accumulate_data_grad(i, x.as_slice(), 1.0, acc.as_mut_slice());
        }
        acc /= self.n() as f64;
        acc += x * self.ridge;
        acc
    }

    /// Composite objective of the unsplit problem, `f(x) + g(Ax - c)`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let y = &self.constraint.a * x - &self.constraint.c;
        self.smooth_value(x) + self.g.value(&y)
    }
}

/// Upper bidiagonal `d×d` matrix: ones on the diagonal, minus ones above it.
pub fn build_difference_matrix(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else if j == i + 1 {
            -1.0
        } else {
            0.0
        }
    })
}

/// Fused logistic regression: `min (1/n)Σ log(1+exp(-b aᵀx)) + ℓ‖y‖₁, Lx - y = 0`.
pub fn build_fused_logistic(data: Dataset, l: f64) -> Result<ProblemInstance> {
    let g = NonsmoothSpec::weighted_l1(l)?;
    let constraint = ConstraintSpec::split_identity(build_difference_matrix(data.d()))?;
    ProblemInstance::new(data, Loss::Logistic, 0.0, constraint, g)
}

/// Edge-incidence rows for feature pairs whose absolute Pearson correlation
/// is at least `threshold`. Constant features have no edges.
pub fn correlation_graph(data: &Dataset, threshold: f64) -> DMatrix<f64> {
    let (n, d) = (data.n(), data.d());
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(data.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for i in 0..n {
        for ((c, v), m) in centered.iter_mut().zip(data.row(i)).zip(&mean) {
            *c = v - m;
        }
        for p in 0..d {
            if centered[p] == 0.0 {
                continue;
            }
            for q in p..d {
                cov[(p, q)] += centered[p] * centered[q];
            }
        }
    }
    let mut edges = Vec::new();
    for p in 0..d {
        for q in (p + 1)..d {
            let denom = (cov[(p, p)] * cov[(q, q)]).sqrt();
            if denom > 0.0 && (cov[(p, q)] / denom).abs() >= threshold {
                edges.push((p, q));
            }
        }
    }
    let mut g = DMatrix::zeros(edges.len(), d);
    for (row, &(p, q)) in edges.iter().enumerate() {
        g[(row, p)] = 1.0;
        g[(row, q)] = -1.0;
    }
    g
}

/// Graph-guided regularized lasso with sigmoid loss:
/// `min (1/n)Σ (f_i(x) + ℓ2/2‖x‖²) + ℓ1‖y‖₁, Ax - y = 0` with `A = [G; I]`.
pub fn build_graph_guided(
    data: Dataset,
    l1: f64,
    l2: f64,
    corr_threshold: f64,
) -> Result<ProblemInstance> {
    if !(corr_threshold > 0.0 && corr_threshold <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "correlation threshold {corr_threshold} outside (0, 1]"
        )));
    }
    let g_rows = correlation_graph(&data, corr_threshold);
    let d = data.d();
    let a = DMatrix::from_fn(g_rows.nrows() + d, d, |i, j| {
        if i < g_rows.nrows() {
            g_rows[(i, j)]
        } else if i - g_rows.nrows() == j {
            1.0
        } else {
            0.0
        }
    });
    build_graph_guided_with(data, l1, l2, a)
}

/// Graph-guided model with an externally supplied `A`.
pub fn build_graph_guided_with(
    data: Dataset,
    l1: f64,
    l2: f64,
    a: DMatrix<f64>,
) -> Result<ProblemInstance> {
    let g = NonsmoothSpec::weighted_l1(l1)?;
    let constraint = ConstraintSpec::split_identity(a)?;
    ProblemInstance::new(data, Loss::Sigmoid, l2, constraint, g)
}

/// Proximal map of `t·g`: coordinate-wise soft threshold at `t·weight`.
pub fn prox_g(v: &DVector<f64>, t: f64, g: &NonsmoothSpec) -> DVector<f64> {
    let k = t * g.weight;
    v.map(|vi| soft_threshold(vi, k))
}

#[inline]
pub fn soft_threshold(v: f64, k: f64) -> f64 {
    if k == 0.0 {
        v
    } else {
        v.signum() * (v.abs() - k).max(0.0)
    }
}
