//! Stochastic gradient oracles with exact component-gradient accounting.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    WithReplacement,
    WithoutReplacement,
}

/// Component-gradient evaluation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleTally {
    /// Evaluations consumed by the algorithm itself.
    pub solver_calls: u64,
    /// Evaluations spent on reporting (stationarity, σ² estimation).
    pub eval_calls: u64,
}

/// Draws `size` indices from `[0, n)`.
///
/// Samples without replacement are returned sorted so the batch average is
/// reduced in index order; a full sample is then exactly `0..n`.
pub fn sample_indices<R: Rng + ?Sized>(
    n: usize,
    size: usize,
    mode: SampleMode,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if size == 0 || n == 0 {
        return Err(Error::InvalidInput(format!(
            "cannot sample {size} indices from [0, {n})"
        )));
    }
    match mode {
        SampleMode::WithReplacement => Ok((0..size).map(|_| rng.gen_range(0..n)).collect()),
        SampleMode::WithoutReplacement => {
            if size > n {
                return Err(Error::InvalidInput(format!(
                    "cannot sample {size} of {n} without replacement"
                )));
            }
            let mut idx = rand::seq::index::sample(rng, n, size).into_vec();
            idx.sort_unstable();
            Ok(idx)
        }
    }
}

/// `(1/|I|) Σ_{i∈I} ∇f_i(x)` in batch order.
pub fn minibatch_grad(
    p: &ProblemInstance,
    x: &DVector<f64>,
    batch: &[usize],
    tally: &mut OracleTally,
) -> DVector<f64> {
    assert!(!batch.is_empty(), "empty mini-batch");
    let mut acc = DVector::zeros(x.len());
    for &i in batch {
        p.accumulate_data_grad(i, x.as_slice(), 1.0, acc.as_mut_slice());
    }
    acc /= batch.len() as f64;
    acc += x * p.ridge;
    tally.solver_calls += batch.len() as u64;
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Minibatch,
    Svrg,
    Spider,
}

/// Anchors carried by the variance-reduced estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub kind: EstimatorKind,
    /// SVRG snapshot `x̃`.
    pub snapshot_x: Option<DVector<f64>>,
    /// SVRG `g^s`, or SPIDER `v_{k-1}`.
    pub anchor_grad: Option<DVector<f64>>,
    /// SPIDER `x_{k-1}`.
    pub prev_x: Option<DVector<f64>>,
}

impl EstimatorState {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            snapshot_x: None,
            anchor_grad: None,
            prev_x: None,
        }
    }

    /// Starts an SVRG epoch at snapshot `x̃` with anchor gradient `g`.
    pub fn set_snapshot(&mut self, snapshot: DVector<f64>, g: DVector<f64>) {
        self.snapshot_x = Some(snapshot);
        self.anchor_grad = Some(g);
    }

    /// Records a SPIDER refresh: `v` was computed at `x`.
    pub fn set_spider_anchor(&mut self, x: DVector<f64>, v: DVector<f64>) {
        self.prev_x = Some(x);
        self.anchor_grad = Some(v);
    }
}

fn batch_difference(
    p: &ProblemInstance,
    x: &DVector<f64>,
    other: &DVector<f64>,
    batch: &[usize],
    tally: &mut OracleTally,
) -> DVector<f64> {
    minibatch_grad(p, x, batch, tally) - minibatch_grad(p, other, batch, tally)
}

/// `∇f_I(x) - ∇f_I(x̃) + g^s`, the same batch for both terms.
pub fn svrg_grad(
    p: &ProblemInstance,
    x: &DVector<f64>,
    state: &EstimatorState,
    batch: &[usize],
    tally: &mut OracleTally,
) -> Result<DVector<f64>> {
    if state.kind != EstimatorKind::Svrg {
        return Err(Error::EstimatorState(format!(
            "svrg_grad on a {:?} estimator",
            state.kind
        )));
    }
    let (Some(snap), Some(g)) = (&state.snapshot_x, &state.anchor_grad) else {
        return Err(Error::EstimatorState("SVRG snapshot not set".into()));
    };
    Ok(batch_difference(p, x, snap, batch, tally) + g)
}

/// `∇f_I(x) - ∇f_I(x_{k-1}) + v_{k-1}`; afterwards the state holds `(x, v)`.
pub fn spider_grad(
    p: &ProblemInstance,
    x: &DVector<f64>,
    state: &mut EstimatorState,
    batch: &[usize],
    tally: &mut OracleTally,
) -> Result<DVector<f64>> {
    if state.kind != EstimatorKind::Spider {
        return Err(Error::EstimatorState(format!(
            "spider_grad on a {:?} estimator",
            state.kind
        )));
    }
    let (Some(prev), Some(v_prev)) = (&state.prev_x, &state.anchor_grad) else {
        return Err(Error::EstimatorState("SPIDER anchors not set".into()));
    };
    let v = batch_difference(p, x, prev, batch, tally) + v_prev;
    state.set_spider_anchor(x.clone(), v.clone());
    Ok(v)
}

/// Mean of `‖∇f_i(x₀) - ∇f(x₀)‖²` over `m` uniformly drawn components, or the
/// exact population value when `m >= n`. All gradient evaluations are
/// charged to `tally.eval_calls`.
pub fn estimate_sigma2<R: Rng + ?Sized>(
    p: &ProblemInstance,
    x0: &DVector<f64>,
    m: usize,
    rng: &mut R,
    tally: &mut OracleTally,
) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidInput(format!("sigma^2 estimate needs m >= 2, got {m}")));
    }
    let n = p.n();
    let full = p.full_grad(x0);
    let idx: Vec<usize> = if m >= n {
        (0..n).collect()
    } else {
        sample_indices(n, m, SampleMode::WithoutReplacement, rng)?
    };
    let sum: f64 = idx
        .iter()
        .map(|&i| {
            let mut gi = DVector::zeros(x0.len());
            p.accumulate_data_grad(i, x0.as_slice(), 1.0, gi.as_mut_slice());
            gi += x0 * p.ridge;
            (gi - &full).norm_squared()
        })
        .sum();
    tally.eval_calls += (n + idx.len()) as u64;
    Ok(sum / idx.len() as f64)
}
