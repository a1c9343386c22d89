//! Linearized ADMM kernel shared by every solver variant.
//!
//! One iteration is `y_step -> x_step -> dual_step`. The x-step uses the
//! proximal metric `G = rI - βηAᵀA`, which turns the linearized subproblem
//! into an explicit gradient-like update with no linear solve.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{prox_g, ConstraintSpec, ProblemInstance};

/// Penalty `β`, step `η` and metric scale `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmParams {
    pub beta: f64,
    pub eta: f64,
    pub r: f64,
}

impl AdmmParams {
    /// Uses the tight choice `r = βη‖AᵀA‖ + 1`, so that `ζ_min(G) = 1`.
    pub fn new(beta: f64, eta: f64, opnorm_ata: f64) -> Result<Self> {
        Self::with_r(beta, eta, beta * eta * opnorm_ata + 1.0, opnorm_ata)
    }

    pub fn with_r(beta: f64, eta: f64, r: f64, opnorm_ata: f64) -> Result<Self> {
        if !(beta > 0.0 && eta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "beta and eta must be positive (beta={beta}, eta={eta})"
            )));
        }
        let floor = beta * eta * opnorm_ata + 1.0;
        // ‖AᵀA‖ comes from power iteration; allow its relative tolerance.
        if !(r >= floor * (1.0 - 1e-9)) {
            return Err(Error::InvalidInput(format!(
                "r={r} violates r >= beta*eta*||A^T A|| + 1 = {floor}"
            )));
        }
        Ok(Self { beta, eta, r })
    }

    /// Extreme eigenvalues `(ζ_min, ζ_max)` of `G` given the spectrum of `AᵀA`.
    pub fn metric_bounds(&self, varsigma_a: f64, opnorm_ata: f64) -> (f64, f64) {
        let s = self.beta * self.eta;
        (self.r - s * opnorm_ata, self.r - s * varsigma_a)
    }

    /// `(G/η) u = (r/η) u - β Aᵀ A u`.
    pub fn apply_metric_over_eta(&self, a: &nalgebra::DMatrix<f64>, u: &DVector<f64>) -> DVector<f64> {
        u * (self.r / self.eta) - a.tr_mul(&(a * u)) * self.beta
    }
}

/// Primal/dual iterate plus the bookkeeping every driver carries.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub lambda: DVector<f64>,
    pub x_prev: DVector<f64>,
    pub oracle_calls: u64,
    pub k: usize,
}

impl SolverState {
    /// `x₀ = x₋₁ = 0`, `y₀ = Ax₀ - c` (feasible for `B = -I`), `λ₀ = 0`.
    pub fn initial(p: &ProblemInstance) -> Self {
        let x = DVector::zeros(p.d1());
        let y = if p.constraint.b_is_neg_identity() {
            &p.constraint.a * &x - &p.constraint.c
        } else {
            DVector::zeros(p.constraint.d2())
        };
        Self {
            x_prev: x.clone(),
            x,
            y,
            lambda: DVector::zeros(p.constraint.m()),
            oracle_calls: 0,
            k: 0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).chain(self.lambda.iter()).all(|v| v.is_finite())
    }
}

/// Squared components of `dist(0, ∂L(w))²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    /// `‖∇f(x) - Aᵀλ‖²`
    pub grad_dual_residual: f64,
    /// `dist(Bᵀλ, ∂g(y))²`
    pub subgrad_residual: f64,
    /// `‖Ax + By - c‖²`
    pub constraint_residual: f64,
    pub total: f64,
}

/// Augmented Lagrangian `f(x) + g(y) - λᵀ(Ax+By-c) + (β/2)‖Ax+By-c‖²` with a
/// caller-supplied `f(x)`.
pub fn alf_eval(
    p: &ProblemInstance,
    params: &AdmmParams,
    w: &SolverState,
    full_f_value: f64,
) -> f64 {
    let res = p.constraint.residual(&w.x, &w.y);
    full_f_value + p.g.value(&w.y) - w.lambda.dot(&res) + 0.5 * params.beta * res.norm_squared()
}

/// Exact minimizer of `L_β(x, ·, λ)`; closed form for `B = -I`:
/// `prox_{g/β}(Ax - c - λ/β)`.
pub fn y_step(
    p: &ProblemInstance,
    params: &AdmmParams,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<DVector<f64>> {
    if !p.constraint.b_is_neg_identity() {
        return Err(Error::Unsupported(
            "closed-form y-step needs B = -I".into(),
        ));
    }
    let v = &p.constraint.a * x - &p.constraint.c - lambda / params.beta;
    Ok(prox_g(&v, 1.0 / params.beta, &p.g))
}

/// Minimizer of the linearized surrogate:
/// `x - (η/r)·[v - Aᵀλ + βAᵀ(Ax + By_new - c)]`.
pub fn x_step(
    p: &ProblemInstance,
    params: &AdmmParams,
    x: &DVector<f64>,
    y_new: &DVector<f64>,
    lambda: &DVector<f64>,
    v: &DVector<f64>,
) -> DVector<f64> {
    let res = p.constraint.residual(x, y_new);
    let a = &p.constraint.a;
    let dir = v - a.tr_mul(lambda) + a.tr_mul(&res) * params.beta;
    x - dir * (params.eta / params.r)
}

/// `λ - β(Ax_new + By_new - c)`.
pub fn dual_step(
    params: &AdmmParams,
    x_new: &DVector<f64>,
    y_new: &DVector<f64>,
    lambda: &DVector<f64>,
    constraint: &ConstraintSpec,
) -> DVector<f64> {
    lambda - constraint.residual(x_new, y_new) * params.beta
}

/// Stationarity of `w` using the full gradient of `f`. Only meaningful for
/// `B = -I` where `∂g` is the weighted-L1 subdifferential.
pub fn stationarity(p: &ProblemInstance, w: &SolverState) -> Result<StationarityReport> {
    stationarity_with_grad(p, w, &p.full_grad(&w.x))
}

/// As [`stationarity`] with a precomputed `∇f(x)`.
pub fn stationarity_with_grad(
    p: &ProblemInstance,
    w: &SolverState,
    grad: &DVector<f64>,
) -> Result<StationarityReport> {
    if !p.constraint.b_is_neg_identity() {
        return Err(Error::Unsupported(
            "stationarity needs B = -I".into(),
        ));
    }
    let a = &p.constraint.a;
    let grad_dual_residual = (grad - a.tr_mul(&w.lambda)).norm_squared();
    let l = p.g.weight;
    // Bᵀλ = -λ
    let subgrad_residual = w
        .y
        .iter()
        .zip(w.lambda.iter())
        .map(|(&yi, &li)| {
            let s = -li;
            if yi != 0.0 {
                (s - l * yi.signum()).powi(2)
            } else {
                (s.abs() - l).max(0.0).powi(2)
            }
        })
        .sum::<f64>();
    let constraint_residual = p.constraint.residual(&w.x, &w.y).norm_squared();
    Ok(StationarityReport {
        grad_dual_residual,
        subgrad_residual,
        constraint_residual,
        total: grad_dual_residual + subgrad_residual + constraint_residual,
    })
}
