//! Reference computations written independently of the library internals.
#![allow(dead_code)]

use absadmm::problem::{
    build_fused_logistic, build_graph_guided, ConstraintSpec, Loss, NonsmoothSpec, ProblemInstance,
};
use absadmm::{synthetic_classification, Dataset, SyntheticSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn gaussian_data(n: usize, d: usize, seed: u64) -> Dataset {
    synthetic_classification(&SyntheticSpec::gaussian(n, d), seed).unwrap()
}

pub fn flr(n: usize, d: usize, seed: u64, l: f64) -> ProblemInstance {
    build_fused_logistic(gaussian_data(n, d, seed), l).unwrap()
}

pub fn ggrl(n: usize, d: usize, seed: u64, l1: f64, l2: f64) -> ProblemInstance {
    build_graph_guided(gaussian_data(n, d, seed), l1, l2, 0.7).unwrap()
}

/// Smooth strongly convex instance: logistic + ridge, `A = I`, `g = 0`.
pub fn ridge_logistic(n: usize, d: usize, seed: u64, ridge: f64) -> ProblemInstance {
    let data = gaussian_data(n, d, seed);
    let c = ConstraintSpec::split_identity(DMatrix::identity(d, d)).unwrap();
    ProblemInstance::new(data, Loss::Logistic, ridge, c, NonsmoothSpec::weighted_l1(0.0).unwrap()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(d: usize, scale: f64, r: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(d, |_, _| r.gen_range(-scale..scale))
}

/// Loss value from the textbook formulas.
pub fn loss_ref(loss: Loss, z: f64) -> f64 {
    match loss {
        Loss::Logistic => (1.0 + (-z).exp()).ln(),
        Loss::Sigmoid => 1.0 / (1.0 + z.exp()),
    }
}

/// d/dz of `loss_ref`, by hand.
pub fn dloss_ref(loss: Loss, z: f64) -> f64 {
    match loss {
        Loss::Logistic => -1.0 / (1.0 + z.exp()),
        Loss::Sigmoid => -z.exp() / (1.0 + z.exp()).powi(2),
    }
}

fn margin(p: &ProblemInstance, i: usize, x: &DVector<f64>) -> f64 {
    let a = p.dataset.row(i);
    p.dataset.label(i) * a.iter().zip(x.iter()).map(|(u, v)| u * v).sum::<f64>()
}

pub fn component_value_ref(p: &ProblemInstance, i: usize, x: &DVector<f64>) -> f64 {
    loss_ref(p.loss, margin(p, i, x)) + 0.5 * p.ridge * x.dot(x)
}

pub fn component_grad_ref(p: &ProblemInstance, i: usize, x: &DVector<f64>) -> DVector<f64> {
    let a = DVector::from_column_slice(p.dataset.row(i));
    a * (p.dataset.label(i) * dloss_ref(p.loss, margin(p, i, x))) + x * p.ridge
}

pub fn full_grad_ref(p: &ProblemInstance, x: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    for i in 0..p.n() {
        g += component_grad_ref(p, i, x);
    }
    g / p.n() as f64
}

/// Central difference of `f_i` along every coordinate.
pub fn fd_component_grad(p: &ProblemInstance, i: usize, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |j, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        (component_value_ref(p, i, &xp) - component_value_ref(p, i, &xm)) / (2.0 * h)
    })
}

/// `argmin_u  k|u| + (1/2)(u - v)²` by scanning a grid of spacing `step`.
pub fn grid_prox_1d(v: f64, k: f64, step: f64) -> f64 {
    let lo = v.min(0.0) - 1e-3;
    let hi = v.max(0.0) + 1e-3;
    let steps = ((hi - lo) / step).ceil() as usize;
    let mut best = (f64::INFINITY, lo);
    for s in 0..=steps {
        let u = lo + s as f64 * step;
        let val = k * u.abs() + 0.5 * (u - v) * (u - v);
        if val < best.0 {
            best = (val, u);
        }
    }
    best.1
}

/// State of the reference linearized ADMM.
#[derive(Debug, Clone)]
pub struct RefIterate {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub lambda: DVector<f64>,
}

/// Deterministic full-gradient linearized ADMM for `B = -I`. The x-update
/// solves the surrogate's normal equations with an LU factorization instead
/// of using their diagonal structure.
pub fn reference_admm(p: &ProblemInstance, beta: f64, eta: f64, r: f64, iters: usize) -> Vec<RefIterate> {
    let a = &p.constraint.a;
    let c = &p.constraint.c;
    let d = p.d1();
    let ata = a.transpose() * a;
    let g_over_eta = (DMatrix::identity(d, d) * r - &ata * (beta * eta)) / eta;
    let lhs = &ata * beta + &g_over_eta;
    let lu = lhs.lu();
    let weight = p.g.weight;
    let mut it = RefIterate {
        x: DVector::zeros(d),
        y: a * DVector::zeros(d) - c,
        lambda: DVector::zeros(p.constraint.m()),
    };
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        // y = argmin weight‖y‖₁ + λᵀy + (β/2)‖y - (Ax - c)‖²
        let target = a * &it.x - c - &it.lambda / beta;
        let thr = weight / beta;
        let y = target.map(|t| {
            if t > thr {
                t - thr
            } else if t < -thr {
                t + thr
            } else {
                0.0
            }
        });
        let v = full_grad_ref(p, &it.x);
        // v - Aᵀλ + βAᵀ(Ax - y - c) + (G/η)(x - x_k) = 0
        let rhs = &g_over_eta * &it.x - v + a.transpose() * &it.lambda + a.transpose() * (&y + c) * beta;
        let x = lu.solve(&rhs).expect("surrogate system is positive definite");
        let lambda = &it.lambda - (a * &x - &y - c) * beta;
        it = RefIterate { x, y, lambda };
        out.push(it.clone());
    }
    out
}

/// Newton's method on a smooth strongly convex `f`, using the analytic
/// logistic Hessian.
pub fn newton_minimizer(p: &ProblemInstance) -> DVector<f64> {
    assert_eq!(p.loss, Loss::Logistic);
    let d = p.d1();
    let mut x = DVector::zeros(d);
    for _ in 0..100 {
        let g = full_grad_ref(p, &x);
        if g.norm() < 1e-15 {
            break;
        }
        let mut h = DMatrix::identity(d, d) * p.ridge;
        for i in 0..p.n() {
            let a = DVector::from_column_slice(p.dataset.row(i));
            let z = margin(p, i, &x);
            let s = 1.0 / (1.0 + (-z).exp());
            h += &a * a.transpose() * (s * (1.0 - s) / p.n() as f64);
        }
        let step = h.cholesky().expect("Hessian is positive definite").solve(&g);
        x -= step;
    }
    x
}
