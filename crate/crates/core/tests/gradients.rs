mod common;

use absadmm::problem::Loss;
use common::*;
use nalgebra::DVector;
use rand::Rng;

fn fd_relative_errors(loss: Loss, checks: usize, seed: u64) -> Vec<f64> {
    let p = match loss {
        Loss::Logistic => flr(50, 8, seed, 1e-3),
        Loss::Sigmoid => ggrl(50, 8, seed, 1e-3, 1e-2),
    };
    let mut r = rng(seed + 100);
    (0..checks)
        .map(|_| {
            let x = random_vec(p.d1(), 2.0, &mut r);
            let i = r.gen_range(0..p.n());
            let g = p.grad_component(i, &x).unwrap();
            let fd = fd_component_grad(&p, i, &x, 1e-6);
            (&g - &fd).norm() / g.norm().max(fd.norm()).max(1e-8)
        })
        .collect()
}

#[test]
fn logistic_gradient_matches_central_differences() {
    let worst = fd_relative_errors(Loss::Logistic, 100, 1).into_iter().fold(0.0, f64::max);
    assert!(worst <= 1e-5, "worst relative error {worst:e}");
}

#[test]
fn sigmoid_gradient_matches_central_differences() {
    let worst = fd_relative_errors(Loss::Sigmoid, 100, 2).into_iter().fold(0.0, f64::max);
    assert!(worst <= 1e-5, "worst relative error {worst:e}");
}

#[test]
fn component_and_full_gradients_match_hand_formulas() {
    for p in [flr(40, 6, 3, 1e-2), ggrl(40, 6, 4, 1e-2, 5e-2)] {
        let mut r = rng(9);
        for _ in 0..20 {
            let x = random_vec(p.d1(), 3.0, &mut r);
            let full = p.full_grad(&x);
            let reference = full_grad_ref(&p, &x);
            assert!((&full - &reference).amax() <= 1e-14 * (1.0 + reference.amax()));
            let i = r.gen_range(0..p.n());
            let gi = p.grad_component(i, &x).unwrap();
            assert!((gi - component_grad_ref(&p, i, &x)).amax() <= 1e-14);
        }
    }
}

#[test]
fn objective_matches_brute_force() {
    for p in [flr(30, 5, 5, 0.3), ggrl(30, 5, 6, 0.2, 0.1)] {
        let mut r = rng(11);
        for _ in 0..20 {
            let x = random_vec(p.d1(), 2.0, &mut r);
            let smooth: f64 = (0..p.n()).map(|i| component_value_ref(&p, i, &x)).sum::<f64>() / p.n() as f64;
            let ax: DVector<f64> = &p.constraint.a * &x - &p.constraint.c;
            let l1: f64 = ax.iter().map(|v| v.abs()).sum();
            let brute = smooth + p.g.weight * l1;
            assert!((p.objective(&x) - brute).abs() <= 1e-12 * (1.0 + brute.abs()));
        }
    }
}

#[test]
fn large_margins_stay_finite() {
    let p = flr(20, 4, 7, 1e-3);
    let x = DVector::from_element(4, 1e6);
    assert!(p.objective(&x).is_finite());
    assert!(p.full_grad(&x).iter().all(|v| v.is_finite()));
}
