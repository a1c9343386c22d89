//! Expectations over every possible mini-batch, compared with their
//! closed forms.
mod common;

use absadmm::estimator::{
    minibatch_grad, spider_grad, svrg_grad, EstimatorKind, EstimatorState, OracleTally,
};
use common::*;
use nalgebra::DVector;

fn max_abs(v: &DVector<f64>) -> f64 {
    v.amax()
}

#[test]
fn single_sample_minibatch_is_unbiased() {
    let p = ggrl(6, 4, 31, 0.1, 0.05);
    let x = random_vec(4, 1.0, &mut rng(1));
    let mut t = OracleTally::default();
    let mean = (0..6).map(|i| minibatch_grad(&p, &x, &[i], &mut t)).sum::<DVector<f64>>() / 6.0;
    assert!(max_abs(&(mean - full_grad_ref(&p, &x))) <= 1e-12);
    assert_eq!(t.solver_calls, 6);
}

#[test]
fn pair_minibatch_is_unbiased() {
    let p = flr(6, 4, 32, 0.1);
    let x = random_vec(4, 1.0, &mut rng(2));
    let mut t = OracleTally::default();
    let mut sum = DVector::zeros(4);
    let mut count = 0.0;
    for i in 0..6 {
        for j in i + 1..6 {
            sum += minibatch_grad(&p, &x, &[i, j], &mut t);
            count += 1.0;
        }
    }
    assert!(max_abs(&(sum / count - full_grad_ref(&p, &x))) <= 1e-12);
}

#[test]
fn svrg_estimator_is_unbiased_for_any_anchor() {
    let p = flr(6, 4, 33, 0.1);
    let mut r = rng(3);
    let x = random_vec(4, 1.0, &mut r);
    let snap = random_vec(4, 1.0, &mut r);
    // exact anchor: expectation is ∇f(x)
    let mut st = EstimatorState::new(EstimatorKind::Svrg);
    st.set_snapshot(snap.clone(), full_grad_ref(&p, &snap));
    let mut t = OracleTally::default();
    let mean = (0..6).map(|i| svrg_grad(&p, &x, &st, &[i], &mut t).unwrap()).sum::<DVector<f64>>() / 6.0;
    assert!(max_abs(&(mean - full_grad_ref(&p, &x))) <= 1e-12);
    assert_eq!(t.solver_calls, 12);

    // inexact anchor g: expectation is ∇f(x) - ∇f(x̃) + g
    let g = random_vec(4, 1.0, &mut r);
    st.set_snapshot(snap.clone(), g.clone());
    let mean = (0..6).map(|i| svrg_grad(&p, &x, &st, &[i], &mut t).unwrap()).sum::<DVector<f64>>() / 6.0;
    let expected = full_grad_ref(&p, &x) - full_grad_ref(&p, &snap) + g;
    assert!(max_abs(&(mean - expected)) <= 1e-12);
}

#[test]
fn spider_estimator_conditional_mean() {
    let p = ggrl(6, 4, 34, 0.1, 0.05);
    let mut r = rng(4);
    let prev = random_vec(4, 1.0, &mut r);
    let v_prev = random_vec(4, 1.0, &mut r);
    let x = random_vec(4, 1.0, &mut r);
    let mut t = OracleTally::default();
    let mut sum = DVector::zeros(4);
    for i in 0..6 {
        let mut st = EstimatorState::new(EstimatorKind::Spider);
        st.set_spider_anchor(prev.clone(), v_prev.clone());
        sum += spider_grad(&p, &x, &mut st, &[i], &mut t).unwrap();
    }
    let expected = full_grad_ref(&p, &x) - full_grad_ref(&p, &prev) + v_prev;
    assert!(max_abs(&(sum / 6.0 - expected)) <= 1e-12);
}
