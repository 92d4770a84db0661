#![allow(dead_code)]

use nfcont_core::model_zoo::{build_ring, RingParams};
use nfcont_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn wave(r: &mut ChaCha8Rng) -> Expr {
    let amp = r.random_range(-1.0..1.0);
    let freq = r.random_range(0.0..3.0);
    let phase = r.random_range(-1.5..1.5);
    let arg = Expr::add(Expr::mul(Expr::c(freq), Expr::var(0)), Expr::c(phase));
    Expr::mul(Expr::c(amp), Expr::cos(arg))
}

/// Random single-population model on [-1, 1] with `rank` separable terms.
pub fn random_model(seed: u64, rank: usize, nodes: usize) -> FieldModel {
    let mut r = rng(seed);
    let grid = Arc::new(QuadratureGrid::build(1, nodes, &[(-1.0, 1.0)], 0.5).unwrap());
    let x: Vec<Vec<Expr>> = (0..rank).map(|_| vec![wave(&mut r)]).collect();
    let y: Vec<Vec<Expr>> = (0..rank).map(|_| vec![wave(&mut r)]).collect();
    let kernel = PGKernel::new(grid, 1, x, y).unwrap();
    let c = DVector::from_fn(rank, |_, _| r.random_range(-0.5..0.5));
    let input = kernel.synthesize(&c);
    let tau = r.random_range(0.5..2.0);
    let theta = r.random_range(-0.5..0.5);
    let mu = r.random_range(0.0..1.0);
    let eps = r.random_range(0.0..1.0);
    FieldModel::new(Arc::new(kernel), Nonlinearity::Logistic, vec![tau], input, vec![theta], Homotopy::new(1.0, mu, eps))
        .unwrap()
}

pub fn random_state(r: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| r.random_range(-scale..scale))
}

pub fn ring(lambda: f64, mu: f64, eps: f64) -> FieldModel {
    let p = RingParams { homotopy: Homotopy::new(lambda, mu, eps), ..Default::default() };
    build_ring(&p).unwrap()
}

pub fn ring_with(f: impl FnOnce(&mut RingParams)) -> (RingParams, FieldModel) {
    let mut p = RingParams::default();
    f(&mut p);
    let m = build_ring(&p).unwrap();
    (p, m)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
}

/// Central finite-difference Jacobian of the stationary residual.
pub fn fd_jacobian(model: &FieldModel, v: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let n = v.len();
    let mut j = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut a = v.clone();
        let mut b = v.clone();
        a[k] += h;
        b[k] -= h;
        let col = (model.residual(&a).unwrap() - model.residual(&b).unwrap()) / (2.0 * h);
        j.set_column(k, &col);
    }
    j
}

/// Largest entrywise error relative to the Jacobian scale.
pub fn jacobian_rel_err(model: &FieldModel, v: &DVector<f64>) -> f64 {
    let j = model.jacobian(v).unwrap();
    let fd = fd_jacobian(model, v, 1e-6);
    max_abs(&(&j - &fd)) / max_abs(&j).max(1.0)
}
