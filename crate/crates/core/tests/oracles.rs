mod common;

use common::*;
use nfcont_core::bifurcation::*;
use nfcont_core::continuation::*;
use nfcont_core::dynamics::*;
use nfcont_core::model_zoo::*;
use nfcont_core::quadrature::gauss_legendre;
use nfcont_core::sigmoid;
use nfcont_core::stationary::*;
use nfcont_core::*;
use std::f64::consts::PI;
use std::sync::Arc;

const ALPHA: f64 = 2.2;

fn cos2(a: f64) -> f64 {
    0.5 + (a * PI).sin() / (2.0 * a * PI)
}

fn sin2(a: f64) -> f64 {
    0.5 - (a * PI).sin() / (2.0 * a * PI)
}

fn cos1(a: f64) -> f64 {
    2.0 * (a * PI / 2.0).sin() / (a * PI)
}

/// Positive root of the 2x2 cos-block and the sin-axis value, from trace and determinant.
fn ring_sigmas(j0: f64, j1: f64, a: f64) -> (f64, f64, f64) {
    let r = j1.abs().sqrt();
    let e1 = j1.signum();
    let (k00, k01, k10, k11) = (j0, j0 * r * cos1(a), e1 * r * cos1(a), j1 * cos2(a));
    let tr = k00 + k11;
    let det = k00 * k11 - k01 * k10;
    let d = (tr * tr / 4.0 - det).sqrt();
    (j1 * sin2(a), tr / 2.0 + d, tr / 2.0 - d)
}

// sigmoid

#[test]
fn sigmoid_values() {
    assert_eq!(sigmoid::eval(0.0), 0.5);
    assert!((sigmoid::eval(1.7) - (1.0 - sigmoid::eval(-1.7))).abs() < 1e-15);
    assert!((sigmoid::eval(2.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
    assert_eq!(sigmoid::eval_shifted(0.0), 0.0);
    assert!((sigmoid::eval_shifted(-0.3) + sigmoid::eval_shifted(0.3)).abs() < 1e-16);
    assert!((sigmoid::eval_shifted(2.0) - 0.380_797_077_977_882_3).abs() < 1e-15);
}

#[test]
fn sigmoid_derivatives_at_zero() {
    assert_eq!(sigmoid::deriv(0.0, 1).unwrap(), 0.25);
    assert!(sigmoid::deriv(0.0, 2).unwrap().abs() < 1e-16);
    assert_eq!(sigmoid::deriv(0.0, 3).unwrap(), -0.125);
}

#[test]
fn square_bound_examples() {
    for lam in [-3.0, 0.0, 2.5, 40.0] {
        assert!(sigmoid::square_bound_check(0.0, lam));
    }
    assert!(sigmoid::square_bound_check(1.0, 1.0));
    let mut r = rng(11);
    for _ in 0..10_000 {
        use rand::Rng;
        let x = r.random_range(-50.0..50.0);
        let l = r.random_range(-50.0..50.0);
        assert!(sigmoid::square_bound_check(x, l), "x={x} lambda={l}");
    }
}

// quadrature

#[test]
fn two_point_rule() {
    let (t, w) = gauss_legendre(2);
    let s = 1.0 / 3f64.sqrt();
    assert!((t[0] + s).abs() < 1e-15 && (t[1] - s).abs() < 1e-15);
    assert!((w[0] - 1.0).abs() < 1e-15 && (w[1] - 1.0).abs() < 1e-15);
    let integral: f64 = t.iter().zip(&w).map(|(x, wi)| wi * x * x).sum();
    assert!((integral - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn ring_grid_inner_products() {
    let g = QuadratureGrid::build(1, 64, &[(-PI / 2.0, PI / 2.0)], 1.0 / PI).unwrap();
    let one = g.sample(|_| 1.0);
    assert!((g.inner(&one, &one).unwrap() - 1.0).abs() < 1e-14);
    let c = g.sample(|p| (ALPHA * p[0]).cos());
    let s = g.sample(|p| (ALPHA * p[0]).sin());
    assert!(g.inner(&c, &s).unwrap().abs() < 1e-12);
    let c2: Vec<f64> = c.iter().map(|x| x * x).collect();
    let s2: Vec<f64> = s.iter().map(|x| x * x).collect();
    assert!((g.inner(&one, &c2).unwrap() - cos2(ALPHA)).abs() < 1e-12);
    assert!((g.inner(&one, &s2).unwrap() - sin2(ALPHA)).abs() < 1e-12);
    assert!((cos2(ALPHA) - 0.54252).abs() < 1e-5);
    assert!((sin2(ALPHA) - 0.45748).abs() < 1e-5);
}

// pg_kernel

fn rank_one(x: &str, y: &str) -> PGKernel {
    let g = Arc::new(QuadratureGrid::build(1, 32, &[(-1.0, 1.0)], 1.0).unwrap());
    PGKernel::new(g, 1, vec![vec![Expr::parse(x).unwrap()]], vec![vec![Expr::parse(y).unwrap()]]).unwrap()
}

#[test]
fn apply_examples() {
    let m = ring(1.0, 0.0, 0.0);
    let k = &m.kernel;
    let zero = DVector::zeros(k.field_len());
    assert_eq!(k.apply(&zero).unwrap().amax(), 0.0);
    let s = DVector::from_vec(k.grid().sample(|p| (ALPHA * p[0]).sin()));
    let js = k.apply(&s).unwrap();
    let expect = &s * (1.5 * sin2(ALPHA));
    assert!((js - expect).amax() < 1e-12);

    // <Y, U> = 2 with Y = 1 on [-1, 1]: U = 1
    let k1 = rank_one("x^2 + 1", "1");
    let u = DVector::from_element(k1.field_len(), 1.0);
    let x = DVector::from_vec(k1.grid().sample(|p| p[0] * p[0] + 1.0));
    assert!((k1.apply(&u).unwrap() - x * 2.0).amax() < 1e-13);
}

#[test]
fn frobenius_examples() {
    let z = rank_one("0", "x");
    assert_eq!(z.sobolev_frobenius_norm(0).unwrap(), 0.0);
    // ||x^2+1|| = sqrt(56/15), ||x|| = sqrt(2/3) on [-1, 1]
    let k = rank_one("x^2 + 1", "x");
    let expect = (56.0f64 / 15.0 * 2.0 / 3.0).sqrt();
    assert!((k.sobolev_frobenius_norm(0).unwrap() - expect).abs() < 1e-12);

    let m = ring(1.0, 0.0, 0.0);
    let g = m.kernel.grid();
    let mut brute = 0.0;
    for (ri, wi) in g.nodes.iter().zip(&g.weights) {
        for (rj, wj) in g.nodes.iter().zip(&g.weights) {
            let j = -1.0 + 1.5 * (ALPHA * (ri[0] - rj[0])).cos();
            brute += wi * wj * j * j;
        }
    }
    assert!((m.kernel.sobolev_frobenius_norm(0).unwrap() - brute.sqrt()).abs() < 1e-12);
}

#[test]
fn ring_spectrum_matches_closed_form() {
    let m = ring(1.0, 0.0, 0.0);
    let (ss, sp, sm) = ring_sigmas(-1.0, 1.5, ALPHA);
    assert!((ss - 0.68621).abs() < 1e-5);
    assert!((sp - 0.807).abs() < 1e-3 && (sm + 0.993).abs() < 1e-3);
    let mut got: Vec<f64> = m.kernel.spectrum().eigenvalues().iter().map(|z| z.re).collect();
    got.sort_by(|a, b| b.total_cmp(a));
    let mut want = vec![ss, sp, sm];
    want.sort_by(|a, b| b.total_cmp(a));
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12, "{got:?} vs {want:?}");
    }
}

#[test]
fn diagonal_kernel_spectrum() {
    let g = Arc::new(QuadratureGrid::build(1, 16, &[(-1.0, 1.0)], 0.5).unwrap());
    let phis = ["1", "sqrt(3)*x", "sqrt(5)*(3*x^2 - 1)/2"];
    let sig = [0.7, -0.2, 1.9];
    let x: Vec<Vec<Expr>> = phis.iter().map(|s| vec![Expr::parse(s).unwrap()]).collect();
    let y: Vec<Vec<Expr>> = phis
        .iter()
        .zip(sig)
        .map(|(s, k)| vec![Expr::mul(Expr::c(k), Expr::parse(s).unwrap())])
        .collect();
    let k = PGKernel::new(g, 1, x, y).unwrap();
    let mut got: Vec<f64> = k.spectrum().eigenvalues().iter().map(|z| z.re).collect();
    got.sort_by(|a, b| a.total_cmp(b));
    assert!((got[0] + 0.2).abs() < 1e-12 && (got[1] - 0.7).abs() < 1e-12 && (got[2] - 1.9).abs() < 1e-12);
}

// model

#[test]
fn residual_examples() {
    let m = ring(0.0, 0.0, 0.0);
    assert_eq!(m.residual(&DVector::zeros(3)).unwrap().amax(), 0.0);

    // λ = 0, μ = 1: v = coordinates of J·(1/2)
    let m = ring(0.0, 1.0, 1.0);
    let r = 1.5f64.sqrt();
    let v = DVector::from_vec(vec![-0.5, 0.5 * r * cos1(ALPHA), 0.0]);
    assert!(m.residual(&v).unwrap().amax() < 1e-13);
}

#[test]
fn jacobian_examples() {
    let m = ring(0.0, 0.3, 0.7);
    let j = m.jacobian(&DVector::from_vec(vec![0.2, -0.1, 0.4])).unwrap();
    assert!((j - DMatrix::identity(3, 3)).amax() < 1e-15);

    let lam = 3.0;
    let m = ring(lam, 0.0, 0.0);
    let j = m.jacobian(&DVector::zeros(3)).unwrap();
    let k = ring_k(&RingParams::default());
    let km = DMatrix::from_fn(3, 3, |i, c| k[(i, c)]);
    let expect = DMatrix::identity(3, 3) - km * (lam / 4.0);
    assert!((j - expect).amax() < 1e-12);

    let mut r = rng(3);
    for s in 0..5 {
        let m = random_model(100 + s, 4, 20).with_params(Homotopy::new(2.0, 0.4, 0.6));
        let v = random_state(&mut r, 4, 1.0);
        assert!(jacobian_rel_err(&m, &v) < 1e-5);
    }
}

#[test]
fn bounds_examples() {
    let g = Arc::new(QuadratureGrid::build(1, 8, &[(-1.0, 1.0)], 0.5).unwrap());
    let k = PGKernel::new(g, 1, vec![vec![Expr::c(0.0)]], vec![vec![Expr::c(0.0)]]).unwrap();
    let m = FieldModel::new(Arc::new(k), Nonlinearity::Logistic, vec![1.0], DVector::zeros(8), vec![0.0], Homotopy::new(1.0, 0.0, 0.0))
        .unwrap();
    let b = m.bounds().unwrap();
    assert_eq!(b.b1, 0.0);
    assert_eq!(b.b2, 0.0);

    for s in 0..20 {
        let b = random_model(200 + s, 1 + (s as usize % 5), 20).bounds().unwrap();
        assert!(b.lambda_star <= b.lambda_l * (1.0 + 1e-12), "seed {s}: {b:?}");
    }
}

// stationary

#[test]
fn newton_examples() {
    let m = ring(0.0, 1.0, 1.0);
    let res = newton(&m, &DVector::zeros(3), 1e-12, 20).unwrap();
    let r = 1.5f64.sqrt();
    assert!((res.v[0] + 0.5).abs() < 1e-14);
    assert!((res.v[1] - 0.5 * r * cos1(ALPHA)).abs() < 1e-14);
    assert!(res.iterations <= 1);

    let again = newton(&m, &res.v, 1e-12, 20).unwrap();
    assert!(again.iterations <= 1);
    assert!((again.v - &res.v).amax() < 1e-14);

    let m = ring(4.0, 0.0, 0.0);
    let mut rr = rng(5);
    for _ in 0..20 {
        let v0 = random_state(&mut rr, 3, 0.5);
        if let Ok(res) = newton(&m, &v0, 1e-12, 60) {
            assert!(res.v.amax() < 1e-9, "{}", res.v);
        }
    }
}

#[test]
fn enumerate_counts_and_parity() {
    for (lam, count) in [(4.0, 1), (5.4, 3), (7.0, 5)] {
        let m = ring(lam, 0.0, 0.0);
        let set = enumerate(&m, &EnumerateOptions::for_dim(3, 1)).unwrap();
        assert_eq!(set.len(), count, "lambda {lam}");
        let rep = parity_audit(&set);
        assert!(rep.conclusive && rep.passed);
        assert_eq!(rep.degree, 1);
        let plus = rep.signs.iter().filter(|&&s| s == 1).count();
        assert_eq!(plus, count / 2 + 1);
    }
    let b = ring(1.0, 0.0, 0.0).bounds().unwrap();
    let m = ring(0.9 * b.lambda_star, 1.0, 1.0);
    assert_eq!(enumerate(&m, &EnumerateOptions::for_dim(3, 2)).unwrap().len(), 1);
}

// continuation

#[test]
fn trivial_ring_branch_stays_zero() {
    let m = ring(0.0, 0.0, 0.0);
    let cfg = ContinuationConfig::default();
    let b = trace(&m, Homotopy::new(0.0, 0.0, 0.0), &DVector::zeros(3), Param::Lambda, (0.0, 8.0), Direction::Increasing, &cfg).unwrap();
    assert!(b.samples.last().unwrap().params.lambda >= 8.0 - 1e-9);
    assert!(b.samples.iter().all(|s| s.v.amax() < 1e-12));
    assert!(b.samples.windows(2).all(|w| w[1].params.lambda > w[0].params.lambda));
}

#[test]
fn switching_at_ring_points() {
    let m = ring(0.0, 0.0, 0.0);
    let cfg = ContinuationConfig::default();
    let b = trace(&m, Homotopy::new(0.0, 0.0, 0.0), &DVector::zeros(3), Param::Lambda, (0.0, 8.0), Direction::Increasing, &cfg).unwrap();
    let sp = detect_special(&m, &b, &cfg);
    let bps: Vec<&SpecialPoint> = sp.iter().filter(|s| s.kind == SpecialKind::Branch).collect();
    assert_eq!(bps.len(), 2);
    let (ss, sp3, _) = ring_sigmas(-1.0, 1.5, ALPHA);
    let (l3, l1) = (4.0 / sp3, 4.0 / ss);
    assert!((bps[0].params.lambda - l3).abs() < 1e-6);
    assert!((bps[1].params.lambda - l1).abs() < 1e-6);

    for delta in [1e-3, 5e-4] {
        let s1 = switch_branch(&m, bps[1], delta, &cfg).unwrap();
        assert_eq!(s1.len(), 2);
        for s in &s1 {
            assert!(s.v[0].abs().max(s.v[1].abs()) < 1e-3 * s.v[2].abs(), "{}", s.v);
        }
        assert!(s1[0].v[2] * s1[1].v[2] < 0.0);
        let s3 = switch_branch(&m, bps[0], delta, &cfg).unwrap();
        assert_eq!(s3.len(), 2);
        for s in &s3 {
            assert!(s.v[2].abs() < 1e-10 && s.v.norm() > 0.0);
        }
    }

    // halving δ: both seeds trace to the same P₁ leg at λ = 6.5
    let leg = |delta: f64| {
        let seeds = switch_branch(&m, bps[1], delta, &cfg).unwrap();
        let s = seeds.iter().find(|s| s.v[2] > 0.0).unwrap();
        let b = trace_both(&m, s.params, &s.v, (0.0, 6.5), &cfg, Some(&s.direction)).unwrap();
        crossings(&m, &b, &[6.5], 1e-10).into_iter().map(|c| c.1).find(|v| v[2] > 0.0).unwrap()
    };
    assert!((leg(1e-3) - leg(5e-4)).amax() < 1e-8);
}

#[test]
fn sweep_below_lambda_star_single_branch() {
    let m = ring(0.0, 0.0, 0.0);
    let ls = m.bounds().unwrap().lambda_star;
    let sched = SweepSchedule { lambda_range: (0.0, 0.9 * ls), legs: vec![(Param::Mu, 1.0), (Param::Eps, 1.0)], ..Default::default() };
    let levels = multiparameter_sweep(&m, &sched, &ContinuationConfig::default());
    assert_eq!(levels.len(), 3);
    for lv in &levels {
        assert_eq!(lv.branches.len(), 1, "{:?}", lv.params);
        assert!(lv.branches[0].special.is_empty());
    }
}

// bifurcation

#[test]
fn ring_candidates() {
    let m = ring(1.0, 0.0, 0.0);
    let rep = candidates(&m).unwrap();
    let mut lams: Vec<f64> = rep.stationary().iter().filter_map(|e| e.lambda).collect();
    lams.sort_by(|a, b| a.total_cmp(b));
    assert_eq!(lams.len(), 2);
    let (ss, sp, _) = ring_sigmas(-1.0, 1.5, ALPHA);
    assert!((lams[0] - 4.0 / sp).abs() < 1e-10 && (lams[0] - 4.96).abs() < 0.01);
    assert!((lams[1] - 4.0 / ss).abs() < 1e-10 && (lams[1] - 5.83).abs() < 0.01);
    assert_eq!(rep.pitchfork_count(), 2);

    let (_, neg) = ring_with(|p| {
        p.j0 = -1.0;
        p.j1 = -1.5;
    });
    let rep = candidates(&neg).unwrap();
    assert!(rep.entries.iter().all(|e| e.lambda.is_none()));
}

#[test]
fn chi_examples() {
    let m = ring(1.0, 0.0, 0.0);
    let spec = m.kernel.spectrum();
    let (ss, _, _) = ring_sigmas(-1.0, 1.5, ALPHA);
    let p1 = spec.pairs.iter().find(|p| (p.sigma.re - ss).abs() < 1e-10).unwrap();
    assert!(chi(&m, p1, 2).is_err());
    let c3 = chi(&m, p1, 3).unwrap();
    assert!(c3 < 0.0);
    let e = candidates(&m).unwrap().entries.into_iter().find(|e| (e.sigma.re - ss).abs() < 1e-10).unwrap();
    assert_eq!(e.q, Some(3));
    assert_eq!(e.orientation, Some(Orientation::Supercritical));
}

#[test]
fn reduced_roots_examples() {
    // σs₁ = 1/4·0.8, χ = -0.5, λ_n = 5
    let (ss1, chi) = (0.2, -0.5);
    assert_eq!(reduced_roots(4.0, ss1, chi, 3, 0.0).unwrap(), vec![0.0]);
    let r = reduced_roots(6.0, ss1, chi, 3, 0.0).unwrap();
    let a = ((-1.0 + 6.0 * ss1) / -chi).sqrt();
    assert_eq!(r.len(), 3);
    let mut want = [-a, 0.0, a];
    want.sort_by(|x, y| x.total_cmp(y));
    for (x, y) in r.iter().zip(want) {
        assert!((x - y).abs() < 1e-12);
    }
    // broken pitchfork: one root below, three well above
    assert_eq!(reduced_roots(4.0, ss1, chi, 3, 0.01).unwrap().len(), 1);
    assert_eq!(reduced_roots(8.0, ss1, chi, 3, 0.01).unwrap().len(), 3);
    // quadratic: none or two
    let two = reduced_roots(6.0, ss1, 0.5, 2, -0.01).unwrap();
    assert_eq!(two.len(), 2);
    assert!(reduced_roots(5.0, ss1, 0.5, 2, 0.1).unwrap().is_empty());
}

#[test]
fn hopf_l1_examples() {
    let t = Nonlinearity::Logistic.taylor().unwrap();
    let h = hopf_l1(1.0, 1.0, 3.0, t).unwrap();
    assert!(h.degenerate);
    let z = hopf_l1(1.0, 0.0, 2.0, [1.0, 1.0, 1.0, 0.0]).unwrap();
    assert_eq!(z.value, 0.0);
    let s = Nonlinearity::ShiftedLogistic { shift: 1.0 }.taylor().unwrap();
    let f = hopf_l1(1.0, 1.0, 3.0, s).unwrap();
    assert!(f.value.is_finite() && !f.degenerate);
}

#[test]
fn pitchfork_persistence_examples() {
    let (ss, _, _) = ring_sigmas(-1.0, 1.5, ALPHA);
    let p = RingParams::default();
    let (a, b, l) = pitchfork_persistence(&p, 0.0).unwrap();
    assert!(a.abs() < 1e-12 && b.abs() < 1e-12 && (l - 4.0 / ss).abs() < 1e-9);
    let at = |mu: f64| pitchfork_persistence(&p, mu).unwrap();
    let (q05, q10) = (at(0.05), at(0.1));
    assert!((q05.2 - l).abs() < (q10.2 - l).abs() + 1e-12);
    assert!((q10.2 - l).abs() < 2.0);

    // the μ = 0.1 branch through that point has a detected branch point there
    let m = ring(0.0, 0.1, 0.0);
    let cfg = ContinuationConfig::default();
    let at = Homotopy::new(q10.2 - 0.05, 0.1, 0.0);
    let guess = DVector::from_vec(vec![q10.0, q10.1, 0.0]);
    let v0 = newton(&m.with_params(at), &guess, 1e-12, 30).unwrap().v;
    let br = trace_both(&m, at, &v0, (q10.2 - 1.0, q10.2 + 1.0), &cfg, None).unwrap();
    let sp = detect_special(&m, &br, &cfg);
    let near = sp.iter().filter(|s| s.kind == SpecialKind::Branch).map(|s| (s.params.lambda - q10.2).abs()).fold(f64::INFINITY, f64::min);
    assert!(near < 1e-6, "{sp:?}");
}

// dynamics

#[test]
fn equilibrium_is_fixed() {
    let m = ring(7.0, 0.0, 0.0);
    let set = enumerate(&m, &EnumerateOptions::for_dim(3, 1)).unwrap();
    // unstable states amplify rounding, so only the stable ones are held for 100τ
    for s in set.solutions.iter().filter(|s| s.unstable == 0) {
        let tr = integrate(&m, &s.v, None, 100.0, &IntegrateOptions::default()).unwrap();
        assert!((tr.last() - &s.v).amax() < 1e-8);
    }
}

#[test]
fn ring_stability_pattern() {
    let lab = |lam: f64| {
        let m = ring(lam, 0.0, 0.0);
        let set = enumerate(&m, &EnumerateOptions::for_dim(3, 1)).unwrap();
        set.solutions.iter().map(|s| (s.v.clone(), classify(&m, &s.v).unwrap())).collect::<Vec<_>>()
    };
    let below = lab(4.5);
    assert_eq!(below.len(), 1);
    assert_eq!(below[0].1.unstable, 0);
    for (v, rec) in lab(5.4) {
        if v.amax() < 1e-9 {
            assert!(rec.unstable > 0);
        } else {
            assert_eq!(rec.unstable, 0, "{v}");
        }
    }
    for (v, rec) in lab(7.0) {
        if v.amax() > 1e-9 && v[2].abs() > 1e-6 {
            assert_eq!(rec.unstable, 1, "{v}");
        }
    }
}

#[test]
fn ring_gradient_flow() {
    let m = ring(7.0, 1.0, 0.1);
    let mut r = rng(9);
    for _ in 0..20 {
        let v = random_state(&mut r, 3, 1.5);
        assert!(gradient_check(&m, &v, 1e-6).unwrap() < 1e-5);
    }
    for _ in 0..3 {
        let v = random_state(&mut r, 3, 1.5);
        let tr = integrate(&m, &v, None, 40.0, &IntegrateOptions::default()).unwrap();
        assert!(energy_monotone(&m, &tr, 1e-9).unwrap());
        assert!(detect_recurrence(&m, &tr, 1e-6, 1e-4).unwrap().is_none());
    }
}

// model_zoo

#[test]
fn ring_zoo_examples() {
    let p = RingParams::default();
    assert_eq!((p.j0, p.j1, p.alpha, p.theta), (-1.0, 1.5, 2.2, 0.1));
    assert_eq!(p.homotopy.lambda, 29.2);
    let flat = RingParams { beta: 0.0, x0: 0.3, ..Default::default() };
    let c = ring_input_coords(&flat);
    assert_eq!((c[1], c[2]), (0.0, 0.0));
    let sym = RingParams { x0: 0.0, ..Default::default() };
    assert_eq!(ring_input_coords(&sym)[2], 0.0);
    let k = ring_k(&p);
    assert_eq!((k[(0, 2)], k[(1, 2)], k[(2, 0)], k[(2, 1)]), (0.0, 0.0, 0.0, 0.0));
    assert!((k[(2, 2)] - 0.68621).abs() < 1e-5);
    assert!((4.0 / k[(2, 2)] - 5.829).abs() < 1e-3);

    let mut r = rng(4);
    let p = RingParams { x0: 0.1, homotopy: Homotopy::new(6.0, 0.7, 0.4), ..Default::default() };
    let m = build_ring(&p).unwrap();
    for _ in 0..10 {
        let v = random_state(&mut r, 3, 1.0);
        let want = ring_rhs_reference(&p, &[v[0], v[1], v[2]], 64);
        let got = m.residual(&v).unwrap();
        for i in 0..3 {
            assert!((got[i] + want[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn twopop_zoo_examples() {
    let p = TwoPopParams::default();
    let m = build_twopop(&p).unwrap();
    assert_eq!(m.dim(), 100);
    let k = &m.kernel;
    for &(r, rp) in &[([0.1, -0.3], [0.4, 0.2]), ([-0.5, 0.5], [0.0, 0.6]), ([0.0, 0.0], [0.2, -0.7])] {
        let e = k.eval(&r, &rp);
        for i in 0..2 {
            for j in 0..2 {
                let want = twopop_kernel_reference(&p, i, j, r, rp);
                assert!((e[(i, j)] - want).abs() < 1e-10 * want.abs().max(1.0), "{i}{j}");
            }
        }
        assert!((e[(0, 1)] + e[(1, 0)]).abs() < 1e-10 * e[(0, 1)].abs().max(1.0));
        assert!(e[(0, 1)] <= 0.0);
    }
    let p0 = TwoPopParams { taylor_order: 0, ..Default::default() };
    assert_eq!(build_twopop(&p0).unwrap().dim(), 4);

    for mode in twopop_fourier_predictions(&p, 2).unwrap() {
        assert!(mode.sin_moments.iter().all(|s| s.abs() < 1e-12));
    }
}
