mod common;

use common::*;
use nfcont_core::bifurcation::*;
use nfcont_core::continuation::*;
use nfcont_core::dynamics::*;
use nfcont_core::model_zoo::*;
use nfcont_core::sigmoid;
use nfcont_core::stationary::*;
use nfcont_core::*;
use rand::Rng;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Mutex;
use std::time::Instant;

type Outcome = std::result::Result<String, String>;

macro_rules! check {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Solution sets gathered by criteria 3-5 for the parity criterion.
static SETS: Mutex<Vec<(String, SolutionSet)>> = Mutex::new(Vec::new());

fn keep(label: &str, set: &SolutionSet) {
    SETS.lock().unwrap().push((label.to_string(), set.clone()));
}

fn ring_points() -> (f64, f64) {
    let (ss, sp, _) = ring_k_eigenvalues(&RingParams::default());
    (4.0 / sp, 4.0 / ss)
}

fn ac1() -> Outcome {
    let t = Instant::now();
    let m = ring(0.0, 0.0, 0.0);
    let cfg = ContinuationConfig::default();
    let b = trace(&m, Homotopy::new(0.0, 0.0, 0.0), &DVector::zeros(3), Param::Lambda, (0.0, 8.0), Direction::Increasing, &cfg)
        .map_err(|e| e.to_string())?;
    let found: Vec<f64> = detect_special(&m, &b, &cfg)
        .iter()
        .filter(|s| s.kind == SpecialKind::Branch)
        .map(|s| s.params.lambda)
        .collect();
    let (l3, l1) = ring_points();
    check!(found.len() == 2, "expected 2 branch points, found {found:?}");
    let d = (found[0] - l3).abs().max((found[1] - l1).abs());
    check!(d < 1e-6, "detected {found:?} vs predicted [{l3}, {l1}]");
    check!(l3 < l1, "cos-block point {l3} not below sin-axis point {l1}");
    let secs = t.elapsed().as_secs_f64();
    check!(secs < 10.0, "took {secs:.1}s");
    Ok(format!("branch points {:.9} {:.9}, max |dlambda| {d:.1e}, {secs:.2}s", found[0], found[1]))
}

fn ac2() -> Outcome {
    let mut got = Vec::new();
    for ((e0, e1), want) in [((-1.0, -1.0), 0), ((-1.0, 1.0), 2), ((1.0, -1.0), 1), ((1.0, 1.0), 3)] {
        let (_, m) = ring_with(|p| {
            p.j0 = e0;
            p.j1 = 1.5 * e1;
        });
        let n = candidates(&m).map_err(|e| e.to_string())?.pitchfork_count();
        check!(n == want, "(eps0, eps1) = ({e0}, {e1}): {n} pitchforks, table says {want}");
        got.push(n);
    }
    Ok(format!("pitchfork counts {got:?}"))
}

fn ac3() -> Outcome {
    let t = Instant::now();
    let (l3, l1) = ring_points();
    let mut rows = Vec::new();
    for (lam, want) in [(2.0, 1), (4.5, 1), (5.2, 3), (5.6, 3), (6.5, 5), (10.0, 5), (29.2, 5)] {
        let m = ring(lam, 0.0, 0.0);
        let set = enumerate(&m, &EnumerateOptions::for_dim(3, 0)).map_err(|e| e.to_string())?;
        keep(&format!("ring lambda={lam}"), &set);
        check!(set.len() == want, "lambda {lam}: {} solutions, expected {want}", set.len());
        for s in &set.solutions {
            let rec = classify(&m, &s.v).map_err(|e| e.to_string())?;
            let trivial = s.v.amax() < 1e-9;
            let on_p1 = !trivial && s.v[2].abs() > 1e-6;
            let ok = if trivial {
                (lam < l3) == (rec.unstable == 0)
            } else if on_p1 {
                lam > l1 && rec.unstable == 1
            } else {
                rec.unstable == 0
            };
            check!(ok, "lambda {lam}: state {:?} has {} unstable eigenvalues", s.v.as_slice(), rec.unstable);
        }
        rows.push(set.len());
    }
    let secs = t.elapsed().as_secs_f64();
    check!(secs < 60.0, "took {secs:.1}s");
    Ok(format!("counts {rows:?}, stability pattern ok, {secs:.2}s"))
}

fn ac4() -> Outcome {
    let p = RingParams { homotopy: Homotopy::new(0.0, 1.0, 0.0), ..Default::default() };
    let m = build_ring(&p).map_err(|e| e.to_string())?;
    let cfg = ContinuationConfig::default();
    let start = Homotopy::new(0.0, 1.0, 0.0);
    let v0 = m.lambda_zero_state(&start);
    let b = trace(&m, start, &v0, Param::Lambda, (0.0, 40.0), Direction::Increasing, &cfg).map_err(|e| e.to_string())?;
    let turns: Vec<f64> = detect_special(&m, &b, &cfg)
        .iter()
        .filter(|s| s.kind == SpecialKind::Turning)
        .map(|s| s.params.lambda)
        .collect();
    let mut parity = Vec::new();
    for lam in [15.0, 23.0, 32.0] {
        let set = enumerate(&m.with_params(Homotopy::new(lam, 1.0, 0.0)), &EnumerateOptions::for_dim(3, 0)).map_err(|e| e.to_string())?;
        keep(&format!("ring mu=1 lambda={lam}"), &set);
        parity.push(parity_audit(&set).passed);
    }
    check!(parity.iter().all(|&x| x), "parity audit failed: {parity:?}");
    // folds on branches only reachable through the homotopy, reported for diagnosis
    let sched = SweepSchedule { lambda_range: (0.0, 40.0), legs: vec![(Param::Mu, 1.0)], ..Default::default() };
    let levels = multiparameter_sweep(&build_ring(&RingParams::default()).unwrap(), &sched, &cfg);
    let mut swept: Vec<f64> = levels
        .last()
        .unwrap()
        .branches
        .iter()
        .flat_map(|b| b.special.iter().filter(|s| s.kind == SpecialKind::Turning).map(|s| s.params.lambda))
        .collect();
    swept.sort_by(f64::total_cmp);
    check!(
        turns.len() == 2 && (18.0..=22.0).contains(&turns[0]) && (24.0..=28.0).contains(&turns[1]),
        "turning points on the trivial-connected mu=1 branch over [0, 40]: {turns:?} (expected two, in [18,22] and [24,28]); \
         sweep branches at mu=1 turn at {swept:.3?}; parity ok"
    );
    Ok(format!("turning points {turns:?}, parity ok"))
}

fn ac5() -> Outcome {
    let p = RingParams { x0: 0.1, homotopy: Homotopy::new(29.2, 1.0, 0.1), ..Default::default() };
    let m = build_ring(&p).map_err(|e| e.to_string())?;
    let set = enumerate(&m, &EnumerateOptions::for_dim(3, 0)).map_err(|e| e.to_string())?;
    keep("ring operating point", &set);
    check!(set.len() == 5, "{} equilibria at the operating point", set.len());
    let worst = set.solutions.iter().map(|s| m.residual(&s.v).unwrap().norm()).fold(0.0, f64::max);
    check!(worst < 1e-8, "residual {worst:e}");

    let sched = SweepSchedule {
        lambda_range: (0.0, 30.0),
        legs: vec![(Param::Eps, 0.1), (Param::Mu, 1.0)],
        ..Default::default()
    };
    let levels = multiparameter_sweep(&m, &sched, &ContinuationConfig::default());
    let last = levels.last().unwrap();
    let disc = last.branches.iter().filter(|b| b.disconnected).count();
    check!(disc >= 1, "no disconnected branch at {:?}", last.params);
    Ok(format!("5 equilibria (max residual {worst:.1e}), {disc} disconnected branch(es) at mu=1 eps=0.1"))
}

fn ac6() -> Outcome {
    let mut checked = 0;
    for (label, set) in SETS.lock().unwrap().iter() {
        let rep = parity_audit(set);
        check!(set.all_regular(), "{label}: singular solution");
        check!(set.len() % 2 == 1 && rep.degree == 1, "{label}: {} solutions, degree {}", set.len(), rep.degree);
        checked += 1;
    }
    let mut r = rng(606);
    for i in 0..50u64 {
        let rank = 1 + (i as usize % 6);
        let m = random_model(6000 + i, rank, 20);
        let lam_first = candidates(&m)
            .ok()
            .and_then(|c| c.entries.iter().filter_map(|e| e.lambda).reduce(f64::min))
            .unwrap_or(10.0)
            .min(20.0);
        let lam = r.random_range(0.2..2.5) * lam_first;
        let m = m.with_params(Homotopy::new(lam, m.params.mu, m.params.eps));
        let set = enumerate(&m, &EnumerateOptions::for_dim(rank, i)).map_err(|e| e.to_string())?;
        let rep = parity_audit(&set);
        check!(set.all_regular(), "random model {i}: singular solution");
        check!(set.len() % 2 == 1 && rep.degree == 1, "random model {i} (N={rank}): {} solutions, degree {}", set.len(), rep.degree);
        checked += 1;
    }
    Ok(format!("{checked} solution sets odd with degree +1"))
}

fn ac7() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..20u64 {
        let rank = 1 + (i as usize % 6);
        let base = random_model(7000 + i, rank, 20);
        let b = base.bounds().map_err(|e| e.to_string())?;
        let lam = 0.9 * b.lambda_star;
        let m = base.with_params(Homotopy::new(lam, base.params.mu, base.params.eps));
        let (c, rad) = m.solution_box();
        let starts = shifted_halton(64, rank, i);
        let mut sols: Vec<DVector<f64>> = Vec::new();
        for s in &starts {
            let v0 = DVector::from_fn(rank, |k, _| c[k] + rad[k] * (2.0 * s[k] - 1.0) * 2.0);
            let res = newton(&m, &v0, 1e-12, 100).map_err(|e| format!("model {i}: newton failed: {e}"))?;
            sols.push(res.v);
        }
        let spread = sols.iter().map(|v| (v - &sols[0]).amax()).fold(0.0, f64::max);
        check!(spread < 1e-6, "model {i}: Newton starts reach distinct solutions ({spread:e})");
        let bound = lam * b.frobenius + 1e-3;
        let mut r = rng(i);
        let mut prev = random_state(&mut r, rank, 3.0);
        let mut cur = m.picard(&prev).unwrap();
        for _ in 0..15 {
            let next = m.picard(&cur).unwrap();
            let d0 = m.kernel.norm(&m.kernel.synthesize(&(&cur - &prev))).unwrap();
            let d1 = m.kernel.norm(&m.kernel.synthesize(&(&next - &cur))).unwrap();
            if d0 < 1e-13 {
                break;
            }
            check!(d1 / d0 <= bound, "model {i}: Picard ratio {} > {bound}", d1 / d0);
            worst = worst.max(d1 / d0 / bound);
            prev = cur;
            cur = next;
        }
    }
    Ok(format!("20 models unique under 64 starts, Picard ratio <= {:.3} of the bound", worst))
}

fn ac8() -> Outcome {
    let mut r = rng(808);
    let bad = (0..10_000)
        .filter(|_| !sigmoid::square_bound_check(r.random_range(-50.0..50.0), r.random_range(-50.0..50.0)))
        .count();
    check!(bad == 0, "square bound fails at {bad} points");

    let mut cases: Vec<FieldModel> = vec![ring(7.0, 0.0, 0.0), ring(29.2, 1.0, 0.1), ring(20.0, 1.0, 0.0)];
    cases.extend((0..10u64).map(|i| random_model(8000 + i, 1 + i as usize % 5, 20).with_params(Homotopy::new(3.0 + i as f64, 0.5, 0.5))));
    let mut count = 0;
    for m in &cases {
        let b = m.bounds().map_err(|e| e.to_string())?;
        let v0f = m.lambda_zero_field(&m.params);
        let set = enumerate(m, &EnumerateOptions::for_dim(m.dim(), 1)).map_err(|e| e.to_string())?;
        for s in &set.solutions {
            let vf = m.potential(&s.v);
            let n1 = m.kernel.norm(&vf).unwrap();
            let n2 = m.kernel.norm(&(&vf - &v0f)).unwrap();
            check!(n1 <= b.b1 && n2 <= b.b2, "|V| = {n1} (B1 {}), |V - V0| = {n2} (B2 {})", b.b1, b.b2);
            count += 1;
        }
    }

    let m = ring(10.0, 1.0, 0.1);
    let ball = absorbing_ball(&m).map_err(|e| e.to_string())?;
    let mut done = 0;
    while done < 20 {
        let v0 = random_state(&mut r, 3, 30.0);
        let tr = integrate(&m, &v0, None, 60.0, &IntegrateOptions::default()).map_err(|e| e.to_string())?;
        let n0 = field_norm(&m, &tr, 0).unwrap();
        if n0 <= ball.radius {
            continue;
        }
        let bound = (n0 * n0 - ball.radius * ball.radius) / (2.0 * ball.delta);
        let t = entry_time(&m, &tr, ball.radius).unwrap();
        check!(t.is_some_and(|t| t <= bound), "entry time {t:?} exceeds {bound}");
        done += 1;
    }
    Ok(format!("square bound on 1e4 points, {count} equilibria inside B1/B2, 20 entry times within bound"))
}

fn ac9() -> Outcome {
    let m = ring(29.2, 1.0, 0.1);
    let mut r = rng(909);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let v = random_state(&mut r, 3, 1.5);
        worst = worst.max(gradient_check(&m, &v, 1e-6).map_err(|e| e.to_string())?);
    }
    check!(worst < 1e-5, "gradient error {worst:e}");
    for k in 0..10 {
        let v = random_state(&mut r, 3, 1.5);
        let tr = integrate(&m, &v, None, 50.0, &IntegrateOptions::default()).map_err(|e| e.to_string())?;
        check!(energy_monotone(&m, &tr, 1e-9).unwrap(), "energy not monotone on trajectory {k}");
        let rec = detect_recurrence(&m, &tr, 1e-6, 1e-4).unwrap();
        check!(rec.is_none(), "recurrence {rec:?} on trajectory {k}");
    }
    Ok(format!("max |rhs - grad E| {worst:.1e}, 10 monotone trajectories, no recurrence"))
}

/// Candidate λ values of trivial-branch points that a branch passes through.
fn touched(branch: &Branch, lambdas: &[f64]) -> Vec<f64> {
    let scale = branch.samples.iter().map(|s| s.v.amax()).fold(0.0, f64::max);
    let mut out: Vec<f64> = Vec::new();
    for s in &branch.samples {
        if s.v.amax() > 1e-3 * scale.max(1e-12) {
            continue;
        }
        if let Some(&l) = lambdas.iter().find(|&&l| (l - s.params.lambda).abs() < 1e-3) {
            if !out.contains(&l) {
                out.push(l);
            }
        }
    }
    out
}

fn ac10() -> Outcome {
    let t = Instant::now();
    let p = TwoPopParams::default();
    let m = build_twopop(&p).map_err(|e| e.to_string())?;
    check!(m.dim() == 100, "state dimension {}", m.dim());
    let rep = candidates(&m).map_err(|e| e.to_string())?;
    let mut real: Vec<&BifurcationEntry> = rep.entries.iter().filter(|e| e.lambda.is_some() && e.simple).collect();
    real.sort_by(|a, b| a.lambda.unwrap().total_cmp(&b.lambda.unwrap()));
    check!(real.len() >= 3, "{} simple admissible candidates", real.len());
    let tol = 1e-8;
    check!(
        real[0].kind == CandidateKind::Transcritical && real[0].inner[0].abs() > tol,
        "first candidate at {:?} is {:?}",
        real[0].lambda,
        real[0].kind
    );
    for e in &real[1..3] {
        check!(
            e.kind == CandidateKind::Pitchfork && e.q == Some(3) && e.chi.is_some_and(|c| c != 0.0),
            "candidate at {:?} is {:?} (q {:?})",
            e.lambda,
            e.kind,
            e.q
        );
    }
    let summary = format!(
        "dim 100, transcritical at {:.4}, pitchforks at {:.4} {:.4}",
        real[0].lambda.unwrap(),
        real[1].lambda.unwrap(),
        real[2].lambda.unwrap()
    );

    let sched = SweepSchedule {
        lambda_range: (0.0, 3.0),
        legs: vec![(Param::Mu, 1.0), (Param::Mu, 0.0)],
        ..Default::default()
    };
    let levels = multiparameter_sweep(&m, &sched, &ContinuationConfig::default());
    let last = levels.last().unwrap();
    let trivial_points: Vec<f64> = last.branches[0]
        .special
        .iter()
        .filter(|s| s.kind == SpecialKind::Branch)
        .map(|s| s.params.lambda)
        .collect();
    let connecting = last.branches.iter().skip(1).any(|b| touched(b, &trivial_points).len() >= 2);
    let disc = last.branches.iter().filter(|b| b.disconnected).count();
    let secs = t.elapsed().as_secs_f64();
    check!(
        connecting && disc >= 1,
        "{summary}; sweep over lambda in [0, 3] with {} branches at mu=0: connecting branch {connecting}, disconnected branches {disc} ({secs:.0}s)",
        last.branches.len()
    );
    check!(secs < 600.0, "took {secs:.0}s");
    Ok(format!("{summary}; connecting branch and {disc} disconnected, {secs:.0}s"))
}

fn ac11() -> Outcome {
    let mut r = rng(1111);
    let mut worst = 0.0f64;
    for i in 0..50u64 {
        let m = match i % 5 {
            0 => ring(r.random_range(0.0..35.0), r.random_range(0.0..1.0), r.random_range(0.0..1.0)),
            _ => {
                let m = random_model(11_000 + i, 1 + i as usize % 6, 20);
                m.with_params(Homotopy::new(r.random_range(0.0..20.0), m.params.mu, m.params.eps))
            }
        };
        let v = random_state(&mut r, m.dim(), 1.0);
        worst = worst.max(jacobian_rel_err(&m, &v));
    }
    let tp = build_twopop(&TwoPopParams { nodes: 12, homotopy: Homotopy::new(1.0, 0.5, 0.0), ..Default::default() }).unwrap();
    let v = random_state(&mut r, tp.dim(), 0.05);
    worst = worst.max(jacobian_rel_err(&tp, &v));
    check!(worst < 1e-5, "relative error {worst:e}");
    Ok(format!("51 pairs, max relative error {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("AC1 ring bifurcation points", ac1),
        ("AC2 pitchfork table", ac2),
        ("AC3 ring solution counts", ac3),
        ("AC4 saddle-nodes at mu=1", ac4),
        ("AC5 operating point and disconnected branch", ac5),
        ("AC6 parity", ac6),
        ("AC7 uniqueness and contraction", ac7),
        ("AC8 bounds", ac8),
        ("AC9 ring gradient flow", ac9),
        ("AC10 two-population structure", ac10),
        ("AC11 jacobian check", ac11),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut err = std::io::stderr();
    for (name, f) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(msg) => writeln!(err, "PASS {name} [{secs:.1}s]: {msg}"),
            Err(msg) => {
                failed += 1;
                writeln!(err, "FAIL {name} [{secs:.1}s]: {msg}")
            }
        }
        .unwrap();
    }
    writeln!(err, "acceptance: {failed} failed").unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
