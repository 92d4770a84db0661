//! Pseudo-arclength continuation in one of (λ, μ, ε), special point detection,
//! branch switching and the multi-parameter sweep.

use crate::error::{Error, Result};
use crate::model::{FieldModel, Homotopy, Linearization, Param};
use crate::stationary::{dynamics_eigenvalues, lex_cmp, newton};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct ContinuationConfig {
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    pub tol: f64,
    pub max_corrector: usize,
    /// Parameter tolerance of special point localization.
    pub locate_tol: f64,
    /// Compute the number of unstable eigenvalues at every sample.
    pub stability: bool,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            ds: 0.01,
            ds_min: 1e-5,
            ds_max: 0.1,
            max_steps: 20_000,
            tol: 1e-10,
            max_corrector: 8,
            locate_tol: 1e-8,
            stability: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchSample {
    pub params: Homotopy,
    pub v: DVector<f64>,
    /// Unit tangent in (v, p) space.
    pub tangent: DVector<f64>,
    /// Sign of `det(D_v F)`.
    pub det_sign: i8,
    /// Sign of the bordered determinant `det [D_v F, D_p F; tᵀ]`.
    pub bordered_sign: i8,
    pub unstable: Option<usize>,
}

impl BranchSample {
    pub fn point(&self, active: Param) -> DVector<f64> {
        let n = self.v.len();
        let mut y = DVector::zeros(n + 1);
        y.rows_mut(0, n).copy_from(&self.v);
        y[n] = self.params.get(active);
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BranchStatus {
    RangeExit,
    StepCap,
    Closed,
    Stalled(String),
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub id: usize,
    pub active: Param,
    pub provenance: String,
    pub samples: Vec<BranchSample>,
    pub status: BranchStatus,
    pub special: Vec<SpecialPoint>,
    /// Not connected to the component of the trivial branch at the same parameters.
    pub disconnected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecialKind {
    Turning,
    Branch,
    HopfCandidate,
}

impl SpecialKind {
    pub fn name(&self) -> &'static str {
        match self {
            SpecialKind::Turning => "turning",
            SpecialKind::Branch => "branch",
            SpecialKind::HopfCandidate => "hopf-candidate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecialPoint {
    pub kind: SpecialKind,
    pub params: Homotopy,
    pub v: DVector<f64>,
    pub active: Param,
    /// Test function values at the two ends of the final bracket.
    pub bracket: (f64, f64),
    /// Index of the sample starting the bracketing step.
    pub index: usize,
    /// Tangent at the special point.
    pub tangent: DVector<f64>,
}

impl SpecialPoint {
    /// `(v, p)` with the active parameter last.
    pub fn point(&self) -> DVector<f64> {
        let n = self.v.len();
        let mut y = DVector::zeros(n + 1);
        y.rows_mut(0, n).copy_from(&self.v);
        y[n] = self.params.get(self.active);
        y
    }
}

fn params_of(base: &Homotopy, active: Param, y: &DVector<f64>) -> Homotopy {
    base.with(active, y[y.len() - 1])
}

fn lin_at(model: &FieldModel, base: &Homotopy, active: Param, y: &DVector<f64>) -> Result<Linearization> {
    let n = y.len() - 1;
    let v = y.rows(0, n).into_owned();
    model.linearize_at(&v, &params_of(base, active, y))
}

fn full_jacobian(lin: &Linearization, active: Param) -> DMatrix<f64> {
    let n = lin.jacobian.nrows();
    let mut a = DMatrix::zeros(n, n + 1);
    a.view_mut((0, 0), (n, n)).copy_from(&lin.jacobian);
    a.set_column(n, &lin.dparams.column(active.index()));
    a
}

fn bordered(lin: &Linearization, active: Param, row: &DVector<f64>) -> DMatrix<f64> {
    let n = lin.jacobian.nrows();
    let mut a = DMatrix::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n + 1)).copy_from(&full_jacobian(lin, active));
    a.set_row(n, &row.transpose());
    a
}

/// Right singular vectors of `[D_v F, D_p F]` sorted by increasing singular value.
fn null_space(lin: &Linearization, active: Param) -> (Vec<f64>, Vec<DVector<f64>>) {
    let n = lin.jacobian.nrows();
    let mut a = DMatrix::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n + 1)).copy_from(&full_jacobian(lin, active));
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut idx: Vec<usize> = (0..n + 1).collect();
    idx.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let sv = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let vecs = idx.iter().map(|&i| vt.row(i).transpose()).collect();
    (sv, vecs)
}

fn tangent_from(lin: &Linearization, active: Param, prev: &DVector<f64>) -> Option<DVector<f64>> {
    let n = lin.jacobian.nrows();
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;
    let t = bordered(lin, active, prev).lu().solve(&rhs)?;
    let nrm = t.norm();
    (nrm.is_finite() && nrm > 0.0).then(|| t / nrm)
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Newton on `F(y) = 0`, `rowᵀ (y - anchor) = offset`.
fn correct(
    model: &FieldModel,
    base: &Homotopy,
    active: Param,
    y0: &DVector<f64>,
    row: &DVector<f64>,
    anchor: &DVector<f64>,
    offset: f64,
    tol: f64,
    max_iter: usize,
) -> Option<(DVector<f64>, usize)> {
    let n = y0.len() - 1;
    let mut y = y0.clone();
    for it in 0..=max_iter {
        let lin = lin_at(model, base, active, &y).ok()?;
        let mut g = DVector::zeros(n + 1);
        g.rows_mut(0, n).copy_from(&lin.residual);
        g[n] = row.dot(&(&y - anchor)) - offset;
        if lin.residual.norm() < tol && g[n].abs() < tol {
            return Some((y, it));
        }
        if it == max_iter {
            return None;
        }
        let dy = bordered(&lin, active, row).lu().solve(&g)?;
        y -= dy;
        if !y.iter().all(|x| x.is_finite()) {
            return None;
        }
    }
    None
}

impl<'a> Tracer<'a> {
    fn sample(&self, y: &DVector<f64>, tangent: DVector<f64>) -> Result<BranchSample> {
        let lin = lin_at(self.model, &self.base, self.active, y)?;
        let det_sign = sign(lin.jacobian.clone().lu().determinant());
        let bordered_sign = sign(bordered(&lin, self.active, &tangent).lu().determinant());
        let unstable = if self.cfg.stability {
            let ev = dynamics_eigenvalues(self.model, &lin.jacobian)?;
            Some(ev.iter().filter(|z| z.re > 1e-8).count())
        } else {
            None
        };
        let n = y.len() - 1;
        Ok(BranchSample {
            params: params_of(&self.base, self.active, y),
            v: y.rows(0, n).into_owned(),
            tangent,
            det_sign,
            bordered_sign,
            unstable,
        })
    }
}

struct Tracer<'a> {
    model: &'a FieldModel,
    base: Homotopy,
    active: Param,
    cfg: &'a ContinuationConfig,
}

/// Initial orientation of a trace.
#[derive(Debug, Clone)]
pub enum Direction {
    Increasing,
    Decreasing,
    Along(DVector<f64>),
}

/// Follows the solution curve through `(seed_params, seed_v)` in the active
/// parameter until it leaves `range`.
pub fn trace(
    model: &FieldModel,
    seed_params: Homotopy,
    seed_v: &DVector<f64>,
    active: Param,
    range: (f64, f64),
    direction: Direction,
    cfg: &ContinuationConfig,
) -> Result<Branch> {
    let (lo, hi) = range;
    if !(hi > lo) {
        return Err(Error::Invalid("empty continuation range".into()));
    }
    let pm = model.with_params(seed_params);
    let v0 = newton(&pm, seed_v, cfg.tol, 50)
        .map_err(|e| Error::Continuation(format!("seed does not converge: {e}")))?
        .v;
    let tr = Tracer { model, base: seed_params, active, cfg };
    let n = v0.len();
    let mut y = DVector::zeros(n + 1);
    y.rows_mut(0, n).copy_from(&v0);
    y[n] = seed_params.get(active);
    let lin = lin_at(model, &seed_params, active, &y)?;
    let (_, vecs) = null_space(&lin, active);
    let mut t = vecs[0].clone();
    let flip = match &direction {
        Direction::Increasing => t[n] < 0.0,
        Direction::Decreasing => t[n] > 0.0,
        Direction::Along(d) => t.dot(d) < 0.0,
    };
    if flip {
        t = -t;
    }
    if let Some(t2) = tangent_from(&lin, active, &t) {
        t = t2;
    }
    let mut samples = vec![tr.sample(&y, t.clone())?];
    let mut ds = cfg.ds.clamp(cfg.ds_min, cfg.ds_max);
    if matches!(direction, Direction::Along(_)) {
        // next to a branch point the parent branch is within reach of a full step
        ds = ds.min(1e-4).max(cfg.ds_min);
    }
    let mut status = BranchStatus::StepCap;
    let start = y.clone();
    for step in 0..cfg.max_steps {
        let mut accepted = None;
        while ds >= cfg.ds_min {
            let pred = &y + &t * ds;
            if let Some((yn, its)) = correct(model, &seed_params, active, &pred, &t, &pred, 0.0, cfg.tol, cfg.max_corrector) {
                let linn = lin_at(model, &seed_params, active, &yn)?;
                if let Some(tn) = tangent_from(&linn, active, &t) {
                    let gap = (&yn - &y).norm();
                    if tn.dot(&t) > 0.5 && gap <= 2.0 * cfg.ds_max {
                        accepted = Some((yn, tn, its));
                        break;
                    }
                }
            }
            ds *= 0.5;
        }
        let Some((yn, tn, its)) = accepted else {
            status = BranchStatus::Stalled(format!("corrector failed with ds < {}", cfg.ds_min));
            break;
        };
        let p = yn[n];
        if p < lo || p > hi {
            let bound = if p < lo { lo } else { hi };
            let frac = (bound - y[n]) / (p - y[n]);
            let guess = &y + (&yn - &y) * frac;
            let mut row = DVector::zeros(n + 1);
            row[n] = 1.0;
            let mut anchor = DVector::zeros(n + 1);
            anchor[n] = bound;
            if let Some((yb, _)) = correct(model, &seed_params, active, &guess, &row, &anchor, 0.0, cfg.tol, 20) {
                let lb = lin_at(model, &seed_params, active, &yb)?;
                let tb = tangent_from(&lb, active, &t).unwrap_or_else(|| t.clone());
                samples.push(tr.sample(&yb, tb)?);
            }
            status = BranchStatus::RangeExit;
            break;
        }
        y = yn;
        t = tn;
        samples.push(tr.sample(&y, t.clone())?);
        if step > 10 && (&y - &start).norm() < 0.5 * ds && t.dot(&samples[0].tangent) > 0.0 {
            status = BranchStatus::Closed;
            break;
        }
        if its > 5 {
            ds *= 0.5;
        } else if its <= 2 {
            ds *= 1.3;
        }
        ds = ds.clamp(cfg.ds_min, cfg.ds_max);
    }
    Ok(Branch {
        id: 0,
        active,
        provenance: "user".into(),
        samples,
        status,
        special: vec![],
        disconnected: false,
    })
}

/// Scans a branch for sign changes of the tangent's parameter component
/// (turning points) and of the bordered determinant (branch points), and
/// localizes each by bisection along the arclength.
pub fn detect_special(model: &FieldModel, branch: &Branch, cfg: &ContinuationConfig) -> Vec<SpecialPoint> {
    let mut out = Vec::new();
    let active = branch.active;
    let s = &branch.samples;
    if s.len() < 2 {
        return out;
    }
    let n = s[0].v.len();
    let base = s[0].params;
    for i in 0..s.len() - 1 {
        let (a, b) = (&s[i], &s[i + 1]);
        let turning = a.tangent[n] * b.tangent[n] < 0.0;
        let branch_pt = a.bordered_sign * b.bordered_sign < 0;
        if turning {
            if let Some(sp) = locate(model, &base, active, a, b, i, Test::Tangent, SpecialKind::Turning, cfg) {
                out.push(sp);
            }
        }
        if branch_pt {
            if let Some(sp) = locate(model, &base, active, a, b, i, Test::Bordered, SpecialKind::Branch, cfg) {
                out.push(sp);
            }
        }
        if let (Some(ua), Some(ub)) = (a.unstable, b.unstable) {
            if ua.abs_diff(ub) == 2 && a.det_sign == b.det_sign && !turning && !branch_pt {
                let mid = 0.5 * (ua + ub) as f64;
                if let Some(mut sp) = locate(model, &base, active, a, b, i, Test::Unstable(mid), SpecialKind::HopfCandidate, cfg) {
                    // A real double crossing is a degenerate branch point, not a Hopf point.
                    if !crossing_is_complex(model, &base, active, &sp) {
                        sp.kind = SpecialKind::Branch;
                    }
                    out.push(sp);
                }
            }
        }
    }
    out
}

fn crossing_is_complex(model: &FieldModel, base: &Homotopy, active: Param, sp: &SpecialPoint) -> bool {
    let y = sp.point();
    let Ok(lin) = lin_at(model, base, active, &y) else { return true };
    let Ok(ev) = dynamics_eigenvalues(model, &lin.jacobian) else { return true };
    ev.iter()
        .min_by(|x, y| x.re.abs().total_cmp(&y.re.abs()))
        .map(|z| z.im.abs() > 1e-6 * z.norm().max(1e-3))
        .unwrap_or(true)
}

#[derive(Debug, Clone, Copy)]
enum Test {
    Tangent,
    Bordered,
    /// Unstable count minus the given midpoint.
    Unstable(f64),
}

#[allow(clippy::too_many_arguments)]
fn locate(
    model: &FieldModel,
    base: &Homotopy,
    active: Param,
    a: &BranchSample,
    b: &BranchSample,
    index: usize,
    test_fn: Test,
    kind: SpecialKind,
    cfg: &ContinuationConfig,
) -> Option<SpecialPoint> {
    let n = a.v.len();
    let ya = a.point(active);
    let yb = b.point(active);
    let row = a.tangent.clone();
    let s_end = row.dot(&(&yb - &ya));
    let test = |y: &DVector<f64>| -> Option<(f64, DVector<f64>)> {
        let lin = lin_at(model, base, active, y).ok()?;
        let t = tangent_from(&lin, active, &row)?;
        let v = match test_fn {
            Test::Tangent => t[n],
            Test::Bordered => bordered(&lin, active, &row).lu().determinant(),
            Test::Unstable(mid) => {
                let ev = dynamics_eigenvalues(model, &lin.jacobian).ok()?;
                ev.iter().filter(|z| z.re > 1e-8).count() as f64 - mid
            }
        };
        Some((v, t))
    };
    let (mut fa, _) = test(&ya)?;
    let (fb, _) = test(&yb)?;
    if fa * fb > 0.0 {
        return None;
    }
    let (mut s_lo, mut s_hi) = (0.0, s_end);
    let (mut y_lo, mut y_hi) = (ya.clone(), yb.clone());
    let mut f_hi = fb;
    let mut best = (ya.clone(), a.tangent.clone());
    for _ in 0..80 {
        if (y_hi[n] - y_lo[n]).abs() < cfg.locate_tol && (s_hi - s_lo).abs() < 1e-6 {
            break;
        }
        if (s_hi - s_lo).abs() < 1e-14 {
            break;
        }
        let sm = 0.5 * (s_lo + s_hi);
        let frac = (sm - s_lo) / (s_hi - s_lo);
        let guess = &y_lo + (&y_hi - &y_lo) * frac;
        let (ym, _) = correct(model, base, active, &guess, &row, &ya, sm, cfg.tol, 20)?;
        let (fm, tm) = test(&ym)?;
        best = (ym.clone(), tm);
        if fm == 0.0 {
            y_lo = ym.clone();
            y_hi = ym;
            break;
        }
        if fa * fm < 0.0 {
            s_hi = sm;
            y_hi = ym;
            f_hi = fm;
        } else {
            s_lo = sm;
            y_lo = ym;
            fa = fm;
        }
    }
    let y = (&y_lo + &y_hi) * 0.5;
    let y = correct(model, base, active, &y, &row, &ya, row.dot(&(&y - &ya)), cfg.tol, 20)
        .map(|r| r.0)
        .unwrap_or(best.0);
    Some(SpecialPoint {
        kind,
        params: params_of(base, active, &y),
        v: y.rows(0, n).into_owned(),
        active,
        bracket: (fa, f_hi),
        index,
        tangent: best.1,
    })
}

#[derive(Debug, Clone)]
pub struct Seed {
    pub params: Homotopy,
    pub v: DVector<f64>,
    /// Direction in (v, p) pointing away from the branch point.
    pub direction: DVector<f64>,
}

/// Seeds on the branch crossing the one through `at`, one on each side.
pub fn switch_branch(model: &FieldModel, at: &SpecialPoint, delta: f64, cfg: &ContinuationConfig) -> Result<Vec<Seed>> {
    if at.kind != SpecialKind::Branch {
        return Err(Error::Invalid("branch switching needs a branch point".into()));
    }
    let active = at.active;
    let n = at.v.len();
    let mut y = DVector::zeros(n + 1);
    y.rows_mut(0, n).copy_from(&at.v);
    y[n] = at.params.get(active);
    let lin = lin_at(model, &at.params, active, &y)?;
    let sv = lin.jacobian.clone().singular_values();
    let mut svs: Vec<f64> = sv.iter().cloned().collect();
    svs.sort_by(|a, b| a.total_cmp(b));
    let smax = svs.last().copied().unwrap_or(1.0).max(1e-300);
    let small = |s: f64| s < 1e-4 * smax && s < 1e3 * svs[0].max(1e-14 * smax);
    if svs.len() > 2 && small(svs[2]) {
        return Err(Error::Degenerate(format!(
            "branch point at {}={} has a kernel of dimension > 2 (singular values {:.2e}, {:.2e}, {:.2e})",
            active.name(),
            y[n],
            svs[0],
            svs[1],
            svs[2]
        )));
    }
    if svs.len() > 1 && small(svs[1]) {
        return switch_double(model, at, &lin, &y, delta, cfg);
    }
    let (_, vecs) = null_space(&lin, active);
    let t_old = &at.tangent;
    let mut d = vecs[0].clone() - t_old * vecs[0].dot(t_old);
    if d.norm() < 0.5 {
        d = vecs[1].clone() - t_old * vecs[1].dot(t_old);
    }
    d /= d.norm();
    let mut out = Vec::new();
    for sgn in [1.0, -1.0] {
        let dir = &d * sgn;
        let guess = &y + &dir * delta;
        if let Some((ys, _)) = correct(model, &at.params, active, &guess, &dir, &y, delta, cfg.tol, 30) {
            out.push(Seed { params: params_of(&at.params, active, &ys), v: ys.rows(0, n).into_owned(), direction: dir });
        }
    }
    if out.is_empty() {
        return Err(Error::Continuation("branch switching corrector failed on both sides".into()));
    }
    Ok(out)
}

/// Two-dimensional kernel: seeds along a fan of directions in the null plane
/// of J, deduplicated. Symmetric double points shed several branches.
fn switch_double(
    model: &FieldModel,
    at: &SpecialPoint,
    lin: &Linearization,
    y: &DVector<f64>,
    delta: f64,
    cfg: &ContinuationConfig,
) -> Result<Vec<Seed>> {
    let n = at.v.len();
    let svd = lin.jacobian.clone().svd(false, true);
    let vt = svd.v_t.as_ref().ok_or_else(|| Error::Continuation("svd failed".into()))?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let phi = |k: usize| -> DVector<f64> {
        let mut d = DVector::zeros(n + 1);
        for j in 0..n {
            d[j] = vt[(idx[k], j)];
        }
        d
    };
    let (p1, p2) = (phi(0), phi(1));
    let mut out: Vec<Seed> = Vec::new();
    for k in 0..16 {
        let th = k as f64 * std::f64::consts::PI / 8.0;
        let dir = &p1 * th.cos() + &p2 * th.sin();
        let guess = y + &dir * delta;
        if let Some((ys, _)) = correct(model, &at.params, at.active, &guess, &dir, y, delta, cfg.tol, 30) {
            let v = ys.rows(0, n).into_owned();
            if out.iter().all(|s| (&s.v - &v).amax() > 0.1 * delta) {
                out.push(Seed { params: params_of(&at.params, at.active, &ys), v, direction: dir });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Continuation("branch switching at a double point found no seed".into()));
    }
    Ok(out)
}

/// Whether `(λ, v)` at the branch's fixed parameters lies on the branch.
pub fn on_branch(model: &FieldModel, branch: &Branch, lambda: f64, v: &DVector<f64>, tol: f64) -> bool {
    if branch.active != Param::Lambda || branch.samples.is_empty() {
        return false;
    }
    let base = branch.samples[0].params;
    let pm = model.with_params(base.with(Param::Lambda, lambda));
    let scale = 1.0 + v.amax();
    for w in branch.samples.windows(2) {
        let (l0, l1) = (w[0].params.lambda, w[1].params.lambda);
        if (w[0].v.clone() - v).amax() < tol && (l0 - lambda).abs() < tol {
            return true;
        }
        if (lambda - l0) * (lambda - l1) > 0.0 || l0 == l1 {
            continue;
        }
        let f = (lambda - l0) / (l1 - l0);
        let guess = &w[0].v + (&w[1].v - &w[0].v) * f;
        if (&guess - v).amax() > 0.05 * scale {
            continue;
        }
        if let Ok(r) = newton(&pm, &guess, 1e-11, 30) {
            if (r.v - v).amax() < tol.max(1e-7) {
                return true;
            }
        }
    }
    branch.samples.last().is_some_and(|s| (s.v.clone() - v).amax() < tol && (s.params.lambda - lambda).abs() < tol)
}

/// A full λ-trace through a point, both directions merged into one branch.
pub fn trace_both(
    model: &FieldModel,
    params: Homotopy,
    v: &DVector<f64>,
    range: (f64, f64),
    cfg: &ContinuationConfig,
    direction: Option<&DVector<f64>>,
) -> Result<Branch> {
    let (d_fwd, d_bwd) = match direction {
        Some(d) => (Direction::Along(d.clone()), Direction::Along(-d)),
        None => (Direction::Increasing, Direction::Decreasing),
    };
    let fwd = trace(model, params, v, Param::Lambda, range, d_fwd, cfg)?;
    if fwd.status == BranchStatus::Closed {
        return Ok(fwd);
    }
    let at_edge = (params.lambda - range.0).abs() < 1e-12 && direction.is_none();
    if at_edge {
        return Ok(fwd);
    }
    let bwd = trace(model, params, v, Param::Lambda, range, d_bwd, cfg)?;
    let mut samples: Vec<BranchSample> = bwd
        .samples
        .into_iter()
        .skip(1)
        .rev()
        .map(|mut s| {
            s.tangent = -s.tangent;
            s.bordered_sign = -s.bordered_sign;
            s
        })
        .collect();
    let status = match (&bwd.status, &fwd.status) {
        (BranchStatus::RangeExit, s) => s.clone(),
        (s, _) => s.clone(),
    };
    samples.extend(fwd.samples);
    Ok(Branch { id: 0, active: Param::Lambda, provenance: String::new(), samples, status, special: vec![], disconnected: false })
}

#[derive(Debug, Clone)]
pub struct SweepSchedule {
    pub lambda_range: (f64, f64),
    /// Starting (μ, ε); λ is ignored.
    pub start: Homotopy,
    /// Homotopy legs in order, each moving one of μ, ε to a target value.
    pub legs: Vec<(Param, f64)>,
    /// λ spacing of the homotopy seeds taken along each branch.
    pub seed_spacing: f64,
    /// Depth of recursive branch switching at each level.
    pub switch_depth: usize,
    pub switch_delta: f64,
}

impl Default for SweepSchedule {
    fn default() -> Self {
        SweepSchedule {
            lambda_range: (0.0, 40.0),
            start: Homotopy::new(0.0, 0.0, 0.0),
            legs: vec![(Param::Mu, 1.0)],
            seed_spacing: 0.5,
            switch_depth: 1,
            switch_delta: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepLevel {
    pub params: Homotopy,
    pub branches: Vec<Branch>,
    pub failures: Vec<String>,
}

/// λ-traces at fixed (μ, ε): the trivial-seeded branch, branches switched at
/// detected branch points, and branches through extra seeds not already covered.
pub fn level_family(
    model: &FieldModel,
    params: Homotopy,
    extra: &[(f64, DVector<f64>, String)],
    schedule: &SweepSchedule,
    cfg: &ContinuationConfig,
) -> SweepLevel {
    let range = schedule.lambda_range;
    let mut branches: Vec<Branch> = Vec::new();
    let mut failures = Vec::new();
    let p0 = params.with(Param::Lambda, range.0);
    let pm = model.with_params(p0);
    let v0 = if range.0 == 0.0 { pm.lambda_zero_state(&p0) } else {
        match newton(&pm, &pm.lambda_zero_state(&p0), cfg.tol, 100) {
            Ok(r) => r.v,
            Err(e) => {
                failures.push(format!("trivial seed: {e}"));
                return SweepLevel { params, branches, failures };
            }
        }
    };
    let mut queue: Vec<(usize, Homotopy, DVector<f64>, Option<DVector<f64>>, String, Option<usize>)> =
        vec![(0, p0, v0, None, "trivial".to_string(), None)];
    for (lam, v, prov) in extra {
        queue.push((0, params.with(Param::Lambda, *lam), v.clone(), None, prov.clone(), None));
    }
    let mut qi = 0;
    let mut parents: Vec<Option<usize>> = Vec::new();
    while qi < queue.len() {
        let (depth, p, v, dir, prov, parent) = queue[qi].clone();
        qi += 1;
        if branches.iter().any(|b| on_branch(model, b, p.lambda, &v, 1e-6)) {
            continue;
        }
        let res = if dir.is_none() && prov == "trivial" {
            trace(model, p, &v, Param::Lambda, range, Direction::Increasing, cfg)
        } else {
            trace_both(model, p, &v, range, cfg, dir.as_ref())
        };
        let mut br = match res {
            Ok(b) => b,
            Err(e) => {
                failures.push(format!("{prov}: {e}"));
                continue;
            }
        };
        if is_duplicate(model, &br, &branches) {
            continue;
        }
        br.special = detect_special(model, &br, cfg);
        br.provenance = prov.clone();
        br.id = branches.len();
        if depth < schedule.switch_depth {
            for sp in br.special.iter().filter(|s| s.kind == SpecialKind::Branch) {
                match switch_branch(model, sp, schedule.switch_delta, cfg) {
                    Ok(seeds) => {
                        for s in seeds {
                            let tag = format!("switch:{}@lambda={:.6}", br.id, sp.params.lambda);
                            queue.push((depth + 1, s.params, s.v, Some(s.direction), tag, Some(br.id)));
                        }
                    }
                    Err(e) => failures.push(format!("switch at lambda={}: {e}", sp.params.lambda)),
                }
            }
        }
        parents.push(parent);
        branches.push(br);
    }
    mark_components(model, &mut branches, &parents);
    SweepLevel { params, branches, failures }
}

/// Most of a few interior samples already lie on a known branch.
fn is_duplicate(model: &FieldModel, br: &Branch, known: &[Branch]) -> bool {
    let n = br.samples.len();
    if n == 0 {
        return false;
    }
    let picks = [n / 4, n / 2, (3 * n) / 4];
    known.iter().any(|k| {
        picks
            .iter()
            .filter(|&&i| {
                let s = &br.samples[i];
                on_branch(model, k, s.params.lambda, &s.v, 1e-6)
            })
            .count()
            >= 2
    })
}

fn mark_components(model: &FieldModel, branches: &mut [Branch], parents: &[Option<usize>]) {
    let n = branches.len();
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(c: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while c[r] != r {
            r = c[r];
        }
        c[i] = r;
        r
    }
    for (i, p) in parents.iter().enumerate() {
        if let Some(p) = p {
            let (a, b) = (find(&mut comp, i), find(&mut comp, *p));
            comp[a] = b;
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let hit = branches[i]
                .special
                .iter()
                .filter(|s| s.kind == SpecialKind::Branch)
                .any(|s| on_branch(model, &branches[j], s.params.lambda, &s.v, 1e-5));
            if hit {
                let (a, b) = (find(&mut comp, i), find(&mut comp, j));
                comp[a] = b;
            }
        }
    }
    if n == 0 {
        return;
    }
    let root = find(&mut comp, 0);
    let trivial_seeded = branches[0].provenance == "trivial";
    for i in 0..n {
        let c = find(&mut comp, i);
        branches[i].disconnected = trivial_seeded && c != root;
    }
}

/// Points of `branch` at the given λ values, refined by Newton.
pub fn crossings(model: &FieldModel, branch: &Branch, lambdas: &[f64], tol: f64) -> Vec<(f64, DVector<f64>)> {
    let mut out = Vec::new();
    let base = branch.samples.first().map(|s| s.params).unwrap_or(Homotopy::new(0.0, 0.0, 0.0));
    let last = branch.samples.len().saturating_sub(2);
    for (i, w) in branch.samples.windows(2).enumerate() {
        let (l0, l1) = (w[0].params.lambda, w[1].params.lambda);
        for &g in lambdas {
            let inside = l0 != l1 && (g - l0) * (g - l1) <= 0.0;
            // a crossing at a shared sample is counted once, in the earlier window
            if !inside || (g == l1 && i != last) {
                continue;
            }
            let f = (g - l0) / (l1 - l0);
            let guess = &w[0].v + (&w[1].v - &w[0].v) * f;
            let pm = model.with_params(base.with(Param::Lambda, g));
            if let Ok(r) = newton(&pm, &guess, tol, 30) {
                out.push((g, r.v));
            }
        }
    }
    out
}

/// Multi-parameter sweep: λ-families at each stage of the homotopy schedule,
/// linked by traces in μ or ε from a λ-grid of points on every branch.
pub fn multiparameter_sweep(model: &FieldModel, schedule: &SweepSchedule, cfg: &ContinuationConfig) -> Vec<SweepLevel> {
    let mut params = schedule.start;
    let mut levels = vec![level_family(model, params, &[], schedule, cfg)];
    let (lo, hi) = schedule.lambda_range;
    let mut grid = Vec::new();
    let mut g = (lo / schedule.seed_spacing).ceil() * schedule.seed_spacing;
    while g <= hi + 1e-12 {
        if g > lo {
            grid.push(g);
        }
        g += schedule.seed_spacing;
    }
    for &(p, target) in &schedule.legs {
        let prev = levels.last().expect("at least one level");
        let mut seeds: Vec<(f64, DVector<f64>)> = Vec::new();
        for br in &prev.branches {
            seeds.extend(crossings(model, br, &grid, cfg.tol));
        }
        let from = params.get(p);
        let range = if target >= from { (from, target) } else { (target, from) };
        let dir = if target >= from { Direction::Increasing } else { Direction::Decreasing };
        let results: Vec<Option<(f64, DVector<f64>)>> = seeds
            .par_iter()
            .map(|(lam, v)| {
                let sp = params.with(Param::Lambda, *lam);
                let br = trace(model, sp, v, p, range, dir.clone(), cfg).ok()?;
                let last = br.samples.last()?;
                ((last.params.get(p) - target).abs() < 1e-9 && br.status == BranchStatus::RangeExit)
                    .then(|| (*lam, last.v.clone()))
            })
            .collect();
        let mut ends: Vec<(f64, DVector<f64>)> = results.into_iter().flatten().collect();
        ends.sort_by(|a, b| a.0.total_cmp(&b.0).then(lex_cmp(&a.1, &b.1)));
        ends.dedup_by(|a, b| a.0 == b.0 && (&a.1 - &b.1).amax() < 1e-6);
        params = params.with(p, target);
        let extra: Vec<(f64, DVector<f64>, String)> = ends
            .into_iter()
            .map(|(l, v)| {
                let tag = format!("homotopy:{}={}@lambda={}", p.name(), target, l);
                (l, v, tag)
            })
            .collect();
        levels.push(level_family(model, params, &extra, schedule, cfg));
    }
    levels
}
