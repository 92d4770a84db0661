//! Time integration of the reduced field equations and stability tools.
//!
//! The field is `V = Xv + W + U(t)` where `U` lies outside span{X_k} and
//! decays as `U(t) = e^{-t/τ} U(0)`; the coordinates obey
//! `v̇ = Λ(-v + Ywᵀ A(V))` with `Λ = diag(1/τ)`.

use crate::error::{Error, Result};
use crate::model::FieldModel;
use crate::stationary::dynamics_eigenvalues;
use nalgebra::{Complex, DVector};

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    pub atol: f64,
    pub rtol: f64,
    pub h0: f64,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { atol: 1e-9, rtol: 1e-7, h0: 1e-3, max_steps: 200_000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Right-hand side at each stored state, for Hermite dense output.
    pub rates: Vec<DVector<f64>>,
    /// Initial field component outside span{X_k}.
    pub orth0: Option<DVector<f64>>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// Cubic Hermite interpolant and its derivative at `t`.
    pub fn dense(&self, t: f64) -> Option<(DVector<f64>, DVector<f64>)> {
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 || i > self.times.len() {
            return None;
        }
        let i = i.min(self.times.len() - 1);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let h = t1 - t0;
        if h <= 0.0 {
            return None;
        }
        let s = (t - t0) / h;
        let (y0, y1, f0, f1) = (&self.states[i - 1], &self.states[i], &self.rates[i - 1], &self.rates[i]);
        let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
        let h10 = s * s * s - 2.0 * s * s + s;
        let h01 = -2.0 * s * s * s + 3.0 * s * s;
        let h11 = s * s * s - s * s;
        let y = y0 * h00 + f0 * (h * h10) + y1 * h01 + f1 * (h * h11);
        let d00 = (6.0 * s * s - 6.0 * s) / h;
        let d10 = 3.0 * s * s - 4.0 * s + 1.0;
        let d01 = (-6.0 * s * s + 6.0 * s) / h;
        let d11 = 3.0 * s * s - 2.0 * s;
        let dy = y0 * d00 + f0 * d10 + y1 * d01 + f1 * d11;
        Some((y, dy))
    }
}

/// Orthogonal component `U(t)` of a trajectory started from `orth0`.
pub fn orth_at(model: &FieldModel, orth0: &DVector<f64>, t: f64) -> DVector<f64> {
    let nn = model.kernel.grid().len();
    let mut u = orth0.clone();
    for (i, tau) in model.tau.iter().enumerate() {
        let f = (-t / tau).exp();
        u.rows_mut(i * nn, nn).scale_mut(f);
    }
    u
}

/// Splits a sampled field offset from `W` into (coordinates, orthogonal part).
pub fn split_field(model: &FieldModel, field: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let k = &model.kernel;
    let g = k.gram_x();
    let rhs = k.x_samples().tr_mul(&field.component_mul(k.field_weights()));
    let c = g
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Degenerate(format!("gram solve failed: {e}")))?;
    let rest = field - k.synthesize(&c);
    Ok((c, rest))
}

/// Right-hand side of the coordinate ODE at time `t`.
pub fn rhs(model: &FieldModel, v: &DVector<f64>, orth: Option<&DVector<f64>>) -> Result<DVector<f64>> {
    let rates = model.coordinate_rates()?;
    let r = match orth {
        None => model.residual(v)?,
        Some(u) => {
            let p = &model.params;
            let field = model.potential(v) + u;
            let s0 = model.nonlinearity.s0();
            let a = field.map(|z| model.nonlinearity.eval_shifted(p.lambda * z) + p.mu * s0);
            v - model.kernel.y_weighted().tr_mul(&a)
        }
    };
    Ok(-r.component_mul(&rates))
}

// Dormand-Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates up to `t_end`. On failure the partial trajectory is returned
/// alongside the error.
pub fn integrate_partial(
    model: &FieldModel,
    v0: &DVector<f64>,
    orth0: Option<&DVector<f64>>,
    t_end: f64,
    opts: &IntegrateOptions,
) -> (Trajectory, Option<Error>) {
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![v0.clone()],
        rates: vec![],
        orth0: orth0.cloned(),
        stats: IntegratorStats::default(),
    };
    if !(t_end > 0.0) {
        return (traj, Some(Error::Invalid("t_end must be positive".into())));
    }
    let f = |t: f64, v: &DVector<f64>, stats: &mut IntegratorStats| -> Result<DVector<f64>> {
        stats.evaluations += 1;
        match orth0 {
            None => rhs(model, v, None),
            Some(u0) => rhs(model, v, Some(&orth_at(model, u0, t))),
        }
    };
    let mut t = 0.0;
    let mut y = v0.clone();
    let mut k0 = match f(t, &y, &mut traj.stats) {
        Ok(k) => k,
        Err(e) => return (traj, Some(e)),
    };
    traj.rates.push(k0.clone());
    let mut h = opts.h0.min(t_end);
    let mut k: Vec<DVector<f64>> = vec![DVector::zeros(y.len()); 7];
    while t < t_end {
        if traj.stats.accepted + traj.stats.rejected >= opts.max_steps {
            return (traj, Some(Error::Integration { t, msg: "step budget exhausted".into() }));
        }
        if h < 1e-12 * t.abs().max(1.0) {
            return (traj, Some(Error::Integration { t, msg: format!("step size underflow (h = {h:.3e})") }));
        }
        let h_eff = h.min(t_end - t);
        k[0] = k0.clone();
        let mut failed = None;
        for s in 1..7 {
            let mut ys = y.clone();
            for j in 0..s {
                if A[s][j] != 0.0 {
                    ys.axpy(h_eff * A[s][j], &k[j], 1.0);
                }
            }
            match f(t + C[s] * h_eff, &ys, &mut traj.stats) {
                Ok(v) => k[s] = v,
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = failed {
            return (traj, Some(e));
        }
        let mut y_new = y.clone();
        for j in 0..6 {
            if A[6][j] != 0.0 {
                y_new.axpy(h_eff * A[6][j], &k[j], 1.0);
            }
        }
        let mut err = 0.0_f64;
        for i in 0..y.len() {
            let mut e = 0.0;
            for j in 0..7 {
                e += E[j] * k[j][i];
            }
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((h_eff * e).abs() / sc);
        }
        if !err.is_finite() {
            traj.stats.rejected += 1;
            h *= 0.2;
            continue;
        }
        if err <= 1.0 {
            t += h_eff;
            y = y_new;
            k0 = k[6].clone();
            traj.times.push(t);
            traj.states.push(y.clone());
            traj.rates.push(k0.clone());
            traj.stats.accepted += 1;
        } else {
            traj.stats.rejected += 1;
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = h_eff * fac;
    }
    (traj, None)
}

pub fn integrate(
    model: &FieldModel,
    v0: &DVector<f64>,
    orth0: Option<&DVector<f64>>,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    match integrate_partial(model, v0, orth0, t_end, opts) {
        (t, None) => Ok(t),
        (_, Some(e)) => Err(e),
    }
}

/// Largest mismatch between the Hermite interpolant's derivative and the
/// vector field at step midpoints.
pub fn collocation_defect(model: &FieldModel, traj: &Trajectory) -> Result<f64> {
    let mut worst = 0.0_f64;
    for w in traj.times.windows(2) {
        let tm = 0.5 * (w[0] + w[1]);
        let (y, dy) = traj.dense(tm).ok_or_else(|| Error::Invalid("dense output outside range".into()))?;
        let u = traj.orth0.as_ref().map(|u0| orth_at(model, u0, tm));
        let f = rhs(model, &y, u.as_ref())?;
        let scale = 1.0 + f.amax();
        worst = worst.max((f - dy).amax() / scale);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityLabel {
    StableNode,
    StableFocus,
    UnstableNode,
    UnstableFocus,
    Saddle,
    /// Some eigenvalue has `|Re| <= 1e-8`.
    Inconclusive,
}

impl StabilityLabel {
    pub fn name(&self) -> &'static str {
        match self {
            StabilityLabel::StableNode => "stable-node",
            StabilityLabel::StableFocus => "stable-focus",
            StabilityLabel::UnstableNode => "unstable-node",
            StabilityLabel::UnstableFocus => "unstable-focus",
            StabilityLabel::Saddle => "saddle",
            StabilityLabel::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StabilityRecord {
    pub eigenvalues: Vec<Complex<f64>>,
    pub unstable: usize,
    pub label: StabilityLabel,
}

pub fn classify(model: &FieldModel, v: &DVector<f64>) -> Result<StabilityRecord> {
    let lin = model.linearize_at(v, &model.params)?;
    let rn = lin.residual.norm();
    if !(rn < 1e-8) {
        return Err(Error::Invalid(format!("classify: |residual| = {rn:.3e} is not an equilibrium")));
    }
    let mut eigenvalues = dynamics_eigenvalues(model, &lin.jacobian)?;
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let unstable = eigenvalues.iter().filter(|z| z.re > 1e-8).count();
    let marginal = eigenvalues.iter().any(|z| z.re.abs() <= 1e-8);
    let complex = eigenvalues.iter().any(|z| z.im.abs() > 1e-10);
    let label = if marginal {
        StabilityLabel::Inconclusive
    } else if unstable == 0 {
        if complex { StabilityLabel::StableFocus } else { StabilityLabel::StableNode }
    } else if unstable == eigenvalues.len() {
        if complex { StabilityLabel::UnstableFocus } else { StabilityLabel::UnstableNode }
    } else {
        StabilityLabel::Saddle
    };
    Ok(StabilityRecord { eigenvalues, unstable, label })
}

/// Signs `ε_k` with `Y_k = ε_k X_k` on the grid, if the kernel has that form.
pub fn symmetric_signs(model: &FieldModel) -> Option<Vec<f64>> {
    let k = &model.kernel;
    let (xs, ys) = (k.x_samples(), k.y_samples());
    (0..k.rank())
        .map(|c| {
            let (x, y) = (xs.column(c), ys.column(c));
            let scale = x.amax().max(y.amax()).max(f64::MIN_POSITIVE);
            if (y - x).amax() <= 1e-12 * scale {
                Some(1.0)
            } else if (y + x).amax() <= 1e-12 * scale {
                Some(-1.0)
            } else {
                None
            }
        })
        .collect()
}

/// `E(v) = -vᵀ diag(ε) v / 2 + (1/λ)∫S̄₀(λ(Xv + W)) + μS(0)⟨X, 1⟩ᵀv`
/// where `S̄₀` is the primitive of `S - S(0)`. The coordinate ODE is
/// `v̇ = Λ diag(ε) ∇E(v)`.
pub fn energy(model: &FieldModel, v: &DVector<f64>) -> Result<f64> {
    let eps = symmetric_signs(model)
        .ok_or_else(|| Error::Invalid("energy needs a kernel of the form sum eps_k X_k (x) X_k".into()))?;
    let p = &model.params;
    let k = &model.kernel;
    let quad: f64 = v.iter().zip(&eps).map(|(x, e)| e * x * x).sum::<f64>() * -0.5;
    let u = model.potential(v);
    let w = k.field_weights();
    let integral = if p.lambda == 0.0 {
        0.0
    } else {
        let mut acc = 0.0;
        for (z, wi) in u.iter().zip(w.iter()) {
            acc += wi * model.nonlinearity.shifted_primitive(p.lambda * z)?;
        }
        acc / p.lambda
    };
    let ones = DVector::from_element(u.len(), 1.0);
    let lin = k.x_samples().tr_mul(&ones.component_mul(w)).dot(v) * p.mu * model.nonlinearity.s0();
    Ok(quad + integral + lin)
}

/// Max component error between the ODE right-hand side and
/// `Λ diag(ε) ∇E` with a central-difference gradient of step `h`.
pub fn gradient_check(model: &FieldModel, v: &DVector<f64>, h: f64) -> Result<f64> {
    let eps = symmetric_signs(model)
        .ok_or_else(|| Error::Invalid("gradient check needs a kernel of the form sum eps_k X_k (x) X_k".into()))?;
    let rates = model.coordinate_rates()?;
    let f = rhs(model, v, None)?;
    let mut worst = 0.0_f64;
    for c in 0..v.len() {
        let mut vp = v.clone();
        vp[c] += h;
        let mut vm = v.clone();
        vm[c] -= h;
        let g = (energy(model, &vp)? - energy(model, &vm)?) / (2.0 * h);
        worst = worst.max((f[c] - rates[c] * eps[c] * g).abs());
    }
    Ok(worst)
}

/// Whether `J(r, r') = J(r', r)ᵀ` within `tol`, via
/// `‖XYᵀ - YXᵀ‖²_HS = 2 tr(G_X G_Y) - 2 tr(M²)`, `M = ⟨X, Y⟩`.
pub fn kernel_is_symmetric(model: &FieldModel, tol: f64) -> bool {
    let k = &model.kernel;
    let w = k.field_weights();
    let xw = k.x_samples().map_with_location(|r, _, v| v * w[r]);
    let gx = xw.tr_mul(k.x_samples());
    let gy = k.y_weighted().tr_mul(k.y_samples());
    let gxy = xw.tr_mul(k.y_samples());
    let a = (&gx * &gy).trace();
    let b = (&gxy * &gxy).trace();
    (2.0 * (a - b)).max(0.0).sqrt() <= tol * a.abs().sqrt().max(1.0)
}

/// Lyapunov function of the field dynamics for a symmetric kernel,
/// `L = -½⟨A, JA⟩ + ⟨V - W, A⟩ - ∫G(V)` with `A = g(V)` and `G' = g`;
/// non-increasing along trajectories with no orthogonal component.
pub fn lyapunov(model: &FieldModel, v: &DVector<f64>) -> Result<f64> {
    let k = &model.kernel;
    let p = &model.params;
    let u = model.potential(v);
    let wfield = model.offset(p);
    let a = model.activity(v);
    let w = k.field_weights();
    let xa = k.x_samples().tr_mul(&a.component_mul(w));
    let ya = k.y_weighted().tr_mul(&a);
    let s0 = model.nonlinearity.s0();
    let mut integral = 0.0;
    for i in 0..u.len() {
        let z = u[i];
        let prim = if p.lambda == 0.0 { 0.0 } else { model.nonlinearity.shifted_primitive(p.lambda * z)? / p.lambda };
        integral += w[i] * (prim + p.mu * s0 * z);
    }
    let cross: f64 = (0..u.len()).map(|i| w[i] * (u[i] - wfield[i]) * a[i]).sum();
    Ok(-0.5 * xa.dot(&ya) + cross - integral)
}

/// Whether `-L` is non-decreasing along the stored states (within `tol`).
pub fn energy_monotone(model: &FieldModel, traj: &Trajectory, tol: f64) -> Result<bool> {
    let mut prev = f64::NEG_INFINITY;
    for v in &traj.states {
        let e = -lyapunov(model, v)?;
        if e < prev - tol * (1.0 + prev.abs()) {
            return Ok(false);
        }
        prev = prev.max(e);
    }
    Ok(true)
}

/// A return of the trajectory to within `tol` of an earlier state at which
/// the speed exceeded `min_speed`, after leaving that neighbourhood.
pub fn detect_recurrence(model: &FieldModel, traj: &Trajectory, tol: f64, min_speed: f64) -> Result<Option<(usize, usize)>> {
    let n = traj.states.len();
    for i in 0..n {
        if traj.rates[i].norm() <= min_speed {
            continue;
        }
        let _ = model;
        let mut left = false;
        for j in i + 1..n {
            let d = (&traj.states[j] - &traj.states[i]).norm();
            if d > 10.0 * tol {
                left = true;
            } else if left && d < tol {
                return Ok(Some((i, j)));
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorbingBall {
    pub radius: f64,
    pub delta: f64,
    /// Bound on `‖Λ(J·A + W)‖`.
    pub forcing: f64,
    pub tau_max: f64,
}

/// `R = 2 τ_max K`, `δ = 2 τ_max K²` with `K` bounding the forcing term.
pub fn absorbing_ball(model: &FieldModel) -> Result<AbsorbingBall> {
    let k = &model.kernel;
    let p = &model.params;
    let vol = (k.populations() as f64 * k.grid().measure()).sqrt();
    let hs = k.sobolev_frobenius_norm(0)?;
    let sup_a = model.nonlinearity.shifted_sup() + p.mu * model.nonlinearity.s0().abs();
    let rate_max = model.tau.iter().map(|t| 1.0 / t).fold(0.0, f64::max);
    let tau_max = model.tau.iter().cloned().fold(0.0, f64::max);
    let forcing = rate_max * (hs * sup_a * vol + k.norm(&model.offset(p))?);
    Ok(AbsorbingBall { radius: 2.0 * tau_max * forcing, delta: 2.0 * tau_max * forcing * forcing, forcing, tau_max })
}

/// Field norm `‖V(t)‖` at stored step `i`.
pub fn field_norm(model: &FieldModel, traj: &Trajectory, i: usize) -> Result<f64> {
    let mut f = model.potential(&traj.states[i]);
    if let Some(u0) = &traj.orth0 {
        f += orth_at(model, u0, traj.times[i]);
    }
    model.kernel.norm(&f)
}

/// First time the field norm drops to `radius` or below, by linear
/// interpolation between stored steps.
pub fn entry_time(model: &FieldModel, traj: &Trajectory, radius: f64) -> Result<Option<f64>> {
    let mut prev = (traj.times[0], field_norm(model, traj, 0)?);
    if prev.1 <= radius {
        return Ok(Some(0.0));
    }
    for i in 1..traj.times.len() {
        let cur = (traj.times[i], field_norm(model, traj, i)?);
        if cur.1 <= radius {
            let f = (prev.1 - radius) / (prev.1 - cur.1);
            return Ok(Some(prev.0 + f * (cur.0 - prev.0)));
        }
        prev = cur;
    }
    Ok(None)
}

/// Index of the closest equilibrium to `v` and its distance.
pub fn nearest(v: &DVector<f64>, equilibria: &[DVector<f64>]) -> Option<(usize, f64)> {
    equilibria
        .iter()
        .enumerate()
        .map(|(i, e)| (i, (e - v).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}
