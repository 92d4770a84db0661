//! The ring model of orientation tuning and the two-population model on a square.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::model::{FieldModel, Homotopy};
use crate::pg_kernel::PGKernel;
use crate::quadrature::QuadratureGrid;
use crate::sigmoid::Nonlinearity;
use nalgebra::{Complex, DVector, Matrix2, Matrix3};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingParams {
    /// ε₀ ∈ {-1, +1}.
    pub j0: f64,
    pub j1: f64,
    pub alpha: f64,
    pub beta: f64,
    pub x0: f64,
    pub theta: f64,
    pub tau: f64,
    pub homotopy: Homotopy,
    pub nodes: usize,
}

impl Default for RingParams {
    fn default() -> Self {
        RingParams {
            j0: -1.0,
            j1: 1.5,
            alpha: 2.2,
            beta: 0.1,
            x0: 0.0,
            theta: 0.1,
            tau: 1.0,
            homotopy: Homotopy::new(29.2, 0.0, 0.0),
            nodes: 64,
        }
    }
}

impl RingParams {
    pub fn validate(&self) -> Result<()> {
        if self.j0.abs() != 1.0 {
            return Err(Error::Invalid("ring: J0 must be -1 or +1".into()));
        }
        if (self.alpha - 2.0).abs() < 1e-12 {
            return Err(Error::Invalid(
                "ring: alpha = 2 makes the kernel translation invariant on the ring; \
                 the pitchforks become equivariant and are not handled"
                    .into(),
            ));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Invalid("ring: alpha must be positive".into()));
        }
        if self.j1 == 0.0 || !self.j1.is_finite() {
            return Err(Error::Invalid("ring: J1 must be nonzero".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Invalid("ring: beta must lie in [0, 1]".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Invalid("ring: tau must be positive".into()));
        }
        self.homotopy.validate()
    }

    fn eps1(&self) -> f64 {
        self.j1.signum()
    }
}

/// `⟨1, cos_α⟩`, `⟨1, cos²_α⟩`, `⟨1, sin²_α⟩` for the measure dx/π on (-π/2, π/2).
pub fn ring_moments(alpha: f64) -> (f64, f64, f64) {
    let c1 = 2.0 * (alpha * PI / 2.0).sin() / (alpha * PI);
    let h = (alpha * PI).sin() / (2.0 * alpha * PI);
    (c1, 0.5 + h, 0.5 - h)
}

pub fn build_ring(params: &RingParams) -> Result<FieldModel> {
    params.validate()?;
    let grid = Arc::new(QuadratureGrid::build(1, params.nodes, &[(-PI / 2.0, PI / 2.0)], 1.0 / PI)?);
    let r = params.j1.abs().sqrt();
    let ax = Expr::mul(Expr::c(params.alpha), Expr::var(0));
    let x = vec![
        vec![Expr::c(1.0)],
        vec![Expr::mul(Expr::c(r), Expr::cos(ax.clone()))],
        vec![Expr::mul(Expr::c(r), Expr::sin(ax))],
    ];
    let signs = [params.j0, params.eps1(), params.eps1()];
    let y = x.iter().zip(signs).map(|(f, s)| vec![Expr::mul(Expr::c(s), f[0].clone())]).collect();
    let kernel = PGKernel::new(grid.clone(), 1, x, y)?.with_names(vec!["1".into(), "cos".into(), "sin".into()])?;
    let (a, b, x0) = (params.alpha, params.beta, params.x0);
    let input = DVector::from_vec(grid.sample(|p| 1.0 - b + b * (a * (p[0] - x0)).cos()));
    FieldModel::new(
        Arc::new(kernel),
        Nonlinearity::Logistic,
        vec![params.tau],
        input,
        vec![params.theta],
        params.homotopy,
    )
}

/// Coordinates of the ring input in the basis (1, √|J₁|cos_α, √|J₁|sin_α).
pub fn ring_input_coords(params: &RingParams) -> [f64; 3] {
    let r = params.j1.abs().sqrt();
    let (a, b, x0) = (params.alpha, params.beta, params.x0);
    [1.0 - b, b * (a * x0).cos() / r, b * (a * x0).sin() / r]
}

/// Closed-form coordinate matrix of the ring kernel at v = 0.
pub fn ring_k(params: &RingParams) -> Matrix3<f64> {
    let (c1, c2, s2) = ring_moments(params.alpha);
    let e0 = params.j0;
    let e1 = params.eps1();
    let r = params.j1.abs().sqrt();
    Matrix3::new(
        e0,
        e0 * r * c1,
        0.0,
        e1 * r * c1,
        params.j1 * c2,
        0.0,
        0.0,
        0.0,
        params.j1 * s2,
    )
}

/// Eigenvalues of `ring_k`: (sin axis, larger cos-block, smaller cos-block).
pub fn ring_k_eigenvalues(params: &RingParams) -> (f64, f64, f64) {
    let k = ring_k(params);
    let tr = k[(0, 0)] + k[(1, 1)];
    let det = k[(0, 0)] * k[(1, 1)] - k[(0, 1)] * k[(1, 0)];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    (k[(2, 2)], tr / 2.0 + disc, tr / 2.0 - disc)
}

/// Right-hand side of the ring ODE written out term by term.
pub fn ring_rhs_reference(params: &RingParams, v: &[f64; 3], nodes: usize) -> [f64; 3] {
    let (t, w) = crate::quadrature::gauss_legendre(nodes);
    let r = params.j1.abs().sqrt();
    let h = params.homotopy;
    let ic = ring_input_coords(params);
    let (e0, e1) = (params.j0, params.eps1());
    let mut out = [0.0; 3];
    for (ti, wi) in t.iter().zip(&w) {
        let x = ti * PI / 2.0;
        let wx = wi * 0.5;
        let cs = (params.alpha * x).cos();
        let sn = (params.alpha * x).sin();
        let vpar = v[0] + v[1] * r * cs + v[2] * r * sn;
        let ipar = ic[0] + ic[1] * r * cs + ic[2] * r * sn;
        let z = h.lambda * (vpar + h.eps * ipar + h.mu * params.theta);
        let s = crate::sigmoid::eval_shifted(z) + h.mu * 0.5;
        out[0] += wx * e0 * s;
        out[1] += wx * e1 * r * cs * s;
        out[2] += wx * e1 * r * sn * s;
    }
    [out[0] - v[0], out[1] - v[1], out[2] - v[2]]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPopParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Bell exponents on the `r` side, `exps[i][j]` for block (i, j).
    pub exps: [[f64; 2]; 2],
    /// Bell exponents on the `r'` side.
    pub exps_prime: [[f64; 2]; 2],
    pub taylor_order: usize,
    pub constant: [[f64; 2]; 2],
    /// Decay rates, `L = diag(decay)`.
    pub decay: [f64; 2],
    /// Sigmoid shift.
    pub theta: f64,
    pub homotopy: Homotopy,
    pub nodes: usize,
}

impl Default for TwoPopParams {
    fn default() -> Self {
        TwoPopParams {
            a: 10.0,
            b: 15.0,
            c: 12.75,
            exps: [[3.0, 2.0], [2.0, 4.0]],
            exps_prime: [[3.0, 2.0], [2.0, 4.0]],
            taylor_order: 4,
            constant: [[0.0; 2]; 2],
            decay: [0.5, 0.5],
            theta: 1.3,
            homotopy: Homotopy::new(0.0, 0.0, 0.0),
            nodes: 32,
        }
    }
}

impl TwoPopParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0 && self.c > 0.0) {
            return Err(Error::Invalid("twopop: strengths a, b, c must be positive".into()));
        }
        for e in self.exps.iter().chain(self.exps_prime.iter()).flatten() {
            if !(*e > 0.5) {
                return Err(Error::Invalid(format!(
                    "twopop: bell exponent {e} <= 1/2 gives an infinite Sobolev norm"
                )));
            }
            if e.fract() != 0.0 {
                return Err(Error::Invalid(format!(
                    "twopop: bell exponent {e} must be an integer, 1-|r|^2 is negative in the corners of the square"
                )));
            }
        }
        if self.decay.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Invalid("twopop: decay rates must be positive".into()));
        }
        self.homotopy.validate()
    }

    /// Signed strength of block (i, j).
    pub fn strength(&self, i: usize, j: usize) -> f64 {
        [[self.a, -self.b], [self.b, -self.c]][i][j]
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Builds the two-population model. Each block is
/// `C_ij + s_ij (1-|r|²)^{a_ij} (1-|r'|²)^{a'_ij} P_ij(r, r')` with `P_ij` the
/// product of the per-axis Taylor polynomials of `e^{a_ij r₁r₁'}` and
/// `e^{a_ij r₂r₂'}`, giving `(order+1)²` separable terms per block.
pub fn build_twopop(params: &TwoPopParams) -> Result<FieldModel> {
    params.validate()?;
    let grid = Arc::new(QuadratureGrid::build(2, params.nodes, &[(-1.0, 1.0), (-1.0, 1.0)], 1.0)?);
    let rr = Expr::sub(
        Expr::c(1.0),
        Expr::add(Expr::pow(Expr::var(0), 2.0), Expr::pow(Expr::var(1), 2.0)),
    );
    let zero = Expr::c(0.0);
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut names = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            let s = params.strength(i, j);
            let k = params.exps[i][j];
            let bell = Expr::pow(rr.clone(), params.exps[i][j]);
            let bell_p = Expr::pow(rr.clone(), params.exps_prime[i][j]);
            for i1 in 0..=params.taylor_order {
                for i2 in 0..=params.taylor_order {
                    let coef = k.powi((i1 + i2) as i32) / (factorial(i1) * factorial(i2));
                    let mono = Expr::mul(Expr::pow(Expr::var(0), i1 as f64), Expr::pow(Expr::var(1), i2 as f64));
                    let sc = coef.sqrt();
                    let mut xf = vec![zero.clone(), zero.clone()];
                    let mut yf = vec![zero.clone(), zero.clone()];
                    xf[i] = Expr::mul(Expr::c(sc), Expr::mul(bell.clone(), mono.clone()));
                    yf[j] = Expr::mul(Expr::c(s * sc), Expr::mul(bell_p.clone(), mono));
                    x.push(xf);
                    y.push(yf);
                    names.push(format!("J{}{}:r1^{}r2^{}", i + 1, j + 1, i1, i2));
                }
            }
            if params.constant[i][j] != 0.0 {
                let mut xf = vec![zero.clone(), zero.clone()];
                let mut yf = vec![zero.clone(), zero.clone()];
                xf[i] = Expr::c(1.0);
                yf[j] = Expr::c(params.constant[i][j]);
                x.push(xf);
                y.push(yf);
                names.push(format!("C{}{}", i + 1, j + 1));
            }
        }
    }
    let kernel = PGKernel::new(grid.clone(), 2, x, y)?.with_names(names)?;
    let rank = kernel.x_rank(1e-12);
    if rank < kernel.rank() {
        log::info!("twopop: X factors span {rank} of {} dimensions", kernel.rank());
    }
    let input = DVector::zeros(kernel.field_len());
    FieldModel::new(
        Arc::new(kernel),
        Nonlinearity::ShiftedLogistic { shift: params.theta },
        vec![1.0 / params.decay[0], 1.0 / params.decay[1]],
        input,
        vec![0.0, 0.0],
        params.homotopy,
    )
}

/// Reference value of the two-population kernel block (i, j) at (r, r').
pub fn twopop_kernel_reference(params: &TwoPopParams, i: usize, j: usize, r: [f64; 2], rp: [f64; 2]) -> f64 {
    let bell = |p: [f64; 2], e: f64| (1.0 - p[0] * p[0] - p[1] * p[1]).powf(e);
    let k = params.exps[i][j];
    let taylor = |z: f64| (0..=params.taylor_order).map(|n| z.powi(n as i32) / factorial(n)).sum::<f64>();
    params.constant[i][j]
        + params.strength(i, j)
            * bell(r, params.exps[i][j])
            * bell(rp, params.exps_prime[i][j])
            * taylor(k * r[0] * rp[0])
            * taylor(k * r[1] * rp[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierMode {
    pub n: (usize, usize),
    pub eigenvalues: [Complex<f64>; 2],
    pub hopf_relevant: bool,
    /// `∫ G_k sin_n`, zero by parity.
    pub sin_moments: [f64; 3],
}

/// Spectrum of the 2×2 Fourier symbol of the ideal Gaussian kernel for modes
/// `0 <= n₁, n₂ <= cap`, with `Ĝ` computed by quadrature over the square.
pub fn twopop_fourier_predictions(params: &TwoPopParams, cap: usize) -> Result<Vec<FourierMode>> {
    let grid = QuadratureGrid::build(2, params.nodes.max(32), &[(-1.0, 1.0), (-1.0, 1.0)], 1.0)?;
    let widths = [params.exps[0][0], params.exps[0][1], params.exps[1][1]];
    let mut out = Vec::new();
    for n1 in 0..=cap {
        for n2 in 0..=cap {
            let mut gc = [0.0; 3];
            let mut gs = [0.0; 3];
            for (r, w) in grid.nodes.iter().zip(&grid.weights) {
                let ph = n1 as f64 * r[0] + n2 as f64 * r[1];
                let rsq = r[0] * r[0] + r[1] * r[1];
                for k in 0..3 {
                    let g = (-rsq * widths[k] / 2.0).exp();
                    gc[k] += w * g * ph.cos();
                    gs[k] += w * g * ph.sin();
                }
            }
            let m = Matrix2::new(params.a * gc[0], -params.b * gc[1], params.b * gc[1], -params.c * gc[2]);
            let tr = m.trace();
            let det = m.determinant();
            let disc = Complex::new(tr * tr / 4.0 - det, 0.0).sqrt();
            let ev = [Complex::new(tr / 2.0, 0.0) + disc, Complex::new(tr / 2.0, 0.0) - disc];
            out.push(FourierMode {
                n: (n1, n2),
                eigenvalues: ev,
                hopf_relevant: disc.im.abs() > 0.0,
                sin_moments: gs,
            });
        }
    }
    Ok(out)
}
