//! The persistent-state problem in PG coordinates.
//!
//! A state is the coordinate vector `v` of `V - W` in span{X_k}, where
//! `W = ε·I_ext + μ·θ` is the constant input seen by the field. The residual is
//! `r(v) = v - ⟨Y, S₀(λ(Xv + W))⟩ - μ·S(0)·⟨Y, 1⟩`.

use crate::error::{Error, Result};
use crate::pg_kernel::PGKernel;
use crate::sigmoid::Nonlinearity;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

pub type ReducedState = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homotopy {
    pub lambda: f64,
    pub mu: f64,
    pub eps: f64,
}

impl Homotopy {
    pub fn new(lambda: f64, mu: f64, eps: f64) -> Self {
        Homotopy { lambda, mu, eps }
    }

    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Lambda => self.lambda,
            Param::Mu => self.mu,
            Param::Eps => self.eps,
        }
    }

    pub fn with(mut self, p: Param, value: f64) -> Self {
        match p {
            Param::Lambda => self.lambda = value,
            Param::Mu => self.mu = value,
            Param::Eps => self.eps = value,
        }
        self
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.lambda, self.mu, self.eps]
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda.is_finite()
            && self.lambda >= 0.0
            && (0.0..=1.0).contains(&self.mu)
            && (0.0..=1.0).contains(&self.eps);
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!(
                "homotopy out of range: lambda={}, mu={}, eps={}",
                self.lambda, self.mu, self.eps
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    Lambda,
    Mu,
    Eps,
}

impl Param {
    pub fn name(&self) -> &'static str {
        match self {
            Param::Lambda => "lambda",
            Param::Mu => "mu",
            Param::Eps => "eps",
        }
    }

    pub fn index(&self) -> usize {
        match self {
            Param::Lambda => 0,
            Param::Mu => 1,
            Param::Eps => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    #[default]
    Voltage,
    Activity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub b1: f64,
    pub b2: f64,
    /// `1 / ‖J‖_F` with the Sobolev-order norm.
    pub lambda_star: f64,
    /// `1 / ‖J‖_F` with the plain L² (Hilbert-Schmidt) norm.
    pub lambda_star_l2: f64,
    pub lambda_l: f64,
    pub frobenius: f64,
    pub frobenius_l2: f64,
    pub sobolev_order: usize,
}

/// Residual, Jacobian and parameter derivatives evaluated together.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub residual: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    /// Columns: d r / d(λ, μ, ε).
    pub dparams: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct FieldModel {
    pub kernel: Arc<PGKernel>,
    pub nonlinearity: Nonlinearity,
    /// Time constants τ_i per population.
    pub tau: Vec<f64>,
    /// Sampled external input.
    pub input: DVector<f64>,
    /// Threshold per population, entering the potential as `+μθ`.
    pub theta: Vec<f64>,
    pub params: Homotopy,
    pub variant: Variant,
    theta_field: DVector<f64>,
    ones: DVector<f64>,
    input_orth: f64,
}

impl FieldModel {
    pub fn new(
        kernel: Arc<PGKernel>,
        nonlinearity: Nonlinearity,
        tau: Vec<f64>,
        input: DVector<f64>,
        theta: Vec<f64>,
        params: Homotopy,
    ) -> Result<Self> {
        let p = kernel.populations();
        let nn = kernel.grid().len();
        if tau.len() != p {
            return Err(Error::Length { expected: p, got: tau.len() });
        }
        if tau.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(Error::Invalid("time constants must be positive".into()));
        }
        if theta.len() != p {
            return Err(Error::Length { expected: p, got: theta.len() });
        }
        if input.len() != p * nn {
            return Err(Error::Length { expected: p * nn, got: input.len() });
        }
        if input.iter().chain(theta.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        params.validate()?;
        let theta_field = DVector::from_iterator(p * nn, (0..p).flat_map(|i| std::iter::repeat_n(theta[i], nn)));
        let ones = DVector::from_element(p * nn, 1.0);
        let input_orth = orthogonal_norm(&kernel, &input);
        if input_orth > 1e-10 {
            log::warn!(
                "input has a component of L2 norm {input_orth:.3e} outside span{{X_k}}; kept as a constant offset"
            );
        }
        Ok(FieldModel {
            kernel,
            nonlinearity,
            tau,
            input,
            theta,
            params,
            variant: Variant::Voltage,
            theta_field,
            ones,
            input_orth,
        })
    }

    pub fn with_params(&self, params: Homotopy) -> Self {
        let mut m = self.clone();
        m.params = params;
        m
    }

    pub fn dim(&self) -> usize {
        self.kernel.rank()
    }

    /// L² norm of the input component outside span{X_k}.
    pub fn input_orthogonal_norm(&self) -> f64 {
        self.input_orth
    }

    /// Constant part of the potential, `W = εI + μθ`.
    pub fn offset(&self, params: &Homotopy) -> DVector<f64> {
        &self.input * params.eps + &self.theta_field * params.mu
    }

    /// Sampled potential `V = Xv + W`.
    pub fn potential_at(&self, v: &DVector<f64>, params: &Homotopy) -> DVector<f64> {
        self.kernel.synthesize(v) + self.offset(params)
    }

    pub fn potential(&self, v: &DVector<f64>) -> DVector<f64> {
        self.potential_at(v, &self.params)
    }

    /// Activity `A = S₀(λV) + μS(0)`; equals `S(λV)` at μ = 1.
    pub fn activity(&self, v: &DVector<f64>) -> DVector<f64> {
        let u = self.potential(v);
        let s0 = self.nonlinearity.s0();
        u.map(|z| self.nonlinearity.eval_shifted(self.params.lambda * z) + self.params.mu * s0)
    }

    /// Reduced coordinates of `V = J·A + W` for an activity field `A`.
    pub fn state_from_activity(&self, a: &DVector<f64>) -> Result<DVector<f64>> {
        self.kernel.project(a)
    }

    /// The sampled field of the model's variant: potential or activity.
    pub fn state_field(&self, v: &DVector<f64>) -> DVector<f64> {
        match self.variant {
            Variant::Voltage => self.potential(v),
            Variant::Activity => self.activity(v),
        }
    }

    fn check(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Length { expected: self.dim(), got: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    pub fn residual_at(&self, v: &DVector<f64>, params: &Homotopy) -> Result<DVector<f64>> {
        self.check(v)?;
        let u = self.potential_at(v, params);
        let s0 = self.nonlinearity.s0();
        let a = u.map(|z| self.nonlinearity.eval_shifted(params.lambda * z) + params.mu * s0);
        Ok(v - self.kernel.y_weighted().tr_mul(&a))
    }

    pub fn residual(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.residual_at(v, &self.params)
    }

    pub fn jacobian_at(&self, v: &DVector<f64>, params: &Homotopy) -> Result<DMatrix<f64>> {
        Ok(self.linearize_at(v, params)?.jacobian)
    }

    pub fn jacobian(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.jacobian_at(v, &self.params)
    }

    pub fn linearize_at(&self, v: &DVector<f64>, params: &Homotopy) -> Result<Linearization> {
        self.check(v)?;
        let lam = params.lambda;
        let u = self.potential_at(v, params);
        let s0 = self.nonlinearity.s0();
        let n = u.len();
        let mut a = DVector::zeros(n);
        let mut ds = DVector::zeros(n);
        for i in 0..n {
            let (s, d) = self.nonlinearity.eval_d1(lam * u[i])?;
            a[i] = s - s0 + params.mu * s0;
            ds[i] = d;
        }
        let yw = self.kernel.y_weighted();
        let residual = v - yw.tr_mul(&a);
        let mut jacobian = -self.kernel.weighted_coord_matrix(&(&ds * lam));
        for k in 0..jacobian.nrows() {
            jacobian[(k, k)] += 1.0;
        }
        let mut dparams = DMatrix::zeros(v.len(), 3);
        let dl = ds.component_mul(&u);
        dparams.set_column(0, &(-yw.tr_mul(&dl)));
        let dm = ds.component_mul(&self.theta_field) * lam + &self.ones * s0;
        dparams.set_column(1, &(-yw.tr_mul(&dm)));
        let de = ds.component_mul(&self.input) * lam;
        dparams.set_column(2, &(-yw.tr_mul(&de)));
        Ok(Linearization { residual, jacobian, dparams })
    }

    /// Solution at λ = 0, i.e. the coordinates of `μS(0)·J·1`.
    pub fn lambda_zero_state(&self, params: &Homotopy) -> DVector<f64> {
        self.kernel.y_weighted().tr_mul(&self.ones) * (params.mu * self.nonlinearity.s0())
    }

    /// Field `V₀^f` of the λ = 0 solution.
    pub fn lambda_zero_field(&self, params: &Homotopy) -> DVector<f64> {
        self.potential_at(&self.lambda_zero_state(params), params)
    }

    /// One Picard step `v ↦ v - r(v)`.
    pub fn picard(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(v - self.residual(v)?)
    }

    pub fn bounds(&self) -> Result<Bounds> {
        let k = &self.kernel;
        let m = k.default_sobolev_order();
        let frob = k.sobolev_frobenius_norm(m)?;
        let frob_l2 = k.sobolev_frobenius_norm(0)?;
        let vol = (k.populations() as f64 * k.grid().measure()).sqrt();
        let w = self.offset(&self.params);
        let inv = |x: f64| if x > 0.0 { 1.0 / x } else { f64::INFINITY };
        Ok(Bounds {
            b1: vol * frob + k.norm(&w)?,
            b2: self.nonlinearity.shifted_sup() * vol * frob,
            lambda_star: inv(frob),
            lambda_star_l2: inv(frob_l2),
            lambda_l: inv(k.sym_spectral_radius()),
            frobenius: frob,
            frobenius_l2: frob_l2,
            sobolev_order: m,
        })
    }

    /// Coordinate box containing every solution: `|v_k - v0_k| <= sup|S₀|·∫|Y_k|`.
    pub fn solution_box(&self) -> (DVector<f64>, DVector<f64>) {
        let center = self.lambda_zero_state(&self.params);
        let sup = self.nonlinearity.shifted_sup();
        let yw = self.kernel.y_weighted();
        let radius = DVector::from_iterator(yw.ncols(), yw.column_iter().map(|c| sup * c.abs().sum()));
        (center, radius)
    }

    /// Rates `1/τ` per reduced coordinate, when each X factor lives on one
    /// population or all populations share a time constant.
    pub fn coordinate_rates(&self) -> Result<DVector<f64>> {
        let tau0 = self.tau[0];
        if self.tau.iter().all(|&t| t == tau0) {
            return Ok(DVector::from_element(self.dim(), 1.0 / tau0));
        }
        let sup = self.kernel.x_support();
        let rates: Option<Vec<f64>> = sup.iter().map(|s| s.map(|i| 1.0 / self.tau[i])).collect();
        rates
            .map(DVector::from_vec)
            .ok_or_else(|| Error::Invalid("distinct time constants need single-population X factors".into()))
    }
}

fn orthogonal_norm(kernel: &PGKernel, f: &DVector<f64>) -> f64 {
    if kernel.rank() == 0 {
        return kernel.norm(f).unwrap_or(0.0);
    }
    let g = kernel.gram_x();
    let w = kernel.field_weights();
    let rhs = kernel.x_samples().tr_mul(&f.component_mul(w));
    let svd = g.svd(true, true);
    let c = match svd.solve(&rhs, 1e-12) {
        Ok(c) => c,
        Err(_) => return f64::NAN,
    };
    let rest = f - kernel.synthesize(&c);
    kernel.norm(&rest).unwrap_or(f64::NAN)
}
