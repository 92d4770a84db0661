//! Finite-rank (Pincherle-Goursat) kernels `J(r, r') = Σ_k X_k(r) Y_k(r')ᵀ`.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::quadrature::QuadratureGrid;
use nalgebra::{Complex, DMatrix, DVector};
use std::sync::Arc;

/// Factors are p-vectors of expressions. Sampled fields are stacked
/// population-major: entry `i * n_nodes + j` is population `i` at node `j`.
#[derive(Debug, Clone)]
pub struct PGKernel {
    grid: Arc<QuadratureGrid>,
    p: usize,
    x: Vec<Vec<Expr>>,
    y: Vec<Vec<Expr>>,
    xs: DMatrix<f64>,
    ys: DMatrix<f64>,
    yw: DMatrix<f64>,
    w: DVector<f64>,
    names: Vec<String>,
    blocks: Option<Vec<PopBlock>>,
}

/// Factors supported on a single population, gathered for block products.
#[derive(Debug, Clone)]
struct PopBlock {
    pop: usize,
    xcols: Vec<usize>,
    ycols: Vec<usize>,
    xs: DMatrix<f64>,
    yw: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub sigma: Complex<f64>,
    /// Coordinates `c` of the right eigenvector `e = Σ c_k X_k`, with `‖e‖₂ = 1`.
    pub right: DVector<Complex<f64>>,
    /// Coordinates `d` of the adjoint eigenvector `e* = Σ d_k Y_k`, with `⟨e, e*⟩ = 1`.
    pub adjoint: DVector<Complex<f64>>,
    pub simple: bool,
    pub residual: f64,
}

impl Eigenpair {
    pub fn is_real(&self) -> bool {
        self.sigma.im.abs() <= 1e-12 * self.sigma.re.abs().max(1.0)
    }

    pub fn right_real(&self) -> DVector<f64> {
        self.right.map(|z| z.re)
    }

    pub fn adjoint_real(&self) -> DVector<f64> {
        self.adjoint.map(|z| z.re)
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Sorted by decreasing real part.
    pub pairs: Vec<Eigenpair>,
}

impl PGKernel {
    pub fn new(grid: Arc<QuadratureGrid>, p: usize, x: Vec<Vec<Expr>>, y: Vec<Vec<Expr>>) -> Result<Self> {
        if p == 0 {
            return Err(Error::Invalid("population count must be >= 1".into()));
        }
        if x.len() != y.len() {
            return Err(Error::Length { expected: x.len(), got: y.len() });
        }
        for f in x.iter().chain(y.iter()) {
            if f.len() != p {
                return Err(Error::Length { expected: p, got: f.len() });
            }
        }
        let nn = grid.len();
        let sample = |fs: &Vec<Vec<Expr>>| {
            let mut m = DMatrix::zeros(p * nn, fs.len());
            for (k, f) in fs.iter().enumerate() {
                for (i, e) in f.iter().enumerate() {
                    if e.is_zero() {
                        continue;
                    }
                    for (j, r) in grid.nodes.iter().enumerate() {
                        m[(i * nn + j, k)] = e.eval(&r[..grid.dim]);
                    }
                }
            }
            m
        };
        let xs = sample(&x);
        let ys = sample(&y);
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let w = DVector::from_iterator(p * nn, (0..p).flat_map(|_| grid.weights.iter().copied()));
        let mut yw = ys.clone();
        for (r, mut row) in yw.row_iter_mut().enumerate() {
            row *= w[r];
        }
        let names = (0..x.len()).map(|k| format!("X{k}")).collect();
        let blocks = pop_blocks(p, nn, &x, &y, &xs, &yw);
        Ok(PGKernel { grid, p, x, y, xs, ys, yw, w, names, blocks })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.rank() {
            return Err(Error::Length { expected: self.rank(), got: names.len() });
        }
        self.names = names;
        Ok(self)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Name of the factor carrying most of the L² mass of `Σ c_k X_k`.
    pub fn dominant_factor(&self, c: &DVector<f64>) -> &str {
        let g = self.gram_x();
        let mut best = (0, -1.0);
        for k in 0..c.len() {
            let m = c[k].abs() * g[(k, k)].sqrt();
            if m > best.1 {
                best = (k, m);
            }
        }
        &self.names[best.0]
    }

    pub fn rank(&self) -> usize {
        self.x.len()
    }

    pub fn populations(&self) -> usize {
        self.p
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    /// Length of a sampled p-field.
    pub fn field_len(&self) -> usize {
        self.p * self.grid.len()
    }

    pub fn x_factors(&self) -> &[Vec<Expr>] {
        &self.x
    }

    pub fn y_factors(&self) -> &[Vec<Expr>] {
        &self.y
    }

    /// Samples of `X_k` as columns.
    pub fn x_samples(&self) -> &DMatrix<f64> {
        &self.xs
    }

    pub fn y_samples(&self) -> &DMatrix<f64> {
        &self.ys
    }

    /// Samples of `Y_k` multiplied by the quadrature weights, so `ywᵀ U = (⟨Y_k, U⟩)_k`.
    pub fn y_weighted(&self) -> &DMatrix<f64> {
        &self.yw
    }

    /// Quadrature weights repeated per population.
    pub fn field_weights(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn inner(&self, f: &DVector<f64>, g: &DVector<f64>) -> Result<f64> {
        self.check_field(f)?;
        self.check_field(g)?;
        Ok(f.iter().zip(g.iter()).zip(self.w.iter()).map(|((a, b), w)| a * b * w).sum())
    }

    pub fn norm(&self, f: &DVector<f64>) -> Result<f64> {
        Ok(self.inner(f, f)?.sqrt())
    }

    fn check_field(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.field_len() {
            return Err(Error::Length { expected: self.field_len(), got: u.len() });
        }
        Ok(())
    }

    /// `(⟨Y_k, U⟩)_k`.
    pub fn project(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_field(u)?;
        Ok(self.yw.tr_mul(u))
    }

    /// `Σ_k c_k X_k` as a sampled field.
    pub fn synthesize(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.xs * c
    }

    pub fn apply(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.synthesize(&self.project(u)?))
    }

    /// Pointwise `J(r, r')` as a p×p matrix.
    pub fn eval(&self, r: &[f64], rp: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.p, self.p);
        for (xk, yk) in self.x.iter().zip(&self.y) {
            for i in 0..self.p {
                let a = xk[i].eval(r);
                if a == 0.0 {
                    continue;
                }
                for j in 0..self.p {
                    m[(i, j)] += a * yk[j].eval(rp);
                }
            }
        }
        m
    }

    /// `Ywᵀ diag(s) X`, i.e. `(⟨Y_j, s X_k⟩)_jk`.
    pub fn weighted_coord_matrix(&self, s: &DVector<f64>) -> DMatrix<f64> {
        let Some(blocks) = &self.blocks else {
            let mut dx = self.xs.clone();
            for (r, mut row) in dx.row_iter_mut().enumerate() {
                row *= s[r];
            }
            return self.yw.tr_mul(&dx);
        };
        let nn = self.grid.len();
        let mut out = DMatrix::zeros(self.rank(), self.rank());
        for b in blocks {
            let mut dx = b.xs.clone();
            for (r, mut row) in dx.row_iter_mut().enumerate() {
                row *= s[b.pop * nn + r];
            }
            let m = b.yw.tr_mul(&dx);
            for (bj, &j) in b.ycols.iter().enumerate() {
                for (bk, &k) in b.xcols.iter().enumerate() {
                    out[(j, k)] = m[(bj, bk)];
                }
            }
        }
        out
    }

    /// `M_jk = ⟨Y_j, X_k⟩`: the matrix of J restricted to span{X_k}.
    pub fn coord_matrix(&self) -> DMatrix<f64> {
        self.yw.tr_mul(&self.xs)
    }

    /// Gram matrix `⟨X_k, X_l⟩`.
    pub fn gram_x(&self) -> DMatrix<f64> {
        let mut xw = self.xs.clone();
        for (r, mut row) in xw.row_iter_mut().enumerate() {
            row *= self.w[r];
        }
        xw.tr_mul(&self.xs)
    }

    /// Numerical rank of the X factors (relative tolerance on Gram eigenvalues).
    pub fn x_rank(&self, rel_tol: f64) -> usize {
        let ev = self.gram_x().symmetric_eigenvalues();
        let max = ev.iter().cloned().fold(0.0_f64, f64::max);
        ev.iter().filter(|&&v| v > rel_tol * max).count()
    }

    /// Population supporting each X factor, when it lives on exactly one.
    pub fn x_support(&self) -> Vec<Option<usize>> {
        self.x
            .iter()
            .map(|f| {
                let nz: Vec<usize> = (0..self.p).filter(|&i| !f[i].is_zero()).collect();
                if nz.len() == 1 {
                    Some(nz[0])
                } else {
                    None
                }
            })
            .collect()
    }

    fn derivative_gram(&self, factors: &[Vec<Expr>], m: usize) -> DMatrix<f64> {
        let n = factors.len();
        let d = self.grid.dim;
        let mut alphas = Vec::new();
        for a0 in 0..=m {
            if d == 1 {
                alphas.push(vec![a0]);
            } else {
                for a1 in 0..=(m - a0) {
                    alphas.push(vec![a0, a1]);
                }
            }
        }
        let nn = self.grid.len();
        let mut g = DMatrix::zeros(n, n);
        for alpha in &alphas {
            let mut s = DMatrix::zeros(self.p * nn, n);
            for (k, f) in factors.iter().enumerate() {
                for (i, e) in f.iter().enumerate() {
                    if e.is_zero() {
                        continue;
                    }
                    let de = e.diff_multi(alpha);
                    if de.is_zero() {
                        continue;
                    }
                    for (j, r) in self.grid.nodes.iter().enumerate() {
                        s[(i * nn + j, k)] = de.eval(&r[..d]);
                    }
                }
            }
            let mut sw = s.clone();
            for (r, mut row) in sw.row_iter_mut().enumerate() {
                row *= self.w[r];
            }
            g += sw.tr_mul(&s);
        }
        g
    }

    /// Frobenius norm of J in `W^{m,2}(Ω×Ω)`, all mixed derivatives up to
    /// order m in each variable. `m = 0` is the plain Hilbert-Schmidt norm.
    pub fn sobolev_frobenius_norm(&self, m: usize) -> Result<f64> {
        let gx = self.derivative_gram(&self.x, m);
        let gy = self.derivative_gram(&self.y, m);
        let s: f64 = gx.component_mul(&gy).sum();
        if !s.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(s.max(0.0).sqrt())
    }

    /// Default derivative order of the Frobenius norm: 1 in one dimension, 2 in two.
    pub fn default_sobolev_order(&self) -> usize {
        self.grid.dim
    }

    /// Spectral radius of the L² symmetric part `(J + J*)/2`.
    pub fn sym_spectral_radius(&self) -> f64 {
        let n = self.rank();
        if n == 0 {
            return 0.0;
        }
        let sq = self.w.map(|v| v.sqrt());
        let mut z = DMatrix::zeros(self.field_len(), 2 * n);
        for r in 0..self.field_len() {
            for k in 0..n {
                z[(r, k)] = sq[r] * self.xs[(r, k)];
                z[(r, n + k)] = sq[r] * self.ys[(r, k)];
            }
        }
        let g = z.tr_mul(&z);
        let eig = g.symmetric_eigen();
        let root = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()))
            * eig.eigenvectors.transpose();
        let mut e = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            e[(k, n + k)] = 0.5;
            e[(n + k, k)] = 0.5;
        }
        let b = &root * e * &root;
        let b = (&b + b.transpose()) * 0.5;
        b.symmetric_eigenvalues().iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub fn spectrum(&self) -> SpectrumReport {
        let m = self.coord_matrix();
        let n = m.nrows();
        if n == 0 {
            return SpectrumReport { pairs: vec![] };
        }
        let mut sigmas = crate::eig::eigenvalues(&m).unwrap_or_else(|e| {
            log::warn!("kernel spectrum: {e}");
            vec![]
        });
        sigmas.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        let scale = sigmas.iter().map(|s| s.norm()).fold(0.0, f64::max);
        let tol = 1e-8 * scale.max(f64::MIN_POSITIVE);
        let mc = m.map(|v| Complex::new(v, 0.0));
        let xc = self.xs.map(|v| Complex::new(v, 0.0));
        let w = &self.w;
        let pairs = sigmas
            .iter()
            .enumerate()
            .map(|(idx, &sigma)| {
                let simple = sigmas
                    .iter()
                    .enumerate()
                    .all(|(j, s)| j == idx || (s - sigma).norm() > tol);
                let real = sigma.im.abs() <= 1e-12 * sigma.re.abs().max(1.0);
                let sigma = if real { Complex::new(sigma.re, 0.0) } else { sigma };
                let shift = DMatrix::<Complex<f64>>::identity(n, n) * sigma;
                let mut c = null_vector(&(&mc - &shift));
                let mut d = null_vector(&(mc.transpose() - &shift));
                if real {
                    c = realify(&c);
                    d = realify(&d);
                }
                let e = &xc * &c;
                let en: f64 = e.iter().zip(w.iter()).map(|(z, wi)| z.norm_sqr() * wi).sum::<f64>().sqrt();
                if en > 0.0 {
                    c /= Complex::new(en, 0.0);
                }
                // bilinear pairing ⟨e, e*⟩ = dᵀ M c
                let pair = (d.transpose() * &mc * &c)[(0, 0)];
                if pair.norm() > 0.0 {
                    d /= pair;
                }
                let resid_c = &mc * &c - &c * sigma;
                let rf = &xc * &resid_c;
                let residual =
                    rf.iter().zip(w.iter()).map(|(z, wi)| z.norm_sqr() * wi).sum::<f64>().sqrt();
                Eigenpair { sigma, right: c, adjoint: d, simple, residual }
            })
            .collect();
        SpectrumReport { pairs }
    }
}

fn null_vector(a: &DMatrix<Complex<f64>>) -> DVector<Complex<f64>> {
    let n = a.ncols();
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    DVector::from_iterator(n, vt.row(imin).iter().map(|z| z.conj()))
}

fn realify(v: &DVector<Complex<f64>>) -> DVector<Complex<f64>> {
    let (imax, _) = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
    let phase = v[imax] / Complex::new(v[imax].norm().max(f64::MIN_POSITIVE), 0.0);
    let mut out = v.map(|z| Complex::new((z / phase).re, 0.0));
    let nrm = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if nrm > 0.0 {
        out /= Complex::new(nrm, 0.0);
    }
    out
}

impl SpectrumReport {
    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        self.pairs.iter().map(|p| p.sigma).collect()
    }
}

fn single_support(f: &[Expr]) -> Option<Option<usize>> {
    let nz: Vec<usize> = (0..f.len()).filter(|&i| !f[i].is_zero()).collect();
    match nz.len() {
        0 => Some(None),
        1 => Some(Some(nz[0])),
        _ => None,
    }
}

fn pop_blocks(
    p: usize,
    nn: usize,
    x: &[Vec<Expr>],
    y: &[Vec<Expr>],
    xs: &DMatrix<f64>,
    yw: &DMatrix<f64>,
) -> Option<Vec<PopBlock>> {
    if p == 1 {
        return None;
    }
    let xsup = x.iter().map(|f| single_support(f)).collect::<Option<Vec<_>>>()?;
    let ysup = y.iter().map(|f| single_support(f)).collect::<Option<Vec<_>>>()?;
    let mut out = Vec::new();
    for q in 0..p {
        let xcols: Vec<usize> = (0..x.len()).filter(|&k| xsup[k] == Some(q)).collect();
        let ycols: Vec<usize> = (0..y.len()).filter(|&k| ysup[k] == Some(q)).collect();
        if xcols.is_empty() || ycols.is_empty() {
            continue;
        }
        let gather = |m: &DMatrix<f64>, cols: &[usize]| {
            DMatrix::from_fn(nn, cols.len(), |r, c| m[(q * nn + r, cols[c])])
        };
        out.push(PopBlock { pop: q, xs: gather(xs, &xcols), yw: gather(yw, &ycols), xcols, ycols });
    }
    Some(out)
}
