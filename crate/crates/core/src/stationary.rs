//! Newton solves, multistart enumeration of persistent states and the degree audit.

use crate::error::{Error, Result};
use crate::model::FieldModel;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub v: DVector<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

pub fn newton(model: &FieldModel, v0: &DVector<f64>, tol: f64, max_iter: usize) -> Result<NewtonResult> {
    if !(tol > 0.0) {
        return Err(Error::Invalid("newton tolerance must be positive".into()));
    }
    let mut v = v0.clone();
    let mut r = model.residual(&v)?;
    let mut rn = r.norm();
    for it in 0..=max_iter {
        if rn < tol {
            return Ok(NewtonResult { v, iterations: it, residual_norm: rn });
        }
        if it == max_iter {
            break;
        }
        let jac = model.jacobian(&v)?;
        let step = solve_or_lstsq(jac, &r).ok_or_else(|| Error::Newton("singular jacobian".into()))?;
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha >= 1.0 / 256.0 {
            let trial = &v - &step * alpha;
            if trial.iter().all(|x| x.is_finite()) {
                if let Ok(rt) = model.residual(&trial) {
                    let rtn = rt.norm();
                    if rtn < (1.0 - 1e-4 * alpha) * rn || rtn < tol {
                        v = trial;
                        r = rt;
                        rn = rtn;
                        accepted = true;
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::Newton(format!("no damping progress at |r| = {rn:.3e}")));
        }
        if v.amax() > 1e8 {
            return Err(Error::Newton("iterate diverged".into()));
        }
    }
    Err(Error::Newton(format!("no convergence in {max_iter} iterations, |r| = {rn:.3e}")))
}

/// Extra Newton steps past the tolerance, while the residual keeps dropping.
/// Near-singular directions leave a converged iterate far from the root
/// otherwise.
pub fn polish(model: &FieldModel, v: DVector<f64>, max_iter: usize) -> DVector<f64> {
    let mut v = v;
    let Ok(mut r) = model.residual(&v) else { return v };
    let mut rn = r.norm();
    for _ in 0..max_iter {
        if rn < 1e-15 * (1.0 + v.amax()) {
            break;
        }
        let Ok(jac) = model.jacobian(&v) else { break };
        let Some(step) = solve_or_lstsq(jac, &r) else { break };
        let trial = &v - &step;
        let Ok(rt) = model.residual(&trial) else { break };
        let rtn = rt.norm();
        if !(rtn < rn) {
            break;
        }
        v = trial;
        r = rt;
        rn = rtn;
        if step.amax() < 1e-15 * (1.0 + v.amax()) {
            break;
        }
    }
    v
}

pub(crate) fn solve_or_lstsq(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(x) = a.clone().lu().solve(b) {
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(b, 1e-12 * smax.max(f64::MIN_POSITIVE)).ok().filter(|x| x.iter().all(|v| v.is_finite()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub v: DVector<f64>,
    /// Number of dynamics eigenvalues with positive real part.
    pub unstable: usize,
    /// Sign of `det(Id - λ M DS)`; 0 when singular within tolerance.
    pub det_sign: i8,
    pub min_singular: f64,
    pub residual_norm: f64,
}

impl Solution {
    pub fn regular(&self) -> bool {
        self.det_sign != 0
    }
}

#[derive(Debug, Clone)]
pub struct SolutionSet {
    pub solutions: Vec<Solution>,
    pub dedupe_tol: f64,
    pub n_starts: usize,
    pub n_failed: usize,
}

impl SolutionSet {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn all_regular(&self) -> bool {
        self.solutions.iter().all(|s| s.regular())
    }

    /// Odd cardinality, meaningful only when every solution is regular.
    pub fn parity_ok(&self) -> Option<bool> {
        self.all_regular().then_some(self.len() % 2 == 1)
    }
}

#[derive(Debug, Clone)]
pub struct EnumerateOptions {
    pub n_starts: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub dedupe_tol: f64,
    /// Singular-value threshold below which a Jacobian counts as singular.
    pub singular_tol: f64,
}

impl EnumerateOptions {
    pub fn for_dim(n: usize, seed: u64) -> Self {
        EnumerateOptions { n_starts: 512 * n.max(1), seed, tol: 1e-10, max_iter: 60, dedupe_tol: 1e-6, singular_tol: 1e-8 }
    }
}

const SMALL_PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn primes(n: usize) -> Vec<u64> {
    let mut out: Vec<u64> = SMALL_PRIMES.iter().copied().take(n).collect();
    let mut c = 59;
    while out.len() < n {
        if out.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            out.push(c);
        }
        c += 2;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let b = base as f64;
    let mut f = 1.0 / b;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f /= b;
    }
    r
}

/// Halton points with a random Cranley-Patterson rotation, in `[0, 1)^dim`.
pub fn shifted_halton(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    let bases = primes(dim);
    (0..count)
        .map(|i| {
            (0..dim)
                .map(|d| {
                    let x = radical_inverse(i as u64 + 1, bases[d]) + shift[d];
                    x - x.floor()
                })
                .collect()
        })
        .collect()
}

/// Newton from anchors (0 and the λ = 0 state) and quasi-random starts in the
/// coordinate box that provably contains every solution.
pub fn enumerate(model: &FieldModel, opts: &EnumerateOptions) -> Result<SolutionSet> {
    let n = model.dim();
    let (center, radius) = model.solution_box();
    let mut starts = vec![DVector::zeros(n), center.clone()];
    for u in shifted_halton(opts.n_starts, n, opts.seed) {
        starts.push(DVector::from_iterator(n, (0..n).map(|k| center[k] + radius[k] * (2.0 * u[k] - 1.0))));
    }
    let results: Vec<Option<DVector<f64>>> = starts
        .par_iter()
        .map(|s| newton(model, s, opts.tol, opts.max_iter).ok().map(|r| polish(model, r.v, 60)))
        .collect();
    let n_failed = results.iter().filter(|r| r.is_none()).count();
    let mut found: Vec<DVector<f64>> = results.into_iter().flatten().collect();
    found.sort_by(|a, b| lex_cmp(a, b));
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for v in found {
        if kept.iter().all(|k| (k - &v).amax() >= opts.dedupe_tol) {
            kept.push(v);
        }
    }
    let solutions = kept
        .into_iter()
        .map(|v| characterize(model, v, opts.singular_tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(SolutionSet { solutions, dedupe_tol: opts.dedupe_tol, n_starts: starts.len(), n_failed })
}

pub(crate) fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Stability, determinant sign and conditioning of a converged state.
pub fn characterize(model: &FieldModel, v: DVector<f64>, singular_tol: f64) -> Result<Solution> {
    let lin = model.linearize_at(&v, &model.params)?;
    let jac = lin.jacobian;
    let min_singular = jac.clone().singular_values().min();
    let det = jac.clone().lu().determinant();
    let det_sign = if min_singular < singular_tol || det == 0.0 { 0 } else { det.signum() as i8 };
    let unstable = unstable_count(model, &jac)?;
    Ok(Solution { v, unstable, det_sign, min_singular, residual_norm: lin.residual.norm() })
}

/// Eigenvalues of the dynamics Jacobian `-Λ (Id - λ M DS)`.
pub fn dynamics_eigenvalues(model: &FieldModel, jac: &DMatrix<f64>) -> Result<Vec<nalgebra::Complex<f64>>> {
    let rates = model.coordinate_rates()?;
    let mut a = -jac.clone();
    for (k, mut row) in a.row_iter_mut().enumerate() {
        row *= rates[k];
    }
    crate::eig::eigenvalues(&a)
}

fn unstable_count(model: &FieldModel, jac: &DMatrix<f64>) -> Result<usize> {
    Ok(dynamics_eigenvalues(model, jac)?.iter().filter(|z| z.re > 1e-8).count())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityReport {
    pub signs: Vec<i8>,
    pub degree: i64,
    pub count: usize,
    /// False when some solution had a singular Jacobian.
    pub conclusive: bool,
    pub passed: bool,
}

/// Sum of determinant signs over a solution set; must equal +1 for a complete
/// set of regular solutions.
pub fn parity_audit(set: &SolutionSet) -> ParityReport {
    let signs: Vec<i8> = set.solutions.iter().map(|s| s.det_sign).collect();
    let conclusive = signs.iter().all(|&s| s != 0);
    let degree: i64 = signs.iter().map(|&s| s as i64).sum();
    let count = set.len();
    ParityReport { signs, degree, count, conclusive, passed: conclusive && degree == 1 && count % 2 == 1 }
}
