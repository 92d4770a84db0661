//! Local bifurcation theory at the trivial state `V = 0` (μ = ε = 0):
//! candidate slopes, Lyapunov-Schmidt coefficients, reduced equations and the
//! first Lyapunov coefficient of the two-population breather example.

use crate::error::{Error, Result};
use crate::model::{FieldModel, Param};
use crate::model_zoo::RingParams;
use crate::pg_kernel::Eigenpair;
use nalgebra::{Complex, DMatrix, DVector, Matrix3, Vector3};

/// Inner products below this are treated as zero when scanning for q.
pub const INNER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    Pitchfork,
    Transcritical,
    HopfCandidate,
    /// Both `⟨e², e*⟩` and `⟨e³, e*⟩` vanish (or s₂ = s₃ = 0).
    Degenerate,
    NonSimple,
    /// `Re σ <= 0`: no positive slope crosses.
    Inadmissible,
}

impl CandidateKind {
    pub fn name(&self) -> &'static str {
        match self {
            CandidateKind::Pitchfork => "pitchfork",
            CandidateKind::Transcritical => "transcritical",
            CandidateKind::HopfCandidate => "hopf-candidate",
            CandidateKind::Degenerate => "degenerate",
            CandidateKind::NonSimple => "non-simple",
            CandidateKind::Inadmissible => "inadmissible",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Branch leaves toward λ > λ_n (χ < 0).
    Supercritical,
    /// Branch leaves toward λ < λ_n (χ > 0).
    Subcritical,
    /// q = 2: the branch crosses, one leg on each side.
    Transverse,
}

impl Orientation {
    pub fn name(&self) -> &'static str {
        match self {
            Orientation::Supercritical => "supercritical",
            Orientation::Subcritical => "subcritical",
            Orientation::Transverse => "transverse",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BifurcationEntry {
    /// Position in the spectrum, sorted by decreasing real part.
    pub index: usize,
    pub sigma: Complex<f64>,
    /// Factor names carrying the eigenvector, e.g. `"1+cos"` or `"sin"`.
    pub label: String,
    pub simple: bool,
    /// `1 / (s₁ σ)` for admissible real eigenvalues.
    pub lambda: Option<f64>,
    /// `1 / (s₁ Re σ)` for complex pairs with `Re σ > 0`.
    pub lambda_hopf: Option<f64>,
    pub kind: CandidateKind,
    pub q: Option<usize>,
    pub chi: Option<f64>,
    pub orientation: Option<Orientation>,
    /// `⟨e², e*⟩` and `⟨e³, e*⟩`.
    pub inner: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct BifurcationReport {
    /// Sigmoid derivatives `s₁..s₄` at the operating point.
    pub taylor: [f64; 4],
    pub entries: Vec<BifurcationEntry>,
}

impl BifurcationReport {
    /// Admissible stationary candidates (real, simple or not), by increasing λ.
    pub fn stationary(&self) -> Vec<&BifurcationEntry> {
        let mut v: Vec<&BifurcationEntry> = self.entries.iter().filter(|e| e.lambda.is_some()).collect();
        v.sort_by(|a, b| a.lambda.unwrap().total_cmp(&b.lambda.unwrap()));
        v
    }

    pub fn pitchfork_count(&self) -> usize {
        self.entries.iter().filter(|e| e.kind == CandidateKind::Pitchfork).count()
    }
}

fn label(model: &FieldModel, c: &DVector<Complex<f64>>) -> String {
    let names = model.kernel.names();
    let mx = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let parts: Vec<&str> = c
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > 1e-8 * mx)
        .map(|(k, _)| names[k].as_str())
        .collect();
    if parts.len() > 4 {
        format!("{}+...({} factors)", parts[..3].join("+"), parts.len())
    } else {
        parts.join("+")
    }
}

/// `⟨e^q, e*⟩₂` for a real eigenpair, by quadrature.
pub fn power_inner(model: &FieldModel, pair: &Eigenpair, q: usize) -> f64 {
    let k = &model.kernel;
    let e = k.synthesize(&pair.right_real());
    let es = k.y_samples() * pair.adjoint_real();
    let w = k.field_weights();
    e.iter().zip(es.iter()).zip(w.iter()).map(|((a, b), wi)| a.powi(q as i32) * b * wi).sum()
}

/// `χ_q = λ^{q-1} s_q / (q! s₁) ⟨e^q, e*⟩` at `λ = 1/(s₁σ)`.
pub fn chi(model: &FieldModel, pair: &Eigenpair, q: usize) -> Result<f64> {
    if !(2..=4).contains(&q) {
        return Err(Error::Invalid(format!("chi: order q = {q} outside 2..=4")));
    }
    if !pair.is_real() {
        return Err(Error::Invalid("chi needs a real eigenvalue".into()));
    }
    let s = model.nonlinearity.taylor()?;
    if s[q - 1].abs() < 1e-14 {
        return Err(Error::Degenerate(format!("s_{q} = 0 for this sigmoid; increase q")));
    }
    let sigma = pair.sigma.re;
    if !(sigma > 0.0) {
        return Err(Error::Invalid("chi needs a positive eigenvalue".into()));
    }
    let lam = 1.0 / (s[0] * sigma);
    let fact: f64 = (1..=q).map(|i| i as f64).product();
    Ok(lam.powi(q as i32 - 1) * s[q - 1] / (fact * s[0]) * power_inner(model, pair, q))
}

/// Candidate bifurcation points of the trivial branch.
pub fn candidates(model: &FieldModel) -> Result<BifurcationReport> {
    let s = model.nonlinearity.taylor()?;
    let spec = model.kernel.spectrum();
    let mut entries = Vec::new();
    for (index, pair) in spec.pairs.iter().enumerate() {
        let sigma = pair.sigma;
        let mut e = BifurcationEntry {
            index,
            sigma,
            label: label(model, &pair.right),
            simple: pair.simple,
            lambda: None,
            lambda_hopf: None,
            kind: CandidateKind::Inadmissible,
            q: None,
            chi: None,
            orientation: None,
            inner: [0.0; 2],
        };
        if !pair.is_real() {
            if sigma.re > 0.0 {
                e.kind = CandidateKind::HopfCandidate;
                e.lambda_hopf = Some(1.0 / (s[0] * sigma.re));
            }
            entries.push(e);
            continue;
        }
        if !(sigma.re > 0.0) {
            entries.push(e);
            continue;
        }
        e.lambda = Some(1.0 / (s[0] * sigma.re));
        e.inner = [power_inner(model, pair, 2), power_inner(model, pair, 3)];
        if !pair.simple {
            e.kind = CandidateKind::NonSimple;
            entries.push(e);
            continue;
        }
        e.kind = CandidateKind::Degenerate;
        for q in 2..=3 {
            if s[q - 1].abs() < 1e-14 || e.inner[q - 2].abs() <= INNER_TOL {
                continue;
            }
            let c = chi(model, pair, q)?;
            e.q = Some(q);
            e.chi = Some(c);
            if q == 2 {
                e.kind = CandidateKind::Transcritical;
                e.orientation = Some(Orientation::Transverse);
            } else {
                e.kind = CandidateKind::Pitchfork;
                e.orientation = Some(if c < 0.0 { Orientation::Supercritical } else { Orientation::Subcritical });
            }
            break;
        }
        entries.push(e);
    }
    Ok(BifurcationReport { taylor: s, entries })
}

/// Real roots of `(λσs₁ - 1)x + χ x^q + Ī`, repeated by multiplicity.
///
/// `sigma_s1` is the product `σ_n s₁` (for the logistic sigmoid, `σ_n/4`).
pub fn reduced_roots(lambda: f64, sigma_s1: f64, chi: f64, q: usize, ibar: f64) -> Result<Vec<f64>> {
    if chi == 0.0 {
        return Err(Error::Degenerate("reduced equation with chi = 0".into()));
    }
    let a = lambda * sigma_s1 - 1.0;
    let mut roots = match q {
        2 => quadratic(chi, a, ibar),
        3 => cubic(chi, 0.0, a, ibar),
        _ => return Err(Error::Invalid(format!("reduced equation needs q in {{2, 3}}, got {q}"))),
    };
    roots.sort_by(|a, b| a.total_cmp(b));
    Ok(roots)
}

fn quadratic(a: f64, b: f64, c: f64) -> Vec<f64> {
    let d = b * b - 4.0 * a * c;
    if d < 0.0 {
        return vec![];
    }
    // cancellation-free pair
    let t = -0.5 * (b + b.signum() * d.sqrt());
    if t == 0.0 {
        return vec![0.0, 0.0];
    }
    vec![t / a, c / t]
}

/// Real roots of `a x³ + b x² + c x + d` (trigonometric / Cardano).
fn cubic(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let (b, c, d) = (b / a, c / a, d / a);
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let scale = 1.0 + p.abs().powf(1.5) + q.abs();
    if disc.abs() <= 1e-14 * scale * scale {
        if p.abs() <= 1e-14 * scale {
            return vec![shift; 3];
        }
        let u = (q / 2.0).cbrt();
        let mut r = vec![-2.0 * u + shift, u + shift, u + shift];
        r.sort_by(|a, b| a.total_cmp(b));
        return r;
    }
    if disc > 0.0 {
        let sq = disc.sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        return vec![u + v + shift];
    }
    let r = (-p / 3.0).sqrt();
    let phi = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0).acos();
    (0..3)
        .map(|k| 2.0 * r * ((phi + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos() + shift)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfL1 {
    pub value: f64,
    pub omega: f64,
    /// s₂ = 0: the leading prefactor vanishes.
    pub degenerate: bool,
}

/// First Lyapunov coefficient of the two-population breather example,
/// `l₁ = -λ³ s₂² / (4ω² s₁) (1 - |g| s₃ s₁ / s₂²)`, `ω = |g| / (2 g₁)`.
/// Evaluated in the expanded form so that `s₂ = 0` stays finite.
pub fn hopf_l1(g1: f64, g2: f64, lambda_h: f64, taylor: [f64; 4]) -> Result<HopfL1> {
    if !(g1 > 0.0) {
        return Err(Error::Invalid("hopf_l1: g1 must be positive".into()));
    }
    let [s1, s2, s3, _] = taylor;
    let g = g1.hypot(g2);
    let omega = g / (2.0 * g1);
    let value = -lambda_h.powi(3) / (4.0 * omega * omega * s1) * (s2 * s2 - g * s3 * s1);
    Ok(HopfL1 { value, omega, degenerate: s2 == 0.0 })
}

/// First Lyapunov coefficient of a Hopf point of the reduced ODE
/// `v̇ = Λ(-v + Ywᵀ S₀(λXv))` at `v = 0`, from the standard multilinear-form
/// formula. Independent of any kernel structure; used as a cross-check.
pub fn hopf_l1_numeric(model: &FieldModel, lambda: f64) -> Result<(f64, f64)> {
    let s = model.nonlinearity.taylor()?;
    let k = &model.kernel;
    let n = model.dim();
    let rates = model.coordinate_rates()?;
    let x = k.x_samples();
    let yw = k.y_weighted();
    let mut a = -yw.tr_mul(x) * (lambda * s[0]);
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    let mut a = -a;
    for (i, mut row) in a.row_iter_mut().enumerate() {
        row *= rates[i];
    }
    let eig = crate::eig::eigenvalues(&a)?;
    let (imax, lam_c) = eig
        .iter()
        .enumerate()
        .filter(|(_, z)| z.im > 0.0)
        .min_by(|a, b| a.1.re.abs().total_cmp(&b.1.re.abs()))
        .map(|(i, z)| (i, *z))
        .ok_or_else(|| Error::Degenerate("no complex pair in the linearization".into()))?;
    let _ = imax;
    let omega = lam_c.im;
    let ac = a.map(|v| Complex::new(v, 0.0));
    let null = |m: DMatrix<Complex<f64>>| -> DVector<Complex<f64>> {
        let svd = m.svd(false, true);
        let vt = svd.v_t.expect("v_t");
        let (i, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
        DVector::from_iterator(vt.ncols(), vt.row(i).iter().map(|z| z.conj()))
    };
    let iw = Complex::new(0.0, omega);
    let eye = DMatrix::<Complex<f64>>::identity(n, n);
    let q = null(&ac - &eye * iw);
    let p = null(ac.transpose() + &eye * iw);
    let pq: Complex<f64> = p.iter().zip(q.iter()).map(|(a, b)| a.conj() * b).sum();
    let p = p * (Complex::new(1.0, 0.0) / pq.conj());
    let xc = x.map(|v| Complex::new(v, 0.0));
    let ywc = yw.map(|v| Complex::new(v, 0.0));
    let rc = rates.map(|v| Complex::new(v, 0.0));
    let form = |coef: f64, fields: &[&DVector<Complex<f64>>]| -> DVector<Complex<f64>> {
        let mut prod = DVector::from_element(x.nrows(), Complex::new(coef, 0.0));
        for f in fields {
            let xf = &xc * *f;
            prod.component_mul_assign(&xf);
        }
        ywc.tr_mul(&prod).component_mul(&rc)
    };
    let b = |u: &DVector<Complex<f64>>, v: &DVector<Complex<f64>>| form(lambda * lambda * s[1], &[u, v]);
    let c3 = |u: &DVector<Complex<f64>>, v: &DVector<Complex<f64>>, w: &DVector<Complex<f64>>| {
        form(lambda.powi(3) * s[2], &[u, v, w])
    };
    let qb = q.map(|z| z.conj());
    let dot = |p: &DVector<Complex<f64>>, v: &DVector<Complex<f64>>| -> Complex<f64> {
        p.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
    };
    let bqqb = b(&q, &qb);
    let h11 = ac
        .clone()
        .lu()
        .solve(&bqqb)
        .ok_or_else(|| Error::Degenerate("singular linearization at the hopf point".into()))?;
    let bqq = b(&q, &q);
    let h20 = (&eye * (iw * 2.0) - &ac)
        .lu()
        .solve(&bqq)
        .ok_or_else(|| Error::Degenerate("resonant hopf point".into()))?;
    let t = dot(&p, &c3(&q, &q, &qb)) - dot(&p, &b(&q, &h11)) * 2.0 + dot(&p, &b(&qb, &h20));
    Ok((t.re / (2.0 * omega), omega))
}

/// Persisting pitchfork of the sin-axis branch of the ring model at homotopy
/// level μ: solves `r₁ = r₂ = 0`, `∂r₃/∂v₃ = 0` on the plane `v₃ = 0` for
/// `(v₁, v₂, λ)`, continued in μ from `(0, 0, λ₁)` at μ = 0.
pub fn pitchfork_persistence(params: &RingParams, mu: f64) -> Result<(f64, f64, f64)> {
    if params.x0 != 0.0 && params.homotopy.eps != 0.0 && params.beta != 0.0 {
        return Err(Error::Invalid("pitchfork persistence needs the v3 -> -v3 symmetry (x0 = 0)".into()));
    }
    let model = crate::model_zoo::build_ring(params)?;
    let (s, _, _) = crate::model_zoo::ring_k_eigenvalues(params);
    let s1 = model.nonlinearity.taylor()?[0];
    if !(s > 0.0) {
        return Err(Error::Invalid("sin-axis eigenvalue is not positive".into()));
    }
    let h = |z: &Vector3<f64>, m: f64| -> Result<Vector3<f64>> {
        let p = model.params.with(Param::Mu, m).with(Param::Lambda, z[2]);
        let v = DVector::from_vec(vec![z[0], z[1], 0.0]);
        let lin = model.linearize_at(&v, &p)?;
        Ok(Vector3::new(lin.residual[0], lin.residual[1], lin.jacobian[(2, 2)]))
    };
    let solve = |z0: Vector3<f64>, m: f64| -> Option<Vector3<f64>> {
        let mut z = z0;
        for _ in 0..50 {
            let f = h(&z, m).ok()?;
            if f.norm() < 1e-12 {
                return Some(z);
            }
            let mut jac = Matrix3::zeros();
            for c in 0..3 {
                let step = 1e-7 * (1.0 + z[c].abs());
                let mut zp = z;
                zp[c] += step;
                let mut zm = z;
                zm[c] -= step;
                jac.set_column(c, &((h(&zp, m).ok()? - h(&zm, m).ok()?) / (2.0 * step)));
            }
            z -= jac.lu().solve(&f)?;
        }
        None
    };
    // natural continuation in μ; a large jump means the corrector changed branch
    let mut z = Vector3::new(0.0, 0.0, 1.0 / (s1 * s));
    let mut m = 0.0;
    let mut dm = 0.01_f64.min(mu.abs()).copysign(mu);
    while m != mu {
        let next = if (mu - m).abs() <= dm.abs() { mu } else { m + dm };
        match solve(z, next) {
            Some(zn) if (zn - z).norm() <= 0.5 + 50.0 * dm.abs() => {
                z = zn;
                m = next;
                dm *= 1.5;
            }
            _ => {
                dm *= 0.5;
                if dm.abs() < 1e-7 {
                    return Err(Error::Newton(format!(
                        "pitchfork system lost at mu = {m}, lambda = {}; outside local validity",
                        z[2]
                    )));
                }
            }
        }
    }
    Ok((z[0], z[1], z[2]))
}
