use nfcont_core::continuation::{ContinuationConfig, SweepSchedule};
use nfcont_core::model_zoo::{build_ring, build_twopop, RingParams, TwoPopParams};
use nfcont_core::{Expr, FieldModel, Homotopy, Nonlinearity, PGKernel, Param, QuadratureGrid};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub params: Option<ParamsConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub continuation: ContConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default = "yes")]
    pub svg: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub lambda: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelConfig {
    Ring(RingConfig),
    Twopop(TwoPopConfig),
    Custom(CustomConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingConfig {
    #[serde(default = "ring_j0")]
    pub j0: f64,
    #[serde(default = "ring_j1")]
    pub j1: f64,
    #[serde(default = "ring_alpha")]
    pub alpha: f64,
    #[serde(default = "ring_beta")]
    pub beta: f64,
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "ring_theta")]
    pub theta: f64,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default = "ring_nodes")]
    pub nodes: usize,
}

fn ring_j0() -> f64 {
    RingParams::default().j0
}
fn ring_j1() -> f64 {
    RingParams::default().j1
}
fn ring_alpha() -> f64 {
    RingParams::default().alpha
}
fn ring_beta() -> f64 {
    RingParams::default().beta
}
fn ring_theta() -> f64 {
    RingParams::default().theta
}
fn ring_nodes() -> usize {
    RingParams::default().nodes
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoPopConfig {
    #[serde(default = "tp_a")]
    pub a: f64,
    #[serde(default = "tp_b")]
    pub b: f64,
    #[serde(default = "tp_c")]
    pub c: f64,
    #[serde(default = "tp_exps")]
    pub exps: [[f64; 2]; 2],
    #[serde(default = "tp_exps")]
    pub exps_prime: [[f64; 2]; 2],
    #[serde(default = "tp_order")]
    pub taylor_order: usize,
    #[serde(default)]
    pub constant: [[f64; 2]; 2],
    #[serde(default = "tp_decay")]
    pub decay: [f64; 2],
    #[serde(default = "tp_theta")]
    pub theta: f64,
    #[serde(default = "tp_nodes")]
    pub nodes: usize,
}

fn tp_a() -> f64 {
    TwoPopParams::default().a
}
fn tp_b() -> f64 {
    TwoPopParams::default().b
}
fn tp_c() -> f64 {
    TwoPopParams::default().c
}
fn tp_exps() -> [[f64; 2]; 2] {
    TwoPopParams::default().exps
}
fn tp_order() -> usize {
    TwoPopParams::default().taylor_order
}
fn tp_decay() -> [f64; 2] {
    TwoPopParams::default().decay
}
fn tp_theta() -> f64 {
    TwoPopParams::default().theta
}
fn tp_nodes() -> usize {
    TwoPopParams::default().nodes
}

/// A PG kernel given factor by factor as expression strings in `x`, `y`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomConfig {
    pub dim: usize,
    #[serde(default = "one_usize")]
    pub populations: usize,
    pub nodes: usize,
    pub domain: Vec<[f64; 2]>,
    #[serde(default = "one")]
    pub normalization: f64,
    pub factors: Vec<FactorConfig>,
    /// One expression per population; zero when absent.
    #[serde(default)]
    pub input: Option<Vec<String>>,
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    #[serde(default)]
    pub tau: Option<Vec<f64>>,
    #[serde(default)]
    pub shift: Option<f64>,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub x: Vec<String>,
    pub y: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Multistart count; `512·N` when absent.
    #[serde(default)]
    pub n_starts: Option<usize>,
    #[serde(default = "tol")]
    pub tol: f64,
    #[serde(default = "max_iter")]
    pub max_iter: usize,
    #[serde(default = "dedupe")]
    pub dedupe_tol: f64,
    #[serde(default = "singular")]
    pub singular_tol: f64,
}

fn tol() -> f64 {
    1e-10
}
fn max_iter() -> usize {
    60
}
fn dedupe() -> f64 {
    1e-6
}
fn singular() -> f64 {
    1e-8
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { n_starts: None, tol: tol(), max_iter: max_iter(), dedupe_tol: dedupe(), singular_tol: singular() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContConfig {
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    pub tol: f64,
    pub max_corrector: usize,
    pub locate_tol: f64,
    pub stability: bool,
}

impl Default for ContConfig {
    fn default() -> Self {
        let c = ContinuationConfig::default();
        ContConfig {
            ds: c.ds,
            ds_min: c.ds_min,
            ds_max: c.ds_max,
            max_steps: c.max_steps,
            tol: c.tol,
            max_corrector: c.max_corrector,
            locate_tol: c.locate_tol,
            stability: c.stability,
        }
    }
}

impl ContConfig {
    pub fn to_core(&self) -> ContinuationConfig {
        ContinuationConfig {
            ds: self.ds,
            ds_min: self.ds_min,
            ds_max: self.ds_max,
            max_steps: self.max_steps,
            tol: self.tol,
            max_corrector: self.max_corrector,
            locate_tol: self.locate_tol,
            stability: self.stability,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    /// Active parameter of `continue`.
    pub param: String,
    pub range: [f64; 2],
    pub legs: Vec<(String, f64)>,
    pub seed_spacing: f64,
    pub switch_depth: usize,
    pub switch_delta: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            param: "lambda".into(),
            range: [0.0, 40.0],
            legs: vec![("mu".into(), 1.0), ("eps".into(), 1.0)],
            seed_spacing: 0.5,
            switch_depth: 1,
            switch_delta: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub t_end: f64,
    pub trajectories: usize,
    /// Explicit initial coordinates; random starts in the solution box otherwise.
    pub initial: Option<Vec<f64>>,
    pub atol: f64,
    pub rtol: f64,
    /// Stored samples per trajectory in the CSV.
    pub output_points: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { t_end: 50.0, trajectories: 4, initial: None, atol: 1e-9, rtol: 1e-7, output_points: 200 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    /// λ values to audit; the configured λ alone when empty.
    pub lambdas: Vec<f64>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig { lambdas: vec![] }
    }
}

pub fn parse_param(s: &str) -> Result<Param, String> {
    match s {
        "lambda" => Ok(Param::Lambda),
        "mu" => Ok(Param::Mu),
        "eps" | "epsilon" => Ok(Param::Eps),
        _ => Err(format!("unknown parameter '{s}' (expected lambda, mu or eps)")),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| format!("config: {e}"))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn homotopy(&self) -> Homotopy {
        match self.params {
            Some(p) => Homotopy::new(p.lambda, p.mu, p.eps),
            None => match &self.model {
                ModelConfig::Ring(_) => RingParams::default().homotopy,
                _ => Homotopy::new(1.0, 0.0, 0.0),
            },
        }
    }

    fn check(&self) -> Result<(), String> {
        self.homotopy().validate().map_err(|e| e.to_string())?;
        let s = &self.schedule;
        parse_param(&s.param)?;
        if !(s.range[1] > s.range[0]) {
            return Err("schedule.range must be increasing".into());
        }
        for (p, t) in &s.legs {
            match parse_param(p)? {
                Param::Lambda => return Err("schedule.legs may only move mu or eps".into()),
                _ if !(0.0..=1.0).contains(t) => return Err(format!("leg target {t} outside [0, 1]")),
                _ => {}
            }
        }
        if !(s.seed_spacing > 0.0) || !(s.switch_delta > 0.0) {
            return Err("schedule.seed_spacing and switch_delta must be positive".into());
        }
        let c = &self.continuation;
        if !(c.ds_min > 0.0 && c.ds_min <= c.ds && c.ds <= c.ds_max && c.tol > 0.0) {
            return Err("continuation: need 0 < ds_min <= ds <= ds_max and tol > 0".into());
        }
        if !(self.solver.tol > 0.0 && self.solver.dedupe_tol > 0.0) {
            return Err("solver tolerances must be positive".into());
        }
        if !(self.simulate.t_end > 0.0) || self.simulate.output_points < 2 {
            return Err("simulate: t_end > 0 and output_points >= 2 required".into());
        }
        Ok(())
    }

    pub fn schedule(&self) -> SweepSchedule {
        let s = &self.schedule;
        let h = self.homotopy();
        SweepSchedule {
            lambda_range: (s.range[0], s.range[1]),
            start: Homotopy::new(0.0, h.mu, h.eps),
            legs: s.legs.iter().map(|(p, t)| (parse_param(p).expect("checked"), *t)).collect(),
            seed_spacing: s.seed_spacing,
            switch_depth: s.switch_depth,
            switch_delta: s.switch_delta,
        }
    }

    pub fn build_model(&self) -> Result<FieldModel, String> {
        let h = self.homotopy();
        let m = match &self.model {
            ModelConfig::Ring(r) => build_ring(&RingParams {
                j0: r.j0,
                j1: r.j1,
                alpha: r.alpha,
                beta: r.beta,
                x0: r.x0,
                theta: r.theta,
                tau: r.tau,
                homotopy: h,
                nodes: r.nodes,
            }),
            ModelConfig::Twopop(t) => build_twopop(&TwoPopParams {
                a: t.a,
                b: t.b,
                c: t.c,
                exps: t.exps,
                exps_prime: t.exps_prime,
                taylor_order: t.taylor_order,
                constant: t.constant,
                decay: t.decay,
                theta: t.theta,
                homotopy: h,
                nodes: t.nodes,
            }),
            ModelConfig::Custom(c) => return build_custom(c, h),
        };
        m.map_err(|e| format!("model: {e}"))
    }
}

fn parse_all(list: &[String], what: &str) -> Result<Vec<Expr>, String> {
    list.iter().map(|s| Expr::parse(s).map_err(|e| format!("{what} '{s}': {e}"))).collect()
}

fn build_custom(c: &CustomConfig, h: Homotopy) -> Result<FieldModel, String> {
    let bounds: Vec<(f64, f64)> = c.domain.iter().map(|d| (d[0], d[1])).collect();
    let grid = Arc::new(QuadratureGrid::build(c.dim, c.nodes, &bounds, c.normalization).map_err(|e| format!("grid: {e}"))?);
    let p = c.populations;
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut names = Vec::new();
    for (k, f) in c.factors.iter().enumerate() {
        x.push(parse_all(&f.x, "factor x")?);
        y.push(parse_all(&f.y, "factor y")?);
        names.push(f.name.clone().unwrap_or_else(|| format!("X{k}")));
    }
    let kernel = PGKernel::new(grid.clone(), p, x, y)
        .and_then(|k| k.with_names(names))
        .map_err(|e| format!("kernel: {e}"))?;
    let input = match &c.input {
        Some(list) => {
            if list.len() != p {
                return Err(format!("input: expected {p} expressions, got {}", list.len()));
            }
            let exprs = parse_all(list, "input")?;
            let mut v = Vec::with_capacity(p * grid.len());
            for e in &exprs {
                v.extend(grid.sample(|r| e.eval(r)));
            }
            nfcont_core::DVector::from_vec(v)
        }
        None => nfcont_core::DVector::zeros(p * grid.len()),
    };
    let nl = match c.shift {
        Some(shift) => Nonlinearity::ShiftedLogistic { shift },
        None => Nonlinearity::Logistic,
    };
    FieldModel::new(
        Arc::new(kernel),
        nl,
        c.tau.clone().unwrap_or_else(|| vec![1.0; p]),
        input,
        c.theta.clone().unwrap_or_else(|| vec![0.0; p]),
        h,
    )
    .map_err(|e| format!("model: {e}"))
}
