mod config;
mod output;

use clap::{Parser, ValueEnum};
use config::{parse_param, RunConfig};
use nfcont_core::bifurcation::candidates;
use nfcont_core::continuation::{
    crossings, detect_special, level_family, multiparameter_sweep, trace, Branch, Direction, SweepLevel,
};
use nfcont_core::dynamics::{integrate, IntegrateOptions};
use nfcont_core::stationary::{characterize, enumerate, newton, parity_audit, shifted_halton, EnumerateOptions};
use nfcont_core::{DVector, FieldModel, Homotopy, Param};
use output::num;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Solve,
    Continue,
    Sweep,
    Bifurcate,
    Simulate,
    Audit,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Continue => "continue",
            Command::Sweep => "sweep",
            Command::Bifurcate => "bifurcate",
            Command::Simulate => "simulate",
            Command::Audit => "audit",
        }
    }
}

/// Continuation and bifurcation analysis of neural field persistent states.
#[derive(Debug, Parser)]
#[command(name = "nfcont", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `out`, default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides the config's `seed`, default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Config(String),
    Solver(String),
}

/// Everything a command produces, written in one go at the end.
struct Outcome {
    solutions: Vec<(Homotopy, nfcont_core::stationary::Solution)>,
    levels: Vec<SweepLevel>,
    report: Option<nfcont_core::bifurcation::BifurcationReport>,
    trajectories: Vec<(usize, f64, DVector<f64>)>,
    summary: Value,
    /// Invariant violations; the run still writes its outputs.
    violations: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { solutions: vec![], levels: vec![], report: None, trajectories: vec![], summary: json!({}), violations: vec![] }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NFCONT_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(violations) if violations.is_empty() => ExitCode::SUCCESS,
        Ok(violations) => {
            for v in violations {
                eprintln!("invariant violated: {v}");
            }
            ExitCode::from(4)
        }
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver failure: {e}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: &Cli) -> Result<Vec<String>, Failure> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", cli.config.display())))?;
    let cfg = RunConfig::from_json(&text).map_err(Failure::Config)?;
    let model = cfg.build_model().map_err(Failure::Config)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let out = cli.out.clone().or_else(|| cfg.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    log::info!("{} on a model of dimension {}", cli.command.name(), model.dim());

    let res = match cli.command {
        Command::Solve => solve(&cfg, &model, seed),
        Command::Continue => cont(&cfg, &model),
        Command::Sweep => sweep(&cfg, &model),
        Command::Bifurcate => bifurcate(&model),
        Command::Simulate => simulate(&cfg, &model, seed),
        Command::Audit => audit(&cfg, &model, seed),
    }?;

    let n = model.dim();
    let tagged = output::tag_levels(&res.levels);
    let mut files = vec![
        ("solutions.csv", output::solutions_table(n, &res.solutions).bytes()),
        ("branches.csv", output::branches_table(n, &tagged).bytes()),
        ("special_points.csv", output::special_table(n, &tagged).bytes()),
        ("bifurcation_report.csv", output::bifurcation_table(res.report.as_ref()).bytes()),
    ];
    if !res.trajectories.is_empty() {
        files.push(("trajectories.csv", output::trajectories_table(n, &res.trajectories).bytes()));
    }
    if cfg.svg && !tagged.is_empty() {
        files.push(("diagram.svg", output::diagram(&model, &tagged).into_bytes()));
    }
    let run_json = json!({
        "command": cli.command.name(),
        "config": serde_json::to_value(&cfg).expect("config serializes"),
        "seed": seed,
        "threads": cli.threads,
        "dimension": n,
        "versions": {
            "nfcont-cli": env!("CARGO_PKG_VERSION"),
            "nfcont-core": nfcont_core::VERSION,
        },
        "summary": res.summary,
        "violations": res.violations,
    });
    let mut js = serde_json::to_vec_pretty(&run_json).expect("json");
    js.push(b'\n');
    files.push(("run.json", js));
    output::write_all(&out, files).map_err(|e| Failure::Config(format!("cannot write to {}: {e}", out.display())))?;
    Ok(res.violations)
}

fn enum_opts(cfg: &RunConfig, n: usize, seed: u64) -> EnumerateOptions {
    let mut o = EnumerateOptions::for_dim(n, seed);
    if let Some(s) = cfg.solver.n_starts {
        o.n_starts = s;
    }
    o.tol = cfg.solver.tol;
    o.max_iter = cfg.solver.max_iter;
    o.dedupe_tol = cfg.solver.dedupe_tol;
    o.singular_tol = cfg.solver.singular_tol;
    o
}

fn parity_json(p: &nfcont_core::stationary::ParityReport) -> Value {
    json!({ "count": p.count, "degree": p.degree, "conclusive": p.conclusive, "passed": p.passed })
}

fn solve(cfg: &RunConfig, model: &FieldModel, seed: u64) -> Result<Outcome, Failure> {
    let set = enumerate(model, &enum_opts(cfg, model.dim(), seed)).map_err(|e| Failure::Solver(e.to_string()))?;
    let parity = parity_audit(&set);
    let mut o = Outcome::new();
    if parity.conclusive && !parity.passed {
        o.violations.push(format!("parity audit: {} solutions, degree {}", parity.count, parity.degree));
    }
    o.summary = json!({ "parity": parity_json(&parity), "starts": set.n_starts, "failed_starts": set.n_failed });
    let p = model.params;
    o.solutions = set.solutions.into_iter().map(|s| (p, s)).collect();
    Ok(o)
}

fn level_summary(levels: &[SweepLevel]) -> Value {
    let tagged = output::tag_levels(levels);
    let branches: Vec<Value> = tagged
        .iter()
        .map(|t| {
            json!({
                "id": t.id,
                "level": t.level,
                "provenance": t.branch.provenance,
                "samples": t.branch.samples.len(),
                "disconnected": t.branch.disconnected,
                "special": t.branch.special.iter().map(|s| json!({"kind": s.kind.name(), "lambda": num(s.params.lambda)})).collect::<Vec<_>>(),
            })
        })
        .collect();
    let lv: Vec<Value> = levels
        .iter()
        .map(|l| json!({"mu": l.params.mu, "eps": l.params.eps, "branches": l.branches.len(), "failures": l.failures}))
        .collect();
    json!({ "levels": lv, "branches": branches })
}

fn cont(cfg: &RunConfig, model: &FieldModel) -> Result<Outcome, Failure> {
    let active = parse_param(&cfg.schedule.param).map_err(Failure::Config)?;
    let ccfg = cfg.continuation.to_core();
    let h = model.params;
    let mut o = Outcome::new();
    if active == Param::Lambda {
        let lv = level_family(model, h, &[], &cfg.schedule(), &ccfg);
        if lv.branches.is_empty() {
            return Err(Failure::Solver(format!("no branch traced: {:?}", lv.failures)));
        }
        o.levels = vec![lv];
    } else {
        let range = (cfg.schedule.range[0], cfg.schedule.range[1]);
        if range.0 < 0.0 || range.1 > 1.0 {
            return Err(Failure::Config(format!("{} range must lie in [0, 1]", active.name())));
        }
        let start = h.with(active, h.get(active).clamp(range.0, range.1));
        let pm = model.with_params(start);
        let v0 = newton(&pm, &pm.lambda_zero_state(&start), ccfg.tol, 100)
            .map_err(|e| Failure::Solver(format!("start point: {e}")))?
            .v;
        let mut branches = Vec::new();
        let mut failures = Vec::new();
        for (dir, tag) in [(Direction::Decreasing, "down"), (Direction::Increasing, "up")] {
            match trace(model, start, &v0, active, range, dir, &ccfg) {
                Ok(mut b) => {
                    b.special = detect_special(model, &b, &ccfg);
                    b.provenance = format!("{}:{tag}", active.name());
                    b.id = branches.len();
                    branches.push(b);
                }
                Err(e) => failures.push(e.to_string()),
            }
        }
        if branches.is_empty() {
            return Err(Failure::Solver(failures.join("; ")));
        }
        o.levels = vec![SweepLevel { params: start, branches, failures }];
    }
    o.summary = level_summary(&o.levels);
    Ok(o)
}

fn crossing_solutions(cfg: &RunConfig, model: &FieldModel, branches: &[&Branch]) -> Vec<(Homotopy, nfcont_core::stationary::Solution)> {
    let lam = model.params.lambda;
    let mut found: Vec<DVector<f64>> = Vec::new();
    for b in branches {
        for (_, v) in crossings(model, b, &[lam], cfg.solver.tol) {
            if found.iter().all(|f| (f - &v).amax() >= cfg.solver.dedupe_tol) {
                found.push(v);
            }
        }
    }
    found.sort_by(|a, b| {
        a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let base = branches.first().and_then(|b| b.samples.first()).map(|s| s.params).unwrap_or(model.params);
    let at = base.with(Param::Lambda, lam);
    let pm = model.with_params(at);
    found
        .into_iter()
        .filter_map(|v| characterize(&pm, v, cfg.solver.singular_tol).ok().map(|s| (at, s)))
        .collect()
}

fn sweep(cfg: &RunConfig, model: &FieldModel) -> Result<Outcome, Failure> {
    let levels = multiparameter_sweep(model, &cfg.schedule(), &cfg.continuation.to_core());
    if levels.iter().all(|l| l.branches.is_empty()) {
        return Err(Failure::Solver("sweep traced no branch".into()));
    }
    let mut o = Outcome::new();
    if let Some(last) = levels.last() {
        let refs: Vec<&Branch> = last.branches.iter().collect();
        o.solutions = crossing_solutions(cfg, &model.with_params(last.params), &refs);
    }
    o.summary = level_summary(&levels);
    o.levels = levels;
    Ok(o)
}

fn bifurcate(model: &FieldModel) -> Result<Outcome, Failure> {
    let rep = candidates(model).map_err(|e| Failure::Solver(e.to_string()))?;
    let mut o = Outcome::new();
    o.summary = json!({
        "taylor": rep.taylor,
        "pitchforks": rep.pitchfork_count(),
        "stationary": rep.stationary().iter().map(|e| json!({"lambda": e.lambda, "type": e.kind.name(), "label": e.label})).collect::<Vec<_>>(),
    });
    o.report = Some(rep);
    Ok(o)
}

fn simulate(cfg: &RunConfig, model: &FieldModel, seed: u64) -> Result<Outcome, Failure> {
    let n = model.dim();
    let sc = &cfg.simulate;
    let starts: Vec<DVector<f64>> = match &sc.initial {
        Some(v) if v.len() != n => {
            return Err(Failure::Config(format!("simulate.initial: expected {n} coordinates, got {}", v.len())))
        }
        Some(v) => vec![DVector::from_column_slice(v)],
        None => {
            let (c, r) = model.solution_box();
            shifted_halton(sc.trajectories, n, seed)
                .into_iter()
                .map(|u| DVector::from_fn(n, |k, _| c[k] + r[k] * (2.0 * u[k] - 1.0)))
                .collect()
        }
    };
    let opts = IntegrateOptions { atol: sc.atol, rtol: sc.rtol, ..Default::default() };
    let mut o = Outcome::new();
    let mut finals = Vec::new();
    for (k, v0) in starts.iter().enumerate() {
        let tr = integrate(model, v0, None, sc.t_end, &opts).map_err(|e| Failure::Solver(format!("trajectory {k}: {e}")))?;
        for i in 0..sc.output_points {
            let t = sc.t_end * i as f64 / (sc.output_points - 1) as f64;
            if let Some((v, _)) = tr.dense(t) {
                o.trajectories.push((k, t, v));
            }
        }
        let end = tr.last().clone();
        let settled = newton(model, &end, cfg.solver.tol, 20).ok().filter(|r| (&r.v - &end).amax() < 1e-3);
        finals.push(json!({
            "trajectory": k,
            "steps": tr.stats.accepted,
            "settled": settled.is_some(),
        }));
        if let Some(r) = settled {
            if o.solutions.iter().all(|(_, s)| (&s.v - &r.v).amax() >= cfg.solver.dedupe_tol) {
                if let Ok(s) = characterize(model, r.v, cfg.solver.singular_tol) {
                    o.solutions.push((model.params, s));
                }
            }
        }
    }
    o.summary = json!({ "trajectories": finals });
    Ok(o)
}

fn audit(cfg: &RunConfig, model: &FieldModel, seed: u64) -> Result<Outcome, Failure> {
    let lams = if cfg.audit.lambdas.is_empty() { vec![model.params.lambda] } else { cfg.audit.lambdas.clone() };
    let bounds = model.bounds().map_err(|e| Failure::Solver(e.to_string()))?;
    let mut o = Outcome::new();
    let mut entries = Vec::new();
    for &lam in &lams {
        let p = model.params.with(Param::Lambda, lam);
        p.validate().map_err(|e| Failure::Config(e.to_string()))?;
        let pm = model.with_params(p);
        let set = enumerate(&pm, &enum_opts(cfg, pm.dim(), seed)).map_err(|e| Failure::Solver(e.to_string()))?;
        let parity = parity_audit(&set);
        if parity.conclusive && !parity.passed {
            o.violations.push(format!("parity audit at lambda={lam}: {} solutions, degree {}", parity.count, parity.degree));
        }
        let v0 = pm.lambda_zero_field(&p);
        let mut worst = (0.0_f64, 0.0_f64);
        for s in &set.solutions {
            let f = pm.potential(&s.v);
            let nv = pm.kernel.norm(&f).unwrap_or(f64::NAN);
            let nd = pm.kernel.norm(&(&f - &v0)).unwrap_or(f64::NAN);
            worst = (worst.0.max(nv), worst.1.max(nd));
        }
        if worst.0 > bounds.b1 || worst.1 > bounds.b2 {
            o.violations.push(format!("bound violated at lambda={lam}: |V| = {}, |V-V0| = {}", worst.0, worst.1));
        }
        entries.push(json!({
            "lambda": lam,
            "parity": parity_json(&parity),
            "max_norm": worst.0,
            "max_deviation": worst.1,
        }));
        o.solutions.extend(set.solutions.into_iter().map(|s| (p, s)));
    }
    o.summary = json!({
        "bounds": {
            "b1": bounds.b1,
            "b2": bounds.b2,
            "lambda_star": bounds.lambda_star,
            "lambda_star_l2": bounds.lambda_star_l2,
            "lambda_l": bounds.lambda_l,
        },
        "audits": entries,
    });
    Ok(o)
}
