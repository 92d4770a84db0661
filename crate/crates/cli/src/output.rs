use nfcont_core::bifurcation::BifurcationReport;
use nfcont_core::continuation::{Branch, SweepLevel};
use nfcont_core::stationary::Solution;
use nfcont_core::{DVector, FieldModel, Homotopy};
use std::fmt::Write as _;
use std::path::Path;

/// Shortest representation that parses back to the same f64.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// In-memory CSV built with the csv crate, written at the end of a run.
pub struct Table {
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[String]) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        Table { w }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.w.write_record(cells).expect("in-memory write");
    }

    pub fn bytes(self) -> Vec<u8> {
        self.w.into_inner().expect("in-memory flush")
    }
}

fn coord_header(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("v{k}")).collect()
}

fn params_cells(p: &Homotopy) -> Vec<String> {
    vec![num(p.lambda), num(p.mu), num(p.eps)]
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub fn solutions_table(n: usize, rows: &[(Homotopy, Solution)]) -> Table {
    let mut h = strings(&["lambda", "mu", "eps"]);
    h.extend(coord_header(n));
    h.extend(strings(&["unstable", "det_sign", "min_singular", "residual"]));
    let mut t = Table::new(&h);
    for (p, s) in rows {
        let mut r = params_cells(p);
        r.extend(s.v.iter().map(|&x| num(x)));
        r.extend([s.unstable.to_string(), s.det_sign.to_string(), num(s.min_singular), num(s.residual_norm)]);
        t.row(&r);
    }
    t
}

/// Branches tagged with a global id, in level order.
pub struct Tagged<'a> {
    pub id: usize,
    pub level: usize,
    pub branch: &'a Branch,
}

pub fn tag_levels(levels: &[SweepLevel]) -> Vec<Tagged<'_>> {
    let mut out = Vec::new();
    for (li, lv) in levels.iter().enumerate() {
        for b in &lv.branches {
            out.push(Tagged { id: out.len(), level: li, branch: b });
        }
    }
    out
}

pub fn branches_table(n: usize, branches: &[Tagged]) -> Table {
    let mut h = strings(&["branch", "level", "provenance", "disconnected", "status", "sample", "lambda", "mu", "eps"]);
    h.extend(strings(&["unstable", "det_sign"]));
    h.extend(coord_header(n));
    let mut t = Table::new(&h);
    for tb in branches {
        let b = tb.branch;
        let status = format!("{:?}", b.status);
        for (i, s) in b.samples.iter().enumerate() {
            let mut r = vec![
                tb.id.to_string(),
                tb.level.to_string(),
                b.provenance.clone(),
                b.disconnected.to_string(),
                status.clone(),
                i.to_string(),
            ];
            r.extend(params_cells(&s.params));
            r.push(s.unstable.map(|u| u.to_string()).unwrap_or_default());
            r.push(s.det_sign.to_string());
            r.extend(s.v.iter().map(|&x| num(x)));
            t.row(&r);
        }
    }
    t
}

pub fn special_table(n: usize, branches: &[Tagged]) -> Table {
    let mut h = strings(&["branch", "kind", "active", "lambda", "mu", "eps", "test_lo", "test_hi"]);
    h.extend(coord_header(n));
    let mut t = Table::new(&h);
    for tb in branches {
        for s in &tb.branch.special {
            let mut r = vec![tb.id.to_string(), s.kind.name().to_string(), s.active.name().to_string()];
            r.extend(params_cells(&s.params));
            r.extend([num(s.bracket.0), num(s.bracket.1)]);
            r.extend(s.v.iter().map(|&x| num(x)));
            t.row(&r);
        }
    }
    t
}

pub fn bifurcation_table(report: Option<&BifurcationReport>) -> Table {
    let h = strings(&[
        "index",
        "sigma_re",
        "sigma_im",
        "label",
        "simple",
        "lambda",
        "lambda_hopf",
        "q",
        "chi",
        "type",
        "orientation",
    ]);
    let mut t = Table::new(&h);
    if let Some(rep) = report {
        for e in &rep.entries {
            t.row(&[
                e.index.to_string(),
                num(e.sigma.re),
                num(e.sigma.im),
                e.label.clone(),
                e.simple.to_string(),
                opt(e.lambda),
                opt(e.lambda_hopf),
                e.q.map(|q| q.to_string()).unwrap_or_default(),
                opt(e.chi),
                e.kind.name().to_string(),
                e.orientation.map(|o| o.name().to_string()).unwrap_or_default(),
            ]);
        }
    }
    t
}

pub fn trajectories_table(n: usize, rows: &[(usize, f64, DVector<f64>)]) -> Table {
    let mut h = strings(&["trajectory", "t"]);
    h.extend(coord_header(n));
    let mut t = Table::new(&h);
    for (k, time, v) in rows {
        let mut r = vec![k.to_string(), num(*time)];
        r.extend(v.iter().map(|&x| num(x)));
        t.row(&r);
    }
    t
}

/// Sup norm of the field `V` along each branch against λ, special points as dots.
pub fn diagram(model: &FieldModel, branches: &[Tagged]) -> String {
    let norm = |v: &DVector<f64>, p: &Homotopy| model.potential_at(v, p).amax();
    let curves: Vec<(bool, Vec<(f64, f64)>)> = branches
        .iter()
        .map(|tb| {
            let pts = tb.branch.samples.iter().map(|s| (s.params.lambda, norm(&s.v, &s.params))).collect();
            (tb.branch.disconnected, pts)
        })
        .collect();
    let marks: Vec<(f64, f64, &str)> = branches
        .iter()
        .flat_map(|tb| tb.branch.special.iter().map(|s| (s.params.lambda, norm(&s.v, &s.params), s.kind.name())))
        .collect();
    let all = curves.iter().flat_map(|c| c.1.iter().copied()).chain(marks.iter().map(|m| (m.0, m.1)));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all {
        if x.is_finite() && y.is_finite() {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let (w, h, m) = (800.0, 500.0, 50.0);
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} L{m} {} L{} {}" fill="none" stroke="black"/>"#,
        h - m,
        w - m,
        h - m
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="14">lambda [{}, {}]</text>"#, w / 2.0 - 40.0, h - 15.0, num(x0), num(x1));
    let _ = writeln!(s, r#"<text x="5" y="30" font-size="14">sup|V| [{:.4}, {:.4}]</text>"#, y0, y1);
    for (disc, pts) in &curves {
        if pts.is_empty() {
            continue;
        }
        let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let (color, dash) = if *disc { ("#1f4fd1", r#" stroke-dasharray="6,4""#) } else { ("#222222", "") };
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#, d.join(" "));
    }
    for (x, y, kind) in marks {
        let color = match kind {
            "turning" => "#d12f1f",
            "branch" => "#1fa33a",
            _ => "#c78a00",
        };
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"><title>{kind}</title></circle>"#, sx(x), sy(y));
    }
    s.push_str("</svg>\n");
    s
}

/// Creates `dir` and writes every file; nothing is written before this point.
pub fn write_all(dir: &Path, files: Vec<(&str, Vec<u8>)>) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in files {
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}
