//! Check reports in JSON and plain text.

use koenigs::isothermic::{check_circular, check_isothermic, check_moebius_characterizations, recover_labels, MoebiusTest};
use koenigs::koenigs::{check_closedness, check_koenigs_2d_geometric, check_koenigs_3d_geometric};
use koenigs::qnet::{check_qnet, QuadCell};
use koenigs::{Error, QNet, Site, Tolerances};
use serde_json::{json, Map, Value};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub check: &'static str,
    pub pass: bool,
    /// Error category explaining a failure.
    pub category: Option<&'static str>,
    /// True when the failure stems from degenerate geometry.
    pub degenerate: bool,
    pub max_residual: f64,
    pub failing: Vec<Site>,
    /// Check-specific fields, already in JSON form.
    pub details: Map<String, Value>,
}

impl CheckReport {
    fn new(check: &'static str, pass: bool, category: &'static str, max_residual: f64, failing: Vec<Site>) -> Self {
        CheckReport {
            check,
            pass,
            category: (!pass).then_some(category),
            degenerate: false,
            max_residual,
            failing,
            details: Map::new(),
        }
    }

    fn detail(mut self, key: &str, value: Value) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("check".into(), json!(self.check));
        obj.insert("pass".into(), json!(self.pass));
        obj.insert("category".into(), self.category.map_or(Value::Null, |c| json!(c)));
        obj.insert("max_residual".into(), num(self.max_residual));
        obj.insert("failing".into(), Value::Array(self.failing.iter().map(site_json).collect()));
        for (k, v) in &self.details {
            obj.insert(k.clone(), v.clone());
        }
        Value::Object(obj)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("check {}: {}", self.check, if self.pass { "PASS" } else { "FAIL" });
        if let Some(c) = self.category {
            out.push_str(&format!(" ({c})"));
        }
        out.push_str(&format!("\n  {:<14} {:.3e}\n", "max_residual", self.max_residual));
        for (k, v) in &self.details {
            let shown = match v {
                Value::Array(_) | Value::Object(_) => continue,
                Value::String(t) => t.clone(),
                Value::Number(x) if !(x.is_i64() || x.is_u64()) => format!("{:.3e}", x.as_f64().unwrap_or(f64::NAN)),
                other => other.to_string(),
            };
            out.push_str(&format!("  {k:<14} {shown}\n"));
        }
        const SHOWN: usize = 10;
        for site in self.failing.iter().take(SHOWN) {
            out.push_str(&format!("  {:<14} {site}\n", "failing"));
        }
        if self.failing.len() > SHOWN {
            out.push_str(&format!("  ... and {} more\n", self.failing.len() - SHOWN));
        }
        out
    }
}

/// JSON number, with non-finite values spelled out as strings.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| json!(x.to_string()), Value::Number)
}

pub fn site_json(site: &Site) -> Value {
    match site {
        Site::Vertex(u) => json!({ "vertex": u }),
        Site::Quad { base, axes } => json!({ "quad": base, "axes": [axes.0, axes.1] }),
        Site::Hexahedron { base } => json!({ "hexahedron": base }),
    }
}

fn quad_sites(cells: &[QuadCell]) -> Vec<Site> {
    cells.iter().map(QuadCell::site).collect()
}

pub fn qnet(net: &QNet, tol: &Tolerances) -> CheckReport {
    let r = check_qnet(net, tol);
    let category = if r.offending.is_empty() { "DegenerateQuad" } else { "NotPlanar" };
    let mut failing = quad_sites(&r.offending);
    failing.extend(quad_sites(&r.degenerate));
    let mut rep = CheckReport::new("qnet", r.passed, category, r.max_residual, failing)
        .detail("quads", json!(net.lattice().quad_count()))
        .detail("degenerate", json!(r.degenerate.len()));
    rep.degenerate = !r.passed && r.offending.is_empty();
    rep
}

pub fn koenigs(net: &QNet, tol: &Tolerances) -> Result<CheckReport, Error> {
    let r = check_closedness(net, tol)?;
    let mut rep = CheckReport::new("koenigs", r.is_koenigs, "NotKoenigs", r.max_residual, r.failing)
        .detail("cycles", json!(r.cycles.len()));
    if let Some(s) = r.slice_residual {
        rep = rep.detail("slice_residual", num(s));
    }
    Ok(rep)
}

pub fn circular(net: &QNet, tol: &Tolerances) -> CheckReport {
    let r = check_circular(net, tol);
    CheckReport::new("circular", r.passed, "NotCircular", r.max_residual, r.offending)
        .detail("quads", json!(net.lattice().quad_count()))
}

pub fn isothermic(net: &QNet, tol: &Tolerances) -> Result<CheckReport, Error> {
    let r = check_isothermic(net, tol)?;
    // without circularity there are no cross-ratios; report how far the quads are from circles
    let (category, residual, kind) = if r.circular {
        ("InconsistentCrossRatios", r.max_residual, "cross_ratio")
    } else {
        ("NotCircular", check_circular(net, tol).max_residual, "circularity")
    };
    let mut rep = CheckReport::new("isothermic", r.verdict, category, residual, r.failing)
        .detail("circular", json!(r.circular))
        .detail("residual_kind", json!(kind))
        .detail("sites", json!(r.sites.len()));
    if r.verdict {
        let labels = recover_labels(net, tol)?;
        let per_axis: Vec<Value> = labels.labels.per_axis.iter().map(|l| Value::Array(l.iter().map(|&x| num(x)).collect())).collect();
        rep = rep
            .detail("labels", Value::Array(per_axis))
            .detail("label_gauge", json!(labels.gauge))
            .detail("label_residual", num(labels.residual));
    }
    Ok(rep)
}

pub fn geometric(net: &QNet, tol: &Tolerances) -> Result<CheckReport, Error> {
    match net.m() {
        2 => {
            let r = check_koenigs_2d_geometric(net, tol)?;
            let mut max_residual: f64 = 0.0;
            let mut failing = Vec::new();
            for v in &r.vertices {
                let extra = v.subspace.as_ref().or(v.planes.as_ref());
                for c in std::iter::once(&v.diagonals).chain(extra) {
                    max_residual = max_residual.max(c.residual);
                }
                if !v.diagonals.pass {
                    failing.push(Site::Vertex(v.u.clone()));
                }
            }
            let criterion = if net.ambient_dim() >= 4 { "subspace" } else { "planes" };
            let extra_pass = r.vertices.iter().all(|v| v.subspace.as_ref().or(v.planes.as_ref()).is_none_or(|c| c.pass));
            Ok(CheckReport::new("geometric", r.is_koenigs, "NotKoenigs", max_residual, failing)
                .detail("vertices", json!(r.vertices.len()))
                .detail("planar_vertices", json!(r.planar_vertices.len()))
                .detail("second_criterion", json!(criterion))
                .detail("second_criterion_pass", json!(extra_pass)))
        }
        3 => {
            let r = check_koenigs_3d_geometric(net, tol)?;
            let mut max_residual: f64 = 0.0;
            let mut failing = Vec::new();
            for h in &r.hexahedra {
                max_residual = max_residual.max(h.corner_residual);
                if !h.collinear {
                    failing.push(Site::Hexahedron { base: h.base.clone() });
                }
            }
            Ok(CheckReport::new("geometric", r.is_koenigs, "NotKoenigs", max_residual, failing)
                .detail("hexahedra", json!(r.hexahedra.len()))
                .detail("black_coplanar", json!(r.all_black_coplanar))
                .detail("white_coplanar", json!(r.all_white_coplanar)))
        }
        m => Err(Error::InvalidInput(format!("geometric checks exist for m = 2 and m = 3, not m = {m}"))),
    }
}

pub fn moebius(net: &QNet, tol: &Tolerances) -> Result<CheckReport, Error> {
    let r = check_moebius_characterizations(net, tol)?;
    let mut max_residual: f64 = 0.0;
    let mut failing = Vec::new();
    for v in &r.vertices {
        max_residual = max_residual.max(v.residual);
        if !v.pass {
            failing.push(Site::Vertex(v.u.clone()));
        }
    }
    for h in &r.hexahedra {
        max_residual = max_residual.max(h.white_residual).max(h.black_residual);
        if !(h.white_concircular && h.black_concircular) {
            failing.push(Site::Hexahedron { base: h.base.clone() });
        }
    }
    let central = r.vertices.iter().filter(|v| v.test == MoebiusTest::CentralSphere).count();
    Ok(CheckReport::new("moebius", r.is_isothermic, "NotIsothermic", max_residual, failing)
        .detail("vertices", json!(r.vertices.len()))
        .detail("central_sphere_vertices", json!(central))
        .detail("hexahedra", json!(r.hexahedra.len())))
}

/// Every applicable check; errors are recorded in place of a report.
pub fn full_report(net: &QNet, tol: &Tolerances) -> Value {
    let record = |r: Result<CheckReport, Error>| match r {
        Ok(rep) => rep.to_json(),
        Err(e) => json!({ "error": e.category(), "message": e.to_string() }),
    };
    let mut checks = Map::new();
    checks.insert("qnet".into(), qnet(net, tol).to_json());
    checks.insert("koenigs".into(), record(koenigs(net, tol)));
    checks.insert("circular".into(), circular(net, tol).to_json());
    checks.insert("isothermic".into(), record(isothermic(net, tol)));
    if matches!(net.m(), 2 | 3) {
        checks.insert("geometric".into(), record(geometric(net, tol)));
        checks.insert("moebius".into(), record(moebius(net, tol)));
    }
    json!({
        "m": net.m(),
        "extents": net.extents(),
        "ambient_dim": net.ambient_dim(),
        "tolerances": { "incidence": num(tol.incidence), "product": num(tol.product) },
        "checks": Value::Object(checks),
    })
}
