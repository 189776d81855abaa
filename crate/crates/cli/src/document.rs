//! Net documents: JSON schema v1 with a canonical writer.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "m": 2,
//!   "extents": [2, 2],
//!   "ambient_dim": 3,
//!   "vertices": [
//!     x, y, z,
//!     ...
//!   ],
//!   "nu": [...],
//!   "s": [...],
//!   "labels": [[...], [...]],
//!   "moutard": { "kind": "homogeneous", "dim": 4, "points": [...], "coefficients": [...] }
//! }
//! ```
//!
//! Vertices are listed in row-major multi-index order (last axis fastest),
//! coordinate-major within a vertex. `nu` and `s` hold one value per vertex,
//! `labels` one list of `extents[k] - 1` values per axis, and the Moutard
//! coefficients follow the quad order of [`Lattice::quads`].
//! The canonical writer prints every number with 17 significant digits so a
//! save/load/save cycle is byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use koenigs::koenigs::{MoutardKind, MoutardNet};
use koenigs::{EdgeLabelling, Lattice, Point, QNet, VertexScalar};
use serde::Deserialize;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DocError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("OBJ export needs m = 2 and ambient dimension <= 3, got m = {m}, N = {ambient_dim}")]
    UnsupportedDimension { m: usize, ambient_dim: usize },
    #[error("field {0} holds a non-finite number")]
    NonFinite(&'static str),
}

impl DocError {
    pub fn category(&self) -> &'static str {
        match self {
            DocError::Io { .. } => "Io",
            DocError::Parse { .. } => "ParseError",
            DocError::SchemaMismatch(_) => "SchemaMismatch",
            DocError::UnsupportedDimension { .. } => "UnsupportedDimension",
            DocError::NonFinite(_) => "NonFinite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiftKind {
    Homogeneous,
    Lightcone,
}

impl LiftKind {
    fn name(self) -> &'static str {
        match self {
            LiftKind::Homogeneous => "homogeneous",
            LiftKind::Lightcone => "lightcone",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoutardBlock {
    pub kind: LiftKind,
    pub dim: usize,
    pub points: Vec<f64>,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    schema_version: u32,
    m: usize,
    extents: Vec<usize>,
    ambient_dim: usize,
    vertices: Vec<f64>,
    #[serde(default)]
    nu: Option<Vec<f64>>,
    #[serde(default)]
    s: Option<Vec<f64>>,
    #[serde(default)]
    labels: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    moutard: Option<MoutardBlock>,
}

/// A net with optional scalar decorations, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct NetDocument {
    pub extents: Vec<usize>,
    pub ambient_dim: usize,
    pub vertices: Vec<f64>,
    pub nu: Option<Vec<f64>>,
    pub s: Option<Vec<f64>>,
    pub labels: Option<Vec<Vec<f64>>>,
    pub moutard: Option<MoutardBlock>,
}

fn mismatch(msg: impl Into<String>) -> DocError {
    DocError::SchemaMismatch(msg.into())
}

impl NetDocument {
    pub fn from_net(net: &QNet) -> Self {
        NetDocument {
            extents: net.extents().to_vec(),
            ambient_dim: net.ambient_dim(),
            vertices: net.vertices().iter().flat_map(|p| p.coords().iter().copied()).collect(),
            nu: None,
            s: None,
            labels: None,
            moutard: None,
        }
    }

    pub fn with_nu(mut self, nu: &VertexScalar) -> Self {
        self.nu = Some(nu.values.clone());
        self
    }

    pub fn with_s(mut self, s: &VertexScalar) -> Self {
        self.s = Some(s.values.clone());
        self
    }

    pub fn with_labels(mut self, labels: &EdgeLabelling) -> Self {
        self.labels = Some(labels.per_axis.clone());
        self
    }

    pub fn with_moutard(mut self, y: &MoutardNet) -> Self {
        let kind = match y.kind() {
            MoutardKind::Homogeneous => LiftKind::Homogeneous,
            MoutardKind::LightCone => LiftKind::Lightcone,
        };
        self.moutard = Some(MoutardBlock {
            kind,
            dim: y.points()[0].dim(),
            points: y.points().iter().flat_map(|p| p.coords().iter().copied()).collect(),
            coefficients: y.coefficients(),
        });
        self
    }

    pub fn m(&self) -> usize {
        self.extents.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn net(&self) -> koenigs::Result<QNet> {
        let pts = self.vertices.chunks(self.ambient_dim).map(|c| Point::new(c.to_vec())).collect();
        QNet::new(self.extents.clone(), pts)
    }

    pub fn nu(&self) -> Option<VertexScalar> {
        self.nu.clone().map(VertexScalar::new)
    }

    pub fn s(&self) -> Option<VertexScalar> {
        self.s.clone().map(VertexScalar::new)
    }

    pub fn labels(&self) -> Option<koenigs::Result<EdgeLabelling>> {
        self.labels.clone().map(EdgeLabelling::new)
    }

    pub fn moutard_net(&self) -> Option<koenigs::Result<MoutardNet>> {
        let b = self.moutard.as_ref()?;
        let pts = b.points.chunks(b.dim).map(|c| Point::new(c.to_vec())).collect();
        let kind = match b.kind {
            LiftKind::Homogeneous => MoutardKind::Homogeneous,
            LiftKind::Lightcone => MoutardKind::LightCone,
        };
        Some(MoutardNet::from_parts(self.extents.clone(), kind, pts, &b.coefficients))
    }

    /// Length and consistency checks of schema v1.
    pub fn validate(&self) -> Result<(), DocError> {
        let lattice = Lattice::new(self.extents.clone()).map_err(|e| mismatch(format!("extents: {e}")))?;
        let n = lattice.len();
        if self.ambient_dim == 0 {
            return Err(mismatch("ambient_dim must be positive"));
        }
        if self.vertices.len() != n * self.ambient_dim {
            return Err(mismatch(format!(
                "vertices: expected {} numbers ({n} vertices of dimension {}), got {}",
                n * self.ambient_dim,
                self.ambient_dim,
                self.vertices.len()
            )));
        }
        for (name, field) in [("nu", &self.nu), ("s", &self.s)] {
            if let Some(v) = field {
                if v.len() != n {
                    return Err(mismatch(format!("{name}: expected {n} values, got {}", v.len())));
                }
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.m() {
                return Err(mismatch(format!("labels: expected {} axes, got {}", self.m(), labels.len())));
            }
            for (k, (l, &e)) in labels.iter().zip(&self.extents).enumerate() {
                if l.len() != e - 1 {
                    return Err(mismatch(format!("labels[{k}]: expected {} values, got {}", e - 1, l.len())));
                }
            }
        }
        if let Some(b) = &self.moutard {
            if b.dim == 0 || b.points.len() != n * b.dim {
                return Err(mismatch(format!(
                    "moutard.points: expected {} numbers, got {}",
                    n * b.dim,
                    b.points.len()
                )));
            }
            if b.coefficients.len() != lattice.quad_count() {
                return Err(mismatch(format!(
                    "moutard.coefficients: expected {} values, got {}",
                    lattice.quad_count(),
                    b.coefficients.len()
                )));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, DocError> {
        let raw: RawDocument = serde_json::from_str(text).map_err(|e| DocError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if raw.schema_version != SCHEMA_VERSION {
            return Err(mismatch(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                raw.schema_version
            )));
        }
        if raw.m != raw.extents.len() {
            return Err(mismatch(format!("m = {} but {} extents given", raw.m, raw.extents.len())));
        }
        let doc = NetDocument {
            extents: raw.extents,
            ambient_dim: raw.ambient_dim,
            vertices: raw.vertices,
            nu: raw.nu,
            s: raw.s,
            labels: raw.labels,
            moutard: raw.moutard,
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self, DocError> {
        let text = std::fs::read_to_string(path).map_err(|source| DocError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), DocError> {
        let text = self.to_canonical_string()?;
        std::fs::write(path, text).map_err(|source| DocError::Io {
            path: path.to_owned(),
            source,
        })
    }

    /// The canonical serialization: fixed key order, one vertex per line,
    /// every number as `{:.16e}`.
    pub fn to_canonical_string(&self) -> Result<String, DocError> {
        self.validate()?;
        let mut out = String::new();
        let ints = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        out.push_str("{\n");
        let _ = writeln!(out, "  \"schema_version\": {SCHEMA_VERSION},");
        let _ = writeln!(out, "  \"m\": {},", self.m());
        let _ = writeln!(out, "  \"extents\": [{}],", ints(&self.extents));
        let _ = writeln!(out, "  \"ambient_dim\": {},", self.ambient_dim);
        out.push_str("  \"vertices\": ");
        write_rows(&mut out, "vertices", &self.vertices, self.ambient_dim, 2)?;
        let row = *self.extents.last().expect("m >= 2");
        for (name, field) in [("nu", &self.nu), ("s", &self.s)] {
            if let Some(v) = field {
                let _ = write!(out, ",\n  \"{name}\": ");
                write_rows(&mut out, name, v, row, 2)?;
            }
        }
        if let Some(labels) = &self.labels {
            out.push_str(",\n  \"labels\": [\n");
            for (k, l) in labels.iter().enumerate() {
                out.push_str("    ");
                write_inline(&mut out, "labels", l)?;
                out.push_str(if k + 1 < labels.len() { ",\n" } else { "\n" });
            }
            out.push_str("  ]");
        }
        if let Some(b) = &self.moutard {
            out.push_str(",\n  \"moutard\": {\n");
            let _ = writeln!(out, "    \"kind\": \"{}\",", b.kind.name());
            let _ = writeln!(out, "    \"dim\": {},", b.dim);
            out.push_str("    \"points\": ");
            write_rows(&mut out, "moutard.points", &b.points, b.dim, 4)?;
            out.push_str(",\n    \"coefficients\": ");
            write_rows(&mut out, "moutard.coefficients", &b.coefficients, 4, 4)?;
            out.push_str("\n  }");
        }
        out.push_str("\n}\n");
        Ok(out)
    }
}

fn number(out: &mut String, field: &'static str, x: f64) -> Result<(), DocError> {
    if !x.is_finite() {
        return Err(DocError::NonFinite(field));
    }
    let _ = write!(out, "{x:.16e}");
    Ok(())
}

fn write_inline(out: &mut String, field: &'static str, v: &[f64]) -> Result<(), DocError> {
    out.push('[');
    for (k, &x) in v.iter().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        number(out, field, x)?;
    }
    out.push(']');
    Ok(())
}

/// A flat array broken into lines of `per_line` numbers.
fn write_rows(out: &mut String, field: &'static str, v: &[f64], per_line: usize, indent: usize) -> Result<(), DocError> {
    if v.is_empty() {
        out.push_str("[]");
        return Ok(());
    }
    out.push_str("[\n");
    let lines: Vec<&[f64]> = v.chunks(per_line.max(1)).collect();
    for (k, line) in lines.iter().enumerate() {
        out.push_str(&" ".repeat(indent + 2));
        for (j, &x) in line.iter().enumerate() {
            if j > 0 {
                out.push_str(", ");
            }
            number(out, field, x)?;
        }
        out.push_str(if k + 1 < lines.len() { ",\n" } else { "\n" });
    }
    out.push_str(&" ".repeat(indent));
    out.push(']');
    Ok(())
}
