//! Wavefront OBJ export of two-dimensional nets.

use std::fmt::Write as _;
use std::path::Path;

use koenigs::Lattice;

use crate::document::{DocError, NetDocument};

/// OBJ text: one `v` line per vertex (padded to three coordinates), one `f`
/// line per quad `f, f_1, f_12, f_2` with 1-based indices, both in lattice order.
pub fn obj_string(doc: &NetDocument) -> Result<String, DocError> {
    if doc.m() != 2 || doc.ambient_dim > 3 {
        return Err(DocError::UnsupportedDimension {
            m: doc.m(),
            ambient_dim: doc.ambient_dim,
        });
    }
    doc.validate()?;
    let lattice = Lattice::new(doc.extents.clone()).map_err(|e| DocError::SchemaMismatch(e.to_string()))?;
    let mut out = String::new();
    for p in doc.vertices.chunks(doc.ambient_dim) {
        let mut c = [0.0; 3];
        c[..p.len()].copy_from_slice(p);
        if c.iter().any(|x| !x.is_finite()) {
            return Err(DocError::NonFinite("vertices"));
        }
        let _ = writeln!(out, "v {:.16e} {:.16e} {:.16e}", c[0], c[1], c[2]);
    }
    for cell in lattice.quads() {
        let [a, b, c, d] = cell.corners.map(|k| k + 1);
        let _ = writeln!(out, "f {a} {b} {c} {d}");
    }
    Ok(out)
}

pub fn export_obj(doc: &NetDocument, path: &Path) -> Result<(), DocError> {
    let text = obj_string(doc)?;
    std::fs::write(path, text).map_err(|source| DocError::Io {
        path: path.to_owned(),
        source,
    })
}
