//! Finite windows of lattice maps `Z^m -> R^N`: index arithmetic, bipartite
//! colouring, enumeration of elementary quads and hexahedra, Q-net checks.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result, Site};
use crate::geom::{planarity_residual, relative_singular_value, PlanarQuad, Point, Tolerances};

/// Row-major index space of a window `[0, n_1) x .. x [0, n_m)`; the last axis varies fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    extents: Vec<usize>,
    strides: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Black,
    White,
}

/// Black iff `u_1 + .. + u_m` is even.
pub fn vertex_parity(u: &[usize]) -> Parity {
    if u.iter().sum::<usize>() % 2 == 0 {
        Parity::Black
    } else {
        Parity::White
    }
}

/// Elementary quadrilateral `(f, f_i, f_ij, f_j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadCell {
    pub base: Vec<usize>,
    pub i: usize,
    pub j: usize,
    /// Vertex indices of `f, f_i, f_ij, f_j`.
    pub corners: [usize; 4],
}

impl QuadCell {
    pub fn site(&self) -> Site {
        Site::Quad {
            base: self.base.clone(),
            axes: (self.i, self.j),
        }
    }
}

/// Elementary hexahedron spanned by axes `i < j < k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HexCell {
    pub base: Vec<usize>,
    pub axes: [usize; 3],
    /// Vertex indices of `f, f_i, f_j, f_k, f_ij, f_ik, f_jk, f_ijk`.
    pub corners: [usize; 8],
}

impl Lattice {
    pub fn new(extents: Vec<usize>) -> Result<Self> {
        if extents.len() < 2 {
            return Err(Error::DimensionTooLow {
                required: 2,
                found: extents.len(),
            });
        }
        if extents.iter().any(|&n| n < 2) {
            return Err(Error::InvalidInput("every extent must be at least 2".into()));
        }
        let mut strides = vec![1; extents.len()];
        for k in (0..extents.len() - 1).rev() {
            strides[k] = strides[k + 1] * extents[k + 1];
        }
        Ok(Lattice { extents, strides })
    }

    pub fn m(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn len(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, u: &[usize]) -> usize {
        u.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn contains(&self, u: &[isize]) -> bool {
        u.len() == self.m() && u.iter().zip(&self.extents).all(|(&a, &n)| a >= 0 && (a as usize) < n)
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut u = vec![0; self.m()];
        for k in 0..self.m() {
            u[k] = idx / self.strides[k];
            idx %= self.strides[k];
        }
        u
    }

    /// Index of `u + delta * e_axis`, if inside the window.
    pub fn shift(&self, idx: usize, axis: usize, delta: isize) -> Option<usize> {
        let u = self.multi_index(idx);
        let c = u[axis] as isize + delta;
        (c >= 0 && (c as usize) < self.extents[axis])
            .then(|| (idx as isize + delta * self.strides[axis] as isize) as usize)
    }

    /// Index of `u + sum_k deltas[k] e_k` for signed offsets, if inside the window.
    pub fn offset(&self, idx: usize, deltas: &[(usize, isize)]) -> Option<usize> {
        let mut u: Vec<isize> = self.multi_index(idx).iter().map(|&a| a as isize).collect();
        for &(axis, d) in deltas {
            u[axis] += d;
        }
        self.contains(&u)
            .then(|| u.iter().zip(&self.strides).map(|(&a, s)| a as usize * s).sum())
    }

    pub fn parity(&self, idx: usize) -> Parity {
        vertex_parity(&self.multi_index(idx))
    }

    pub fn axis_pairs(&self) -> Vec<(usize, usize)> {
        let m = self.m();
        (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect()
    }

    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let m = self.m();
        i * (2 * m - i - 1) / 2 + (j - i - 1)
    }

    /// Size of a dense per-quad array addressed by [`Lattice::quad_slot`].
    pub fn slot_count(&self) -> usize {
        self.len() * self.m() * (self.m() - 1) / 2
    }

    pub fn quad_slot(&self, cell: &QuadCell) -> usize {
        self.pair_index(cell.i, cell.j) * self.len() + cell.corners[0]
    }

    /// The quad with base vertex `base` in the `(i, j)` plane, if it fits in the window.
    pub fn quad_at(&self, base: usize, i: usize, j: usize) -> Option<QuadCell> {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let fi = self.shift(base, i, 1)?;
        let fj = self.shift(base, j, 1)?;
        let fij = self.shift(fi, j, 1)?;
        Some(QuadCell {
            base: self.multi_index(base),
            i,
            j,
            corners: [base, fi, fij, fj],
        })
    }

    /// Every elementary quad exactly once, ordered by axis pair then base index.
    pub fn quads(&self) -> impl Iterator<Item = QuadCell> + '_ {
        self.axis_pairs()
            .into_iter()
            .flat_map(move |(i, j)| (0..self.len()).filter_map(move |b| self.quad_at(b, i, j)))
    }

    pub fn quad_count(&self) -> usize {
        self.axis_pairs()
            .iter()
            .map(|&(i, j)| {
                self.extents
                    .iter()
                    .enumerate()
                    .map(|(k, &n)| if k == i || k == j { n - 1 } else { n })
                    .product::<usize>()
            })
            .sum()
    }

    pub fn hex_at(&self, base: usize, axes: [usize; 3]) -> Option<HexCell> {
        let [i, j, k] = axes;
        let fi = self.shift(base, i, 1)?;
        let fj = self.shift(base, j, 1)?;
        let fk = self.shift(base, k, 1)?;
        let fij = self.shift(fi, j, 1)?;
        let fik = self.shift(fi, k, 1)?;
        let fjk = self.shift(fj, k, 1)?;
        let fijk = self.shift(fij, k, 1)?;
        Some(HexCell {
            base: self.multi_index(base),
            axes,
            corners: [base, fi, fj, fk, fij, fik, fjk, fijk],
        })
    }

    pub fn hexahedra(&self) -> Result<Vec<HexCell>> {
        let m = self.m();
        if m < 3 {
            return Err(Error::DimensionTooLow { required: 3, found: m });
        }
        let mut out = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                for k in j + 1..m {
                    out.extend((0..self.len()).filter_map(|b| self.hex_at(b, [i, j, k])));
                }
            }
        }
        Ok(out)
    }

    /// Vertices with both neighbours along each of the axes `i` and `j`.
    pub fn is_interior(&self, idx: usize, i: usize, j: usize) -> bool {
        let u = self.multi_index(idx);
        [i, j].iter().all(|&a| u[a] > 0 && u[a] + 1 < self.extents[a])
    }
}

/// Finite window of a map `Z^m -> R^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct QNet {
    lattice: Lattice,
    ambient_dim: usize,
    vertices: Vec<Point>,
}

impl QNet {
    pub fn new(extents: Vec<usize>, vertices: Vec<Point>) -> Result<Self> {
        let lattice = Lattice::new(extents)?;
        if vertices.len() != lattice.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} vertices, got {}",
                lattice.len(),
                vertices.len()
            )));
        }
        let ambient_dim = vertices[0].dim();
        if ambient_dim < 2 {
            return Err(Error::DimensionTooLow {
                required: 2,
                found: ambient_dim,
            });
        }
        for (k, p) in vertices.iter().enumerate() {
            if p.dim() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    found: p.dim(),
                }
                .at(Site::Vertex(lattice.multi_index(k))));
            }
            if !p.is_finite() {
                return Err(Error::InvalidInput("non-finite coordinate".into())
                    .at(Site::Vertex(lattice.multi_index(k))));
            }
        }
        Ok(QNet {
            lattice,
            ambient_dim,
            vertices,
        })
    }

    pub fn from_fn(extents: Vec<usize>, mut f: impl FnMut(&[usize]) -> Point) -> Result<Self> {
        let lattice = Lattice::new(extents.clone())?;
        let vertices = (0..lattice.len()).map(|k| f(&lattice.multi_index(k))).collect();
        QNet::new(extents, vertices)
    }

    /// The square grid `u -> (u_1, .., u_m, 0, ..)` in R^N.
    pub fn grid(extents: Vec<usize>, ambient_dim: usize) -> Result<Self> {
        let m = extents.len();
        if ambient_dim < m {
            return Err(Error::DimensionTooLow {
                required: m,
                found: ambient_dim,
            });
        }
        QNet::from_fn(extents, |u| {
            let mut c = vec![0.0; ambient_dim];
            for (k, &a) in u.iter().enumerate() {
                c[k] = a as f64;
            }
            Point::new(c)
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn m(&self) -> usize {
        self.lattice.m()
    }

    pub fn extents(&self) -> &[usize] {
        self.lattice.extents()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn point(&self, idx: usize) -> &Point {
        &self.vertices[idx]
    }

    pub fn point_at(&self, u: &[usize]) -> &Point {
        &self.vertices[self.lattice.index(u)]
    }

    pub fn set_point(&mut self, idx: usize, p: Point) -> Result<()> {
        if p.dim() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                found: p.dim(),
            });
        }
        self.vertices[idx] = p;
        Ok(())
    }

    pub fn quad_points(&self, cell: &QuadCell) -> [&Point; 4] {
        cell.corners.map(|k| &self.vertices[k])
    }

    pub fn planar_quad(&self, cell: &QuadCell, tol: Tolerances) -> Result<PlanarQuad> {
        let [a, b, c, d] = self.quad_points(cell).map(|p| p.clone());
        PlanarQuad::new(a, b, c, d, tol).map_err(|e| e.at(cell.site()))
    }

    /// Elementary quads with their geometry.
    pub fn planar_quads(&self, tol: Tolerances) -> impl Iterator<Item = Result<(QuadCell, PlanarQuad)>> + '_ {
        self.lattice.quads().map(move |cell| {
            let q = self.planar_quad(&cell, tol)?;
            Ok((cell, q))
        })
    }

    pub fn hexahedra(&self) -> Result<Vec<HexCell>> {
        self.lattice.hexahedra()
    }

    /// Applies a point map to every vertex.
    pub fn map_points(&self, mut f: impl FnMut(&Point) -> Point) -> Result<QNet> {
        QNet::new(self.extents().to_vec(), self.vertices.iter().map(&mut f).collect())
    }

    pub fn diameter(&self) -> f64 {
        let n = self.ambient_dim;
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for p in &self.vertices {
            for k in 0..n {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
    }

    /// Largest vertex distance to `other` after removing the mean translation.
    pub fn distance_up_to_translation(&self, other: &QNet) -> f64 {
        let k = self.vertices.len() as f64;
        let mut shift = Point::origin(self.ambient_dim);
        for (a, b) in self.vertices.iter().zip(&other.vertices) {
            shift = shift.add_scaled(1.0 / k, &(b - a));
        }
        self.vertices
            .iter()
            .zip(&other.vertices)
            .map(|(a, b)| (&(b - a) - &shift).norm())
            .fold(0.0, f64::max)
    }
}

/// Real value per lattice vertex (houses nu and s).
#[derive(Debug, Clone, PartialEq)]
pub struct VertexScalar {
    pub values: Vec<f64>,
}

impl VertexScalar {
    pub fn new(values: Vec<f64>) -> Self {
        VertexScalar { values }
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn is_nonzero(&self) -> bool {
        self.values.iter().all(|&v| v != 0.0 && v.is_finite())
    }

    /// Multiplies black values by `black` and white values by `white`.
    pub fn rescaled(&self, lattice: &Lattice, black: f64, white: f64) -> VertexScalar {
        VertexScalar::new(
            self.values
                .iter()
                .enumerate()
                .map(|(k, v)| match lattice.parity(k) {
                    Parity::Black => v * black,
                    Parity::White => v * white,
                })
                .collect(),
        )
    }

    pub fn reciprocal(&self) -> VertexScalar {
        VertexScalar::new(self.values.iter().map(|v| 1.0 / v).collect())
    }
}

/// Edge labels `alpha_i(u_i)`, one value per edge layer of each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLabelling {
    pub per_axis: Vec<Vec<f64>>,
}

impl EdgeLabelling {
    pub fn new(per_axis: Vec<Vec<f64>>) -> Result<Self> {
        if per_axis.iter().flatten().any(|&a| a == 0.0 || !a.is_finite()) {
            return Err(Error::InvalidInput("labels must be finite and nonzero".into()));
        }
        Ok(EdgeLabelling { per_axis })
    }

    pub fn check_extents(&self, extents: &[usize]) -> Result<()> {
        if self.per_axis.len() != extents.len()
            || self.per_axis.iter().zip(extents).any(|(l, &n)| l.len() != n - 1)
        {
            return Err(Error::InvalidInput(
                "labelling needs one value per edge layer of every axis".into(),
            ));
        }
        Ok(())
    }

    /// Label of the edge from `u` along `axis`.
    pub fn label(&self, axis: usize, u: &[usize]) -> f64 {
        self.per_axis[axis][u[axis]]
    }

    pub fn scaled(&self, k: f64) -> EdgeLabelling {
        EdgeLabelling {
            per_axis: self.per_axis.iter().map(|l| l.iter().map(|a| a * k).collect()).collect(),
        }
    }

    /// Largest relative deviation from `other` after fitting one global scale.
    pub fn relative_error_up_to_scale(&self, other: &EdgeLabelling) -> f64 {
        let a: Vec<f64> = self.per_axis.iter().flatten().copied().collect();
        let b: Vec<f64> = other.per_axis.iter().flatten().copied().collect();
        let k = b[0] / a[0];
        a.iter()
            .zip(&b)
            .map(|(x, y)| ((x * k - y) / y).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetReport {
    pub max_residual: f64,
    /// Quads whose planarity residual exceeds the incidence tolerance.
    pub offending: Vec<QuadCell>,
    /// Quads with coincident or collinear consecutive vertices.
    pub degenerate: Vec<QuadCell>,
    pub passed: bool,
}

/// Planarity residual of every elementary quad; passes iff all are planar and non-degenerate.
pub fn check_qnet(net: &QNet, tol: &Tolerances) -> QNetReport {
    let mut max_residual: f64 = 0.0;
    let mut offending = Vec::new();
    let mut degenerate = Vec::new();
    for cell in net.lattice().quads() {
        let pts = net.quad_points(&cell);
        match planarity_residual(&pts) {
            Some(r) => {
                max_residual = max_residual.max(r);
                if r > tol.incidence {
                    offending.push(cell.clone());
                }
                let collinear = (0..4).any(|k| {
                    let tri = [pts[k], pts[(k + 1) % 4], pts[(k + 2) % 4]];
                    relative_singular_value(&tri, 1).is_none_or(|s| s <= tol.incidence)
                });
                if collinear {
                    degenerate.push(cell);
                }
            }
            None => degenerate.push(cell),
        }
    }
    let passed = offending.is_empty() && degenerate.is_empty();
    QNetReport {
        max_residual,
        offending,
        degenerate,
        passed,
    }
}

/// Orthonormal coordinates on the affine span of `origin + span(dirs)`.
pub(crate) struct AffineChart {
    origin: Point,
    basis: Vec<Point>,
}

impl AffineChart {
    pub(crate) fn new(origin: &Point, dirs: &[Point], tol: f64) -> Option<AffineChart> {
        let mut basis: Vec<Point> = Vec::new();
        let scale = dirs.iter().map(|d| d.norm()).fold(0.0, f64::max);
        for d in dirs {
            let mut r = d.clone();
            for _ in 0..2 {
                for b in &basis {
                    r = r.add_scaled(-r.dot(b), b);
                }
            }
            if r.norm() <= tol * scale {
                return None;
            }
            basis.push(r.normalized()?);
        }
        Some(AffineChart {
            origin: origin.clone(),
            basis,
        })
    }

    pub(crate) fn coords(&self, p: &Point) -> Vec<f64> {
        let r = p - &self.origin;
        self.basis.iter().map(|b| r.dot(b)).collect()
    }

    pub(crate) fn point(&self, c: &[f64]) -> Point {
        let mut p = self.origin.clone();
        for (x, b) in c.iter().zip(&self.basis) {
            p = p.add_scaled(*x, b);
        }
        p
    }
}

/// The eighth vertex of a hexahedron with planar faces: the common point of
/// the planes `(f_i, f_ij, f_ik)`. Input order `f, f_i, f_j, f_k, f_ij, f_ik, f_jk`.
pub fn complete_hexahedron(v: [&Point; 7], tol: &Tolerances) -> Result<Point> {
    let [f, f1, f2, f3, f12, f13, f23] = v;
    let chart = AffineChart::new(f, &[f1 - f, f2 - f, f3 - f], tol.incidence).ok_or(Error::DegenerateQuad)?;
    let c = |p: &Point| {
        let x = chart.coords(p);
        Vector3::new(x[0], x[1], x[2])
    };
    let planes = [(f1, f12, f13), (f2, f12, f23), (f3, f13, f23)];
    let mut normals = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (r, (a, b, d)) in planes.iter().enumerate() {
        let (a, b, d) = (c(a), c(b), c(d));
        let n = (b - a).cross(&(d - a));
        let nn = n.norm();
        if !(nn > 0.0) {
            return Err(Error::DegenerateQuad);
        }
        let n = n / nn;
        normals.set_row(r, &n.transpose());
        rhs[r] = n.dot(&a);
    }
    let lu = normals.lu();
    if normals.determinant().abs() <= tol.incidence {
        return Err(Error::DegenerateQuad);
    }
    let x = lu.solve(&rhs).ok_or(Error::DegenerateQuad)?;
    Ok(chart.point(&[x[0], x[1], x[2]]))
}
