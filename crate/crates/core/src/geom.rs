//! Euclidean and Minkowski primitives, incidence predicates with relative
//! tolerances, diagonal intersections and cross-ratios.

use std::ops::{Add, Index, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerances shared by all checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Incidence predicates (planarity, rank, parallelism), relative to scale.
    pub incidence: f64,
    /// Residuals of multiplicative cycles, `|product - 1|`.
    pub product: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            incidence: 1e-9,
            product: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn new(incidence: f64, product: f64) -> Result<Self> {
        if !(incidence > 0.0 && product > 0.0 && incidence.is_finite() && product.is_finite()) {
            return Err(Error::InvalidInput(
                "tolerances must be positive and finite".into(),
            ));
        }
        Ok(Tolerances { incidence, product })
    }
}

/// A point of R^N.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Point(coords.to_vec())
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, k: f64) -> Point {
        Point(self.0.iter().map(|x| x * k).collect())
    }

    /// `self + k * v`
    pub fn add_scaled(&self, k: f64, v: &Point) -> Point {
        Point(self.0.iter().zip(&v.0).map(|(a, b)| a + k * b).collect())
    }

    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + t * (b - a))
                .collect(),
        )
    }

    pub fn normalized(&self) -> Option<Point> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self.scale(1.0 / n))
    }

    /// Appends a coordinate.
    pub fn extended(&self, x: f64) -> Point {
        let mut c = self.0.clone();
        c.push(x);
        Point(c)
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl<'a> Add<&'a Point> for &'a Point {
    type Output = Point;
    fn add(self, rhs: &Point) -> Point {
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl<'a> Sub<&'a Point> for &'a Point {
    type Output = Point;
    fn sub(self, rhs: &Point) -> Point {
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        &self + &rhs
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        &self - &rhs
    }
}

impl Mul<f64> for &Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        self.scale(k)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        self.scale(k)
    }
}

impl Neg for &Point {
    type Output = Point;
    fn neg(self) -> Point {
        self.scale(-1.0)
    }
}

/// Largest pairwise distance.
pub fn diameter(points: &[&Point]) -> f64 {
    let mut d: f64 = 0.0;
    for (k, p) in points.iter().enumerate() {
        for q in &points[k + 1..] {
            d = d.max(p.dist(q));
        }
    }
    d
}

/// Singular values of the centered point matrix, in decreasing order.
pub fn centered_singular_values(points: &[&Point]) -> Vec<f64> {
    if points.is_empty() {
        return Vec::new();
    }
    let n = points[0].dim();
    let k = points.len() as f64;
    let mut centroid = vec![0.0; n];
    for p in points {
        for (c, x) in centroid.iter_mut().zip(p.coords()) {
            *c += x / k;
        }
    }
    let m = DMatrix::from_fn(points.len(), n, |r, c| points[r][c] - centroid[c]);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Ratio `sigma_k / sigma_1` of the centered point matrix (0-based `k`);
/// zero when the matrix has fewer than `k + 1` singular values.
/// Returns `None` when all points coincide.
pub fn relative_singular_value(points: &[&Point], k: usize) -> Option<f64> {
    let sv = centered_singular_values(points);
    let top = *sv.first()?;
    if !(top > 0.0) {
        return None;
    }
    Some(sv.get(k).map_or(0.0, |s| s / top))
}

/// Planarity residual of a point set: `sigma_3 / sigma_1` of the centered matrix.
pub fn planarity_residual(points: &[&Point]) -> Option<f64> {
    relative_singular_value(points, 2)
}

/// Dimension of the affine span; singular values below `tol * sigma_max` count as zero.
pub fn affine_rank(points: &[&Point], tol: f64) -> usize {
    let sv = centered_singular_values(points);
    match sv.first() {
        Some(&top) if top > 0.0 => sv.iter().filter(|&&s| s > tol * top).count(),
        _ => 0,
    }
}

/// Sine of the angle between two vectors, computed from the rejection so
/// that nearly parallel vectors keep full relative precision.
pub fn parallel_residual(a: &Point, b: &Point) -> f64 {
    let (Some(ua), Some(ub)) = (a.normalized(), b.normalized()) else {
        return f64::INFINITY;
    };
    let c = ua.dot(&ub);
    ua.add_scaled(-c, &ub).norm()
}

/// Planar quadrilateral `(A, B, C, D)` in cyclic order.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarQuad {
    pub a: Point,
    pub b: Point,
    pub c: Point,
    pub d: Point,
    pub tol: Tolerances,
}

impl PlanarQuad {
    pub fn new(a: Point, b: Point, c: Point, d: Point, tol: Tolerances) -> Result<Self> {
        let n = a.dim();
        for p in [&b, &c, &d] {
            if p.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: p.dim(),
                });
            }
        }
        if n < 2 {
            return Err(Error::DimensionTooLow {
                required: 2,
                found: n,
            });
        }
        if ![&a, &b, &c, &d].iter().all(|p| p.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        let pts = [&a, &b, &c, &d];
        let residual = planarity_residual(&pts).ok_or(Error::CoincidentPoints)?;
        if residual > tol.incidence {
            return Err(Error::NotPlanar { residual });
        }
        for k in 0..4 {
            let tri = [pts[k], pts[(k + 1) % 4], pts[(k + 2) % 4]];
            match relative_singular_value(&tri, 1) {
                Some(r) if r > tol.incidence => {}
                _ => return Err(Error::CollinearTriple),
            }
        }
        Ok(PlanarQuad { a, b, c, d, tol })
    }

    pub fn vertices(&self) -> [&Point; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.vertices())
    }

    /// Standard convexity predicate: all turns along the boundary have the same
    /// strict orientation in plane coordinates.
    pub fn is_convex(&self) -> bool {
        let frame = PlaneFrame::spanning(&self.a, &self.b, &self.d, &self.c);
        let z: Vec<Complex64> = self.vertices().iter().map(|p| frame.to_complex(p)).collect();
        let mut sign = 0.0;
        for k in 0..4 {
            let e1 = z[(k + 1) % 4] - z[k];
            let e2 = z[(k + 2) % 4] - z[(k + 1) % 4];
            let cross = e1.re * e2.im - e1.im * e2.re;
            if cross == 0.0 {
                return false;
            }
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
        true
    }
}

/// Intersection of the diagonals `(AC)` and `(BD)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalIntersection {
    pub m: Point,
    /// Affine parameter of `m` on `A -> C`.
    pub t_ac: f64,
    /// Affine parameter of `m` on `B -> D`.
    pub t_bd: f64,
}

/// Least-squares intersection of two lines `p + s u` and `q + t v`.
/// Returns `(s, t, gap)` where `gap` is the distance between the closest points.
fn closest_parameters(p: &Point, u: &Point, q: &Point, v: &Point, tol: f64) -> Result<(f64, f64, f64)> {
    if parallel_residual(u, v) <= tol {
        return Err(Error::DegenerateQuad);
    }
    let w = q - p;
    let uu = u.dot(u);
    let vv = v.dot(v);
    let uv = u.dot(v);
    let uw = u.dot(&w);
    let vw = v.dot(&w);
    // s u - t v ~ w
    let det = uu * vv - uv * uv;
    let s = (uw * vv - uv * vw) / det;
    let t = (uv * uw - uu * vw) / det;
    let gap = p.add_scaled(s, u).dist(&q.add_scaled(t, v));
    Ok((s, t, gap))
}

pub fn intersect_diagonals(q: &PlanarQuad) -> Result<DiagonalIntersection> {
    let u = &q.c - &q.a;
    let v = &q.d - &q.b;
    let (t_ac, t_bd, gap) = closest_parameters(&q.a, &u, &q.b, &v, q.tol.incidence)?;
    // the gap grows with the distance of M from the quad, so compare it with that distance
    let reach = q.diameter().max(t_ac.abs() * u.norm()).max(t_bd.abs() * v.norm());
    if gap > q.tol.incidence * reach {
        return Err(Error::NotPlanar { residual: gap / reach });
    }
    let m = q.a.add_scaled(t_ac, &u).lerp(&q.b.add_scaled(t_bd, &v), 0.5);
    Ok(DiagonalIntersection { m, t_ac, t_bd })
}

/// Ratio of directed diagonal segments for a point at affine parameter `t`
/// on the directed diagonal from parameter 0 to 1: `l(M, end) / l(M, start)`.
pub fn segment_ratio(t: f64) -> f64 {
    (1.0 - t) / (-t)
}

/// `(q(AC), q(BD))`, the ratios `l(M,C)/l(M,A)` and `l(M,D)/l(M,B)`.
pub fn diagonal_ratios(q: &PlanarQuad) -> Result<(f64, f64)> {
    let x = intersect_diagonals(q)?;
    let tol = q.tol.incidence;
    for t in [x.t_ac, x.t_bd] {
        if t.abs() <= tol || (1.0 - t).abs() <= tol {
            return Err(Error::VertexOnDiagonal);
        }
    }
    Ok((segment_ratio(x.t_ac), segment_ratio(x.t_bd)))
}

/// Product of directed-length ratios `l(P_i, X_i) / l(X_i, P_{i+1})` over the
/// closed polygon `P_1 .. P_{n+1}` of a simplex in R^n.
pub fn menelaus_product(vertices: &[Point], division_points: &[Point], tol: &Tolerances) -> Result<f64> {
    let k = vertices.len();
    if k < 3 || division_points.len() != k {
        return Err(Error::InvalidInput(format!(
            "expected n+1 >= 3 vertices and as many division points, got {} and {}",
            k,
            division_points.len()
        )));
    }
    let n = k - 1;
    for p in vertices.iter().chain(division_points) {
        if p.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.dim(),
            });
        }
    }
    let refs: Vec<&Point> = vertices.iter().collect();
    if affine_rank(&refs, tol.incidence) != n {
        return Err(Error::GeneralPositionViolated);
    }
    let mut product = 1.0;
    for i in 0..k {
        let p = &vertices[i];
        let d = &vertices[(i + 1) % k] - p;
        let x = &division_points[i];
        let rel = x - p;
        let dd = d.dot(&d);
        let xi = rel.dot(&d) / dd;
        let off = rel.add_scaled(-xi, &d).norm();
        if off > tol.incidence * dd.sqrt() {
            return Err(Error::PointOffLine { index: i });
        }
        if xi.abs() <= tol.incidence || (1.0 - xi).abs() <= tol.incidence {
            return Err(Error::PointOffLine { index: i });
        }
        product *= xi / (1.0 - xi);
    }
    Ok(product)
}

/// Orthonormal frame of a 2-plane, used to identify the plane with C.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFrame {
    pub origin: Point,
    pub e1: Point,
    pub e2: Point,
}

impl PlaneFrame {
    /// Frame at `origin` with `e1` along `x - origin` and `e2` along the part of
    /// `y - origin` orthogonal to it; `z` is the fallback when `y` is on the line.
    /// A collinear configuration gets an arbitrary orthogonal `e2`.
    pub fn spanning(origin: &Point, x: &Point, y: &Point, z: &Point) -> PlaneFrame {
        let n = origin.dim();
        let mut dirs = [x - origin, y - origin, z - origin];
        dirs.sort_by(|a, b| b.norm_sq().total_cmp(&a.norm_sq()));
        let e1 = (x - origin)
            .normalized()
            .or_else(|| dirs[0].normalized())
            .unwrap_or_else(|| unit(n, 0));
        let mut e2 = None;
        for cand in [y - origin, z - origin, x - origin] {
            let r = cand.add_scaled(-cand.dot(&e1), &e1);
            if r.norm() > 1e-12 * cand.norm().max(f64::MIN_POSITIVE) {
                e2 = r.normalized();
                break;
            }
        }
        let e2 = e2.unwrap_or_else(|| {
            (0..n)
                .map(|k| {
                    let v = unit(n, k);
                    v.add_scaled(-v.dot(&e1), &e1)
                })
                .max_by(|a, b| a.norm_sq().total_cmp(&b.norm_sq()))
                .and_then(|v| v.normalized())
                .unwrap_or_else(|| unit(n, 1))
        });
        PlaneFrame {
            origin: origin.clone(),
            e1,
            e2,
        }
    }

    pub fn to_complex(&self, p: &Point) -> Complex64 {
        let r = p - &self.origin;
        Complex64::new(r.dot(&self.e1), r.dot(&self.e2))
    }

    pub fn from_complex(&self, z: Complex64) -> Point {
        self.origin.add_scaled(z.re, &self.e1).add_scaled(z.im, &self.e2)
    }
}

fn unit(n: usize, k: usize) -> Point {
    let mut v = vec![0.0; n];
    v[k % n] = 1.0;
    Point(v)
}

/// Scale-invariant concircularity residual of four planar points: the
/// determinant of rows `(x, y, x^2 + y^2, 1)` in plane coordinates after
/// centering at the centroid and scaling to unit diameter.
pub fn circularity_residual(a: &Point, b: &Point, c: &Point, d: &Point, tol: &Tolerances) -> Result<f64> {
    let pts = [a, b, c, d];
    let n = a.dim();
    for p in &pts[1..] {
        if p.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.dim(),
            });
        }
    }
    let residual = planarity_residual(&pts).ok_or(Error::CoincidentPoints)?;
    if residual > tol.incidence {
        return Err(Error::NotPlanar { residual });
    }
    match relative_singular_value(&[a, b, c], 1) {
        Some(r) if r > tol.incidence => {}
        _ => return Err(Error::CollinearTriple),
    }
    let diam = diameter(&pts);
    let frame = PlaneFrame::spanning(a, b, c, d);
    let z: Vec<Complex64> = pts.iter().map(|p| frame.to_complex(p)).collect();
    let centroid = z.iter().sum::<Complex64>() / 4.0;
    let rows: Vec<[f64; 4]> = z
        .iter()
        .map(|w| {
            let w = (w - centroid) / diam;
            [w.re, w.im, w.norm_sqr(), 1.0]
        })
        .collect();
    let m = nalgebra::Matrix4::from_fn(|r, c| rows[r][c]);
    Ok(m.determinant().abs())
}

/// Complex cross-ratio `(a-b)(b-c)^{-1}(c-d)(d-a)^{-1}` of four planar points
/// in an orthonormal frame of their plane. The frame orientation is fixed by
/// `b - a` and `d - a`; for concircular points the value is real and does not
/// depend on that choice.
pub fn cross_ratio_complex(a: &Point, b: &Point, c: &Point, d: &Point) -> Result<Complex64> {
    let frame = PlaneFrame::spanning(a, b, d, c);
    let [za, zb, zc, zd] = [a, b, c, d].map(|p| frame.to_complex(p));
    complex_cross_ratio(za, zb, zc, zd)
}

pub fn complex_cross_ratio(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Complex64> {
    let scale = (a - c).norm().max((b - d).norm()).max((a - b).norm());
    let tiny = 1e-14 * scale;
    if (b - c).norm() <= tiny || (d - a).norm() <= tiny || (a - b).norm() <= tiny || (c - d).norm() <= tiny {
        return Err(Error::CoincidentPoints);
    }
    Ok((a - b) / (b - c) * (c - d) / (d - a))
}

/// Real cross-ratio of four concircular points.
pub fn cross_ratio(a: &Point, b: &Point, c: &Point, d: &Point, tol: &Tolerances) -> Result<f64> {
    let diam = diameter(&[a, b, c, d]);
    for (p, q) in [(a, b), (b, c), (c, d), (d, a)] {
        if p.dist(q) <= tol.incidence * diam {
            return Err(Error::CoincidentPoints);
        }
    }
    let residual = match circularity_residual(a, b, c, d, tol) {
        Ok(r) => r,
        Err(Error::NotPlanar { residual }) => return Err(Error::NotConcircular { residual }),
        Err(e) => return Err(e),
    };
    if residual > tol.incidence {
        return Err(Error::NotConcircular { residual });
    }
    let z = cross_ratio_complex(a, b, c, d)?;
    if z.im.abs() > tol.incidence * z.norm().max(1.0) {
        return Err(Error::NotConcircular {
            residual: z.im.abs() / z.norm(),
        });
    }
    Ok(z.re)
}

/// Vector of R^{N+1,1} in the basis `e_1..e_N, e_0, e_inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinkowskiVec {
    pub spatial: Vec<f64>,
    pub e0: f64,
    pub einf: f64,
}

impl MinkowskiVec {
    pub fn new(spatial: Vec<f64>, e0: f64, einf: f64) -> Self {
        MinkowskiVec { spatial, e0, einf }
    }

    pub fn e0(n: usize) -> Self {
        MinkowskiVec::new(vec![0.0; n], 1.0, 0.0)
    }

    pub fn einf(n: usize) -> Self {
        MinkowskiVec::new(vec![0.0; n], 0.0, 1.0)
    }

    pub fn basis(n: usize, k: usize) -> Self {
        let mut s = vec![0.0; n];
        s[k] = 1.0;
        MinkowskiVec::new(s, 0.0, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.spatial.len()
    }

    /// Flat layout `(spatial.., e0, einf)`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.spatial.clone();
        v.push(self.e0);
        v.push(self.einf);
        v
    }

    pub fn from_flat(v: &[f64]) -> Result<Self> {
        if v.len() < 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                found: v.len(),
            });
        }
        let n = v.len() - 2;
        Ok(MinkowskiVec::new(v[..n].to_vec(), v[n], v[n + 1]))
    }

    /// Euclidean norm of the components, used for relative tolerances.
    pub fn component_norm(&self) -> f64 {
        (self.spatial.iter().map(|x| x * x).sum::<f64>() + self.e0 * self.e0 + self.einf * self.einf).sqrt()
    }

    pub fn scale(&self, k: f64) -> Self {
        MinkowskiVec::new(self.spatial.iter().map(|x| x * k).collect(), self.e0 * k, self.einf * k)
    }

    pub fn add_scaled(&self, k: f64, o: &MinkowskiVec) -> Self {
        MinkowskiVec::new(
            self.spatial.iter().zip(&o.spatial).map(|(a, b)| a + k * b).collect(),
            self.e0 + k * o.e0,
            self.einf + k * o.einf,
        )
    }

    pub fn sub(&self, o: &MinkowskiVec) -> Self {
        self.add_scaled(-1.0, o)
    }

    pub fn add(&self, o: &MinkowskiVec) -> Self {
        self.add_scaled(1.0, o)
    }
}

/// `<x, y> = sum x_i y_i - (x.e0 y.einf + x.einf y.e0) / 2`.
pub fn minkowski_dot(x: &MinkowskiVec, y: &MinkowskiVec) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let s: f64 = x.spatial.iter().zip(&y.spatial).map(|(a, b)| a * b).sum();
    Ok(s - 0.5 * (x.e0 * y.einf + x.einf * y.e0))
}

/// `f + e_0 + |f|^2 e_inf`.
pub fn lift_to_lightcone(f: &Point) -> MinkowskiVec {
    MinkowskiVec::new(f.coords().to_vec(), 1.0, f.norm_sq())
}

/// Splits an isotropic vector `y = s^{-1} (f + e_0 + |f|^2 e_inf)` into `(s, f)`.
pub fn project_from_lightcone(y: &MinkowskiVec, tol: &Tolerances) -> Result<(f64, Point)> {
    let norm = y.component_norm();
    let q = minkowski_dot(y, y)?;
    if q.abs() > tol.incidence * norm * norm {
        return Err(Error::NotOnLightCone {
            residual: q.abs() / (norm * norm),
        });
    }
    if y.e0.abs() <= tol.incidence * norm {
        return Err(Error::ZeroE0Component);
    }
    let s = 1.0 / y.e0;
    Ok((s, Point::new(y.spatial.iter().map(|x| x * s).collect())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> Point {
        Point::from_slice(c)
    }

    fn quad(pts: [&[f64]; 4]) -> Result<PlanarQuad> {
        PlanarQuad::new(p(pts[0]), p(pts[1]), p(pts[2]), p(pts[3]), Tolerances::default())
    }

    // Independent oracle: Cramer's rule on the 2x2 line system in the plane.
    fn cramer_intersection(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> (f64, f64) {
        let u = [c[0] - a[0], c[1] - a[1]];
        let v = [d[0] - b[0], d[1] - b[1]];
        let w = [b[0] - a[0], b[1] - a[1]];
        // s u - t v = w
        let det = u[0] * (-v[1]) - (-v[0]) * u[1];
        let s = (w[0] * (-v[1]) - (-v[0]) * w[1]) / det;
        let t = (u[0] * w[1] - w[0] * u[1]) / det;
        (s, t)
    }

    #[test]
    fn unit_square_diagonals() {
        let q = quad([&[0., 0.], &[1., 0.], &[1., 1.], &[0., 1.]]).unwrap();
        let x = intersect_diagonals(&q).unwrap();
        assert!((x.m[0] - 0.5).abs() < 1e-15 && (x.m[1] - 0.5).abs() < 1e-15);
        assert!((x.t_ac - 0.5).abs() < 1e-15 && (x.t_bd - 0.5).abs() < 1e-15);
        let (qa, qb) = diagonal_ratios(&q).unwrap();
        assert!((qa + 1.0).abs() < 1e-15 && (qb + 1.0).abs() < 1e-15);
    }

    #[test]
    fn skewed_quad_matches_cramer_oracle() {
        let (s, t) = cramer_intersection([0., 0.], [1., 0.], [1., 1.], [0.25, 1.]);
        assert!((s - 4.0 / 7.0).abs() < 1e-15 && (t - 4.0 / 7.0).abs() < 1e-15);
        let q = quad([&[0., 0.], &[1., 0.], &[1., 1.], &[0.25, 1.]]).unwrap();
        let x = intersect_diagonals(&q).unwrap();
        assert!((x.t_ac - s).abs() < 1e-14);
        assert!((x.t_bd - t).abs() < 1e-14);
        assert!((x.m[0] - 4.0 / 7.0).abs() < 1e-14 && (x.m[1] - 4.0 / 7.0).abs() < 1e-14);
        let (_, q_bd) = diagonal_ratios(&q).unwrap();
        assert!((q_bd + 0.75).abs() < 1e-14);
    }

    #[test]
    fn parallel_diagonals_are_degenerate() {
        // AC and BD both horizontal
        let q = quad([&[0., 0.], &[0., 1.], &[1., 0.], &[1., 1.]]);
        match q {
            Ok(q) => assert_eq!(intersect_diagonals(&q), Err(Error::DegenerateQuad)),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn non_planar_quad_rejected() {
        let q = quad([&[0., 0., 0.], &[1., 0., 0.], &[1., 1., 0.1], &[0., 1., 0.]]);
        assert!(matches!(q, Err(Error::NotPlanar { .. })));
    }

    #[test]
    fn reversed_diagonal_inverts_ratio() {
        let q = quad([&[0., 0.], &[1., 0.], &[1., 1.], &[0.25, 1.]]).unwrap();
        let (qa, qb) = diagonal_ratios(&q).unwrap();
        // C, D, A, B reverses both diagonals
        let r = quad([&[1., 1.], &[0.25, 1.], &[0., 0.], &[1., 0.]]).unwrap();
        let (ra, rb) = diagonal_ratios(&r).unwrap();
        assert!((qa * ra - 1.0).abs() < 1e-14);
        assert!((qb * rb - 1.0).abs() < 1e-14);
    }

    #[test]
    fn affine_rank_examples() {
        let sq = [p(&[0., 0., 1.]), p(&[1., 0., 1.]), p(&[1., 1., 1.]), p(&[0., 1., 1.])];
        assert_eq!(affine_rank(&sq.iter().collect::<Vec<_>>(), 1e-9), 2);
        let mut cube = Vec::new();
        for i in 0..8 {
            cube.push(p(&[(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64]));
        }
        assert_eq!(affine_rank(&cube.iter().collect::<Vec<_>>(), 1e-9), 3);
        let line = [p(&[0., 0.]), p(&[1., 1.]), p(&[3., 3.])];
        assert_eq!(affine_rank(&line.iter().collect::<Vec<_>>(), 1e-9), 1);
    }

    #[test]
    fn menelaus_triangle_line() {
        let tol = Tolerances::default();
        let v = [p(&[0., 0.]), p(&[1., 0.]), p(&[0., 1.])];
        // line y = x - 1/4 meets the three edge lines at these points
        let d = [p(&[0.25, 0.]), p(&[0.625, 0.375]), p(&[0., -0.25])];
        let prod = menelaus_product(&v, &d, &tol).unwrap();
        assert!((prod + 1.0).abs() < 1e-14);
        let mids = [p(&[0.5, 0.]), p(&[0.5, 0.5]), p(&[0., 0.5])];
        let prod = menelaus_product(&v, &mids, &tol).unwrap();
        assert!((prod - 1.0).abs() < 1e-14);
    }

    #[test]
    fn menelaus_errors() {
        let tol = Tolerances::default();
        let v = [p(&[0., 0.]), p(&[1., 0.]), p(&[2., 0.])];
        let d = [p(&[0.5, 0.]), p(&[1.5, 0.]), p(&[1.0, 0.])];
        assert_eq!(menelaus_product(&v, &d, &tol), Err(Error::GeneralPositionViolated));
        let v = [p(&[0., 0.]), p(&[1., 0.]), p(&[0., 1.])];
        let d = [p(&[0.5, 0.1]), p(&[0.5, 0.5]), p(&[0., 0.5])];
        assert_eq!(menelaus_product(&v, &d, &tol), Err(Error::PointOffLine { index: 0 }));
    }

    #[test]
    fn circularity_examples() {
        let tol = Tolerances::default();
        let r = circularity_residual(&p(&[1., 0.]), &p(&[0., 1.]), &p(&[-1., 0.]), &p(&[0., -1.]), &tol).unwrap();
        assert!(r < 1e-15);
        let r = circularity_residual(&p(&[0., 0.]), &p(&[1., 0.]), &p(&[1., 1.]), &p(&[0., 1.]), &tol).unwrap();
        assert!(r < 1e-15);
        // circumcircle of the first three has center (0.5, 0.5), radius sqrt(0.5);
        // (0, 2) is at distance sqrt(2.5) from the center, so it is off the circle
        let r = circularity_residual(&p(&[0., 0.]), &p(&[1., 0.]), &p(&[1., 1.]), &p(&[0., 2.]), &tol).unwrap();
        assert!(r > 1e-3);
        assert_eq!(
            circularity_residual(&p(&[0., 0.]), &p(&[1., 0.]), &p(&[2., 0.]), &p(&[0., 2.]), &tol),
            Err(Error::CollinearTriple)
        );
    }

    #[test]
    fn cross_ratio_examples() {
        let tol = Tolerances::default();
        let s = 0.5f64.sqrt();
        let q = cross_ratio(&p(&[s, s]), &p(&[-s, s]), &p(&[-s, -s]), &p(&[s, -s]), &tol).unwrap();
        assert!((q + 1.0).abs() < 1e-14);
        // complex arithmetic: (0-1)/(1-(1+i)) = 1/i, ((1+i)-i)/(i-0) = 1/i, product -1
        let z = complex_cross_ratio(
            Complex64::new(0., 0.),
            Complex64::new(1., 0.),
            Complex64::new(1., 1.),
            Complex64::new(0., 1.),
        )
        .unwrap();
        assert!((z - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let q = cross_ratio(&p(&[0., 0., 2.]), &p(&[1., 0., 2.]), &p(&[1., 1., 2.]), &p(&[0., 1., 2.]), &tol).unwrap();
        assert!((q + 1.0).abs() < 1e-14);
        assert!(matches!(
            cross_ratio(&p(&[0., 0.]), &p(&[1., 0.]), &p(&[1., 1.]), &p(&[0., 2.]), &tol),
            Err(Error::NotConcircular { .. })
        ));
        assert_eq!(
            cross_ratio(&p(&[0., 0.]), &p(&[0., 0.]), &p(&[1., 1.]), &p(&[0., 1.]), &tol),
            Err(Error::CoincidentPoints)
        );
    }

    #[test]
    fn minkowski_examples() {
        let e0 = MinkowskiVec::e0(2);
        let einf = MinkowskiVec::einf(2);
        assert_eq!(minkowski_dot(&e0, &einf).unwrap(), -0.5);
        assert_eq!(minkowski_dot(&e0, &e0).unwrap(), 0.0);
        let v = MinkowskiVec::basis(2, 0).add(&e0).add(&einf);
        assert_eq!(minkowski_dot(&v, &v).unwrap(), 0.0);
        assert!(matches!(
            minkowski_dot(&e0, &MinkowskiVec::e0(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lift_examples() {
        assert_eq!(lift_to_lightcone(&p(&[0., 0.])), MinkowskiVec::e0(2));
        let l = lift_to_lightcone(&p(&[1., 0.]));
        assert_eq!(l, MinkowskiVec::basis(2, 0).add(&MinkowskiVec::e0(2)).add(&MinkowskiVec::einf(2)));
        let l = lift_to_lightcone(&p(&[3., 4.]));
        assert_eq!(l.einf, 25.0);
        assert_eq!(minkowski_dot(&l, &l).unwrap(), 0.0);
    }

    #[test]
    fn projection_examples() {
        let tol = Tolerances::default();
        let (s, f) = project_from_lightcone(&MinkowskiVec::e0(2), &tol).unwrap();
        assert_eq!(s, 1.0);
        assert_eq!(f, p(&[0., 0.]));
        let y = lift_to_lightcone(&p(&[1., 0.])).scale(2.0);
        let (s, f) = project_from_lightcone(&y, &tol).unwrap();
        assert_eq!(s, 0.5);
        assert_eq!(f, p(&[1., 0.]));
        assert_eq!(project_from_lightcone(&MinkowskiVec::einf(2), &tol), Err(Error::ZeroE0Component));
        assert!(matches!(
            project_from_lightcone(&MinkowskiVec::basis(2, 0), &tol),
            Err(Error::NotOnLightCone { .. })
        ));
    }

    #[test]
    fn convexity_predicate() {
        assert!(quad([&[0., 0.], &[1., 0.], &[1., 1.], &[0., 1.]]).unwrap().is_convex());
        // crossed (bow-tie)
        assert!(!quad([&[0., 0.], &[1., 1.], &[1., 0.], &[0., 1.]]).unwrap().is_convex());
        // dart (non-convex, embedded)
        assert!(!quad([&[0., 0.], &[2., 0.], &[0.5, 0.5], &[0., 2.]]).unwrap().is_convex());
    }
}
