//! Discrete Koenigs nets: the multiplicative one-form on quad diagonals, its
//! closedness, the vertex function nu, dual quads and dual nets, Moutard
//! representatives and the projective characterizations in dimensions 2 and 3.

use std::collections::VecDeque;

use crate::error::{Error, Result, Site};
use crate::geom::{
    diagonal_ratios, diameter, intersect_diagonals, parallel_residual, relative_singular_value, PlanarQuad, Point,
    Tolerances,
};
use crate::qnet::{HexCell, Lattice, Parity, QNet, QuadCell, VertexScalar};

/// Ratios of directed diagonal segments for every elementary quad.
///
/// Per quad `(f, f_i, f_ij, f_j)` two values are kept: `q(f -> f_ij)` on the
/// main diagonal and `q(f_i -> f_j)` on the cross diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalForm {
    lattice: Lattice,
    main: Vec<f64>,
    cross: Vec<f64>,
}

impl DiagonalForm {
    /// A form given per quad as `(q(f -> f_ij), q(f_i -> f_j))`, for any `m`.
    pub fn from_fn(lattice: Lattice, mut q: impl FnMut(&QuadCell) -> (f64, f64)) -> Result<Self> {
        let mut main = vec![f64::NAN; lattice.slot_count()];
        let mut cross = vec![f64::NAN; lattice.slot_count()];
        for cell in lattice.quads() {
            let (a, b) = q(&cell);
            if !(a.is_finite() && b.is_finite()) || a == 0.0 || b == 0.0 {
                return Err(Error::InvalidInput(format!("q must be finite and nonzero at {:?}", cell.site())));
            }
            let slot = lattice.quad_slot(&cell);
            main[slot] = a;
            cross[slot] = b;
        }
        Ok(DiagonalForm { lattice, main, cross })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// `q(f -> f_ij)`.
    pub fn q_main(&self, cell: &QuadCell) -> f64 {
        self.main[self.lattice.quad_slot(cell)]
    }

    /// `q(f_i -> f_j)`.
    pub fn q_cross(&self, cell: &QuadCell) -> f64 {
        self.cross[self.lattice.quad_slot(cell)]
    }

    /// The value on the black diagonal, oriented away from its lexicographically smaller end.
    pub fn q_black(&self, cell: &QuadCell) -> f64 {
        self.canonical(cell, Parity::Black)
    }

    /// The value on the white diagonal, oriented away from its lexicographically smaller end.
    pub fn q_white(&self, cell: &QuadCell) -> f64 {
        self.canonical(cell, Parity::White)
    }

    fn canonical(&self, cell: &QuadCell, colour: Parity) -> f64 {
        if self.lattice.parity(cell.corners[0]) == colour {
            self.q_main(cell)
        } else {
            // u + e_j precedes u + e_i lexicographically when i < j
            1.0 / self.q_cross(cell)
        }
    }

    /// `q` on the directed diagonal `from -> to`, if the two vertices are
    /// opposite corners of an elementary quad.
    pub fn q(&self, from: usize, to: usize) -> Option<f64> {
        let a = self.lattice.multi_index(from);
        let b = self.lattice.multi_index(to);
        let mut axes = Vec::new();
        for k in 0..a.len() {
            match b[k] as isize - a[k] as isize {
                0 => {}
                d @ (-1 | 1) => axes.push((k, d)),
                _ => return None,
            }
        }
        let [(i, di), (j, dj)] = axes[..] else {
            return None;
        };
        let base: Vec<usize> = a.iter().zip(&b).map(|(x, y)| *x.min(y)).collect();
        let cell = self.lattice.quad_at(self.lattice.index(&base), i, j)?;
        Some(match (di, dj) {
            (1, 1) => self.q_main(&cell),
            (-1, -1) => 1.0 / self.q_main(&cell),
            (-1, 1) => self.q_cross(&cell),
            _ => 1.0 / self.q_cross(&cell),
        })
    }
}

/// Computes `q` on every diagonal.
pub fn build_q_form(net: &QNet, tol: &Tolerances) -> Result<DiagonalForm> {
    let lattice = net.lattice().clone();
    let mut main = vec![f64::NAN; lattice.slot_count()];
    let mut cross = vec![f64::NAN; lattice.slot_count()];
    for cell in lattice.quads() {
        let quad = net.planar_quad(&cell, *tol)?;
        let (q_ac, q_bd) = diagonal_ratios(&quad).map_err(|e| e.at(cell.site()))?;
        let slot = lattice.quad_slot(&cell);
        main[slot] = q_ac;
        cross[slot] = q_bd;
    }
    Ok(DiagonalForm { lattice, main, cross })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleResidual {
    pub site: Site,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosednessReport {
    pub is_koenigs: bool,
    /// Largest `|product - 1|` over the cycles that decide the verdict.
    pub max_residual: f64,
    pub cycles: Vec<CycleResidual>,
    pub failing: Vec<Site>,
    /// For `m >= 3`: largest residual of the planar four-cycles, which the triangles imply.
    pub slice_residual: Option<f64>,
}

fn cycle_residual(form: &DiagonalForm, cycle: &[usize]) -> f64 {
    let mut prod = 1.0;
    for k in 0..cycle.len() {
        let q = form
            .q(cycle[k], cycle[(k + 1) % cycle.len()])
            .expect("cycle steps are quad diagonals");
        prod *= q;
    }
    (prod - 1.0).abs()
}

/// The four-cycle `v+e_i -> v+e_j -> v-e_i -> v-e_j` around an interior vertex.
fn square_cycle(lattice: &Lattice, v: usize, i: usize, j: usize) -> Option<[usize; 4]> {
    Some([
        lattice.shift(v, i, 1)?,
        lattice.shift(v, j, 1)?,
        lattice.shift(v, i, -1)?,
        lattice.shift(v, j, -1)?,
    ])
}

/// Neighbours of a hexahedron corner inside the hexahedron, in axis order.
fn corner_neighbours(lattice: &Lattice, hex: &HexCell, corner: [bool; 3]) -> ([usize; 3], usize) {
    let base = hex.corners[0];
    let at = |bits: [bool; 3]| {
        let d: Vec<(usize, isize)> = (0..3).map(|k| (hex.axes[k], bits[k] as isize)).collect();
        lattice.offset(base, &d).expect("corner inside the hexahedron")
    };
    let nb = std::array::from_fn(|k| {
        let mut b = corner;
        b[k] = !b[k];
        at(b)
    });
    (nb, at(corner))
}

const CUBE_CORNERS: [[bool; 3]; 8] = [
    [false, false, false],
    [true, false, false],
    [false, true, false],
    [false, false, true],
    [true, true, false],
    [true, false, true],
    [false, true, true],
    [true, true, true],
];

/// Closedness of the diagonal one-form on the black and white graphs.
///
/// For `m = 2` the elementary cycles are the four-cycles around interior
/// vertices; for `m >= 3` they are the triangles through the three
/// neighbours of every hexahedron corner.
pub fn check_closedness(net: &QNet, tol: &Tolerances) -> Result<ClosednessReport> {
    let form = build_q_form(net, tol)?;
    closedness_of_form(&form, tol)
}

pub fn closedness_of_form(form: &DiagonalForm, tol: &Tolerances) -> Result<ClosednessReport> {
    let lattice = form.lattice();
    let mut squares = Vec::new();
    for v in 0..lattice.len() {
        for (i, j) in lattice.axis_pairs() {
            if let Some(c) = square_cycle(lattice, v, i, j) {
                squares.push(CycleResidual {
                    site: Site::Vertex(lattice.multi_index(v)),
                    residual: cycle_residual(form, &c),
                });
            }
        }
    }
    let (cycles, slice_residual) = if lattice.m() == 2 {
        (squares, None)
    } else {
        let slice = squares.iter().map(|c| c.residual).fold(0.0, f64::max);
        let mut tri = Vec::new();
        for hex in lattice.hexahedra()? {
            let mut worst: f64 = 0.0;
            for corner in CUBE_CORNERS {
                let (nb, _) = corner_neighbours(lattice, &hex, corner);
                worst = worst.max(cycle_residual(form, &nb));
            }
            tri.push(CycleResidual {
                site: Site::Hexahedron { base: hex.base.clone() },
                residual: worst,
            });
        }
        (tri, Some(slice))
    };
    let max_residual = cycles.iter().map(|c| c.residual).fold(0.0, f64::max);
    let mut failing: Vec<Site> = Vec::new();
    for c in &cycles {
        if !(c.residual <= tol.product) && !failing.contains(&c.site) {
            failing.push(c.site.clone());
        }
    }
    Ok(ClosednessReport {
        is_koenigs: failing.is_empty(),
        max_residual,
        cycles,
        failing,
        slice_residual,
    })
}

/// Prescribed value of nu at one vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseValue {
    pub u: Vec<usize>,
    pub value: f64,
}

impl BaseValue {
    pub fn new(u: Vec<usize>, value: f64) -> Self {
        BaseValue { u, value }
    }

    /// Value 1 at the origin (black) and at `e_1` (white).
    pub fn default_pair(m: usize) -> (BaseValue, BaseValue) {
        let mut e1 = vec![0; m];
        e1[0] = 1;
        (BaseValue::new(vec![0; m], 1.0), BaseValue::new(e1, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KoenigsData {
    pub nu: VertexScalar,
    /// Largest `|nu_to / (nu_from q) - 1|` over all diagonals after propagation.
    pub closedness_residual: f64,
}

fn diagonal_edges(form: &DiagonalForm) -> Vec<(usize, usize, f64)> {
    let lattice = form.lattice();
    let mut edges = Vec::new();
    for cell in lattice.quads() {
        let [f, fi, fij, fj] = cell.corners;
        edges.push((f, fij, form.q_main(&cell)));
        edges.push((fi, fj, form.q_cross(&cell)));
    }
    edges
}

fn check_base(lattice: &Lattice, base: &BaseValue, colour: Parity) -> Result<usize> {
    let u: Vec<isize> = base.u.iter().map(|&a| a as isize).collect();
    if !lattice.contains(&u) {
        return Err(Error::InvalidInput(format!("base vertex {:?} outside the window", base.u)));
    }
    let idx = lattice.index(&base.u);
    if lattice.parity(idx) != colour {
        return Err(Error::InvalidInput(format!(
            "base vertex {:?} has the wrong colour for this base",
            base.u
        )));
    }
    if base.value == 0.0 || !base.value.is_finite() {
        return Err(Error::ZeroNu.at(Site::Vertex(base.u.clone())));
    }
    Ok(idx)
}

/// Breadth-first propagation of nu along diagonals without the final consistency
/// verdict. Works on any Q-net; the residual measures how far the form is from exact.
pub fn propagate_nu(net: &QNet, base_black: &BaseValue, base_white: &BaseValue, tol: &Tolerances) -> Result<KoenigsData> {
    let form = build_q_form(net, tol)?;
    let lattice = net.lattice();
    let b = check_base(lattice, base_black, Parity::Black)?;
    let w = check_base(lattice, base_white, Parity::White)?;
    let edges = diagonal_edges(&form);
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lattice.len()];
    for &(a, c, q) in &edges {
        adj[a].push((c, q));
        adj[c].push((a, 1.0 / q));
    }
    let mut nu = vec![f64::NAN; lattice.len()];
    let mut queue = VecDeque::new();
    nu[b] = base_black.value;
    nu[w] = base_white.value;
    queue.push_back(b);
    queue.push_back(w);
    while let Some(v) = queue.pop_front() {
        for &(n, q) in &adj[v] {
            if nu[n].is_nan() {
                nu[n] = nu[v] * q;
                queue.push_back(n);
            }
        }
    }
    if let Some(k) = nu.iter().position(|x| x.is_nan()) {
        return Err(Error::InvalidInput(format!(
            "vertex {:?} is not reachable along diagonals",
            lattice.multi_index(k)
        )));
    }
    let closedness_residual = edges
        .iter()
        .map(|&(a, c, q)| (nu[c] / (nu[a] * q) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(KoenigsData {
        nu: VertexScalar::new(nu),
        closedness_residual,
    })
}

/// The vertex function nu with `nu_ij / nu = q(f -> f_ij)` and `nu_j / nu_i = q(f_i -> f_j)`,
/// normalised by one black and one white base value.
pub fn integrate_nu(net: &QNet, base_black: &BaseValue, base_white: &BaseValue, tol: &Tolerances) -> Result<KoenigsData> {
    let kd = propagate_nu(net, base_black, base_white, tol)?;
    if !(kd.closedness_residual <= tol.product) {
        return Err(Error::NotKoenigs {
            residual: kd.closedness_residual,
        });
    }
    Ok(kd)
}

/// A representative of the dual quadrilateral with the diagonal intersection at the origin.
pub fn dualize_quad(q: &PlanarQuad) -> Result<PlanarQuad> {
    let x = intersect_diagonals(q)?;
    let ac = &q.c - &q.a;
    let bd = &q.d - &q.b;
    let e1 = ac.normalized().ok_or(Error::DegenerateQuad)?;
    let e2 = bd.normalized().ok_or(Error::DegenerateQuad)?;
    let alpha = (&q.a - &x.m).dot(&e1);
    let beta = (&q.b - &x.m).dot(&e2);
    let gamma = (&q.c - &x.m).dot(&e1);
    let delta = (&q.d - &x.m).dot(&e2);
    if [alpha, beta, gamma, delta].iter().any(|c| c.abs() <= q.tol.incidence * q.diameter()) {
        return Err(Error::VertexOnDiagonal);
    }
    PlanarQuad::new(
        e2.scale(-1.0 / alpha),
        e1.scale(-1.0 / beta),
        e2.scale(-1.0 / gamma),
        e1.scale(-1.0 / delta),
        q.tol,
    )
}

/// Largest sine of the angle over the four side pairs and the two crossed diagonal pairs.
pub fn dual_quad_residual(q: &PlanarQuad, dual: &PlanarQuad) -> f64 {
    let p = q.vertices();
    let d = dual.vertices();
    let mut r: f64 = 0.0;
    for k in 0..4 {
        let s = p[(k + 1) % 4] - p[k];
        let t = d[(k + 1) % 4] - d[k];
        r = r.max(parallel_residual(&s, &t));
    }
    r = r.max(parallel_residual(&(d[2] - d[0]), &(p[3] - p[1])));
    r.max(parallel_residual(&(d[3] - d[1]), &(p[2] - p[0])))
}

/// Distance of two polygons from being homothetic (equal up to translation and a
/// possibly negative scale), relative to the size of the second.
pub fn homothety_residual(a: &[&Point], b: &[&Point]) -> f64 {
    let n = a.len();
    let sa: Vec<Point> = (0..n).map(|k| a[(k + 1) % n] - a[k]).collect();
    let sb: Vec<Point> = (0..n).map(|k| b[(k + 1) % n] - b[k]).collect();
    let num: f64 = sa.iter().zip(&sb).map(|(x, y)| x.dot(y)).sum();
    let den: f64 = sa.iter().map(|x| x.norm_sq()).sum();
    let k = num / den;
    let scale = sb.iter().map(|y| y.norm()).fold(0.0, f64::max);
    sa.iter()
        .zip(&sb)
        .map(|(x, y)| (y - &x.scale(k)).norm() / scale)
        .fold(0.0, f64::max)
}

/// The dual Koenigs net together with its vertex function `1/nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualNet {
    pub net: QNet,
    pub nu: VertexScalar,
    /// Largest relative mismatch of an edge of the integrated net against the one-form.
    pub path_residual: f64,
}

/// Integrates an edge one-form `w(v, axis)` from `base` by breadth-first search and
/// measures path independence relative to the largest form value.
pub(crate) fn integrate_edge_form(
    lattice: &Lattice,
    base: usize,
    origin: Point,
    mut w: impl FnMut(usize, usize, usize) -> Result<Point>,
) -> Result<(Vec<Point>, f64)> {
    let m = lattice.m();
    let mut form: Vec<Vec<Option<Point>>> = vec![vec![None; m]; lattice.len()];
    let mut scale: f64 = 0.0;
    for v in 0..lattice.len() {
        for (axis, slot) in form[v].iter_mut().enumerate() {
            if let Some(n) = lattice.shift(v, axis, 1) {
                let x = w(v, n, axis)?;
                scale = scale.max(x.norm());
                *slot = Some(x);
            }
        }
    }
    let mut out: Vec<Option<Point>> = vec![None; lattice.len()];
    out[base] = Some(origin);
    let mut queue = VecDeque::from([base]);
    while let Some(v) = queue.pop_front() {
        let p = out[v].clone().expect("visited");
        for axis in 0..m {
            if let Some(n) = lattice.shift(v, axis, 1) {
                if out[n].is_none() {
                    out[n] = Some(&p + form[v][axis].as_ref().expect("edge"));
                    queue.push_back(n);
                }
            }
            if let Some(n) = lattice.shift(v, axis, -1) {
                if out[n].is_none() {
                    out[n] = Some(&p - form[n][axis].as_ref().expect("edge"));
                    queue.push_back(n);
                }
            }
        }
    }
    let pts: Vec<Point> = out.into_iter().map(|p| p.expect("lattice is connected")).collect();
    let mut residual: f64 = 0.0;
    for v in 0..lattice.len() {
        for axis in 0..m {
            if let (Some(n), Some(x)) = (lattice.shift(v, axis, 1), &form[v][axis]) {
                let d = &(&pts[n] - &pts[v]) - x;
                residual = residual.max(d.norm() / scale);
            }
        }
    }
    Ok((pts, residual))
}

/// The dual Koenigs net from `delta_i f* = delta_i f / (nu nu_i)`, with `f*(base) = origin`.
pub fn dualize_net(net: &QNet, kd: &KoenigsData, base: (&[usize], Point), tol: &Tolerances) -> Result<DualNet> {
    let lattice = net.lattice();
    if let Some(k) = kd.nu.values.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroNu.at(Site::Vertex(lattice.multi_index(k))));
    }
    if base.1.dim() != net.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.ambient_dim(),
            found: base.1.dim(),
        });
    }
    let b = lattice.index(base.0);
    let nu = &kd.nu.values;
    let (pts, path_residual) = integrate_edge_form(lattice, b, base.1, |v, n, _| {
        Ok((net.point(n) - net.point(v)).scale(1.0 / (nu[v] * nu[n])))
    })?;
    if !(path_residual <= tol.product) {
        return Err(Error::NotKoenigs { residual: path_residual });
    }
    Ok(DualNet {
        net: QNet::new(net.extents().to_vec(), pts)?,
        nu: kd.nu.reciprocal(),
        path_residual,
    })
}

/// Largest six-parallelism residual over corresponding quads of two nets.
pub fn dual_pair_residual(net: &QNet, dual: &QNet, tol: &Tolerances) -> Result<f64> {
    let mut r: f64 = 0.0;
    for cell in net.lattice().quads() {
        let q = net.planar_quad(&cell, *tol)?;
        let d = dual.planar_quad(&cell, *tol)?;
        r = r.max(dual_quad_residual(&q, &d));
    }
    Ok(r)
}

/// `a_ij = (1/nu_ij - 1/nu) / (1/nu_j - 1/nu_i)`; `None` when `nu_i = nu_j`.
pub fn moutard_coefficient(nu: &VertexScalar, cell: &QuadCell) -> Option<f64> {
    let [f, fi, fij, fj] = cell.corners.map(|k| nu.get(k));
    let den = 1.0 / fj - 1.0 / fi;
    if den == 0.0 || fi == fj {
        return None;
    }
    Some((1.0 / fij - 1.0 / f) / den)
}

/// Residual of `f*_ij - f* = a (f_j - f_i)/(nu_i nu_j)` and
/// `f*_j - f*_i = (1/a)(f_ij - f)/(nu nu_ij)` over all non-singular quads.
pub fn dual_diagonal_residual(net: &QNet, dual: &QNet, nu: &VertexScalar) -> f64 {
    let mut r: f64 = 0.0;
    for cell in net.lattice().quads() {
        let Some(a) = moutard_coefficient(nu, &cell) else {
            continue;
        };
        let [f, fi, fij, fj] = net.quad_points(&cell);
        let [g, gi, gij, gj] = dual.quad_points(&cell);
        let [n, ni, nij, nj] = cell.corners.map(|k| nu.get(k));
        let lhs1 = gij - g;
        let rhs1 = (fj - fi).scale(a / (ni * nj));
        let lhs2 = gj - gi;
        let rhs2 = (fij - f).scale(1.0 / (a * n * nij));
        let s = diameter(&[g, gi, gij, gj]);
        r = r.max((&lhs1 - &rhs1).norm() / s).max((&lhs2 - &rhs2).norm() / s);
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceReport {
    /// Largest `|lhs - rhs| / diameter` over quads with finite coefficients.
    pub max_residual: f64,
    /// Quads where `nu_i = nu_j` and the coefficients are singular.
    pub singular: Vec<Site>,
}

fn laplace_generic(
    net: &QNet,
    nu: &VertexScalar,
    tol: &Tolerances,
    coeffs: impl Fn(f64, f64, f64, f64) -> Option<(f64, f64)>,
) -> LaplaceReport {
    let mut max_residual: f64 = 0.0;
    let mut singular = Vec::new();
    for cell in net.lattice().quads() {
        let [n, ni, nij, nj] = cell.corners.map(|k| nu.get(k));
        let Some((c1, c2)) = coeffs(n, ni, nij, nj).filter(|(a, b)| a.is_finite() && b.is_finite()) else {
            singular.push(cell.site());
            continue;
        };
        let [f, fi, fij, fj] = net.quad_points(&cell);
        let di = fi - f;
        let dj = fj - f;
        let lhs = &(fij - fi) - &dj;
        let rhs = di.scale(c1).add_scaled(c2, &dj);
        let s = diameter(&[f, fi, fij, fj]);
        max_residual = max_residual.max((&lhs - &rhs).norm() / s);
    }
    let _ = tol;
    LaplaceReport { max_residual, singular }
}

/// Residual of `delta_i delta_j f = c_1 delta_i f + c_2 delta_j f` with the coefficients built from nu.
pub fn laplace_residual(net: &QNet, kd: &KoenigsData, tol: &Tolerances) -> LaplaceReport {
    laplace_generic(net, &kd.nu, tol, |n, ni, nij, nj| {
        let scale = ni.abs().max(nj.abs());
        if (ni - nj).abs() <= tol.incidence * scale {
            return None;
        }
        Some((
            (nj * nij - n * ni) / (n * (ni - nj)),
            (ni * nij - n * nj) / (n * (nj - ni)),
        ))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoutardKind {
    /// `y = nu^{-1} (f, 1)` in R^{N+1}.
    Homogeneous,
    /// Flat [`crate::geom::MinkowskiVec`] layout `(spatial.., e0, einf)` in R^{N+1,1}.
    LightCone,
}

/// Solution of `y_ij - y = a_ij (y_j - y_i)` on a window.
#[derive(Debug, Clone, PartialEq)]
pub struct MoutardNet {
    lattice: Lattice,
    kind: MoutardKind,
    points: Vec<Point>,
    coefficients: Vec<f64>,
    consistency_residual: f64,
}

impl MoutardNet {
    /// Builds a net from points and per-quad coefficients listed in [`Lattice::quads`] order.
    pub fn from_parts(extents: Vec<usize>, kind: MoutardKind, points: Vec<Point>, coefficients: &[f64]) -> Result<Self> {
        let lattice = Lattice::new(extents)?;
        if points.len() != lattice.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} points, got {}",
                lattice.len(),
                points.len()
            )));
        }
        let dim = points[0].dim();
        if let Some(p) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        let min_dim = if kind == MoutardKind::LightCone { 4 } else { 3 };
        if dim < min_dim {
            return Err(Error::DimensionTooLow {
                required: min_dim,
                found: dim,
            });
        }
        if coefficients.len() != lattice.quad_count() {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients, got {}",
                lattice.quad_count(),
                coefficients.len()
            )));
        }
        let mut dense = vec![f64::NAN; lattice.slot_count()];
        for (cell, a) in lattice.quads().zip(coefficients) {
            dense[lattice.quad_slot(&cell)] = *a;
        }
        Ok(MoutardNet {
            lattice,
            kind,
            points,
            coefficients: dense,
            consistency_residual: 0.0,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn kind(&self) -> MoutardKind {
        self.kind
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, idx: usize) -> &Point {
        &self.points[idx]
    }

    pub fn coefficient(&self, cell: &QuadCell) -> f64 {
        self.coefficients[self.lattice.quad_slot(cell)]
    }

    /// Coefficients in [`Lattice::quads`] order.
    pub fn coefficients(&self) -> Vec<f64> {
        self.lattice.quads().map(|c| self.coefficient(&c)).collect()
    }

    /// For evolved nets with `m = 3`: largest relative disagreement between the
    /// three ways of computing the last vertex of a cube.
    pub fn consistency_residual(&self) -> f64 {
        self.consistency_residual
    }

    /// Largest relative residual of the Moutard equation over all quads.
    pub fn moutard_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for cell in self.lattice.quads() {
            let [y, yi, yij, yj] = cell.corners.map(|k| &self.points[k]);
            let a = self.coefficient(&cell);
            let d = &(yij - y) - &(yj - yi).scale(a);
            let s = [y, yi, yij, yj].iter().map(|p| p.norm()).fold(0.0, f64::max);
            r = r.max(d.norm() / s);
        }
        r
    }
}

/// The Moutard representative `y = nu^{-1} (f, 1)` with `a_ij` built from nu.
pub fn moutard_lift(net: &QNet, kd: &KoenigsData, tol: &Tolerances) -> Result<MoutardNet> {
    let lattice = net.lattice();
    let mut points = Vec::with_capacity(lattice.len());
    for k in 0..lattice.len() {
        let nu = kd.nu.get(k);
        if nu == 0.0 {
            return Err(Error::ZeroNu.at(Site::Vertex(lattice.multi_index(k))));
        }
        points.push(net.point(k).extended(1.0).scale(1.0 / nu));
    }
    let mut coefficients = Vec::with_capacity(lattice.quad_count());
    for cell in lattice.quads() {
        let a = moutard_coefficient(&kd.nu, &cell)
            .filter(|a| a.is_finite())
            .ok_or_else(|| Error::EqualNuOnWhiteDiagonal.at(cell.site()))?;
        coefficients.push(a);
    }
    let y = MoutardNet::from_parts(net.extents().to_vec(), MoutardKind::Homogeneous, points, &coefficients)?;
    let residual = y.moutard_residual();
    if !(residual <= tol.product) {
        return Err(Error::NotKoenigs { residual });
    }
    Ok(y)
}

/// Inverse of [`moutard_lift`]: `nu = 1 / y_last`, `f = y_spatial * nu`.
pub fn project_homogeneous(y: &MoutardNet, tol: &Tolerances) -> Result<(QNet, VertexScalar)> {
    let lattice = y.lattice();
    let mut pts = Vec::with_capacity(lattice.len());
    let mut nu = Vec::with_capacity(lattice.len());
    for (k, p) in y.points().iter().enumerate() {
        let c = p.coords();
        let last = c[c.len() - 1];
        if last.abs() <= tol.incidence * p.norm() {
            return Err(Error::VanishingLastComponent.at(Site::Vertex(lattice.multi_index(k))));
        }
        pts.push(Point::from_slice(&c[..c.len() - 1]).scale(1.0 / last));
        nu.push(1.0 / last);
    }
    Ok((QNet::new(lattice.extents().to_vec(), pts)?, VertexScalar::new(nu)))
}

fn in_coordinate_plane(cell: &QuadCell) -> bool {
    cell.base.iter().enumerate().all(|(k, &a)| k == cell.i || k == cell.j || a == 0)
}

/// Fills a window from data on the coordinate axes by `y_ij = y + a_ij (y_j - y_i)`.
///
/// `axes[k]` holds `y` along axis `k` (starting at the origin). For `m = 2`
/// `coefficient` is asked for every quad; for `m = 3` it is asked for the quads
/// of the three coordinate planes, and the remaining faces of each cube follow
/// from the star-triangle map, which keeps the three ways of computing
/// `y_123` in agreement. The coefficient callback receives `(y, y_i, y_j)`.
pub fn moutard_evolve_with(
    extents: Vec<usize>,
    kind: MoutardKind,
    axes: &[Vec<Point>],
    mut coefficient: impl FnMut(&QuadCell, [&Point; 3]) -> Result<f64>,
) -> Result<MoutardNet> {
    let lattice = Lattice::new(extents.clone())?;
    let m = lattice.m();
    if m > 3 {
        return Err(Error::InvalidInput("evolution is implemented for m = 2 and m = 3".into()));
    }
    if axes.len() != m || axes.iter().zip(&extents).any(|(a, &n)| a.len() != n) {
        return Err(Error::InvalidInput("axis data must cover every axis of the window".into()));
    }
    let dim = axes[0][0].dim();
    let origin = &axes[0][0];
    for a in axes {
        if let Some(p) = a.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        if a[0].dist(origin) > 1e-12 * origin.norm().max(1.0) {
            return Err(Error::InvalidInput("axis data disagree at the origin".into()));
        }
    }
    let mut pts: Vec<Option<Point>> = vec![None; lattice.len()];
    for (k, a) in axes.iter().enumerate() {
        for (t, p) in a.iter().enumerate() {
            let mut u = vec![0; m];
            u[k] = t;
            pts[lattice.index(&u)] = Some(p.clone());
        }
    }
    let mut coef = vec![f64::NAN; lattice.slot_count()];
    let mut consistency: f64 = 0.0;
    for v in 0..lattice.len() {
        if pts[v].is_some() {
            continue;
        }
        let u = lattice.multi_index(v);
        let pos: Vec<usize> = (0..m).filter(|&k| u[k] > 0).collect();
        if pos.len() == 2 {
            let (i, j) = (pos[0], pos[1]);
            let b = lattice.offset(v, &[(i, -1), (j, -1)]).expect("inside");
            let cell = lattice.quad_at(b, i, j).expect("inside");
            let [y0, yi, _, yj] = cell.corners.map(|k| pts[k].as_ref());
            let (y0, yi, yj) = (y0.expect("filled"), yi.expect("filled"), yj.expect("filled"));
            let a = coefficient(&cell, [y0, yi, yj])?;
            if !a.is_finite() {
                return Err(Error::InvalidInput("non-finite Moutard coefficient".into()).at(cell.site()));
            }
            coef[lattice.quad_slot(&cell)] = a;
            pts[v] = Some(y0.add_scaled(a, &(yj - yi)));
        } else {
            let b = lattice.offset(v, &[(0, -1), (1, -1), (2, -1)]).expect("inside");
            let hex = lattice.hex_at(b, [0, 1, 2]).expect("inside");
            let face = |i: usize, j: usize, base: usize| lattice.quad_at(base, i, j).expect("inside");
            let (f12, f13, f23) = (face(0, 1, b), face(0, 2, b), face(1, 2, b));
            let mut get = |cell: &QuadCell, pts: &[Option<Point>], coef: &mut Vec<f64>| -> Result<f64> {
                let slot = lattice.quad_slot(cell);
                if coef[slot].is_nan() {
                    let [y0, yi, _, yj] = cell.corners.map(|k| pts[k].as_ref().expect("filled"));
                    coef[slot] = coefficient(cell, [y0, yi, yj])?;
                }
                Ok(coef[slot])
            };
            for c in [&f12, &f13, &f23] {
                debug_assert!(in_coordinate_plane(c) || !coef[lattice.quad_slot(c)].is_nan());
            }
            let a12 = get(&f12, &pts, &mut coef)?;
            let a13 = get(&f13, &pts, &mut coef)?;
            let a23 = get(&f23, &pts, &mut coef)?;
            let d = a12 * a13 - a12 * a23 + a13 * a23;
            if d == 0.0 || !d.is_finite() {
                return Err(Error::DegenerateQuad.at(Site::Hexahedron { base: hex.base.clone() }));
            }
            let c = &hex.corners;
            let y = |k: usize| pts[c[k]].as_ref().expect("filled");
            let (y1, y2, y3, y12, y13, y23) = (y(1), y(2), y(3), y(4), y(5), y(6));
            let n23 = a23 / d;
            let n13 = a13 / d;
            let n12 = a12 / d;
            let c1 = y1.add_scaled(n23, &(y13 - y12));
            let c2 = y2.add_scaled(n13, &(y23 - y12));
            let c3 = y3.add_scaled(n12, &(y23 - y13));
            let s = c1.norm().max(c2.norm()).max(c3.norm());
            consistency = consistency.max(c1.dist(&c2) / s).max(c1.dist(&c3) / s);
            let b1 = lattice.shift(b, 0, 1).expect("inside");
            let b2 = lattice.shift(b, 1, 1).expect("inside");
            let b3 = lattice.shift(b, 2, 1).expect("inside");
            coef[lattice.quad_slot(&face(1, 2, b1))] = n23;
            coef[lattice.quad_slot(&face(0, 2, b2))] = n13;
            coef[lattice.quad_slot(&face(0, 1, b3))] = n12;
            pts[v] = Some(c1);
        }
    }
    let points: Vec<Point> = pts.into_iter().map(|p| p.expect("filled")).collect();
    let coefficients: Vec<f64> = lattice.quads().map(|c| coef[lattice.quad_slot(&c)]).collect();
    let mut net = MoutardNet::from_parts(extents, kind, points, &coefficients)?;
    net.consistency_residual = consistency;
    Ok(net)
}

/// [`moutard_evolve_with`] for homogeneous data and coefficients that depend on the quad only.
pub fn moutard_evolve(extents: Vec<usize>, axes: &[Vec<Point>], mut a: impl FnMut(&QuadCell) -> f64) -> Result<MoutardNet> {
    moutard_evolve_with(extents, MoutardKind::Homogeneous, axes, |cell, _| Ok(a(cell)))
}

/// The net of diagonal intersection points of a two-dimensional net, on the
/// window of quads (extents reduced by one, so at least 3 x 3 vertices are
/// needed). Exposed as data only; no property of this net is checked or relied upon.
pub fn diagonal_intersection_net(net: &QNet, tol: &Tolerances) -> Result<QNet> {
    if net.m() != 2 {
        return Err(Error::InvalidInput(format!("expected a 2-dimensional net, got m = {}", net.m())));
    }
    let mut points = Vec::with_capacity(net.lattice().quad_count());
    for item in net.planar_quads(*tol) {
        let (cell, q) = item?;
        points.push(intersect_diagonals(&q).map_err(|e| e.at(cell.site()))?.m);
    }
    QNet::new(net.extents().iter().map(|n| n - 1).collect(), points)
}

fn check_dims(net: &QNet, m: usize) -> Result<()> {
    if net.m() != m {
        return Err(Error::InvalidInput(format!(
            "expected a {m}-dimensional net, got m = {}",
            net.m()
        )));
    }
    if net.ambient_dim() < 3 {
        return Err(Error::DimensionTooLow {
            required: 3,
            found: net.ambient_dim(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexCriterion {
    pub residual: f64,
    pub pass: bool,
}

impl VertexCriterion {
    fn new(residual: f64, tol: f64) -> Self {
        VertexCriterion {
            residual,
            pass: residual <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexGeometry {
    pub u: Vec<usize>,
    /// The four diagonal intersection points around the vertex span a plane.
    pub diagonals: VertexCriterion,
    /// `N >= 4`: `f` and its four diagonal neighbours span a 3-space not containing `f_1`.
    pub subspace: Option<VertexCriterion>,
    /// `N = 3`: the planes `(f f_12 f_-1,2)`, `(f f_1,-2 f_-1,-2)` and `(f f_1 f_-1)` share a line.
    pub planes: Option<VertexCriterion>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometric2dReport {
    pub vertices: Vec<VertexGeometry>,
    /// Interior vertices lying in a plane with their four neighbours; excluded from the verdict.
    pub planar_vertices: Vec<Vec<usize>>,
    /// Diagonal criterion holds at every non-planar interior vertex.
    pub is_koenigs: bool,
}

fn unit_normal3(a: &Point, b: &Point, c: &Point) -> Option<[f64; 3]> {
    let u = b - a;
    let v = c - a;
    let n = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let l = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    (l > 0.0).then(|| n.map(|x| x / l))
}

fn det3(r: [[f64; 3]; 3]) -> f64 {
    r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
        + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
}

/// Vertex-local projective characterizations of two-dimensional Koenigs nets.
pub fn check_koenigs_2d_geometric(net: &QNet, tol: &Tolerances) -> Result<Geometric2dReport> {
    check_dims(net, 2)?;
    let lattice = net.lattice();
    let n = net.ambient_dim();
    let mut vertices = Vec::new();
    let mut planar_vertices = Vec::new();
    for v in 0..lattice.len() {
        if !lattice.is_interior(v, 0, 1) {
            continue;
        }
        let u = lattice.multi_index(v);
        let at = |d1: isize, d2: isize| net.point(lattice.offset(v, &[(0, d1), (1, d2)]).expect("interior"));
        let f = net.point(v);
        let star = [f, at(1, 0), at(0, 1), at(-1, 0), at(0, -1)];
        if relative_singular_value(&star, 2).is_none_or(|r| r <= tol.product) {
            planar_vertices.push(u);
            continue;
        }
        let mut ms = Vec::with_capacity(4);
        for (b1, b2) in [(0, 0), (-1, 0), (-1, -1), (0, -1)] {
            let base = lattice.offset(v, &[(0, b1), (1, b2)]).expect("interior");
            let cell = lattice.quad_at(base, 0, 1).expect("interior");
            let q = net.planar_quad(&cell, *tol)?;
            ms.push(intersect_diagonals(&q).map_err(|e| e.at(cell.site()))?.m);
        }
        let mref: Vec<&Point> = ms.iter().collect();
        let diagonals = VertexCriterion::new(relative_singular_value(&mref, 2).unwrap_or(0.0), tol.product);
        let diag_nb = [f, at(1, 1), at(-1, 1), at(-1, -1), at(1, -1)];
        let subspace = (n >= 4).then(|| {
            let r = relative_singular_value(&diag_nb, 3).unwrap_or(0.0);
            let mut with_f1 = diag_nb.to_vec();
            with_f1.push(at(1, 0));
            let contains = relative_singular_value(&with_f1, 3).unwrap_or(0.0) <= tol.product;
            VertexCriterion {
                residual: r,
                pass: r <= tol.product && !contains,
            }
        });
        let planes = (n == 3).then(|| {
            let normals = [
                unit_normal3(f, at(1, 1), at(-1, 1)),
                unit_normal3(f, at(1, -1), at(-1, -1)),
                unit_normal3(f, at(1, 0), at(-1, 0)),
            ];
            match normals {
                [Some(a), Some(b), Some(c)] => VertexCriterion::new(det3([a, b, c]).abs(), tol.product),
                _ => VertexCriterion {
                    residual: 0.0,
                    pass: true,
                },
            }
        });
        vertices.push(VertexGeometry {
            u,
            diagonals,
            subspace,
            planes,
        });
    }
    let is_koenigs = vertices.iter().all(|g| g.diagonals.pass);
    Ok(Geometric2dReport {
        vertices,
        planar_vertices,
        is_koenigs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HexGeometry {
    pub base: Vec<usize>,
    pub axes: [usize; 3],
    /// Largest collinearity residual of the three face-diagonal intersections at a corner.
    pub corner_residual: f64,
    pub black_residual: f64,
    pub white_residual: f64,
    pub collinear: bool,
    pub black_coplanar: bool,
    pub white_coplanar: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometric3dReport {
    pub hexahedra: Vec<HexGeometry>,
    pub all_collinear: bool,
    pub all_black_coplanar: bool,
    pub all_white_coplanar: bool,
    /// Corner collinearity at every hexahedron.
    pub is_koenigs: bool,
}

/// Hexahedron-local projective characterizations of three-dimensional Koenigs nets.
pub fn check_koenigs_3d_geometric(net: &QNet, tol: &Tolerances) -> Result<Geometric3dReport> {
    check_dims(net, 3)?;
    let lattice = net.lattice();
    let mut hexahedra = Vec::new();
    for hex in lattice.hexahedra()? {
        let b = hex.corners[0];
        // face perpendicular to axes[k] at offset o
        let mut m_pts: Vec<Vec<Point>> = vec![Vec::new(); 3];
        for k in 0..3 {
            let others: Vec<usize> = (0..3).filter(|&x| x != k).map(|x| hex.axes[x]).collect();
            for o in 0..2 {
                let base = lattice.shift(b, hex.axes[k], o).expect("inside");
                let cell = lattice.quad_at(base, others[0], others[1]).expect("inside");
                let q = net.planar_quad(&cell, *tol)?;
                m_pts[k].push(intersect_diagonals(&q).map_err(|e| e.at(cell.site()))?.m);
            }
        }
        let mut corner_residual: f64 = 0.0;
        for corner in CUBE_CORNERS {
            let pts: Vec<&Point> = (0..3).map(|k| &m_pts[k][corner[k] as usize]).collect();
            corner_residual = corner_residual.max(relative_singular_value(&pts, 1).unwrap_or(0.0));
        }
        let [f, fi, fj, fk, fij, fik, fjk, fijk] = hex.corners.map(|k| net.point(k));
        let black_residual = relative_singular_value(&[f, fij, fik, fjk], 2).unwrap_or(0.0);
        let white_residual = relative_singular_value(&[fi, fj, fk, fijk], 2).unwrap_or(0.0);
        hexahedra.push(HexGeometry {
            base: hex.base.clone(),
            axes: hex.axes,
            corner_residual,
            black_residual,
            white_residual,
            collinear: corner_residual <= tol.product,
            black_coplanar: black_residual <= tol.product,
            white_coplanar: white_residual <= tol.product,
        });
    }
    let all_collinear = hexahedra.iter().all(|h| h.collinear);
    Ok(Geometric3dReport {
        all_black_coplanar: hexahedra.iter().all(|h| h.black_coplanar),
        all_white_coplanar: hexahedra.iter().all(|h| h.white_coplanar),
        is_koenigs: all_collinear,
        all_collinear,
        hexahedra,
    })
}

/// `nu'(u) = (-1)^{u_axis} nu(u)`, made positive by a global sign.
///
/// Requires `m = 2`; fails with `NotAlternating` unless `nu'` has constant sign.
pub fn normalize_nu_for_limit(net: &QNet, kd: &KoenigsData, axis: usize) -> Result<VertexScalar> {
    let lattice = net.lattice();
    if lattice.m() != 2 || axis > 1 {
        return Err(Error::InvalidInput("sign switch needs m = 2 and axis 0 or 1".into()));
    }
    let switched: Vec<f64> = (0..lattice.len())
        .map(|k| {
            let s = if lattice.multi_index(k)[axis].is_multiple_of(2) { 1.0 } else { -1.0 };
            s * kd.nu.get(k)
        })
        .collect();
    let sign = switched[0].signum();
    if switched.iter().any(|&x| x.signum() != sign || x == 0.0) {
        return Err(Error::NotAlternating);
    }
    Ok(VertexScalar::new(switched.iter().map(|x| x * sign).collect()))
}

/// Residual of the Laplace equation in the switched form
/// `delta_1 delta_2 f = (nu_2 nu_12 - nu nu_1)/(nu(nu_1+nu_2)) delta_1 f + (nu_1 nu_12 - nu nu_2)/(nu(nu_1+nu_2)) delta_2 f`.
pub fn switched_laplace_residual(net: &QNet, nu_switched: &VertexScalar, tol: &Tolerances) -> LaplaceReport {
    laplace_generic(net, nu_switched, tol, |n, n1, n12, n2| {
        let s = n1 + n2;
        if s.abs() <= tol.incidence * n1.abs().max(n2.abs()) {
            return None;
        }
        Some(((n2 * n12 - n * n1) / (n * s), (n1 * n12 - n * n2) / (n * s)))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoutardPlusReport {
    /// Least-squares coefficient `a` per quad, in [`Lattice::quads`] order.
    pub coefficients: Vec<f64>,
    pub max_residual: f64,
}

/// Fits `y_12 + y = a (y_1 + y_2)` for `y = nu'^{-1} (f, 1)` and reports the residual.
pub fn moutard_plus_residual(net: &QNet, nu_switched: &VertexScalar) -> MoutardPlusReport {
    let y: Vec<Point> = (0..net.lattice().len())
        .map(|k| net.point(k).extended(1.0).scale(1.0 / nu_switched.get(k)))
        .collect();
    let mut coefficients = Vec::new();
    let mut max_residual: f64 = 0.0;
    for cell in net.lattice().quads() {
        let [y0, yi, yij, yj] = cell.corners.map(|k| &y[k]);
        let lhs = yij + y0;
        let rhs = yi + yj;
        let a = lhs.dot(&rhs) / rhs.norm_sq();
        let s = [y0, yi, yij, yj].iter().map(|p| p.norm()).fold(0.0, f64::max);
        max_residual = max_residual.max((&lhs - &rhs.scale(a)).norm() / s);
        coefficients.push(a);
    }
    MoutardPlusReport {
        coefficients,
        max_residual,
    }
}
