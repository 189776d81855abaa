//! Seeded generators: Moutard-evolved Koenigs nets, three-leg and light-cone
//! isothermic nets, generic Q-nets, perturbations and random transformations.
//!
//! All randomness flows through a [`ChaCha8Rng`] so that a seed fully
//! determines the output.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{lift_to_lightcone, MinkowskiVec, PlaneFrame, Point, Tolerances};
use crate::isothermic::{lightcone_evolve, three_leg_evolve, three_leg_vertex, IsothermicNet, LightconeEvolution};
use crate::koenigs::{moutard_evolve, project_homogeneous, MoutardNet};
use crate::qnet::{complete_hexahedron, EdgeLabelling, Lattice, QNet, VertexScalar};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(rng: &mut impl Rng, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.random_range(range.0.min(range.1)..range.0.max(range.1))
    }
}

fn unit_axis(n: usize, k: usize) -> Point {
    let mut v = vec![0.0; n];
    v[k % n] = 1.0;
    Point::new(v)
}

/// A smooth polygon starting at the origin: unit steps along `e_axis` bent by
/// a few random low-frequency modes of relative size `wiggle`.
///
/// Step-to-step noise is avoided on purpose: the cross-ratio evolutions
/// amplify zig-zag Cauchy data, while smooth data stays well conditioned.
pub fn random_curve(rng: &mut impl Rng, len: usize, axis: usize, dim: usize, wiggle: f64) -> Vec<Point> {
    random_curve_with_steps(rng, &vec![1.0; len.saturating_sub(1)], axis, dim, wiggle)
}

/// [`random_curve`] with prescribed step lengths (before bending).
pub fn random_curve_with_steps(rng: &mut impl Rng, steps: &[f64], axis: usize, dim: usize, wiggle: f64) -> Vec<Point> {
    let len = steps.len() + 1;
    let modes: Vec<(f64, f64, f64)> = (0..dim)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(0.5..2.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let span = len.max(2) as f64 - 1.0;
    let mut pts = vec![Point::origin(dim)];
    for t in 1..len {
        let x = (t as f64 - 0.5) / span;
        let mut step = unit_axis(dim, axis);
        for (c, (amp, freq, phase)) in modes.iter().enumerate() {
            step = step.add_scaled(wiggle * amp * (freq * x * std::f64::consts::PI + phase).sin(), &unit_axis(dim, c));
        }
        let next = pts.last().expect("nonempty").add_scaled(steps[t - 1], &step);
        pts.push(next);
    }
    pts
}

/// Sign pattern of `1/nu` on the coordinate axes that keeps every diagonal
/// intersection finite: `(-1)^{u_1}` for `m = 2`, `(-1)^{u_1 + u_2} + (-1)^{u_1}/2` for `m = 3`.
fn axis_weight(u: &[usize]) -> f64 {
    let s1 = if u[0].is_multiple_of(2) { 1.0 } else { -1.0 };
    if u.len() == 2 {
        s1
    } else {
        let s2 = if u[1].is_multiple_of(2) { 1.0 } else { -1.0 };
        s1 * s2 + 0.5 * s1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoutardParams {
    pub extents: Vec<usize>,
    pub ambient_dim: usize,
    /// Multiplicative noise on `1/nu` around its sign pattern.
    pub nu_range: (f64, f64),
    /// Explicit range for the Moutard coefficients (coordinate planes for `m = 3`).
    /// When `None` the coefficients are derived from a random `nu` on the
    /// coordinate planes, which keeps `1/nu` bounded away from zero.
    pub coefficient_range: Option<(f64, f64)>,
    pub wiggle: f64,
    /// Nets with a quad whose diagonals meet at a smaller sine are redrawn.
    /// Such nearly collinear quads make diagonal intersections, and with them
    /// every derived product, sensitive to rounding. `0` disables the guard.
    pub min_diagonal_sine: f64,
}

impl MoutardParams {
    pub fn new(extents: Vec<usize>) -> Self {
        MoutardParams {
            extents,
            ambient_dim: 3,
            nu_range: (0.8, 1.2),
            coefficient_range: None,
            wiggle: 0.3,
            min_diagonal_sine: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedKoenigs {
    pub net: QNet,
    /// Ground-truth nu (`1 / y_last`).
    pub nu: VertexScalar,
    pub moutard: MoutardNet,
}

const MAX_DRAWS: usize = 1000;

/// A Koenigs net as the projection of a Moutard net evolved from random axis data.
pub fn moutard_net(rng: &mut impl Rng, params: &MoutardParams, tol: &Tolerances) -> Result<GeneratedKoenigs> {
    for _ in 0..MAX_DRAWS {
        let g = moutard_draw(rng, params, tol)?;
        if min_diagonal_sine(&g.net) >= params.min_diagonal_sine {
            return Ok(g);
        }
    }
    Err(Error::InvalidInput(format!(
        "no net with diagonal sine >= {} in {MAX_DRAWS} draws",
        params.min_diagonal_sine
    )))
}

/// Smallest sine of the angle between the two diagonals over all quads.
pub fn min_diagonal_sine(net: &QNet) -> f64 {
    net.lattice()
        .quads()
        .map(|cell| {
            let [a, b, c, d] = net.quad_points(&cell);
            let (u, v) = (c - a, d - b);
            let cos = u.dot(&v) / (u.norm() * v.norm());
            (1.0 - cos * cos).max(0.0).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

fn moutard_draw(rng: &mut impl Rng, params: &MoutardParams, tol: &Tolerances) -> Result<GeneratedKoenigs> {
    let m = params.extents.len();
    let n = params.ambient_dim;
    if !(2..=3).contains(&m) {
        return Err(Error::InvalidInput("the Moutard generator supports m = 2 and m = 3".into()));
    }
    let lattice = Lattice::new(params.extents.clone())?;
    // 1/nu on the coordinate planes: sign pattern times noise, 1 at the origin
    let w: Vec<f64> = (0..lattice.len())
        .map(|k| {
            let u = lattice.multi_index(k);
            let r = if k == 0 { 1.0 } else { uniform(rng, params.nu_range) };
            axis_weight(&u) * r
        })
        .collect();
    let mut axes = Vec::with_capacity(m);
    for k in 0..m {
        let curve = random_curve(rng, params.extents[k], k, n, params.wiggle);
        let data: Vec<Point> = curve
            .iter()
            .enumerate()
            .map(|(t, f)| {
                let mut u = vec![0; m];
                u[k] = t;
                f.extended(1.0).scale(w[lattice.index(&u)])
            })
            .collect();
        axes.push(data);
    }
    let explicit: Option<Vec<f64>> = params
        .coefficient_range
        .map(|range| (0..lattice.slot_count()).map(|_| uniform(rng, range)).collect());
    let y = moutard_evolve(params.extents.clone(), &axes, |cell| match &explicit {
        Some(a) => a[lattice.quad_slot(cell)],
        None => {
            let [f, fi, fij, fj] = cell.corners.map(|k| w[k]);
            (fij - f) / (fj - fi)
        }
    })?;
    let (net, nu) = project_homogeneous(&y, tol)?;
    Ok(GeneratedKoenigs { net, nu, moutard: y })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreeLegParams {
    pub extents: Vec<usize>,
    pub ambient_dim: usize,
    pub label_ranges: [(f64, f64); 2],
    pub wiggle: f64,
}

impl ThreeLegParams {
    pub fn new(extents: Vec<usize>) -> Self {
        ThreeLegParams {
            extents,
            ambient_dim: 3,
            label_ranges: [(0.8, 1.2), (-1.2, -0.8)],
            wiggle: 0.0,
        }
    }
}

/// Random labels with one value per edge layer.
pub fn random_labels(rng: &mut impl Rng, extents: &[usize], ranges: &[(f64, f64)]) -> Result<EdgeLabelling> {
    let per_axis = extents
        .iter()
        .zip(ranges)
        .map(|(&n, &r)| (0..n - 1).map(|_| uniform(rng, r)).collect())
        .collect();
    EdgeLabelling::new(per_axis)
}

/// Step lengths `sqrt|alpha|`: with straight axes these give a rectangular grid
/// with exactly these labels and `|s| = 1`.
fn label_steps(labels: &[f64]) -> Vec<f64> {
    labels.iter().map(|a| a.abs().sqrt()).collect()
}

/// Axis curves of a random Möbius image (with inversion) of the rectangular
/// grid whose spacings are `sqrt|alpha|`, so that the axis data come from an
/// exact isothermic net with the given labels.
///
/// The evolution from axis data is unstable: a generic perturbation of the
/// axes grows roughly fivefold per lattice step. `wiggle` adds a smooth bend of
/// that relative size before the Möbius map; keep it small on large grids.
pub fn moebius_grid_axes(rng: &mut impl Rng, labels: &EdgeLabelling, ambient_dim: usize, wiggle: f64) -> Result<Vec<Vec<Point>>> {
    if labels.per_axis.len() != 2 || ambient_dim < 2 {
        return Err(Error::InvalidInput("grid axes need m = 2 and ambient dimension >= 2".into()));
    }
    let coords: Vec<Vec<f64>> = labels
        .per_axis
        .iter()
        .map(|a| {
            std::iter::once(0.0)
                .chain(label_steps(a).into_iter().scan(0.0, |x, h| {
                    *x += h;
                    Some(*x)
                }))
                .collect()
        })
        .collect();
    let extents = vec![coords[0].len(), coords[1].len()];
    let grid = QNet::from_fn(extents.clone(), |u| {
        let mut p = vec![0.0; ambient_dim];
        p[0] = coords[0][u[0]];
        p[1] = coords[1][u[1]];
        Point::new(p)
    })?;
    let map = random_moebius_map(&grid, rng, true);
    let mut axes = Vec::with_capacity(2);
    for k in 0..2 {
        let span = coords[k].last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
        let modes: Vec<(f64, f64, f64)> = (0..ambient_dim)
            .map(|_| {
                (
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.5..2.0),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        let curve = (0..extents[k])
            .map(|t| {
                let mut u = vec![0, 0];
                u[k] = t;
                let x = coords[k][t] / span;
                let mut p = grid.point_at(&u).clone();
                for (c, (amp, freq, phase)) in modes.iter().enumerate().filter(|(c, _)| *c != k) {
                    let bend = (freq * x * std::f64::consts::PI + phase).sin() - phase.sin();
                    p = p.add_scaled(wiggle * span * amp * bend, &unit_axis(ambient_dim, c));
                }
                map.apply(&p)
            })
            .collect();
        axes.push(curve);
    }
    Ok(axes)
}

/// Three-leg isothermic net evolved from the axes of [`moebius_grid_axes`]
/// with random labels. With labels of opposite sign every quad is embedded.
pub fn three_leg_net(rng: &mut impl Rng, params: &ThreeLegParams, tol: &Tolerances) -> Result<IsothermicNet> {
    if params.extents.len() != 2 {
        return Err(Error::InvalidInput("the three-leg generator needs m = 2".into()));
    }
    let labels = random_labels(rng, &params.extents, &params.label_ranges)?;
    let axes = moebius_grid_axes(rng, &labels, params.ambient_dim, params.wiggle)?;
    three_leg_evolve(&axes, &labels, tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightconeParams {
    pub extents: Vec<usize>,
    pub ambient_dim: usize,
    /// Label range per axis. With `m = 3` one face family necessarily has
    /// positive cross-ratios; keeping the third label away from the first
    /// keeps those quads away from `q = 1`.
    pub label_ranges: Vec<(f64, f64)>,
    /// Bend of the Möbius grid axes for `m = 2`, see [`moebius_grid_axes`].
    pub wiggle: f64,
    /// Bend of the random axis curves for `m = 3`, where no grid is isothermic.
    pub m3_wiggle: f64,
}

impl LightconeParams {
    pub fn new(extents: Vec<usize>) -> Self {
        LightconeParams {
            extents,
            ambient_dim: 3,
            label_ranges: vec![(0.8, 1.2), (-1.2, -0.8), (2.5, 3.5)],
            wiggle: 0.0,
            m3_wiggle: 0.2,
        }
    }
}

/// Light-cone axis data `y = lift(f) / s` on Möbius grid axes (`m = 2`) or random curves (`m = 3`), with `s(0) = 1` and
/// `s` integrated along each axis from `|f_i - f|^2 = alpha_i s s_i` for random labels.
pub fn lightcone_axes(rng: &mut impl Rng, params: &LightconeParams) -> Result<Vec<Vec<MinkowskiVec>>> {
    let m = params.extents.len();
    if params.label_ranges.len() < m {
        return Err(Error::InvalidInput(format!("need {m} label ranges")));
    }
    let labels = random_labels(rng, &params.extents, &params.label_ranges[..m])?;
    let curves = if m == 2 {
        moebius_grid_axes(rng, &labels, params.ambient_dim, params.wiggle)?
    } else {
        (0..m)
            .map(|k| random_curve_with_steps(rng, &label_steps(&labels.per_axis[k]), k, params.ambient_dim, params.m3_wiggle))
            .collect()
    };
    let mut axes = Vec::with_capacity(m);
    for (k, curve) in curves.into_iter().enumerate() {
        let mut s = 1.0;
        let mut data = vec![lift_to_lightcone(&curve[0])];
        for t in 1..curve.len() {
            s = curve[t].dist(&curve[t - 1]).powi(2) / (labels.per_axis[k][t - 1] * s);
            data.push(lift_to_lightcone(&curve[t]).scale(1.0 / s));
        }
        axes.push(data);
    }
    Ok(axes)
}

/// Isothermic net from a Moutard evolution inside the light cone.
pub fn lightcone_net(rng: &mut impl Rng, params: &LightconeParams, tol: &Tolerances) -> Result<LightconeEvolution> {
    let axes = lightcone_axes(rng, params)?;
    lightcone_evolve(params.extents.clone(), &axes, tol)
}

/// A generic (non-Koenigs) Q-net: random axis curves, random planar completion
/// of the coordinate-plane quads, hexahedron completion for the rest.
pub fn random_qnet(rng: &mut impl Rng, extents: Vec<usize>, ambient_dim: usize, tol: &Tolerances) -> Result<QNet> {
    let lattice = Lattice::new(extents.clone())?;
    let m = lattice.m();
    let mut pts: Vec<Option<Point>> = vec![None; lattice.len()];
    for k in 0..m {
        for (t, p) in random_curve(rng, extents[k], k, ambient_dim, 0.3).into_iter().enumerate() {
            let mut u = vec![0; m];
            u[k] = t;
            pts[lattice.index(&u)] = Some(p);
        }
    }
    let mut quad = |f: &Point, fi: &Point, fj: &Point| {
        // f_i + f_j - f plus an in-plane random offset
        let base = &(fi + fj) - f;
        let (a, b) = (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
        base.add_scaled(a, &(fi - f)).add_scaled(b, &(fj - f))
    };
    complete_qnet(&lattice, pts, &mut quad, tol)
}

/// Fills vertices with exactly two nonzero coordinates by `quad(f, f_i, f_j)`
/// and all others by hexahedron completion, in lexicographic order.
fn complete_qnet(
    lattice: &Lattice,
    mut pts: Vec<Option<Point>>,
    quad: &mut dyn FnMut(&Point, &Point, &Point) -> Point,
    tol: &Tolerances,
) -> Result<QNet> {
    for v in 0..lattice.len() {
        if pts[v].is_some() {
            continue;
        }
        let u = lattice.multi_index(v);
        let pos: Vec<usize> = (0..u.len()).filter(|&k| u[k] > 0).collect();
        let get = |d: &[(usize, isize)], pts: &[Option<Point>]| -> Point {
            pts[lattice.offset(v, d).expect("inside")].clone().expect("filled")
        };
        if pos.len() == 2 {
            let (i, j) = (pos[0], pos[1]);
            let f = get(&[(i, -1), (j, -1)], &pts);
            let fi = get(&[(j, -1)], &pts);
            let fj = get(&[(i, -1)], &pts);
            pts[v] = Some(quad(&f, &fi, &fj));
        } else {
            // complete along the last three positive axes
            let k = pos.len();
            let (a, b, c) = (pos[k - 3], pos[k - 2], pos[k - 1]);
            let f = get(&[(a, -1), (b, -1), (c, -1)], &pts);
            let fa = get(&[(b, -1), (c, -1)], &pts);
            let fb = get(&[(a, -1), (c, -1)], &pts);
            let fc = get(&[(a, -1), (b, -1)], &pts);
            let fab = get(&[(c, -1)], &pts);
            let fac = get(&[(b, -1)], &pts);
            let fbc = get(&[(a, -1)], &pts);
            pts[v] = Some(complete_hexahedron([&f, &fa, &fb, &fc, &fab, &fac, &fbc], tol)?);
        }
    }
    QNet::new(
        lattice.extents().to_vec(),
        pts.into_iter().map(|p| p.expect("filled")).collect(),
    )
}

/// Moves the far corner `(n_1 - 1, n_2 - 1)` of a 2d net inside the plane of its
/// quad by `relative * diameter`. The result is still a Q-net.
pub fn perturb_corner_in_plane(net: &QNet, rng: &mut impl Rng, relative: f64) -> Result<QNet> {
    if net.m() != 2 {
        return Err(Error::InvalidInput("corner perturbation needs m = 2".into()));
    }
    let lattice = net.lattice();
    let corner = lattice.len() - 1;
    let base = lattice.offset(corner, &[(0, -1), (1, -1)]).expect("inside");
    let cell = lattice.quad_at(base, 0, 1).expect("inside");
    let [f, fi, _, fj] = net.quad_points(&cell);
    let frame = PlaneFrame::spanning(f, fi, fj, fj);
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    let shift = frame
        .e1
        .scale(theta.cos())
        .add_scaled(theta.sin(), &frame.e2)
        .scale(relative * net.diameter());
    let mut out = net.clone();
    out.set_point(corner, net.point(corner) + &shift)?;
    Ok(out)
}

/// Keeps the coordinate-plane data of a 3d net, moves `(n_1 - 1, n_2 - 1, 0)` inside
/// the plane of its quad by `relative * diameter`, and recompletes every hexahedron.
pub fn perturb_qnet_3d(net: &QNet, rng: &mut impl Rng, relative: f64, tol: &Tolerances) -> Result<QNet> {
    let lattice = net.lattice();
    if lattice.m() != 3 {
        return Err(Error::InvalidInput("needs m = 3".into()));
    }
    let e = lattice.extents();
    let target = lattice.index(&[e[0] - 1, e[1] - 1, 0]);
    let base = lattice.offset(target, &[(0, -1), (1, -1)]).expect("inside");
    let cell = lattice.quad_at(base, 0, 1).expect("inside");
    let [f, fi, _, fj] = net.quad_points(&cell);
    let frame = PlaneFrame::spanning(f, fi, fj, fj);
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    let shift = frame
        .e1
        .scale(theta.cos())
        .add_scaled(theta.sin(), &frame.e2)
        .scale(relative * net.diameter());
    let pts: Vec<Option<Point>> = (0..lattice.len())
        .map(|k| {
            let u = lattice.multi_index(k);
            if k == target {
                Some(net.point(k) + &shift)
            } else if u.iter().filter(|&&x| x > 0).count() <= 2 {
                Some(net.point(k).clone())
            } else {
                None
            }
        })
        .collect();
    complete_qnet(lattice, pts, &mut |_, _, _| unreachable!("coordinate planes are given"), tol)
}

/// Moves the far corner of a 2d circular net along the circle of its quad by
/// `angle` radians. The net stays circular but the corner cross-ratio changes.
pub fn perturb_corner_on_circle(net: &QNet, angle: f64) -> Result<QNet> {
    if net.m() != 2 {
        return Err(Error::InvalidInput("corner perturbation needs m = 2".into()));
    }
    let lattice = net.lattice();
    let corner = lattice.len() - 1;
    let base = lattice.offset(corner, &[(0, -1), (1, -1)]).expect("inside");
    let cell = lattice.quad_at(base, 0, 1).expect("inside");
    let [f, fi, fij, fj] = net.quad_points(&cell);
    let frame = PlaneFrame::spanning(f, fi, fj, fj);
    let [a, b, c] = [f, fi, fj].map(|p| frame.to_complex(p));
    let center = circumcenter(a, b, c).ok_or(Error::CollinearTriple)?;
    let z = frame.to_complex(fij);
    let moved = center + (z - center) * Complex64::from_polar(1.0, angle);
    let mut out = net.clone();
    out.set_point(corner, frame.from_complex(moved))?;
    Ok(out)
}

fn circumcenter(a: Complex64, b: Complex64, c: Complex64) -> Option<Complex64> {
    let (b, c) = (b - a, c - a);
    let d = 2.0 * (b.re * c.im - b.im * c.re);
    if d == 0.0 {
        return None;
    }
    let (nb, nc) = (b.norm_sqr(), c.norm_sqr());
    Some(a + Complex64::new((c.im * nb - b.im * nc) / d, (b.re * nc - c.re * nb) / d))
}

/// `x -> (A x + b) / (c.x + d)` on R^N.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveMap {
    pub matrix: DMatrix<f64>,
}

impl ProjectiveMap {
    pub fn apply(&self, p: &Point) -> Option<Point> {
        let n = p.dim();
        let h = self.matrix.clone() * nalgebra::DVector::from_iterator(n + 1, p.coords().iter().copied().chain([1.0]));
        let w = h[n];
        (w != 0.0).then(|| Point::new((0..n).map(|k| h[k] / w).collect()))
    }
}

/// A random projective map, rescaled to the net, whose denominator stays
/// between 1/2 and 3/2 on all net points. Returns the map and the image.
pub fn random_projective_image(net: &QNet, rng: &mut impl Rng) -> Result<(ProjectiveMap, QNet)> {
    let n = net.ambient_dim();
    let diam = net.diameter();
    for _ in 0..100 {
        let mut m = DMatrix::<f64>::identity(n + 1, n + 1);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] += rng.random_range(-0.4..0.4);
            }
            m[(r, n)] = rng.random_range(-1.0..1.0) * diam;
        }
        for c in 0..n {
            m[(n, c)] = rng.random_range(-0.5..0.5) / diam;
        }
        let map = ProjectiveMap { matrix: m };
        let center = net.point(0);
        let ok = net.vertices().iter().all(|p| {
            let w: f64 = (0..n).map(|c| map.matrix[(n, c)] * (p[c] - center[c])).sum::<f64>() + 1.0;
            (0.5..1.5).contains(&w)
        });
        if !ok {
            continue;
        }
        // move the net so that its first vertex is the origin of the map
        let shifted = net.map_points(|p| p - center)?;
        let image = shifted.map_points(|p| map.apply(p).expect("denominator bounded away from 0"))?;
        return Ok((map, image));
    }
    Err(Error::InvalidInput("no admissible projective map found".into()))
}

/// A similarity followed by an inversion in a sphere centered away from the net.
#[derive(Debug, Clone, PartialEq)]
pub struct MoebiusMap {
    pub rotation: DMatrix<f64>,
    pub scale: f64,
    pub translation: Point,
    /// Inversion `c + r^2 (x - c)/|x - c|^2`, applied after the similarity.
    pub inversion: Option<(Point, f64)>,
}

impl MoebiusMap {
    pub fn apply(&self, p: &Point) -> Point {
        let v = &self.rotation * nalgebra::DVector::from_column_slice(p.coords());
        let q = &Point::new(v.iter().map(|x| x * self.scale).collect()) + &self.translation;
        match &self.inversion {
            None => q,
            Some((c, r)) => {
                let d = &q - c;
                c.add_scaled(r * r / d.norm_sq(), &d)
            }
        }
    }
}

pub fn random_moebius_map(net: &QNet, rng: &mut impl Rng, with_inversion: bool) -> MoebiusMap {
    let n = net.ambient_dim();
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let rotation = a.qr().q();
    let scale = rng.random_range(0.5..2.0);
    let translation = Point::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
    let mut map = MoebiusMap {
        rotation,
        scale,
        translation,
        inversion: None,
    };
    if with_inversion {
        let image: Vec<Point> = net.vertices().iter().map(|p| map.apply(p)).collect();
        let refs: Vec<&Point> = image.iter().collect();
        let diam = crate::geom::diameter(&refs);
        let mut centroid = Point::origin(n);
        for p in &image {
            centroid = centroid.add_scaled(1.0 / image.len() as f64, p);
        }
        loop {
            let dir = Point::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
            let Some(dir) = dir.normalized() else { continue };
            let c = centroid.add_scaled(diam * rng.random_range(0.8..1.5), &dir);
            let closest = image.iter().map(|p| p.dist(&c)).fold(f64::INFINITY, f64::min);
            if closest > 0.3 * diam {
                map.inversion = Some((c, diam));
                break;
            }
        }
    }
    map
}

pub fn moebius_image(net: &QNet, map: &MoebiusMap) -> Result<QNet> {
    net.map_points(|p| map.apply(p))
}

/// A circular net whose metric relation `|f_i - f|^2 = alpha_i s s_i` holds on
/// every edge but which is not isothermic: the far quad of a 3x3 three-leg net
/// is replaced by the crossed quad with cross-ratio `-alpha_1/alpha_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CaveatFixture {
    /// The unmodified (all quads embedded) three-leg net.
    pub embedded: IsothermicNet,
    pub crossed: QNet,
    pub labels: EdgeLabelling,
    /// Metric of the crossed net.
    pub s: VertexScalar,
}

pub fn metric_caveat_fixture(rng: &mut impl Rng, tol: &Tolerances) -> Result<CaveatFixture> {
    let mut params = ThreeLegParams::new(vec![3, 3]);
    params.ambient_dim = 2;
    let embedded = three_leg_net(rng, &params, tol)?;
    let net = &embedded.net;
    let lattice = net.lattice();
    let corner = lattice.index(&[2, 2]);
    let cell = lattice.quad_at(lattice.index(&[1, 1]), 0, 1).expect("inside");
    let [f, fi, _, fj] = net.quad_points(&cell);
    let a1 = embedded.labels.per_axis[0][1];
    let a2 = embedded.labels.per_axis[1][1];
    let flipped = three_leg_vertex(f, fi, fj, a1, -a2, tol)?;
    let mut crossed = net.clone();
    crossed.set_point(corner, flipped.clone())?;
    let mut s = embedded.metric.values.clone();
    let f21 = net.point_at(&[2, 1]);
    s[corner] = flipped.dist(f21).powi(2) / (a2 * s[lattice.index(&[2, 1])]);
    Ok(CaveatFixture {
        labels: embedded.labels.clone(),
        embedded,
        crossed,
        s: VertexScalar::new(s),
    })
}
