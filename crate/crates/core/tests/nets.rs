//! Worked examples on whole nets: failure localisation, higher ambient
//! dimension, hexahedron incidences and three-dimensional isothermic nets.

use koenigs::generate::{
    lightcone_net, moutard_net, perturb_corner_in_plane, perturb_corner_on_circle, random_curve, random_qnet,
    rng_from_seed, three_leg_net, LightconeParams, MoutardParams, ThreeLegParams,
};
use koenigs::geom::{affine_rank, diagonal_ratios};
use koenigs::isothermic::{
    check_isothermic, check_moebius_characterizations, christoffel, limit_signs, recover_labels, three_leg_evolve,
    MoebiusTest,
};
use koenigs::koenigs::{
    build_q_form, check_closedness, check_koenigs_2d_geometric, check_koenigs_3d_geometric, diagonal_intersection_net,
    integrate_nu,
    laplace_residual, normalize_nu_for_limit, BaseValue,
};
use koenigs::qnet::complete_hexahedron;
use koenigs::{EdgeLabelling, Error, PlanarQuad, Point, QNet, Site, Tolerances};
use rand::Rng;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn cross(a: &Point, b: &Point) -> Point {
    Point::new(vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])
}

#[test]
fn corner_perturbation_breaks_only_the_adjacent_cycle() {
    let mut rng = rng_from_seed(11);
    let g = moutard_net(&mut rng, &MoutardParams::new(vec![7, 7]), &tol()).unwrap();
    let bad = perturb_corner_in_plane(&g.net, &mut rng, 1e-2).unwrap();
    let r = check_closedness(&bad, &tol()).unwrap();
    assert!(!r.is_koenigs);
    assert_eq!(r.failing, vec![Site::Vertex(vec![5, 5])]);

    // the Laplace equation with nu from the intact part fails visibly at the corner quad
    let (b, w) = BaseValue::default_pair(2);
    let kd = integrate_nu(&g.net, &b, &w, &tol()).unwrap();
    assert!(laplace_residual(&g.net, &kd, &tol()).max_residual <= 1e-9);
    assert!(laplace_residual(&bad, &kd, &tol()).max_residual >= 1e-3);
    assert!(matches!(integrate_nu(&bad, &b, &w, &tol()).unwrap_err().root(), Error::NotKoenigs { .. }));
}

#[test]
fn crossed_quad_has_a_positive_ratio() {
    let mut rng = rng_from_seed(12);
    let mut seen = 0;
    while seen < 200 {
        let pts: Vec<Point> = (0..4)
            .map(|_| Point::new(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
            .collect();
        let Ok(q) = PlanarQuad::new(pts[0].clone(), pts[1].clone(), pts[2].clone(), pts[3].clone(), tol()) else {
            continue;
        };
        let Ok((qa, qb)) = diagonal_ratios(&q) else { continue };
        if !q.is_convex() {
            assert!(qa > 0.0 || qb > 0.0);
            seen += 1;
        }
    }
}

#[test]
fn net_in_four_space_satisfies_the_subspace_criterion() {
    let mut rng = rng_from_seed(13);
    let mut params = MoutardParams::new(vec![6, 6]);
    params.ambient_dim = 4;
    let g = moutard_net(&mut rng, &params, &tol()).unwrap();
    let r = check_koenigs_2d_geometric(&g.net, &tol()).unwrap();
    assert!(r.is_koenigs);
    assert!(!r.vertices.is_empty());
    for v in &r.vertices {
        assert!(v.diagonals.pass);
        assert!(v.subspace.as_ref().expect("N >= 4").pass);
        assert!(v.planes.is_none());
    }
    let r3 = {
        let g = moutard_net(&mut rng, &MoutardParams::new(vec![6, 6]), &tol()).unwrap();
        check_koenigs_2d_geometric(&g.net, &tol()).unwrap()
    };
    for v in &r3.vertices {
        assert!(v.diagonals.pass && v.planes.as_ref().expect("N = 3").pass);
        assert!(v.subspace.is_none());
    }
}

#[test]
fn generic_qnet_fails_both_coplanarity_tests() {
    let mut rng = rng_from_seed(14);
    for _ in 0..10 {
        let net = random_qnet(&mut rng, vec![3, 3, 3], 3, &tol()).unwrap();
        let r = check_koenigs_3d_geometric(&net, &tol()).unwrap();
        assert!(!r.is_koenigs);
        assert!(!r.all_black_coplanar && !r.all_white_coplanar && !r.all_collinear);
        assert!(!check_closedness(&net, &tol()).unwrap().is_koenigs);
    }
}

#[test]
fn black_coplanarity_forces_white_coplanarity() {
    let mut rng = rng_from_seed(15);
    let rand_pt = |rng: &mut rand_chacha::ChaCha8Rng| {
        Point::new((0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
    };
    let mut checked = 0;
    for _ in 0..50 {
        let f = Point::origin(3);
        let e = [rand_pt(&mut rng), rand_pt(&mut rng), rand_pt(&mut rng)];
        let [fi, fj, fk] = [&f + &e[0], &f + &e[1], &f + &e[2]];
        let mut in_plane = |a: &Point, b: &Point| {
            let (s, t) = (rng.random_range(0.5..1.5), rng.random_range(0.5..1.5));
            a.scale(s).add_scaled(t, b)
        };
        let fij = in_plane(&e[0], &e[1]);
        let fik = in_plane(&e[0], &e[2]);
        // f_jk on the line plane(f, f_j, f_k) meets plane(f, f_ij, f_ik)
        let dir = cross(&cross(&e[1], &e[2]), &cross(&fij, &fik));
        let fjk = dir.scale(rng.random_range(0.5..1.5) / dir.norm() * e[1].norm());
        let Ok(fijk) = complete_hexahedron([&f, &fi, &fj, &fk, &fij, &fik, &fjk], &tol()) else {
            continue;
        };
        assert!(affine_rank(&[&f, &fij, &fik, &fjk], 1e-9) <= 2);
        assert!(affine_rank(&[&fi, &fj, &fk, &fijk], 1e-9) <= 2);
        let net = QNet::from_fn(vec![2, 2, 2], |u| match (u[0], u[1], u[2]) {
            (0, 0, 0) => f.clone(),
            (1, 0, 0) => fi.clone(),
            (0, 1, 0) => fj.clone(),
            (0, 0, 1) => fk.clone(),
            (1, 1, 0) => fij.clone(),
            (1, 0, 1) => fik.clone(),
            (0, 1, 1) => fjk.clone(),
            _ => fijk.clone(),
        })
        .unwrap();
        if let Ok(r) = check_koenigs_3d_geometric(&net, &tol()) {
            assert!(r.all_black_coplanar && r.all_white_coplanar && r.all_collinear);
            assert!(check_closedness(&net, &tol()).unwrap().is_koenigs);
            checked += 1;
        }
    }
    assert!(checked >= 40, "only {checked} hexahedra checked");
}

#[test]
fn crossed_quad_defeats_the_sign_switch() {
    let mut rng = rng_from_seed(16);
    let labels = EdgeLabelling::new(vec![vec![1.0, 1.1, 0.9], vec![2.0, 2.5, 3.0]]).unwrap();
    let axes: Vec<Vec<Point>> = (0..2).map(|k| random_curve(&mut rng, 4, k, 3, 0.1)).collect();
    let iso = three_leg_evolve(&axes, &labels, &tol()).unwrap();
    let form = build_q_form(&iso.net, &tol()).unwrap();
    assert!(iso.net.lattice().quads().any(|c| form.q_main(&c) > 0.0 || form.q_cross(&c) > 0.0));
    let (b, w) = BaseValue::default_pair(2);
    let kd = integrate_nu(&iso.net, &b, &w, &tol()).unwrap();
    let err = normalize_nu_for_limit(&iso.net, &kd, 0).unwrap_err();
    assert_eq!(err.root(), &Error::NotAlternating);
}

#[test]
fn moving_a_vertex_along_its_circle_fails_at_the_corner() {
    let mut rng = rng_from_seed(17);
    let iso = three_leg_net(&mut rng, &ThreeLegParams::new(vec![6, 6]), &tol()).unwrap();
    let bad = perturb_corner_on_circle(&iso.net, 0.05).unwrap();
    let r = check_isothermic(&bad, &tol()).unwrap();
    assert!(r.circular && !r.verdict);
    assert_eq!(r.failing, vec![Site::Vertex(vec![4, 4])]);
}

#[test]
fn bent_nets_pass_the_central_sphere_test() {
    let mut rng = rng_from_seed(18);
    let mut params = ThreeLegParams::new(vec![5, 5]);
    params.wiggle = 3e-3;
    let iso = three_leg_net(&mut rng, &params, &tol()).unwrap();
    let r = check_moebius_characterizations(&iso.net, &tol()).unwrap();
    assert!(r.is_isothermic);
    assert_eq!(r.vertices.len(), 9);
    for v in &r.vertices {
        assert_eq!(v.test, MoebiusTest::CentralSphere);
        let (center, radius) = v.sphere.as_ref().expect("sphere in R^3");
        let f = iso.net.point_at(&v.u);
        assert!((f.dist(center) / radius - 1.0).abs() < 1e-6);
    }

    // unbent nets lie on one sphere and use the common-point test instead
    let flat = three_leg_net(&mut rng, &ThreeLegParams::new(vec![5, 5]), &tol()).unwrap();
    let r = check_moebius_characterizations(&flat.net, &tol()).unwrap();
    assert!(r.is_isothermic);
    assert!(r.vertices.iter().all(|v| v.test == MoebiusTest::CommonPoint));
}

#[test]
fn three_dimensional_lightcone_nets() {
    let mut rng = rng_from_seed(19);
    for _ in 0..5 {
        let ev = lightcone_net(&mut rng, &LightconeParams::new(vec![4, 4, 4]), &tol()).unwrap();
        assert!(ev.consistency_residual <= 1e-9);
        assert!(ev.isotropy_residual <= 1e-12);
        let iso = check_isothermic(&ev.iso.net, &tol()).unwrap();
        assert!(iso.verdict);
        assert!(check_closedness(&ev.iso.net, &tol()).unwrap().is_koenigs);
        let labels = recover_labels(&ev.iso.net, &tol()).unwrap();
        assert!(labels.labels.relative_error_up_to_scale(&ev.iso.labels) <= 1e-8);
        let m = check_moebius_characterizations(&ev.iso.net, &tol()).unwrap();
        assert_eq!(m.hexahedra.len(), 27);
        for h in &m.hexahedra {
            assert_eq!(h.white_concircular, h.black_concircular);
            assert!(h.white_concircular);
        }
    }
}

#[test]
fn limit_sign_christoffel_keeps_the_geometry() {
    let mut rng = rng_from_seed(20);
    let iso = three_leg_net(&mut rng, &ThreeLegParams::new(vec![5, 5]), &tol()).unwrap();
    let (s, labels) = limit_signs(&iso).unwrap();
    assert!(s.values.iter().all(|&x| x > 0.0));
    for (a, b) in labels.per_axis[1].iter().zip(&iso.labels.per_axis[1]) {
        assert_eq!(*a, -b);
    }
    let origin = || Point::origin(3);
    let plain = christoffel(&iso, (&[0, 0], origin()), false, &tol()).unwrap();
    let shown = christoffel(&iso, (&[0, 0], origin()), true, &tol()).unwrap();
    // the limit convention is a relabelling; the dual edges are alpha df/|df|^2 with the original labels
    assert_ne!(plain.convention, shown.convention);
    assert!((0..iso.net.lattice().len()).all(|k| plain.net.point(k) == shown.net.point(k)));
    for cell in iso.net.lattice().quads() {
        let [a, b, _, d] = cell.corners;
        for (k, axis) in [(b, cell.i), (d, cell.j)] {
            let e = plain.net.point(k) - plain.net.point(a);
            let alpha = iso.labels.label(axis, &cell.base);
            assert_eq!(labels.label(axis, &cell.base).abs(), alpha.abs());
            let df = iso.net.point(k) - iso.net.point(a);
            let expect = df.scale(alpha / df.norm_sq());
            assert!(e.dist(&expect) <= 1e-9 * e.norm());
        }
    }
    assert!(check_isothermic(&shown.net, &tol()).unwrap().verdict);
}

#[test]
fn diagonal_intersections_form_a_net_on_the_quad_window() {
    let mut rng = rng_from_seed(21);
    let g = moutard_net(&mut rng, &MoutardParams::new(vec![5, 4]), &tol()).unwrap();
    let m = diagonal_intersection_net(&g.net, &tol()).unwrap();
    assert_eq!(m.extents(), &[4, 3]);
    for cell in g.net.lattice().quads() {
        let [a, b, c, d] = g.net.quad_points(&cell);
        let x = m.point_at(&cell.base);
        assert!(affine_rank(&[a, c, x], 1e-9) <= 1);
        assert!(affine_rank(&[b, d, x], 1e-9) <= 1);
    }
    let cube = moutard_net(&mut rng, &MoutardParams::new(vec![3, 3, 3]), &tol()).unwrap();
    assert!(diagonal_intersection_net(&cube.net, &tol()).is_err());
}
