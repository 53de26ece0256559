#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;

use hmflow::convex::{Constraint, ConvexBody};
use hmflow::manifold::{ModelManifold, Point, Tangent};
use hmflow::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Poincaré disk metric factor `g = 4 / (1 - |x|^2)^2`.
fn poincare_metric(x: [f64; 2]) -> f64 {
    let r2 = x[0] * x[0] + x[1] * x[1];
    4.0 / ((1.0 - r2) * (1.0 - r2))
}

/// Christoffel symbols from central differences of the metric,
/// `Γ^k_ij = ½ g^{kk} (∂_i g_jk + ∂_j g_ik - ∂_k g_ij)` for a conformal metric.
fn fd_christoffel(x: [f64; 2]) -> [[[f64; 2]; 2]; 2] {
    let h = 1e-5;
    let grad = |k: usize| {
        let mut a = x;
        let mut b = x;
        a[k] += h;
        b[k] -= h;
        (poincare_metric(a) - poincare_metric(b)) / (2.0 * h)
    };
    let dg = [grad(0), grad(1)];
    let g = poincare_metric(x);
    let mut out = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut v = 0.0;
                if j == k {
                    v += dg[i];
                }
                if i == k {
                    v += dg[j];
                }
                if i == j {
                    v -= dg[k];
                }
                out[k][i][j] = 0.5 * v / g;
            }
        }
    }
    out
}

/// RK4 integration of the chart geodesic equation with FD Christoffels.
fn integrate_geodesic(x0: [f64; 2], v0: [f64; 2], steps: usize) -> [f64; 2] {
    let rhs = |s: [f64; 4]| {
        let g = fd_christoffel([s[0], s[1]]);
        let v = [s[2], s[3]];
        let mut acc = [0.0; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    acc[k] -= g[k][i][j] * v[i] * v[j];
                }
            }
        }
        [v[0], v[1], acc[0], acc[1]]
    };
    let mut s = [x0[0], x0[1], v0[0], v0[1]];
    let dt = 1.0 / steps as f64;
    let add = |a: [f64; 4], b: [f64; 4], c: f64| {
        [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2], a[3] + c * b[3]]
    };
    for _ in 0..steps {
        let k1 = rhs(s);
        let k2 = rhs(add(s, k1, dt / 2.0));
        let k3 = rhs(add(s, k2, dt / 2.0));
        let k4 = rhs(add(s, k3, dt));
        for i in 0..4 {
            s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    [s[0], s[1]]
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn documented_exp_log_dist_values() {
    let s = ModelManifold::Sphere2;
    let n = s.point(&[0.0, 0.0, 1.0]).unwrap();
    let v = s.tangent(&n, &[PI / 2.0, 0.0, 0.0]).unwrap();
    assert!(close(s.exp(&n, &v).unwrap().coords(), &[1.0, 0.0, 0.0], 1e-12));
    let q = s.point(&[0.0, 1.0, 0.0]).unwrap();
    let l = s.log(&n, &q).unwrap();
    assert!(close(l.components(), &[0.0, PI / 2.0, 0.0], 1e-12));
    let south = s.point(&[0.0, 0.0, -1.0]).unwrap();
    assert!((s.dist(&n, &south) - PI).abs() < 1e-15);
    assert_eq!(s.log(&n, &south), Err(Error::NonUniqueGeodesic));

    let f = ModelManifold::flat(2).unwrap();
    let p = f.point(&[1.0, 2.0]).unwrap();
    let v = f.tangent(&p, &[3.0, -1.0]).unwrap();
    let q = f.exp(&p, &v).unwrap();
    assert_eq!(q.coords(), &[4.0, 1.0]);
    assert_eq!(f.log(&p, &q).unwrap().components(), &[3.0, -1.0]);
    let f3 = ModelManifold::flat(3).unwrap();
    let d = f3.dist(&f3.point(&[0.0; 3]).unwrap(), &f3.point(&[1.0, 2.0, 2.0]).unwrap());
    assert!((d - 3.0).abs() < 1e-15);
}

#[test]
fn poincare_exp_matches_geodesic_ode() {
    let m = ModelManifold::PoincareDisk;
    let o = m.point(&[0.0, 0.0]).unwrap();
    let v = m.tangent(&o, &[1.0986, 0.0]).unwrap();
    let q = m.exp(&o, &v).unwrap();
    // Frame components are λ times chart components, λ(0) = 2.
    let ode = integrate_geodesic([0.0, 0.0], [1.0986 / 2.0, 0.0], 400);
    assert!(close(q.coords(), &ode, 1e-8), "{:?} vs {:?}", q.coords(), ode);
    assert!((q.coords()[0] - 0.5).abs() < 1e-4);
    let half = m.point(&[0.5, 0.0]).unwrap();
    let d = m.dist(&o, &half);
    assert!((d - 2.0 * 0.5f64.atanh()).abs() < 1e-14);
    let l = m.log(&o, &half).unwrap();
    assert!(close(l.components(), &[2.0 * 0.5f64.atanh(), 0.0], 1e-14));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let r = 0.7 * rand::Rng::random::<f64>(&mut rng);
        let a = 2.0 * PI * rand::Rng::random::<f64>(&mut rng);
        let p = m.point(&[r * a.cos(), r * a.sin()]).unwrap();
        let w = m.random_unit_tangent(&p, &mut rng).scaled(1.5);
        let lam = m.conformal_factor(&p);
        let c = w.components();
        let ode = integrate_geodesic(
            [p.coords()[0], p.coords()[1]],
            [c[0] / lam, c[1] / lam],
            400,
        );
        let q = m.exp(&p, &w).unwrap();
        assert!(close(q.coords(), &ode, 1e-7), "{:?} vs {:?}", q.coords(), ode);
    }
}

#[test]
fn christoffel_matches_metric_differences() {
    let m = ModelManifold::PoincareDisk;
    for x in [[0.3, 0.0], [0.0, 0.0], [-0.2, 0.45], [0.6, -0.1]] {
        let g = m.christoffel(&m.point(&x).unwrap()).unwrap();
        let fd = fd_christoffel(x);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!((g.get(k, i, j) - fd[k][i][j]).abs() < 1e-6);
                    assert_eq!(g.get(k, i, j), g.get(k, j, i));
                    if x == [0.0, 0.0] {
                        assert_eq!(g.get(k, i, j), 0.0);
                    }
                }
            }
        }
    }
    let f = ModelManifold::flat(3).unwrap();
    let g = f.christoffel(&f.point(&[1.0, 2.0, 3.0]).unwrap()).unwrap();
    assert!((0..27).all(|i| g.get(i / 9, (i / 3) % 3, i % 3) == 0.0));
    let s = ModelManifold::Sphere2;
    assert!(matches!(
        s.christoffel(&s.point(&[0.0, 0.0, 1.0]).unwrap()),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn sphere_convexity_radius_probe() {
    let m = ModelManifold::Sphere2;
    let n = m.point(&[0.0, 0.0, 1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let ok = ConvexBody::new(m, vec![Constraint::ball(n.clone(), 1.5)], 0.05).unwrap();
    assert!(ok.strong_convexity_probe(300, &mut rng));
    let bad = ConvexBody::new_unchecked_convexity(m, vec![Constraint::ball(n, 1.65)], 0.05).unwrap();
    assert!(!bad.strong_convexity_probe(300, &mut rng));
}

fn sphere_point() -> impl Strategy<Value = Point> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("nonzero", |(a, b, c)| a * a + b * b + c * c > 1e-2)
        .prop_map(|(a, b, c)| ModelManifold::Sphere2.point_normalized(&[a, b, c]).unwrap())
}

fn disk_point() -> impl Strategy<Value = Point> {
    (0.0f64..0.8, 0.0f64..(2.0 * PI))
        .prop_map(|(r, a)| ModelManifold::PoincareDisk.point(&[r * a.cos(), r * a.sin()]).unwrap())
}

fn flat_point() -> impl Strategy<Value = Point> {
    prop::collection::vec(-5.0f64..5.0, 3).prop_map(|c| ModelManifold::flat(3).unwrap().point(&c).unwrap())
}

fn tangent_at(m: ModelManifold, p: &Point, raw: &[f64], len: f64) -> Tangent {
    let v = m.project_to_tangent(p, &raw[..m.ambient_dim()]);
    match v.normalized() {
        Some(u) => u.scaled(len),
        None => m.zero_tangent(p),
    }
}

fn raw_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 3)
}

fn check_round_trip(m: ModelManifold, p: &Point, raw: &[f64], len: f64) -> std::result::Result<(), TestCaseError> {
    let v = tangent_at(m, p, raw, len);
    let q = m.exp(p, &v).unwrap();
    m.point(q.coords()).unwrap();
    let back = m.log(p, &q).unwrap();
    let err = back.plus(&v.scaled(-1.0)).norm();
    prop_assert!(err <= 1e-9, "round trip error {err}");
    prop_assert!((m.dist(p, &q) - v.norm()).abs() <= 1e-9);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn sphere_round_trip(p in sphere_point(), raw in raw_vec(), len in 0.0f64..(0.9 * PI)) {
        check_round_trip(ModelManifold::Sphere2, &p, &raw, len)?;
    }

    #[test]
    fn disk_round_trip(p in disk_point(), raw in raw_vec(), len in 0.0f64..4.0) {
        check_round_trip(ModelManifold::PoincareDisk, &p, &raw, len)?;
    }

    #[test]
    fn flat_round_trip(p in flat_point(), raw in raw_vec(), len in 0.0f64..10.0) {
        check_round_trip(ModelManifold::flat(3).unwrap(), &p, &raw, len)?;
    }

    #[test]
    fn sphere_triangle_inequality(a in sphere_point(), b in sphere_point(), c in sphere_point()) {
        let m = ModelManifold::Sphere2;
        prop_assert!(m.dist(&a, &c) <= m.dist(&a, &b) + m.dist(&b, &c) + 1e-12);
        prop_assert!((m.dist(&a, &b) - m.dist(&b, &a)).abs() <= 1e-15);
    }

    #[test]
    fn disk_triangle_inequality(a in disk_point(), b in disk_point(), c in disk_point()) {
        let m = ModelManifold::PoincareDisk;
        prop_assert!(m.dist(&a, &c) <= m.dist(&a, &b) + m.dist(&b, &c) + 1e-12);
        prop_assert!((m.dist(&a, &b) - m.dist(&b, &a)).abs() <= 1e-12);
        prop_assert_eq!(m.dist(&a, &a), 0.0);
    }

    #[test]
    fn geodesic_speed(p in disk_point(), q in sphere_point(), raw in raw_vec(), s in 0.0f64..3.0) {
        let d = ModelManifold::PoincareDisk;
        let u = tangent_at(d, &p, &raw, 1.0);
        if u.norm() > 0.0 {
            prop_assert!((d.dist(&p, &d.exp(&p, &u.scaled(s)).unwrap()) - s).abs() <= 1e-9);
        }
        let sp = ModelManifold::Sphere2;
        let u = tangent_at(sp, &q, &raw, 1.0);
        if u.norm() > 0.0 {
            prop_assert!((sp.dist(&q, &sp.exp(&q, &u.scaled(s)).unwrap()) - s).abs() <= 1e-9);
        }
    }

    #[test]
    fn sphere_exp_stays_on_sphere(p in sphere_point(), raw in raw_vec(), len in 0.0f64..3.1) {
        let m = ModelManifold::Sphere2;
        let q = m.exp(&p, &tangent_at(m, &p, &raw, len)).unwrap();
        let n: f64 = q.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assert!((n - 1.0).abs() <= 1e-12);
    }
}
