//! Bodies and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use hmflow::convex::{Constraint, ConvexBody};
use hmflow::manifold::{ModelManifold, Point};
use rand::Rng;

pub fn north() -> Point {
    ModelManifold::Sphere2.point(&[0.0, 0.0, 1.0]).unwrap()
}

pub fn sphere_cap() -> ConvexBody {
    ConvexBody::new(ModelManifold::Sphere2, vec![Constraint::ball(north(), 0.7)], 0.3).unwrap()
}

pub fn sphere_lens() -> ConvexBody {
    let m = ModelManifold::Sphere2;
    let other = m.point_normalized(&[0.5, 0.0, 1.0]).unwrap();
    ConvexBody::new(m, vec![Constraint::ball(north(), 0.7), Constraint::ball(other, 0.6)], 0.3).unwrap()
}

pub fn triangle() -> ConvexBody {
    hmflow::convex::unit_triangle(0.5).unwrap()
}

pub fn disk_lens() -> ConvexBody {
    let m = ModelManifold::PoincareDisk;
    ConvexBody::new(
        m,
        vec![
            Constraint::ball(m.point(&[0.1, 0.0]).unwrap(), 1.2),
            Constraint::ball(m.point(&[-0.3, 0.2]).unwrap(), 1.0),
        ],
        0.5,
    )
    .unwrap()
}

pub fn flat_cut_disk() -> ConvexBody {
    let m = ModelManifold::flat(2).unwrap();
    ConvexBody::new(
        m,
        vec![
            Constraint::ball(m.point(&[0.0, 0.0]).unwrap(), 1.0),
            Constraint::half_space(&[1.0, 0.5], 0.4).unwrap(),
        ],
        0.6,
    )
    .unwrap()
}

pub fn all_bodies() -> Vec<(&'static str, ConvexBody)> {
    vec![
        ("sphere-cap", sphere_cap()),
        ("sphere-lens", sphere_lens()),
        ("triangle", triangle()),
        ("disk-lens", disk_lens()),
        ("flat-cut-disk", flat_cut_disk()),
    ]
}

/// About `total` points on the boundary of a 2-dimensional body: each
/// constraint boundary is parameterised by arc length and points violating
/// another constraint are dropped.
pub fn boundary_samples(body: &ConvexBody, total: usize) -> Vec<Point> {
    let m = *body.manifold();
    let per = total / body.constraints().len();
    let mut out = Vec::with_capacity(total);
    for c in body.constraints() {
        match c {
            Constraint::Ball { center, radius } => {
                let basis = m.tangent_basis(center);
                for k in 0..per {
                    let a = 2.0 * PI * k as f64 / per as f64;
                    let v = basis[0].scaled(radius * a.cos()).plus(&basis[1].scaled(radius * a.sin()));
                    out.push(m.exp(center, &v).unwrap());
                }
            }
            Constraint::HalfSpace { normal, offset } => {
                let dir = [-normal[1], normal[0]];
                let base = [normal[0] * offset, normal[1] * offset];
                let reach = 10.0;
                for k in 0..per {
                    let s = -reach + 2.0 * reach * k as f64 / per as f64;
                    out.push(m.point(&[base[0] + s * dir[0], base[1] + s * dir[1]]).unwrap());
                }
            }
        }
    }
    out.retain(|p| body.violation(p) <= 1e-9);
    out
}

pub fn brute_force_distance(body: &ConvexBody, samples: &[Point], p: &Point) -> f64 {
    let m = body.manifold();
    samples.iter().map(|q| m.dist(p, q)).fold(f64::INFINITY, f64::min)
}

/// Random point of the tube `B(Y, ε)` outside `Y`.
pub fn tube_point<R: Rng>(body: &ConvexBody, rng: &mut R) -> Point {
    let m = body.manifold();
    loop {
        let y = if rng.random_bool(0.5) {
            body.sample_boundary_point(rng).unwrap()
        } else {
            body.sample_point(rng).unwrap()
        };
        let u = m.random_unit_tangent(&y, rng);
        let p = m.exp(&y, &u.scaled(0.98 * body.epsilon() * rng.random::<f64>())).unwrap();
        if !body.contains(&p) && body.distance(&p).is_ok_and(|d| d > 1e-6) {
            return p;
        }
    }
}
