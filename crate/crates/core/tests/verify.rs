mod common;

use std::f64::consts::PI;

use common::*;
use hmflow::convex::{Constraint, ConvexBody};
use hmflow::flow::*;
use hmflow::manifold::{ModelManifold, Point};
use hmflow::verify::*;

fn box_body() -> ConvexBody {
    let m = ModelManifold::flat(2).unwrap();
    ConvexBody::new(
        m,
        vec![
            Constraint::half_space(&[0.0, 1.0], 0.0).unwrap(),
            Constraint::half_space(&[1.0, 0.0], 10.0).unwrap(),
            Constraint::half_space(&[-1.0, 0.0], 10.0).unwrap(),
            Constraint::half_space(&[0.0, -1.0], 10.0).unwrap(),
        ],
        2.0,
    )
    .unwrap()
}

fn column(mesh: &DomainMesh, w: &[f64], time: f64) -> FlowState {
    let m = ModelManifold::flat(2).unwrap();
    let values = w.iter().map(|&v| m.point(&[0.0, v]).unwrap()).collect();
    FlowState {
        field: MapField::new(mesh.clone(), m, values).unwrap(),
        time,
    }
}

#[test]
fn flat_identity_is_exact_for_discrete_heat() {
    let cells = 32;
    let mesh = DomainMesh::interval(cells).unwrap();
    let h = mesh.spacing();
    let lambda = (2.0 - 2.0 * (PI * h).cos()) / (h * h);
    let dt = 1e-3;
    let w0: Vec<f64> = (0..mesh.len()).map(|n| 0.5 * (PI * n as f64 * h).sin()).collect();
    let w1: Vec<f64> = w0.iter().map(|v| v / (1.0 + dt * lambda)).collect();
    let (prev, cur) = (column(&mesh, &w0, 0.0), column(&mesh, &w1, dt));
    let body = box_body();
    for node in mesh.interior_nodes() {
        let t = lemma2_residual(&prev, &cur, &body, node).unwrap();
        assert!((t.d_y - w1[node]).abs() < 1e-14);
        assert_eq!(t.trace, 0.0);
        assert!(t.residual <= 1e-10, "node {node}: {t:?}");
    }
}

#[test]
fn constant_exterior_field_balances() {
    let m = ModelManifold::Sphere2;
    let body = sphere_cap();
    let dir = m.tangent(&north(), &[1.0, 0.0, 0.0]).unwrap();
    let y = m.exp(&north(), &dir.scaled(0.8)).unwrap();
    let mesh = DomainMesh::interval(8).unwrap();
    let f = MapField::constant(mesh, m, &y).unwrap();
    let prev = FlowState { field: f.clone(), time: 0.0 };
    let cur = FlowState { field: f, time: 0.01 };
    let t = lemma2_residual(&prev, &cur, &body, 3).unwrap();
    assert!((t.d_y - 0.1).abs() < 1e-12);
    assert!(t.residual <= 1e-10);
    assert!(lemma2_residual(&prev, &cur, &body, 0).is_err());
    let inside = FlowState {
        field: MapField::constant(DomainMesh::interval(8).unwrap(), m, &north()).unwrap(),
        time: 0.02,
    };
    assert!(lemma2_residual(&cur, &inside, &body, 3).is_err());
}

fn exterior_state(m: ModelManifold, y: &Point) -> FlowState {
    FlowState {
        field: MapField::constant(DomainMesh::interval(4).unwrap(), m, y).unwrap(),
        time: 0.0,
    }
}

#[test]
fn patch_touches_from_below() {
    let m = ModelManifold::Sphere2;
    let dir = m.tangent(&north(), &[0.6, -0.8, 0.0]).unwrap();
    let y = m.exp(&north(), &dir.scaled(0.8)).unwrap();
    let out = touching_test(&exterior_state(m, &y), &sphere_cap(), 2, 0.1, 1).unwrap();
    assert!(out.equality_gap <= TOUCHING_TOL);
    assert!(out.passed(), "{out:?}");

    let d = ModelManifold::PoincareDisk;
    let body = disk_lens();
    let y = (1..100)
        .map(|k| d.point(&[0.01 * k as f64, 0.1]).unwrap())
        .find(|p| body.distance(p).is_ok_and(|s| s > 0.15))
        .unwrap();
    let out = touching_test(&exterior_state(d, &y), &body, 2, 0.05, 2).unwrap();
    assert!(out.passed(), "{out:?}");

    let tri = triangle();
    let y = tri.manifold().point(&[0.8, 0.6]).unwrap();
    let out = touching_test(&exterior_state(*tri.manifold(), &y), &tri, 1, 0.2, 3).unwrap();
    assert!(out.passed(), "{out:?}");
}

#[test]
fn max_principle_examples() {
    let mesh = DomainMesh::interval(16).unwrap();
    let times: Vec<f64> = (0..=20).map(|k| 0.001 * k as f64).collect();
    let neg = vec![vec![-1.0; mesh.len()]; times.len()];
    let v = max_principle_check(&mesh, &times, &neg, 5.0, 1e-9);
    assert_eq!(v.classification, Classification::HypothesisAndConclusionHold);
    assert_eq!(v.skipped_band, 0);

    let h = mesh.spacing();
    let grow: Vec<Vec<f64>> = times
        .iter()
        .map(|t| (0..mesh.len()).map(|n| t * (PI * n as f64 * h).sin()).collect())
        .collect();
    let v = max_principle_check(&mesh, &times, &grow, 20.0, 1e-9);
    match v.classification {
        Classification::HypothesisViolated(w) => {
            assert_eq!(w.time_index, 1);
            assert!(w.residual.unwrap() > 0.0);
        }
        other => panic!("expected a hypothesis failure, got {other:?}"),
    }
    assert!(v.h_transform_max > 0.0);
}

#[test]
fn sphere_run_stays_contained() {
    let m = ModelManifold::Sphere2;
    let body = sphere_cap();
    let mesh = DomainMesh::interval(32).unwrap();
    let f = MapField::from_fn(mesh, m, |x| {
        let r = 0.4 + 0.2 * (PI * x[0]).sin();
        let th = -0.5 + x[0];
        m.exp(&north(), &m.tangent(&north(), &[r * th.cos(), r * th.sin(), 0.0])?)
    })
    .unwrap();
    let traj = run(&f, (0.0, 0.05), &HoldBoundary::from_field(&f), TimePolicy::default()).unwrap();
    let tol = default_tolerance(f.mesh().spacing(), traj.dt);
    let report = sigma_trace(&traj.states, &body, tol);
    assert_eq!(report.verdict, Verdict::Contained);
    assert_eq!(report.sigma_max_series[0], 0.0);
    assert_eq!(report.times.len(), traj.states.len());
    assert!(report.sigma_max() <= tol);
}

#[test]
fn outside_boundary_value_is_reported() {
    let m = ModelManifold::Sphere2;
    let body = sphere_cap();
    let mesh = DomainMesh::interval(16).unwrap();
    let dir = m.tangent(&north(), &[1.0, 0.0, 0.0]).unwrap();
    let outside = m.exp(&north(), &dir.scaled(0.9)).unwrap();
    let f = MapField::from_fn(mesh, m, |x| {
        if x[0] == 1.0 {
            Ok(outside.clone())
        } else {
            m.exp(&north(), &dir.scaled(0.5 * x[0]))
        }
    })
    .unwrap();
    let traj = run(&f, (0.0, 0.01), &HoldBoundary::from_field(&f), TimePolicy::default()).unwrap();
    let report = sigma_trace(&traj.states, &body, 1e-3);
    assert!(report.sigma_max() >= 0.2 - 1e-9);
    assert_eq!(report.verdict, Verdict::HypothesisViolated);
    let first = report.hypothesis_failure.unwrap();
    assert_eq!((first.time, first.node), (0.0, 16));
}

#[test]
fn tube_exit_stops_monitoring() {
    let m = ModelManifold::Sphere2;
    let body = sphere_cap();
    let dir = m.tangent(&north(), &[0.0, 1.0, 0.0]).unwrap();
    let far = m.exp(&north(), &dir.scaled(1.2)).unwrap();
    let state = exterior_state(m, &far);
    let report = sigma_trace(&[state.clone(), state], &body, 1e-3);
    assert_eq!(report.verdict, Verdict::TubeExited);
    assert_eq!(report.tube_exit, Some((0.0, 0)));
    assert!(report.times.is_empty());
}
