//! Explicit finite-difference harmonic map heat flow on flat domain meshes.

use std::ops::ControlFlow;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::manifold::{Coords, ModelManifold, Point, Tangent};

/// Default fraction of the stability bound `h^2 / (2m)`.
pub const DEFAULT_SAFETY: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    Interval,
    Circle,
    Square,
    FlatTorus,
}

impl MeshKind {
    pub fn dim(self) -> usize {
        match self {
            MeshKind::Interval | MeshKind::Circle => 1,
            MeshKind::Square | MeshKind::FlatTorus => 2,
        }
    }

    pub fn is_periodic(self) -> bool {
        matches!(self, MeshKind::Circle | MeshKind::FlatTorus)
    }

    pub fn name(self) -> &'static str {
        match self {
            MeshKind::Interval => "interval",
            MeshKind::Circle => "circle",
            MeshKind::Square => "square",
            MeshKind::FlatTorus => "flat-torus",
        }
    }
}

/// Uniform mesh of the unit interval, circle, square or flat torus.
///
/// Nodes of 2-dimensional meshes are numbered `i + j * resolution` with `i`
/// the index along the first axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMesh {
    kind: MeshKind,
    resolution: usize,
    h: f64,
    boundary_mask: Vec<bool>,
}

impl DomainMesh {
    /// `[0, 1]` split into `cells` cells; both endpoints are boundary nodes.
    pub fn interval(cells: usize) -> Result<Self> {
        Self::build(MeshKind::Interval, cells)
    }

    /// `R / Z` sampled at `nodes` points.
    pub fn circle(nodes: usize) -> Result<Self> {
        Self::build(MeshKind::Circle, nodes)
    }

    /// `[0, 1]^2` split into `cells x cells` cells.
    pub fn square(cells: usize) -> Result<Self> {
        Self::build(MeshKind::Square, cells)
    }

    /// `R^2 / Z^2` sampled on a `nodes x nodes` grid.
    pub fn flat_torus(nodes: usize) -> Result<Self> {
        Self::build(MeshKind::FlatTorus, nodes)
    }

    /// Mesh of the given kind with `cells` cells per axis (equal to the node
    /// count per axis on periodic kinds).
    pub fn new(kind: MeshKind, cells: usize) -> Result<Self> {
        Self::build(kind, cells)
    }

    fn build(kind: MeshKind, cells: usize) -> Result<Self> {
        let min = if kind.is_periodic() { 3 } else { 2 };
        if cells < min {
            return Err(Error::InvalidMesh(format!(
                "{} mesh needs at least {min} cells per axis, got {cells}",
                kind.name()
            )));
        }
        let resolution = if kind.is_periodic() { cells } else { cells + 1 };
        let h = 1.0 / cells as f64;
        let len = resolution.pow(kind.dim() as u32);
        let boundary_mask = (0..len)
            .map(|node| match kind {
                MeshKind::Interval => node == 0 || node + 1 == resolution,
                MeshKind::Square => {
                    let (i, j) = (node % resolution, node / resolution);
                    i == 0 || j == 0 || i + 1 == resolution || j + 1 == resolution
                }
                _ => false,
            })
            .collect();
        Ok(DomainMesh {
            kind,
            resolution,
            h,
            boundary_mask,
        })
    }

    pub fn kind(&self) -> MeshKind {
        self.kind
    }

    /// Domain dimension `m`.
    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.boundary_mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundary_mask.is_empty()
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary_mask[node]
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| self.boundary_mask[n]).collect()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| !self.boundary_mask[n]).collect()
    }

    /// Position of a node in `[0, 1]^m`.
    pub fn position(&self, node: usize) -> SmallVec<[f64; 2]> {
        let r = self.resolution;
        match self.dim() {
            1 => SmallVec::from_slice(&[node as f64 * self.h]),
            _ => SmallVec::from_slice(&[(node % r) as f64 * self.h, (node / r) as f64 * self.h]),
        }
    }

    /// Neighbours of `node` along `axis` in the negative and positive
    /// directions, wrapping on periodic meshes.
    pub fn neighbors(&self, node: usize, axis: usize) -> (Option<usize>, Option<usize>) {
        let r = self.resolution;
        let stride = if axis == 0 { 1 } else { r };
        let idx = if axis == 0 { node % r } else { node / r };
        let periodic = self.kind.is_periodic();
        let minus = if idx > 0 {
            Some(node - stride)
        } else if periodic {
            Some(node + (r - 1) * stride)
        } else {
            None
        };
        let plus = if idx + 1 < r {
            Some(node + stride)
        } else if periodic {
            Some(node - (r - 1) * stride)
        } else {
            None
        };
        (minus, plus)
    }
}

/// Map from mesh nodes into a model target.
#[derive(Debug, Clone, PartialEq)]
pub struct MapField {
    mesh: DomainMesh,
    manifold: ModelManifold,
    values: Vec<Point>,
}

impl MapField {
    pub fn new(mesh: DomainMesh, manifold: ModelManifold, values: Vec<Point>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::DimensionMismatch {
                expected: mesh.len(),
                got: values.len(),
            });
        }
        for p in &values {
            manifold.point(p.coords())?;
        }
        Ok(MapField {
            mesh,
            manifold,
            values,
        })
    }

    /// Field obtained by evaluating `f` at every node position.
    pub fn from_fn<F>(mesh: DomainMesh, manifold: ModelManifold, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<Point>,
    {
        let values = (0..mesh.len())
            .map(|n| f(&mesh.position(n)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(mesh, manifold, values)
    }

    pub fn constant(mesh: DomainMesh, manifold: ModelManifold, p: &Point) -> Result<Self> {
        let values = vec![p.clone(); mesh.len()];
        Self::new(mesh, manifold, values)
    }

    pub fn mesh(&self) -> &DomainMesh {
        &self.mesh
    }

    pub fn manifold(&self) -> &ModelManifold {
        &self.manifold
    }

    pub fn values(&self) -> &[Point] {
        &self.values
    }

    pub fn value(&self, node: usize) -> &Point {
        &self.values[node]
    }

    fn interior_neighbors(&self, node: usize, axis: usize) -> Result<(usize, usize)> {
        match self.mesh.neighbors(node, axis) {
            (Some(a), Some(b)) if !self.mesh.is_boundary(node) => Ok((a, b)),
            _ => Err(Error::InvalidMesh(format!(
                "node {node} lies on the boundary; the stencil is only defined at interior nodes"
            ))),
        }
    }

    /// Discrete differential by one-sided differences: forward where a
    /// forward neighbour exists, backward otherwise.
    pub fn differential(&self, node: usize) -> Result<Vec<Tangent>> {
        let m = &self.manifold;
        let h = self.mesh.spacing();
        let u = &self.values[node];
        (0..self.mesh.dim())
            .map(|axis| match self.mesh.neighbors(node, axis) {
                (_, Some(b)) => Ok(m.log(u, &self.values[b])?.scaled(1.0 / h)),
                (Some(a), None) => Ok(m.log(u, &self.values[a])?.scaled(-1.0 / h)),
                (None, None) => Err(Error::InvalidMesh("isolated node".into())),
            })
            .collect()
    }

    /// Discrete differential by central differences `(log u_+ - log u_-) / 2h`
    /// at an interior node.
    pub fn central_differential(&self, node: usize) -> Result<Vec<Tangent>> {
        let m = &self.manifold;
        let h = self.mesh.spacing();
        let u = &self.values[node];
        (0..self.mesh.dim())
            .map(|axis| {
                let (a, b) = self.interior_neighbors(node, axis)?;
                let fwd = m.log(u, &self.values[b])?;
                let bwd = m.log(u, &self.values[a])?;
                Ok(fwd.plus(&bwd.scaled(-1.0)).scaled(0.5 / h))
            })
            .collect()
    }

    /// Operator norm of the one-sided differential at `node`.
    pub fn differential_norm(&self, node: usize) -> Result<f64> {
        Ok(operator_norm(&self.differential(node)?))
    }
}

/// Largest singular value of the linear map sending the `i`-th domain unit
/// vector to `columns[i]`.
pub fn operator_norm(columns: &[Tangent]) -> f64 {
    match columns.len() {
        0 => 0.0,
        1 => columns[0].norm(),
        _ => {
            let a = columns[0].dot(&columns[0]);
            let b = columns[0].dot(&columns[1]);
            let c = columns[1].dot(&columns[1]);
            let lam = 0.5 * (a + c + ((a - c) * (a - c) + 4.0 * b * b).sqrt());
            lam.max(0.0).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub field: MapField,
    pub time: f64,
}

/// Discrete tension field at an interior (or periodic) node.
pub fn tension(field: &MapField, node: usize) -> Result<Tangent> {
    let m = field.manifold();
    let mesh = field.mesh();
    let h2 = mesh.spacing() * mesh.spacing();
    let u = field.value(node).coords();
    let n = u.len();
    let mut lap: Coords = SmallVec::from_elem(0.0, n);
    let mut grads: SmallVec<[Coords; 2]> = SmallVec::new();
    for axis in 0..mesh.dim() {
        let (a, b) = field.interior_neighbors(node, axis)?;
        let (ua, ub) = (field.value(a).coords(), field.value(b).coords());
        for k in 0..n {
            lap[k] += (ua[k] + ub[k] - 2.0 * u[k]) / h2;
        }
        if let ModelManifold::PoincareDisk = m {
            let inv = 0.5 / mesh.spacing();
            grads.push((0..n).map(|k| (ub[k] - ua[k]) * inv).collect());
        }
    }
    let p = field.value(node);
    match m {
        ModelManifold::Flat { .. } => Ok(m.project_to_tangent(p, &lap)),
        // The normal term |∇u|^2 u is removed by the projection.
        ModelManifold::Sphere2 => Ok(m.project_to_tangent(p, &lap)),
        ModelManifold::PoincareDisk => {
            let gamma = m.christoffel(p)?;
            let mut tau = lap;
            for g in &grads {
                for (alpha, t) in tau.iter_mut().enumerate() {
                    for beta in 0..n {
                        for c in 0..n {
                            *t += gamma.get(alpha, beta, c) * g[beta] * g[c];
                        }
                    }
                }
            }
            let lambda = m.conformal_factor(p);
            let frame: Coords = tau.iter().map(|t| t * lambda).collect();
            Ok(m.project_to_tangent(p, &frame))
        }
    }
}

/// `safety * h^2 / (2m)`.
pub fn cfl_dt(mesh: &DomainMesh, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::UnstableTimeStep {
            dt: safety,
            limit: 1.0,
        });
    }
    let h = mesh.spacing();
    Ok(safety * h * h / (2.0 * mesh.dim() as f64))
}

/// One explicit step. `boundary_data` lists the values at the new time for
/// the nodes of `mesh.boundary_nodes()`, in that order.
pub fn step(state: &FlowState, dt: f64, boundary_data: &[Point]) -> Result<FlowState> {
    let field = &state.field;
    let mesh = field.mesh();
    let m = field.manifold();
    let limit = cfl_dt(mesh, 1.0)?;
    if !(dt >= 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::UnstableTimeStep { dt, limit });
    }
    let boundary = mesh.boundary_nodes();
    if boundary.len() != boundary_data.len() {
        return Err(Error::DimensionMismatch {
            expected: boundary.len(),
            got: boundary_data.len(),
        });
    }
    let mut values = field.values.clone();
    for (node, value) in values.iter_mut().enumerate() {
        if mesh.is_boundary(node) {
            continue;
        }
        let abort = |e: Error| Error::FlowAborted {
            time: state.time,
            node,
            reason: e.to_string(),
        };
        let tau = tension(field, node).map_err(abort)?;
        *value = m.exp(field.value(node), &tau.scaled(dt)).map_err(abort)?;
    }
    for (&node, p) in boundary.iter().zip(boundary_data) {
        values[node] = m.point(p.coords())?;
    }
    Ok(FlowState {
        field: MapField {
            mesh: mesh.clone(),
            manifold: *m,
            values,
        },
        time: state.time + dt,
    })
}

/// Dirichlet boundary values as a function of time.
pub trait BoundaryTrajectory {
    /// Values at the boundary nodes of `mesh`, in `mesh.boundary_nodes()`
    /// order.
    fn values(&self, t: f64, mesh: &DomainMesh) -> Result<Vec<Point>>;
}

impl<F> BoundaryTrajectory for F
where
    F: Fn(f64, &DomainMesh) -> Result<Vec<Point>>,
{
    fn values(&self, t: f64, mesh: &DomainMesh) -> Result<Vec<Point>> {
        self(t, mesh)
    }
}

/// Boundary held at fixed values for all times.
#[derive(Debug, Clone)]
pub struct HoldBoundary {
    values: Vec<Point>,
}

impl HoldBoundary {
    pub fn from_field(field: &MapField) -> Self {
        HoldBoundary {
            values: field
                .mesh()
                .boundary_nodes()
                .into_iter()
                .map(|n| field.value(n).clone())
                .collect(),
        }
    }
}

impl BoundaryTrajectory for HoldBoundary {
    fn values(&self, _t: f64, _mesh: &DomainMesh) -> Result<Vec<Point>> {
        Ok(self.values.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimePolicy {
    /// Fraction of the stability bound used for `dt`.
    pub safety: f64,
    /// Keep every `save_every`-th state (the first and last are always kept).
    pub save_every: usize,
}

impl Default for TimePolicy {
    fn default() -> Self {
        TimePolicy {
            safety: DEFAULT_SAFETY,
            save_every: 1,
        }
    }
}

/// Saved states of a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<FlowState>,
    /// Largest operator norm of the discrete differential seen at any time
    /// level and node.
    pub d0: f64,
    pub dt: f64,
    pub steps: usize,
    /// Set when the observer stopped the run before the end of the window.
    pub stopped_early: bool,
}

/// Time step and number of steps covering `[a, b]` without exceeding the
/// policy bound.
pub fn plan_steps(mesh: &DomainMesh, window: (f64, f64), safety: f64) -> Result<(f64, usize)> {
    let (a, b) = window;
    if !(a.is_finite() && b.is_finite() && b >= a) {
        return Err(Error::Degenerate(format!("invalid time window [{a}, {b}]")));
    }
    let bound = cfl_dt(mesh, safety)?;
    if b == a {
        return Ok((bound, 0));
    }
    let steps = ((b - a) / bound * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok(((b - a) / steps as f64, steps))
}

fn field_d0(field: &MapField) -> Result<f64> {
    let mut d0: f64 = 0.0;
    for node in 0..field.mesh().len() {
        d0 = d0.max(field.differential_norm(node)?);
    }
    Ok(d0)
}

pub fn run(
    initial: &MapField,
    window: (f64, f64),
    boundary: &dyn BoundaryTrajectory,
    policy: TimePolicy,
) -> Result<Trajectory> {
    run_observed(initial, window, boundary, policy, &mut |_| ControlFlow::Continue(()))
}

/// Runs the flow over `window`, calling `observer` on every time level
/// (including the initial one). Boundary data overrides the initial map on
/// boundary nodes at `t = a`.
pub fn run_observed(
    initial: &MapField,
    window: (f64, f64),
    boundary: &dyn BoundaryTrajectory,
    policy: TimePolicy,
    observer: &mut dyn FnMut(&FlowState) -> ControlFlow<()>,
) -> Result<Trajectory> {
    let save_every = policy.save_every.max(1);
    let mesh = initial.mesh().clone();
    let (dt, steps) = plan_steps(&mesh, window, policy.safety)?;
    let (a, b) = window;
    let has_boundary = !mesh.boundary_nodes().is_empty();
    let mut field = initial.clone();
    if has_boundary {
        let data = boundary.values(a, &mesh)?;
        let nodes = mesh.boundary_nodes();
        if data.len() != nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: nodes.len(),
                got: data.len(),
            });
        }
        for (&n, p) in nodes.iter().zip(data) {
            field.values[n] = initial.manifold().point(p.coords())?;
        }
    }
    let mut state = FlowState { field, time: a };
    let mut d0 = field_d0(&state.field)?;
    let mut states = vec![state.clone()];
    let mut stopped_early = observer(&state).is_break();
    let mut taken = 0;
    while !stopped_early && taken < steps {
        let t_next = if taken + 1 == steps {
            b
        } else {
            a + (taken + 1) as f64 * dt
        };
        let data = if has_boundary {
            boundary.values(t_next, &mesh)?
        } else {
            Vec::new()
        };
        let mut next = step(&state, dt, &data)?;
        next.time = t_next;
        state = next;
        taken += 1;
        d0 = d0.max(field_d0(&state.field)?);
        stopped_early = observer(&state).is_break();
        if taken % save_every == 0 || taken == steps || stopped_early {
            states.push(state.clone());
        }
    }
    Ok(Trajectory {
        states,
        d0,
        dt,
        steps: taken,
        stopped_early,
    })
}

/// `½ Σ |∂_i u|^2 h^m` with one-sided differences over every mesh edge.
pub fn dirichlet_energy(field: &MapField) -> Result<f64> {
    let mesh = field.mesh();
    let m = field.manifold();
    let h = mesh.spacing();
    let vol = h.powi(mesh.dim() as i32);
    let mut acc = 0.0;
    for node in 0..mesh.len() {
        for axis in 0..mesh.dim() {
            if let (_, Some(b)) = mesh.neighbors(node, axis) {
                let d = m.dist(field.value(node), field.value(b)) / h;
                acc += d * d;
            }
        }
    }
    Ok(0.5 * acc * vol)
}
