//! Compact locally convex sets `Y` given as finite intersections of strongly
//! convex geodesic balls (and, on flat targets, half-spaces).
//!
//! Provides membership, the distance `d_Y`, the nearest-point projection
//! `π`, tangent cones, supporting hyperplanes and the straight-line
//! deformation retraction onto `Y`.
//!
//! Projection onto an intersection uses Dykstra's cyclic projection scheme on
//! flat targets. On the two curved model surfaces the nearest point is found
//! exactly: it is either the projection onto a single ball that happens to
//! land in `Y`, or a corner where two boundary circles cross.

use rand::Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::manifold::{cross, dot, random_unit_vector, ModelManifold, Point, Tangent};

/// Slack used by membership tests.
pub const CONTAINS_SLACK: f64 = 1e-12;
/// Constraints with value above `-ACTIVITY_TOL` are active in tangent cones.
pub const ACTIVITY_TOL: f64 = 1e-8;
/// Maximum number of Dykstra sweeps.
pub const MAX_SWEEPS: usize = 10_000;
/// Dykstra stops once a sweep moves the iterate by less than this.
pub const SWEEP_TOL: f64 = 1e-14;

const PROBE_PARAMS: usize = 32;
const PROBE_TOL: f64 = 1e-9;
const MAX_REJECTIONS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// Closed geodesic ball `{x : d(x, center) <= radius}`.
    Ball { center: Point, radius: f64 },
    /// Closed half-space `{x : <normal, x> <= offset}` with unit `normal`
    /// (flat targets only).
    HalfSpace { normal: Vec<f64>, offset: f64 },
}

impl Constraint {
    pub fn ball(center: Point, radius: f64) -> Self {
        Constraint::Ball { center, radius }
    }

    /// Half-space `<normal, x> <= offset`; `normal` need not be unit, the
    /// pair is rescaled.
    pub fn half_space(normal: &[f64], offset: f64) -> Result<Self> {
        let n = dot(normal, normal).sqrt();
        if !(n > 0.0) || !n.is_finite() || !offset.is_finite() {
            return Err(Error::InvalidBody("half-space normal must be nonzero".into()));
        }
        Ok(Constraint::HalfSpace {
            normal: normal.iter().map(|x| x / n).collect(),
            offset: offset / n,
        })
    }

    /// Signed constraint value, `<= 0` inside. For balls this is
    /// `d(x, center) - radius`, for half-spaces the signed Euclidean distance
    /// to the bounding plane; both are lower bounds for the distance to the
    /// constraint set.
    pub fn value(&self, m: &ModelManifold, p: &Point) -> f64 {
        match self {
            Constraint::Ball { center, radius } => m.dist(p, center) - radius,
            Constraint::HalfSpace { normal, offset } => dot(normal, p.coords()) - offset,
        }
    }

    fn project(&self, m: &ModelManifold, p: &Point) -> Result<Point> {
        match self {
            Constraint::Ball { center, radius } => {
                let v = m.log(center, p)?;
                let d = v.norm();
                if d <= *radius {
                    return Ok(p.clone());
                }
                m.exp(center, &v.scaled(radius / d))
            }
            Constraint::HalfSpace { normal, offset } => {
                let excess = dot(normal, p.coords()) - offset;
                if excess <= 0.0 {
                    return Ok(p.clone());
                }
                Ok(Point::from_coords(
                    p.coords()
                        .iter()
                        .zip(normal)
                        .map(|(x, n)| x - excess * n)
                        .collect(),
                ))
            }
        }
    }

    /// Outward unit normal (gradient of `value`) at `p`.
    fn outward_normal(&self, m: &ModelManifold, p: &Point) -> Option<Tangent> {
        match self {
            Constraint::Ball { center, .. } => {
                m.log(p, center).ok()?.normalized().map(|t| t.scaled(-1.0))
            }
            Constraint::HalfSpace { normal, .. } => m.tangent(p, normal).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentCone {
    pub apex: Point,
    /// Outward unit normals of the constraints active at the apex; empty at
    /// interior points, where the cone is the whole tangent space.
    pub active_normals: Vec<Tangent>,
}

impl TangentCone {
    pub fn is_full_space(&self) -> bool {
        self.active_normals.is_empty()
    }

    pub fn contains(&self, w: &Tangent) -> bool {
        let slack = 1e-12 * w.norm();
        self.active_normals.iter().all(|g| w.dot(g) <= slack)
    }

    /// Random unit direction in the cone, or `None` if rejection sampling
    /// cannot find one (cone with empty interior).
    pub fn sample_direction<R: Rng + ?Sized>(
        &self,
        m: &ModelManifold,
        rng: &mut R,
    ) -> Option<Tangent> {
        (0..10_000)
            .map(|_| m.random_unit_tangent(&self.apex, rng))
            .find(|w| self.contains(w))
    }
}

/// Supporting hyperplane at the foot `π(y)`; `normal` is the unit velocity
/// with which the minimal geodesic from `y` arrives at the foot, so `y` lies
/// on the negative side and the tangent cone on the non-negative side.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub foot: Point,
    pub normal: Tangent,
}

impl Hyperplane {
    /// Signed position of a direction at the foot relative to the plane.
    pub fn side(&self, w: &Tangent) -> f64 {
        w.dot(&self.normal)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexBody {
    manifold: ModelManifold,
    constraints: Vec<Constraint>,
    epsilon: f64,
    witness: Point,
    convexity_validated: bool,
    bounding_box: Option<(Vec<f64>, Vec<f64>)>,
}

impl ConvexBody {
    /// Validated body: every ball below the convexity radius, a tube width
    /// below the focal radius bound, and a nonempty compact intersection.
    pub fn new(
        manifold: ModelManifold,
        constraints: Vec<Constraint>,
        epsilon: f64,
    ) -> Result<Self> {
        Self::build(manifold, constraints, epsilon, true)
    }

    /// Skips the convexity-radius and tube-width checks. Only meant for
    /// deliberately non-convex control experiments.
    pub fn new_unchecked_convexity(
        manifold: ModelManifold,
        constraints: Vec<Constraint>,
        epsilon: f64,
    ) -> Result<Self> {
        Self::build(manifold, constraints, epsilon, false)
    }

    fn build(
        manifold: ModelManifold,
        constraints: Vec<Constraint>,
        epsilon: f64,
        check_convexity: bool,
    ) -> Result<Self> {
        if constraints.is_empty() {
            return Err(Error::InvalidBody("at least one constraint is required".into()));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidBody(format!("epsilon must be positive, got {epsilon}")));
        }
        let conv = manifold.convexity_radius();
        let mut max_radius: f64 = 0.0;
        for (i, c) in constraints.iter().enumerate() {
            match c {
                Constraint::Ball { center, radius } => {
                    manifold.point(center.coords()).map_err(|e| {
                        Error::InvalidBody(format!("constraint {i}: bad center: {e}"))
                    })?;
                    if !(*radius > 0.0) || !radius.is_finite() {
                        return Err(Error::InvalidBody(format!(
                            "constraint {i}: radius must be positive"
                        )));
                    }
                    if check_convexity && *radius >= conv {
                        return Err(Error::InvalidBody(format!(
                            "constraint {i}: ball radius {radius} is not below the convexity radius {conv}"
                        )));
                    }
                    max_radius = max_radius.max(*radius);
                }
                Constraint::HalfSpace { normal, .. } => {
                    if !matches!(manifold, ModelManifold::Flat { .. }) {
                        return Err(Error::InvalidBody(format!(
                            "constraint {i}: half-spaces are only supported on flat targets"
                        )));
                    }
                    if normal.len() != manifold.dim() {
                        return Err(Error::InvalidBody(format!(
                            "constraint {i}: normal has {} components, expected {}",
                            normal.len(),
                            manifold.dim()
                        )));
                    }
                }
            }
        }
        if check_convexity {
            let r = manifold.focal_radius_bound();
            if epsilon >= r {
                return Err(Error::InvalidBody(format!(
                    "epsilon {epsilon} is not below the focal radius bound {r}"
                )));
            }
            if manifold == ModelManifold::Sphere2 && max_radius + epsilon >= conv {
                return Err(Error::InvalidBody(format!(
                    "largest ball radius plus epsilon ({}) must stay below the convexity radius {conv}",
                    max_radius + epsilon
                )));
            }
        }

        let mut body = ConvexBody {
            manifold,
            constraints,
            epsilon,
            witness: Point::from_slice(&vec![0.0; manifold.ambient_dim()]),
            convexity_validated: check_convexity,
            bounding_box: None,
        };
        if let ModelManifold::Flat { .. } = manifold {
            body.bounding_box = Some(body.flat_bounding_box()?);
        }
        body.witness = body.find_witness()?;
        Ok(body)
    }

    pub fn manifold(&self) -> &ModelManifold {
        &self.manifold
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn witness(&self) -> &Point {
        &self.witness
    }

    pub fn convexity_validated(&self) -> bool {
        self.convexity_validated
    }

    /// Largest constraint value at `p` (`<= 0` iff `p` satisfies all).
    pub fn violation(&self, p: &Point) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.value(&self.manifold, p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.violation(p) <= CONTAINS_SLACK
    }

    /// `d_Y(p)`; only defined on the tube `B(Y, ε)`.
    pub fn distance(&self, p: &Point) -> Result<f64> {
        if self.contains(p) {
            return Ok(0.0);
        }
        let foot = self.project(p)?;
        Ok(self.manifold.dist(p, &foot))
    }

    /// Nearest point of `Y` to `p`, for `p` in the tube `B(Y, ε)`.
    pub fn project(&self, p: &Point) -> Result<Point> {
        if self.contains(p) {
            return Ok(p.clone());
        }
        let lower = self.violation(p);
        if lower >= self.epsilon {
            return Err(Error::OutsideTube { epsilon: self.epsilon });
        }
        let foot = self.nearest_point(p)?;
        if self.manifold.dist(p, &foot) >= self.epsilon {
            return Err(Error::OutsideTube { epsilon: self.epsilon });
        }
        Ok(foot)
    }

    fn nearest_point(&self, p: &Point) -> Result<Point> {
        if self.constraints.len() == 1 {
            return self.constraints[0].project(&self.manifold, p);
        }
        match self.manifold {
            ModelManifold::Flat { .. } => self.dykstra(p),
            _ => self.corner_enumeration(p),
        }
    }

    fn dykstra(&self, p: &Point) -> Result<Point> {
        let m = &self.manifold;
        let n = m.ambient_dim();
        let mut x = p.clone();
        let mut increments = vec![vec![0.0; n]; self.constraints.len()];
        for sweep in 0..MAX_SWEEPS {
            let start = x.clone();
            for (c, inc) in self.constraints.iter().zip(increments.iter_mut()) {
                let y = Point::from_coords(
                    x.coords().iter().zip(inc.iter()).map(|(a, b)| a + b).collect(),
                );
                let next = c.project(m, &y)?;
                for ((d, yc), nc) in inc.iter_mut().zip(y.coords()).zip(next.coords()) {
                    *d = yc - nc;
                }
                x = next;
            }
            let change = m.dist(&start, &x);
            let scale = 1.0 + dot(x.coords(), x.coords()).sqrt();
            if change <= SWEEP_TOL * scale && self.contains(&x) {
                return Ok(x);
            }
            if sweep + 1 == MAX_SWEEPS {
                break;
            }
        }
        Err(Error::SolverFailure { sweeps: MAX_SWEEPS })
    }

    fn corner_enumeration(&self, p: &Point) -> Result<Point> {
        let m = &self.manifold;
        let mut best: Option<(f64, Point)> = None;
        let mut consider = |x: Point| {
            if self.contains(&x) {
                let d = m.dist(p, &x);
                if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                    best = Some((d, x));
                }
            }
        };
        for c in &self.constraints {
            if let Ok(x) = c.project(m, p) {
                consider(x);
            }
        }
        for i in 0..self.constraints.len() {
            for j in (i + 1)..self.constraints.len() {
                for x in circle_crossings(m, &self.constraints[i], &self.constraints[j]) {
                    consider(x);
                }
            }
        }
        best.map(|(_, x)| x).ok_or(Error::SolverFailure { sweeps: 0 })
    }

    pub fn tangent_cone(&self, p: &Point) -> Result<TangentCone> {
        if !self.contains(p) {
            return Err(Error::NotInBody);
        }
        let active_normals = self
            .constraints
            .iter()
            .filter(|c| c.value(&self.manifold, p) >= -ACTIVITY_TOL)
            .filter_map(|c| c.outward_normal(&self.manifold, p))
            .collect();
        Ok(TangentCone {
            apex: p.clone(),
            active_normals,
        })
    }

    pub fn supporting_hyperplane(&self, y: &Point) -> Result<Hyperplane> {
        if self.contains(y) {
            return Err(Error::Degenerate("point lies in the body".into()));
        }
        let foot = self.project(y)?;
        let back = self.manifold.log(&foot, y)?;
        if back.norm() <= ACTIVITY_TOL {
            return Err(Error::Degenerate(
                "point is too close to the body for a well-defined normal".into(),
            ));
        }
        let normal = back.normalized().expect("nonzero").scaled(-1.0);
        Ok(Hyperplane { foot, normal })
    }

    /// `h(y, s) = exp_y(s * log_y(π(y)))`.
    pub fn retract(&self, y: &Point, s: f64) -> Result<Point> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Degenerate(format!("retraction parameter {s} outside [0, 1]")));
        }
        let foot = self.project(y)?;
        if s == 0.0 {
            return Ok(y.clone());
        }
        if s == 1.0 {
            return Ok(foot);
        }
        self.manifold.geodesic_point(y, &foot, s)
    }

    /// Samples `trials` pairs of points of `Y` (half of them on the boundary)
    /// and checks that the minimal geodesic between them stays in `Y`.
    pub fn strong_convexity_probe<R: Rng + ?Sized>(&self, trials: usize, rng: &mut R) -> bool {
        let m = &self.manifold;
        for _ in 0..trials {
            let draw = |rng: &mut R| {
                if rng.random_bool(0.5) {
                    self.sample_boundary_point(rng)
                } else {
                    self.sample_point(rng)
                }
            };
            let (Ok(p), Ok(q)) = (draw(rng), draw(rng)) else {
                return false;
            };
            let Ok(v) = m.log(&p, &q) else {
                return false;
            };
            for k in 1..=PROBE_PARAMS {
                let s = k as f64 / (PROBE_PARAMS + 1) as f64;
                match m.exp(&p, &v.scaled(s)) {
                    Ok(x) if self.violation(&x) <= PROBE_TOL => {}
                    _ => return false,
                }
            }
        }
        true
    }

    /// Random point of `Y` by rejection from a bounding ball or box.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Point> {
        let m = &self.manifold;
        let smallest = self
            .constraints
            .iter()
            .filter_map(|c| match c {
                Constraint::Ball { center, radius } => Some((center, *radius)),
                _ => None,
            })
            .min_by(|a, b| a.1.total_cmp(&b.1));
        for _ in 0..MAX_REJECTIONS {
            let candidate = match (smallest, &self.bounding_box) {
                (Some((c, r)), _) => {
                    let u = m.random_unit_tangent(c, rng);
                    let rho = r * rng.random::<f64>().powf(1.0 / m.dim() as f64);
                    m.exp(c, &u.scaled(rho))?
                }
                (None, Some((lo, hi))) => Point::from_coords(
                    lo.iter()
                        .zip(hi)
                        .map(|(a, b)| a + (b - a) * rng.random::<f64>())
                        .collect(),
                ),
                (None, None) => unreachable!("half-space bodies always carry a bounding box"),
            };
            if self.contains(&candidate) {
                return Ok(candidate);
            }
        }
        Err(Error::Degenerate("rejection sampling of the body failed".into()))
    }

    /// Random point of the boundary of `Y`.
    pub fn sample_boundary_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Point> {
        let m = &self.manifold;
        for _ in 0..MAX_REJECTIONS {
            let k = rng.random_range(0..self.constraints.len());
            let candidate = match &self.constraints[k] {
                Constraint::Ball { center, radius } => {
                    let u = m.random_unit_tangent(center, rng);
                    m.exp(center, &u.scaled(*radius))?
                }
                c @ Constraint::HalfSpace { normal, offset } => {
                    let (lo, hi) = self.bounding_box.as_ref().expect("flat body");
                    let x = Point::from_coords(
                        lo.iter()
                            .zip(hi)
                            .map(|(a, b)| a + (b - a) * rng.random::<f64>())
                            .collect(),
                    );
                    let excess = dot(normal, x.coords()) - offset;
                    let on_plane = Point::from_coords(
                        x.coords().iter().zip(normal).map(|(a, n)| a - excess * n).collect(),
                    );
                    debug_assert!(c.value(m, &on_plane).abs() < 1e-9);
                    on_plane
                }
            };
            if self.contains(&candidate) {
                return Ok(candidate);
            }
        }
        Err(Error::Degenerate("rejection sampling of the boundary failed".into()))
    }

    /// Axis-aligned box containing `Y` on flat targets.
    fn flat_bounding_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.manifold.dim();
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        let mut has_ball = false;
        for c in &self.constraints {
            if let Constraint::Ball { center, radius } = c {
                has_ball = true;
                for k in 0..n {
                    lo[k] = lo[k].max(center.coords()[k] - radius);
                    hi[k] = hi[k].min(center.coords()[k] + radius);
                }
            }
        }
        if has_ball {
            return Ok((lo, hi));
        }
        if !self.recession_cone_is_trivial() {
            return Err(Error::InvalidBody("half-space intersection is unbounded".into()));
        }
        let vertices = self.polytope_vertices();
        if vertices.is_empty() {
            return Err(Error::InvalidBody("half-space intersection is empty".into()));
        }
        let lo = (0..n)
            .map(|k| vertices.iter().map(|v| v[k]).fold(f64::INFINITY, f64::min))
            .collect();
        let hi = (0..n)
            .map(|k| vertices.iter().map(|v| v[k]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        Ok((lo, hi))
    }

    /// The recession cone `{d : <n_i, d> <= 0}` of a half-space intersection
    /// is `{0}` iff projecting random directions onto it always gives zero.
    /// A nontrivial cone contains a ray, which catches a random direction
    /// with probability at least 1/2, so 64 probes suffice.
    fn recession_cone_is_trivial(&self) -> bool {
        let n = self.manifold.dim();
        let cone: Vec<Constraint> = self
            .constraints
            .iter()
            .filter_map(|c| match c {
                Constraint::HalfSpace { normal, .. } => Some(Constraint::HalfSpace {
                    normal: normal.clone(),
                    offset: 0.0,
                }),
                _ => None,
            })
            .collect();
        let cone_body = ConvexBody {
            manifold: self.manifold,
            constraints: cone,
            epsilon: f64::INFINITY,
            witness: Point::from_slice(&vec![0.0; n]),
            convexity_validated: false,
            bounding_box: None,
        };
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0x5eed);
        (0..64).all(|_| {
            let g = Point::from_slice(&random_unit_vector(n, &mut rng));
            match cone_body.dykstra(&g) {
                Ok(x) => dot(x.coords(), x.coords()).sqrt() <= 1e-9,
                Err(_) => false,
            }
        })
    }

    fn polytope_vertices(&self) -> Vec<Vec<f64>> {
        let n = self.manifold.dim();
        let planes: Vec<(&[f64], f64)> = self
            .constraints
            .iter()
            .filter_map(|c| match c {
                Constraint::HalfSpace { normal, offset } => Some((normal.as_slice(), *offset)),
                _ => None,
            })
            .collect();
        let mut out = Vec::new();
        for subset in combinations(planes.len(), n) {
            let a = nalgebra::DMatrix::from_fn(n, n, |r, c| planes[subset[r]].0[c]);
            let b = nalgebra::DVector::from_fn(n, |r, _| planes[subset[r]].1);
            if let Some(x) = a.lu().solve(&b) {
                let x: Vec<f64> = x.iter().copied().collect();
                if x.iter().all(|v| v.is_finite())
                    && planes.iter().all(|(nv, off)| dot(nv, &x) - off <= 1e-9)
                {
                    out.push(x);
                }
            }
        }
        out
    }

    fn find_witness(&self) -> Result<Point> {
        let m = &self.manifold;
        let mut candidates: Vec<Point> = Vec::new();
        for c in &self.constraints {
            if let Constraint::Ball { center, .. } = c {
                candidates.push(center.clone());
            }
        }
        if let Some((lo, hi)) = &self.bounding_box {
            let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
            candidates.push(Point::from_slice(&mid));
        }
        if let Some(w) = candidates.iter().find(|p| self.contains(p)) {
            return Ok(w.clone());
        }
        for start in &candidates {
            let attempt = match m {
                ModelManifold::Flat { .. } => self.dykstra(start),
                _ => self.corner_enumeration(start),
            };
            if let Ok(x) = attempt {
                if self.contains(&x) {
                    return Ok(x);
                }
            }
        }
        Err(Error::InvalidBody("the constraints have empty intersection".into()))
    }
}

/// Crossing points of the boundary circles of two balls on a curved model
/// surface. Empty for non-ball constraints, concentric balls, or circles that
/// do not meet.
fn circle_crossings(m: &ModelManifold, a: &Constraint, b: &Constraint) -> Vec<Point> {
    let (
        Constraint::Ball {
            center: c1,
            radius: r1,
        },
        Constraint::Ball {
            center: c2,
            radius: r2,
        },
    ) = (a, b)
    else {
        return Vec::new();
    };
    match m {
        ModelManifold::Sphere2 => {
            // x = a c1 + b c2 + g (c1 x c2) with x.c_i = cos r_i, |x| = 1.
            let (p, q) = (c1.coords(), c2.coords());
            let k = dot(p, q);
            let det = 1.0 - k * k;
            if det < 1e-14 {
                return Vec::new();
            }
            let (cr1, cr2) = (r1.cos(), r2.cos());
            let ca = (cr1 - k * cr2) / det;
            let cb = (cr2 - k * cr1) / det;
            let base: Vec<f64> = (0..3).map(|i| ca * p[i] + cb * q[i]).collect();
            let g2 = (1.0 - dot(&base, &base)) / det;
            if g2 < 0.0 {
                return Vec::new();
            }
            let nrm = cross(p, q);
            let g = g2.sqrt();
            [g, -g]
                .iter()
                .filter_map(|&s| {
                    let x: Vec<f64> = (0..3).map(|i| base[i] + s * nrm[i]).collect();
                    m.point_normalized(&x).ok()
                })
                .collect()
        }
        ModelManifold::PoincareDisk => {
            // Same construction on the hyperboloid model with the Lorentz
            // product <X, Y> = -X0 Y0 + X1 Y1 + X2 Y2.
            let lift = |x: &[f64]| {
                let s = dot(x, x);
                let d = 1.0 - s;
                [(1.0 + s) / d, 2.0 * x[0] / d, 2.0 * x[1] / d]
            };
            let lorentz = |x: &[f64], y: &[f64]| -x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
            let (p, q) = (lift(c1.coords()), lift(c2.coords()));
            let k = lorentz(&p, &q);
            let det = 1.0 - k * k;
            if det.abs() < 1e-14 {
                return Vec::new();
            }
            let (ch1, ch2) = (r1.cosh(), r2.cosh());
            let ca = (ch1 + k * ch2) / det;
            let cb = (ch2 + k * ch1) / det;
            let base: Vec<f64> = (0..3).map(|i| ca * p[i] + cb * q[i]).collect();
            let c = cross(&p, &q);
            let nrm = [-c[0], c[1], c[2]];
            let nn = lorentz(&nrm, &nrm);
            if nn <= 0.0 {
                return Vec::new();
            }
            let g2 = (-1.0 - lorentz(&base, &base)) / nn;
            if g2 < 0.0 {
                return Vec::new();
            }
            let g = g2.sqrt();
            [g, -g]
                .iter()
                .filter_map(|&s| {
                    let x: Vec<f64> = (0..3).map(|i| base[i] + s * nrm[i]).collect();
                    if x[0] <= 0.0 {
                        return None;
                    }
                    let z: SmallVec<[f64; 3]> =
                        SmallVec::from_slice(&[x[1] / (1.0 + x[0]), x[2] / (1.0 + x[0])]);
                    m.point(&z).ok()
                })
                .collect()
        }
        ModelManifold::Flat { .. } => Vec::new(),
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// The triangle `x >= 0, y >= 0, x + y <= 1` in the flat plane.
pub fn unit_triangle(epsilon: f64) -> Result<ConvexBody> {
    ConvexBody::new(
        ModelManifold::flat(2)?,
        vec![
            Constraint::half_space(&[-1.0, 0.0], 0.0)?,
            Constraint::half_space(&[0.0, -1.0], 0.0)?,
            Constraint::half_space(&[1.0, 1.0], 1.0)?,
        ],
        epsilon,
    )
}
