//! Closed-form Riemannian primitives on the three constant-curvature model
//! targets.
//!
//! * `Flat { dim }`: Euclidean n-space, points are plain coordinate tuples.
//! * `Sphere2`: the unit round 2-sphere embedded in R^3. Tangent vectors are
//!   3-vectors orthogonal to their base point.
//! * `PoincareDisk`: the curvature -1 hyperbolic plane in the Poincaré disk
//!   chart, metric `4 |dx|^2 / (1 - |x|^2)^2`. Tangent vectors are stored in
//!   the orthonormal frame `(1 - |x|^2)/2 * d/dx_i`, so the Euclidean norm of
//!   the stored components is the Riemannian norm.
//!
//! With these conventions the Riemannian inner product of two tangents at the
//! same base point is the Euclidean dot product of their components on every
//! model.

use std::f64::consts::PI;

use rand::Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type Coords = SmallVec<[f64; 3]>;

/// Tolerance on `|p| = 1` for sphere points and on `<v, p> = 0` for sphere
/// tangents.
pub const SPHERE_TOL: f64 = 1e-12;

/// `log` on the sphere refuses pairs further apart than this.
pub const SPHERE_LOG_GUARD: f64 = 0.99 * PI;

const BASE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelManifold {
    Flat { dim: usize },
    Sphere2,
    PoincareDisk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Coords,
}

impl Point {
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub(crate) fn from_coords(coords: Coords) -> Self {
        Point { coords }
    }

    pub(crate) fn from_slice(coords: &[f64]) -> Self {
        Point {
            coords: coords.iter().copied().collect(),
        }
    }

    fn max_abs_diff(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(other.coords.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    base: Point,
    components: Coords,
}

impl Tangent {
    pub(crate) fn from_parts(base: Point, components: Coords) -> Self {
        Tangent { base, components }
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn norm(&self) -> f64 {
        dot(&self.components, &self.components).sqrt()
    }

    /// Riemannian inner product. Both vectors must share a base point; this
    /// is only debug-asserted because the check sits on hot paths.
    pub fn dot(&self, other: &Tangent) -> f64 {
        debug_assert!(self.base.max_abs_diff(&other.base) <= 1e-9);
        dot(&self.components, &other.components)
    }

    pub fn scaled(&self, s: f64) -> Tangent {
        Tangent {
            base: self.base.clone(),
            components: self.components.iter().map(|c| c * s).collect(),
        }
    }

    pub fn plus(&self, other: &Tangent) -> Tangent {
        debug_assert!(self.base.max_abs_diff(&other.base) <= 1e-9);
        Tangent {
            base: self.base.clone(),
            components: self
                .components
                .iter()
                .zip(other.components.iter())
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn normalized(&self) -> Option<Tangent> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self.scaled(1.0 / n))
    }
}

/// Christoffel symbols `Γ^a_{bc}` of a chart, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Γ^upper_{lower1 lower2}`.
    pub fn get(&self, upper: usize, lower1: usize, lower2: usize) -> f64 {
        self.data[(upper * self.dim + lower1) * self.dim + lower2]
    }

    fn zeros(dim: usize) -> Self {
        Christoffel {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    fn set(&mut self, upper: usize, lower1: usize, lower2: usize, v: f64) {
        self.data[(upper * self.dim + lower1) * self.dim + lower2] = v;
    }
}

impl ModelManifold {
    pub fn flat(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPoint("flat space needs dim >= 1".into()));
        }
        Ok(ModelManifold::Flat { dim })
    }

    /// Intrinsic dimension n.
    pub fn dim(&self) -> usize {
        match self {
            ModelManifold::Flat { dim } => *dim,
            ModelManifold::Sphere2 | ModelManifold::PoincareDisk => 2,
        }
    }

    /// Number of stored coordinates per point (and per tangent).
    pub fn ambient_dim(&self) -> usize {
        match self {
            ModelManifold::Flat { dim } => *dim,
            ModelManifold::Sphere2 => 3,
            ModelManifold::PoincareDisk => 2,
        }
    }

    pub fn name(&self) -> String {
        match self {
            ModelManifold::Flat { dim } => format!("flat{dim}"),
            ModelManifold::Sphere2 => "sphere2".into(),
            ModelManifold::PoincareDisk => "poincare".into(),
        }
    }

    pub fn convexity_radius(&self) -> f64 {
        match self {
            ModelManifold::Sphere2 => PI / 2.0,
            _ => f64::INFINITY,
        }
    }

    /// Lower bound R for the focal radius of every point.
    pub fn focal_radius_bound(&self) -> f64 {
        match self {
            ModelManifold::Sphere2 => PI / 2.0,
            _ => f64::INFINITY,
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        match self {
            ModelManifold::Sphere2 => PI,
            _ => f64::INFINITY,
        }
    }

    pub fn point(&self, coords: &[f64]) -> Result<Point> {
        if coords.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint("non-finite coordinate".into()));
        }
        match self {
            ModelManifold::Sphere2 => {
                let n = dot(coords, coords).sqrt();
                if (n - 1.0).abs() > SPHERE_TOL {
                    return Err(Error::InvalidPoint(format!(
                        "sphere point has norm {n}, expected 1"
                    )));
                }
            }
            ModelManifold::PoincareDisk => {
                if dot(coords, coords) >= 1.0 {
                    return Err(Error::InvalidPoint(
                        "Poincaré disk point must have norm < 1".into(),
                    ));
                }
            }
            ModelManifold::Flat { .. } => {}
        }
        Ok(Point::from_slice(coords))
    }

    /// Like [`point`](Self::point) but rescales sphere input to unit length.
    pub fn point_normalized(&self, coords: &[f64]) -> Result<Point> {
        if *self == ModelManifold::Sphere2 && coords.len() == 3 {
            let n = dot(coords, coords).sqrt();
            if n == 0.0 || !n.is_finite() {
                return Err(Error::InvalidPoint("cannot normalize zero vector".into()));
            }
            let c: Coords = coords.iter().map(|x| x / n).collect();
            return self.point(&c);
        }
        self.point(coords)
    }

    pub fn tangent(&self, base: &Point, components: &[f64]) -> Result<Tangent> {
        if components.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: components.len(),
            });
        }
        if components.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidTangent("non-finite component".into()));
        }
        if *self == ModelManifold::Sphere2 {
            let ip = dot(base.coords(), components);
            let scale = 1.0 + dot(components, components).sqrt();
            if ip.abs() > SPHERE_TOL * scale {
                return Err(Error::InvalidTangent(format!(
                    "sphere tangent not orthogonal to base (<v,p> = {ip})"
                )));
            }
        }
        Ok(Tangent::from_parts(
            base.clone(),
            components.iter().copied().collect(),
        ))
    }

    pub fn zero_tangent(&self, base: &Point) -> Tangent {
        Tangent::from_parts(base.clone(), SmallVec::from_elem(0.0, self.ambient_dim()))
    }

    /// Orthogonal projection of an ambient vector onto `T_p`. Identity except
    /// on the sphere.
    pub fn project_to_tangent(&self, p: &Point, raw: &[f64]) -> Tangent {
        match self {
            ModelManifold::Sphere2 => {
                let ip = dot(p.coords(), raw);
                let comps = raw
                    .iter()
                    .zip(p.coords())
                    .map(|(r, pc)| r - ip * pc)
                    .collect();
                Tangent::from_parts(p.clone(), comps)
            }
            _ => Tangent::from_parts(p.clone(), raw.iter().copied().collect()),
        }
    }

    fn check_base(&self, p: &Point, v: &Tangent) -> Result<()> {
        if p.coords.len() != v.base.coords.len() || p.max_abs_diff(&v.base) > BASE_TOL {
            return Err(Error::BaseMismatch);
        }
        Ok(())
    }

    /// Time-one point of the geodesic leaving `p` with velocity `v`.
    pub fn exp(&self, p: &Point, v: &Tangent) -> Result<Point> {
        self.check_base(p, v)?;
        let n = v.norm();
        match self {
            ModelManifold::Flat { .. } => Ok(Point::from_coords(
                p.coords
                    .iter()
                    .zip(v.components.iter())
                    .map(|(a, b)| a + b)
                    .collect(),
            )),
            ModelManifold::Sphere2 => {
                if !(n < PI) {
                    return Err(Error::OutOfRange { norm: n, limit: PI });
                }
                if n == 0.0 {
                    return Ok(p.clone());
                }
                let (s, c) = n.sin_cos();
                let k = s / n;
                let mut out: Coords = p
                    .coords
                    .iter()
                    .zip(v.components.iter())
                    .map(|(pc, vc)| c * pc + k * vc)
                    .collect();
                let norm = dot(&out, &out).sqrt();
                out.iter_mut().for_each(|x| *x /= norm);
                Ok(Point::from_coords(out))
            }
            ModelManifold::PoincareDisk => {
                if !n.is_finite() {
                    return Err(Error::OutOfRange {
                        norm: n,
                        limit: f64::INFINITY,
                    });
                }
                if n == 0.0 {
                    return Ok(p.clone());
                }
                // Move to the origin with a disk automorphism: frame components
                // carry over unchanged, and exp_0 of a frame vector v is
                // tanh(|v|/2) v/|v|.
                let r = (0.5 * n).tanh() / n;
                let w = (r * v.components[0], r * v.components[1]);
                let z = mobius_inv(to_c(p), w);
                if z.0 * z.0 + z.1 * z.1 >= 1.0 {
                    return Err(Error::OutOfRange {
                        norm: n,
                        limit: f64::INFINITY,
                    });
                }
                Ok(Point::from_coords(SmallVec::from_slice(&[z.0, z.1])))
            }
        }
    }

    /// Inverse of `exp` at `p`; the initial velocity of the minimal geodesic
    /// from `p` reaching `q` at time one.
    pub fn log(&self, p: &Point, q: &Point) -> Result<Tangent> {
        if p.coords.len() != q.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: p.coords.len(),
                got: q.coords.len(),
            });
        }
        match self {
            ModelManifold::Flat { .. } => Ok(Tangent::from_parts(
                p.clone(),
                q.coords
                    .iter()
                    .zip(p.coords.iter())
                    .map(|(a, b)| a - b)
                    .collect(),
            )),
            ModelManifold::Sphere2 => {
                let theta = sphere_angle(p.coords(), q.coords());
                if theta > SPHERE_LOG_GUARD {
                    return Err(Error::NonUniqueGeodesic);
                }
                let ip = dot(p.coords(), q.coords());
                let w: Coords = q
                    .coords
                    .iter()
                    .zip(p.coords.iter())
                    .map(|(qc, pc)| qc - ip * pc)
                    .collect();
                let nw = dot(&w, &w).sqrt();
                if nw == 0.0 || theta == 0.0 {
                    return Ok(self.zero_tangent(p));
                }
                let k = theta / nw;
                Ok(self.project_to_tangent(p, &w.iter().map(|x| x * k).collect::<Coords>()))
            }
            ModelManifold::PoincareDisk => {
                let w = mobius(to_c(p), to_c(q));
                let r = (w.0 * w.0 + w.1 * w.1).sqrt();
                if r == 0.0 {
                    return Ok(self.zero_tangent(p));
                }
                let k = 2.0 * r.atanh() / r;
                Ok(Tangent::from_parts(
                    p.clone(),
                    SmallVec::from_slice(&[k * w.0, k * w.1]),
                ))
            }
        }
    }

    pub fn dist(&self, p: &Point, q: &Point) -> f64 {
        match self {
            ModelManifold::Flat { .. } => {
                let d: f64 = p
                    .coords
                    .iter()
                    .zip(q.coords.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d.sqrt()
            }
            ModelManifold::Sphere2 => sphere_angle(p.coords(), q.coords()),
            ModelManifold::PoincareDisk => {
                let w = mobius(to_c(p), to_c(q));
                2.0 * (w.0 * w.0 + w.1 * w.1).sqrt().min(1.0).atanh()
            }
        }
    }

    /// Point at parameter `s` along the minimal geodesic from `p` (s = 0) to
    /// `q` (s = 1).
    pub fn geodesic_point(&self, p: &Point, q: &Point, s: f64) -> Result<Point> {
        let v = self.log(p, q)?;
        self.exp(p, &v.scaled(s))
    }

    /// Christoffel symbols of the global chart at `p`.
    pub fn christoffel(&self, p: &Point) -> Result<Christoffel> {
        match self {
            ModelManifold::Flat { dim } => Ok(Christoffel::zeros(*dim)),
            ModelManifold::Sphere2 => Err(Error::Unsupported(
                "Christoffel symbols of the embedded sphere; use the embedded tension formula",
            )),
            ModelManifold::PoincareDisk => {
                // Conformal metric e^{2φ}δ with φ = ln 2 - ln(1 - |x|^2):
                // Γ^k_ij = δ_ik ∂_jφ + δ_jk ∂_iφ - δ_ij ∂_kφ.
                let x = p.coords();
                let denom = 1.0 - dot(x, x);
                let dphi = [2.0 * x[0] / denom, 2.0 * x[1] / denom];
                let mut g = Christoffel::zeros(2);
                for k in 0..2 {
                    for i in 0..2 {
                        for j in 0..2 {
                            let mut v = 0.0;
                            if i == k {
                                v += dphi[j];
                            }
                            if j == k {
                                v += dphi[i];
                            }
                            if i == j {
                                v -= dphi[k];
                            }
                            g.set(k, i, j, v);
                        }
                    }
                }
                Ok(g)
            }
        }
    }

    /// Ratio between frame components and chart components of a tangent at
    /// `p` (`frame = factor * chart`). Only meaningful for chart targets.
    pub fn conformal_factor(&self, p: &Point) -> f64 {
        match self {
            ModelManifold::PoincareDisk => 2.0 / (1.0 - dot(p.coords(), p.coords())),
            _ => 1.0,
        }
    }

    /// Orthonormal basis of `T_p`.
    pub fn tangent_basis(&self, p: &Point) -> Vec<Tangent> {
        match self {
            ModelManifold::Sphere2 => {
                let c = p.coords();
                let axis = (0..3)
                    .min_by(|&a, &b| c[a].abs().total_cmp(&c[b].abs()))
                    .unwrap_or(0);
                let mut a = [0.0; 3];
                a[axis] = 1.0;
                let e = self
                    .project_to_tangent(p, &a)
                    .normalized()
                    .expect("axis least aligned with p has nonzero tangential part");
                let f = cross(c, e.components());
                vec![e, Tangent::from_parts(p.clone(), SmallVec::from_slice(&f))]
            }
            _ => {
                let n = self.ambient_dim();
                (0..n)
                    .map(|i| {
                        let mut comps = SmallVec::from_elem(0.0, n);
                        comps[i] = 1.0;
                        Tangent::from_parts(p.clone(), comps)
                    })
                    .collect()
            }
        }
    }

    /// Orthonormal basis of the orthogonal complement of `normal` in its
    /// tangent space.
    pub fn complement_basis(&self, normal: &Tangent) -> Result<Vec<Tangent>> {
        let unit = normal
            .normalized()
            .ok_or_else(|| Error::Degenerate("zero normal vector".into()))?;
        if self.dim() == 2 {
            return Ok(vec![self.rotate_quarter(&unit)?]);
        }
        let mut out: Vec<Tangent> = Vec::with_capacity(self.dim() - 1);
        for e in self.tangent_basis(normal.base()) {
            let mut w = e.plus(&unit.scaled(-e.dot(&unit)));
            for b in &out {
                w = w.plus(&b.scaled(-w.dot(b)));
            }
            if let Some(w) = w.normalized().filter(|_| w.norm() > 1e-6) {
                out.push(w);
            }
            if out.len() + 1 == self.dim() {
                break;
            }
        }
        Ok(out)
    }

    /// Rotation by +90 degrees inside an oriented 2-dimensional tangent
    /// plane.
    pub fn rotate_quarter(&self, v: &Tangent) -> Result<Tangent> {
        match self {
            ModelManifold::Sphere2 => {
                let r = cross(v.base().coords(), v.components());
                Ok(Tangent::from_parts(v.base().clone(), SmallVec::from_slice(&r)))
            }
            ModelManifold::PoincareDisk | ModelManifold::Flat { dim: 2 } => {
                let c = v.components();
                Ok(Tangent::from_parts(
                    v.base().clone(),
                    SmallVec::from_slice(&[-c[1], c[0]]),
                ))
            }
            ModelManifold::Flat { .. } => Err(Error::Unsupported(
                "quarter rotation outside two dimensions",
            )),
        }
    }

    /// Uniformly distributed unit tangent at `p`.
    pub fn random_unit_tangent<R: Rng + ?Sized>(&self, p: &Point, rng: &mut R) -> Tangent {
        let basis = self.tangent_basis(p);
        let dir = random_unit_vector(basis.len(), rng);
        let mut acc = self.zero_tangent(p);
        for (b, c) in basis.iter().zip(dir) {
            acc = acc.plus(&b.scaled(c));
        }
        acc
    }
}

/// Uniform direction on the unit sphere of R^dim (rejection from the cube).
pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = dot(&v, &v).sqrt();
        if n > 1e-3 && n <= 1.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn sphere_angle(p: &[f64], q: &[f64]) -> f64 {
    let c = cross(p, q);
    dot(&c, &c).sqrt().atan2(dot(p, q))
}

type Cx = (f64, f64);

fn to_c(p: &Point) -> Cx {
    (p.coords[0], p.coords[1])
}

fn c_mul(a: Cx, b: Cx) -> Cx {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn c_div(a: Cx, b: Cx) -> Cx {
    let d = b.0 * b.0 + b.1 * b.1;
    ((a.0 * b.0 + a.1 * b.1) / d, (a.1 * b.0 - a.0 * b.1) / d)
}

/// Disk automorphism sending `p` to the origin: `(z - p) / (1 - conj(p) z)`.
fn mobius(p: Cx, z: Cx) -> Cx {
    let num = (z.0 - p.0, z.1 - p.1);
    let pz = c_mul((p.0, -p.1), z);
    c_div(num, (1.0 - pz.0, -pz.1))
}

/// Inverse automorphism: `(w + p) / (1 + conj(p) w)`.
fn mobius_inv(p: Cx, w: Cx) -> Cx {
    let num = (w.0 + p.0, w.1 + p.1);
    let pw = c_mul((p.0, -p.1), w);
    c_div(num, (1.0 + pw.0, pw.1))
}
