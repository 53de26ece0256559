//! Distance to exponential images of tangent hyperplanes and the curvature
//! of its level sets.
//!
//! For a unit vector `w` at `y` the patch `S = exp_y(w^⊥ ∩ B(0, δ))` is a
//! totally geodesic hypersurface on the model targets. The second
//! fundamental form `II(w, t)` of the level set of `d_S` through
//! `exp_y(t w)` equals the Riemannian Hessian of `d_S` there, restricted to
//! the level set. It is evaluated with central second differences along
//! geodesics and one step of Richardson extrapolation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::convex::{ConvexBody, Hyperplane};
use crate::error::{Error, Result};
use crate::manifold::{dot, ModelManifold, Point, Tangent};

/// Base step of the finite-difference Hessian.
pub const HESSIAN_STEP: f64 = 1e-3;
/// Patch radius used when the focal radius bound is infinite.
pub const UNBOUNDED_PATCH_RADIUS: f64 = 4.0;
/// Safety factor applied to sampled Lipschitz quotients of `μ`.
pub const C0_SAFETY: f64 = 1.25;
/// Number of `t` grid points used per sampled direction in `estimate_c0`.
pub const C0_T_GRID: usize = 17;

const FOOT_MAX_ITERS: usize = 80;

/// `δ_H`: 0.9 R when the focal radius bound R is finite.
pub fn default_patch_radius(m: &ModelManifold) -> f64 {
    let r = m.focal_radius_bound();
    if r.is_finite() {
        0.9 * r
    } else {
        UNBOUNDED_PATCH_RADIUS
    }
}

/// `S_H = exp_q(H ∩ B(0, δ))` together with the normal tube of width
/// `tube` on which `exp` restricted to its normal bundle is a
/// diffeomorphism.
#[derive(Debug, Clone)]
pub struct LevelSetPatch {
    manifold: ModelManifold,
    hyperplane: Hyperplane,
    delta: f64,
    tube: f64,
    /// Unit vector spanning `H` (2-dimensional targets), oriented so that
    /// `orientation * J(along) = normal`.
    along: Option<Tangent>,
    orientation: f64,
}

impl LevelSetPatch {
    pub fn new(
        manifold: ModelManifold,
        hyperplane: Hyperplane,
        delta: f64,
        tube: f64,
    ) -> Result<Self> {
        let r = manifold.focal_radius_bound();
        if !(delta > 0.0) || delta >= r {
            return Err(Error::Degenerate(format!(
                "patch radius {delta} must lie in (0, {r})"
            )));
        }
        if !(tube > 0.0) || tube > r {
            return Err(Error::Degenerate(format!("tube width {tube} must lie in (0, {r}]")));
        }
        let normal = hyperplane
            .normal
            .normalized()
            .ok_or_else(|| Error::Degenerate("zero hyperplane normal".into()))?;
        if (hyperplane.normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Degenerate("hyperplane normal must be a unit vector".into()));
        }
        let (along, orientation) = if manifold.dim() == 2 {
            let e = manifold.rotate_quarter(&normal)?;
            let je = manifold.rotate_quarter(&e)?;
            (Some(e), je.dot(&normal).signum())
        } else {
            (None, 1.0)
        };
        let patch = LevelSetPatch {
            manifold,
            hyperplane: Hyperplane {
                foot: hyperplane.foot,
                normal,
            },
            delta,
            tube,
            along,
            orientation,
        };
        patch.probe_injectivity()?;
        Ok(patch)
    }

    /// Patch through `hyperplane` with `δ_H` from [`default_patch_radius`]
    /// and the full focal tube.
    pub fn with_defaults(manifold: ModelManifold, hyperplane: Hyperplane) -> Result<Self> {
        let tube = manifold.focal_radius_bound();
        Self::new(manifold, hyperplane, default_patch_radius(&manifold), tube)
    }

    pub fn hyperplane(&self) -> &Hyperplane {
        &self.hyperplane
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn tube(&self) -> f64 {
        self.tube
    }

    /// Unsigned distance from `z` to the patch.
    pub fn distance(&self, z: &Point) -> Result<f64> {
        self.signed_distance(z).map(f64::abs)
    }

    /// Distance to the patch, positive on the side the hyperplane normal
    /// points to.
    pub fn signed_distance(&self, z: &Point) -> Result<f64> {
        Ok(self.foot(z)?.1)
    }

    /// Signed distance of `exp_base(v)`. On flat targets this avoids forming
    /// `base + v`, which keeps second differences free of rounding noise.
    pub fn signed_distance_from(&self, base: &Point, v: &Tangent) -> Result<f64> {
        if let ModelManifold::Flat { .. } = self.manifold {
            let q = self.hyperplane.foot.coords();
            let n = self.hyperplane.normal.components();
            let rel: Vec<f64> = base.coords().iter().zip(q).map(|(a, b)| a - b).collect();
            let d = dot(&rel, n) + dot(v.components(), n);
            let mut along_sq = 0.0;
            for k in 0..rel.len() {
                let c = rel[k] + v.components()[k] - d * n[k];
                along_sq += c * c;
            }
            if along_sq.sqrt() >= self.delta {
                return Err(Error::OutOfPatch("foot point beyond the patch radius".into()));
            }
            if d.abs() >= self.tube {
                return Err(Error::OutOfPatch("point beyond the normal tube".into()));
            }
            return Ok(d);
        }
        let z = self.manifold.exp(base, v)?;
        self.signed_distance(&z)
    }

    /// Foot parameter, signed distance and foot point of `z`.
    fn foot(&self, z: &Point) -> Result<(f64, f64, Point)> {
        let m = &self.manifold;
        let q = &self.hyperplane.foot;
        if let ModelManifold::Flat { .. } = m {
            let zero = m.zero_tangent(z);
            let d = self.signed_distance_from(z, &zero)?;
            let n = self.hyperplane.normal.components();
            let foot = Point::from_coords(
                z.coords().iter().zip(n).map(|(a, b)| a - d * b).collect(),
            );
            return Ok((m.dist(q, &foot), d, foot));
        }
        let e = self.along.as_ref().expect("curved targets are 2-dimensional");
        let s0 = m.log(q, z)?.dot(e);
        let s = self.solve_foot(z, s0)?;
        if s.abs() >= self.delta {
            return Err(Error::OutOfPatch(format!(
                "foot parameter {s} beyond the patch radius {}",
                self.delta
            )));
        }
        let x = m.exp(q, &e.scaled(s))?;
        let d = m.dist(z, &x);
        if d >= self.tube {
            return Err(Error::OutOfPatch("point beyond the normal tube".into()));
        }
        let nu = self.normal_at(&x, s)?;
        let side = m.log(&x, z)?.dot(&nu);
        Ok((s, if side < 0.0 { -d } else { d }, x))
    }

    /// Unit velocity at `x = exp_q(s e)` of the patch geodesic, read off a
    /// chord of length `δ/2` pointing back towards `q`.
    fn velocity_at(&self, x: &Point, s: f64) -> Result<Tangent> {
        let e = self.along.as_ref().expect("2-dimensional patch");
        let chord = if s > 0.0 { -0.5 * self.delta } else { 0.5 * self.delta };
        let other = self.manifold.exp(&self.hyperplane.foot, &e.scaled(s + chord))?;
        Ok(self.manifold.log(x, &other)?.scaled(1.0 / chord))
    }

    fn normal_at(&self, x: &Point, s: f64) -> Result<Tangent> {
        let vel = self.velocity_at(x, s)?;
        Ok(self.manifold.rotate_quarter(&vel)?.scaled(self.orientation))
    }

    /// First-order condition `<log_{x(s)} z, x'(s)> = 0` for the foot.
    fn foot_residual(&self, z: &Point, s: f64) -> Result<f64> {
        let m = &self.manifold;
        let e = self.along.as_ref().expect("2-dimensional patch");
        let x = m.exp(&self.hyperplane.foot, &e.scaled(s))?;
        let vel = self.velocity_at(&x, s)?;
        Ok(m.log(&x, z)?.dot(&vel))
    }

    fn solve_foot(&self, z: &Point, guess: f64) -> Result<f64> {
        // Secant iteration from the chart guess; bisection on the patch if it
        // wanders off.
        let limit = self.delta * 1.5;
        let mut s_prev = guess.clamp(-limit, limit);
        let mut g_prev = self.foot_residual(z, s_prev)?;
        let mut s = (s_prev + 1e-4).clamp(-limit, limit);
        if s == s_prev {
            s = s_prev - 1e-4;
        }
        for _ in 0..FOOT_MAX_ITERS {
            let g = self.foot_residual(z, s)?;
            if g == 0.0 {
                return Ok(s);
            }
            let denom = g - g_prev;
            if denom == 0.0 {
                break;
            }
            let next = s - g * (s - s_prev) / denom;
            if !next.is_finite() || next.abs() > limit {
                break;
            }
            s_prev = s;
            g_prev = g;
            s = next;
            if (s - s_prev).abs() <= 1e-15 * (1.0 + s.abs()) {
                return Ok(s);
            }
        }
        self.bisect_foot(z)
    }

    fn bisect_foot(&self, z: &Point) -> Result<f64> {
        let (mut lo, mut hi) = (-self.delta, self.delta);
        let mut g_lo = self.foot_residual(z, lo)?;
        let g_hi = self.foot_residual(z, hi)?;
        if g_lo.signum() == g_hi.signum() {
            return Err(Error::OutOfPatch("no foot point on the patch".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let g = self.foot_residual(z, mid)?;
            if g.signum() == g_lo.signum() {
                lo = mid;
                g_lo = g;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Walks a grid of normal-bundle points `exp_{x(s)}(t ν(s))` and checks
    /// that the foot and distance solver recovers `(s, t)`.
    fn probe_injectivity(&self) -> Result<()> {
        if let ModelManifold::Flat { .. } = self.manifold {
            return Ok(());
        }
        let m = &self.manifold;
        let e = self.along.as_ref().expect("2-dimensional patch");
        let t_max = 0.9 * self.tube.min(2.0);
        for i in -2i32..=2 {
            let s = 0.9 * self.delta * i as f64 / 2.0;
            let x = m.exp(&self.hyperplane.foot, &e.scaled(s))?;
            let nu = self.normal_at(&x, s)?;
            for j in -2i32..=2 {
                let t = t_max * j as f64 / 2.0;
                let z = m.exp(&x, &nu.scaled(t))?;
                let (s_found, d, _) = self.foot(&z)?;
                if (s_found - s).abs() > 1e-7 || (d - t).abs() > 1e-7 {
                    return Err(Error::Degenerate(format!(
                        "exp on the normal bundle of the patch is not injective near (s={s}, t={t})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Free-function form of [`LevelSetPatch::distance`].
pub fn dist_to_patch(patch: &LevelSetPatch, z: &Point) -> Result<f64> {
    patch.distance(z)
}

/// A symmetric bilinear form on the tangent space of a level set, in an
/// orthonormal frame of that tangent space.
#[derive(Debug, Clone)]
pub struct LevelSetForm {
    pub point: Point,
    pub basis: Vec<Tangent>,
    pub matrix: DMatrix<f64>,
}

impl LevelSetForm {
    pub fn min_eigenvalue(&self) -> f64 {
        match self.matrix.nrows() {
            0 => 0.0,
            1 => self.matrix[(0, 0)],
            _ => SymmetricEigen::new(self.matrix.clone())
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// `II(ϖ a, ϖ b)`, with `ϖ` the orthogonal projection onto the level set
    /// tangent space.
    pub fn eval(&self, a: &Tangent, b: &Tangent) -> f64 {
        let ca = DVector::from_iterator(self.basis.len(), self.basis.iter().map(|e| a.dot(e)));
        let cb = DVector::from_iterator(self.basis.len(), self.basis.iter().map(|e| b.dot(e)));
        ca.dot(&(&self.matrix * cb))
    }

    /// `Σ_i II(ϖ a_i, ϖ a_i)`.
    pub fn trace_over(&self, vectors: &[Tangent]) -> f64 {
        vectors.iter().map(|a| self.eval(a, a)).sum()
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).abs().max()
    }
}

fn second_difference(
    patch: &LevelSetPatch,
    x: &Point,
    dir: &Tangent,
    center: f64,
    h: f64,
) -> Result<f64> {
    let plus = patch.signed_distance_from(x, &dir.scaled(h))?;
    let minus = patch.signed_distance_from(x, &dir.scaled(-h))?;
    Ok((plus - 2.0 * center + minus) / (h * h))
}

fn directional_hessian(patch: &LevelSetPatch, x: &Point, dir: &Tangent, center: f64) -> Result<f64> {
    let coarse = second_difference(patch, x, dir, center, HESSIAN_STEP)?;
    let fine = second_difference(patch, x, dir, center, 0.5 * HESSIAN_STEP)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Riemannian Hessian of the signed patch distance at `x`, restricted to
/// the span of `frame` (assumed orthonormal).
pub fn hessian_in_frame(
    patch: &LevelSetPatch,
    x: &Point,
    frame: &[Tangent],
) -> Result<LevelSetForm> {
    let center = patch.signed_distance_from(x, &patch.manifold.zero_tangent(x))?;
    let k = frame.len();
    let mut matrix = DMatrix::zeros(k, k);
    for i in 0..k {
        matrix[(i, i)] = directional_hessian(patch, x, &frame[i], center)?;
    }
    for i in 0..k {
        for j in (i + 1)..k {
            let sum = frame[i].plus(&frame[j]);
            let diff = frame[i].plus(&frame[j].scaled(-1.0));
            let hs = directional_hessian(patch, x, &sum, center)?;
            let hd = directional_hessian(patch, x, &diff, center)?;
            let v = 0.25 * (hs - hd);
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    Ok(LevelSetForm {
        point: x.clone(),
        basis: frame.to_vec(),
        matrix,
    })
}

/// Evaluation point `exp_y(t w)` and the unit gradient of the patch distance
/// there (the velocity of `s -> exp_y(s w)` at `s = t`).
fn offset_point(m: &ModelManifold, w: &Tangent, t: f64) -> Result<(Point, Tangent)> {
    let y = w.base();
    let x = m.exp(y, &w.scaled(t))?;
    let grad = if t == 0.0 {
        w.clone()
    } else {
        m.log(&x, y)?.scaled(-1.0 / t)
    };
    Ok((x, grad))
}

fn check_direction(m: &ModelManifold, w: &Tangent, t: f64) -> Result<()> {
    if (w.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::Degenerate(format!("direction must be unit, |w| = {}", w.norm())));
    }
    let r = m.focal_radius_bound();
    if !(t >= 0.0) || t >= r {
        return Err(Error::Degenerate(format!("offset t = {t} must lie in [0, {r})")));
    }
    Ok(())
}

/// `II(w, t)`: second fundamental form of the level set of the distance to
/// `S_{w^⊥}` through `exp_y(t w)`, `y` the base point of `w`.
pub fn second_fundamental_form(m: &ModelManifold, w: &Tangent, t: f64) -> Result<LevelSetForm> {
    check_direction(m, w, t)?;
    let patch = LevelSetPatch::with_defaults(
        *m,
        Hyperplane {
            foot: w.base().clone(),
            normal: w.clone(),
        },
    )?;
    let (x, grad) = offset_point(m, w, t)?;
    let frame = m.complement_basis(&grad)?;
    hessian_in_frame(&patch, &x, &frame)
}

/// Same as [`second_fundamental_form`] but in a caller-chosen frame of the
/// level set tangent space at `exp_y(t w)`.
pub fn second_fundamental_form_in_frame(
    m: &ModelManifold,
    w: &Tangent,
    t: f64,
    frame: &[Tangent],
) -> Result<LevelSetForm> {
    check_direction(m, w, t)?;
    let patch = LevelSetPatch::with_defaults(
        *m,
        Hyperplane {
            foot: w.base().clone(),
            normal: w.clone(),
        },
    )?;
    let (x, _) = offset_point(m, w, t)?;
    hessian_in_frame(&patch, &x, frame)
}

/// `μ(w, t)`, the minimum eigenvalue of `II(w, t)`.
pub fn mu(m: &ModelManifold, w: &Tangent, t: f64) -> Result<f64> {
    Ok(second_fundamental_form(m, w, t)?.min_eigenvalue())
}

/// Empirical Lipschitz constant of `μ` over directions based in `Y` and
/// offsets `t ∈ [0, ε]`: the largest sampled difference quotient in `t`
/// and across nearby directions, times [`C0_SAFETY`].
pub fn estimate_c0<R: Rng + ?Sized>(body: &ConvexBody, samples: usize, rng: &mut R) -> Result<f64> {
    let m = body.manifold();
    let eps = body.epsilon();
    let ts: Vec<f64> = (0..C0_T_GRID)
        .map(|k| eps * k as f64 / (C0_T_GRID - 1) as f64)
        .collect();
    let tilt = 0.05f64;
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let y = body.sample_point(rng)?;
        let w = m.random_unit_tangent(&y, rng);
        let side = m.complement_basis(&w)?.remove(0);
        let w2 = w.scaled(tilt.cos()).plus(&side.scaled(tilt.sin()));
        let mut prev: Option<(f64, f64)> = None;
        for &t in &ts {
            let a = mu(m, &w, t)?;
            let b = mu(m, &w2, t)?;
            best = best.max((a - b).abs() / tilt);
            if let Some((pt, pa)) = prev {
                best = best.max((a - pa).abs() / (t - pt));
            }
            prev = Some((t, a));
        }
    }
    Ok(C0_SAFETY * best)
}

/// Flow-wide constants `m`, `D0`, `C0` and `C = m D0 C0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConstants {
    pub m: usize,
    pub d0: f64,
    pub c0: f64,
    pub c: f64,
}

impl FlowConstants {
    pub fn new(m: usize, d0: f64, c0: f64) -> Self {
        FlowConstants {
            m,
            d0,
            c0,
            c: m as f64 * d0 * c0,
        }
    }
}

/// `-C d_Y`, the lower bound for `trace II(ϖ u_*, ϖ u_*)`.
pub fn trace_lower_bound(constants: &FlowConstants, d_y: f64) -> f64 {
    -constants.c * d_y
}
