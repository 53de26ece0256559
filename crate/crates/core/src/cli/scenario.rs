//! Scenario files: a versioned TOML schema bundling the target, the convex
//! body, the domain mesh, initial and boundary data, the time window and the
//! check tolerances.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::convex::{Constraint, ConvexBody};
use crate::error::{Error, Result};
use crate::flow::{BoundaryTrajectory, DomainMesh, MapField, MeshKind, TimePolicy, DEFAULT_SAFETY};
use crate::manifold::{ModelManifold, Point};

pub const SCHEMA_VERSION: u32 = 1;

fn scenario_error(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Scenario {
        location: location.into(),
        message: message.into(),
    }
}

fn at(location: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        e @ Error::Scenario { .. } => e,
        other => scenario_error(location, other.to_string()),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema: u32,
    name: String,
    #[serde(default)]
    seed: u64,
    target: RawTarget,
    body: RawBody,
    mesh: RawMesh,
    initial: InitialFamily,
    boundary: Option<RawBoundary>,
    time: RawTime,
    #[serde(default)]
    tolerances: Tolerances,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    manifold: String,
    dim: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBall {
    center: Vec<f64>,
    radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHalfSpace {
    normal: Vec<f64>,
    offset: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBody {
    epsilon: f64,
    #[serde(default)]
    balls: Vec<RawBall>,
    #[serde(default)]
    half_spaces: Vec<RawHalfSpace>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    kind: String,
    cells: usize,
}

/// Named families of initial maps. Points are target coordinates; tangent
/// parameters are components in the target's tangent space.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialFamily {
    Constant {
        point: Vec<f64>,
    },
    /// The minimal geodesic from `from` to `to`, reparameterised by
    /// `s = x + warp * sin(pi x) [* sin(pi y)]`.
    GeodesicArc {
        from: Vec<f64>,
        to: Vec<f64>,
        #[serde(default)]
        warp: f64,
    },
    /// The geodesic from `from` to `to`, pushed sideways by
    /// `amplitude * sin(pi x) [* sin(pi y)]`. Two-dimensional targets only.
    GreatCircleWander {
        from: Vec<f64>,
        to: Vec<f64>,
        amplitude: f64,
    },
    /// `exp_center(sum_k a_k sin(k pi x) [* sin(pi y)] direction)`.
    FourierPerturbed {
        center: Vec<f64>,
        direction: Vec<f64>,
        amplitudes: Vec<f64>,
    },
    /// `exp_center(r(x) (cos θ(x) e_1 + sin θ(x) e_2))` with
    /// `r = radius[0] + radius[1] sin(pi x)` and `θ = angle[0] + angle[1] x`,
    /// `e_1, e_2` the standard tangent basis at `center`.
    PolarCurve {
        center: Vec<f64>,
        radius: [f64; 2],
        angle: [f64; 2],
    },
    /// Independent uniform samples of the body at every node.
    RandomInBody,
}

#[derive(Debug, Clone, Deserialize)]
struct RawBoundary {
    #[serde(flatten)]
    family: BoundaryFamily,
    #[serde(default)]
    pins: Vec<RawPin>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum BoundaryFamily {
    HoldInitial,
    Constant {
        point: Vec<f64>,
    },
    /// Initial boundary values oscillating along the first tangent basis
    /// vector: `exp_p(amplitude sin(2 pi frequency t) e_1)`.
    GreatCircleWander {
        amplitude: f64,
        frequency: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPin {
    node: usize,
    point: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    start: f64,
    end: f64,
    #[serde(default = "default_safety")]
    safety: f64,
    #[serde(default = "default_save_every")]
    save_every: usize,
}

fn default_safety() -> f64 {
    DEFAULT_SAFETY
}

fn default_save_every() -> usize {
    1
}

/// Check parameters. `containment` defaults to `10 (h^2 + dt)` and is also
/// the band below which the maximum-principle check treats values as zero.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub containment: Option<f64>,
    #[serde(default = "default_c0_samples")]
    pub c0_samples: usize,
    #[serde(default = "default_convexity_trials")]
    pub convexity_trials: usize,
}

fn default_c0_samples() -> usize {
    16
}

fn default_convexity_trials() -> usize {
    200
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            containment: None,
            c0_samples: default_c0_samples(),
            convexity_trials: default_convexity_trials(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Accept bodies violating the convexity-radius or tube-width limits.
    pub override_convexity_check: bool,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub manifold: ModelManifold,
    pub body: ConvexBody,
    pub mesh: DomainMesh,
    pub initial: InitialFamily,
    pub boundary: Option<BoundaryFamily>,
    pub pins: Vec<(usize, Point)>,
    pub window: (f64, f64),
    pub policy: TimePolicy,
    pub tolerances: Tolerances,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

fn parse_manifold(raw: &RawTarget) -> Result<ModelManifold> {
    match (raw.manifold.as_str(), raw.dim) {
        ("flat", Some(d)) => ModelManifold::flat(d).map_err(at("target.dim")),
        ("flat", None) => Err(scenario_error("target.dim", "flat targets need a dimension")),
        ("sphere2", None | Some(2)) => Ok(ModelManifold::Sphere2),
        ("poincare", None | Some(2)) => Ok(ModelManifold::PoincareDisk),
        ("sphere2" | "poincare", Some(d)) => Err(scenario_error(
            "target.dim",
            format!("{} is 2-dimensional, got dim = {d}", raw.manifold),
        )),
        (other, _) => Err(scenario_error(
            "target.manifold",
            format!("unknown manifold `{other}` (expected flat, sphere2 or poincare)"),
        )),
    }
}

fn parse_point(m: &ModelManifold, coords: &[f64], location: &str) -> Result<Point> {
    match m {
        ModelManifold::Sphere2 => m.point_normalized(coords),
        _ => m.point(coords),
    }
    .map_err(at(location))
}

fn parse_mesh(raw: &RawMesh) -> Result<DomainMesh> {
    let kind = match raw.kind.as_str() {
        "interval" => MeshKind::Interval,
        "circle" => MeshKind::Circle,
        "square" => MeshKind::Square,
        "flat-torus" => MeshKind::FlatTorus,
        other => {
            return Err(scenario_error(
                "mesh.kind",
                format!("unknown mesh kind `{other}` (expected interval, circle, square or flat-torus)"),
            ))
        }
    };
    DomainMesh::new(kind, raw.cells).map_err(at("mesh.cells"))
}

fn parse_body(m: ModelManifold, raw: &RawBody, options: ParseOptions) -> Result<ConvexBody> {
    let mut constraints = Vec::new();
    for (i, b) in raw.balls.iter().enumerate() {
        let loc = format!("body.balls[{i}]");
        let center = parse_point(&m, &b.center, &format!("{loc}.center"))?;
        if !(b.radius > 0.0) {
            return Err(scenario_error(format!("{loc}.radius"), "radius must be positive"));
        }
        constraints.push(Constraint::ball(center, b.radius));
    }
    for (i, h) in raw.half_spaces.iter().enumerate() {
        let loc = format!("body.half_spaces[{i}]");
        if !matches!(m, ModelManifold::Flat { .. }) {
            return Err(scenario_error(loc, "half-spaces are only available on flat targets"));
        }
        if h.normal.len() != m.dim() {
            return Err(scenario_error(
                format!("{loc}.normal"),
                format!("expected {} components, got {}", m.dim(), h.normal.len()),
            ));
        }
        constraints.push(Constraint::half_space(&h.normal, h.offset).map_err(at(&loc))?);
    }
    if constraints.is_empty() {
        return Err(scenario_error("body", "the body needs at least one ball or half-space"));
    }
    let body = if options.override_convexity_check {
        ConvexBody::new_unchecked_convexity(m, constraints, raw.epsilon)
    } else {
        ConvexBody::new(m, constraints, raw.epsilon)
    };
    body.map_err(at("body"))
}

fn check_initial(m: &ModelManifold, family: &InitialFamily) -> Result<()> {
    let pt = |c: &[f64], loc: &str| parse_point(m, c, loc).map(|_| ());
    match family {
        InitialFamily::Constant { point } => pt(point, "initial.point"),
        InitialFamily::GeodesicArc { from, to, .. } => {
            pt(from, "initial.from")?;
            pt(to, "initial.to")
        }
        InitialFamily::GreatCircleWander { from, to, .. } => {
            if m.dim() != 2 {
                return Err(scenario_error(
                    "initial.family",
                    "great-circle-wander needs a 2-dimensional target",
                ));
            }
            pt(from, "initial.from")?;
            pt(to, "initial.to")
        }
        InitialFamily::FourierPerturbed {
            center, direction, ..
        } => {
            pt(center, "initial.center")?;
            if direction.len() != m.ambient_dim() {
                return Err(scenario_error(
                    "initial.direction",
                    format!("expected {} components, got {}", m.ambient_dim(), direction.len()),
                ));
            }
            Ok(())
        }
        InitialFamily::PolarCurve { center, .. } => {
            if m.dim() != 2 {
                return Err(scenario_error("initial.family", "polar-curve needs a 2-dimensional target"));
            }
            pt(center, "initial.center")
        }
        InitialFamily::RandomInBody => Ok(()),
    }
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str, options: ParseOptions) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| {
        let location = match e.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                format!("line {line}, column {col}")
            }
            None => "document".to_string(),
        };
        scenario_error(location, e.message().trim().to_string())
    })?;
    if raw.schema != SCHEMA_VERSION {
        return Err(scenario_error(
            "schema",
            format!("unsupported schema version {} (expected {SCHEMA_VERSION})", raw.schema),
        ));
    }
    let manifold = parse_manifold(&raw.target)?;
    let body = parse_body(manifold, &raw.body, options)?;
    let mesh = parse_mesh(&raw.mesh)?;
    check_initial(&manifold, &raw.initial)?;
    let has_boundary = !mesh.boundary_nodes().is_empty();
    let (boundary, pins) = match (&raw.boundary, has_boundary) {
        (None, true) => {
            return Err(scenario_error(
                "boundary",
                format!("a {} mesh has boundary nodes and needs boundary data", mesh.kind().name()),
            ))
        }
        (Some(_), false) => {
            return Err(scenario_error(
                "boundary",
                format!("a {} mesh has no boundary nodes", mesh.kind().name()),
            ))
        }
        (None, false) => (None, Vec::new()),
        (Some(b), true) => {
            if let BoundaryFamily::Constant { point } = &b.family {
                parse_point(&manifold, point, "boundary.point")?;
            }
            let mut pins = Vec::new();
            for (i, pin) in b.pins.iter().enumerate() {
                let loc = format!("boundary.pins[{i}]");
                if pin.node >= mesh.len() || !mesh.is_boundary(pin.node) {
                    return Err(scenario_error(
                        format!("{loc}.node"),
                        format!("node {} is not a boundary node", pin.node),
                    ));
                }
                pins.push((pin.node, parse_point(&manifold, &pin.point, &format!("{loc}.point"))?));
            }
            (Some(b.family.clone()), pins)
        }
    };
    let t = &raw.time;
    if !(t.start.is_finite() && t.end.is_finite() && t.end >= t.start) {
        return Err(scenario_error("time", "need finite start <= end"));
    }
    if !(t.safety > 0.0 && t.safety <= 1.0) {
        return Err(scenario_error("time.safety", "safety must lie in (0, 1]"));
    }
    if t.save_every == 0 {
        return Err(scenario_error("time.save_every", "must be at least 1"));
    }
    if let Some(tol) = raw.tolerances.containment {
        if !(tol >= 0.0) {
            return Err(scenario_error("tolerances.containment", "must be nonnegative"));
        }
    }
    Ok(Scenario {
        name: raw.name,
        seed: raw.seed,
        manifold,
        body,
        mesh,
        initial: raw.initial,
        boundary,
        pins,
        window: (t.start, t.end),
        policy: TimePolicy {
            safety: t.safety,
            save_every: t.save_every,
        },
        tolerances: raw.tolerances,
    })
}

/// `Π_{i>0} sin(pi x_i)`, so that 2-dimensional fields vanish on the edges
/// transverse to the first axis.
fn transverse_bump(x: &[f64]) -> f64 {
    x[1..].iter().map(|y| (PI * y).sin()).product()
}

impl Scenario {
    /// Initial map on the mesh. `random-in-body` draws from the scenario seed.
    pub fn initial_field(&self) -> Result<MapField> {
        let m = self.manifold;
        let mesh = self.mesh.clone();
        let periodic = mesh.kind().is_periodic();
        let mode = |k: f64, x: f64| {
            if periodic {
                (2.0 * PI * k * x).sin()
            } else {
                (PI * k * x).sin()
            }
        };
        match &self.initial {
            InitialFamily::Constant { point } => {
                let p = parse_point(&m, point, "initial.point")?;
                MapField::constant(mesh, m, &p)
            }
            InitialFamily::GeodesicArc { from, to, warp } => {
                let p = parse_point(&m, from, "initial.from")?;
                let q = parse_point(&m, to, "initial.to")?;
                MapField::from_fn(mesh, m, |x| {
                    let s = x[0] + warp * mode(1.0, x[0]) * transverse_bump(x);
                    m.geodesic_point(&p, &q, s)
                })
            }
            InitialFamily::GreatCircleWander {
                from,
                to,
                amplitude,
            } => {
                let p = parse_point(&m, from, "initial.from")?;
                let q = parse_point(&m, to, "initial.to")?;
                if m.dist(&p, &q) == 0.0 {
                    return Err(scenario_error("initial.to", "endpoints coincide"));
                }
                MapField::from_fn(mesh, m, |x| {
                    let base = m.geodesic_point(&p, &q, x[0])?;
                    let unit = if x[0] < 0.5 {
                        m.log(&base, &q)?.normalized()
                    } else {
                        m.log(&base, &p)?.normalized().map(|u| u.scaled(-1.0))
                    }
                    .expect("distinct endpoints");
                    let side = m.rotate_quarter(&unit)?;
                    m.exp(&base, &side.scaled(amplitude * mode(1.0, x[0]) * transverse_bump(x)))
                })
            }
            InitialFamily::FourierPerturbed {
                center,
                direction,
                amplitudes,
            } => {
                let c = parse_point(&m, center, "initial.center")?;
                let d = m.project_to_tangent(&c, direction);
                MapField::from_fn(mesh, m, |x| {
                    let a: f64 = amplitudes
                        .iter()
                        .enumerate()
                        .map(|(k, ak)| ak * mode((k + 1) as f64, x[0]))
                        .sum::<f64>()
                        * transverse_bump(x);
                    m.exp(&c, &d.scaled(a))
                })
            }
            InitialFamily::PolarCurve {
                center,
                radius,
                angle,
            } => {
                let c = parse_point(&m, center, "initial.center")?;
                let basis = m.tangent_basis(&c);
                MapField::from_fn(mesh, m, |x| {
                    let r = radius[0] + radius[1] * mode(1.0, x[0]) * transverse_bump(x);
                    let th = angle[0] + angle[1] * x[0];
                    let v = basis[0].scaled(r * th.cos()).plus(&basis[1].scaled(r * th.sin()));
                    m.exp(&c, &v)
                })
            }
            InitialFamily::RandomInBody => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let values = (0..mesh.len())
                    .map(|_| self.body.sample_point(&mut rng))
                    .collect::<Result<Vec<_>>>()?;
                MapField::new(mesh, m, values)
            }
        }
    }

    /// Boundary trajectory for the flow, with pins applied.
    pub fn boundary_trajectory(&self, initial: &MapField) -> Result<ScenarioBoundary> {
        let m = self.manifold;
        let nodes = self.mesh.boundary_nodes();
        let base: Vec<Point> = nodes.iter().map(|&n| initial.value(n).clone()).collect();
        let family = self.boundary.clone().unwrap_or(BoundaryFamily::HoldInitial);
        let base = match &family {
            BoundaryFamily::Constant { point } => {
                vec![parse_point(&m, point, "boundary.point")?; nodes.len()]
            }
            _ => base,
        };
        let pins = self
            .pins
            .iter()
            .map(|(node, p)| {
                let slot = nodes.iter().position(|n| n == node).expect("validated pin");
                (slot, p.clone())
            })
            .collect();
        Ok(ScenarioBoundary {
            manifold: m,
            family,
            base,
            pins,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioBoundary {
    manifold: ModelManifold,
    family: BoundaryFamily,
    base: Vec<Point>,
    pins: Vec<(usize, Point)>,
}

impl BoundaryTrajectory for ScenarioBoundary {
    fn values(&self, t: f64, _mesh: &DomainMesh) -> Result<Vec<Point>> {
        let m = &self.manifold;
        let mut out = match self.family {
            BoundaryFamily::HoldInitial | BoundaryFamily::Constant { .. } => self.base.clone(),
            BoundaryFamily::GreatCircleWander {
                amplitude,
                frequency,
            } => {
                let s = amplitude * (2.0 * PI * frequency * t).sin();
                self.base
                    .iter()
                    .map(|p| m.exp(p, &m.tangent_basis(p)[0].scaled(s)))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        for (slot, p) in &self.pins {
            out[*slot] = p.clone();
        }
        Ok(out)
    }
}
