//! Checks run against flow trajectories: containment of the image, the
//! parabolic identity for the distance to a supporting patch, the touching
//! property of that patch, and a discrete maximum principle.

use std::ops::ControlFlow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::convex::{ConvexBody, Hyperplane};
use crate::error::{Error, Result};
use crate::flow::{DomainMesh, FlowState};
use crate::level_geometry::{second_fundamental_form, FlowConstants, LevelSetPatch};

/// Slack allowed in the touching test.
pub const TOUCHING_TOL: f64 = 1e-8;
/// Number of probe points in the touching test.
pub const TOUCHING_SAMPLES: usize = 100;

/// `10 (h^2 + dt)`.
pub fn default_tolerance(h: f64, dt: f64) -> f64 {
    10.0 * (h * h + dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Contained,
    Violated,
    TubeExited,
    /// Initial or boundary values were not in `Y`.
    HypothesisViolated,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Contained => "CONTAINED",
            Verdict::Violated => "VIOLATED",
            Verdict::TubeExited => "TUBE_EXITED",
            Verdict::HypothesisViolated => "HYPOTHESIS_VIOLATED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub time: f64,
    pub node: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainmentReport {
    pub times: Vec<f64>,
    pub sigma_max_series: Vec<f64>,
    /// First interior value above tolerance.
    pub first_violation: Option<Violation>,
    /// First initial or boundary value above tolerance.
    pub hypothesis_failure: Option<Violation>,
    /// Time and node at which some value left the tube.
    pub tube_exit: Option<(f64, usize)>,
    pub tolerance: f64,
    pub constants: Option<FlowConstants>,
    pub verdict: Verdict,
}

impl ContainmentReport {
    pub fn sigma_max(&self) -> f64 {
        self.sigma_max_series.iter().copied().fold(0.0, f64::max)
    }
}

/// Incremental form of [`sigma_trace`], usable as a flow observer. It asks
/// the flow to stop once a value leaves the tube.
#[derive(Debug, Clone)]
pub struct SigmaMonitor<'a> {
    body: &'a ConvexBody,
    tolerance: f64,
    report: ContainmentReport,
}

impl<'a> SigmaMonitor<'a> {
    pub fn new(body: &'a ConvexBody, tolerance: f64) -> Self {
        SigmaMonitor {
            body,
            tolerance,
            report: ContainmentReport {
                times: Vec::new(),
                sigma_max_series: Vec::new(),
                first_violation: None,
                hypothesis_failure: None,
                tube_exit: None,
                tolerance,
                constants: None,
                verdict: Verdict::Contained,
            },
        }
    }

    pub fn observe(&mut self, state: &FlowState) -> ControlFlow<()> {
        if self.report.tube_exit.is_some() {
            return ControlFlow::Break(());
        }
        let mesh = state.field.mesh();
        let initial = self.report.times.is_empty();
        let mut sigma_max: f64 = 0.0;
        for (node, p) in state.field.values().iter().enumerate() {
            let sigma = match self.body.distance(p) {
                Ok(s) => s,
                Err(_) => {
                    self.report.tube_exit = Some((state.time, node));
                    return ControlFlow::Break(());
                }
            };
            sigma_max = sigma_max.max(sigma);
            if sigma > self.tolerance {
                let v = Violation {
                    time: state.time,
                    node,
                    sigma,
                };
                if initial || mesh.is_boundary(node) {
                    self.report.hypothesis_failure.get_or_insert(v);
                } else {
                    self.report.first_violation.get_or_insert(v);
                }
            }
        }
        self.report.times.push(state.time);
        self.report.sigma_max_series.push(sigma_max);
        ControlFlow::Continue(())
    }

    pub fn finish(mut self) -> ContainmentReport {
        let r = &mut self.report;
        r.verdict = if r.tube_exit.is_some() {
            Verdict::TubeExited
        } else if r.hypothesis_failure.is_some() {
            Verdict::HypothesisViolated
        } else if r.first_violation.is_some() {
            Verdict::Violated
        } else {
            Verdict::Contained
        };
        self.report
    }
}

/// `σ = d_Y ∘ u` over the saved states of a trajectory.
pub fn sigma_trace(states: &[FlowState], body: &ConvexBody, tolerance: f64) -> ContainmentReport {
    let mut monitor = SigmaMonitor::new(body, tolerance);
    for s in states {
        if monitor.observe(s).is_break() {
            break;
        }
    }
    monitor.finish()
}

/// Terms of the parabolic identity `Δρ = ∂_t ρ + trace II(ϖ u_*, ϖ u_*)` at
/// one exterior node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolicTerms {
    pub d_y: f64,
    pub laplacian: f64,
    pub time_derivative: f64,
    pub trace: f64,
    pub residual: f64,
}

fn exterior_patch(body: &ConvexBody, state: &FlowState, node: usize) -> Result<(f64, Hyperplane, LevelSetPatch)> {
    let m = *body.manifold();
    let y = state.field.value(node);
    let d = body.distance(y)?;
    if d <= 0.0 {
        return Err(Error::Degenerate(format!("node {node} is not outside the body")));
    }
    let support = body.supporting_hyperplane(y)?;
    // Patch normal pointing towards y, so the signed distance is d_Y at y.
    let toward = Hyperplane {
        foot: support.foot.clone(),
        normal: support.normal.scaled(-1.0),
    };
    let patch = LevelSetPatch::with_defaults(m, toward.clone())?;
    Ok((d, toward, patch))
}

/// Evaluates the identity with `ρ` the signed distance to `S_{H_y}`,
/// `y = u(node)` in the current state: `Δ_h ρ` on the current stencil,
/// `∂_t ρ` by a backward difference against `prev`, and the trace over
/// central differences of `u`.
pub fn lemma2_residual(
    prev: &FlowState,
    current: &FlowState,
    body: &ConvexBody,
    node: usize,
) -> Result<ParabolicTerms> {
    let field = &current.field;
    let mesh = field.mesh();
    if mesh.is_boundary(node) {
        return Err(Error::Degenerate(format!("node {node} is a boundary node")));
    }
    let dt = current.time - prev.time;
    if !(dt > 0.0) {
        return Err(Error::Degenerate("states must be strictly increasing in time".into()));
    }
    let (d, plane, patch) = exterior_patch(body, current, node)?;
    let rho = |p| patch.signed_distance(p);
    let center = rho(field.value(node))?;
    let h2 = mesh.spacing() * mesh.spacing();
    let mut laplacian = 0.0;
    for axis in 0..mesh.dim() {
        let (a, b) = mesh.neighbors(node, axis);
        let (a, b) = a.zip(b).ok_or_else(|| Error::Degenerate("missing neighbour".into()))?;
        laplacian += (rho(field.value(a))? + rho(field.value(b))? - 2.0 * center) / h2;
    }
    let time_derivative = (center - rho(prev.field.value(node))?) / dt;
    let m = body.manifold();
    let form = second_fundamental_form(m, &plane.normal, d)?;
    let trace = form.trace_over(&field.central_differential(node)?);
    Ok(ParabolicTerms {
        d_y: d,
        laplacian,
        time_derivative,
        trace,
        residual: (laplacian - time_derivative - trace).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TouchingOutcome {
    /// `|ρ(y) - d_Y(y)|`.
    pub equality_gap: f64,
    /// Smallest `d_Y(z) - ρ(z)` over the probes.
    pub worst_slack: f64,
}

impl TouchingOutcome {
    pub fn passed(&self) -> bool {
        self.equality_gap <= TOUCHING_TOL && self.worst_slack >= -TOUCHING_TOL
    }
}

/// Checks that the signed distance to `S_{H_y}` touches `d_Y` from below at
/// `y = u(node)`, probing [`TOUCHING_SAMPLES`] points within `probe_radius`.
pub fn touching_test(
    state: &FlowState,
    body: &ConvexBody,
    node: usize,
    probe_radius: f64,
    seed: u64,
) -> Result<TouchingOutcome> {
    let m = body.manifold();
    let y = state.field.value(node);
    let (d, _, patch) = exterior_patch(body, state, node)?;
    let equality_gap = (patch.signed_distance(y)? - d).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_slack = f64::INFINITY;
    for _ in 0..TOUCHING_SAMPLES {
        let r = probe_radius * rand::Rng::random::<f64>(&mut rng);
        let dir = m.random_unit_tangent(y, &mut rng);
        let z = m.exp(y, &dir.scaled(r))?;
        worst_slack = worst_slack.min(body.distance(&z)? - patch.signed_distance(&z)?);
    }
    Ok(TouchingOutcome {
        equality_gap,
        worst_slack,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub time_index: usize,
    pub time: f64,
    pub node: usize,
    pub value: f64,
    /// Discrete `∂_t f - Δ_h f - C f` where it was evaluated.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Classification {
    HypothesisAndConclusionHold,
    HypothesisViolated(Witness),
    Counterexample(Witness),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxPrincipleVerdict {
    pub classification: Classification,
    /// `max e^{-(C+1)t} f`.
    pub h_transform_max: f64,
    /// Grid points with `0 < f <= tolerance`, where the inequality is not
    /// evaluated.
    pub skipped_band: usize,
}

/// Discrete check of: `f <= 0` on the parabolic boundary and
/// `∂_t f - Δ f - C f <= 0` wherever `f > 0` imply `f <= 0`.
///
/// `f[k][node]` is the value at `times[k]`.
pub fn max_principle_check(
    mesh: &DomainMesh,
    times: &[f64],
    f: &[Vec<f64>],
    c: f64,
    tolerance: f64,
) -> MaxPrincipleVerdict {
    let mut h_transform_max = f64::NEG_INFINITY;
    for (k, row) in f.iter().enumerate() {
        let w = (-(c + 1.0) * times[k]).exp();
        for &v in row {
            h_transform_max = h_transform_max.max(w * v);
        }
    }
    let witness = |k: usize, node: usize, residual| Witness {
        time_index: k,
        time: times[k],
        node,
        value: f[k][node],
        residual,
    };
    let verdict = |classification, skipped_band| MaxPrincipleVerdict {
        classification,
        h_transform_max,
        skipped_band,
    };
    for (k, row) in f.iter().enumerate() {
        for (node, &v) in row.iter().enumerate() {
            if (k == 0 || mesh.is_boundary(node)) && v > tolerance {
                return verdict(Classification::HypothesisViolated(witness(k, node, None)), 0);
            }
        }
    }
    let h2 = mesh.spacing() * mesh.spacing();
    let mut skipped = 0;
    let mut above: Option<Witness> = None;
    for k in 1..f.len() {
        let dt = times[k] - times[k - 1];
        for node in 0..mesh.len() {
            let v = f[k][node];
            if v <= 0.0 || mesh.is_boundary(node) {
                continue;
            }
            if v <= tolerance {
                skipped += 1;
                continue;
            }
            let mut lap = 0.0;
            for axis in 0..mesh.dim() {
                if let (Some(a), Some(b)) = mesh.neighbors(node, axis) {
                    lap += (f[k][a] + f[k][b] - 2.0 * v) / h2;
                }
            }
            let residual = (v - f[k - 1][node]) / dt - lap - c * v;
            if residual > tolerance {
                return verdict(
                    Classification::HypothesisViolated(witness(k, node, Some(residual))),
                    skipped,
                );
            }
            if above.is_none() {
                above = Some(witness(k, node, Some(residual)));
            }
        }
    }
    match above {
        Some(w) => verdict(Classification::Counterexample(w), skipped),
        None => verdict(Classification::HypothesisAndConclusionHold, skipped),
    }
}
