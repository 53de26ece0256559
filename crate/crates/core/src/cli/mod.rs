//! Scenario execution and report files.

pub mod scenario;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use scenario::{parse_scenario, BoundaryFamily, InitialFamily, ParseOptions, Scenario, Tolerances};

use crate::error::{Error, Result};
use crate::flow::{dirichlet_energy, plan_steps, run_observed, FlowState, Trajectory};
use crate::level_geometry::{estimate_c0, FlowConstants};
use crate::verify::{
    default_tolerance, max_principle_check, Classification, ContainmentReport, MaxPrincipleVerdict,
    SigmaMonitor, Verdict,
};

/// Process exit statuses of the command-line tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass,
    /// Solver abort or I/O failure.
    Failure,
    HypothesisViolated,
    TubeExited,
    ContainmentViolated,
    InvalidScenario,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Pass => 0,
            ExitStatus::Failure => 1,
            ExitStatus::HypothesisViolated => 2,
            ExitStatus::TubeExited => 3,
            ExitStatus::ContainmentViolated => 4,
            ExitStatus::InvalidScenario => 5,
        }
    }

    /// Status for an error escaping scenario handling.
    pub fn for_error(e: &Error) -> Self {
        match e {
            Error::Scenario { .. } => ExitStatus::InvalidScenario,
            _ => ExitStatus::Failure,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub save_every: Option<usize>,
    pub seed: Option<u64>,
}

/// One row of `report.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub t: f64,
    pub sigma_max: f64,
    pub energy: f64,
    pub h_transform_max: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: ExitStatus,
    pub verdict_line: String,
    pub states: Vec<FlowState>,
    pub rows: Vec<ReportRow>,
    pub containment: Option<ContainmentReport>,
    pub max_principle: Option<MaxPrincipleVerdict>,
    pub constants: Option<FlowConstants>,
    pub epsilon: f64,
    pub focal_radius: f64,
    pub dt: f64,
    pub h: f64,
    pub ambient_dim: usize,
}

fn early_outcome(s: &Scenario, status: ExitStatus, verdict_line: String, dt: f64) -> RunOutcome {
    RunOutcome {
        status,
        verdict_line,
        states: Vec::new(),
        rows: Vec::new(),
        containment: None,
        max_principle: None,
        constants: None,
        epsilon: s.body.epsilon(),
        focal_radius: s.manifold.focal_radius_bound(),
        dt,
        h: s.mesh.spacing(),
        ambient_dim: s.manifold.ambient_dim(),
    }
}

fn classification_name(c: &Classification) -> &'static str {
    match c {
        Classification::HypothesisAndConclusionHold => "HYPOTHESIS_AND_CONCLUSION_HOLD",
        Classification::HypothesisViolated(_) => "HYPOTHESIS_VIOLATED",
        Classification::Counterexample(_) => "COUNTEREXAMPLE",
    }
}

/// Runs the flow of a scenario and all checks. Solver aborts are reported
/// through the outcome; only setup failures are returned as errors.
pub fn run_scenario(scenario: &Scenario, options: &RunOptions) -> Result<RunOutcome> {
    let mut s = scenario.clone();
    if let Some(seed) = options.seed {
        s.seed = seed;
    }
    if let Some(k) = options.save_every {
        s.policy.save_every = k.max(1);
    }
    let (dt, _) = plan_steps(&s.mesh, s.window, s.policy.safety)?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    if !s.body.convexity_validated()
        && !s.body.strong_convexity_probe(s.tolerances.convexity_trials, &mut rng)
    {
        return Ok(early_outcome(
            &s,
            ExitStatus::HypothesisViolated,
            "HYPOTHESIS_VIOLATED strong convexity probe failed".to_string(),
            dt,
        ));
    }
    let initial = s.initial_field()?;
    let boundary = s.boundary_trajectory(&initial)?;
    let tolerance = s
        .tolerances
        .containment
        .unwrap_or_else(|| default_tolerance(s.mesh.spacing(), dt));
    let mut monitor = SigmaMonitor::new(&s.body, tolerance);
    let run = run_observed(&initial, s.window, &boundary, s.policy, &mut |st| monitor.observe(st));
    let traj: Trajectory = match run {
        Ok(t) => t,
        Err(e @ Error::FlowAborted { .. }) => {
            return Ok(early_outcome(&s, ExitStatus::Failure, format!("SOLVER_ABORTED {e}"), dt));
        }
        Err(e) => return Err(e),
    };
    let mut report = monitor.finish();
    let c0 = estimate_c0(&s.body, s.tolerances.c0_samples, &mut rng)?;
    let constants = FlowConstants::new(s.mesh.dim(), traj.d0, c0);
    report.constants = Some(constants);

    let mut sigma_grid = Vec::with_capacity(traj.states.len());
    let mut rows = Vec::with_capacity(traj.states.len());
    for st in &traj.states {
        let sigma: Vec<f64> = st
            .field
            .values()
            .iter()
            .map(|p| s.body.distance(p).unwrap_or(f64::INFINITY))
            .collect();
        let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
        let weight = (-(constants.c + 1.0) * st.time).exp();
        rows.push(ReportRow {
            t: st.time,
            sigma_max,
            energy: dirichlet_energy(&st.field)?,
            h_transform_max: sigma.iter().map(|v| weight * v).fold(0.0, f64::max),
        });
        sigma_grid.push(sigma);
    }
    let max_principle = (report.verdict != Verdict::TubeExited).then(|| {
        let times: Vec<f64> = traj.states.iter().map(|st| st.time).collect();
        max_principle_check(&s.mesh, &times, &sigma_grid, constants.c, tolerance)
    });
    let counterexample = matches!(
        max_principle.as_ref().map(|v| v.classification),
        Some(Classification::Counterexample(_))
    );
    let status = match report.verdict {
        Verdict::TubeExited => ExitStatus::TubeExited,
        Verdict::HypothesisViolated => ExitStatus::HypothesisViolated,
        Verdict::Violated => ExitStatus::ContainmentViolated,
        Verdict::Contained if counterexample => ExitStatus::ContainmentViolated,
        Verdict::Contained => ExitStatus::Pass,
    };
    let mut verdict_line = format!(
        "{} sigma_max={:.16e} tolerance={:.16e}",
        report.verdict.as_str(),
        report.sigma_max(),
        tolerance
    );
    if let Some(v) = &max_principle {
        let _ = write!(verdict_line, " max_principle={}", classification_name(&v.classification));
    }
    Ok(RunOutcome {
        status,
        verdict_line,
        states: traj.states,
        rows,
        containment: Some(report),
        max_principle,
        constants: Some(constants),
        epsilon: s.body.epsilon(),
        focal_radius: s.manifold.focal_radius_bound(),
        dt: traj.dt,
        h: s.mesh.spacing(),
        ambient_dim: s.manifold.ambient_dim(),
    })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_csv(outcome: &RunOutcome) -> String {
    let mut out = String::from("t,node");
    for k in 0..outcome.ambient_dim {
        let _ = write!(out, ",x{k}");
    }
    out.push('\n');
    for st in &outcome.states {
        for (node, p) in st.field.values().iter().enumerate() {
            out.push_str(&num(st.time));
            let _ = write!(out, ",{node}");
            for c in p.coords() {
                out.push(',');
                out.push_str(&num(*c));
            }
            out.push('\n');
        }
    }
    out
}

pub fn report_csv(outcome: &RunOutcome) -> String {
    let mut out = String::from("t,sigma_max,energy,h_transform_max\n");
    for r in &outcome.rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            num(r.t),
            num(r.sigma_max),
            num(r.energy),
            num(r.h_transform_max)
        );
    }
    out
}

pub fn constants_csv(outcome: &RunOutcome) -> String {
    let mut out = String::from("D0,C0,C,epsilon,R,dt,h\n");
    let (d0, c0, c) = outcome
        .constants
        .map_or((f64::NAN, f64::NAN, f64::NAN), |k| (k.d0, k.c0, k.c));
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{}",
        num(d0),
        num(c0),
        num(c),
        num(outcome.epsilon),
        num(outcome.focal_radius),
        num(outcome.dt),
        num(outcome.h)
    );
    out
}

/// Writes `trajectory.csv`, `report.csv`, `constants.csv` and `verdict.txt`
/// into `dir`, creating it if needed.
pub fn emit_report(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trajectory.csv"), trajectory_csv(outcome))?;
    fs::write(dir.join("report.csv"), report_csv(outcome))?;
    fs::write(dir.join("constants.csv"), constants_csv(outcome))?;
    fs::write(dir.join("verdict.txt"), format!("{}\n", outcome.verdict_line))?;
    Ok(())
}
