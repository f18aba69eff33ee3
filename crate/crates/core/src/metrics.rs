//! Trace post-processing: tracking error, constraint margins, settling time,
//! and the six-row controller comparison matrix.

use nalgebra::Vector2;
use rayon::prelude::*;

use crate::control::{self, ControllerVariant};
use crate::dynamics;
use crate::error::{Error, Result};
use crate::sim::{run_scenario, BreachMode, ScenarioConfig, SimulationTrace};

/// Tube radius around the reference inside which the loop counts as settled.
pub const DEFAULT_SETTLING_BAND: f64 = 5e-3;

/// Jacobian determinant floor defining the admissible workspace for the
/// settling-bound supremum. Verified against simulated trajectories.
pub const WORKSPACE_DET_FLOOR: f64 = 0.02;

/// Grid resolution per joint for the workspace supremum.
pub const WORKSPACE_GRID: usize = 720;

/// Inflation applied to the gridded supremum so it dominates the continuum
/// value between grid nodes. Enlarging the mass bound only lengthens the
/// settling bound, so the pad keeps it conservative.
const MASS_SUP_MARGIN: f64 = 1.05;

/// Padded workspace supremum of the task-space inertia eigenvalue for the
/// given constraint envelope.
pub fn workspace_mass_sup(
    robot: &crate::dynamics::RobotParams,
    constraints: &crate::barrier::ConstraintProfile,
) -> f64 {
    MASS_SUP_MARGIN
        * dynamics::mass_eigen_sup_over_workspace(
            robot,
            &constraints.bound_sup(),
            WORKSPACE_DET_FLOOR,
            WORKSPACE_GRID,
        )
}

fn window_records(
    trace: &SimulationTrace,
    t0: f64,
    t1: f64,
) -> Result<Vec<&crate::sim::TraceRecord>> {
    let picked: Vec<_> = trace.records.iter().filter(|r| r.t >= t0 && r.t <= t1).collect();
    if picked.is_empty() {
        return Err(Error::EmptyWindow { t0, t1 });
    }
    Ok(picked)
}

/// Root-mean-square of x - xr on one axis over the inclusive window [t0, t1].
/// Time-weighted: the startup stretch of a trace is recorded at every control
/// step while the rest is decimated, and a per-sample mean would overweight
/// the dense part.
pub fn rmse(trace: &SimulationTrace, axis: usize, t0: f64, t1: f64) -> Result<f64> {
    let picked = window_records(trace, t0, t1)?;
    if picked.len() == 1 {
        let e = picked[0].x[axis] - picked[0].xr[axis];
        return Ok(e.abs());
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for pair in picked.windows(2) {
        let h = pair[1].t - pair[0].t;
        let e0 = pair[0].x[axis] - pair[0].xr[axis];
        let e1 = pair[1].x[axis] - pair[1].xr[axis];
        num += 0.5 * h * (e0 * e0 + e1 * e1);
        den += h;
    }
    Ok((num / den).sqrt())
}

/// Mean of xr - xd per axis over the inclusive window [t0, t1]; measures how
/// far the admittance layer yields under a sustained force. Time-weighted for
/// the same reason as `rmse`.
pub fn mean_reference_offset(trace: &SimulationTrace, t0: f64, t1: f64) -> Result<Vector2<f64>> {
    let picked = window_records(trace, t0, t1)?;
    if picked.len() == 1 {
        return Ok(picked[0].xr - picked[0].xd);
    }
    let mut acc = Vector2::zeros();
    let mut den = 0.0;
    for pair in picked.windows(2) {
        let h = pair[1].t - pair[0].t;
        acc += 0.5 * h * ((pair[0].xr - pair[0].xd) + (pair[1].xr - pair[1].xd));
        den += h;
    }
    Ok(acc / den)
}

/// Worst-case distance to the constraint per axis and when it occurred.
/// Positive margins mean the bound was never touched.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintMargin {
    pub margin: Vector2<f64>,
    pub at: Vector2<f64>,
}

pub fn constraint_margin(trace: &SimulationTrace) -> Option<ConstraintMargin> {
    let first = trace.records.first()?;
    let mut margin = Vector2::new(f64::INFINITY, f64::INFINITY);
    let mut at = Vector2::new(first.t, first.t);
    for r in &trace.records {
        for i in 0..2 {
            let m = r.bound[i] - r.x[i].abs();
            if m < margin[i] {
                margin[i] = m;
                at[i] = r.t;
            }
        }
    }
    Some(ConstraintMargin { margin, at })
}

/// Settling onto the reference during the trailing force-free stretch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Settling {
    /// Time of the first sample from which |x - xr| stays inside the band.
    pub at: f64,
    /// Start of the trailing segment with zero interaction force.
    pub segment_start: f64,
    /// at - segment_start: how long after release the loop needed.
    pub duration: f64,
}

/// Finds the last force-free segment of the trace and, inside it, the first
/// sample after which the tracking error never leaves the band again.
/// `None` when the force is still active at the end or the error never stays
/// inside the band.
pub fn settling_time(trace: &SimulationTrace, band: f64) -> Option<Settling> {
    let records = &trace.records;
    let last = records.last()?;
    if last.fe != Vector2::zeros() {
        return None;
    }
    let seg_begin = records
        .iter()
        .rposition(|r| r.fe != Vector2::zeros())
        .map_or(0, |idx| idx + 1);
    let segment_start = records[seg_begin].t;

    let mut settle_idx = None;
    for idx in (seg_begin..records.len()).rev() {
        let r = &records[idx];
        if (r.x - r.xr).norm() < band {
            settle_idx = Some(idx);
        } else {
            break;
        }
    }
    let idx = settle_idx?;
    let at = records[idx].t;
    Some(Settling { at, segment_start, duration: at - segment_start })
}

/// Largest control magnitude over the trace.
pub fn peak_control(trace: &SimulationTrace) -> f64 {
    trace.records.iter().map(|r| r.u.norm()).fold(0.0, f64::max)
}

/// One comparison row.
#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub variant: ControllerVariant,
    pub model_free: bool,
    pub rmse: Vector2<f64>,
    pub margin: Vector2<f64>,
    pub margin_at: Vector2<f64>,
    /// Seconds from force release to settling, when it settles.
    pub settling: Option<f64>,
    /// Analytic settling budget; only the fixed-time rows have one.
    pub tmax: Option<f64>,
    pub peak_control: f64,
    pub breaches: u64,
}

#[derive(Clone, Debug)]
pub struct ComparisonMatrix {
    pub reports: Vec<MetricsReport>,
    pub traces: Vec<SimulationTrace>,
    /// Shared scenario fingerprint all rows were checked against.
    pub fingerprint: u64,
    /// Workspace supremum of the task-space inertia eigenvalue (padded).
    pub mass_sup: f64,
}

impl ComparisonMatrix {
    pub fn row(&self, variant: ControllerVariant, model_free: bool) -> Option<&MetricsReport> {
        self.reports
            .iter()
            .find(|r| r.variant == variant && r.model_free == model_free)
    }

    pub fn trace(&self, variant: ControllerVariant, model_free: bool) -> Option<&SimulationTrace> {
        self.traces
            .iter()
            .find(|t| t.variant == variant && t.model_free == model_free)
    }
}

/// The analytic bound assumes the trajectory stays where the inertia
/// supremum and determinant floor were taken; reject the run if it did not.
fn verify_workspace_envelope(
    trace: &SimulationTrace,
    cfg: &ScenarioConfig,
    mass_sup: f64,
    det_floor: f64,
) -> Result<()> {
    for r in &trace.records {
        let det = dynamics::jacobian(&cfg.robot, &r.q).determinant().abs();
        if det < det_floor {
            return Err(Error::Domain(format!(
                "settling bound unsound: |det J| = {det:.4} fell below the {det_floor} floor at t = {:.3}",
                r.t
            )));
        }
        let coeffs = dynamics::cartesian_coefficients(&cfg.robot, &r.q, &r.qd)?;
        let lam = dynamics::sym_eigen_max(&coeffs.mx);
        if lam > mass_sup {
            return Err(Error::Domain(format!(
                "settling bound unsound: inertia eigenvalue {lam:.4} exceeded the workspace supremum {mass_sup:.4} at t = {:.3}",
                r.t
            )));
        }
    }
    Ok(())
}

fn summarize(trace: &SimulationTrace, tmax: Option<f64>) -> Result<MetricsReport> {
    let duration = trace.duration();
    let margin = constraint_margin(trace)
        .ok_or_else(|| Error::MalformedTrace("empty trace has no margins".into()))?;
    Ok(MetricsReport {
        variant: trace.variant,
        model_free: trace.model_free,
        rmse: Vector2::new(rmse(trace, 0, 0.0, duration)?, rmse(trace, 1, 0.0, duration)?),
        margin: margin.margin,
        margin_at: margin.at,
        settling: settling_time(trace, DEFAULT_SETTLING_BAND).map(|s| s.duration),
        tmax,
        peak_control: peak_control(trace),
        breaches: trace.breach_steps,
    })
}

/// Runs every controller variant in both model-based and model-free form on
/// the same scenario (tolerant breach handling so baselines finish) and
/// summarizes each run. The fixed-time rows also get the analytic settling
/// budget, verified against the realized trajectory.
pub fn compare_variants(base_cfg: &ScenarioConfig) -> Result<ComparisonMatrix> {
    base_cfg.validate()?;
    let mass_sup = workspace_mass_sup(&base_cfg.robot, &base_cfg.constraints);
    // No budget when the configured gains cannot produce one (zeroed
    // fixed-time terms); the rows then simply carry no analytic bound.
    let budget = control::assemble_fixed_time_bound(
        &base_cfg.gains,
        2,
        base_cfg.rbf.centers.len(),
        mass_sup,
    )
    .ok();

    let mut rows = Vec::new();
    for variant in ControllerVariant::ALL {
        for model_free in [false, true] {
            let mut cfg = base_cfg.clone();
            cfg.variant = variant;
            cfg.model_free = model_free;
            cfg.breach_mode = BreachMode::Tolerant;
            rows.push(cfg);
        }
    }

    let results: Vec<(MetricsReport, SimulationTrace)> = rows
        .par_iter()
        .map(|cfg| {
            let trace = run_scenario(cfg)?;
            let tmax = match (&budget, cfg.variant) {
                (Some(budget), ControllerVariant::FxtTviblf) => {
                    verify_workspace_envelope(&trace, cfg, mass_sup, WORKSPACE_DET_FLOOR)?;
                    Some(budget.tmax(cfg.model_free))
                }
                _ => None,
            };
            let report = summarize(&trace, tmax)?;
            Ok((report, trace))
        })
        .collect::<Result<_>>()?;

    let fingerprint = base_cfg.base_fingerprint();
    let (reports, traces): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    for trace in &traces {
        if trace.config_fingerprint != fingerprint {
            return Err(Error::Domain(
                "comparison rows disagree on the scenario fingerprint".into(),
            ));
        }
    }

    Ok(ComparisonMatrix { reports, traces, fingerprint, mass_sup })
}
