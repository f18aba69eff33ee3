//! Benchmark scenario and fixed-step closed-loop simulation.
//!
//! The coupled state integrated by RK4 stacks the plant (q, qd) with the
//! admittance reference (xr, xr_dot). The control torque is recomputed at a
//! fixed rate and held between evaluations (zero-order hold); the external
//! force acts continuously. During the initial transient the whole loop runs
//! at a refined step because the high-order velocity feedback is stiff while
//! the tracking error is still large.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::admittance::{admittance_acceleration, AdmittanceParams};
use crate::barrier::{self, ConstraintProfile};
use crate::control::{
    self, AlphaDifferentiator, ControllerVariant, ErrorState, FixedTimeGains,
};
use crate::dynamics::{self, RobotParams};
use crate::error::{Error, Result};
use crate::integrator::rk4_step;
use crate::nn::{nn_input, AdaptationLaw, RbfConfig, RbfNetwork};

/// Fraction of the bound the controller sees when a sample is already outside
/// it in tolerant mode. Close enough to 1 to keep the barrier active, far
/// enough that the clamped feedback stays integrable at the control rate.
pub const BREACH_CLAMP: f64 = 0.999;

/// Desired end-effector path: a circle traced at constant angular rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesiredCircle {
    pub radius: f64,
    pub omega: f64,
}

impl Default for DesiredCircle {
    fn default() -> Self {
        Self { radius: 0.18, omega: 0.5 }
    }
}

impl DesiredCircle {
    pub fn evaluate(&self, t: f64) -> (Vector2<f64>, Vector2<f64>, Vector2<f64>) {
        let (s, c) = (self.omega * t).sin_cos();
        let r = self.radius;
        let w = self.omega;
        (
            Vector2::new(r * c, r * s),
            Vector2::new(-r * w * s, r * w * c),
            Vector2::new(-r * w * w * c, -r * w * w * s),
        )
    }
}

/// Human interaction force: smooth cosine ramp up over `ramp` seconds,
/// constant plateau at twice the amplitude, smooth ramp down.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForceProfile {
    pub amps: Vector2<f64>,
    pub on_time: f64,
    pub ramp: f64,
    pub off_time: f64,
}

impl Default for ForceProfile {
    fn default() -> Self {
        Self { amps: Vector2::new(1.0, 2.0), on_time: 20.0, ramp: 1.0, off_time: 30.0 }
    }
}

impl ForceProfile {
    fn shape(&self, t: f64) -> f64 {
        if t < self.on_time || t >= self.off_time + self.ramp {
            0.0
        } else if t < self.on_time + self.ramp {
            1.0 - (std::f64::consts::PI * (t - self.on_time) / self.ramp).cos()
        } else if t < self.off_time {
            2.0
        } else {
            1.0 + (std::f64::consts::PI * (t - self.off_time) / self.ramp).cos()
        }
    }

    pub fn force(&self, t: f64) -> Vector2<f64> {
        self.amps * self.shape(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ramp > 0.0) {
            return Err(Error::InvalidConfig(format!("force ramp = {} must be positive", self.ramp)));
        }
        if !(self.on_time >= 0.0 && self.on_time + self.ramp <= self.off_time) {
            return Err(Error::InvalidConfig(
                "force window needs 0 <= on_time and on_time + ramp <= off_time".into(),
            ));
        }
        Ok(())
    }
}

/// Runs the whole loop at dt/refine while t < window. The fifth-power
/// velocity feedback is stiff during the initial transient; after the error
/// collapses the nominal step is stable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StartupRefinement {
    pub window_ms: u32,
    pub refine: u32,
}

impl Default for StartupRefinement {
    fn default() -> Self {
        Self { window_ms: 1000, refine: 1000 }
    }
}

impl StartupRefinement {
    pub fn window(&self) -> f64 {
        f64::from(self.window_ms) * 1e-3
    }

    pub fn validate(&self) -> Result<()> {
        if self.refine == 0 {
            return Err(Error::InvalidConfig("startup refine must be at least 1".into()));
        }
        Ok(())
    }
}

/// What to do when a sample violates its constraint: abort the run or clamp
/// the controller's view of the sample and keep counting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BreachMode {
    #[default]
    Strict,
    Tolerant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub robot: RobotParams,
    pub admittance: AdmittanceParams,
    pub gains: FixedTimeGains,
    pub rbf: RbfConfig,
    pub constraints: ConstraintProfile,
    pub desired: DesiredCircle,
    pub force: ForceProfile,
    pub variant: ControllerVariant,
    pub model_free: bool,
    pub horizon: f64,
    pub dt: f64,
    pub q0: Vector2<f64>,
    pub qd0: Vector2<f64>,
    pub trace_decimation: u32,
    pub startup: StartupRefinement,
    pub breach_mode: BreachMode,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            robot: RobotParams::default(),
            admittance: AdmittanceParams::default(),
            gains: FixedTimeGains::default(),
            rbf: RbfConfig::default(),
            constraints: ConstraintProfile::default(),
            desired: DesiredCircle::default(),
            force: ForceProfile::default(),
            variant: ControllerVariant::FxtTviblf,
            model_free: false,
            horizon: 50.0,
            dt: 1e-3,
            q0: Vector2::new(std::f64::consts::FRAC_PI_6, 2.0 * std::f64::consts::FRAC_PI_3),
            qd0: Vector2::zeros(),
            trace_decimation: 10,
            startup: StartupRefinement::default(),
            breach_mode: BreachMode::Strict,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.admittance.validate()?;
        self.gains.validate()?;
        self.rbf.validate()?;
        self.force.validate()?;
        self.startup.validate()?;
        if !(self.dt > 0.0 && self.horizon >= self.dt) {
            return Err(Error::InvalidConfig(format!(
                "need dt > 0 and horizon >= dt (dt = {}, horizon = {})",
                self.dt, self.horizon
            )));
        }
        if self.trace_decimation == 0 {
            return Err(Error::InvalidConfig("trace_decimation must be at least 1".into()));
        }
        if !(self.desired.radius > 0.0 && self.desired.omega.is_finite()) {
            return Err(Error::InvalidConfig("desired circle needs radius > 0".into()));
        }
        self.constraints.validate(self.horizon)?;
        let x0 = dynamics::forward_kinematics(&self.robot, &self.q0);
        let b0 = self.constraints.bound(0.0);
        for i in 0..2 {
            if x0[i].abs() >= b0[i] {
                return Err(Error::InvalidConfig(format!(
                    "initial pose starts outside constraint axis {}: |{:.4}| >= {:.4}",
                    i + 1,
                    x0[i],
                    b0[i]
                )));
            }
        }
        Ok(())
    }

    pub fn step_count(&self) -> u64 {
        (self.horizon / self.dt).round().max(1.0) as u64
    }

    /// Hash of every scenario-defining field, ignoring the controller variant
    /// switches; comparison rows must agree on it.
    pub fn base_fingerprint(&self) -> u64 {
        let mut canon = self.clone();
        canon.variant = ControllerVariant::FxtTviblf;
        canon.model_free = false;
        canon.breach_mode = BreachMode::Tolerant;
        let text = toml::to_string(&canon).expect("scenario config serializes");
        let mut h = DefaultHasher::new();
        text.hash(&mut h);
        h.finish()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text.trim_start_matches('\u{feff}'))
            .map_err(|e| Error::InvalidConfig(format!("config parse error: {e}")))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::InvalidConfig(format!("config serialize error: {e}")))
    }
}

/// State and control sample on the trace grid. `z1`, `z2`, and `v1` reflect
/// the controller's view (clamped in tolerant mode); `x` is the raw plant
/// output.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub q: Vector2<f64>,
    pub qd: Vector2<f64>,
    pub x: Vector2<f64>,
    pub xdot: Vector2<f64>,
    pub xd: Vector2<f64>,
    pub xr: Vector2<f64>,
    pub z1: Vector2<f64>,
    pub z2: Vector2<f64>,
    pub u: Vector2<f64>,
    pub tau_c: Vector2<f64>,
    pub fe: Vector2<f64>,
    pub bound: Vector2<f64>,
    pub v1: f64,
    pub weights: [Vec<f64>; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationTrace {
    pub variant: ControllerVariant,
    pub model_free: bool,
    pub dt: f64,
    pub node_count: usize,
    /// Control evaluations that saw a clamped barrier (tolerant mode only).
    pub breach_steps: u64,
    pub config_fingerprint: u64,
    pub records: Vec<TraceRecord>,
}

impl SimulationTrace {
    pub fn duration(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }
}

struct ControlContext<'a> {
    cfg: &'a ScenarioConfig,
    gains: FixedTimeGains,
    profile: ConstraintProfile,
    law: AdaptationLaw,
}

struct ControlEval {
    u: Vector2<f64>,
    tau_c: Vector2<f64>,
    x: Vector2<f64>,
    xdot: Vector2<f64>,
    z1: Vector2<f64>,
    z2: Vector2<f64>,
    fe: Vector2<f64>,
    bound: Vector2<f64>,
    v1: f64,
    basis: Vec<f64>,
    breached: bool,
}

type LoopState = SVector<f64, 8>;

fn split_state(y: &LoopState) -> (Vector2<f64>, Vector2<f64>, Vector2<f64>, Vector2<f64>) {
    (
        Vector2::new(y[0], y[1]),
        Vector2::new(y[2], y[3]),
        Vector2::new(y[4], y[5]),
        Vector2::new(y[6], y[7]),
    )
}

fn control_step(
    ctx: &ControlContext<'_>,
    t: f64,
    state: &LoopState,
    diff: &mut AlphaDifferentiator,
    net: &RbfNetwork,
) -> Result<ControlEval> {
    let cfg = ctx.cfg;
    let (q, qd, xr, xr_dot) = split_state(state);

    let jac = dynamics::jacobian(&cfg.robot, &q);
    let det = jac.determinant();
    if det.abs() < dynamics::SINGULARITY_EPS {
        return Err(Error::SingularJacobian { det, q1: q[0], q2: q[1] }.at(t));
    }
    let x = dynamics::forward_kinematics(&cfg.robot, &q);
    let xdot = jac * qd;

    let bound = ctx.profile.bound(t);
    let mut x_ctrl = x;
    let mut xr_ctrl = xr;
    let mut breached = false;
    for i in 0..2 {
        if x[i].abs() >= bound[i] {
            match cfg.breach_mode {
                BreachMode::Strict => {
                    return Err(Error::ConstraintBreach {
                        t,
                        axis: i + 1,
                        value: x[i].abs(),
                        bound: bound[i],
                    });
                }
                BreachMode::Tolerant => {
                    breached = true;
                    x_ctrl[i] = x[i].signum() * bound[i] * BREACH_CLAMP;
                }
            }
        }
        if xr[i].abs() >= bound[i] && cfg.breach_mode == BreachMode::Tolerant {
            breached = true;
            xr_ctrl[i] = xr[i].signum() * bound[i] * BREACH_CLAMP;
        }
    }

    let z1 = x_ctrl - xr_ctrl;
    let alpha = control::stabilizing_alpha(&z1, &xr_ctrl, &xr_dot, &ctx.profile, t, &ctx.gains)
        .map_err(|e| e.at(t))?;
    let alpha_dot = diff.rate(t, &alpha);
    let z2 = xdot - alpha;
    let err = ErrorState { z1, z2, xr: xr_ctrl };

    let fe = cfg.force.force(t);
    let zin = nn_input(&q, &qd, &alpha, &alpha_dot);
    let (basis, nn_out) = net.evaluate(&zin);
    let u = if cfg.model_free {
        control::control_model_free(&nn_out, &err, &fe, &ctx.profile, t, &ctx.gains)
    } else {
        let coeffs = dynamics::cartesian_coefficients(&cfg.robot, &q, &qd)?;
        control::control_model_based(
            &coeffs, &err, &alpha, &alpha_dot, &fe, &ctx.profile, t, &ctx.gains,
        )
    }
    .map_err(|e| e.at(t))?;
    let tau_c = jac.transpose() * u;
    let v1 = barrier::v1_total(&z1, &xr_ctrl, &bound).map_err(|e| e.at(t))?;

    Ok(ControlEval { u, tau_c, x, xdot, z1, z2, fe, bound, v1, basis, breached })
}

/// Coupled plant + reference derivative with the control torque held.
fn coupled_derivative(
    cfg: &ScenarioConfig,
    t: f64,
    y: &LoopState,
    tau_c: &Vector2<f64>,
) -> LoopState {
    let (q, qd, xr, xr_dot) = split_state(y);
    let fe = cfg.force.force(t);
    let jac = dynamics::jacobian(&cfg.robot, &q);
    let tau_e = jac.transpose() * fe;
    let qdd = dynamics::plant_acceleration(&cfg.robot, &q, &qd, tau_c, &tau_e);
    let (xd, xd_dot, xd_ddot) = cfg.desired.evaluate(t);
    let acc = admittance_acceleration(&cfg.admittance, &xr, &xr_dot, &xd, &xd_dot, &xd_ddot, &fe);
    LoopState::from([qd[0], qd[1], qdd[0], qdd[1], xr_dot[0], xr_dot[1], acc[0], acc[1]])
}

fn make_record(
    cfg: &ScenarioConfig,
    t: f64,
    state: &LoopState,
    eval: &ControlEval,
    net: &RbfNetwork,
) -> TraceRecord {
    let (q, qd, xr, _) = split_state(state);
    let (xd, _, _) = cfg.desired.evaluate(t);
    TraceRecord {
        t,
        q,
        qd,
        x: eval.x,
        xdot: eval.xdot,
        xd,
        xr,
        z1: eval.z1,
        z2: eval.z2,
        u: eval.u,
        tau_c: eval.tau_c,
        fe: eval.fe,
        bound: eval.bound,
        v1: eval.v1,
        weights: net.weights.clone(),
    }
}

/// Runs the closed loop over [0, horizon]. Deterministic: identical configs
/// produce identical traces.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimulationTrace> {
    cfg.validate()?;
    let profile = if cfg.variant.freezes_constraints() {
        cfg.constraints.frozen(0.0)
    } else {
        cfg.constraints
    };
    let ctx = ControlContext {
        cfg,
        gains: cfg.variant.effective_gains(&cfg.gains),
        profile,
        law: if cfg.variant == ControllerVariant::FxtTviblf {
            AdaptationLaw::FixedTime
        } else {
            AdaptationLaw::Traditional
        },
    };
    let mut net = RbfNetwork::new(&cfg.rbf)?;
    let mut diff = AlphaDifferentiator::default();

    let (xd0, xd_dot0, _) = cfg.desired.evaluate(0.0);
    let mut state = LoopState::from([
        cfg.q0[0], cfg.q0[1], cfg.qd0[0], cfg.qd0[1], xd0[0], xd0[1], xd_dot0[0], xd_dot0[1],
    ]);

    let steps = cfg.step_count();
    let decim = u64::from(cfg.trace_decimation);
    let window = cfg.startup.window();
    let mut records = Vec::with_capacity((steps / decim + 2) as usize);
    let mut breach_steps = 0u64;

    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let nsub = if t < window { u64::from(cfg.startup.refine) } else { 1 };
        let h = cfg.dt / nsub as f64;
        for s in 0..nsub {
            let ts = t + s as f64 * h;
            let eval = control_step(&ctx, ts, &state, &mut diff, &net)?;
            if eval.breached {
                breach_steps += 1;
            }
            // Record every step inside the startup window: the initial
            // transient is the fastest stretch of the run, and decimating it
            // aliases the metrics computed from the trace.
            if s == 0 && (t < window || k % decim == 0) {
                records.push(make_record(cfg, t, &state, &eval, &net));
            }
            state = rk4_step(ts, &state, h, |tt, y| coupled_derivative(cfg, tt, y, &eval.tau_c));
            if cfg.model_free {
                net.update(ctx.law, &eval.basis, &eval.z2, h, &ctx.gains, &cfg.rbf);
            }
        }
        if !state.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: (k + 1) as f64 * cfg.dt });
        }
    }

    // Final sample: the control is evaluated for logging only.
    let t_end = steps as f64 * cfg.dt;
    let eval = control_step(&ctx, t_end, &state, &mut diff, &net)?;
    if eval.breached {
        breach_steps += 1;
    }
    records.push(make_record(cfg, t_end, &state, &eval, &net));

    Ok(SimulationTrace {
        variant: cfg.variant,
        model_free: cfg.model_free,
        dt: cfg.dt,
        node_count: net.node_count(),
        breach_steps,
        config_fingerprint: cfg.base_fingerprint(),
        records,
    })
}
