//! Admittance reference generator.
//!
//! A virtual mass-spring-damper per Cartesian axis turns the measured
//! interaction force into a compliant displacement of the reference away
//! from the desired trajectory:
//!     km*(xr_dd - xd_dd) + kb*(xr_d - xd_d) + kk*(xr - xd) = fe
//! Under a constant force the reference settles at xd + fe/kk.

use nalgebra::{SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::rk4_step;

/// Per-axis virtual mass, damping, and stiffness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmittanceParams {
    pub km: Vector2<f64>,
    pub kb: Vector2<f64>,
    pub kk: Vector2<f64>,
}

impl Default for AdmittanceParams {
    fn default() -> Self {
        Self {
            km: Vector2::new(20.0, 20.0),
            kb: Vector2::new(20.0, 20.0),
            kk: Vector2::new(100.0, 100.0),
        }
    }
}

impl AdmittanceParams {
    pub fn validate(&self) -> Result<()> {
        for i in 0..2 {
            if !(self.km[i] > 0.0 && self.kb[i] > 0.0 && self.kk[i] > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "admittance axis {} needs positive km, kb, kk",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Reference trajectory state produced by the admittance filter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceState {
    pub xr: Vector2<f64>,
    pub xr_dot: Vector2<f64>,
}

/// Reference acceleration for the given filter state, desired motion, and force.
pub fn admittance_acceleration(
    params: &AdmittanceParams,
    xr: &Vector2<f64>,
    xr_dot: &Vector2<f64>,
    xd: &Vector2<f64>,
    xd_dot: &Vector2<f64>,
    xd_ddot: &Vector2<f64>,
    fe: &Vector2<f64>,
) -> Vector2<f64> {
    let mut acc = Vector2::zeros();
    for i in 0..2 {
        acc[i] = xd_ddot[i]
            + (fe[i] - params.kb[i] * (xr_dot[i] - xd_dot[i]) - params.kk[i] * (xr[i] - xd[i]))
                / params.km[i];
    }
    acc
}

/// Integrates the filter over one step with force and desired motion supplied
/// as functions of time (used standalone in tests; the closed-loop simulator
/// folds the same acceleration into its coupled state).
pub fn step_reference<FD, FF>(
    params: &AdmittanceParams,
    state: &ReferenceState,
    t: f64,
    dt: f64,
    desired: FD,
    force: FF,
) -> ReferenceState
where
    FD: Fn(f64) -> (Vector2<f64>, Vector2<f64>, Vector2<f64>),
    FF: Fn(f64) -> Vector2<f64>,
{
    let y0 = SVector::<f64, 4>::new(state.xr[0], state.xr[1], state.xr_dot[0], state.xr_dot[1]);
    let y1 = rk4_step(t, &y0, dt, |ts, y| {
        let xr = Vector2::new(y[0], y[1]);
        let xr_dot = Vector2::new(y[2], y[3]);
        let (xd, xd_dot, xd_ddot) = desired(ts);
        let acc = admittance_acceleration(params, &xr, &xr_dot, &xd, &xd_dot, &xd_ddot, &force(ts));
        SVector::<f64, 4>::new(y[2], y[3], acc[0], acc[1])
    });
    ReferenceState {
        xr: Vector2::new(y1[0], y1[1]),
        xr_dot: Vector2::new(y1[2], y1[3]),
    }
}
