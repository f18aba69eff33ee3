//! Time-varying position constraints and the integral barrier functional.
//!
//! The barrier functional for one axis is
//!     V1(z1) = integral_0^z1  d * kc^2 / (kc^2 - (d + xr)^2)  dd
//! which is finite only while the absolute position eta1 = z1 + xr and the
//! reference xr both stay strictly inside the moving bound kc. The closed
//! forms below were obtained by direct antidifferentiation; the randomized
//! check suite cross-validates them against adaptive quadrature.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this |z1| the rho/omega/V1 expressions switch to their analytic
/// z1 -> 0 limits to avoid 0/0 evaluation.
pub const LIMIT_BRANCH_EPS: f64 = 1e-8;

/// One axis of the constraint schedule: bound(t) = |offset + amplitude*cos(omega*t + phase)|.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundWave {
    pub offset: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

impl BoundWave {
    fn raw(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (self.omega * t + self.phase).cos()
    }

    pub fn bound(&self, t: f64) -> f64 {
        self.raw(t).abs()
    }

    pub fn bound_rate(&self, t: f64) -> f64 {
        let d_raw = -self.amplitude * self.omega * (self.omega * t + self.phase).sin();
        self.raw(t).signum() * d_raw
    }
}

/// Per-axis symmetric position constraints |x_i(t)| < bound_i(t).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintProfile {
    pub axis1: BoundWave,
    pub axis2: BoundWave,
}

impl Default for ConstraintProfile {
    fn default() -> Self {
        // Benchmark schedule: axis 1 swings in [0.38, 0.58] m, axis 2 is the
        // magnitude of a negative-offset wave, 0.48 - 0.1*sin(0.2 t).
        Self {
            axis1: BoundWave {
                offset: 0.48,
                amplitude: 0.1,
                omega: 0.2,
                phase: -std::f64::consts::FRAC_PI_3,
            },
            axis2: BoundWave {
                offset: -0.48,
                amplitude: 0.1,
                omega: 0.2,
                phase: -std::f64::consts::FRAC_PI_2,
            },
        }
    }
}

impl ConstraintProfile {
    pub fn bound(&self, t: f64) -> Vector2<f64> {
        Vector2::new(self.axis1.bound(t), self.axis2.bound(t))
    }

    pub fn bound_rate(&self, t: f64) -> Vector2<f64> {
        Vector2::new(self.axis1.bound_rate(t), self.axis2.bound_rate(t))
    }

    /// Constant profile holding the bounds of this one at time `t0`.
    pub fn frozen(&self, t0: f64) -> Self {
        let freeze = |b: f64| BoundWave { offset: b, amplitude: 0.0, omega: 0.0, phase: 0.0 };
        Self { axis1: freeze(self.axis1.bound(t0)), axis2: freeze(self.axis2.bound(t0)) }
    }

    /// Largest bound each axis reaches (used to delimit the reachable workspace).
    pub fn bound_sup(&self) -> Vector2<f64> {
        Vector2::new(
            self.axis1.offset.abs() + self.axis1.amplitude.abs(),
            self.axis2.offset.abs() + self.axis2.amplitude.abs(),
        )
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        for (axis, wave) in [(1usize, &self.axis1), (2, &self.axis2)] {
            let floor = wave.offset.abs() - wave.amplitude.abs();
            if !(floor > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "constraint axis {axis} can reach zero width (|offset| - |amplitude| = {floor})"
                )));
            }
            for k in 0..=2000 {
                let t = horizon * k as f64 / 2000.0;
                if !(wave.bound(t) > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "constraint axis {axis} is non-positive at t = {t}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Inputs that fell outside the open barrier domain |eta1| < kc, |xr| < kc.
#[derive(Clone, Copy, Debug)]
pub struct BarrierDomain {
    pub eta1: f64,
    pub xr: f64,
    pub kc: f64,
}

impl BarrierDomain {
    /// Attach the axis index for the top-level error type.
    pub fn into_error(self, axis: usize) -> Error {
        let value = if self.eta1.abs() >= self.kc { self.eta1 } else { self.xr };
        Error::OutOfBarrier { axis, value, bound: self.kc }
    }
}

fn check_domain(z1: f64, xr: f64, kc: f64) -> std::result::Result<f64, BarrierDomain> {
    let eta1 = z1 + xr;
    if kc > 0.0 && xr.abs() < kc && eta1.abs() < kc {
        Ok(eta1)
    } else {
        Err(BarrierDomain { eta1, xr, kc })
    }
}

/// Closed-form value of the barrier integral for one axis.
pub fn v1_value(z1: f64, xr: f64, kc: f64) -> std::result::Result<f64, BarrierDomain> {
    let eta1 = check_domain(z1, xr, kc)?;
    let kc2 = kc * kc;
    if z1.abs() < LIMIT_BRANCH_EPS {
        // Leading-order quadratic of the integral near z1 = 0.
        return Ok(0.5 * z1 * z1 * kc2 / (kc2 - xr * xr));
    }
    let gap_r = kc2 - xr * xr;
    let gap_e = kc2 - eta1 * eta1;
    let log_sym = (((kc + eta1) * (kc - xr)) / ((kc - eta1) * (kc + xr))).ln();
    Ok(kc2 * (0.5 * (gap_r / gap_e).ln() - xr / (2.0 * kc) * log_sym))
}

/// Reference-velocity coefficient of the stabilizing function; equals the
/// z1-average of kc^2/(kc^2 - u^2) between xr and eta1.
pub fn rho(z1: f64, xr: f64, kc: f64) -> std::result::Result<f64, BarrierDomain> {
    let eta1 = check_domain(z1, xr, kc)?;
    let kc2 = kc * kc;
    if z1.abs() < LIMIT_BRANCH_EPS {
        return Ok(kc2 / (kc2 - xr * xr));
    }
    let log_sym = (((kc + eta1) * (kc - xr)) / ((kc - eta1) * (kc + xr))).ln();
    Ok(kc / (2.0 * z1) * log_sym)
}

/// Bound-rate coefficient of the stabilizing function.
pub fn omega(z1: f64, xr: f64, kc: f64) -> std::result::Result<f64, BarrierDomain> {
    let eta1 = check_domain(z1, xr, kc)?;
    let kc2 = kc * kc;
    if z1.abs() < LIMIT_BRANCH_EPS {
        return Ok((xr * xr - 3.0 * xr * kc) / (kc2 - xr * xr));
    }
    let gap_r = kc2 - xr * xr;
    let gap_e = kc2 - eta1 * eta1;
    let log_gap = (gap_e / gap_r).ln();
    Ok(-xr * kc / gap_e + (kc / z1) * log_gap - xr / (2.0 * z1) * log_gap)
}

/// Sum of the per-axis barrier values; `axis` indices start at 1 in errors.
pub fn v1_total(z1: &Vector2<f64>, xr: &Vector2<f64>, kc: &Vector2<f64>) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..2 {
        total += v1_value(z1[i], xr[i], kc[i]).map_err(|d| d.into_error(i + 1))?;
    }
    Ok(total)
}
