//! Fixed-time constrained tracking controller.
//!
//! The position loop shapes a virtual velocity command (the stabilizing
//! function) through the barrier terms; the velocity loop adds linear plus
//! fixed-time polynomial feedback. Comparison baselines are obtained by
//! zeroing the fixed-time gains and, for the static-constraint baseline,
//! freezing the constraint schedule.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::barrier::{self, ConstraintProfile};
use crate::dynamics::CartesianCoefficients;
use crate::error::{Error, Result};

/// Exponent in (0,1) kept as a ratio of odd integers so fractional powers of
/// negative arguments stay well-defined through `signed_power`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OddRatio {
    pub num: u32,
    pub den: u32,
}

impl OddRatio {
    pub fn value(&self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num % 2 == 1 && self.den % 2 == 1 && self.num > 0 && self.num < self.den {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "exponent {}/{} must be odd/odd and inside (0,1)",
                self.num, self.den
            )))
        }
    }
}

/// sign(x)|x|^r: the odd extension of the real power to negative bases.
pub fn signed_power(x: f64, r: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(r)
    }
}

/// Gain set of the full controller. `k1..k3` are the diagonals of diagonal
/// gain matrices; `kappa1`, `theta1`, `theta2` act per axis in the position
/// loop; `k4`, `k5` drive the fixed-time weight adaptation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedTimeGains {
    pub kappa1: Vector2<f64>,
    pub theta1: Vector2<f64>,
    pub theta2: Vector2<f64>,
    pub k1: Vector2<f64>,
    pub k2: Vector2<f64>,
    pub k3: Vector2<f64>,
    pub k4: f64,
    pub k5: f64,
    pub pc: u32,
    pub qc: OddRatio,
}

impl Default for FixedTimeGains {
    fn default() -> Self {
        Self {
            kappa1: Vector2::new(5.0, 22.0),
            theta1: Vector2::new(10.0, 0.01),
            theta2: Vector2::new(20.0, 0.01),
            k1: Vector2::new(5.0, 22.0),
            k2: Vector2::new(100.0, 2000.0),
            k3: Vector2::new(200.0, 3000.0),
            k4: 0.001,
            k5: 0.001,
            pc: 3,
            qc: OddRatio { num: 99, den: 101 },
        }
    }
}

impl FixedTimeGains {
    pub fn pc_f(&self) -> f64 {
        f64::from(self.pc)
    }

    pub fn qc_f(&self) -> f64 {
        self.qc.value()
    }

    /// Checks the full-controller gain conditions. Variant-reduced copies
    /// produced by `ControllerVariant::effective_gains` intentionally bypass
    /// this (they zero some of the strictly-positive gains).
    pub fn validate(&self) -> Result<()> {
        self.qc.validate()?;
        if self.pc < 2 {
            return Err(Error::InvalidConfig(format!("pc = {} must exceed 1", self.pc)));
        }
        for i in 0..2 {
            if !(self.kappa1[i] > 0.0) {
                return Err(Error::InvalidConfig(format!("kappa1[{i}] must be positive")));
            }
            // The velocity-loop analysis needs k1 - I/2 positive definite.
            if !(self.k1[i] > 0.5) {
                return Err(Error::InvalidConfig(format!(
                    "k1[{i}] = {} must exceed 0.5",
                    self.k1[i]
                )));
            }
            // Zero fixed-time terms are valid: that is exactly the
            // simplified-baseline reduction of the controller.
            if self.k2[i] < 0.0 || self.k3[i] < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "k2[{i}], k3[{i}] must be nonnegative"
                )));
            }
            if self.theta1[i] < 0.0 || self.theta2[i] < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "theta1[{i}], theta2[{i}] must be nonnegative"
                )));
            }
        }
        if self.k4 < 0.0 || self.k5 < 0.0 {
            return Err(Error::InvalidConfig("k4, k5 must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Which controller the benchmark row runs. The baselines are reductions of
/// the full law so every row shares one code path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerVariant {
    /// Static constraints, no fixed-time terms.
    Iblf,
    /// Time-varying constraints, no fixed-time terms.
    Tviblf,
    /// Full fixed-time controller under time-varying constraints.
    FxtTviblf,
}

impl ControllerVariant {
    pub const ALL: [ControllerVariant; 3] =
        [ControllerVariant::Iblf, ControllerVariant::Tviblf, ControllerVariant::FxtTviblf];

    /// Gains actually applied for this variant: the baselines zero the
    /// fixed-time position terms (theta1, theta2) and velocity terms (k2, k3).
    pub fn effective_gains(&self, base: &FixedTimeGains) -> FixedTimeGains {
        match self {
            ControllerVariant::FxtTviblf => *base,
            ControllerVariant::Iblf | ControllerVariant::Tviblf => FixedTimeGains {
                theta1: Vector2::zeros(),
                theta2: Vector2::zeros(),
                k2: Vector2::zeros(),
                k3: Vector2::zeros(),
                ..*base
            },
        }
    }

    /// The static-constraint baseline holds the bounds at their start value.
    pub fn freezes_constraints(&self) -> bool {
        matches!(self, ControllerVariant::Iblf)
    }
}

impl fmt::Display for ControllerVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ControllerVariant::Iblf => "iblf",
            ControllerVariant::Tviblf => "tviblf",
            ControllerVariant::FxtTviblf => "fxt-tviblf",
        };
        f.write_str(name)
    }
}

impl FromStr for ControllerVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iblf" => Ok(ControllerVariant::Iblf),
            "tviblf" => Ok(ControllerVariant::Tviblf),
            "fxt-tviblf" | "fxt_tviblf" | "fxt" => Ok(ControllerVariant::FxtTviblf),
            other => Err(Error::InvalidConfig(format!(
                "unknown controller variant {other:?} (expected iblf, tviblf, or fxt-tviblf)"
            ))),
        }
    }
}

/// Tracking errors of the cascaded loops plus the reference needed to place
/// them inside the barrier (eta1 = z1 + xr).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorState {
    pub z1: Vector2<f64>,
    pub z2: Vector2<f64>,
    pub xr: Vector2<f64>,
}

impl ErrorState {
    pub fn new(
        x: &Vector2<f64>,
        xdot: &Vector2<f64>,
        xr: &Vector2<f64>,
        alpha: &Vector2<f64>,
    ) -> Self {
        Self { z1: x - xr, z2: xdot - alpha, xr: *xr }
    }

    pub fn eta1(&self) -> Vector2<f64> {
        self.z1 + self.xr
    }
}

/// Virtual velocity command for the position loop.
///
/// Each fixed-time damping term is built so that multiplying it by the
/// barrier gradient weight z1*kc^2/(kc^2 - eta1^2) collapses to
/// (z1^2 kc^2/(kc^2 - eta1^2))^p, the form the convergence analysis sums;
/// that requirement pins the gap exponents at pc-1 and qc-1.
pub fn stabilizing_alpha(
    z1: &Vector2<f64>,
    xr: &Vector2<f64>,
    xr_dot: &Vector2<f64>,
    profile: &ConstraintProfile,
    t: f64,
    gains: &FixedTimeGains,
) -> Result<Vector2<f64>> {
    let kc = profile.bound(t);
    let kc_dot = profile.bound_rate(t);
    let pc = gains.pc_f();
    let qc = gains.qc_f();
    let mut alpha = Vector2::zeros();
    for i in 0..2 {
        let rho = barrier::rho(z1[i], xr[i], kc[i]).map_err(|d| d.into_error(i + 1))?;
        let omega = barrier::omega(z1[i], xr[i], kc[i]).map_err(|d| d.into_error(i + 1))?;
        let eta1 = z1[i] + xr[i];
        let kc2 = kc[i] * kc[i];
        let gap = kc2 - eta1 * eta1;
        let damp_p = gains.theta1[i]
            * signed_power(z1[i], 2.0 * pc - 1.0)
            * kc[i].powf(2.0 * pc - 2.0)
            / gap.powf(pc - 1.0);
        let damp_q = gains.theta2[i]
            * signed_power(z1[i], 2.0 * qc - 1.0)
            * kc[i].powf(2.0 * qc - 2.0)
            / gap.powf(qc - 1.0);
        alpha[i] = gap * xr_dot[i] * rho / kc2 - gap * kc_dot[i] * omega / kc2
            + z1[i] * kc_dot[i] / kc[i]
            - damp_p
            - damp_q
            - gains.kappa1[i] * z1[i];
    }
    Ok(alpha)
}

/// Backward-difference memory for the stabilizing-function rate. The law
/// needs d(alpha)/dt but no closed form for it is practical, so the loop
/// differentiates the sampled alpha; the first call returns zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AlphaDifferentiator {
    prev: Option<(f64, Vector2<f64>)>,
}

impl AlphaDifferentiator {
    pub fn rate(&mut self, t: f64, alpha: &Vector2<f64>) -> Vector2<f64> {
        let rate = match self.prev {
            Some((t_prev, alpha_prev)) if t > t_prev => (alpha - alpha_prev) / (t - t_prev),
            _ => Vector2::zeros(),
        };
        self.prev = Some((t, *alpha));
        rate
    }

    pub fn reset(&mut self) {
        self.prev = None;
    }
}

/// Barrier, linear, and fixed-time feedback shared by both control laws.
fn feedback(
    err: &ErrorState,
    profile: &ConstraintProfile,
    t: f64,
    gains: &FixedTimeGains,
) -> Result<Vector2<f64>> {
    let kc = profile.bound(t);
    let pc = gains.pc_f();
    let qc = gains.qc_f();
    let scale_p = 2f64.powf(pc);
    let scale_q = 2f64.powf(qc);
    let mut u = Vector2::zeros();
    for i in 0..2 {
        let eta1 = err.z1[i] + err.xr[i];
        let gap = kc[i] * kc[i] - eta1 * eta1;
        if !(kc[i] > 0.0 && gap > 0.0) {
            return Err(Error::OutOfBarrier { axis: i + 1, value: eta1, bound: kc[i] });
        }
        u[i] = -kc[i] * kc[i] * err.z1[i] / gap
            - gains.k1[i] * err.z2[i]
            - gains.k2[i] * signed_power(err.z2[i], 2.0 * pc - 1.0) / scale_p
            - gains.k3[i] * signed_power(err.z2[i], 2.0 * qc - 1.0) / scale_q;
    }
    Ok(u)
}

/// Control force with the known-model feedforward. The disturbance wrench is
/// deliberately not compensated: it is the model uncertainty the benchmark
/// stresses, so only gravity, inertia, and Coriolis terms are fed forward.
#[allow(clippy::too_many_arguments)]
pub fn control_model_based(
    coeffs: &CartesianCoefficients,
    err: &ErrorState,
    alpha: &Vector2<f64>,
    alpha_dot: &Vector2<f64>,
    fe: &Vector2<f64>,
    profile: &ConstraintProfile,
    t: f64,
    gains: &FixedTimeGains,
) -> Result<Vector2<f64>> {
    let feedforward = coeffs.gx + coeffs.mx * alpha_dot + coeffs.cx * alpha;
    Ok(feedforward - fe + feedback(err, profile, t, gains)?)
}

/// Control force with the learned compensator replacing the model terms.
pub fn control_model_free(
    nn_output: &Vector2<f64>,
    err: &ErrorState,
    fe: &Vector2<f64>,
    profile: &ConstraintProfile,
    t: f64,
    gains: &FixedTimeGains,
) -> Result<Vector2<f64>> {
    Ok(-nn_output - fe + feedback(err, profile, t, gains)?)
}

/// Convergence-time bound T <= 1/(a*v*(pc-1)) + 1/(b*v*(1-qc)). Independent
/// of initial conditions by construction.
pub fn tmax_bound(alpha_coef: f64, beta_coef: f64, v: f64, pc: f64, qc: f64) -> Result<f64> {
    if !(alpha_coef > 0.0 && beta_coef > 0.0) {
        return Err(Error::Domain(format!(
            "rate coefficients must be positive (alpha = {alpha_coef}, beta = {beta_coef})"
        )));
    }
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::Domain(format!("v = {v} must lie in (0, 1]")));
    }
    if !(pc > 1.0 && qc > 0.0 && qc < 1.0) {
        return Err(Error::Domain(format!("exponents pc = {pc}, qc = {qc} out of range")));
    }
    Ok(1.0 / (alpha_coef * v * (pc - 1.0)) + 1.0 / (beta_coef * v * (1.0 - qc)))
}

/// Constants from the weight-error inequality
/// w_tilde * w_hat^qc <= n1*w^(qc+1) - n2*w_tilde^(qc+1).
pub fn lemma3_constants(qc: f64) -> (f64, f64) {
    let n1 = 1.0 / (1.0 + qc)
        * (1.0 - 2f64.powf(qc - 1.0)
            + qc / (1.0 + qc)
            + 2f64.powf(qc) * (1.0 - qc * qc) / (1.0 + qc));
    let n2 = (2f64.powf(qc) - 1.0) / (1.0 + qc) * (1.0 - 2f64.powf(qc * (qc - 1.0)));
    (n1, n2)
}

/// Decay rates and convergence-time bounds assembled from the gains, the
/// loop dimension, the node count, and a supremum of the largest inertia
/// eigenvalue over the reachable workspace.
#[derive(Clone, Copy, Debug)]
pub struct FixedTimeBudget {
    /// Per-subsystem decay rates: position p/q, velocity p/q, weights p/q.
    pub lambda: [f64; 6],
    pub alpha_model_based: f64,
    pub beta_model_based: f64,
    pub alpha_model_free: f64,
    pub beta_model_free: f64,
    pub tmax_model_based: f64,
    pub tmax_model_free: f64,
}

impl FixedTimeBudget {
    pub fn tmax(&self, model_free: bool) -> f64 {
        if model_free {
            self.tmax_model_free
        } else {
            self.tmax_model_based
        }
    }
}

/// Builds the decay-rate budget. `axes` is the Cartesian dimension (2 here),
/// `nodes` the per-axis hidden layer size, `mass_sup` an upper bound on the
/// largest eigenvalue of the task-space inertia over the reachable workspace.
pub fn assemble_fixed_time_bound(
    gains: &FixedTimeGains,
    axes: usize,
    nodes: usize,
    mass_sup: f64,
) -> Result<FixedTimeBudget> {
    gains.validate()?;
    let theta1_min = gains.theta1.min();
    let theta2_min = gains.theta2.min();
    if !(theta1_min > 0.0
        && theta2_min > 0.0
        && gains.k2.min() > 0.0
        && gains.k3.min() > 0.0
        && gains.k4 > 0.0
        && gains.k5 > 0.0)
    {
        return Err(Error::Domain(
            "fixed-time bound needs strictly positive theta1, theta2, k2, k3, k4, k5".into(),
        ));
    }
    if !(mass_sup > 0.0) {
        return Err(Error::Domain(format!("mass_sup = {mass_sup} must be positive")));
    }
    let pc = gains.pc_f();
    let qc = gains.qc_f();
    let n = axes as f64;
    let l = nodes as f64;
    // The weight-decay analysis applies the product inequality at exponent
    // 2qc - 1 (the power appearing in the adaptive law), so its constants are
    // evaluated there rather than at qc itself.
    let (_, n2) = lemma3_constants(2.0 * qc - 1.0);

    let lambda1 = theta1_min * n.powf(1.0 - pc);
    let lambda2 = theta2_min;
    let lambda3 = gains.k2.min() * n.powf(1.0 - pc) / mass_sup.powf(pc);
    let lambda4 = gains.k3.min() / mass_sup.powf(qc);
    let lambda5 = 2f64.powf(pc) * gains.k4 * l.powf(1.0 - pc) * n.powf(1.0 - pc);
    let lambda6 = 2f64.powf(qc) * gains.k5 * n2;

    let alpha_mb = 2f64.powf(1.0 - pc) * lambda1.min(lambda3);
    let beta_mb = lambda2.min(lambda4);
    let alpha_nn = 3f64.powf(1.0 - pc) * lambda1.min(lambda3).min(lambda5);
    let beta_nn = lambda2.min(lambda4).min(lambda6);

    Ok(FixedTimeBudget {
        lambda: [lambda1, lambda2, lambda3, lambda4, lambda5, lambda6],
        alpha_model_based: alpha_mb,
        beta_model_based: beta_mb,
        alpha_model_free: alpha_nn,
        beta_model_free: beta_nn,
        tmax_model_based: tmax_bound(alpha_mb, beta_mb, 1.0, pc, qc)?,
        tmax_model_free: tmax_bound(alpha_nn, beta_nn, 1.0, pc, qc)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Matrix2;
    use proptest::prelude::*;

    fn zero_coeffs() -> CartesianCoefficients {
        CartesianCoefficients {
            mx: Matrix2::zeros(),
            cx: Matrix2::zeros(),
            gx: Vector2::zeros(),
            fx: Vector2::zeros(),
        }
    }

    fn frozen_profile() -> ConstraintProfile {
        ConstraintProfile::default().frozen(0.0)
    }

    #[test]
    fn signed_power_reference_values() {
        assert_eq!(signed_power(-2.0, 3.0), -8.0);
        assert_eq!(signed_power(0.0, 97.0 / 101.0), 0.0);
        assert_relative_eq!(signed_power(4.0, 0.5), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn odd_ratio_validation() {
        assert!(OddRatio { num: 99, den: 101 }.validate().is_ok());
        assert!(OddRatio { num: 2, den: 3 }.validate().is_err());
        assert!(OddRatio { num: 3, den: 3 }.validate().is_err());
        assert!(OddRatio { num: 101, den: 99 }.validate().is_err());
        assert_relative_eq!(OddRatio { num: 99, den: 101 }.value(), 0.9801980198019802);
    }

    #[test]
    fn default_gains_pass_validation() {
        FixedTimeGains::default().validate().unwrap();
    }

    #[test]
    fn undersized_velocity_gain_is_rejected() {
        let mut g = FixedTimeGains::default();
        g.k1[0] = 0.4;
        assert!(g.validate().is_err());
    }

    #[test]
    fn variant_reduction_zeroes_only_the_fixed_time_terms() {
        let base = FixedTimeGains::default();
        for variant in [ControllerVariant::Iblf, ControllerVariant::Tviblf] {
            let g = variant.effective_gains(&base);
            assert_eq!(g.theta1, Vector2::zeros());
            assert_eq!(g.theta2, Vector2::zeros());
            assert_eq!(g.k2, Vector2::zeros());
            assert_eq!(g.k3, Vector2::zeros());
            assert_eq!(g.kappa1, base.kappa1);
            assert_eq!(g.k1, base.k1);
        }
        assert_eq!(ControllerVariant::FxtTviblf.effective_gains(&base), base);
        assert!(ControllerVariant::Iblf.freezes_constraints());
        assert!(!ControllerVariant::Tviblf.freezes_constraints());
        assert!(!ControllerVariant::FxtTviblf.freezes_constraints());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in ControllerVariant::ALL {
            assert_eq!(v.to_string().parse::<ControllerVariant>().unwrap(), v);
        }
        assert_eq!("fxt".parse::<ControllerVariant>().unwrap(), ControllerVariant::FxtTviblf);
        assert!("pid".parse::<ControllerVariant>().is_err());
    }

    #[test]
    fn alpha_vanishes_without_drive_terms() {
        let gains = FixedTimeGains::default();
        let alpha = stabilizing_alpha(
            &Vector2::zeros(),
            &Vector2::new(0.1, -0.2),
            &Vector2::zeros(),
            &frozen_profile(),
            3.0,
            &gains,
        )
        .unwrap();
        assert_eq!(alpha, Vector2::zeros());
    }

    #[test]
    fn alpha_reduces_to_the_baseline_form_without_fixed_time_gains() {
        let gains = ControllerVariant::Tviblf.effective_gains(&FixedTimeGains::default());
        let profile = frozen_profile();
        let z1 = Vector2::new(0.05, -0.08);
        let xr = Vector2::new(0.12, 0.1);
        let xr_dot = Vector2::new(0.3, -0.2);
        let alpha = stabilizing_alpha(&z1, &xr, &xr_dot, &profile, 0.0, &gains).unwrap();
        let kc = profile.bound(0.0);
        for i in 0..2 {
            let eta1 = z1[i] + xr[i];
            let gap = kc[i] * kc[i] - eta1 * eta1;
            let rho = barrier::rho(z1[i], xr[i], kc[i]).unwrap();
            let expected = gap * xr_dot[i] * rho / (kc[i] * kc[i]) - gains.kappa1[i] * z1[i];
            assert_relative_eq!(alpha[i], expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn fixed_time_alpha_terms_are_restoring() {
        let base = FixedTimeGains::default();
        let reduced = ControllerVariant::Tviblf.effective_gains(&base);
        let profile = frozen_profile();
        let xr = Vector2::new(0.1, 0.1);
        for &s in &[1.0, -1.0] {
            let z1 = Vector2::new(0.06 * s, 0.11 * s);
            let full = stabilizing_alpha(&z1, &xr, &Vector2::zeros(), &profile, 0.0, &base)
                .unwrap();
            let bare = stabilizing_alpha(&z1, &xr, &Vector2::zeros(), &profile, 0.0, &reduced)
                .unwrap();
            for i in 0..2 {
                // The extra damping must pull against the sign of z1.
                assert!((full[i] - bare[i]) * z1[i] < 0.0);
            }
        }
    }

    #[test]
    fn alpha_rate_handles_first_step_and_ramps() {
        let mut diff = AlphaDifferentiator::default();
        assert_eq!(diff.rate(0.0, &Vector2::new(1.0, 2.0)), Vector2::zeros());
        assert_eq!(diff.rate(0.001, &Vector2::new(1.0, 2.0)), Vector2::zeros());
        let r = diff.rate(0.002, &Vector2::new(1.001, 2.0));
        assert_relative_eq!(r[0], 1.0, epsilon = 1e-9);
        assert_eq!(r[1], 0.0);
    }

    #[test]
    fn alpha_rate_tracks_a_smooth_signal() {
        let dt = 1e-3;
        let mut diff = AlphaDifferentiator::default();
        let mut worst: f64 = 0.0;
        for k in 0..=1000 {
            let t = k as f64 * dt;
            let rate = diff.rate(t, &Vector2::new(t.sin(), 0.0));
            if k > 0 {
                worst = worst.max((rate[0] - t.cos()).abs());
            }
        }
        assert!(worst < 1e-3, "backward difference error {worst}");
    }

    #[test]
    fn model_based_control_is_zero_at_rest() {
        let err = ErrorState { z1: Vector2::zeros(), z2: Vector2::zeros(), xr: Vector2::zeros() };
        let u = control_model_based(
            &zero_coeffs(),
            &err,
            &Vector2::zeros(),
            &Vector2::zeros(),
            &Vector2::zeros(),
            &frozen_profile(),
            0.0,
            &FixedTimeGains::default(),
        )
        .unwrap();
        assert_eq!(u, Vector2::zeros());
    }

    #[test]
    fn velocity_error_channel_matches_its_printed_form() {
        let gains = FixedTimeGains::default();
        let z2 = Vector2::new(0.3, -0.7);
        let err = ErrorState { z1: Vector2::zeros(), z2, xr: Vector2::zeros() };
        let u = control_model_based(
            &zero_coeffs(),
            &err,
            &Vector2::zeros(),
            &Vector2::zeros(),
            &Vector2::zeros(),
            &frozen_profile(),
            0.0,
            &gains,
        )
        .unwrap();
        let pc = gains.pc_f();
        let qc = gains.qc_f();
        for i in 0..2 {
            let expected = -gains.k1[i] * z2[i]
                - gains.k2[i] * signed_power(z2[i], 2.0 * pc - 1.0) / 2f64.powf(pc)
                - gains.k3[i] * signed_power(z2[i], 2.0 * qc - 1.0) / 2f64.powf(qc);
            assert_relative_eq!(u[i], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn external_force_feeds_through_negated() {
        let gains = FixedTimeGains::default();
        let err = ErrorState {
            z1: Vector2::new(0.02, -0.01),
            z2: Vector2::new(0.1, 0.2),
            xr: Vector2::new(0.1, 0.05),
        };
        let profile = frozen_profile();
        let fe = Vector2::new(2.0, 4.0);
        let with = control_model_based(
            &zero_coeffs(), &err, &Vector2::zeros(), &Vector2::zeros(), &fe, &profile, 0.0,
            &gains,
        )
        .unwrap();
        let without = control_model_based(
            &zero_coeffs(), &err, &Vector2::zeros(), &Vector2::zeros(), &Vector2::zeros(),
            &profile, 0.0, &gains,
        )
        .unwrap();
        assert_eq!(with - without, -fe);
    }

    #[test]
    fn model_free_law_matches_model_based_when_the_net_reproduces_the_model() {
        let coeffs = CartesianCoefficients {
            mx: Matrix2::new(0.4, 0.1, 0.1, 0.2),
            cx: Matrix2::new(0.0, -0.3, 0.3, 0.1),
            gx: Vector2::new(5.0, 2.0),
            fx: Vector2::new(7.0, -7.0),
        };
        let err = ErrorState {
            z1: Vector2::new(0.03, -0.02),
            z2: Vector2::new(-0.4, 0.6),
            xr: Vector2::new(0.15, -0.1),
        };
        let alpha = Vector2::new(0.2, -0.5);
        let alpha_dot = Vector2::new(1.0, 0.7);
        let fe = Vector2::new(1.0, 2.0);
        let profile = frozen_profile();
        let gains = FixedTimeGains::default();
        let u_model = control_model_based(
            &coeffs, &err, &alpha, &alpha_dot, &fe, &profile, 4.0, &gains,
        )
        .unwrap();
        let nn_output = -(coeffs.gx + coeffs.mx * alpha_dot + coeffs.cx * alpha);
        let u_free =
            control_model_free(&nn_output, &err, &fe, &profile, 4.0, &gains).unwrap();
        assert_relative_eq!((u_model - u_free).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn barrier_feedback_diverges_towards_the_bound() {
        let gains = FixedTimeGains::default();
        let profile = frozen_profile();
        let kc = profile.bound(0.0)[0];
        let mut last = 0.0;
        for k in 1..=8 {
            let eta1 = kc * (1.0 - 10f64.powi(-k));
            let err = ErrorState {
                z1: Vector2::new(eta1, 0.0),
                z2: Vector2::zeros(),
                xr: Vector2::zeros(),
            };
            let u = control_model_free(
                &Vector2::zeros(), &err, &Vector2::zeros(), &profile, 0.0, &gains,
            )
            .unwrap();
            assert!(u[0].abs() > last);
            last = u[0].abs();
        }
        assert!(last > 1e6);
    }

    #[test]
    fn feedback_outside_the_bound_is_rejected() {
        let gains = FixedTimeGains::default();
        let profile = frozen_profile();
        let err = ErrorState {
            z1: Vector2::new(0.0, 0.6),
            z2: Vector2::zeros(),
            xr: Vector2::zeros(),
        };
        let e = control_model_free(
            &Vector2::zeros(), &err, &Vector2::zeros(), &profile, 0.0, &gains,
        )
        .unwrap_err();
        assert!(matches!(e, Error::OutOfBarrier { axis: 2, .. }));
    }

    #[test]
    fn time_bound_reference_values() {
        let qc = 99.0 / 101.0;
        assert_relative_eq!(tmax_bound(1.0, 1.0, 1.0, 3.0, qc).unwrap(), 51.0, epsilon = 1e-12);
        assert_relative_eq!(tmax_bound(2.0, 2.0, 1.0, 3.0, qc).unwrap(), 25.5, epsilon = 1e-12);
        assert!(tmax_bound(1.0, 1.0, 1.0, 3.0, 0.999999).unwrap() > 1e5);
        assert!(tmax_bound(0.0, 1.0, 1.0, 3.0, qc).is_err());
        assert!(tmax_bound(1.0, 1.0, 1.5, 3.0, qc).is_err());
        assert!(tmax_bound(1.0, 1.0, 1.0, 0.5, qc).is_err());
    }

    #[test]
    fn weight_inequality_constants_are_positive() {
        let (n1, n2) = lemma3_constants(99.0 / 101.0);
        assert_relative_eq!(n1, 0.27659, max_relative = 1e-3);
        assert_relative_eq!(n2, 6.561e-3, max_relative = 1e-2);
        assert!(n1 > 0.0 && n2 > 0.0);
    }

    #[test]
    fn assembled_budget_is_positive_and_ordered() {
        let gains = FixedTimeGains::default();
        let budget = assemble_fixed_time_bound(&gains, 2, 8, 0.6).unwrap();
        for l in budget.lambda {
            assert!(l > 0.0);
        }
        assert!(budget.tmax_model_based.is_finite() && budget.tmax_model_based > 0.0);
        // Adding the weight subsystem can only slow the guaranteed rate.
        assert!(budget.tmax_model_free >= budget.tmax_model_based);
        assert_eq!(budget.tmax(false), budget.tmax_model_based);
        assert_eq!(budget.tmax(true), budget.tmax_model_free);
    }

    #[test]
    fn budget_requires_strictly_positive_fixed_time_gains() {
        let gains = ControllerVariant::Tviblf.effective_gains(&FixedTimeGains::default());
        assert!(assemble_fixed_time_bound(&gains, 2, 8, 0.6).is_err());
    }

    proptest! {
        #[test]
        fn signed_power_is_odd_and_extends_the_real_power(
            x in -50.0_f64..50.0,
            r in 0.1_f64..5.0,
        ) {
            let sp = signed_power(x, r);
            prop_assert!((sp + signed_power(-x, r)).abs() < 1e-12 * sp.abs().max(1.0));
            if x >= 0.0 {
                prop_assert_eq!(sp, x.powf(r));
            }
        }

        #[test]
        fn feedback_is_odd_in_the_errors(
            e1 in -0.3_f64..0.3,
            e2 in -0.3_f64..0.3,
            v1 in -2.0_f64..2.0,
            v2 in -2.0_f64..2.0,
        ) {
            // With a centered reference, negating the errors negates the
            // feedback-only control exactly.
            let gains = FixedTimeGains::default();
            let profile = frozen_profile();
            let err = ErrorState {
                z1: Vector2::new(e1, e2),
                z2: Vector2::new(v1, v2),
                xr: Vector2::zeros(),
            };
            let neg = ErrorState { z1: -err.z1, z2: -err.z2, xr: Vector2::zeros() };
            let u = control_model_free(
                &Vector2::zeros(), &err, &Vector2::zeros(), &profile, 0.0, &gains,
            ).unwrap();
            let u_neg = control_model_free(
                &Vector2::zeros(), &neg, &Vector2::zeros(), &profile, 0.0, &gains,
            ).unwrap();
            prop_assert!((u + u_neg).norm() < 1e-12 * u.norm().max(1.0));
        }
    }
}
