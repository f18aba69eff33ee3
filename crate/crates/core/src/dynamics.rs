//! Rigid-body model of the planar two-link manipulator and its Cartesian-space form.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Jacobian determinants below this magnitude are treated as singular.
pub const SINGULARITY_EPS: f64 = 1e-8;

/// Link masses (kg), link lengths (m), and gravitational acceleration (m/s^2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub g: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self { m1: 1.5, m2: 1.0, l1: 0.3, l2: 0.3, g: 9.81 }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m1", self.m1), ("m2", self.m2), ("l1", self.l1), ("l2", self.l2)] {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!("robot.{name} must be positive, got {v}")));
            }
        }
        if !self.g.is_finite() {
            return Err(Error::InvalidConfig(format!("robot.g must be finite, got {}", self.g)));
        }
        Ok(())
    }
}

/// Joint positions and velocities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantState {
    pub q: Vector2<f64>,
    pub qd: Vector2<f64>,
}

/// Task-space dynamics blocks: Mx*xdd + Cx*xd + Gx + Fx = fc + fe.
#[derive(Clone, Copy, Debug)]
pub struct CartesianCoefficients {
    pub mx: Matrix2<f64>,
    pub cx: Matrix2<f64>,
    pub gx: Vector2<f64>,
    pub fx: Vector2<f64>,
}

/// Symmetric positive-definite joint-space inertia matrix.
pub fn mass_matrix(p: &RobotParams, q: &Vector2<f64>) -> Matrix2<f64> {
    let c2 = q[1].cos();
    let m22 = p.m2 * p.l2 * p.l2;
    let coupling = p.m2 * p.l1 * p.l2 * c2;
    let m11 = m22 + 2.0 * coupling + (p.m1 + p.m2) * p.l1 * p.l1;
    let m12 = m22 + coupling;
    Matrix2::new(m11, m12, m12, m22)
}

/// Coriolis/centrifugal matrix in the Christoffel form, so that
/// d(M)/dt - 2C is skew-symmetric and C*qd reproduces the expanded
/// velocity-product torques.
pub fn coriolis_matrix(p: &RobotParams, q: &Vector2<f64>, qd: &Vector2<f64>) -> Matrix2<f64> {
    let h = p.m2 * p.l1 * p.l2 * q[1].sin();
    Matrix2::new(-h * qd[1], -h * (qd[0] + qd[1]), h * qd[0], 0.0)
}

/// Joint-space gravity torque.
pub fn gravity_vector(p: &RobotParams, q: &Vector2<f64>) -> Vector2<f64> {
    let c1 = q[0].cos();
    let c12 = (q[0] + q[1]).cos();
    let elbow = p.m2 * p.l2 * p.g * c12;
    Vector2::new(elbow + (p.m1 + p.m2) * p.l1 * p.g * c1, elbow)
}

/// Unmodeled joint disturbance torque. Equal and opposite across the two
/// joints by construction.
pub fn disturbance_vector(q: &Vector2<f64>) -> Vector2<f64> {
    let c1 = q[0].cos();
    let s2 = q[1].sin();
    let f1 = 4.0 * c1 * s2 + 6.0 * c1 * c1 - 2.0;
    Vector2::new(f1, -f1)
}

/// End-effector position in the base frame.
pub fn forward_kinematics(p: &RobotParams, q: &Vector2<f64>) -> Vector2<f64> {
    let (s1, c1) = q[0].sin_cos();
    let (s12, c12) = (q[0] + q[1]).sin_cos();
    Vector2::new(p.l1 * c1 + p.l2 * c12, p.l1 * s1 + p.l2 * s12)
}

/// Geometric Jacobian of the forward kinematics.
pub fn jacobian(p: &RobotParams, q: &Vector2<f64>) -> Matrix2<f64> {
    let (s1, c1) = q[0].sin_cos();
    let (s12, c12) = (q[0] + q[1]).sin_cos();
    Matrix2::new(
        -p.l1 * s1 - p.l2 * s12,
        -p.l2 * s12,
        p.l1 * c1 + p.l2 * c12,
        p.l2 * c12,
    )
}

/// Element-wise time derivative of the Jacobian along qd.
pub fn jacobian_dot(p: &RobotParams, q: &Vector2<f64>, qd: &Vector2<f64>) -> Matrix2<f64> {
    let (s1, c1) = q[0].sin_cos();
    let (s12, c12) = (q[0] + q[1]).sin_cos();
    let w = qd[0] + qd[1];
    Matrix2::new(
        -p.l1 * c1 * qd[0] - p.l2 * c12 * w,
        -p.l2 * c12 * w,
        -p.l1 * s1 * qd[0] - p.l2 * s12 * w,
        -p.l2 * s12 * w,
    )
}

/// Task-space dynamics blocks at the given joint state.
///
/// Fails when the configuration is within `SINGULARITY_EPS` of a kinematic
/// singularity; the transform needs the Jacobian inverse.
pub fn cartesian_coefficients(
    p: &RobotParams,
    q: &Vector2<f64>,
    qd: &Vector2<f64>,
) -> Result<CartesianCoefficients> {
    let j = jacobian(p, q);
    let det = j.determinant();
    if det.abs() < SINGULARITY_EPS {
        return Err(Error::SingularJacobian { det, q1: q[0], q2: q[1] });
    }
    let j_inv = Matrix2::new(j[(1, 1)], -j[(0, 1)], -j[(1, 0)], j[(0, 0)]) / det;
    let j_inv_t = j_inv.transpose();

    let m = mass_matrix(p, q);
    let c = coriolis_matrix(p, q, qd);
    let jd = jacobian_dot(p, q, qd);

    Ok(CartesianCoefficients {
        mx: j_inv_t * m * j_inv,
        cx: j_inv_t * (c - m * j_inv * jd) * j_inv,
        gx: j_inv_t * gravity_vector(p, q),
        fx: j_inv_t * disturbance_vector(q),
    })
}

/// Joint acceleration from the equation of motion,
/// qdd = M^{-1}(tau_c + tau_e - C*qd - G - F).
pub fn plant_acceleration(
    p: &RobotParams,
    q: &Vector2<f64>,
    qd: &Vector2<f64>,
    tau_c: &Vector2<f64>,
    tau_e: &Vector2<f64>,
) -> Vector2<f64> {
    let rhs = tau_c + tau_e
        - coriolis_matrix(p, q, qd) * qd
        - gravity_vector(p, q)
        - disturbance_vector(q);
    let m = mass_matrix(p, q);
    // det(M) = m2*l1^2*l2^2*(m1 + m2*sin^2 q2) > 0, so M is always invertible.
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    Vector2::new(
        (m[(1, 1)] * rhs[0] - m[(0, 1)] * rhs[1]) / det,
        (m[(0, 0)] * rhs[1] - m[(1, 0)] * rhs[0]) / det,
    )
}

/// Largest eigenvalue of a symmetric 2x2 matrix.
pub fn sym_eigen_max(m: &Matrix2<f64>) -> f64 {
    let tr = m[(0, 0)] + m[(1, 1)];
    let gap = m[(0, 0)] - m[(1, 1)];
    let disc = (gap * gap + 4.0 * m[(0, 1)] * m[(1, 0)]).max(0.0).sqrt();
    0.5 * (tr + disc)
}

/// Smallest eigenvalue of a symmetric 2x2 matrix.
pub fn sym_eigen_min(m: &Matrix2<f64>) -> f64 {
    let tr = m[(0, 0)] + m[(1, 1)];
    let gap = m[(0, 0)] - m[(1, 1)];
    let disc = (gap * gap + 4.0 * m[(0, 1)] * m[(1, 0)]).max(0.0).sqrt();
    0.5 * (tr - disc)
}

/// Deterministic grid supremum of lambda_max(Mx) over the admissible
/// workspace: joint configurations whose end-effector lies within the
/// per-axis position bounds and whose Jacobian determinant stays above
/// `det_floor`. Independent of any particular trajectory, so the
/// settling-time bound assembled from it does not vary with initial
/// conditions. The floor excludes the fold singularity that would push the
/// true supremum to infinity; callers should verify simulated trajectories
/// respect the same floor.
pub fn mass_eigen_sup_over_workspace(
    p: &RobotParams,
    bound_max: &Vector2<f64>,
    det_floor: f64,
    grid_n: usize,
) -> f64 {
    let mut sup = 0.0_f64;
    let step = 2.0 * std::f64::consts::PI / grid_n as f64;
    for i in 0..grid_n {
        let q1 = -std::f64::consts::PI + i as f64 * step;
        for j in 0..grid_n {
            let q2 = -std::f64::consts::PI + j as f64 * step;
            let q = Vector2::new(q1, q2);
            let x = forward_kinematics(p, &q);
            if x[0].abs() > bound_max[0] || x[1].abs() > bound_max[1] {
                continue;
            }
            if jacobian(p, &q).determinant().abs() < det_floor {
                continue;
            }
            if let Ok(coeffs) = cartesian_coefficients(p, &q, &Vector2::zeros()) {
                sup = sup.max(sym_eigen_max(&coeffs.mx));
            }
        }
    }
    sup
}
