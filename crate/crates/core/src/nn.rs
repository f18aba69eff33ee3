//! Per-axis Gaussian radial basis function compensators.
//!
//! Each Cartesian axis owns an independent weight vector over a shared set
//! of hidden nodes. The network input stacks joint positions, joint
//! velocities, the stabilizing function, and its rate. Node centers are
//! configured as scalars replicated across all input dimensions.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::control::{signed_power, FixedTimeGains};
use crate::error::{Error, Result};

/// Network input: [q1, q2, qd1, qd2, alpha1, alpha2, alpha_dot1, alpha_dot2].
pub const INPUT_DIM: usize = 8;

/// Weight update rule used while the loop runs model-free.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdaptationLaw {
    /// Gradient term plus two signed-power decay terms.
    FixedTime,
    /// Gradient term with linear weight decay (sigma modification).
    Traditional,
}

/// Hidden layer geometry and the traditional-law constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbfConfig {
    /// One scalar per node, replicated across all input dimensions.
    pub centers: Vec<f64>,
    /// Gaussian width B shared by every node.
    pub width: f64,
    pub traditional_rate: f64,
    pub traditional_sigma: f64,
}

impl Default for RbfConfig {
    fn default() -> Self {
        Self {
            centers: vec![-25.0, -15.0, -5.0, -1.0, 1.0, 5.0, 15.0, 25.0],
            width: 40.0,
            traditional_rate: 1.0,
            // Strong enough leak that the two baseline variants' weight
            // histories stay anchored to the current error instead of
            // drifting apart after their different startup transients.
            traditional_sigma: 1e-2,
        }
    }
}

impl RbfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one node".into()));
        }
        if !(self.width > 0.0) {
            return Err(Error::InvalidConfig(format!("width = {} must be positive", self.width)));
        }
        if !(self.traditional_rate > 0.0) || self.traditional_sigma < 0.0 {
            return Err(Error::InvalidConfig(
                "traditional law needs rate > 0 and sigma >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Stacks the controller signals into the network input vector.
pub fn nn_input(
    q: &Vector2<f64>,
    qd: &Vector2<f64>,
    alpha: &Vector2<f64>,
    alpha_dot: &Vector2<f64>,
) -> [f64; INPUT_DIM] {
    [q[0], q[1], qd[0], qd[1], alpha[0], alpha[1], alpha_dot[0], alpha_dot[1]]
}

#[derive(Clone, Debug, PartialEq)]
pub struct RbfNetwork {
    centers: Vec<f64>,
    width: f64,
    /// Per-axis weight vectors, zero-initialized.
    pub weights: [Vec<f64>; 2],
}

impl RbfNetwork {
    pub fn new(config: &RbfConfig) -> Result<Self> {
        config.validate()?;
        let l = config.centers.len();
        Ok(Self {
            centers: config.centers.clone(),
            width: config.width,
            weights: [vec![0.0; l], vec![0.0; l]],
        })
    }

    pub fn node_count(&self) -> usize {
        self.centers.len()
    }

    /// Gaussian activations exp(-(z - c_j*1)^T (z - c_j*1) / B^2), each in (0, 1].
    pub fn basis(&self, z: &[f64; INPUT_DIM]) -> Vec<f64> {
        let b2 = self.width * self.width;
        self.centers
            .iter()
            .map(|&c| {
                let dist2: f64 = z.iter().map(|&zk| (zk - c) * (zk - c)).sum();
                (-dist2 / b2).exp()
            })
            .collect()
    }

    /// Per-axis compensator estimate: dot of each weight vector with the basis.
    pub fn output(&self, basis: &[f64]) -> Vector2<f64> {
        debug_assert_eq!(basis.len(), self.node_count());
        let dot = |w: &[f64]| w.iter().zip(basis).map(|(wi, si)| wi * si).sum::<f64>();
        Vector2::new(dot(&self.weights[0]), dot(&self.weights[1]))
    }

    pub fn evaluate(&self, z: &[f64; INPUT_DIM]) -> (Vec<f64>, Vector2<f64>) {
        let basis = self.basis(z);
        let out = self.output(&basis);
        (basis, out)
    }

    /// Forward-Euler step of the fixed-time law
    /// dw_ij/dt = s_j*z2_i - k4*sp(w_ij, 2pc-1) - k5*sp(w_ij, 2qc-1).
    pub fn update_fixed_time(
        &mut self,
        basis: &[f64],
        z2: &Vector2<f64>,
        dt: f64,
        gains: &FixedTimeGains,
    ) {
        let ep = 2.0 * gains.pc_f() - 1.0;
        let eq = 2.0 * gains.qc_f() - 1.0;
        for i in 0..2 {
            for (w, &s) in self.weights[i].iter_mut().zip(basis) {
                let dw = s * z2[i] - gains.k4 * signed_power(*w, ep) - gains.k5 * signed_power(*w, eq);
                *w += dt * dw;
            }
        }
    }

    /// Forward-Euler step of the sigma-modification law
    /// dw_ij/dt = rate*(s_j*z2_i - sigma*w_ij).
    pub fn update_traditional(
        &mut self,
        basis: &[f64],
        z2: &Vector2<f64>,
        dt: f64,
        rate: f64,
        sigma: f64,
    ) {
        for i in 0..2 {
            for (w, &s) in self.weights[i].iter_mut().zip(basis) {
                *w += dt * rate * (s * z2[i] - sigma * *w);
            }
        }
    }

    /// Dispatches one Euler step of the configured law.
    pub fn update(
        &mut self,
        law: AdaptationLaw,
        basis: &[f64],
        z2: &Vector2<f64>,
        dt: f64,
        gains: &FixedTimeGains,
        config: &RbfConfig,
    ) {
        match law {
            AdaptationLaw::FixedTime => self.update_fixed_time(basis, z2, dt, gains),
            AdaptationLaw::Traditional => self.update_traditional(
                basis,
                z2,
                dt,
                config.traditional_rate,
                config.traditional_sigma,
            ),
        }
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.weights
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, w| acc.max(w.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn net() -> RbfNetwork {
        RbfNetwork::new(&RbfConfig::default()).unwrap()
    }

    #[test]
    fn default_config_builds_a_zero_network() {
        let n = net();
        assert_eq!(n.node_count(), 8);
        assert_eq!(n.output(&n.basis(&[0.3; INPUT_DIM])), Vector2::zeros());
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut c = RbfConfig::default();
        c.width = 0.0;
        assert!(RbfNetwork::new(&c).is_err());
        let mut c = RbfConfig::default();
        c.centers.clear();
        assert!(RbfNetwork::new(&c).is_err());
        let mut c = RbfConfig::default();
        c.traditional_rate = 0.0;
        assert!(RbfNetwork::new(&c).is_err());
    }

    #[test]
    fn basis_peaks_at_the_node_center() {
        let n = net();
        let basis = n.basis(&[1.0; INPUT_DIM]);
        assert_eq!(basis[4], 1.0);
        for (j, &s) in basis.iter().enumerate() {
            assert!(s <= 1.0 && s > 0.0);
            if j != 4 {
                assert!(s < 1.0);
            }
        }
    }

    #[test]
    fn basis_at_one_width_distance_is_inverse_e() {
        let n = net();
        let mut z = [1.0; INPUT_DIM];
        z[0] = 1.0 + 40.0;
        assert_relative_eq!(n.basis(&z)[4], (-1.0_f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn basis_near_origin_reference_value() {
        // Node center 1 replicated over 8 dims, zero input: exp(-8/1600).
        let n = net();
        assert_relative_eq!(n.basis(&[0.0; INPUT_DIM])[4], (-8.0_f64 / 1600.0).exp(), epsilon = 1e-15);
        assert_relative_eq!(n.basis(&[0.0; INPUT_DIM])[4], 0.99501, epsilon = 1e-5);
    }

    #[test]
    fn output_is_linear_in_the_weights() {
        let mut n = net();
        let z = [0.4, -1.2, 0.0, 2.0, 0.3, -0.3, 1.0, -1.0];
        let basis = n.basis(&z);
        n.weights[0][3] = 1.0;
        assert_relative_eq!(n.output(&basis)[0], basis[3], epsilon = 1e-15);
        assert_eq!(n.output(&basis)[1], 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for w in n.weights.iter_mut().flatten() {
            *w = rng.gen_range(-2.0..2.0);
        }
        let out = n.output(&basis);
        for i in 0..2 {
            let oracle: f64 = (0..8).map(|j| n.weights[i][j] * basis[j]).sum();
            assert_relative_eq!(out[i], oracle, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_error_zero_weights_is_a_fixed_point() {
        let mut n = net();
        let basis = n.basis(&[0.5; INPUT_DIM]);
        n.update_fixed_time(&basis, &Vector2::zeros(), 1e-3, &FixedTimeGains::default());
        assert!(n.weights.iter().flatten().all(|&w| w == 0.0));
    }

    #[test]
    fn fixed_time_decay_pulls_weights_toward_zero() {
        let gains = FixedTimeGains::default();
        let mut n = net();
        n.weights[0][0] = 0.1;
        n.weights[1][0] = -0.1;
        let basis = vec![0.0; 8];
        n.update_fixed_time(&basis, &Vector2::zeros(), 1e-3, &gains);
        let expected_rate = 0.001 * 0.1_f64.powi(5) + 0.001 * 0.1_f64.powf(97.0 / 101.0);
        assert_relative_eq!(n.weights[0][0], 0.1 - 1e-3 * expected_rate, epsilon = 1e-15);
        assert_relative_eq!(n.weights[1][0], -0.1 + 1e-3 * expected_rate, epsilon = 1e-15);
    }

    #[test]
    fn axes_adapt_independently() {
        let mut n = net();
        let basis = n.basis(&[0.2; INPUT_DIM]);
        n.update_fixed_time(&basis, &Vector2::new(1.0, 0.0), 1e-3, &FixedTimeGains::default());
        assert!(n.weights[0].iter().any(|&w| w != 0.0));
        assert!(n.weights[1].iter().all(|&w| w == 0.0));
    }

    #[test]
    fn traditional_law_without_decay_freezes_on_zero_error() {
        let mut n = net();
        n.weights[0][2] = 0.7;
        let basis = vec![0.1; 8];
        n.update_traditional(&basis, &Vector2::zeros(), 1e-3, 1.0, 0.0);
        assert_eq!(n.weights[0][2], 0.7);
    }

    #[test]
    fn traditional_law_reaches_the_sigma_equilibrium() {
        // Constant basis and error: steady state is w_j = s_j*z2/sigma.
        let mut n = net();
        let basis = vec![0.3; 8];
        let z2 = Vector2::new(0.5, -1.0);
        let (rate, sigma) = (5.0, 0.5);
        for _ in 0..20_000 {
            n.update_traditional(&basis, &z2, 1e-2, rate, sigma);
        }
        for i in 0..2 {
            for w in &n.weights[i] {
                assert_relative_eq!(*w, 0.3 * z2[i] / sigma, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn law_dispatch_matches_the_direct_calls() {
        let config = RbfConfig::default();
        let gains = FixedTimeGains::default();
        let z = [0.1, 0.2, -0.1, 0.4, 0.0, 0.0, 1.0, -1.0];
        let z2 = Vector2::new(0.3, -0.2);

        let mut a = net();
        let basis = a.basis(&z);
        let mut b = a.clone();
        a.update(AdaptationLaw::FixedTime, &basis, &z2, 1e-3, &gains, &config);
        b.update_fixed_time(&basis, &z2, 1e-3, &gains);
        assert_eq!(a, b);

        let mut a = net();
        let mut b = a.clone();
        a.update(AdaptationLaw::Traditional, &basis, &z2, 1e-3, &gains, &config);
        b.update_traditional(&basis, &z2, 1e-3, config.traditional_rate, config.traditional_sigma);
        assert_eq!(a, b);
    }

    #[test]
    fn least_squares_fit_beats_the_zero_predictor() {
        // Eight nodes cannot fit an arbitrary smooth function exactly, but a
        // fitted weight vector must cut the RMS error versus predicting zero.
        let n = net();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples = 400;
        let mut a = DMatrix::zeros(samples, n.node_count());
        let mut y = DMatrix::zeros(samples, 1);
        for s in 0..samples {
            let mut z = [0.0; INPUT_DIM];
            for zk in z.iter_mut() {
                *zk = rng.gen_range(-20.0..20.0);
            }
            let basis = n.basis(&z);
            for j in 0..n.node_count() {
                a[(s, j)] = basis[j];
            }
            let norm: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            y[(s, 0)] = (0.08 * norm).sin() + 0.4;
        }
        let gram = a.transpose() * &a + DMatrix::identity(8, 8) * 1e-9;
        let w = gram.cholesky().unwrap().solve(&(a.transpose() * &y));
        let residual = &a * w - &y;
        assert!(residual.norm() < 0.7 * y.norm(), "fit {} vs zero {}", residual.norm(), y.norm());
    }
}
