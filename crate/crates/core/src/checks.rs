//! Randomized property suites for the model, the barrier functional, and the
//! scalar inequalities the settling-time analysis rests on. Each suite is
//! deterministic for a given seed and reports how many samples violated its
//! property instead of panicking, so callers can print or assert on the
//! results.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::barrier;
use crate::control::{lemma3_constants, signed_power};
use crate::dynamics::{self, RobotParams};

/// Absolute slack granted to inequalities so floating-point rounding of an
/// exactly-tight case does not count as a violation.
fn slack(lhs: f64, rhs: f64) -> f64 {
    1e-12 * lhs.abs().max(rhs.abs()).max(1.0)
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub name: String,
    /// Individual checks performed.
    pub samples: usize,
    pub failures: usize,
    /// Largest amount by which a check exceeded its tolerance.
    pub worst: f64,
    /// Description of the first failing sample.
    pub detail: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn summary_line(&self) -> String {
        if self.passed() {
            format!("ok   {} ({} samples)", self.name, self.samples)
        } else {
            format!(
                "FAIL {} ({} of {} samples, worst excess {:.3e}): {}",
                self.name,
                self.failures,
                self.samples,
                self.worst,
                self.detail.as_deref().unwrap_or("?")
            )
        }
    }
}

struct Suite {
    report: SuiteReport,
}

impl Suite {
    fn new(name: &str) -> Self {
        Self {
            report: SuiteReport {
                name: name.to_string(),
                samples: 0,
                failures: 0,
                worst: 0.0,
                detail: None,
            },
        }
    }

    /// Records one check; `excess` is how far past its tolerance the sample
    /// landed (anything <= 0 passes).
    fn record(&mut self, excess: f64, detail: impl FnOnce() -> String) {
        self.report.samples += 1;
        if excess > 0.0 || !excess.is_finite() {
            self.report.failures += 1;
            let excess = if excess.is_finite() { excess } else { f64::INFINITY };
            if excess > self.report.worst {
                self.report.worst = excess;
            }
            if self.report.detail.is_none() {
                self.report.detail = Some(detail());
            }
        }
    }

    fn finish(self) -> SuiteReport {
        self.report
    }
}

/// Recursive adaptive Simpson quadrature with error control `tol` over the
/// whole interval.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn estimate(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (ml, fml, left) = estimate(f, a, fa, m, fm);
        let (mr, fmr, right) = estimate(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, ml, fml, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, mr, fmr, right, 0.5 * tol, depth - 1)
    }

    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = estimate(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 48)
}

/// Structural properties of the manipulator model: positive-definite inertia,
/// the skew symmetry the controller exploits, and Jacobian consistency.
pub fn dynamics_suite(seed: u64, samples: usize) -> Vec<SuiteReport> {
    let p = RobotParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spd = Suite::new("inertia positive definite");
    let mut skew = Suite::new("inertia rate minus twice coriolis is skew");
    let mut kin = Suite::new("jacobian matches kinematics derivative");
    let mut task_spd = Suite::new("task-space inertia positive definite");

    let h = 1e-6;
    for _ in 0..samples {
        let q = Vector2::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let qd = Vector2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));

        let m = dynamics::mass_matrix(&p, &q);
        let lam_min = dynamics::sym_eigen_min(&m);
        spd.record(-lam_min + 1e-12, || format!("lambda_min = {lam_min:.3e} at q = {q:?}"));

        // dM/dt along qd via central difference, then D = dM/dt - 2C must
        // satisfy D + D^T = 0.
        let m_plus = dynamics::mass_matrix(&p, &(q + qd * h));
        let m_minus = dynamics::mass_matrix(&p, &(q - qd * h));
        let m_dot = (m_plus - m_minus) / (2.0 * h);
        let d = m_dot - 2.0 * dynamics::coriolis_matrix(&p, &q, &qd);
        let sym = d + d.transpose();
        let worst = sym.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        skew.record(worst - 1e-5, || format!("|D + D^T| = {worst:.3e} at q = {q:?}, qd = {qd:?}"));

        let fk_plus = dynamics::forward_kinematics(&p, &(q + qd * h));
        let fk_minus = dynamics::forward_kinematics(&p, &(q - qd * h));
        let fd = (fk_plus - fk_minus) / (2.0 * h);
        let jv = dynamics::jacobian(&p, &q) * qd;
        let err = (fd - jv).norm();
        kin.record(err - 1e-5 * (1.0 + jv.norm()), || {
            format!("|FD - J qd| = {err:.3e} at q = {q:?}, qd = {qd:?}")
        });

        if dynamics::jacobian(&p, &q).determinant().abs() > 0.05 {
            let coeffs = dynamics::cartesian_coefficients(&p, &q, &qd).expect("checked det");
            let lam = dynamics::sym_eigen_min(&coeffs.mx);
            task_spd.record(-lam + 1e-12, || {
                format!("task lambda_min = {lam:.3e} at q = {q:?}")
            });
            let asym = (coeffs.mx - coeffs.mx.transpose()).norm();
            task_spd.record(asym - 1e-8 * (1.0 + coeffs.mx.norm()), || {
                format!("task inertia asymmetry {asym:.3e} at q = {q:?}")
            });
        }
    }

    vec![spd.finish(), skew.finish(), kin.finish(), task_spd.finish()]
}

/// Barrier functional properties: the closed form agrees with direct
/// quadrature of its defining integral, it is capped by the quadratic
/// envelope, the small-error branch joins continuously, the derivative
/// identities hold, and the value diverges toward the constraint.
pub fn barrier_suite(seed: u64, samples: usize) -> Vec<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quad = Suite::new("barrier value matches quadrature");
    let mut cap = Suite::new("barrier value below quadratic envelope");
    let mut joint = Suite::new("small-error branch is continuous");
    let mut grads = Suite::new("barrier derivative identities");
    let mut diverge = Suite::new("barrier diverges toward the constraint");

    for _ in 0..samples {
        let kc: f64 = rng.gen_range(0.3..1.5);
        let xr = kc * rng.gen_range(-0.7..0.7);
        let eta = kc * rng.gen_range(-0.9..0.9);
        let z1 = eta - xr;
        if z1.abs() < 1e-4 {
            continue;
        }
        let kc2 = kc * kc;

        let v = barrier::v1_value(z1, xr, kc).expect("inside domain");
        let integral = adaptive_simpson(
            &|s: f64| kc2 * s / (kc2 - (s + xr) * (s + xr)),
            0.0,
            z1,
            1e-13 * v.abs().max(1e-6),
        );
        let rel = (integral - v).abs() / v.abs().max(1e-300);
        quad.record(rel - 1e-9, || {
            format!("rel err {rel:.3e} at z1 = {z1:.4}, xr = {xr:.4}, kc = {kc:.4}")
        });

        let envelope = kc2 * z1 * z1 / (kc2 - eta * eta);
        cap.record(v - envelope - slack(v, envelope), || {
            format!("V = {v:.6e} above envelope {envelope:.6e} at eta = {eta:.4}, kc = {kc:.4}")
        });

        // Continuity across the series/closed-form switchover.
        let inner = 0.5 * barrier::LIMIT_BRANCH_EPS;
        let outer = 2.0 * barrier::LIMIT_BRANCH_EPS;
        for f in [barrier::v1_value, barrier::rho, barrier::omega] {
            let a = f(inner, xr, kc).expect("domain");
            let b = f(outer, xr, kc).expect("domain");
            let gap = (a - b).abs();
            joint.record(gap - 1e-4 * (1.0 + b.abs()), || {
                format!("branch gap {gap:.3e} at xr = {xr:.4}, kc = {kc:.4}")
            });
        }

        // dV/dxr against its closed form (central difference oracle). The
        // companion omega coefficient follows the published convention, which
        // is not a plain partial derivative, so it is covered by the branch
        // continuity and scale-invariance checks instead.
        let h = 1e-6;
        let gap_r = kc2 - eta * eta;
        let rho = barrier::rho(z1, xr, kc).expect("domain");
        let d_xr_expected = z1 * (kc2 / gap_r - rho);
        let d_xr = (barrier::v1_value(z1, xr + h, kc).expect("domain")
            - barrier::v1_value(z1, xr - h, kc).expect("domain"))
            / (2.0 * h);
        let e_xr = (d_xr - d_xr_expected).abs();
        grads.record(e_xr - 2e-4 * d_xr_expected.abs().max(1.0), || {
            format!("dV/dxr fd {d_xr:.5e} vs {d_xr_expected:.5e}")
        });
        let omega = barrier::omega(z1, xr, kc).expect("domain");
        let scaled = barrier::omega(2.0 * z1, 2.0 * xr, 2.0 * kc).expect("domain");
        let e_scale = (omega - scaled).abs();
        grads.record(e_scale - 1e-9 * omega.abs().max(1.0), || {
            format!("omega not scale invariant: {omega:.5e} vs {scaled:.5e}")
        });

        // Push eta toward the bound on z1's side: V must grow without limit.
        let side = z1.signum();
        let v_far = |frac: f64| {
            let eta_f = side * kc * frac;
            barrier::v1_value(eta_f - xr, xr, kc).expect("domain")
        };
        // Skip when xr sits on the same side past the probe start.
        if side * xr < 0.9 * kc {
            // The pole is logarithmic: stepping the boundary gap down a decade
            // adds a fixed increment, so the 0.999 -> 0.999999 increment (three
            // decades) must be about three times the 0.99 -> 0.999 one.
            let (v1, v2, v3) = (v_far(0.99), v_far(0.999), v_far(0.999_999));
            let growing = v1 < v2 && v2 < v3 && (v3 - v2) > 2.0 * (v2 - v1);
            diverge.record(if growing { -1.0 } else { 1.0 }, || {
                format!("no divergence: {v1:.3e}, {v2:.3e}, {v3:.3e} (kc = {kc:.4}, xr = {xr:.4})")
            });
        }
    }

    vec![
        quad.finish(),
        cap.finish(),
        joint.finish(),
        grads.finish(),
        diverge.finish(),
    ]
}

const FRACTIONAL_EXPONENTS: [f64; 4] = [97.0 / 101.0, 99.0 / 101.0, 1.0 / 3.0, 3.0 / 5.0];

/// Scalar inequalities used by the settling-time analysis.
pub fn lemma_suite(seed: u64, samples: usize) -> Vec<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = RobotParams::default();

    let mut weight_ineq = Suite::new("signed-power weight inequality");
    let mut power_sum = Suite::new("power of a sum versus sum of powers");
    let mut power_gap = Suite::new("odd-power gap bound");
    let mut young = Suite::new("weighted product bound");
    let mut rayleigh = Suite::new("rayleigh quotient envelope");

    for i in 0..samples {
        // w_tilde * sp(w_hat, mu) <= n1*|w|^(mu+1) - n2*|w_tilde|^(mu+1)
        // with w_tilde = w - w_hat.
        let mu = FRACTIONAL_EXPONENTS[i % FRACTIONAL_EXPONENTS.len()];
        let (n1, n2) = lemma3_constants(mu);
        let w = rng.gen_range(-50.0..50.0);
        let w_hat = rng.gen_range(-50.0..50.0);
        let w_tilde = w - w_hat;
        let lhs = w_tilde * signed_power(w_hat, mu);
        let rhs = n1 * w.abs().powf(mu + 1.0) - n2 * w_tilde.abs().powf(mu + 1.0);
        weight_ineq.record(lhs - rhs - slack(lhs, rhs), || {
            format!("mu = {mu:.4}, w = {w:.4}, w_hat = {w_hat:.4}: {lhs:.5e} > {rhs:.5e}")
        });

        // For nonnegative x: n^(1-p) (sum x)^p <= sum x^p for p > 1 and
        // (sum x)^q <= sum x^q for q in (0, 1).
        let n = [2usize, 3, 8][i % 3];
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..100.0)).collect();
        let total: f64 = xs.iter().sum();
        for p in [2.0, 3.0] {
            let lhs = (n as f64).powf(1.0 - p) * total.powf(p);
            let rhs: f64 = xs.iter().map(|x| x.powf(p)).sum();
            power_sum.record(lhs - rhs - slack(lhs, rhs), || {
                format!("p = {p}: {lhs:.5e} > {rhs:.5e} for {xs:?}")
            });
        }
        for q in [99.0 / 101.0, 0.5] {
            let lhs = total.powf(q);
            let rhs: f64 = xs.iter().map(|x| x.powf(q)).sum();
            power_sum.record(lhs - rhs - slack(lhs, rhs), || {
                format!("q = {q}: {lhs:.5e} > {rhs:.5e} for {xs:?}")
            });
        }

        // b (a - b)^p <= a^(p+1) - b^(p+1) for odd integer p, 0 < a, b < a.
        let a: f64 = rng.gen_range(1e-6..50.0);
        let b: f64 = rng.gen_range(-50.0..a);
        for p in [3i32, 5] {
            let lhs = b * (a - b).powi(p);
            let rhs = a.powi(p + 1) - b.powi(p + 1);
            power_gap.record(lhs - rhs - slack(lhs, rhs), || {
                format!("p = {p}, a = {a:.4}, b = {b:.4}: {lhs:.5e} > {rhs:.5e}")
            });
        }

        // x y <= eps^a |x|^a / a + |y|^b / (b eps^b) with conjugate a, b.
        let x: f64 = rng.gen_range(-100.0..100.0);
        let y: f64 = rng.gen_range(-100.0..100.0);
        let pa: f64 = rng.gen_range(1.1..5.0);
        let pb = pa / (pa - 1.0);
        let eps: f64 = rng.gen_range(0.1..10.0);
        let lhs = x * y;
        let rhs = eps.powf(pa) * x.abs().powf(pa) / pa + y.abs().powf(pb) / (pb * eps.powf(pb));
        young.record(lhs - rhs - slack(lhs, rhs), || {
            format!("x = {x:.4}, y = {y:.4}, a = {pa:.4}, eps = {eps:.4}")
        });

        // lambda_min |v|^2 <= v^T M v <= lambda_max |v|^2 for the inertia.
        let q = Vector2::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let v = Vector2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let m = dynamics::mass_matrix(&p, &q);
        let quad_form = (v.transpose() * m * v)[0];
        let n2v = v.norm_squared();
        let lo = dynamics::sym_eigen_min(&m) * n2v;
        let hi = dynamics::sym_eigen_max(&m) * n2v;
        rayleigh.record(lo - quad_form - slack(lo, quad_form), || {
            format!("lower bound {lo:.5e} > form {quad_form:.5e} at q = {q:?}")
        });
        rayleigh.record(quad_form - hi - slack(quad_form, hi), || {
            format!("form {quad_form:.5e} > upper bound {hi:.5e} at q = {q:?}")
        });
    }

    vec![
        weight_ineq.finish(),
        power_sum.finish(),
        power_gap.finish(),
        young.finish(),
        rayleigh.finish(),
    ]
}

/// Trajectories of dx/dt = -c1 sp(x, 2mu-1) - c2 sp(x, 2v-1) + sigma(t) with
/// x(0) >= 0 and sigma >= 0 never go negative. Integrated numerically, so a
/// small grid-scale undershoot at the origin is tolerated.
pub fn ode_positivity_suite(seed: u64, samples: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut suite = Suite::new("decay ode stays nonnegative");
    let dt = 1e-3;
    let steps = 2000;

    // Fractional exponents for the low-power term; all above 1/2 so the
    // resulting 2v - 1 stays positive and the drift remains integrable at 0.
    let fractions = [3.0 / 5.0, 7.0 / 9.0, 97.0 / 101.0, 99.0 / 101.0];

    for i in 0..samples {
        let c1: f64 = rng.gen_range(0.01..2.0);
        let c2: f64 = rng.gen_range(0.01..2.0);
        let ep = 2.0 * [2.0, 3.0][i % 2] - 1.0;
        let eq = 2.0 * fractions[i % fractions.len()] - 1.0;
        let x0: f64 = rng.gen_range(0.0..1.5);
        let s0: f64 = rng.gen_range(0.0..2.0);
        let (w, phase): (f64, f64) = (rng.gen_range(0.1..8.0), rng.gen_range(0.0..TAU));
        let sigma = move |t: f64| 0.5 * s0 * (1.0 + (w * t + phase).sin());

        let mut x = x0;
        let mut min_x = x0;
        for k in 0..steps {
            let t = k as f64 * dt;
            let f = |tt: f64, xx: f64| {
                -c1 * signed_power(xx, ep) - c2 * signed_power(xx, eq) + sigma(tt)
            };
            let k1 = f(t, x);
            let k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1);
            let k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2);
            let k4 = f(t + dt, x + dt * k3);
            x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            min_x = min_x.min(x);
        }
        // The continuous flow never crosses zero, but an explicit step can
        // overshoot by the width of the band where one step flips the sign of
        // the fractional term: x ~ (dt*c)^(1/(1-eq)).
        let undershoot = 5.0 * (dt * (c1 + c2)).powf(1.0 / (1.0 - eq)) + 1e-9;
        suite.record(-min_x - undershoot, || {
            format!(
                "min x = {min_x:.3e} (allowance {undershoot:.1e}) for c1 = {c1:.3}, \
                 c2 = {c2:.3}, eq = {eq:.3}, x0 = {x0:.3}"
            )
        });
    }
    suite.finish()
}
