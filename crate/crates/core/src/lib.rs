//! Simulation library for a two-link planar manipulator under human force
//! interaction, tracking an admittance-shaped reference inside time-varying
//! position constraints.
//!
//! The pieces compose bottom-up:
//! - [`dynamics`]: manipulator model and its task-space form;
//! - [`admittance`]: the compliant reference generator driven by the
//!   interaction force;
//! - [`barrier`]: the integral barrier functional that encodes the moving
//!   position constraints;
//! - [`control`]: stabilizing function, the constraint-aware control laws,
//!   and the analytic settling-time budget;
//! - [`nn`]: the radial-basis compensator and its adaptation laws;
//! - [`sim`]: the fixed-step closed loop producing traces;
//! - [`metrics`], [`export`], [`checks`]: post-processing, persistence, and
//!   randomized property suites.

pub use nalgebra;

pub mod admittance;
pub mod barrier;
pub mod checks;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod integrator;
pub mod metrics;
pub mod nn;
pub mod sim;

pub use admittance::{AdmittanceParams, ReferenceState};
pub use barrier::{BoundWave, ConstraintProfile};
pub use control::{ControllerVariant, FixedTimeBudget, FixedTimeGains, OddRatio};
pub use dynamics::{CartesianCoefficients, PlantState, RobotParams};
pub use error::{Error, Result};
pub use checks::SuiteReport;
pub use metrics::{ComparisonMatrix, ConstraintMargin, MetricsReport, Settling};
pub use nn::{AdaptationLaw, RbfConfig, RbfNetwork};
pub use sim::{
    BreachMode, DesiredCircle, ForceProfile, ScenarioConfig, SimulationTrace, TraceRecord,
};
