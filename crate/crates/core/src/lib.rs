//! Minimax-regret treatment rules when the average treatment effect is only
//! partially identified.
//!
//! The crate covers the whole pipeline:
//!
//! * [`model`]: identified bounds `[tau_L, tau_U]` for three study designs and
//!   their directional derivatives;
//! * [`rule`]: the optimal rule `kappa = tau_U^+ / (tau_U^+ + tau_L^-)` and its
//!   directional derivative;
//! * [`gauss`]: Gaussian closed forms and seeded multivariate normal draws;
//! * [`adjust`]: the min-max search for the adjustment term and the adjusted
//!   and plug-in rules;
//! * [`estimate`]: samplers, efficient estimators and the bootstrap;
//! * [`sim`]: the replication study producing regret curves;
//! * [`cli`]: the `regret-rules` command line.

pub mod adjust;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod fmt;
pub mod gauss;
pub mod model;
pub mod rule;
pub mod sim;

pub use adjust::{lam_str, plug_in_str, AdjustProblem, AdjustResult, AdjustSettings, GridConfig, SearchBox};
pub use error::{Error, Result};
pub use gauss::{GaussianLaw, SeededStream};
pub use model::{BoundsPair, Combine, DirectionalDerivative, IdModel, ModelKind, Theta};
pub use rule::{kappa, kappa_prime, KappaMode, KappaSpec, TreatmentProb};
pub use sim::{run_experiment, RimrCurve, RimrRecord, SimConfig};
