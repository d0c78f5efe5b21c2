//! Steady-state entanglement of two levitated nanoparticles coupled through
//! cavity modes.
//!
//! The dynamics is linear, so the steady state is Gaussian and fully described
//! by its covariance matrix. Time-independent models are solved with a
//! Lyapunov equation, periodically driven ones through a Floquet-space
//! embedding. The mechanical block is then scored with logarithmic
//! negativity, EPR variance, noise-reduction factor and purity.
//!
//! ```
//! use levent_core::{config::default_rates, run_point, ModelVariant, SystemParams, Truncation};
//!
//! let params = SystemParams::new(default_rates()).unwrap();
//! let out = run_point(ModelVariant::FullRwa, &params, Truncation::Auto).unwrap();
//! assert!(out.report.log_negativity.unwrap() > 0.0);
//! ```

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod feasibility;
pub mod floquet;
pub mod gaussian;
pub mod lyapunov;
pub mod measures;
pub mod oracle;
pub mod sweep;
pub mod system;

pub use config::Config;
pub use error::{Error, Result};
pub use feasibility::{phase_noise_heating, thermal_occupancy, tweezer_intensity, FeasibilityInputs};
pub use floquet::{
    assemble_floquet_drift, convergence_scan, solve_floquet_steady_state, ConvergenceReport, FloquetSystem,
};
pub use gaussian::{CovarianceMatrix, QuadratureBasis, QuadratureKind};
pub use lyapunov::{residual, solve_steady_state};
pub use measures::{epr_variance, full_report, log_negativity, mean_phonons, nrf, EntanglementReport};
pub use oracle::{integrate_lyapunov_ode, monte_carlo_covariance, periodic_initial_state, sample_fourth_moments};
pub use sweep::{run_point, run_sweep, Preset, SweepRow, SweepSpec, SweptParameter, Truncation};
pub use system::{
    bogoliubov, build_counterrotating_drift, build_detuned_drift_mode1_resonant, build_detuned_drift_mode2_resonant,
    build_diffusion, build_rwa_cs_drift, build_rwa_full_drift, stability_check, BogoliubovData, DiffusionMatrix,
    DriftModel, Harmonic, ModelVariant, Rates, Stability, SystemParams,
};
