//! Stochastic simulation of geometric and dynamic phase dephasing in a driven
//! two-level system.
//!
//! A qubit follows a field `B = (B_ρ cos φ, B_ρ sin φ, Δ)` whose transverse
//! component is swept once around a circle. Ornstein-Uhlenbeck fluctuations of
//! `B_ρ` (radial) or `φ` (angular) spread the accumulated phase; the Berry echo
//! and the dynamic echo isolate its geometric and dynamic parts.
//!
//! Units: time in ns, fields and rates in rad/ns, noise power in (rad/ns)².
//!
//! ```
//! use berry_core::{LoopSpec64, SequenceConfig64, EnsembleConfig64, NoiseKind, NoiseSpec64, run_ensemble};
//! use std::f64::consts::PI;
//!
//! let delta = 2.0 * PI * 0.05;
//! let spec = LoopSpec64::for_solid_angle(0.37 * PI, delta, 40.0).unwrap();
//! let seq = SequenceConfig64::berry(spec)
//!     .with_noise(NoiseSpec64::new(NoiseKind::Radial, 0.05, 2.0 * PI * 0.01));
//! let stats = run_ensemble(&EnsembleConfig64::new(seq, 8, 1)).unwrap();
//! assert_eq!(stats.phases.len(), 8);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod evolve;
pub mod noise;
pub mod path;
pub mod protocol;
pub mod rng;
pub mod scalar;
pub mod theory;

pub use ensemble::{
    gaussian_check, histogram, normalize_coherence, run_ensemble, EnsembleConfig, EnsembleStats,
    GaussianCheck, Histogram, NormalizedCoherence,
};
pub use error::{Result, SimError};
pub use evolve::{bloch_expectations, propagate, propagator, step_unitary, QubitState, Unitary2};
pub use noise::{
    integrated_kernel, ou_autocovariance, ou_generate, NoiseKind, NoiseParams, NoiseTrace,
};
pub use path::{
    build_field_trace, mhz_to_rad_per_ns, polar_angle, rad_per_ns_to_mhz, solid_angle,
    theta_for_solid_angle, FieldTrace, LoopSpec, NoiseWindow, Orientation,
};
pub use protocol::{
    berry_echo_run, dynamic_echo_run, extract_phase, noiseless_run, run_sequence, NoiseSpec,
    RunContext, SequenceConfig, SequenceKind, SequenceResult,
};
pub use scalar::Real;
pub use theory::{
    coherence_from_sigma, coherence_with_multiplier, crossover_time, variance_dynamic,
    variance_geometric, TheoryInput,
};

pub type LoopSpec64 = LoopSpec<f64>;
pub type LoopSpec32 = LoopSpec<f32>;
pub type NoiseParams64 = NoiseParams<f64>;
pub type NoiseParams32 = NoiseParams<f32>;
pub type NoiseTrace64 = NoiseTrace<f64>;
pub type NoiseTrace32 = NoiseTrace<f32>;
pub type FieldTrace64 = FieldTrace<f64>;
pub type FieldTrace32 = FieldTrace<f32>;
pub type NoiseSpec64 = NoiseSpec<f64>;
pub type NoiseSpec32 = NoiseSpec<f32>;
pub type SequenceConfig64 = SequenceConfig<f64>;
pub type SequenceConfig32 = SequenceConfig<f32>;
pub type SequenceResult64 = SequenceResult<f64>;
pub type EnsembleConfig64 = EnsembleConfig<f64>;
pub type EnsembleConfig32 = EnsembleConfig<f32>;
pub type EnsembleStats64 = EnsembleStats<f64>;
pub type EnsembleStats32 = EnsembleStats<f32>;
pub type TheoryInput64 = TheoryInput<f64>;
pub type QubitState64 = QubitState<f64>;
