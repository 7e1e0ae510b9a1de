//! DSMC solver and analysis toolkit for the homogeneous inelastic Boltzmann
//! equation with energy-dependent collision rate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod analysis;
pub mod dsmc;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod kernel;
pub mod num;
pub mod profile;
pub mod rescaled;
pub mod scaling;

pub use analysis::{CoolingFit, ConvergenceFit, DerivativeDecay, MomentBoundCheck, Regime};
pub use dsmc::{DsmcParams, DsmcState, HaltReason, PhysicalParams, PhysicalRun, RateLaw};
pub use ensemble::{InitialDistribution, MomentRecord, MomentSeries, Moments, VelocityEnsemble};
pub use error::{Error, Result};
pub use kernel::{collide, dissipation_rate, sample_omega, AngularKind, AngularWeight, CollisionOutcome, KernelConfig};
pub use num::Real;
pub use profile::{l1_distance, ProfileHistogram};
pub use rescaled::{drift_step, RescaledParams, RescaledRun};
pub use scaling::{build_scaling_map, map_ensemble_to_rescaled, verify_energy_coupling, ScalingMap};

pub type Ensemble = VelocityEnsemble<f64>;
pub type EnsembleF32 = VelocityEnsemble<f32>;
pub type Config = KernelConfig<f64>;
pub type ConfigF32 = KernelConfig<f32>;
pub type Series = MomentSeries<f64>;
pub type Dsmc = DsmcState<f64>;
