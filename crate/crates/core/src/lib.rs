//! Simulation and benchmarking of a cavity qudit controlled through a
//! dispersively coupled transmon.
//!
//! The crate covers the whole chain: gate matrices on a truncated Fock space
//! ([`hilbert`]), compilation onto SNAP and displacement gates ([`compile`]),
//! physical drive schedules ([`pulse`]), open-system evolution ([`lindblad`]),
//! heavy-output and cross-entropy scores ([`metrics`]), the Bayesian error
//! analysis ([`stats`]) and seeded ensemble sweeps ([`experiment`]).

pub mod compile;
pub mod error;
pub mod experiment;
pub mod hilbert;
pub mod lindblad;
pub mod metrics;
pub mod pulse;
pub mod rng;
pub mod stats;

pub use num_complex::Complex64 as C64;

pub use compile::{CompilationResult, Gate, GateSequence, OptimizerConfig};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ExperimentRecord, Mode};
pub use hilbert::{FockSpaceConfig, Operator, UnitaryEnsemble};
pub use lindblad::{DensityMatrix, IntegratorConfig, NoiseModel};
pub use metrics::{DistributionPair, MetricRecord};
pub use pulse::{Channel, DriveSegment, Envelope, PulseSchedule};
pub use stats::{BootstrapSummary, CountVector, DirichletPosterior};
