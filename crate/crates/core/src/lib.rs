//! Dispersive two-qubit parity measurement through a shared resonator,
//! with and without the rotating-wave approximation.
//!
//! Rates and frequencies are plain numbers; [`model::SystemParams::from_ratios`]
//! fixes `kappa = 1`. The numerical core is generic over `f32`/`f64`; the
//! aliases below pin it to `f64`.

pub mod error;
pub mod fidelity;
pub mod harness;
pub mod lindblad;
pub mod model;
pub mod ode;
pub mod pointer;
pub mod quadrature;
pub mod scalar;
pub mod special_fn;

pub use error::{Error, Result};
pub use fidelity::{FidelityMethod, PointerSet, QuadSpec};
pub use harness::{ModelSelection, RunConfig, SweepSpec};
pub use model::{ParityLabel, Validity};
pub use pointer::ModelKind;
pub use scalar::Real;

pub type SystemParams64 = model::SystemParams<f64>;
pub type DerivedParams64 = model::DerivedParams<f64>;
pub type PointerOptions64 = pointer::PointerOptions<f64>;
pub type PointerTrajectory64 = pointer::PointerTrajectory<f64>;
pub type PointerSet64 = fidelity::PointerSet<f64>;
pub type FidelityReport64 = fidelity::FidelityReport<f64>;
pub type FockConfig64 = lindblad::FockConfig<f64>;
pub type OracleReport64 = lindblad::OracleReport<f64>;
pub type Complex64 = num_complex::Complex<f64>;
