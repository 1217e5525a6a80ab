//! Continuous-variable teleportation fidelities and sub-Planck phase-space structure.
//!
//! The crate works in a truncated Fock basis with phase-space points
//! ν = (ν₁ + iν₂)/√2, measure d²ν = dν₁dν₂/2 and displacement
//! D(μ) = exp(μa† − μ*a). Everything is generic over the floating-point type;
//! the `*64` aliases fix it to `f64`.

// `!(x > y)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod fidelity;
pub mod fock;
pub mod linalg;
pub mod mixedstate;
pub mod phasespace;
pub mod protocol;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};
pub use fock::{ComplexAmplitude, DensityOp, PureState, QuadMoments, QuantumState, ThermalParams};
pub use scalar::Real;

pub type ComplexAmplitude64 = ComplexAmplitude<f64>;
pub type PureState64 = PureState<f64>;
pub type DensityOp64 = DensityOp<f64>;
pub type ThermalParams64 = ThermalParams<f64>;
pub type PhaseGrid64 = phasespace::PhaseGrid<f64>;
pub type FidelityCurve64 = fidelity::FidelityCurve<f64>;
pub type ScaleReport64 = fidelity::ScaleReport<f64>;
pub type WaveFunction64 = dynamics::WaveFunction<f64>;
