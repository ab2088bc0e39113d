//! Spectral simulator and control synthesizer for the wave equation on the
//! flat d-torus with a multiplicative low-mode control.
//!
//! The state is a truncated Fourier pair (profile, velocity). The free flow
//! and instantaneous kicks are exact mode-wise maps; piecewise-constant
//! controlled segments integrate by Strang splitting between them. On top of
//! that sit a certificate calculus that rewrites trig targets as squares of
//! generator combinations ([`saturate`]), a kick compiler and transfer
//! planner ([`synth`]), and a trace/verification layer ([`sim`]).
//!
//! Everything numeric is generic over [`scalar::Scalar`]; the crate root
//! re-exports `f64` aliases, which all shipped tools use. `f32` exists for
//! cheap smoke checks, not production accuracy.

pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod mode;
pub mod propagate;
pub mod saturate;
pub mod scalar;
pub mod schedule;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
pub use mode::ModeIndex;
pub use scalar::Scalar;

/// Field with `f64` coefficients, the working precision of the shipped tools.
pub type Field = field::FourierField<f64>;
/// Wave state (profile, velocity) at `f64` precision.
pub type State = field::WaveState<f64>;
/// Control schedule at `f64` precision.
pub type Schedule = schedule::ControlSchedule<f64>;
/// Control segment at `f64` precision.
pub type Segment = schedule::ControlSegment<f64>;
/// Simulator configuration at `f64` precision.
pub type Config = sim::SimConfig<f64>;
/// Saturation expression at `f64` precision.
pub type Expression = saturate::SatExpression<f64>;
/// Transfer plan at `f64` precision.
pub type Plan = synth::TransferPlan<f64>;
