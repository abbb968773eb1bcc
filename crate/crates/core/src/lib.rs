//! Thermodynamic work extraction under imperfect thermalization.
//!
//! Numerical routines are generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

pub mod collision;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod maps;
pub mod qudit;
pub mod scalar;
pub mod seeding;
pub mod thermo;
pub mod tth;

pub use error::{Error, Result};
pub use scalar::Real;

pub type CMatrix = linalg::CMatrix<f64>;
pub type Temperature = thermo::Temperature<f64>;
pub type HamiltonianMatrix = thermo::HamiltonianMatrix<f64>;
pub type DensityOperator = thermo::DensityOperator<f64>;
pub type BathSchedule = collision::BathSchedule<f64>;
pub type NoiseModel = collision::NoiseModel<f64>;
pub type QubitProtocolConfig = collision::QubitProtocolConfig<f64>;
pub type WorkLedger = collision::WorkLedger<f64>;
pub type HamiltonianPath = qudit::HamiltonianPath<f64>;
pub type QuditProtocolConfig = qudit::QuditProtocolConfig<f64>;
pub type ThermalizingChannel = maps::ThermalizingChannel<f64>;
pub type CyclicProtocol = maps::CyclicProtocol<f64>;
pub type DissipationBreakdown = maps::DissipationBreakdown<f64>;
pub type AlphaModel = tth::AlphaModel<f64>;
pub type DissipationQuery = tth::DissipationQuery<f64>;
