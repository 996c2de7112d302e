#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod collision;
pub mod error;
pub mod fmt;
pub mod fourier;
pub mod kepler_arcs;
pub mod loops;
pub mod minimizer;
pub mod ode;
pub mod potentials;
pub mod quadrature;
pub mod scalar;
pub mod segment;
pub mod sperling;
pub mod synthetic;
pub mod vec2;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use vec2::Vec2;

pub type Vec2F64 = vec2::Vec2<f64>;
pub type LoopPathF64 = loops::LoopPath<f64>;
pub type ConstraintClassF64 = loops::ConstraintClass<f64>;
pub type FourierLoopF64 = fourier::FourierLoop<f64>;
pub type ForcingTermF64 = potentials::ForcingTerm<f64>;
pub type PotentialF64 = potentials::Potential<f64>;
pub type ActionBreakdownF64 = action::ActionBreakdown<f64>;
pub type MinimizeConfigF64 = minimizer::MinimizeConfig<f64>;
pub type MinimizeResultF64 = minimizer::MinimizeResult<f64>;
pub type KeplerArcF64 = kepler_arcs::KeplerArc<f64>;
pub type CollisionEventF64 = collision::CollisionEvent<f64>;
pub type BlowUpProfileF64 = collision::BlowUpProfile<f64>;
pub type SurgeryCandidateF64 = collision::SurgeryCandidate<f64>;
pub type SurgeryReportF64 = collision::SurgeryReport<f64>;
pub type GeneralizedSolutionCertificateF64 = collision::GeneralizedSolutionCertificate<f64>;
