//! Soft QD Score estimation, its pairwise lower bound, and SQUAD, a gradient-based
//! population optimizer for quality-diversity problems.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the bottom of this file fix the common `f64` instantiations.

pub mod baselines;
pub mod domains;
pub mod error;
pub mod metrics;
pub mod population;
pub mod rng;
pub mod scalar;
pub mod soft_score;
pub mod squad;
pub mod theory;

mod kdtree;

pub use error::{Error, GradientTerm, Result};
pub use population::{
    evaluate_population, seeded_random_population, EvalWithGrads, Evaluation, KernelParams, Population,
    PopulationRecord, Problem, Solution,
};
pub use scalar::Real;

pub type PopulationF64 = Population<f64>;
pub type PopulationF32 = Population<f32>;
pub type EvaluationF64 = Evaluation<f64>;
pub type KernelParamsF64 = KernelParams<f64>;
pub type LinearProjectionF64 = domains::LinearProjection<f64>;
pub type GaussianHillF64 = domains::GaussianHill<f64>;
