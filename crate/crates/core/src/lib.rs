//! Diffusion Evolution: an evolutionary optimizer built on iterative denoising.
//!
//! Every generation, each individual estimates where high-fitness "origins" lie by a
//! fitness-weighted Gaussian-kernel average over the current population, then takes a
//! DDIM-style step towards that estimate with a controlled amount of fresh mutation noise.
//! The kernel bandwidth shrinks as the α schedule approaches one, so early generations
//! compete globally and late generations refine locally, which keeps multiple optima alive.
//!
//! Module map:
//!
//! - [`schedule`]: α / σ schedules (linear, DDPM-fit, cosine).
//! - [`landscape`]: fitness evaluators, the 2-D benchmark suite, rescaling and density maps.
//! - [`evolve`]: origin / noise estimation, the DDIM update and the generation loop.
//! - [`latent`]: random-projection kernel distances for high-dimensional genotypes.
//! - [`metrics`]: elite selection, grid entropy and run summaries.
//! - [`cartpole`]: cart-pole environment, MLP policies and the rollout evaluator.
//! - [`config`] and [`harness`]: the reproducible experiment runner behind the `evolve` binary.

pub mod cartpole;
pub mod config;
mod error;
pub mod evolve;
pub mod harness;
pub mod landscape;
pub mod latent;
pub mod metrics;
pub mod rng;
pub mod schedule;

pub use error::{Error, Result};
pub use evolve::{
    ddim_step, estimate_noise, estimate_origin, evolve, neighbor_disc, EvolutionResult,
    EvolutionTrace, EvolveOptions, OriginEstimate, Population, TraceLevel,
};
pub use landscape::{Benchmark, DensityMap, FitnessEvaluator, Objective, RescaledLandscape};
pub use latent::{latent_estimate_origin, latent_evolve, Projection};
pub use schedule::{ddim_sigma, Schedule, ScheduleKind};

/// Crate version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
