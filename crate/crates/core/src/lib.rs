//! Adaptive empirical-Bayes sparse learning.
//!
//! Stochastic-gradient Langevin / Hamiltonian samplers draw the model
//! parameters while the hyperparameters of a spike-and-slab
//! Gaussian-Laplace prior are optimized online by stochastic approximation.
//! Optional magnitude pruning sparsifies the sampled weights.
//!
//! The numeric code is generic over [`Real`]; the aliases below fix the
//! scalar to `f64`, which is what every experiment uses.

pub mod data;
pub mod datagen;
pub mod error;
pub mod latent;
pub mod models;
pub mod params;
pub mod prior;
pub mod pruning;
pub mod real;
pub mod rng;
pub mod samplers;
pub mod schedule;

pub use error::{Result, SsglError};
pub use latent::DELTA_MIN;
pub use models::{Activation, Model, Predictions, Task};
pub use params::{partition_indices, LayerKind, LayerSpec, Layout};
pub use prior::{BetaShape, SigmaData};
pub use pruning::PruneSchedule;
pub use real::Real;
pub use samplers::{BetaInit, ChainConfig, InitConfig, RhoInit, SghmcParams, Variant};
pub use schedule::{Schedule, Schedules};

pub type ParamVector = params::ParamVector<f64>;
pub type LatentState = latent::LatentState<f64>;
pub type LatentProposal = latent::LatentProposal<f64>;
pub type LayerLatent = latent::LayerLatent<f64>;
pub type PriorConfig = prior::PriorConfig<f64>;
pub type Dataset = data::Dataset<f64>;
pub type Matrix = data::Matrix<f64>;
pub type Targets = data::Targets<f64>;
pub type Minibatch<'a> = data::Minibatch<'a, f64>;
pub type ChainTrace = samplers::ChainTrace<f64>;
pub type TraceRecord = samplers::TraceRecord<f64>;
pub type SghmcState = samplers::SghmcState<f64>;
pub type Simulated = datagen::Simulated<f64>;
