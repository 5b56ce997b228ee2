//! Sampling laboratory for score-based generative models.
//!
//! Everything revolves around three ingredients: a geometric [`schedule`] of
//! noise levels, an analytic [`oracle`] for the score of a known perturbed
//! density, and the discretized [`sampler`] recursions (annealed Langevin,
//! consistent annealed sampling in both hyper-parameterizations, the
//! predictor-corrector scheme, and the closed-form limit samplers). Because
//! every step of every scheme is affine in the state when the score is
//! affine, the [`analytic`] module propagates the exact Gaussian law of the
//! chain and serves as a machine-precision reference for the Monte-Carlo
//! paths. [`metrics`] supplies transport-distance quality scores and
//! [`verify`] bundles the cross-scheme equivalence identities.

pub mod analytic;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod verify;

pub use error::{Error, Result};
pub use oracle::{denoise, GaussianOracle, NoisyOracle, PointCloudOracle, ScoreOracle};
pub use sampler::{run_chain, ChainTrace, SamplerConfig, Scheme};
pub use schedule::NoiseSchedule;
