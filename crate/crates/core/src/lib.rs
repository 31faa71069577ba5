//! Estimation of point configurations from noisy pairwise distances by
//! maximizing matched or mismatched likelihoods, and a Monte Carlo harness
//! comparing the two.

pub mod error;
pub mod estimator;
pub mod geometry;
pub mod harness;
pub mod lbfgs;
pub mod likelihood;
pub mod noise;
pub mod procrustes;
pub mod seed;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
pub use estimator::{estimate, random_init, EstimateResult, OptimizerSettings};
pub use geometry::{center, edge_lengths, edge_set, mean_edge_length, EdgeLengths, EdgeSet, PointSet};
pub use likelihood::{nll, nll_grad, sse, LikelihoodSpec, MeasurementSet};
pub use noise::{snr_to_sigma2, NoiseFamily, NoiseModel, SnrSpec};
pub use procrustes::{frobenius_norm, opp_align, AlignmentResult};
