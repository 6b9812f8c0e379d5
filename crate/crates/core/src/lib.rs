//! Classical simulation of Gaussian boson sampling with identical
//! single-mode squeezed inputs.
//!
//! The simulator runs in two stages: first a total photon number `n` is
//! drawn from a truncated negative-binomial law ([`photon`]), then an
//! output configuration is drawn photon by photon via chain-rule
//! conditionals ([`sampler`]). Each conditional is a marginal probability
//! evaluated by decomposing the squared Hafnian of a submatrix of
//! `W = U Uᵗ` into small sub-Hafnians and permanents ([`marginal`]).
//! Brute-force oracles and statistical checks live in [`validation`].

pub mod error;
pub mod linalg;
pub mod marginal;
pub mod photon;
pub mod sampler;
pub mod validation;

pub use error::{Error, Result};
pub use linalg::{
    haar_unitary, hafnian, permanent, read_config, submatrix_ws, submatrix_wx, ComplexMatrix,
    HafnianMode, InterferometerMatrix, PhotonConfig, PositionString,
};
pub use marginal::{
    delta_permanent, f_factor, hafnian_split_check, marginal_q, marginal_q_bruteforce,
    normalization_f, FFactorParams, HafnianCache, MarginalMode, MarginalQuery,
    NormalizationConstant,
};
pub use photon::{most_probable_n, photon_count_pmf, sample_photon_count, PhotonCountPmf, SqueezeSetup};
pub use sampler::{
    brute_force_sample, conditional_weights, run_pipeline, sample_configuration, ConditionalWeights,
    ExactTable, SampleRecord,
};
pub use validation::{bench_scaling, check_normalization, compare_to_exact, DistributionReport, ScalingReport};
