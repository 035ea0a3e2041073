//! Sparse signal recovery with Gaussian-mixture approximate message passing.
//!
//! The crate is generic over the scalar type (`f32` or `f64`); the aliases at
//! the bottom fix it to one of them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod em;
pub mod error;
pub mod gamp;
pub mod harness;
pub mod mos;
pub mod operator;
pub mod scalar;
pub mod signals;

pub use channels::{
    gaussian_product, input_moments, input_posterior, output_moments, GaussianProduct, GmPrior, MixtureComponent,
    NoiseModel, PosteriorStats, LAMBDA_FLOOR, PSI_FLOOR,
};
pub use em::{
    em_gm_amp, em_init, em_update_lambda, em_update_omega, em_update_phi, em_update_psi, em_update_theta, rho_se,
    EmConfig, EmGmAmp, EmMode, EmOutput, EmTraceRecord,
};
pub use error::{Error, Result};
pub use gamp::{gamp_init, gamp_run, gamp_run_from, GampConfig, GampHooks, GampOutput, GampProgress, GampState};
pub use harness::{
    derive_seed, nmse_db, preset, run_grid, run_mos_demo, run_nmse_sweep, run_ptc, run_recover, run_scaling,
    ExperimentGrid, Preset, RecoverOutcome, RecoverSpec, ResultTable, SolverConfig,
};
pub use mos::{mos_metric, mos_select, MosConfig, MosOutput, MosScore, MosSelector};
pub use operator::{LinearOperator, OperatorKind};
pub use scalar::Scalar;
pub use signals::{add_noise, gen_matrix, gen_signal, MatrixKind, MatrixSpec, SignalKind, SignalSpec, Support};

pub type GmPriorF64 = GmPrior<f64>;
pub type GmPriorF32 = GmPrior<f32>;
pub type OperatorF64 = LinearOperator<f64>;
pub type OperatorF32 = LinearOperator<f32>;
pub type NoiseModelF64 = NoiseModel<f64>;
pub type EmConfigF64 = EmConfig<f64>;
pub type GampConfigF64 = GampConfig<f64>;
