//! Impulse-noise image restoration with an `l0` data-fidelity term and
//! total-variation regularization, solved by a proximal ADMM on an MPEC
//! reformulation of the `l0` count.

pub mod error;
pub mod harness;
pub mod image;
pub mod io;
pub mod metrics;
pub mod noise;
pub mod operators;
pub mod prox;
pub mod solver;

pub use error::{Error, Result};
pub use image::{clip01, ImageGrid, PixelIndex};
pub use metrics::{residual_image, snr, snr_all, snr_error, Snr, SnrKind, SNR0_EPS};
pub use noise::{build_mask, corrupt, MaskRule, NoiseKind, NoiseSpec, OutlierMask};
pub use operators::{disc_kernel, div, gaussian_kernel, grad, GradientField, Kernel, LinearOp};
pub use prox::{l0_mpec_oracle, shrink_x, update_u, update_v, update_y, ShrinkageParams, TvNorm};
pub use solver::{
    kkt_residuals, objective_l0tv, solve_l0tv, solve_l0tv_with, solve_l1tv, Problem, Residuals,
    SolveOutput, SolverConfig, SolverState, Trace, TraceRow,
};
