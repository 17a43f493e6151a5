//! GAMP reconstruction from scalar-quantized linear measurements.
//!
//! The model is `y = Q(A x + w)` with `x` i.i.d. from a [`Prior`], `A` a dense
//! mixing matrix, `w ~ N(0, σ²)` and `Q` a regular, binned or modulo
//! [`ScalarQuantizer`]. The crate provides
//!
//! * the scalar moment kernels ([`channels`]),
//! * the GAMP iteration ([`gamp`]),
//! * state evolution, which predicts GAMP's asymptotic MSE ([`state_evolution`]),
//! * quantizer design by Lloyd's algorithm or by minimizing the predicted MSE
//!   ([`qdesign`]).
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod channels;
pub mod error;
pub mod gamp;
pub mod qdesign;
pub mod quad;
pub mod quantizer;
pub mod special;
pub mod state_evolution;

pub use channels::{
    trunc_gauss_moments, GaussianMoments, MeasurementUpdate, OutputChannel, OutputMoments, Prior, DEGENERATE_MASS,
    TAU_MIN,
};
pub use error::{Error, Result};
pub use gamp::{
    gamp_init, gamp_run, gamp_step, squared_error, GampConfig, GampOutput, GampState, IterRecord, Matrix, MixingMatrix,
    RunOptions, StepStats,
};
pub use qdesign::{
    lloyd, lloyd_initial_levels, optimize_family, Design, DesignObjective, LloydResult, Search, UniformFamily,
};
pub use quantizer::{CellSet, GaussianSource, Interval, Label, QuantizerKind, ScalarQuantizer, MODULO_WINDOW_RADIUS};
pub use state_evolution::{d2_bar, ein_bar, se_run, D2Bar, SeConfig, SeEvaluator, SeProblem, SeTrajectory};
