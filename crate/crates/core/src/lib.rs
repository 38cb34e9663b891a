//! Adaptive polygenic signal detection by repeated sample splitting.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. Everything here is a pure function of its inputs and seeds; file
//! formats, the CLI and parallel experiment drivers live in the `polysplit`
//! companion crate.
//!
//! Layout:
//!
//! * [`glm`]: null-model fitting, score vectors and score covariance.
//! * [`quadform`]: weighted chi-square tail probabilities (Davies, Imhof,
//!   normal approximation, Monte Carlo).
//! * [`split`] and [`screen`]: reproducible sample splits and training-half
//!   screening with effect-size weights.
//! * [`adaptive`]: the per-split statistics, Cauchy combination and the
//!   double Cauchy test across splits.
//! * [`sim`]: simulation designs and signal-to-noise diagnostics.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod adaptive;
mod error;
pub mod glm;
mod linalg;
pub mod quadform;
pub mod rng;
pub mod screen;
pub mod sim;
pub mod split;

pub use error::{Error, Result};

pub use adaptive::{
    cauchy_combine, t1_test, t_gamma_test, tc_test, tdc_test, NuisanceMode, NullLaw, SplitOutcome,
    SplitTestResult, TdcConfig, TestReport,
};
pub use glm::{
    estimate_score_covariance, fit_null_glm, marginal_fit, score_vector, standardize, GenotypeMatrix,
    GlmFamily, NullModelFit, ScoreCovariance, ScoreVector, Shrinkage,
};
pub use quadform::{
    davies_pvalue, eigenvalues_weighted, imhof_pvalue, mc_quadform_pvalue, normal_approx_pvalue,
    QuadFormDist, TailMethod, TailProbability, WeightMatrixR,
};
pub use screen::{screen_and_weight, ScreenMethod, ScreenSet};
pub use split::{make_split_plan, repeated_splits, SplitPlan};
