//! Null-model GLM fitting, score vectors and score covariance.

mod family;
mod fit;
mod genotype;
mod score;

pub use family::GlmFamily;
pub use fit::{fit_null_glm, fit_null_glm_with, intercept_only, marginal_fit, IrlsOptions, MarginalFit, NullModelFit};
pub use genotype::{standardize, GenotypeMatrix};
pub use score::{
    adjust_for_covariates, estimate_score_covariance, score_vector, ScoreCovariance, ScoreVector,
    Shrinkage, SHRINKAGE_LADDER,
};

pub(crate) use fit::marginal_fit_fused;
