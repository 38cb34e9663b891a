//! Per-split statistics on the testing half: the aggregated score T₁ and the
//! weighted quadratic forms T_γ.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use num_traits::Float;

use super::{NuisanceMode, NullLaw};
use crate::error::{Error, Result};
use crate::glm::{adjust_for_covariates, estimate_score_covariance, NullModelFit, ScoreCovariance, ScoreVector, Shrinkage};
use crate::quadform::{davies_pvalue, eigenvalues_weighted, studentized_pvalue, TailMethod, WeightMatrixR};
use crate::screen::ScreenSet;

/// Aggregated-score result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T1Stat {
    /// Σ_i (y_i − μ̂_i) G*_i with G*_i = Σ_j β̂_j g_ij.
    pub statistic: f64,
    /// statistic² / estimated null variance.
    pub chisq: f64,
    pub p_value: f64,
    /// All weights were zero; reported with p = 1.
    pub zero_weights: bool,
}

impl T1Stat {
    pub(crate) fn null() -> T1Stat {
        T1Stat { statistic: 0.0, chisq: 0.0, p_value: 1.0, zero_weights: false }
    }
}

/// Weighted quadratic-form result for one γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaStat {
    pub gamma: u32,
    /// n Σ_j r_j S_j² with the weights scaled to a maximum of 1.
    pub statistic: f64,
    pub p_value: f64,
    pub method: TailMethod,
    pub fault: u8,
    pub error_bound: f64,
    /// Number of positive eigenvalues in the null law.
    pub n_eigenvalues: usize,
}

/// Σ_i (y_i − μ̂_i) Σ_j w_j g_ij, computed through the aggregated variable.
pub fn t1_statistic(null: &NullModelFit, g: &DMatrix<f64>, weights: &[f64]) -> Result<f64> {
    if g.nrows() != null.n() || g.ncols() != weights.len() {
        return Err(Error::dim(format!(
            "genotypes {}x{} vs {} residuals and {} weights",
            g.nrows(),
            g.ncols(),
            null.n(),
            weights.len()
        )));
    }
    let w = nalgebra::DVector::from_column_slice(weights);
    let g_star = g * w;
    Ok(g_star.iter().zip(&null.residuals).map(|(a, r)| a * r).sum())
}

/// Standardise T₁ by n·wᵀΣ̂w and refer the square to χ²₁.
pub(crate) fn t1_from_parts(statistic: f64, n: usize, sigma: &ScoreCovariance, weights: &[f64]) -> T1Stat {
    if weights.iter().all(|&w| w == 0.0) {
        return T1Stat { statistic: 0.0, chisq: 0.0, p_value: 1.0, zero_weights: true };
    }
    let var = n as f64 * sigma.quad_form(weights);
    if !(var > 0.0) {
        return T1Stat { statistic, chisq: 0.0, p_value: 1.0, zero_weights: false };
    }
    let chisq = statistic * statistic / var;
    // P(χ²₁ > x) = erfc(√(x/2))
    let p = libm::erfc((0.5 * chisq).sqrt());
    T1Stat { statistic, chisq, p_value: crate::quadform::clamp_p(p), zero_weights: false }
}

fn prepare(null: &NullModelFit, x: &DMatrix<f64>, g: &DMatrix<f64>, nuisance: NuisanceMode) -> Result<DMatrix<f64>> {
    match nuisance {
        NuisanceMode::RefitTesting => adjust_for_covariates(null, x, g),
        NuisanceMode::FromTraining => Ok(g.clone()),
    }
}

/// Score covariance for the testing half under the given nuisance treatment.
pub fn testing_covariance(
    null: &NullModelFit,
    x: &DMatrix<f64>,
    g: &DMatrix<f64>,
    nuisance: NuisanceMode,
    shrinkage: Shrinkage,
) -> Result<ScoreCovariance> {
    let adjusted = prepare(null, x, g, nuisance)?;
    let sigma = estimate_score_covariance(null, &adjusted, shrinkage)?;
    match nuisance {
        NuisanceMode::RefitTesting => sigma.with_fitted_null(null, x),
        NuisanceMode::FromTraining => Ok(sigma),
    }
}

/// T₁ on the testing half for the screened variants (columns of `g` follow
/// `screen.selected`).
pub fn t1_test(
    null: &NullModelFit,
    x: &DMatrix<f64>,
    g: &DMatrix<f64>,
    screen: &ScreenSet,
    nuisance: NuisanceMode,
    shrinkage: Shrinkage,
) -> Result<T1Stat> {
    let stat = t1_statistic(null, g, &screen.weights)?;
    let sigma = testing_covariance(null, x, g, nuisance, shrinkage)?;
    Ok(t1_from_parts(stat, null.n(), &sigma, &screen.weights))
}

/// T_γ = n Σ_j r_j S_j² with r_j ∝ |β̂_j|^{γ−2} and its weighted-χ² p-value.
pub fn t_gamma_test(
    score: &ScoreVector,
    sigma: &ScoreCovariance,
    screen: &ScreenSet,
    gamma: u32,
    accuracy: f64,
) -> Result<GammaStat> {
    t_gamma_test_with(score, sigma, screen, gamma, accuracy, NullLaw::PlugIn)
}

/// [`t_gamma_test`] with a choice of reference law.
pub fn t_gamma_test_with(
    score: &ScoreVector,
    sigma: &ScoreCovariance,
    screen: &ScreenSet,
    gamma: u32,
    accuracy: f64,
    law: NullLaw,
) -> Result<GammaStat> {
    if score.s.len() != screen.len() || sigma.dim() != screen.len() {
        return Err(Error::dim("score, covariance and screen set sizes differ"));
    }
    let weights = WeightMatrixR::from_effects(&screen.weights, gamma)?;
    let n = score.n as f64;
    let statistic = n * weights.r.iter().zip(&score.s).map(|(r, s)| r * s * s).sum::<f64>();
    if weights.is_zero() || statistic == 0.0 {
        return Ok(GammaStat {
            gamma,
            statistic,
            p_value: 1.0,
            method: TailMethod::Davies,
            fault: 0,
            error_bound: 0.0,
            n_eigenvalues: 0,
        });
    }
    let dist = eigenvalues_weighted(sigma, &weights)?;
    if dist.is_degenerate() {
        return Err(Error::Numerical("null distribution has no positive eigenvalue".into()));
    }
    let exact = match (law, sigma.residual_df()) {
        (NullLaw::MomentCorrected, Some(df)) => studentized_pvalue(&dist, statistic, df, accuracy)?,
        _ => None,
    };
    let tail = match exact {
        Some(t) => t,
        None => {
            let q = match law {
                NullLaw::PlugIn => statistic,
                NullLaw::MomentCorrected => {
                    let var = 2.0 * dist.trace_sq();
                    let excess = sigma.variance_excess(&weights.r);
                    // keep at least a tenth of the plug-in variance
                    let target = (var + excess).max(0.1 * var);
                    rescale_about_trace(statistic, dist.trace(), (var / target).sqrt())
                }
            };
            davies_pvalue(&dist, q, accuracy)?
        }
    };
    Ok(GammaStat {
        gamma,
        statistic,
        p_value: tail.p_value,
        method: tail.method,
        fault: tail.fault,
        error_bound: tail.error_bound,
        n_eigenvalues: dist.lambdas().iter().filter(|&&l| l > 0.0).count(),
    })
}

/// Stretch deviations from the trace by `s`. Above the trace the map is
/// linear; below it, tr·(t/tr)^s has the same slope at tr but stays positive,
/// so small statistics are not pushed outside the support (which would give
/// p = 1 exactly and swamp a Cauchy combination).
pub(crate) fn rescale_about_trace(t: f64, tr: f64, s: f64) -> f64 {
    if t >= tr || !(t > 0.0) {
        tr + (t - tr) * s
    } else {
        tr * (t / tr).powf(s)
    }
}

/// Everything computed on one testing half.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TestingHalf {
    pub t1: T1Stat,
    pub gammas: Vec<GammaStat>,
    pub shrinkage_delta: f64,
}

pub(crate) fn evaluate_testing_half(
    null: &NullModelFit,
    x: &DMatrix<f64>,
    g: &DMatrix<f64>,
    screen: &ScreenSet,
    gammas: &[u32],
    nuisance: NuisanceMode,
    shrinkage: Shrinkage,
    law: NullLaw,
    accuracy: f64,
) -> Result<TestingHalf> {
    let score = crate::glm::score_vector(null, g)?;
    let sigma = testing_covariance(null, x, g, nuisance, shrinkage)?;
    let stat = t1_statistic(null, g, &screen.weights)?;
    let t1 = t1_from_parts(stat, null.n(), &sigma, &screen.weights);
    let gammas = gammas
        .iter()
        .map(|&gamma| t_gamma_test_with(&score, &sigma, screen, gamma, accuracy, law))
        .collect::<Result<Vec<_>>>()?;
    Ok(TestingHalf { t1, gammas, shrinkage_delta: sigma.shrinkage_delta() })
}
