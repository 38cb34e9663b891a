use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::NullModelFit;
use crate::error::{Error, Result};
use crate::linalg;

/// Per-variant score statistics S_j = n⁻¹ Σ_i (y_i − μ̂_i) g_ij.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub s: Vec<f64>,
    pub n: usize,
}

pub fn score_vector(fit: &NullModelFit, g: &DMatrix<f64>) -> Result<ScoreVector> {
    let n = fit.n();
    if g.nrows() != n {
        return Err(Error::dim(format!("genotypes have {} rows, fit has {}", g.nrows(), n)));
    }
    let inv_n = 1.0 / n as f64;
    let s = g
        .column_iter()
        .map(|col| col.iter().zip(&fit.residuals).map(|(g, r)| g * r).sum::<f64>() * inv_n)
        .collect();
    Ok(ScoreVector { s, n })
}

/// Remove the covariate space from each genotype column using the null-model
/// weights ν(μ̂_i): G − X (XᵀVX)⁻¹ XᵀV G.
///
/// Scores are unchanged (the null residuals are orthogonal to X for canonical
/// links) while n⁻¹ Σ v̂_i G̃_i G̃_iᵀ becomes the covariance of the efficient
/// score. With an intercept-only model this is column centering.
pub fn adjust_for_covariates(fit: &NullModelFit, x: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = fit.n();
    if x.nrows() != n || g.nrows() != n {
        return Err(Error::dim("covariates, genotypes and fit disagree on sample size"));
    }
    let v: Vec<f64> = fit.fitted_means.iter().map(|&m| fit.family.variance(m)).collect();
    let q = x.ncols();
    let mut out = g.clone();
    if q == 1 && x.iter().all(|&v| v == 1.0) && v.iter().all(|&w| w == v[0]) {
        // plain centering, avoids the rank-q update
        for mut col in out.column_iter_mut() {
            let mean = col.iter().sum::<f64>() / n as f64;
            col.add_scalar_mut(-mean);
        }
        return Ok(out);
    }
    let mut xv = x.clone();
    for (i, mut row) in xv.row_iter_mut().enumerate() {
        row *= v[i];
    }
    let xtvx = x.tr_mul(&xv);
    let chol = xtvx.cholesky().ok_or(Error::RankDeficient)?;
    // coefficients (XᵀVX)⁻¹ XᵀV G, q × J2
    let coef = chol.solve(&xv.tr_mul(g));
    out -= x * coef;
    Ok(out)
}

/// How much diagonal shrinkage to apply to the score covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Shrinkage {
    /// Smallest ladder value giving a well-conditioned matrix.
    #[default]
    Auto,
    Fixed(f64),
}

pub const SHRINKAGE_LADDER: [f64; 6] = [0.0, 0.01, 0.05, 0.1, 0.2, 0.5];

/// Estimate of Σ_s = Cov(n^{1/2} S), kept as a factor F with Σ̂₀ = FᵀF plus
/// diagonal shrinkage (1 − δ)Σ̂₀ + δ·diag(Σ̂₀).
///
/// When there are more variants than individuals and no shrinkage is
/// applied, the dense J₂ × J₂ matrix is never formed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCovariance {
    factor: DMatrix<f64>,
    dense: Option<DMatrix<f64>>,
    diag: Vec<f64>,
    shrinkage_delta: f64,
    min_eigenvalue_estimate: f64,
    moments: NullMoments,
}

/// What the variance correction needs to know about the testing-half null fit.
#[derive(Debug, Clone, PartialEq, Default)]
struct NullMoments {
    /// Per-individual excess kurtosis of the response (empty when unknown).
    kurtosis: Vec<f64>,
    scale: ScaleFit,
}

/// How the null variances v̂_i were estimated from the same data.
#[derive(Debug, Clone, PartialEq, Default)]
enum ScaleFit {
    /// Not estimated from these responses.
    #[default]
    Known,
    /// A common dispersion with this many residual degrees of freedom.
    Dispersion { df: f64 },
    /// v̂_i = ν(μ̂_i) with μ̂ from a canonical-link fit on covariates `x`;
    /// `slope` is ν′(μ̂_i), which for the binomial also equals E ε³ / v.
    MeanVariance { x: DMatrix<f64>, info_inv: DMatrix<f64>, slope: Vec<f64>, var: Vec<f64> },
}

impl ScoreCovariance {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn shrinkage_delta(&self) -> f64 {
        self.shrinkage_delta
    }

    /// Certified lower bound on the smallest eigenvalue (0 when none was computed).
    pub fn min_eigenvalue_estimate(&self) -> f64 {
        self.min_eigenvalue_estimate
    }

    /// Diagonal entries (shrinkage leaves them unchanged).
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }

    /// The n × J₂ factor with Σ̂₀ = FᵀF.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Record that the null model behind this estimate was fitted to the same
    /// responses with covariates `x`, so tr(RΣ̂) moves together with nSᵀRS.
    pub fn with_fitted_null(mut self, fit: &NullModelFit, x: &DMatrix<f64>) -> Result<ScoreCovariance> {
        let n = fit.n();
        if x.nrows() != n {
            return Err(Error::dim("covariates and fit disagree on sample size"));
        }
        self.moments.scale = if fit.family.estimates_dispersion() {
            ScaleFit::Dispersion { df: (n - x.ncols().min(n - 1)) as f64 }
        } else {
            let var = fit.response_variances();
            let mut xv = x.clone();
            for (i, mut row) in xv.row_iter_mut().enumerate() {
                row *= var[i];
            }
            let info_inv = x.tr_mul(&xv).try_inverse().ok_or(Error::RankDeficient)?;
            let slope = fit.fitted_means.iter().map(|&m| 1.0 - 2.0 * m).collect();
            ScaleFit::MeanVariance { x: x.clone(), info_inv, slope, var }
        };
        Ok(self)
    }

    /// Residual degrees of freedom when Σ̂ carries a dispersion estimated from
    /// the same responses.
    pub fn residual_df(&self) -> Option<f64> {
        match self.moments.scale {
            ScaleFit::Dispersion { df } => Some(df),
            _ => None,
        }
    }

    /// Var(nSᵀRS − tr RΣ̂) minus the weighted-χ² variance 2 tr(RΣ̂)², to first
    /// order. With d_i = f_iᵀRf_i over the factor rows, it collects the
    /// response's excess kurtosis Σ κ_i d_i² and the covariance between the
    /// statistic and its estimated centre tr RΣ̂ = Σ d_i.
    pub fn variance_excess(&self, r: &[f64]) -> f64 {
        if self.moments.kurtosis.is_empty() {
            return 0.0;
        }
        let d: Vec<f64> =
            self.factor.row_iter().map(|row| row.iter().zip(r).map(|(f, r)| r * f * f).sum()).collect();
        let mut excess: f64 = d.iter().zip(&self.moments.kurtosis).map(|(d, k)| k * d * d).sum();
        match &self.moments.scale {
            ScaleFit::Known => {}
            ScaleFit::Dispersion { df } => {
                let t: f64 = d.iter().sum();
                excess -= 2.0 * t * t / df;
            }
            ScaleFit::MeanVariance { x, info_inv, slope, var } => {
                // tr RΣ̂ − E ≈ cᵀε with c = X (XᵀVX)⁻¹ Σ_i x_i d_i ν′(μ̂_i)
                let ds = DVector::from_iterator(d.len(), d.iter().zip(slope).map(|(d, s)| d * s));
                let c = x * (info_inv * x.tr_mul(&ds));
                for i in 0..d.len() {
                    excess += c[i] * c[i] * var[i] - 2.0 * d[i] * c[i] * slope[i];
                }
            }
        }
        excess
    }

    pub fn dense(&self) -> Option<&DMatrix<f64>> {
        self.dense.as_ref()
    }

    /// Dense J₂ × J₂ matrix (materialised on demand for the low-rank form).
    pub fn matrix(&self) -> DMatrix<f64> {
        match &self.dense {
            Some(m) => m.clone(),
            None => shrink(linalg::gram_columns(&self.factor), &self.diag, self.shrinkage_delta),
        }
    }

    /// wᵀ Σ̂ w.
    pub fn quad_form(&self, w: &[f64]) -> f64 {
        let wv = DVector::from_column_slice(w);
        if let Some(m) = &self.dense {
            return wv.dot(&(m * &wv));
        }
        let fw = &self.factor * &wv;
        let low = fw.norm_squared();
        let d: f64 = w.iter().zip(&self.diag).map(|(w, d)| w * w * d).sum();
        (1.0 - self.shrinkage_delta) * low + self.shrinkage_delta * d
    }

    /// Build directly from a dense symmetric matrix (no factor available).
    pub fn from_dense(matrix: DMatrix<f64>) -> Result<ScoreCovariance> {
        if !matrix.is_square() {
            return Err(Error::dim("covariance matrix must be square"));
        }
        let diag = matrix.diagonal().iter().copied().collect();
        Ok(ScoreCovariance {
            factor: DMatrix::zeros(0, matrix.ncols()),
            dense: Some(matrix),
            diag,
            shrinkage_delta: 0.0,
            min_eigenvalue_estimate: 0.0,
            moments: NullMoments::default(),
        })
    }
}

fn shrink(mut m: DMatrix<f64>, diag: &[f64], delta: f64) -> DMatrix<f64> {
    if delta > 0.0 {
        m *= 1.0 - delta;
        for (k, d) in diag.iter().enumerate() {
            m[(k, k)] = *d;
        }
    }
    m
}

fn certified_above(m: &DMatrix<f64>, threshold: f64) -> bool {
    let mut shifted = m.clone();
    for k in 0..m.nrows() {
        shifted[(k, k)] -= threshold;
    }
    shifted.cholesky().is_some()
}

/// Σ̂ = n⁻¹ Σ_i v̂_i G_i G_iᵀ with v̂_i = a_i(φ̂)ν(μ̂_i), then diagonal shrinkage.
///
/// `g` should already be adjusted for covariates (see [`adjust_for_covariates`]).
pub fn estimate_score_covariance(
    fit: &NullModelFit,
    g: &DMatrix<f64>,
    shrinkage: Shrinkage,
) -> Result<ScoreCovariance> {
    let n = fit.n();
    if g.nrows() != n {
        return Err(Error::dim(format!("genotypes have {} rows, fit has {}", g.nrows(), n)));
    }
    let j2 = g.ncols();
    let v = fit.response_variances();
    let mut factor = g.clone();
    for (i, mut row) in factor.row_iter_mut().enumerate() {
        row *= (v[i].max(0.0) / n as f64).sqrt();
    }
    let diag: Vec<f64> = factor.column_iter().map(|c| c.norm_squared()).collect();
    let trace: f64 = diag.iter().sum();
    let min_diag = diag.iter().copied().fold(f64::INFINITY, f64::min);

    let (delta, dense, min_eig) = match shrinkage {
        Shrinkage::Fixed(delta) => {
            if !(0.0..=1.0).contains(&delta) {
                return Err(Error::arg(format!("shrinkage fraction {delta} outside [0, 1]")));
            }
            if j2 > n && delta == 0.0 {
                (0.0, None, 0.0)
            } else {
                let m = shrink(linalg::gram_columns(&factor), &diag, delta);
                (delta, Some(m), delta * min_diag.max(0.0))
            }
        }
        Shrinkage::Auto if j2 > n => (0.0, None, 0.0),
        Shrinkage::Auto => {
            let base = linalg::gram_columns(&factor);
            let threshold = 1e-8 * trace / j2.max(1) as f64;
            let mut chosen = None;
            for &delta in SHRINKAGE_LADDER.iter() {
                if delta > 0.0 && delta * min_diag >= threshold {
                    chosen = Some((delta, delta * min_diag));
                    break;
                }
                let candidate = shrink(base.clone(), &diag, delta);
                if certified_above(&candidate, threshold) {
                    chosen = Some((delta, threshold));
                    break;
                }
            }
            let (delta, bound) = chosen.unwrap_or((SHRINKAGE_LADDER[SHRINKAGE_LADDER.len() - 1], 0.0));
            (delta, Some(shrink(base, &diag, delta)), bound)
        }
    };

    let kurtosis = fit.fitted_means.iter().map(|&m| fit.family.excess_kurtosis(m)).collect();
    let moments = NullMoments { kurtosis, scale: ScaleFit::Known };
    Ok(ScoreCovariance { factor, dense, diag, shrinkage_delta: delta, min_eigenvalue_estimate: min_eig, moments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{fit_null_glm, intercept_only, GlmFamily};

    fn fit_from_residuals(res: &[f64]) -> NullModelFit {
        NullModelFit {
            family: GlmFamily::GaussianIdentity,
            beta_x: alloc::vec![0.0],
            fitted_means: alloc::vec![0.0; res.len()],
            residuals: res.to_vec(),
            dispersion: 1.0,
            converged: true,
            iterations: 1,
        }
    }

    fn test_genotypes(n: usize, j: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, j, |i, k| (((i * 13 + k * 7) % 11) as f64 - 5.0) / 3.0 + ((i + k) % 3) as f64 * 0.1)
    }

    #[test]
    fn binomial_excess_matches_intercept_only_formula() {
        // With X = 1 and common v = μ(1−μ), the general expression reduces to
        // κ Σd² − (1 − 4v)(Σd)²/(n v), κ = (1 − 6v)/v.
        let n = 30;
        let y: Vec<f64> = (0..n).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let x = intercept_only(n);
        let fit = fit_null_glm(&y, &x, GlmFamily::BinomialLogit).unwrap();
        let g = adjust_for_covariates(&fit, &x, &test_genotypes(n, 4)).unwrap();
        let cov = estimate_score_covariance(&fit, &g, Shrinkage::Fixed(0.0)).unwrap().with_fitted_null(&fit, &x).unwrap();
        let r = [1.0, 0.5, 0.25, 2.0];
        let mu = fit.fitted_means[0];
        let v = mu * (1.0 - mu);
        let d: Vec<f64> = (0..n)
            .map(|i| (0..4).map(|k| r[k] * v * g[(i, k)] * g[(i, k)] / n as f64).sum())
            .collect();
        let sd: f64 = d.iter().sum();
        let sd2: f64 = d.iter().map(|d| d * d).sum();
        let expected = (1.0 - 6.0 * v) / v * sd2 - (1.0 - 4.0 * v) * sd * sd / (n as f64 * v);
        let got = cov.variance_excess(&r);
        assert!((got - expected).abs() < 1e-12 * expected.abs().max(1.0), "{got} vs {expected}");
    }

    #[test]
    fn gaussian_excess_is_dispersion_term() {
        let n = 25;
        let y: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let x = intercept_only(n);
        let fit = fit_null_glm(&y, &x, GlmFamily::GaussianIdentity).unwrap();
        let g = adjust_for_covariates(&fit, &x, &test_genotypes(n, 3)).unwrap();
        let cov = estimate_score_covariance(&fit, &g, Shrinkage::Fixed(0.0)).unwrap();
        assert_eq!(cov.variance_excess(&[1.0; 3]), 0.0);
        assert_eq!(cov.residual_df(), None);
        let cov = cov.with_fitted_null(&fit, &x).unwrap();
        assert_eq!(cov.residual_df(), Some((n - 1) as f64));
        let t = cov.trace();
        let got = cov.variance_excess(&[1.0; 3]);
        assert!((got + 2.0 * t * t / (n - 1) as f64).abs() < 1e-12 * t * t);
    }

    #[test]
    fn excess_scales_with_weights_squared() {
        let n = 40;
        let y: Vec<f64> = (0..n).map(|i| if (i * 5) % 7 < 3 { 1.0 } else { 0.0 }).collect();
        let x = DMatrix::from_fn(n, 2, |i, k| if k == 0 { 1.0 } else { (i % 4) as f64 });
        let fit = fit_null_glm(&y, &x, GlmFamily::BinomialLogit).unwrap();
        let g = adjust_for_covariates(&fit, &x, &test_genotypes(n, 5)).unwrap();
        let cov = estimate_score_covariance(&fit, &g, Shrinkage::Auto).unwrap().with_fitted_null(&fit, &x).unwrap();
        let r = [0.3, 1.0, 0.0, 0.7, 0.1];
        let r3: Vec<f64> = r.iter().map(|v| 3.0 * v).collect();
        let (a, b) = (cov.variance_excess(&r), cov.variance_excess(&r3));
        assert!((b - 9.0 * a).abs() < 1e-10 * a.abs());
    }

    #[test]
    fn zero_residuals_give_zero_scores() {
        let fit = fit_from_residuals(&[0.0; 5]);
        let g = DMatrix::from_fn(5, 3, |i, j| (i * 3 + j) as f64);
        assert!(score_vector(&fit, &g).unwrap().s.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn orthogonal_residuals() {
        let fit = fit_from_residuals(&[1.0, -1.0]);
        let g = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert_eq!(score_vector(&fit, &g).unwrap().s, alloc::vec![0.0]);
    }

    #[test]
    fn hand_computed_score() {
        let fit = fit_from_residuals(&[1.0, -1.0, 2.0, 0.0]);
        let g = DMatrix::from_column_slice(4, 1, &[0.5, 0.5, -1.0, 1.0]);
        let s = score_vector(&fit, &g).unwrap();
        assert!((s.s[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let fit = fit_from_residuals(&[1.0, 2.0]);
        assert!(matches!(score_vector(&fit, &DMatrix::zeros(3, 1)), Err(Error::Dimension(_))));
    }

    #[test]
    fn balanced_binary_covariance_is_quarter_gram() {
        let y = [1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let fit = fit_null_glm(&y, &intercept_only(6), GlmFamily::BinomialLogit).unwrap();
        let g = DMatrix::from_fn(6, 2, |i, j| ((i + 2 * j) % 4) as f64 - 1.5);
        let cov = estimate_score_covariance(&fit, &g, Shrinkage::Fixed(0.0)).unwrap();
        let expected = g.tr_mul(&g) * (0.25 / 6.0);
        assert!((cov.matrix() - expected).amax() < 1e-14);
    }

    #[test]
    fn orthonormal_gaussian_is_identity() {
        // columns orthogonal with Σ g² = n
        let g = DMatrix::from_column_slice(4, 2, &[1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0]);
        let fit = fit_from_residuals(&[0.3, -0.1, 0.2, -0.4]);
        let cov = estimate_score_covariance(&fit, &g, Shrinkage::Auto).unwrap();
        assert!((cov.matrix() - DMatrix::identity(2, 2)).amax() < 1e-14);
        assert_eq!(cov.shrinkage_delta(), 0.0);
    }

    #[test]
    fn full_shrinkage_is_diagonal() {
        let fit = fit_from_residuals(&[0.3, -0.1, 0.2, -0.4, 0.5]);
        let g = DMatrix::from_fn(5, 3, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let cov = estimate_score_covariance(&fit, &g, Shrinkage::Fixed(1.0)).unwrap();
        let m = cov.matrix();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(m[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn rank_deficient_triggers_ladder() {
        // five individuals, four columns, centred: rank ≤ 4 but one column duplicates another
        let mut g = DMatrix::from_fn(5, 4, |i, j| ((i * 5 + j * 3) % 7) as f64);
        let c0 = g.column(0).clone_owned();
        g.column_mut(3).copy_from(&c0);
        let fit = fit_from_residuals(&[0.3, -0.1, 0.2, -0.4, 0.0]);
        let cov = estimate_score_covariance(&fit, &g, Shrinkage::Auto).unwrap();
        assert!(cov.shrinkage_delta() > 0.0);
        let ev = cov.matrix().symmetric_eigenvalues();
        assert!(ev.min() >= 1e-8 * cov.trace() / 4.0 * 0.999);
    }

    #[test]
    fn low_rank_quad_form_matches_dense() {
        let fit = fit_from_residuals(&[0.3, -0.1, 0.2]);
        let g = DMatrix::from_fn(3, 6, |i, j| ((i * 5 + j * 3) % 7) as f64 - 3.0);
        let cov = estimate_score_covariance(&fit, &g, Shrinkage::Auto).unwrap();
        assert!(cov.dense().is_none());
        let w = [0.5, -1.0, 2.0, 0.0, 1.5, -0.3];
        let dense = cov.matrix();
        let wv = DVector::from_column_slice(&w);
        assert!((cov.quad_form(&w) - wv.dot(&(dense * &wv))).abs() < 1e-12);
    }

    #[test]
    fn centering_matches_projection() {
        let y = [0.2, 1.1, -0.4, 0.9, 0.3, -1.2, 0.8];
        let x = intercept_only(7);
        let fit = fit_null_glm(&y, &x, GlmFamily::GaussianIdentity).unwrap();
        let g = DMatrix::from_fn(7, 2, |i, j| ((i * 3 + j * 5) % 4) as f64);
        let adj = adjust_for_covariates(&fit, &x, &g).unwrap();
        for col in adj.column_iter() {
            assert!(col.sum().abs() < 1e-12);
        }
        // scores invariant under the adjustment
        let s0 = score_vector(&fit, &g).unwrap();
        let s1 = score_vector(&fit, &adj).unwrap();
        for (a, b) in s0.s.iter().zip(&s1.s) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
