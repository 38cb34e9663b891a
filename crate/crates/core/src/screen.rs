//! Training-half variant selection and effect-size weights.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::glm::{fit_null_glm, marginal_fit_fused, GenotypeMatrix, GlmFamily};

/// How the candidate set is chosen on the training half.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScreenMethod {
    /// Rank by |z| of single-variant GLM fits.
    #[default]
    MarginalZ,
    /// Caller-supplied order (e.g. the true support); only the first `J₂`
    /// usable entries are kept and fitted.
    ExternalRanking(Vec<usize>),
}

/// Selected variants in rank order with their training-half effect estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenSet {
    pub selected: Vec<usize>,
    pub weights: Vec<f64>,
    /// |z| of each selected variant.
    pub screen_stats: Vec<f64>,
    pub method: ScreenMethodKind,
    /// Usable variants that could not be fitted.
    pub failed_fits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScreenMethodKind {
    MarginalZ,
    ExternalRanking,
}

impl ScreenSet {
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }
}

/// Screen the training half and keep `j2` variants with their marginal
/// effect estimates as weights.
///
/// Only the training rows are passed in, so the test half can never leak into
/// selection. Variants flagged constant in `g_train` are skipped, as are
/// variants whose marginal fit fails.
pub fn screen_and_weight(
    y_train: &[f64],
    x_train: &DMatrix<f64>,
    g_train: &GenotypeMatrix,
    family: GlmFamily,
    j2: usize,
    method: &ScreenMethod,
) -> Result<ScreenSet> {
    if j2 == 0 {
        return Err(Error::arg("number of selected variants must be at least 1"));
    }
    let n = y_train.len();
    if g_train.n_individuals() != n || x_train.nrows() != n {
        return Err(Error::dim("training response, covariates and genotypes disagree on sample size"));
    }
    let null = fit_null_glm(y_train, x_train, family)?;
    let values = g_train.values();
    let fit_column = |j: usize| {
        let col = values.column(j);
        marginal_fit_fused(y_train, x_train, col.as_slice(), family, &null.beta_x).ok()
    };

    let mut failed = 0;
    let (selected, weights, stats, kind) = match method {
        ScreenMethod::MarginalZ => {
            let mut ranked: Vec<(usize, f64, f64)> = Vec::new();
            for j in 0..g_train.n_variants() {
                if g_train.is_excluded(j) {
                    continue;
                }
                match fit_column(j) {
                    Some(f) if f.z.is_finite() => ranked.push((j, f.beta, f.z.abs())),
                    _ => failed += 1,
                }
            }
            ranked.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
            ranked.truncate(j2);
            let sel = ranked.iter().map(|r| r.0).collect();
            let w = ranked.iter().map(|r| r.1).collect();
            let s = ranked.iter().map(|r| r.2).collect();
            (sel, w, s, ScreenMethodKind::MarginalZ)
        }
        ScreenMethod::ExternalRanking(order) => {
            let mut seen = alloc::vec![false; g_train.n_variants()];
            let (mut sel, mut w, mut s) = (Vec::new(), Vec::new(), Vec::new());
            for &j in order {
                if j >= seen.len() {
                    return Err(Error::arg(format!("ranked variant {j} out of range")));
                }
                if seen[j] {
                    return Err(Error::arg(format!("variant {j} ranked twice")));
                }
                seen[j] = true;
                if sel.len() == j2 || g_train.is_excluded(j) {
                    continue;
                }
                match fit_column(j) {
                    Some(f) if f.z.is_finite() => {
                        sel.push(j);
                        w.push(f.beta);
                        s.push(f.z.abs());
                    }
                    _ => failed += 1,
                }
            }
            (sel, w, s, ScreenMethodKind::ExternalRanking)
        }
    };
    if selected.is_empty() {
        return Err(Error::Numerical("no variant could be screened on the training half".into()));
    }
    Ok(ScreenSet { selected, weights, screen_stats: stats, method: kind, failed_fits: failed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::intercept_only;
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_genotypes(n: usize, j: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng_from_seed(seed);
        DMatrix::from_fn(n, j, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn planted_signal_ranks_first() {
        let n = 80;
        let g = random_genotypes(n, 5, 4);
        let mut rng = rng_from_seed(5);
        let y: Vec<f64> = (0..n).map(|i| 2.0 * g[(i, 3)] + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
        let gm = GenotypeMatrix::new(g.clone(), None).unwrap();
        let s = screen_and_weight(&y, &intercept_only(n), &gm, GlmFamily::GaussianIdentity, 1, &ScreenMethod::MarginalZ).unwrap();
        assert_eq!(s.selected, [3]);
        // exhaustive ranking with independent closed-form least squares
        let mut best = (0, 0.0);
        for j in 0..5 {
            let col = g.column(j);
            let gm = col.mean();
            let ym = y.iter().sum::<f64>() / n as f64;
            let sxy: f64 = (0..n).map(|i| (col[i] - gm) * (y[i] - ym)).sum();
            let sxx: f64 = (0..n).map(|i| (col[i] - gm).powi(2)).sum();
            let b = sxy / sxx;
            let rss: f64 = (0..n).map(|i| (y[i] - ym - b * (col[i] - gm)).powi(2)).sum();
            let z = b / (rss / (n - 2) as f64 / sxx).sqrt();
            if z.abs() > best.1 {
                best = (j, z.abs());
            }
        }
        assert_eq!(best.0, 3);
        assert!((s.screen_stats[0] - best.1).abs() < 1e-8 * best.1);
        assert!((s.weights[0] - 2.0).abs() < 0.2);
    }

    #[test]
    fn full_selection_is_identity_on_variant_set() {
        let n = 60;
        let g = GenotypeMatrix::new(random_genotypes(n, 7, 1), None).unwrap();
        let y: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let x = intercept_only(n);
        let a = screen_and_weight(&y, &x, &g, GlmFamily::BinomialLogit, 7, &ScreenMethod::MarginalZ).unwrap();
        let b = screen_and_weight(&y, &x, &g, GlmFamily::BinomialLogit, 7, &ScreenMethod::ExternalRanking((0..7).collect()))
            .unwrap();
        let mut sa = a.selected.clone();
        sa.sort_unstable();
        assert_eq!(sa, b.selected);
        for (k, &j) in a.selected.iter().enumerate() {
            let pos = b.selected.iter().position(|&v| v == j).unwrap();
            assert!((a.weights[k] - b.weights[pos]).abs() < 1e-12);
        }
    }

    #[test]
    fn external_ranking_keeps_requested_support() {
        let n = 50;
        let g = GenotypeMatrix::new(random_genotypes(n, 10, 2), None).unwrap();
        let y: Vec<f64> = random_genotypes(n, 1, 3).iter().copied().collect();
        let s = screen_and_weight(&y, &intercept_only(n), &g, GlmFamily::GaussianIdentity, 3, &ScreenMethod::ExternalRanking(alloc::vec![8, 2, 5, 1]))
            .unwrap();
        assert_eq!(s.selected, [8, 2, 5]);
        assert_eq!(s.method, ScreenMethodKind::ExternalRanking);
    }

    #[test]
    fn constant_columns_never_selected() {
        let n = 40;
        let mut v = random_genotypes(n, 4, 6);
        v.column_mut(1).fill(1.0);
        let g = crate::glm::standardize(&GenotypeMatrix::new(v, None).unwrap()).unwrap();
        let y: Vec<f64> = random_genotypes(n, 1, 7).iter().copied().collect();
        let s = screen_and_weight(&y, &intercept_only(n), &g, GlmFamily::GaussianIdentity, 10, &ScreenMethod::MarginalZ).unwrap();
        assert_eq!(s.len(), 3);
        assert!(!s.selected.contains(&1));
    }

    #[test]
    fn ties_broken_by_index() {
        let n = 30;
        let col: Vec<f64> = random_genotypes(n, 1, 9).iter().copied().collect();
        let g = DMatrix::from_fn(n, 3, |i, _| col[i]);
        let y: Vec<f64> = (0..n).map(|i| col[i] + if i % 3 == 0 { 1.0 } else { -0.5 }).collect();
        let gm = GenotypeMatrix::new(g, None).unwrap();
        let s = screen_and_weight(&y, &intercept_only(n), &gm, GlmFamily::GaussianIdentity, 2, &ScreenMethod::MarginalZ).unwrap();
        assert_eq!(s.selected, [0, 1]);
    }

    #[test]
    fn invalid_rankings_rejected() {
        let n = 20;
        let g = GenotypeMatrix::new(random_genotypes(n, 3, 1), None).unwrap();
        let y: Vec<f64> = random_genotypes(n, 1, 2).iter().copied().collect();
        let x = intercept_only(n);
        for order in [alloc::vec![0, 0], alloc::vec![5]] {
            assert!(screen_and_weight(&y, &x, &g, GlmFamily::GaussianIdentity, 2, &ScreenMethod::ExternalRanking(order)).is_err());
        }
        assert!(screen_and_weight(&y, &x, &g, GlmFamily::GaussianIdentity, 0, &ScreenMethod::MarginalZ).is_err());
    }
}
