use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::WeightMatrixR;
use crate::error::{Error, Result};
use crate::glm::ScoreCovariance;
use crate::linalg;

/// Eigenvalues below this fraction of the largest are set to zero.
pub const EIGEN_TRUNCATION: f64 = 1e-12;

/// Columns whose combined weighted variance is below this fraction of the
/// total are dropped before the eigenproblem.
const PRUNE_FRACTION: f64 = 1e-13;

/// Null law Σ_j λ_j χ²₁ⱼ, eigenvalues sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadFormDist {
    lambdas: Vec<f64>,
    trace: f64,
    trace_sq: f64,
}

impl QuadFormDist {
    pub fn new(mut lambdas: Vec<f64>) -> Result<QuadFormDist> {
        if lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::Numerical("non-finite eigenvalue".into()));
        }
        lambdas.sort_by(|a, b| b.total_cmp(a));
        let max = lambdas.first().copied().unwrap_or(0.0);
        if max < 0.0 {
            return Err(Error::arg("weighted chi-square needs nonnegative weights"));
        }
        let cut = EIGEN_TRUNCATION * max;
        for l in lambdas.iter_mut() {
            if *l < cut {
                if *l < -1e-8 * max.max(1e-300) {
                    return Err(Error::Numerical("matrix is not positive semidefinite".into()));
                }
                *l = 0.0;
            }
        }
        while lambdas.len() > 1 && lambdas.last() == Some(&0.0) {
            lambdas.pop();
        }
        let trace = lambdas.iter().sum();
        let trace_sq = lambdas.iter().map(|l| l * l).sum();
        Ok(QuadFormDist { lambdas, trace, trace_sq })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn trace_sq(&self) -> f64 {
        self.trace_sq
    }

    /// λ_j / √Σλ².
    pub fn rho(&self) -> Vec<f64> {
        let s = self.trace_sq.sqrt();
        self.lambdas.iter().map(|l| l / s).collect()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lambdas.iter().all(|&l| l == 0.0)
    }

    pub fn scaled(&self, c: f64) -> QuadFormDist {
        QuadFormDist {
            lambdas: self.lambdas.iter().map(|l| l * c).collect(),
            trace: self.trace * c,
            trace_sq: self.trace_sq * c * c,
        }
    }
}

/// Columns that carry non-negligible weighted variance.
fn kept_columns(diag: &[f64], r: &[f64]) -> Vec<usize> {
    let contrib: Vec<f64> = diag.iter().zip(r).map(|(d, r)| d.max(0.0) * r).collect();
    let total: f64 = contrib.iter().sum();
    let mut order: Vec<usize> = (0..contrib.len()).collect();
    order.sort_by(|&a, &b| contrib[a].total_cmp(&contrib[b]).then(a.cmp(&b)));
    let budget = PRUNE_FRACTION * total;
    let mut dropped = 0.0;
    let mut keep = alloc::vec![true; contrib.len()];
    for &j in &order {
        if contrib[j] == 0.0 || dropped + contrib[j] <= budget {
            dropped += contrib[j];
            keep[j] = false;
        } else {
            break;
        }
    }
    (0..contrib.len()).filter(|&j| keep[j]).collect()
}

/// Eigenvalues of R^{1/2} Σ̂ R^{1/2} (the nonzero spectrum of C_sᵀ R C_s).
pub fn eigenvalues_weighted(sigma: &ScoreCovariance, weights: &WeightMatrixR) -> Result<QuadFormDist> {
    let j2 = sigma.dim();
    if weights.len() != j2 {
        return Err(Error::dim(alloc::format!("{} weights for a {}-dimensional covariance", weights.len(), j2)));
    }
    let kept = kept_columns(sigma.diagonal(), &weights.r);
    if kept.is_empty() {
        return QuadFormDist::new(alloc::vec![0.0]);
    }
    let sqrt_r: Vec<f64> = kept.iter().map(|&j| weights.r[j].sqrt()).collect();
    let matrix = match sigma.dense() {
        Some(dense) => {
            let k = kept.len();
            DMatrix::from_fn(k, k, |a, b| sqrt_r[a] * dense[(kept[a], kept[b])] * sqrt_r[b])
        }
        None => {
            let f = sigma.factor();
            let mut b = linalg::select_columns(f, &kept);
            for (k, mut col) in b.column_iter_mut().enumerate() {
                col *= sqrt_r[k];
            }
            if b.ncols() <= b.nrows() {
                linalg::gram_columns(&b)
            } else {
                linalg::gram_rows(&b)
            }
        }
    };
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entry in weighted covariance".into()));
    }
    QuadFormDist::new(linalg::symmetric_eigenvalues_desc(matrix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::ScoreCovariance;

    #[test]
    fn identity_case() {
        let sigma = ScoreCovariance::from_dense(DMatrix::identity(3, 3)).unwrap();
        let d = eigenvalues_weighted(&sigma, &WeightMatrixR::identity(3)).unwrap();
        for l in d.lambdas() {
            assert!((l - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_product() {
        let sigma = ScoreCovariance::from_dense(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(alloc::vec![2.0, 1.0]))).unwrap();
        let w = WeightMatrixR { r: alloc::vec![4.0, 1.0], gamma: 4, log_normalization: 0.0 };
        let d = eigenvalues_weighted(&sigma, &w).unwrap();
        assert!((d.lambdas()[0] - 8.0).abs() < 1e-12);
        assert!((d.lambdas()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_of_tiny_values() {
        let d = QuadFormDist::new(alloc::vec![1.0, 1e-14, 0.5]).unwrap();
        assert_eq!(d.lambdas(), &[1.0, 0.5]);
        assert!(QuadFormDist::new(alloc::vec![1.0, -0.5]).is_err());
    }
}
