use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diagonal weights r_j = |β̂_j|^{γ−2}, computed in log space and scaled so
/// the largest entry is 1.
///
/// The scaling multiplies the statistic and every eigenvalue by the same
/// constant, which leaves tail probabilities unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrixR {
    pub r: Vec<f64>,
    pub gamma: u32,
    /// Unnormalised weights are `r_j · exp(log_normalization)`.
    pub log_normalization: f64,
}

impl WeightMatrixR {
    pub fn from_effects(effects: &[f64], gamma: u32) -> Result<WeightMatrixR> {
        if gamma < 2 || gamma % 2 != 0 {
            return Err(Error::arg(format!("gamma must be an even integer >= 2, got {gamma}")));
        }
        if gamma == 2 {
            return Ok(WeightMatrixR { r: alloc::vec![1.0; effects.len()], gamma, log_normalization: 0.0 });
        }
        let power = f64::from(gamma - 2);
        let logs: Vec<f64> = effects
            .iter()
            .map(|b| if *b == 0.0 || !b.is_finite() { f64::NEG_INFINITY } else { power * b.abs().ln() })
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Ok(WeightMatrixR { r: alloc::vec![0.0; effects.len()], gamma, log_normalization: 0.0 });
        }
        let r = logs.iter().map(|l| (l - max).exp()).collect();
        Ok(WeightMatrixR { r, gamma, log_normalization: max })
    }

    pub fn identity(dim: usize) -> WeightMatrixR {
        WeightMatrixR { r: alloc::vec![1.0; dim], gamma: 2, log_normalization: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.r.iter().all(|&v| v == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_two_is_identity() {
        let w = WeightMatrixR::from_effects(&[0.0, -3.0, 1e-9], 2).unwrap();
        assert_eq!(w.r, alloc::vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn normalised_to_unit_max() {
        let w = WeightMatrixR::from_effects(&[1.0, 2.0], 4).unwrap();
        assert!((w.r[0] - 0.25).abs() < 1e-15);
        assert!((w.r[1] - 1.0).abs() < 1e-15);
        assert!((w.log_normalization - 4.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn large_gamma_does_not_overflow() {
        let w = WeightMatrixR::from_effects(&[50.0, -40.0, 0.5], 42).unwrap();
        assert!(w.r.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert_eq!(w.r[0], 1.0);
        assert!((w.r[1] - (0.8f64).powi(40)).abs() < 1e-15);
    }

    #[test]
    fn odd_gamma_rejected() {
        assert!(WeightMatrixR::from_effects(&[1.0], 3).is_err());
        assert!(WeightMatrixR::from_effects(&[1.0], 0).is_err());
    }

    #[test]
    fn all_zero_effects() {
        let w = WeightMatrixR::from_effects(&[0.0, 0.0], 6).unwrap();
        assert!(w.is_zero());
    }
}
