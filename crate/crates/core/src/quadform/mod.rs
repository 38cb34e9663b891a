//! Tail probabilities of weighted sums of independent χ²₁ variables.
//!
//! Under the null hypothesis the weighted statistic n·SᵀRS behaves like
//! Σ_j λ_j χ²₁ⱼ with λ the eigenvalues of R^{1/2} Σ_s R^{1/2}. The main
//! route is Davies' characteristic-function inversion; Imhof's integral is
//! the fallback and cross-check, the normal approximation is a diagnostic and
//! the Monte Carlo estimator is a test oracle.

mod davies;
mod dist;
mod imhof;
mod mc;
mod normal;
mod quadrature;
mod weights;

pub use davies::{davies_cdf, davies_pvalue, studentized_pvalue, DaviesOutput, DAVIES_TERM_LIMIT};
pub use dist::{eigenvalues_weighted, QuadFormDist, EIGEN_TRUNCATION};
pub use imhof::imhof_pvalue;
pub use mc::{mc_quadform_pvalue, McTail, MIN_MC_DRAWS};
pub use normal::normal_approx_pvalue;
pub use weights::WeightMatrixR;

use serde::{Deserialize, Serialize};

/// Smallest p-value ever reported.
pub const P_FLOOR: f64 = 1e-300;

pub const DEFAULT_ACCURACY: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMethod {
    Davies,
    Imhof,
}

/// P(Q > q) with the method that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailProbability {
    pub p_value: f64,
    pub error_bound: f64,
    pub method: TailMethod,
    /// Davies fault code (0 when clean); non-zero with `method == Imhof` means
    /// the fallback was used.
    pub fault: u8,
}

impl TailProbability {
    pub(crate) fn certain(p: f64, method: TailMethod) -> Self {
        TailProbability { p_value: p, error_bound: 0.0, method, fault: 0 }
    }

    pub fn used_fallback(&self) -> bool {
        self.method == TailMethod::Imhof && self.fault != 0
    }
}

pub(crate) fn clamp_p(p: f64) -> f64 {
    if p.is_nan() {
        return 1.0;
    }
    p.clamp(P_FLOOR, 1.0)
}
