//! Two-moment normal approximation, used as a diagnostic only.

#[allow(unused_imports)]
use num_traits::Float;

use super::{clamp_p, QuadFormDist};

/// P(Z > (q − Σλ)/√(2Σλ²)).
pub fn normal_approx_pvalue(dist: &QuadFormDist, q: f64) -> f64 {
    if dist.trace_sq() == 0.0 {
        return if q > 0.0 { 0.0 } else { 1.0 };
    }
    let z = (q - dist.trace()) / (2.0 * dist.trace_sq()).sqrt();
    clamp_p(0.5 * libm::erfc(z / core::f64::consts::SQRT_2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_df_value() {
        let d = QuadFormDist::new(alloc::vec![1.0]).unwrap();
        let p = normal_approx_pvalue(&d, 3.841);
        assert!((p - 0.0222).abs() < 1e-4, "{p}");
    }

    #[test]
    fn mean_gives_half() {
        let d = QuadFormDist::new(alloc::vec![3.0, 2.0, 1.0]).unwrap();
        assert!((normal_approx_pvalue(&d, 6.0) - 0.5).abs() < 1e-15);
    }
}
