//! Monte Carlo estimate of P(Σ λ_j χ²₁ⱼ > q); a test oracle, not a main route.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use num_traits::Float;

use super::QuadFormDist;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const MIN_MC_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McTail {
    pub p_value: f64,
    pub std_error: f64,
    pub draws: usize,
}

pub fn mc_quadform_pvalue(dist: &QuadFormDist, q: f64, draws: usize, seed: u64) -> Result<McTail> {
    if draws < MIN_MC_DRAWS {
        return Err(Error::arg(alloc::format!("need at least {MIN_MC_DRAWS} Monte Carlo draws, got {draws}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut exceed = 0usize;
    for _ in 0..draws {
        let mut s = 0.0;
        let mut hit = false;
        for &l in dist.lambdas() {
            let z: f64 = rng.sample(StandardNormal);
            s += l * z * z;
            if s > q {
                hit = true;
                break;
            }
        }
        if hit {
            exceed += 1;
        }
    }
    let p = exceed as f64 / draws as f64;
    Ok(McTail { p_value: p, std_error: (p * (1.0 - p) / draws as f64).sqrt(), draws })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_threshold_always_exceeded() {
        let d = QuadFormDist::new(alloc::vec![1.0, 0.5]).unwrap();
        let r = mc_quadform_pvalue(&d, -1.0, MIN_MC_DRAWS, 1).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn deterministic_and_rejects_few_draws() {
        let d = QuadFormDist::new(alloc::vec![2.0, 1.0]).unwrap();
        let a = mc_quadform_pvalue(&d, 4.0, 20_000, 9).unwrap();
        assert_eq!(a, mc_quadform_pvalue(&d, 4.0, 20_000, 9).unwrap());
        assert!(mc_quadform_pvalue(&d, 4.0, 100, 9).is_err());
    }
}
