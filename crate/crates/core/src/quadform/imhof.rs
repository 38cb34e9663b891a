//! Imhof's real-integral inversion for P(Σ λ_j χ²₁ⱼ > q).
//!
//! The integrand oscillates with period ~4π/q and decays only like
//! u^{-1-r/2}, so the infinite range is cut into half-period chunks; the
//! sequence of partial sums is accelerated with Wynn's ε-algorithm and the
//! loop also stops as soon as the analytic tail bound drops below tolerance.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use super::quadrature::integrate;
use super::{clamp_p, QuadFormDist, TailMethod, TailProbability};
use crate::error::{Error, Result};

const MAX_CHUNKS: usize = 100_000;
const WYNN_WINDOW: usize = 40;
const STABLE_STEPS: usize = 3;

fn integrand(lambdas: &[f64], q: f64, u: f64) -> f64 {
    if u == 0.0 {
        return 0.5 * (lambdas.iter().sum::<f64>() - q);
    }
    let mut theta = -0.5 * q * u;
    let mut log_rho = 0.0;
    for &l in lambdas {
        let x = l * u;
        theta += 0.5 * x.atan();
        log_rho += 0.25 * (x * x).ln_1p();
    }
    theta.sin() / (u * log_rho.exp())
}

/// ∫_U^∞ 1/(u ρ(u)) du / π ≥ |remaining contribution to p|.
fn tail_bound(lambdas: &[f64], upper: f64) -> f64 {
    let r = lambdas.len() as f64;
    let log_prod: f64 = lambdas.iter().map(|l| 0.5 * l.ln()).sum();
    let log_b = (2.0 / r).ln() - 0.5 * r * upper.ln() - log_prod - PI.ln();
    log_b.exp()
}

/// Limit of a sequence by Wynn's ε-algorithm (last even column entry).
pub(crate) fn wynn_epsilon(seq: &[f64]) -> f64 {
    let n = seq.len();
    if n < 3 {
        return *seq.last().unwrap_or(&0.0);
    }
    // prev = ε_{k-1}, cur = ε_k, column by column
    let mut prev: Vec<f64> = alloc::vec![0.0; n + 1];
    let mut cur: Vec<f64> = seq.to_vec();
    let mut best = seq[n - 1];
    let mut k = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let d = cur[i + 1] - cur[i];
            if d == 0.0 || !d.is_finite() {
                return best;
            }
            next.push(prev[i + 1] + 1.0 / d);
        }
        k += 1;
        prev = cur;
        cur = next;
        if k % 2 == 0 {
            if let Some(&v) = cur.last() {
                if v.is_finite() {
                    best = v;
                } else {
                    return best;
                }
            }
        }
    }
    best
}

/// P(Σ λ_j χ²₁ⱼ > q) by Imhof's integral with absolute accuracy `accuracy`.
pub fn imhof_pvalue(dist: &QuadFormDist, q: f64, accuracy: f64) -> Result<TailProbability> {
    if !(accuracy > 0.0 && accuracy <= 1e-2) {
        return Err(Error::arg(alloc::format!("accuracy {accuracy} outside (0, 1e-2]")));
    }
    if dist.is_degenerate() {
        return Err(Error::arg("weighted chi-square needs at least one positive weight"));
    }
    if q <= 0.0 {
        return Ok(TailProbability::certain(1.0, TailMethod::Imhof));
    }
    // work on the scale λ_max = 1
    let scale = dist.lambdas()[0];
    let lambdas: Vec<f64> = dist.lambdas().iter().filter(|&&l| l > 0.0).map(|l| l / scale).collect();
    let q = q / scale;

    let h = 2.0 * PI / q;
    let chunk_tol = 1e-3 * accuracy;
    let mut sum = 0.0;
    let mut partial: Vec<f64> = Vec::new();
    let mut last_est = f64::NAN;
    let mut stable = 0;
    for k in 0..MAX_CHUNKS {
        let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
        let (v, _) = integrate(|u| integrand(&lambdas, q, u), a, b, chunk_tol, 25);
        sum += v;
        if tail_bound(&lambdas, b) <= 0.5 * accuracy {
            let p = 0.5 + sum / PI;
            return Ok(TailProbability { p_value: clamp_p(p), error_bound: accuracy, method: TailMethod::Imhof, fault: 0 });
        }
        partial.push(sum);
        if partial.len() > WYNN_WINDOW {
            partial.remove(0);
        }
        let est = wynn_epsilon(&partial);
        if (est - last_est).abs() / PI <= 0.25 * accuracy {
            stable += 1;
            if stable >= STABLE_STEPS && partial.len() >= 8 {
                let p = 0.5 + est / PI;
                return Ok(TailProbability { p_value: clamp_p(p), error_bound: accuracy, method: TailMethod::Imhof, fault: 0 });
            }
        } else {
            stable = 0;
        }
        last_est = est;
    }
    Err(Error::Numerical("Imhof integration did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(l: &[f64]) -> QuadFormDist {
        QuadFormDist::new(l.to_vec()).unwrap()
    }

    #[test]
    fn chi_square_quantiles() {
        for (l, q) in [(&[1.0][..], 3.841_459), (&[1.0, 1.0][..], 5.991_465), (&[0.5, 0.5][..], 2.995_732)] {
            let p = imhof_pvalue(&dist(l), q, 1e-9).unwrap();
            assert!((p.p_value - 0.05).abs() < 1e-6, "{l:?} {}", p.p_value);
        }
    }

    #[test]
    fn exponential_tail_for_two_df() {
        for q in [0.5, 3.0, 12.0] {
            let p = imhof_pvalue(&dist(&[1.0, 1.0]), q, 1e-10).unwrap();
            assert!((p.p_value - (-q / 2.0f64).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // ln 2 = 1 - 1/2 + 1/3 - ...
        let mut s = 0.0;
        let partial: Vec<f64> = (1..=15)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                s
            })
            .collect();
        assert!((wynn_epsilon(&partial) - core::f64::consts::LN_2).abs() < 1e-10);
    }
}
