//! Monte Carlo evaluation of the local-alternative mean and standard
//! deviation of the weighted statistic, for the split test (weights R on a
//! candidate set, testing-half size n) and for the unweighted full-sample
//! statistic over all variants (size 2n).
//!
//! Expectations of products E(A_jk)·E(A_jk) summed over (j, k) are estimated
//! without bias from independent pairs of draws (i, i′), for which the
//! double sum collapses to (Σ_j r_j g_ij g_i′j)². Residual variance is
//! replaced by its conditional expectation given the genotypes.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use num_traits::Float;

use super::{ar1_row, SimDesign};
use crate::error::{Error, Result};
use crate::glm::GlmFamily;
use crate::rng::rng_from_seed;

pub const MIN_SNR_REPS: usize = 10_000;

/// What plays the role of the mean-shift function h(G) = 𝒢⁻¹(Gᵀβ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SnrCentering {
    /// 𝒢⁻¹(Gᵀβ) literally, without the intercept.
    Raw,
    /// 𝒢⁻¹(α + Gᵀβ) − 𝒢⁻¹(α): the departure from the null mean.
    #[default]
    NullCentered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrStdErrors {
    pub mu_n_beta: f64,
    pub sigma_n1_sq: f64,
    pub mu_2n_beta: f64,
    pub sigma_2n1_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrEstimate {
    pub mu_n_beta: f64,
    pub sigma_n1: f64,
    pub snr_n: f64,
    pub mu_2n_beta: f64,
    pub sigma_2n1: f64,
    pub snr_2n: f64,
    /// tr(RΞ) and ΔᵀRΔ, the two pieces of the split-test mean.
    pub trace_r_xi: f64,
    pub delta_r_delta: f64,
    /// ΔᵀRΣ_gRΔ / {n⁻¹ tr(RΣ_g)²}; small values indicate a local alternative.
    pub admissibility_ratio: f64,
    pub n_eff: usize,
    pub mc_reps: usize,
    pub mc_se: SnrStdErrors,
    pub centering: SnrCentering,
}

#[derive(Default)]
struct Moments {
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn mean(&self, n: usize) -> f64 {
        self.sum / n as f64
    }

    fn se(&self, n: usize) -> f64 {
        let m = self.mean(n);
        let var = (self.sum_sq / n as f64 - m * m).max(0.0) * n as f64 / (n - 1) as f64;
        (var / n as f64).sqrt()
    }
}

struct RowTerms {
    h: f64,
    v: f64,
}

fn row_terms(design: &SimDesign, nonzero: &[(usize, f64)], g: &[f64], centering: SnrCentering) -> RowTerms {
    let eta: f64 = nonzero.iter().map(|&(j, b)| g[j] * b).sum();
    let f = design.family;
    let h = match centering {
        SnrCentering::Raw => f.inverse_link(eta),
        SnrCentering::NullCentered => f.inverse_link(design.intercept + eta) - f.inverse_link(design.intercept),
    };
    let v = match f {
        GlmFamily::GaussianIdentity => 1.0,
        GlmFamily::BinomialLogit => f.variance(f.inverse_link(design.intercept + eta)),
    };
    RowTerms { h, v }
}

/// Signal-to-noise diagnostics for weights `r` on the variants `selected`
/// with a testing half of `n_eff` individuals; the full-sample comparator uses
/// all variants with unit weights and `design.n_total` individuals.
pub fn estimate_snr(
    design: &SimDesign,
    n_eff: usize,
    selected: &[usize],
    r: &[f64],
    mc_reps: usize,
    centering: SnrCentering,
    seed: u64,
) -> Result<SnrEstimate> {
    design.validate()?;
    if mc_reps < MIN_SNR_REPS {
        return Err(Error::arg(format!("need at least {MIN_SNR_REPS} Monte Carlo pairs, got {mc_reps}")));
    }
    if selected.len() != r.len() {
        return Err(Error::dim(format!("{} weights for {} selected variants", r.len(), selected.len())));
    }
    let j = design.n_variants;
    if selected.iter().any(|&k| k >= j) {
        return Err(Error::arg("selected variant out of range"));
    }
    if n_eff < 2 {
        return Err(Error::arg("effective sample size must be at least 2"));
    }
    let beta = design.effects()?;
    let nonzero: Vec<(usize, f64)> = beta.iter().copied().enumerate().filter(|(_, b)| *b != 0.0).collect();
    let n = n_eff as f64;
    let n2 = design.n_total as f64;

    let mut rng = rng_from_seed(seed);
    let mut a = alloc::vec![0.0; j];
    let mut b = alloc::vec![0.0; j];
    let mut delta = alloc::vec![0.0; selected.len()];
    let (mut mu_split, mut var_split, mut mu_full, mut var_full) =
        (Moments::default(), Moments::default(), Moments::default(), Moments::default());
    let (mut m1_sum, mut m2_sum) = (0.0, 0.0);

    for _ in 0..mc_reps {
        ar1_row(&mut rng, design.rho, &mut a);
        ar1_row(&mut rng, design.rho, &mut b);
        let ta = row_terms(design, &nonzero, &a, centering);
        let tb = row_terms(design, &nonzero, &b, centering);

        let (mut cross, mut sq_a, mut sq_b) = (0.0, 0.0, 0.0);
        for (k, (&jj, &rk)) in selected.iter().zip(r).enumerate() {
            cross += rk * a[jj] * b[jj];
            sq_a += rk * a[jj] * a[jj];
            sq_b += rk * b[jj] * b[jj];
            delta[k] += ta.h * a[jj] + tb.h * b[jj];
        }
        let m1 = 0.5 * (ta.h * ta.h * sq_a + tb.h * tb.h * sq_b);
        let m2 = ta.h * tb.h * cross;
        m1_sum += m1;
        m2_sum += m2;
        mu_split.push(m1 + (n - 1.0) * m2);
        var_split.push(pair_variance(&ta, &tb, cross * cross));

        let (mut cross_all, mut sq_a_all, mut sq_b_all) = (0.0, 0.0, 0.0);
        for k in 0..j {
            cross_all += a[k] * b[k];
            sq_a_all += a[k] * a[k];
            sq_b_all += b[k] * b[k];
        }
        let m1_all = 0.5 * (ta.h * ta.h * sq_a_all + tb.h * tb.h * sq_b_all);
        mu_full.push(m1_all + (n2 - 1.0) * ta.h * tb.h * cross_all);
        var_full.push(pair_variance(&ta, &tb, cross_all * cross_all));
    }

    let reps = mc_reps;
    let mu_n = mu_split.mean(reps);
    let sigma_n = var_split.mean(reps).max(0.0).sqrt();
    let mu_2n = mu_full.mean(reps);
    let sigma_2n = var_full.mean(reps).max(0.0).sqrt();
    for d in delta.iter_mut() {
        *d /= 2.0 * reps as f64;
    }
    let admissibility_ratio = admissibility(design.rho, selected, r, &delta, n);
    Ok(SnrEstimate {
        mu_n_beta: mu_n,
        sigma_n1: sigma_n,
        snr_n: if sigma_n > 0.0 { mu_n / sigma_n } else { 0.0 },
        mu_2n_beta: mu_2n,
        sigma_2n1: sigma_2n,
        snr_2n: if sigma_2n > 0.0 { mu_2n / sigma_2n } else { 0.0 },
        trace_r_xi: m1_sum / reps as f64,
        delta_r_delta: m2_sum / reps as f64,
        admissibility_ratio,
        n_eff,
        mc_reps,
        mc_se: SnrStdErrors {
            mu_n_beta: mu_split.se(reps),
            sigma_n1_sq: var_split.se(reps),
            mu_2n_beta: mu_full.se(reps),
            sigma_2n1_sq: var_full.se(reps),
        },
        centering,
    })
}

/// Unbiased pair estimate of 2Σ r r E²(v g g) + 2Σ r r E²(h² g g) + 4Σ r r E(v g g)E(h² g g).
fn pair_variance(a: &RowTerms, b: &RowTerms, cross_sq: f64) -> f64 {
    let (ha2, hb2) = (a.h * a.h, b.h * b.h);
    let s0 = a.v * b.v;
    let x2 = ha2 * hb2;
    let c = 0.5 * (a.v * hb2 + b.v * ha2);
    (2.0 * s0 + 2.0 * x2 + 4.0 * c) * cross_sq
}

fn admissibility(rho: f64, selected: &[usize], r: &[f64], delta: &[f64], n: f64) -> f64 {
    let (mut num, mut tr) = (0.0, 0.0);
    for (a, (&ja, &ra)) in selected.iter().zip(r).enumerate() {
        for (b, (&jb, &rb)) in selected.iter().zip(r).enumerate() {
            let c = rho.powi((ja as i64 - jb as i64).unsigned_abs() as i32);
            num += ra * delta[a] * c * rb * delta[b];
            tr += ra * rb * c * c;
        }
    }
    if tr > 0.0 {
        num / (tr / n)
    } else {
        0.0
    }
}
