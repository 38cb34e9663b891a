//! Simulation designs: AR(1) Gaussian genotypes, sparse signed effects,
//! Gaussian or logistic phenotypes, and Monte Carlo signal-to-noise moments.

mod generate;
mod snr;

pub use generate::{ar1_row, gen_ar1_genotypes, gen_phenotype, place_signals};
pub use snr::{estimate_snr, SnrCentering, SnrEstimate, SnrStdErrors};

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::glm::{GenotypeMatrix, GlmFamily};
use crate::rng::{derive_seed, stream};

/// Number of nonzero effects, given directly or as a share of the variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sparsity {
    Count(usize),
    Proportion(f64),
}

impl Sparsity {
    pub fn count(self, n_variants: usize) -> Result<usize> {
        let k = match self {
            Sparsity::Count(k) => k,
            Sparsity::Proportion(p) => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::arg(format!("signal proportion {p} outside [0, 1]")));
                }
                (p * n_variants as f64).round() as usize
            }
        };
        if k > n_variants {
            return Err(Error::arg(format!("{k} signals requested among {n_variants} variants")));
        }
        Ok(k)
    }
}

/// Which candidate set the test is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// The true support, in index order.
    Oracle,
    /// Every variant (no filtering).
    AllVariants,
    /// Marginal screening on the training half.
    #[default]
    Screened,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimDesign {
    pub n_total: usize,
    pub n_variants: usize,
    pub rho: f64,
    pub sparsity: Sparsity,
    pub effect_size: f64,
    pub family: GlmFamily,
    pub intercept: f64,
    #[serde(default)]
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
}

/// One simulated data set.
#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    pub genotypes: GenotypeMatrix,
    pub effects: Vec<f64>,
    /// Indices of the signal variants, ascending (defined even for a zero
    /// effect size).
    pub support: Vec<usize>,
    pub phenotype: Vec<f64>,
    /// The odd signal out was given a positive sign.
    pub sign_imbalance: bool,
}

impl SimDesign {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::arg(format!("rho {} outside (-1, 1)", self.rho)));
        }
        if self.n_total < 2 || self.n_variants == 0 {
            return Err(Error::arg("design needs at least 2 individuals and 1 variant"));
        }
        if !self.effect_size.is_finite() || !self.intercept.is_finite() {
            return Err(Error::arg("effect size and intercept must be finite"));
        }
        self.sparsity.count(self.n_variants)?;
        Ok(())
    }

    pub fn signal_count(&self) -> Result<usize> {
        self.sparsity.count(self.n_variants)
    }

    /// The effect vector used for population-level diagnostics.
    pub fn effects(&self) -> Result<Vec<f64>> {
        let signs = place_signals(self.n_variants, self.signal_count()?, 1.0, derive_seed(self.seed, stream::SIGNAL, 0))?;
        Ok(signs.iter().map(|s| s * self.effect_size).collect())
    }

    /// Replicate `replicate` of the design: fresh genotypes, signal positions
    /// and phenotype, all derived from `(seed, replicate)`.
    pub fn simulate(&self, replicate: u64) -> Result<SimData> {
        self.validate()?;
        let base = derive_seed(self.seed, stream::REPLICATE, replicate);
        let genotypes = gen_ar1_genotypes(self.n_total, self.n_variants, self.rho, derive_seed(base, stream::GENOTYPE, 0))?;
        let k = self.signal_count()?;
        // positions and signs do not depend on the effect size, so a zero
        // effect still has a well-defined support
        let signs = place_signals(self.n_variants, k, 1.0, derive_seed(base, stream::SIGNAL, 0))?;
        let support = signs.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(j, _)| j).collect();
        let effects: Vec<f64> = signs.iter().map(|s| s * self.effect_size).collect();
        let phenotype = gen_phenotype(&genotypes, &effects, self.family, self.intercept, derive_seed(base, stream::PHENOTYPE, 0))?;
        Ok(SimData { genotypes, effects, support, phenotype, sign_imbalance: k % 2 == 1 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design() -> SimDesign {
        SimDesign {
            n_total: 50,
            n_variants: 40,
            rho: 0.5,
            sparsity: Sparsity::Proportion(0.1),
            effect_size: 0.5,
            family: GlmFamily::BinomialLogit,
            intercept: 1.0,
            scenario: Scenario::Oracle,
            seed: 11,
        }
    }

    #[test]
    fn sparsity_proportions_round_to_counts() {
        let counts: Vec<usize> =
            [0.001, 0.01, 0.05, 0.1].iter().map(|&p| Sparsity::Proportion(p).count(4000).unwrap()).collect();
        assert_eq!(counts, [4, 40, 200, 400]);
        assert!(Sparsity::Count(5).count(4).is_err());
    }

    #[test]
    fn replicates_are_reproducible_and_distinct() {
        let d = design();
        let a = d.simulate(3).unwrap();
        assert_eq!(a, d.simulate(3).unwrap());
        assert_ne!(a.phenotype, d.simulate(4).unwrap().phenotype);
        assert_eq!(a.support.len(), 4);
        assert!(!a.sign_imbalance);
        assert!(a.phenotype.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn invalid_designs() {
        assert!(SimDesign { rho: 1.0, ..design() }.validate().is_err());
        assert!(SimDesign { sparsity: Sparsity::Proportion(1.5), ..design() }.validate().is_err());
    }
}
