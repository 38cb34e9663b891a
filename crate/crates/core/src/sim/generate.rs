use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::glm::{GenotypeMatrix, GlmFamily};
use crate::rng::rng_from_seed;

/// Fill `row` with one draw from N(0, Σ) with Σ_jk = ρ^{|j−k|}.
pub fn ar1_row<R: Rng + ?Sized>(rng: &mut R, rho: f64, row: &mut [f64]) {
    let innov = (1.0 - rho * rho).sqrt();
    let mut prev = 0.0;
    for (j, v) in row.iter_mut().enumerate() {
        let z: f64 = rng.sample(StandardNormal);
        prev = if j == 0 { z } else { rho * prev + innov * z };
        *v = prev;
    }
}

/// n independent rows of the AR(1) Gaussian law.
pub fn gen_ar1_genotypes(n: usize, n_variants: usize, rho: f64, seed: u64) -> Result<GenotypeMatrix> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::arg(format!("rho {rho} outside (-1, 1)")));
    }
    let mut rng = rng_from_seed(seed);
    let mut values = DMatrix::zeros(n, n_variants);
    let mut row = alloc::vec![0.0; n_variants];
    for i in 0..n {
        ar1_row(&mut rng, rho, &mut row);
        for (j, v) in row.iter().enumerate() {
            values[(i, j)] = *v;
        }
    }
    GenotypeMatrix::new(values, None)
}

/// `count` distinct uniformly placed effects, ⌈count/2⌉ of them `+effect`
/// and the rest `−effect`, signs assigned at random.
pub fn place_signals(n_variants: usize, count: usize, effect: f64, seed: u64) -> Result<Vec<f64>> {
    if count > n_variants {
        return Err(Error::arg(format!("{count} signals requested among {n_variants} variants")));
    }
    let mut beta = alloc::vec![0.0; n_variants];
    if count == 0 {
        return Ok(beta);
    }
    let mut rng = rng_from_seed(seed);
    let positions = index::sample(&mut rng, n_variants, count).into_vec();
    let mut signs: Vec<f64> = (0..count).map(|k| if k < count.div_ceil(2) { 1.0 } else { -1.0 }).collect();
    signs.shuffle(&mut rng);
    for (j, s) in positions.into_iter().zip(signs) {
        beta[j] = s * effect;
    }
    Ok(beta)
}

/// Gaussian: intercept + Gβ + N(0, 1). Binomial: Bernoulli of the logistic
/// mean.
pub fn gen_phenotype(g: &GenotypeMatrix, beta: &[f64], family: GlmFamily, intercept: f64, seed: u64) -> Result<Vec<f64>> {
    if beta.len() != g.n_variants() {
        return Err(Error::dim(format!("{} effects for {} variants", beta.len(), g.n_variants())));
    }
    let nonzero: Vec<(usize, f64)> = beta.iter().copied().enumerate().filter(|(_, b)| *b != 0.0).collect();
    let values = g.values();
    let mut rng = rng_from_seed(seed);
    let y = (0..g.n_individuals())
        .map(|i| {
            let eta = intercept + nonzero.iter().map(|&(j, b)| values[(i, j)] * b).sum::<f64>();
            match family {
                GlmFamily::GaussianIdentity => eta + rng.sample::<f64, _>(StandardNormal),
                GlmFamily::BinomialLogit => {
                    let p = family.inverse_link(eta);
                    if rng.random::<f64>() < p {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect();
    Ok(y)
}
