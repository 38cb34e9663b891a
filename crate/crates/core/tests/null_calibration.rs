use nalgebra::DMatrix;
use polysplit_core::glm::{adjust_for_covariates, intercept_only};
use polysplit_core::quadform::studentized_pvalue;
use polysplit_core::rng::rng_from_seed;
use polysplit_core::sim::{gen_ar1_genotypes, gen_phenotype};
use polysplit_core::{eigenvalues_weighted, estimate_score_covariance, fit_null_glm, score_vector, GlmFamily, Shrinkage, WeightMatrixR};
use rand::Rng;
use rand_distr::StandardNormal;

fn sum_sq(g: &DMatrix<f64>, e: &[f64]) -> f64 {
    let n = e.len() as f64;
    g.column_iter().map(|c| c.iter().zip(e).map(|(g, e)| g * e).sum::<f64>().powi(2)).sum::<f64>() / n
}

// Binary null, J₂ = n/2: the plug-in weighted-χ² law overstates the spread of
// T − tr(Σ̂); the corrected variance should match the simulated one.
#[test]
fn corrected_variance_matches_binary_null() {
    let (n, j, reps) = (100, 50, 1500);
    let w = WeightMatrixR::from_effects(&vec![1.0; j], 2).unwrap();
    let (mut plug, mut adj) = (Vec::new(), Vec::new());
    for r in 0..reps {
        let g = gen_ar1_genotypes(n, j, 0.3, 10 + r).unwrap();
        let y = gen_phenotype(&g, &vec![0.0; j], GlmFamily::BinomialLogit, 1.0, 90_000 + r).unwrap();
        let x = intercept_only(n);
        let fit = fit_null_glm(&y, &x, GlmFamily::BinomialLogit).unwrap();
        let gt = adjust_for_covariates(&fit, &x, g.values()).unwrap();
        let cov = estimate_score_covariance(&fit, &gt, Shrinkage::Fixed(0.0)).unwrap().with_fitted_null(&fit, &x).unwrap();
        let dist = eigenvalues_weighted(&cov, &w).unwrap();
        let s = score_vector(&fit, &gt).unwrap();
        let t = n as f64 * s.s.iter().map(|s| s * s).sum::<f64>();
        let v = 2.0 * dist.trace_sq();
        plug.push((t - dist.trace()) / v.sqrt());
        adj.push((t - dist.trace()) / (v + cov.variance_excess(&w.r)).sqrt());
    }
    let var = |z: &[f64]| {
        let m = z.iter().sum::<f64>() / z.len() as f64;
        z.iter().map(|z| (z - m).powi(2)).sum::<f64>() / (z.len() - 1) as f64
    };
    let (vp, va) = (var(&plug), var(&adj));
    eprintln!("standardized variance: plug-in {vp:.3}, corrected {va:.3}");
    assert!(vp < 0.85, "plug-in variance {vp}");
    assert!((0.87..=1.13).contains(&va), "corrected variance {va}");
}

// Gaussian null with more variants than individuals: the studentized tail is
// exact, so it must agree with brute-force simulation of T/φ̂.
#[test]
fn studentized_tail_matches_simulation() {
    let (n, j) = (30, 45);
    let g = gen_ar1_genotypes(n, j, 0.5, 3).unwrap();
    let x = intercept_only(n);
    let w = WeightMatrixR::from_effects(&vec![1.0; j], 2).unwrap();
    let mut rng = rng_from_seed(77);
    let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let fit = fit_null_glm(&y, &x, GlmFamily::GaussianIdentity).unwrap();
    let gt = adjust_for_covariates(&fit, &x, g.values()).unwrap();
    let cov = estimate_score_covariance(&fit, &gt, Shrinkage::Auto).unwrap().with_fitted_null(&fit, &x).unwrap();
    let dist = eigenvalues_weighted(&cov, &w).unwrap();
    let t_obs = sum_sq(&gt, &fit.residuals);
    let df = cov.residual_df().unwrap();
    let p = studentized_pvalue(&dist, t_obs, df, 1e-9).unwrap().unwrap().p_value;

    let ratio = |e: &[f64]| {
        let m = e.iter().sum::<f64>() / n as f64;
        let c: Vec<f64> = e.iter().map(|e| e - m).collect();
        sum_sq(&gt, &c) / (c.iter().map(|c| c * c).sum::<f64>() / df)
    };
    let target = ratio(&fit.residuals);
    let draws = 40_000;
    let hits = (0..draws)
        .filter(|_| {
            let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            ratio(&e) >= target
        })
        .count();
    let mc = hits as f64 / draws as f64;
    let se = (mc * (1.0 - mc) / draws as f64).sqrt();
    eprintln!("studentized p {p:.5}, simulated {mc:.5} ± {se:.5}");
    assert!((p - mc).abs() <= 4.0 * se + 1e-4);
}
