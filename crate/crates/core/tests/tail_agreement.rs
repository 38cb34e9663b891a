use polysplit_core::quadform::{davies_pvalue, imhof_pvalue, QuadFormDist, TailMethod};
use polysplit_core::rng::rng_from_seed;
use rand::Rng;
use rand_distr::StandardNormal;

fn random_case(seed: u64) -> (QuadFormDist, f64) {
    let mut rng = rng_from_seed(seed);
    let k = rng.random_range(1..=200usize);
    let spread: f64 = rng.random_range(0.1..3.0);
    let lambdas: Vec<f64> = (0..k).map(|_| (spread * rng.sample::<f64, _>(StandardNormal)).exp()).collect();
    let dist = QuadFormDist::new(lambdas).unwrap();
    let u: f64 = rng.random_range(0.2..4.0);
    let q = u * dist.trace();
    (dist, q)
}

#[test]
fn davies_and_imhof_agree_on_random_spectra() {
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let (dist, q) = random_case(seed);
        let d = davies_pvalue(&dist, q, 1e-9).unwrap();
        let i = imhof_pvalue(&dist, q, 1e-9).unwrap();
        assert_eq!(d.method, TailMethod::Davies);
        let diff = (d.p_value - i.p_value).abs();
        worst = worst.max(diff);
        assert!(diff <= 1e-8, "seed {seed}: k={} q={q} davies={} imhof={}", dist.lambdas().len(), d.p_value, i.p_value);
    }
    eprintln!("worst Davies/Imhof gap {worst:e}");
}

#[test]
fn dominant_eigenvalue_and_far_tail() {
    for seed in 0..40u64 {
        let mut rng = rng_from_seed(1000 + seed);
        let k = rng.random_range(1..=150usize);
        let mut lambdas: Vec<f64> = (0..k).map(|_| (6.0 * rng.sample::<f64, _>(StandardNormal)).exp()).collect();
        lambdas[0] = 1e3 * lambdas.iter().cloned().fold(0.0, f64::max);
        let dist = QuadFormDist::new(lambdas).unwrap();
        let q = rng.random_range(0.5..25.0) * dist.lambdas()[0];
        let d = davies_pvalue(&dist, q, 1e-9).unwrap();
        let i = imhof_pvalue(&dist, q, 1e-9).unwrap();
        assert!((d.p_value - i.p_value).abs() <= 1e-8, "seed {seed}: q={q} davies={} imhof={}", d.p_value, i.p_value);
    }
}
