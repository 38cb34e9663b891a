//! Parallel experiment drivers.
//!
//! Every unit of work (a replicate, a split, a repetition) draws its
//! randomness from seeds derived from the master seed and its own index, and
//! results are gathered in index order, so output does not depend on the
//! number of workers or on scheduling.

use std::path::Path;

use nalgebra::DMatrix;
use polysplit_core::glm::{intercept_only, standardize, GenotypeMatrix};
use polysplit_core::rng::{derive_seed, stream};
use polysplit_core::sim::{estimate_snr, Scenario, SimData, SimDesign, SnrEstimate, Sparsity};
use polysplit_core::adaptive::{combine_splits, evaluate_split, J2Rule};
use polysplit_core::{tdc_test, ScreenMethod, TdcConfig, TestReport, WeightMatrixR};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SizeGrid, SCHEMA_VERSION};
use crate::error::{CliError, Result};
use crate::summary::{summarize, Summary};

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Input(format!("cannot start worker pool: {e}")))
}

/// `f(0..n)` on the pool, results in index order.
fn par_map<T, F>(pool: &rayon::ThreadPool, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

fn rejection_rate(pvals: &[f64], alpha: f64) -> (usize, f64, f64) {
    let k = pvals.iter().filter(|&&p| p <= alpha).count();
    let n = pvals.len() as f64;
    let rate = k as f64 / n;
    (k, rate, (rate * (1.0 - rate) / n).sqrt())
}

/// Design of cell `cell`, its seed derived from the master seed.
pub fn cell_design(base: &SimDesign, master_seed: u64, cell: usize) -> SimDesign {
    SimDesign { seed: derive_seed(master_seed, stream::CELL, cell as u64), ..base.clone() }
}

/// Test configuration for one simulated replicate of a design.
pub fn replicate_test_config(base: &TdcConfig, design: &SimDesign, data: &SimData, replicate: usize) -> TdcConfig {
    let mut cfg = base.clone();
    cfg.family = design.family;
    cfg.master_seed = derive_seed(design.seed, stream::TEST, replicate as u64);
    match design.scenario {
        Scenario::Oracle => {
            cfg.screener = ScreenMethod::ExternalRanking(data.support.clone());
            cfg.j2 = J2Rule::Fixed(data.support.len().max(1));
        }
        Scenario::AllVariants => {
            cfg.screener = ScreenMethod::MarginalZ;
            cfg.j2 = J2Rule::All;
        }
        Scenario::Screened => cfg.screener = ScreenMethod::MarginalZ,
    }
    cfg
}

/// Simulate replicate `replicate` of `design` and run the test on it.
pub fn run_replicate(design: &SimDesign, test: &TdcConfig, replicate: usize) -> Result<TestReport> {
    let data = design.simulate(replicate as u64)?;
    let cfg = replicate_test_config(test, design, &data, replicate);
    let x = intercept_only(design.n_total);
    Ok(tdc_test(&data.phenotype, &x, &data.genotypes, &cfg)?)
}

// ---------------------------------------------------------------- test ----

pub struct TestInputs {
    pub y: Vec<f64>,
    /// Intercept followed by any supplied covariates.
    pub x: DMatrix<f64>,
    pub g: GenotypeMatrix,
}

pub fn load_test_inputs(cfg: &ExperimentConfig) -> Result<TestInputs> {
    let need = |p: &Option<std::path::PathBuf>, what: &str| {
        p.clone().ok_or_else(|| CliError::Input(format!("no {what} file given")))
    };
    let g_path = need(&cfg.data.genotypes, "genotype")?;
    let y_path = need(&cfg.data.phenotype, "phenotype")?;
    let y = crate::io::read_phenotype(&y_path)?;
    let mut g = crate::io::read_genotypes(&g_path)?;
    if g.n_individuals() != y.len() {
        return Err(CliError::Input(format!("{} genotype rows but {} phenotype values", g.n_individuals(), y.len())));
    }
    if cfg.data.standardize {
        g = standardize(&g)?;
    }
    let x = match &cfg.data.covariates {
        None => intercept_only(y.len()),
        Some(path) => {
            let (_, cov) = crate::io::read_covariates(path)?;
            if cov.nrows() != y.len() {
                return Err(CliError::Input(format!("{} covariate rows but {} phenotype values", cov.nrows(), y.len())));
            }
            let mut x = cov.insert_column(0, 1.0);
            x.column_mut(0).fill(1.0);
            x
        }
    };
    Ok(TestInputs { y, x, g })
}

/// The double Cauchy test with splits evaluated in parallel.
pub fn run_test(inputs: &TestInputs, test: &TdcConfig, pool: &rayon::ThreadPool) -> Result<TestReport> {
    test.validate()?;
    let per_split = par_map(pool, test.splits, |s| Ok(evaluate_split(&inputs.y, &inputs.x, &inputs.g, test, s)?))?;
    for s in per_split.iter().filter(|s| s.failed()) {
        log::warn!("split {} failed: {:?}", s.split_index, s.outcome);
    }
    Ok(combine_splits(per_split, test, inputs.y.len(), inputs.g.n_variants())?)
}

// ---------------------------------------------------------------- size ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeCell {
    pub rho: f64,
    pub n_variants: usize,
    pub j2: usize,
    pub alpha: f64,
    pub replicates: usize,
    pub rejections: usize,
    pub rate: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeTable {
    pub schema_version: u32,
    pub cells: Vec<SizeCell>,
    /// Splits that failed and entered as p_c = 1, over all replicates.
    pub failed_splits: usize,
    pub design: SimDesign,
    pub test: TdcConfig,
    pub master_seed: u64,
}

pub fn default_size_grid() -> SizeGrid {
    SizeGrid { rhos: vec![0.2, 0.5], n_variants: vec![10, 50] }
}

/// Empirical size of the test under a null design, over a (ρ, J) grid with
/// every variant tested.
pub fn run_size_experiment(cfg: &ExperimentConfig, pool: &rayon::ThreadPool) -> Result<SizeTable> {
    let base = SimDesign {
        sparsity: Sparsity::Count(0),
        effect_size: 0.0,
        scenario: Scenario::AllVariants,
        ..cfg.design_or_default()
    };
    let grid = cfg.size_grid.clone().unwrap_or_else(default_size_grid);
    let mut cells = Vec::new();
    let mut failed = 0;
    let mut index = 0;
    for &rho in &grid.rhos {
        for &j in &grid.n_variants {
            let design = cell_design(&SimDesign { rho, n_variants: j, ..base.clone() }, cfg.master_seed, index);
            index += 1;
            log::info!("size cell rho={rho} J={j}: {} replicates", cfg.replicates);
            let reports = par_map(pool, cfg.replicates, |r| {
                let rep = run_replicate(&design, &cfg.test, r)?;
                Ok((rep.p_dc, rep.failed_splits))
            })?;
            let pvals: Vec<f64> = reports.iter().map(|r| r.0).collect();
            failed += reports.iter().map(|r| r.1).sum::<usize>();
            for &alpha in &cfg.alpha_levels {
                let (k, rate, se) = rejection_rate(&pvals, alpha);
                cells.push(SizeCell { rho, n_variants: j, j2: j, alpha, replicates: pvals.len(), rejections: k, rate, se });
            }
        }
    }
    Ok(SizeTable { schema_version: SCHEMA_VERSION, cells, failed_splits: failed, design: base, test: cfg.test.clone(), master_seed: cfg.master_seed })
}

// --------------------------------------------------------------- power ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub scenario: Scenario,
    pub effect_size: f64,
    pub signals: usize,
    pub alpha: f64,
    pub replicates: usize,
    pub rejections: usize,
    pub power: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub schema_version: u32,
    pub points: Vec<PowerPoint>,
    pub failed_splits: usize,
    pub design: SimDesign,
    pub test: TdcConfig,
    pub master_seed: u64,
}

/// Rejection frequencies over the effect-size grid; every scenario is
/// applied to the same simulated replicates.
pub fn run_power_experiment(cfg: &ExperimentConfig, pool: &rayon::ThreadPool) -> Result<PowerCurve> {
    let base = cfg.design.clone().ok_or_else(|| CliError::Input("power mode needs a design".into()))?;
    let grid = cfg.power_grid.clone().ok_or_else(|| CliError::Input("power mode needs power_grid".into()))?;
    if grid.scenarios.is_empty() || grid.effect_sizes.is_empty() {
        return Err(CliError::Input("power grid needs at least one scenario and effect size".into()));
    }
    let signals = base.signal_count()?;
    let mut points = Vec::new();
    let mut failed = 0;
    for (e, &effect) in grid.effect_sizes.iter().enumerate() {
        let design = cell_design(&SimDesign { effect_size: effect, ..base.clone() }, cfg.master_seed, e);
        log::info!("power cell effect={effect}: {} replicates x {} scenarios", cfg.replicates, grid.scenarios.len());
        let per_rep = par_map(pool, cfg.replicates, |r| {
            let data = design.simulate(r as u64)?;
            let x = intercept_only(design.n_total);
            grid.scenarios
                .iter()
                .map(|&scenario| {
                    let d = SimDesign { scenario, ..design.clone() };
                    let tc = replicate_test_config(&cfg.test, &d, &data, r);
                    let rep = tdc_test(&data.phenotype, &x, &data.genotypes, &tc)?;
                    Ok((rep.p_dc, rep.failed_splits))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (k, &scenario) in grid.scenarios.iter().enumerate() {
            let pvals: Vec<f64> = per_rep.iter().map(|v| v[k].0).collect();
            failed += per_rep.iter().map(|v| v[k].1).sum::<usize>();
            for &alpha in &cfg.alpha_levels {
                let (rej, power, se) = rejection_rate(&pvals, alpha);
                points.push(PowerPoint { scenario, effect_size: effect, signals, alpha, replicates: pvals.len(), rejections: rej, power, se });
            }
        }
    }
    Ok(PowerCurve { schema_version: SCHEMA_VERSION, points, failed_splits: failed, design: base, test: cfg.test.clone(), master_seed: cfg.master_seed })
}

// ----------------------------------------------------------- stability ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub repetition: usize,
    pub p1: f64,
    pub p_dc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub schema_version: u32,
    pub rows: Vec<StabilityRow>,
    pub p1_summary: Summary,
    pub p_dc_summary: Summary,
    /// IQR(p_dc) / IQR(p₁).
    pub iqr_ratio: f64,
    pub splits: usize,
    pub design: SimDesign,
    pub test: TdcConfig,
    pub master_seed: u64,
}

/// On one fixed simulated data set, repeat (a) a single split and its T₁
/// p-value and (b) the m-split double Cauchy test, each with fresh split
/// randomness.
pub fn run_stability_experiment(cfg: &ExperimentConfig, pool: &rayon::ThreadPool) -> Result<StabilityReport> {
    let base = cfg.design.clone().ok_or_else(|| CliError::Input("stability mode needs a design".into()))?;
    let k = cfg.stability.as_ref().map(|s| s.repetitions).unwrap_or(100);
    if k == 0 {
        return Err(CliError::Input("stability repetitions must be at least 1".into()));
    }
    let design = cell_design(&base, cfg.master_seed, 0);
    let data = design.simulate(0)?;
    let template = replicate_test_config(&cfg.test, &design, &data, 0);
    let x = intercept_only(design.n_total);
    log::info!("stability: {k} repetitions, m = {}", template.splits);
    let rows = par_map(pool, k, |rep| {
        let single = TdcConfig {
            splits: 1,
            master_seed: derive_seed(cfg.master_seed, stream::STABILITY, 2 * rep as u64),
            ..template.clone()
        };
        let one = evaluate_split(&data.phenotype, &x, &data.genotypes, &single, 0)?;
        let multi = TdcConfig { master_seed: derive_seed(cfg.master_seed, stream::STABILITY, 2 * rep as u64 + 1), ..template.clone() };
        let report = tdc_test(&data.phenotype, &x, &data.genotypes, &multi)?;
        Ok(StabilityRow { repetition: rep, p1: one.t1.p_value, p_dc: report.p_dc })
    })?;
    let p1: Vec<f64> = rows.iter().map(|r| r.p1).collect();
    let pdc: Vec<f64> = rows.iter().map(|r| r.p_dc).collect();
    let s1 = summarize(&p1).expect("at least one repetition");
    let sdc = summarize(&pdc).expect("at least one repetition");
    let iqr_ratio = if s1.iqr() > 0.0 { sdc.iqr() / s1.iqr() } else { f64::INFINITY };
    Ok(StabilityReport {
        schema_version: SCHEMA_VERSION,
        rows,
        p1_summary: s1,
        p_dc_summary: sdc,
        iqr_ratio,
        splits: template.splits,
        design: base,
        test: cfg.test.clone(),
        master_seed: cfg.master_seed,
    })
}

// ----------------------------------------------------------------- snr ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrRow {
    /// "oracle" or "all-variants".
    pub candidate_set: String,
    pub gamma: u32,
    pub estimate: SnrEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    pub schema_version: u32,
    pub rows: Vec<SnrRow>,
    pub design: SimDesign,
    pub master_seed: u64,
}

/// Signal-to-noise diagnostics with population weights |β_j|^{γ−2} on the
/// true support and on all variants.
pub fn run_snr_experiment(cfg: &ExperimentConfig, pool: &rayon::ThreadPool) -> Result<SnrReport> {
    let base = cfg.design.clone().ok_or_else(|| CliError::Input("snr mode needs a design".into()))?;
    let settings = cfg.snr.clone().ok_or_else(|| CliError::Input("snr mode needs snr settings".into()))?;
    let design = cell_design(&base, cfg.master_seed, 0);
    let beta = design.effects()?;
    let n_eff = design.n_total - (cfg.test.train_fraction * design.n_total as f64).round() as usize;
    let support: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    let all: Vec<usize> = (0..beta.len()).collect();
    let mut jobs = Vec::new();
    for &gamma in &cfg.test.gammas {
        for (name, set) in [("oracle", &support), ("all-variants", &all)] {
            if !set.is_empty() {
                jobs.push((name, gamma, set.clone()));
            }
        }
    }
    let rows = par_map(pool, jobs.len(), |i| {
        let (name, gamma, set) = &jobs[i];
        let w = WeightMatrixR::from_effects(&set.iter().map(|&j| beta[j]).collect::<Vec<_>>(), *gamma)?;
        let seed = derive_seed(cfg.master_seed, stream::SNR, 0);
        let estimate = estimate_snr(&design, n_eff, set, &w.r, settings.mc_reps, settings.centering, seed)?;
        Ok(SnrRow { candidate_set: name.to_string(), gamma: *gamma, estimate })
    })?;
    Ok(SnrReport { schema_version: SCHEMA_VERSION, rows, design: base, master_seed: cfg.master_seed })
}

// ------------------------------------------------------------ simulate ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTruth {
    pub schema_version: u32,
    pub design: SimDesign,
    pub master_seed: u64,
    pub effects: Vec<f64>,
    pub support: Vec<usize>,
}

/// Write one simulated data set as `genotypes.csv`, `phenotype.csv` and
/// `truth.json` under `dir`.
pub fn run_simulation(cfg: &ExperimentConfig, dir: &Path) -> Result<SimulationTruth> {
    let base = cfg.design.clone().ok_or_else(|| CliError::Input("simulate mode needs a design".into()))?;
    let design = cell_design(&base, cfg.master_seed, 0);
    let data = design.simulate(0)?;
    crate::io::write_genotypes(&dir.join("genotypes.csv"), &data.genotypes)?;
    crate::io::write_phenotype(&dir.join("phenotype.csv"), &data.phenotype)?;
    let truth = SimulationTruth {
        schema_version: SCHEMA_VERSION,
        design: base,
        master_seed: cfg.master_seed,
        effects: data.effects,
        support: data.support,
    };
    crate::io::write_json(&dir.join("truth.json"), &truth)?;
    Ok(truth)
}
