//! Per-split combination and the double Cauchy test across repeated splits.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::cauchy::{cauchy_statistic, cauchy_tail, cauchy_transform};
use super::stats::{evaluate_testing_half, GammaStat, T1Stat};
use crate::error::{Error, Result};
use crate::glm::{fit_null_glm, GenotypeMatrix, GlmFamily, NullModelFit, Shrinkage};
use crate::linalg;
use crate::quadform::DEFAULT_ACCURACY;
use crate::screen::{screen_and_weight, ScreenMethod, ScreenSet};
use crate::split::{make_split_plan, split_seed, SplitPlan};

/// How null-model nuisance parameters enter the testing-half statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NuisanceMode {
    /// Refit the covariate model on the testing half and project the
    /// covariates out of the genotypes (efficient score).
    #[default]
    RefitTesting,
    /// Reuse the training-half coefficients as known values.
    FromTraining,
}

/// Reference law for the T_γ p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NullLaw {
    /// Weighted χ² with the eigenvalues of the plug-in covariance.
    PlugIn,
    /// Accounts for the null model being fitted on the testing half. Gaussian
    /// responses get the exact law of T_γ studentized by the dispersion
    /// estimate; otherwise the statistic is rescaled about its mean so that
    /// its variance matches the first-order variance of T_γ − tr(RΣ̂),
    /// including the response's fourth moment.
    #[default]
    MomentCorrected,
}

/// Number of variants kept by screening.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum J2Rule {
    /// min(usable variants, testing-half size).
    #[default]
    TestSize,
    /// Every usable variant.
    All,
    /// min(usable variants, k).
    Fixed(usize),
}

impl J2Rule {
    pub fn resolve(self, usable: usize, n_test: usize) -> usize {
        match self {
            J2Rule::TestSize => usable.min(n_test),
            J2Rule::All => usable,
            J2Rule::Fixed(k) => usable.min(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TdcConfig {
    pub family: GlmFamily,
    /// Even exponents; γ = 2 is the unweighted sum of squared scores.
    pub gammas: Vec<u32>,
    pub splits: usize,
    pub train_fraction: f64,
    pub j2: J2Rule,
    pub screener: ScreenMethod,
    /// Split within outcome classes (binomial family only).
    pub stratify: bool,
    pub nuisance: NuisanceMode,
    pub shrinkage: Shrinkage,
    pub null_law: NullLaw,
    /// Absolute accuracy requested from the weighted-χ² tail routine.
    pub accuracy: f64,
    pub master_seed: u64,
}

impl Default for TdcConfig {
    fn default() -> Self {
        TdcConfig {
            family: GlmFamily::BinomialLogit,
            gammas: alloc::vec![2, 4, 6, 42],
            splits: 10,
            train_fraction: 0.5,
            j2: J2Rule::TestSize,
            screener: ScreenMethod::MarginalZ,
            stratify: true,
            nuisance: NuisanceMode::RefitTesting,
            shrinkage: Shrinkage::Auto,
            null_law: NullLaw::default(),
            accuracy: DEFAULT_ACCURACY,
            master_seed: 0,
        }
    }
}

impl TdcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() {
            return Err(Error::arg("at least one gamma is required"));
        }
        if let Some(g) = self.gammas.iter().find(|&&g| g < 2 || g % 2 != 0) {
            return Err(Error::arg(format!("gamma must be an even integer >= 2, got {g}")));
        }
        if self.splits == 0 {
            return Err(Error::arg("number of splits must be at least 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::arg(format!("training fraction {} outside (0, 1)", self.train_fraction)));
        }
        if !(self.accuracy > 0.0 && self.accuracy <= 1e-2) {
            return Err(Error::arg(format!("accuracy {} outside (0, 1e-2]", self.accuracy)));
        }
        if let J2Rule::Fixed(0) = self.j2 {
            return Err(Error::arg("fixed J2 must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "reason")]
pub enum SplitOutcome {
    Ok,
    /// The split could not be evaluated and contributes p_c = 1.
    Failed(String),
}

/// Results for one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitTestResult {
    pub split_index: usize,
    pub split_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub j2_effective: usize,
    pub t1: T1Stat,
    pub gamma_stats: Vec<GammaStat>,
    /// Mean Cauchy transform over T₁ and every T_γ.
    pub t_c: f64,
    pub p_c: f64,
    pub shrinkage_delta: f64,
    pub outcome: SplitOutcome,
}

impl SplitTestResult {
    pub fn failed(&self) -> bool {
        matches!(self.outcome, SplitOutcome::Failed(_))
    }

    fn failure(split_index: usize, split_seed: u64, plan: Option<&SplitPlan>, reason: String) -> Self {
        SplitTestResult {
            split_index,
            split_seed,
            n_train: plan.map_or(0, |p| p.train_indices.len()),
            n_test: plan.map_or(0, |p| p.test_indices.len()),
            j2_effective: 0,
            t1: T1Stat::null(),
            gamma_stats: Vec::new(),
            t_c: cauchy_transform(1.0),
            p_c: 1.0,
            shrinkage_delta: 0.0,
            outcome: SplitOutcome::Failed(reason),
        }
    }
}

/// Outcome of the double Cauchy test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub per_split: Vec<SplitTestResult>,
    pub t_dc: f64,
    pub p_dc: f64,
    pub failed_splits: usize,
    pub n_total: usize,
    pub n_variants: usize,
    pub config: TdcConfig,
}

/// Statistics of one split: T₁ and T_γ for all γ on the testing half, then
/// their Cauchy combination. Columns of `g_test` follow `screen.selected`;
/// `null_test` is the covariate model evaluated on the testing half.
pub fn tc_test(
    null_test: &NullModelFit,
    x_test: &DMatrix<f64>,
    g_test: &DMatrix<f64>,
    screen: &ScreenSet,
    config: &TdcConfig,
) -> Result<SplitTestResult> {
    let half = evaluate_testing_half(
        null_test,
        x_test,
        g_test,
        screen,
        &config.gammas,
        config.nuisance,
        config.shrinkage,
        config.null_law,
        config.accuracy,
    )?;
    let mut pvals = Vec::with_capacity(half.gammas.len() + 1);
    pvals.push(half.t1.p_value);
    pvals.extend(half.gammas.iter().map(|g| g.p_value));
    let t_c = cauchy_statistic(&pvals)?;
    Ok(SplitTestResult {
        split_index: 0,
        split_seed: 0,
        n_train: 0,
        n_test: null_test.n(),
        j2_effective: screen.len(),
        t1: half.t1,
        gamma_stats: half.gammas,
        t_c,
        p_c: cauchy_tail(t_c),
        shrinkage_delta: half.shrinkage_delta,
        outcome: SplitOutcome::Ok,
    })
}

fn check_inputs(y: &[f64], x: &DMatrix<f64>, g: &GenotypeMatrix, config: &TdcConfig) -> Result<()> {
    config.validate()?;
    let n = y.len();
    if n < 20 {
        return Err(Error::arg(format!("need at least 20 observations, got {n}")));
    }
    if x.nrows() != n || g.n_individuals() != n {
        return Err(Error::dim(format!(
            "{} responses, {} covariate rows, {} genotype rows",
            n,
            x.nrows(),
            g.n_individuals()
        )));
    }
    config.family.validate_response(y)?;
    Ok(())
}

fn select(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

fn run_split(
    y: &[f64],
    x: &DMatrix<f64>,
    g: &GenotypeMatrix,
    config: &TdcConfig,
    plan: &SplitPlan,
) -> Result<SplitTestResult> {
    let (train, test) = (&plan.train_indices, &plan.test_indices);
    let y_tr = select(y, train);
    let x_tr = linalg::select_rows(x, train);
    let g_tr = g.subset_rows(train);
    let usable = (0..g.n_variants()).filter(|&j| !g.is_excluded(j)).count();
    let j2 = config.j2.resolve(usable, test.len());
    if j2 == 0 {
        return Err(Error::DegenerateGenotypes);
    }
    let screen = screen_and_weight(&y_tr, &x_tr, &g_tr, config.family, j2, &config.screener)?;
    drop(g_tr);

    let y_te = select(y, test);
    let x_te = linalg::select_rows(x, test);
    let g_te = g.submatrix(test, &screen.selected);
    let null_test = match config.nuisance {
        super::NuisanceMode::RefitTesting => fit_null_glm(&y_te, &x_te, config.family)?,
        super::NuisanceMode::FromTraining => {
            fit_null_glm(&y_tr, &x_tr, config.family)?.with_known_coefficients(&y_te, &x_te)?
        }
    };
    tc_test(&null_test, &x_te, &g_te, &screen, config)
}

/// Evaluate split `index` of the repeated-splitting scheme.
///
/// Invalid inputs are errors; anything that goes wrong on the split itself
/// (screening, fitting, tail computation) yields a failed split with p_c = 1.
pub fn evaluate_split(
    y: &[f64],
    x: &DMatrix<f64>,
    g: &GenotypeMatrix,
    config: &TdcConfig,
    index: usize,
) -> Result<SplitTestResult> {
    check_inputs(y, x, g, config)?;
    let seed = split_seed(config.master_seed, index);
    let binary = y.iter().all(|&v| v == 0.0 || v == 1.0);
    let labels = (config.stratify && config.family == GlmFamily::BinomialLogit && binary).then_some(y);
    let plan = make_split_plan(y.len(), config.train_fraction, labels, seed)?;
    let mut result = match run_split(y, x, g, config, &plan) {
        Ok(r) => r,
        Err(e) => SplitTestResult::failure(index, seed, Some(&plan), e.to_string()),
    };
    result.split_index = index;
    result.split_seed = seed;
    result.n_train = plan.train_indices.len();
    result.n_test = plan.test_indices.len();
    Ok(result)
}

/// Double Cauchy combination of per-split results (in any order).
pub fn combine_splits(
    per_split: Vec<SplitTestResult>,
    config: &TdcConfig,
    n_total: usize,
    n_variants: usize,
) -> Result<TestReport> {
    let pcs: Vec<f64> = per_split.iter().map(|s| s.p_c).collect();
    let t_dc = cauchy_statistic(&pcs)?;
    Ok(TestReport {
        failed_splits: per_split.iter().filter(|s| s.failed()).count(),
        per_split,
        t_dc,
        p_dc: cauchy_tail(t_dc),
        n_total,
        n_variants,
        config: config.clone(),
    })
}

/// The repeated-splitting double Cauchy test. `x` holds the covariates
/// including any intercept column.
pub fn tdc_test(y: &[f64], x: &DMatrix<f64>, g: &GenotypeMatrix, config: &TdcConfig) -> Result<TestReport> {
    check_inputs(y, x, g, config)?;
    let per_split = (0..config.splits)
        .map(|s| evaluate_split(y, x, g, config, s))
        .collect::<Result<Vec<_>>>()?;
    combine_splits(per_split, config, y.len(), g.n_variants())
}
