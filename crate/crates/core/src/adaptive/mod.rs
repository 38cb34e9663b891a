//! The adaptive test: per-split statistics, their Cauchy combination, and
//! the double Cauchy combination across repeated splits.

mod cauchy;
mod stats;
mod tdc;

pub use cauchy::{cauchy_combine, cauchy_statistic, cauchy_tail, cauchy_transform};
pub use stats::{t1_statistic, t1_test, t_gamma_test, t_gamma_test_with, testing_covariance, GammaStat, T1Stat};
pub use tdc::{
    combine_splits, evaluate_split, tc_test, tdc_test, J2Rule, NuisanceMode, NullLaw, SplitOutcome, SplitTestResult,
    TdcConfig, TestReport,
};
