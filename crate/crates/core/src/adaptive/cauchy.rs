//! Cauchy combination of p-values.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::quadform::P_FLOOR;

/// Below this the tangent is replaced by its pole expansion 1/(pπ).
const SMALL_P: f64 = 1e-8;

/// p-values of exactly one are nudged to this before transforming.
const ONE_MINUS: f64 = 1.0 - 1e-16;

/// tan{(0.5 − p)π}, stable for tiny p.
pub fn cauchy_transform(p: f64) -> f64 {
    let p = if p >= 1.0 { ONE_MINUS } else { p };
    if p < SMALL_P {
        1.0 / (p * PI)
    } else if p < 0.25 {
        // cot(pπ) keeps full relative precision where 0.5 − p would not
        1.0 / (p * PI).tan()
    } else {
        ((0.5 - p) * PI).tan()
    }
}

/// Upper tail of the standard Cauchy law, 1/2 − arctan(t)/π.
pub fn cauchy_tail(t: f64) -> f64 {
    let p = if t > 1.0 { (1.0 / t).atan() / PI } else { 0.5 - t.atan() / PI };
    p.clamp(P_FLOOR, 1.0)
}

fn check(pvals: &[f64]) -> Result<()> {
    if pvals.is_empty() {
        return Err(Error::arg("cannot combine an empty list of p-values"));
    }
    if let Some(p) = pvals.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(Error::arg(format!("p-value {p} outside (0, 1]")));
    }
    Ok(())
}

/// Mean of the transformed p-values. Terms are summed in sorted order so the
/// result does not depend on the order of the inputs.
pub fn cauchy_statistic(pvals: &[f64]) -> Result<f64> {
    check(pvals)?;
    let mut t: Vec<f64> = pvals.iter().map(|&p| cauchy_transform(p)).collect();
    t.sort_by(f64::total_cmp);
    Ok(t.iter().sum::<f64>() / t.len() as f64)
}

/// Equal-weight Cauchy combination; the result lies in (0, 1].
pub fn cauchy_combine(pvals: &[f64]) -> Result<f64> {
    Ok(cauchy_tail(cauchy_statistic(pvals)?))
}
