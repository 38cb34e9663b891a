use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::GlmFamily;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsOptions {
    pub max_iterations: usize,
    /// Convergence when the largest absolute coefficient change drops below this.
    pub tolerance: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        IrlsOptions { max_iterations: 100, tolerance: 1e-10 }
    }
}

/// Null GLM fit (covariates only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullModelFit {
    pub family: GlmFamily,
    pub beta_x: Vec<f64>,
    pub fitted_means: Vec<f64>,
    pub residuals: Vec<f64>,
    pub dispersion: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl NullModelFit {
    pub fn n(&self) -> usize {
        self.fitted_means.len()
    }

    /// a_i(φ)·ν(μ̂_i) for every observation.
    pub fn response_variances(&self) -> Vec<f64> {
        self.fitted_means.iter().map(|&mu| self.dispersion * self.family.variance(mu)).collect()
    }

    /// Treat coefficients estimated elsewhere as known and evaluate them on new data.
    pub fn with_known_coefficients(&self, y: &[f64], x: &DMatrix<f64>) -> Result<NullModelFit> {
        if x.ncols() != self.beta_x.len() || x.nrows() != y.len() {
            return Err(Error::dim("covariates do not match the supplied coefficients"));
        }
        let beta = DVector::from_column_slice(&self.beta_x);
        let eta = x * beta;
        let fitted: Vec<f64> = eta.iter().map(|&e| self.family.clamp_mu(self.family.inverse_link(e))).collect();
        let residuals = y.iter().zip(&fitted).map(|(y, m)| y - m).collect();
        Ok(NullModelFit {
            family: self.family,
            beta_x: self.beta_x.clone(),
            fitted_means: fitted,
            residuals,
            dispersion: self.dispersion,
            converged: self.converged,
            iterations: 0,
        })
    }
}

/// n × 1 column of ones.
pub fn intercept_only(n: usize) -> DMatrix<f64> {
    DMatrix::from_element(n, 1, 1.0)
}

pub(crate) struct IrlsFit {
    pub beta: DVector<f64>,
    pub mu: Vec<f64>,
    /// (XᵀWX)⁻¹ at the solution.
    pub information_inverse: DMatrix<f64>,
    pub iterations: usize,
}

fn deviance(family: GlmFamily, y: &[f64], mu: &[f64]) -> f64 {
    y.iter().zip(mu).map(|(&y, &m)| family.unit_deviance(y, m)).sum()
}

fn weighted_normal_equations(x: &DMatrix<f64>, w: &[f64], z: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let (n, p) = x.shape();
    let mut xtwx = DMatrix::zeros(p, p);
    let mut xtwz = DVector::zeros(p);
    for a in 0..p {
        let xa = x.column(a);
        for b in a..p {
            let xb = x.column(b);
            let mut s = 0.0;
            for i in 0..n {
                s += xa[i] * w[i] * xb[i];
            }
            xtwx[(a, b)] = s;
            xtwx[(b, a)] = s;
        }
        let mut s = 0.0;
        for i in 0..n {
            s += xa[i] * w[i] * z[i];
        }
        xtwz[a] = s;
    }
    (xtwx, xtwz)
}

fn linear_predictor(x: &DMatrix<f64>, beta: &DVector<f64>) -> Vec<f64> {
    (x * beta).iter().copied().collect()
}

pub(crate) fn irls(
    y: &[f64],
    x: &DMatrix<f64>,
    family: GlmFamily,
    start: Option<&DVector<f64>>,
    opts: IrlsOptions,
) -> Result<IrlsFit> {
    let n = y.len();
    let p = x.ncols();
    let mut eta: Vec<f64> = match start {
        Some(b) => linear_predictor(x, b),
        None => y.iter().map(|&v| family.link(family.initial_mu(v))).collect(),
    };
    let mut mu: Vec<f64> = eta.iter().map(|&e| family.clamp_mu(family.inverse_link(e))).collect();
    let mut beta: Option<DVector<f64>> = start.cloned();
    let mut dev_old = if start.is_some() { deviance(family, y, &mu) } else { f64::INFINITY };
    let mut trace = Vec::new();
    let mut w = alloc::vec![0.0; n];
    let mut z = alloc::vec![0.0; n];

    for it in 1..=opts.max_iterations {
        for i in 0..n {
            let d = family.mu_eta(eta[i]).max(1e-300);
            let v = family.variance(mu[i]).max(1e-300);
            w[i] = d * d / v;
            z[i] = eta[i] + (y[i] - mu[i]) / d;
        }
        let (xtwx, xtwz) = weighted_normal_equations(x, &w, &z);
        let mut new_beta = match linalg::spd_solve(xtwx, &xtwz) {
            Some(b) => b,
            // weights collapsing towards zero on a full-rank design
            None if family == GlmFamily::BinomialLogit && eta.iter().any(|e| e.abs() > 15.0) => {
                return Err(Error::Separation)
            }
            None => return Err(Error::RankDeficient),
        };
        let mut new_eta = linear_predictor(x, &new_beta);
        let mut new_mu: Vec<f64> = new_eta.iter().map(|&e| family.clamp_mu(family.inverse_link(e))).collect();
        let mut dev = deviance(family, y, &new_mu);

        if let Some(old) = &beta {
            let mut halvings = 0;
            while !(dev.is_finite() && dev <= dev_old + 1e-12 * dev_old.abs()) && halvings < 30 {
                new_beta = (&new_beta + old) * 0.5;
                new_eta = linear_predictor(x, &new_beta);
                new_mu = new_eta.iter().map(|&e| family.clamp_mu(family.inverse_link(e))).collect();
                dev = deviance(family, y, &new_mu);
                halvings += 1;
            }
        }
        trace.push(dev);

        let change = match &beta {
            Some(old) => linalg::max_abs((&new_beta - old).iter().copied()),
            None => f64::INFINITY,
        };
        beta = Some(new_beta);
        eta = new_eta;
        mu = new_mu;
        dev_old = dev;

        if change < opts.tolerance {
            for i in 0..n {
                let d = family.mu_eta(eta[i]).max(1e-300);
                w[i] = d * d / family.variance(mu[i]).max(1e-300);
            }
            let (xtwx, _) = weighted_normal_equations(x, &w, &z);
            let information_inverse = xtwx.try_inverse().ok_or(Error::RankDeficient)?;
            return Ok(IrlsFit {
                beta: beta.unwrap_or_else(|| DVector::zeros(p)),
                mu,
                information_inverse,
                iterations: it,
            });
        }
    }

    if family == GlmFamily::BinomialLogit && eta.iter().any(|e| e.abs() > 30.0) {
        return Err(Error::Separation);
    }
    Err(Error::NotConverged { iterations: opts.max_iterations, trace })
}

fn check_design(y: &[f64], x: &DMatrix<f64>) -> Result<()> {
    let (n, q) = x.shape();
    if y.len() != n {
        return Err(Error::dim(format!("response has {} rows, covariates {}", y.len(), n)));
    }
    if n <= q {
        return Err(Error::arg(format!("need more observations ({n}) than covariates ({q})")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("covariates contain non-finite values"));
    }
    let xtx = linalg::gram_columns(x);
    if linalg::spd_solve(xtx, &DVector::zeros(q)).is_none() {
        return Err(Error::RankDeficient);
    }
    Ok(())
}

/// Maximum-likelihood fit of the covariate-only model by IRLS.
pub fn fit_null_glm(y: &[f64], x: &DMatrix<f64>, family: GlmFamily) -> Result<NullModelFit> {
    fit_null_glm_with(y, x, family, IrlsOptions::default())
}

pub fn fit_null_glm_with(
    y: &[f64],
    x: &DMatrix<f64>,
    family: GlmFamily,
    opts: IrlsOptions,
) -> Result<NullModelFit> {
    check_design(y, x)?;
    family.validate_response(y)?;
    let fit = irls(y, x, family, None, opts)?;
    let residuals: Vec<f64> = y.iter().zip(&fit.mu).map(|(y, m)| y - m).collect();
    let dispersion = if family.estimates_dispersion() {
        residuals.iter().map(|r| r * r).sum::<f64>() / (y.len() - x.ncols()) as f64
    } else {
        1.0
    };
    Ok(NullModelFit {
        family,
        beta_x: fit.beta.iter().copied().collect(),
        fitted_means: fit.mu,
        residuals,
        dispersion,
        converged: true,
        iterations: fit.iterations,
    })
}

/// Single-variant GLM coefficient and Wald statistic, covariates included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalFit {
    pub beta: f64,
    pub z: f64,
}

pub fn marginal_fit(y: &[f64], x: &DMatrix<f64>, g: &[f64], family: GlmFamily) -> Result<MarginalFit> {
    marginal_fit_warm(y, x, g, family, None)
}

fn marginal_fit_warm(
    y: &[f64],
    x: &DMatrix<f64>,
    g: &[f64],
    family: GlmFamily,
    null_beta: Option<&[f64]>,
) -> Result<MarginalFit> {
    check_design(y, x)?;
    if g.len() != y.len() {
        return Err(Error::dim("variant column length differs from response"));
    }
    let (n, q) = x.shape();
    let mut design = x.clone().resize_horizontally(q + 1, 0.0);
    design.column_mut(q).copy_from_slice(g);
    if n <= q + 1 {
        return Err(Error::arg("too few observations for a marginal fit"));
    }
    let start = null_beta.map(|b| {
        let mut s = DVector::zeros(q + 1);
        for (k, v) in b.iter().enumerate() {
            s[k] = *v;
        }
        s
    });
    let fit = irls(y, &design, family, start.as_ref(), IrlsOptions::default())?;
    let beta = fit.beta[q];
    let dispersion = if family.estimates_dispersion() {
        y.iter().zip(&fit.mu).map(|(y, m)| (y - m) * (y - m)).sum::<f64>() / (n - q - 1) as f64
    } else {
        1.0
    };
    let var = dispersion * fit.information_inverse[(q, q)];
    if !(var >= 0.0) || !beta.is_finite() {
        return Err(Error::Numerical(format!("invalid marginal variance {var}")));
    }
    let se = var.sqrt();
    let z = if se > 0.0 {
        beta / se
    } else if beta == 0.0 {
        0.0
    } else {
        beta.signum() * f64::INFINITY
    };
    Ok(MarginalFit { beta, z })
}

/// Marginal fit for screening: the same IRLS as [`marginal_fit`] (warm
/// start at the null coefficients, step halving, identical stopping rule) but
/// without materialising the augmented design, so one pass over the data per
/// iteration. Covariates are assumed already checked.
pub(crate) fn marginal_fit_fused(
    y: &[f64],
    x: &DMatrix<f64>,
    g: &[f64],
    family: GlmFamily,
    null_beta: &[f64],
) -> Result<MarginalFit> {
    let (n, q) = x.shape();
    let p = q + 1;
    if g.len() != n || y.len() != n || null_beta.len() != q {
        return Err(Error::dim("marginal fit inputs disagree in size"));
    }
    if n <= p {
        return Err(Error::arg("too few observations for a marginal fit"));
    }
    let opts = IrlsOptions::default();
    let predictor = |b: &[f64], out: &mut [f64]| {
        for (i, e) in out.iter_mut().enumerate() {
            *e = g[i] * b[q];
        }
        for k in 0..q {
            let col = x.column(k);
            for (i, e) in out.iter_mut().enumerate() {
                *e += col[i] * b[k];
            }
        }
    };
    let fill_mu = |eta: &[f64], mu: &mut [f64]| -> f64 {
        let mut dev = 0.0;
        for i in 0..n {
            mu[i] = family.clamp_mu(family.inverse_link(eta[i]));
            dev += family.unit_deviance(y[i], mu[i]);
        }
        dev
    };
    // weighted cross-products of the augmented design, upper triangle
    let normal_equations = |eta: &[f64], mu: &[f64], with_rhs: bool| {
        let mut a = DMatrix::zeros(p, p);
        let mut rhs = DVector::zeros(p);
        let mut row = alloc::vec![0.0; p];
        for i in 0..n {
            let (w, z) = match family {
                GlmFamily::GaussianIdentity => (1.0, y[i]),
                // canonical link: dμ/dη = ν(μ)
                GlmFamily::BinomialLogit => {
                    let d = (mu[i] * (1.0 - mu[i])).max(1e-300);
                    (d, eta[i] + (y[i] - mu[i]) / d)
                }
            };
            for k in 0..q {
                row[k] = x[(i, k)];
            }
            row[q] = g[i];
            for a_ in 0..p {
                let wa = w * row[a_];
                for b_ in a_..p {
                    a[(a_, b_)] += wa * row[b_];
                }
                if with_rhs {
                    rhs[a_] += wa * z;
                }
            }
        }
        for a_ in 0..p {
            for b_ in 0..a_ {
                a[(a_, b_)] = a[(b_, a_)];
            }
        }
        (a, rhs)
    };

    let finish = |b: f64, var: f64| {
        if !(var >= 0.0) || !b.is_finite() {
            return Err(Error::Numerical(format!("invalid marginal variance {var}")));
        }
        let se = var.sqrt();
        let z = if se > 0.0 {
            b / se
        } else if b == 0.0 {
            0.0
        } else {
            b.signum() * f64::INFINITY
        };
        Ok(MarginalFit { beta: b, z })
    };
    let mut beta: Vec<f64> = null_beta.iter().copied().chain(core::iter::once(0.0)).collect();
    let mut eta = alloc::vec![0.0; n];
    let mut mu = alloc::vec![0.0; n];
    predictor(&beta, &mut eta);
    let mut dev_old = fill_mu(&eta, &mut mu);
    let mut trace = Vec::new();
    let mut new_eta = alloc::vec![0.0; n];
    let mut new_mu = alloc::vec![0.0; n];

    if family == GlmFamily::GaussianIdentity {
        // least squares: IRLS converges in a single step
        let (a, rhs) = normal_equations(&eta, &mu, true);
        let inv = a.try_inverse().ok_or(Error::RankDeficient)?;
        let b: DVector<f64> = &inv * rhs;
        beta.copy_from_slice(b.as_slice());
        predictor(&beta, &mut eta);
        let rss: f64 = y.iter().zip(&eta).map(|(y, e)| (y - e) * (y - e)).sum();
        return finish(beta[q], rss / (n - p) as f64 * inv[(q, q)]);
    }
    for _ in 1..=opts.max_iterations {
        let (a, rhs) = normal_equations(&eta, &mu, true);
        let mut new_beta: Vec<f64> = match linalg::spd_solve(a, &rhs) {
            Some(b) => b.iter().copied().collect(),
            None if family == GlmFamily::BinomialLogit && eta.iter().any(|e| e.abs() > 15.0) => {
                return Err(Error::Separation)
            }
            None => return Err(Error::RankDeficient),
        };
        predictor(&new_beta, &mut new_eta);
        let mut dev = fill_mu(&new_eta, &mut new_mu);
        let mut halvings = 0;
        while !(dev.is_finite() && dev <= dev_old + 1e-12 * dev_old.abs()) && halvings < 30 {
            for (nb, ob) in new_beta.iter_mut().zip(&beta) {
                *nb = (*nb + ob) * 0.5;
            }
            predictor(&new_beta, &mut new_eta);
            dev = fill_mu(&new_eta, &mut new_mu);
            halvings += 1;
        }
        trace.push(dev);
        let change = linalg::max_abs(new_beta.iter().zip(&beta).map(|(a, b)| a - b));
        beta = new_beta;
        core::mem::swap(&mut eta, &mut new_eta);
        core::mem::swap(&mut mu, &mut new_mu);
        dev_old = dev;

        if change < opts.tolerance {
            let (info, _) = normal_equations(&eta, &mu, false);
            let inv = info.try_inverse().ok_or(Error::RankDeficient)?;
            return finish(beta[q], inv[(q, q)]);
        }
    }
    if family == GlmFamily::BinomialLogit && eta.iter().any(|e| e.abs() > 30.0) {
        return Err(Error::Separation);
    }
    Err(Error::NotConverged { iterations: opts.max_iterations, trace })
}
