use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponential-family response with its canonical link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlmFamily {
    /// Normal response, identity link, dispersion estimated.
    #[serde(alias = "gaussian")]
    GaussianIdentity,
    /// Binary response, logit link, dispersion fixed at 1.
    #[serde(alias = "binomial", alias = "logistic")]
    BinomialLogit,
}

impl GlmFamily {
    pub fn link(self, mu: f64) -> f64 {
        match self {
            GlmFamily::GaussianIdentity => mu,
            GlmFamily::BinomialLogit => mu.ln() - (-mu).ln_1p(),
        }
    }

    pub fn inverse_link(self, eta: f64) -> f64 {
        match self {
            GlmFamily::GaussianIdentity => eta,
            GlmFamily::BinomialLogit => logistic(eta),
        }
    }

    /// dμ/dη evaluated at `eta`.
    pub fn mu_eta(self, eta: f64) -> f64 {
        match self {
            GlmFamily::GaussianIdentity => 1.0,
            GlmFamily::BinomialLogit => {
                let mu = logistic(eta);
                mu * (1.0 - mu)
            }
        }
    }

    pub fn variance(self, mu: f64) -> f64 {
        match self {
            GlmFamily::GaussianIdentity => 1.0,
            GlmFamily::BinomialLogit => mu * (1.0 - mu),
        }
    }

    /// Excess kurtosis E(ε⁴)/v² − 3 of a response with mean μ.
    pub fn excess_kurtosis(self, mu: f64) -> f64 {
        match self {
            GlmFamily::GaussianIdentity => 0.0,
            GlmFamily::BinomialLogit => {
                let v = mu * (1.0 - mu);
                if v > 0.0 {
                    (1.0 - 6.0 * v) / v
                } else {
                    0.0
                }
            }
        }
    }

    pub fn estimates_dispersion(self) -> bool {
        matches!(self, GlmFamily::GaussianIdentity)
    }

    /// Deviance contribution of one observation.
    pub(crate) fn unit_deviance(self, y: f64, mu: f64) -> f64 {
        match self {
            GlmFamily::GaussianIdentity => (y - mu) * (y - mu),
            GlmFamily::BinomialLogit => {
                let mut d = 0.0;
                if y > 0.0 {
                    d += y * (y / mu).ln();
                }
                if y < 1.0 {
                    d += (1.0 - y) * ((1.0 - y) / (1.0 - mu)).ln();
                }
                2.0 * d
            }
        }
    }

    pub(crate) fn initial_mu(self, y: f64) -> f64 {
        match self {
            GlmFamily::GaussianIdentity => y,
            GlmFamily::BinomialLogit => (y + 0.5) / 2.0,
        }
    }

    pub(crate) fn clamp_mu(self, mu: f64) -> f64 {
        match self {
            GlmFamily::GaussianIdentity => mu,
            GlmFamily::BinomialLogit => mu.clamp(1e-15, 1.0 - 1e-15),
        }
    }

    pub(crate) fn validate_response(self, y: &[f64]) -> Result<()> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("response contains non-finite values"));
        }
        if self == GlmFamily::BinomialLogit && y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::arg("binomial response must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for GlmFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GlmFamily::GaussianIdentity => "gaussian-identity",
            GlmFamily::BinomialLogit => "binomial-logit",
        })
    }
}

impl FromStr for GlmFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "gaussian-identity" | "normal" => Ok(GlmFamily::GaussianIdentity),
            "binomial" | "binomial-logit" | "logistic" | "logit" => Ok(GlmFamily::BinomialLogit),
            other => Err(Error::arg(alloc::format!("unknown family '{other}'"))),
        }
    }
}
