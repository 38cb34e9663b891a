use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg;

/// n × J matrix of variant values, one column per variant.
#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeMatrix {
    values: DMatrix<f64>,
    variant_ids: Vec<String>,
    standardized: bool,
    column_means: Vec<f64>,
    column_sds: Vec<f64>,
    constant: Vec<bool>,
}

impl GenotypeMatrix {
    /// Wrap raw values. Variant ids default to `v1..vJ`.
    pub fn new(values: DMatrix<f64>, variant_ids: Option<Vec<String>>) -> Result<Self> {
        let j = values.ncols();
        let ids = match variant_ids {
            Some(ids) if ids.len() != j => {
                return Err(Error::dim(format!("{} variant ids for {} columns", ids.len(), j)));
            }
            Some(ids) => ids,
            None => (1..=j).map(|k| format!("v{k}")).collect(),
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("genotype matrix contains non-finite values"));
        }
        Ok(GenotypeMatrix {
            values,
            variant_ids: ids,
            standardized: false,
            column_means: Vec::new(),
            column_sds: Vec::new(),
            constant: alloc::vec![false; j],
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn variant_ids(&self) -> &[String] {
        &self.variant_ids
    }

    pub fn n_individuals(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_variants(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn column_means(&self) -> &[f64] {
        &self.column_means
    }

    pub fn column_sds(&self) -> &[f64] {
        &self.column_sds
    }

    /// Columns with zero variance; never offered to screening.
    pub fn constant_columns(&self) -> &[bool] {
        &self.constant
    }

    pub fn is_excluded(&self, j: usize) -> bool {
        self.constant[j]
    }

    /// Row subset keeping variant metadata and flags.
    pub fn subset_rows(&self, rows: &[usize]) -> GenotypeMatrix {
        GenotypeMatrix {
            values: linalg::select_rows(&self.values, rows),
            variant_ids: self.variant_ids.clone(),
            standardized: self.standardized,
            column_means: self.column_means.clone(),
            column_sds: self.column_sds.clone(),
            constant: self.constant.clone(),
        }
    }

    /// Values of the given rows and columns, in that order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, k| self.values[(rows[i], cols[k])])
    }

    pub fn columns(&self, cols: &[usize]) -> DMatrix<f64> {
        linalg::select_columns(&self.values, cols)
    }
}

/// Center and scale every non-constant column to mean 0 and sample
/// variance 1. Constant columns are flagged and left untouched.
pub fn standardize(raw: &GenotypeMatrix) -> Result<GenotypeMatrix> {
    let (n, j) = raw.values.shape();
    if n < 2 {
        return Err(Error::arg("standardize needs at least two individuals"));
    }
    let mut values = raw.values.clone();
    let mut means = Vec::with_capacity(j);
    let mut sds = Vec::with_capacity(j);
    let mut constant = Vec::with_capacity(j);
    for k in 0..j {
        let mut col = values.column_mut(k);
        let mean = col.iter().sum::<f64>() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        let is_const = !(sd > 1e-12 * mean.abs().max(1.0));
        if !is_const {
            for v in col.iter_mut() {
                *v = (*v - mean) / sd;
            }
        }
        means.push(mean);
        sds.push(sd);
        constant.push(is_const || raw.constant[k]);
    }
    if constant.iter().all(|&c| c) {
        return Err(Error::DegenerateGenotypes);
    }
    Ok(GenotypeMatrix {
        values,
        variant_ids: raw.variant_ids.clone(),
        standardized: true,
        column_means: means,
        column_sds: sds,
        constant,
    })
}
