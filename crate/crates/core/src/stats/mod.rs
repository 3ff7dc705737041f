//! Clustering and regression.

pub mod design;
pub mod kmeans;
pub mod logit;
pub mod ols;

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use design::{build_design, Design, DesignInput, FirmTerm, ModelKind, RegressionSpec, TerritoryTerm};
pub use kmeans::{elbow, kmeans_fit, kmeans_fit_weighted, ClusterModel, ElbowCurve};
pub use logit::logit_fit;
pub use ols::{ols_fit, ols_fit_with, OlsOptions};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("design is rank deficient; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("perfect separation: coefficient of {column} diverges")]
    PerfectSeparation { column: String },
    #[error("degenerate response: {0}")]
    DegenerateResponse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// t statistics for OLS, z statistics for Logit.
    pub statistics: Vec<f64>,
    pub p_values: Vec<f64>,
    pub n_observations: usize,
    pub df_resid: usize,
    pub r_squared: Option<f64>,
    pub adj_r_squared: Option<f64>,
    pub pseudo_r_squared: Option<f64>,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    /// OLS residuals in row order; empty for Logit.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

impl FitResult {
    pub fn coefficient(&self, term: &str) -> Option<f64> {
        self.terms.iter().position(|t| t == term).map(|i| self.coefficients[i])
    }

    pub fn p_value(&self, term: &str) -> Option<f64> {
        self.terms.iter().position(|t| t == term).map(|i| self.p_values[i])
    }

    /// `term,coef,se,stat,p` rows.
    pub fn write_coefficient_table<W: io::Write>(&self, out: W) -> Result<(), StatsError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["term", "coef", "se", "stat", "p"])?;
        for i in 0..self.terms.len() {
            w.write_record([
                self.terms[i].clone(),
                self.coefficients[i].to_string(),
                self.standard_errors[i].to_string(),
                self.statistics[i].to_string(),
                self.p_values[i].to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Two-sided p-value of a test statistic; a zero standard error gives 0 for a
/// nonzero coefficient and 1 for a zero one.
pub(crate) fn statistic_and_p(coef: f64, se: f64, sf: impl Fn(f64) -> f64) -> (f64, f64) {
    if se > 0.0 {
        let stat = coef / se;
        (stat, (2.0 * sf(stat.abs())).clamp(0.0, 1.0))
    } else if coef == 0.0 {
        (0.0, 1.0)
    } else {
        (coef.signum() * f64::INFINITY, 0.0)
    }
}

/// Intercept-bearing design: some column is identically 1.
pub(crate) fn has_intercept(x: &nalgebra::DMatrix<f64>) -> bool {
    (0..x.ncols()).any(|j| x.column(j).iter().all(|v| *v == 1.0))
}

pub(crate) fn check_shapes(x: &nalgebra::DMatrix<f64>, y: &nalgebra::DVector<f64>, names: &[String]) -> Result<(), StatsError> {
    if x.nrows() != y.len() {
        return Err(StatsError::Argument(format!("{} rows in X but {} responses", x.nrows(), y.len())));
    }
    if names.len() != x.ncols() {
        return Err(StatsError::Argument(format!("{} names for {} columns", names.len(), x.ncols())));
    }
    if x.ncols() == 0 {
        return Err(StatsError::Argument("design has no columns".into()));
    }
    if x.nrows() <= x.ncols() {
        return Err(StatsError::Argument(format!("need more rows ({}) than columns ({})", x.nrows(), x.ncols())));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(StatsError::Argument("non-finite value in design or response".into()));
    }
    Ok(())
}

/// Columns whose QR diagonal is negligible next to their own norm, i.e. that
/// lie in the span of the columns before them.
pub(crate) fn collinear_columns(x: &nalgebra::DMatrix<f64>, r: &nalgebra::DMatrix<f64>, names: &[String]) -> Vec<String> {
    (0..x.ncols())
        .filter(|&j| {
            let norm = x.column(j).norm();
            norm == 0.0 || r[(j, j)].abs() <= 1e-10 * norm
        })
        .map(|j| names[j].clone())
        .collect()
}
