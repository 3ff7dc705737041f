//! Ordinary least squares through a Householder QR factorisation.
//!
//! With `X = QR`, `beta = R^-1 Q'y` and `(X'X)^-1 = R^-1 R^-T`. R-squared is
//! centred when the design contains a column of ones and uncentred otherwise.
//! Information criteria use the concentrated Gaussian likelihood:
//! `AIC = n ln(SSR/n) + 2p`, `BIC = n ln(SSR/n) + p ln n`.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::design::ModelKind;
use super::{check_shapes, collinear_columns, has_intercept, statistic_and_p, FitResult, StatsError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OlsOptions {
    /// Heteroskedasticity-robust (HC1) standard errors instead of classical ones.
    pub robust: bool,
}

pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<FitResult, StatsError> {
    ols_fit_with(x, y, names, OlsOptions::default())
}

pub fn ols_fit_with(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String], options: OlsOptions) -> Result<FitResult, StatsError> {
    check_shapes(x, y, names)?;
    let (n, p) = x.shape();
    let qr = x.clone().qr();
    let r = qr.r();
    let collinear = collinear_columns(x, &r, names);
    if !collinear.is_empty() {
        return Err(StatsError::RankDeficient { columns: collinear });
    }
    let q = qr.q();
    let qty = q.transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| StatsError::RankDeficient { columns: names.to_vec() })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| StatsError::RankDeficient { columns: names.to_vec() })?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let residuals = y - x * &beta;
    let ssr = residuals.norm_squared();
    let df = n - p;
    let intercept = has_intercept(x);
    let sst = if intercept {
        let mean = y.mean();
        y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
    } else {
        y.norm_squared()
    };
    if sst == 0.0 {
        return Err(StatsError::DegenerateResponse("response has no variation".into()));
    }
    let r_squared = 1.0 - ssr / sst;
    let df_total = if intercept { n - 1 } else { n };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * df_total as f64 / df as f64;

    let cov = if options.robust {
        let mut meat = DMatrix::<f64>::zeros(p, p);
        for i in 0..n {
            let row = x.row(i);
            meat += row.transpose() * row * residuals[i].powi(2);
        }
        &xtx_inv * meat * &xtx_inv * (n as f64 / df as f64)
    } else {
        &xtx_inv * (ssr / df as f64)
    };
    let standard_errors: Vec<f64> = (0..p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    let t = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| StatsError::Argument(e.to_string()))?;
    let (statistics, p_values): (Vec<f64>, Vec<f64>) =
        (0..p).map(|j| statistic_and_p(beta[j], standard_errors[j], |s| t.sf(s))).unzip();

    let nf = n as f64;
    let pf = p as f64;
    let base = nf * (ssr / nf).ln();
    let log_likelihood = -0.5 * nf * (1.0 + (2.0 * std::f64::consts::PI).ln() + (ssr / nf).ln());
    Ok(FitResult {
        model: ModelKind::Ols,
        terms: names.to_vec(),
        coefficients: beta.iter().copied().collect(),
        standard_errors,
        statistics,
        p_values,
        n_observations: n,
        df_resid: df,
        r_squared: Some(r_squared),
        adj_r_squared: Some(adj_r_squared),
        pseudo_r_squared: None,
        log_likelihood,
        aic: base + 2.0 * pf,
        bic: base + pf * nf.ln(),
        residuals: residuals.iter().copied().collect(),
        iterations: 1,
    })
}
