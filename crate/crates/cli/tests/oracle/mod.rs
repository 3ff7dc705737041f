//! Reference implementations for the acceptance checks. Plain `Vec`
//! arithmetic with Gauss-Jordan elimination; nothing shared with the library
//! (which uses QR and IRLS).

#![allow(dead_code)]

pub type Rows = Vec<Vec<f64>>;

/// Inverse of a square matrix by Gauss-Jordan with partial pivoting.
pub fn invert(a: &Rows) -> Rows {
    let n = a.len();
    let mut m: Rows = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        assert!(p != 0.0, "singular matrix");
        for v in m[col].iter_mut() {
            *v /= p;
        }
        let pivot_row = m[col].clone();
        for (i, row) in m.iter_mut().enumerate() {
            let f = row[col];
            if i != col && f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn mat_vec(a: &Rows, v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

/// XᵀWX for row-major X and per-row weights.
pub fn gram(x: &Rows, w: &[f64]) -> Rows {
    let p = x[0].len();
    let mut g = vec![vec![0.0; p]; p];
    for (row, wi) in x.iter().zip(w) {
        for i in 0..p {
            for j in 0..p {
                g[i][j] += wi * row[i] * row[j];
            }
        }
    }
    g
}

/// Xᵀv.
pub fn xt_v(x: &Rows, v: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut out = vec![0.0; p];
    for (row, vi) in x.iter().zip(v) {
        for j in 0..p {
            out[j] += row[j] * vi;
        }
    }
    out
}

pub struct Ols {
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub aic: f64,
    pub bic: f64,
}

/// Textbook OLS through the normal equations. The first column of `x` must
/// be the intercept.
pub fn ols(x: &Rows, y: &[f64]) -> Ols {
    let n = x.len() as f64;
    let p = x[0].len() as f64;
    let inv = invert(&gram(x, &vec![1.0; x.len()]));
    let beta = mat_vec(&inv, &xt_v(x, y));
    let fitted = mat_vec(x, &beta);
    let ssr: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    let mean = y.iter().sum::<f64>() / n;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sigma2 = ssr / (n - p);
    let r_squared = 1.0 - ssr / sst;
    Ols {
        se: (0..beta.len()).map(|j| (sigma2 * inv[j][j]).sqrt()).collect(),
        beta,
        r_squared,
        adj_r_squared: 1.0 - (1.0 - r_squared) * (n - 1.0) / (n - p),
        aic: n * (ssr / n).ln() + 2.0 * p,
        bic: n * (ssr / n).ln() + p * n.ln(),
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub fn logit_loglik(x: &Rows, y: &[f64], beta: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(row, yi)| {
            let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            // log(1 + e^eta) without overflow
            let softplus = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
            yi * eta - softplus
        })
        .sum()
}

/// Maximum likelihood by Newton steps with step halving.
pub fn logit_newton(x: &Rows, y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut beta = vec![0.0; p];
    let mut ll = logit_loglik(x, y, &beta);
    for _ in 0..200 {
        let mu: Vec<f64> = mat_vec(x, &beta).into_iter().map(sigmoid).collect();
        let resid: Vec<f64> = y.iter().zip(&mu).map(|(a, m)| a - m).collect();
        let w: Vec<f64> = mu.iter().map(|m| m * (1.0 - m)).collect();
        let step = mat_vec(&invert(&gram(x, &w)), &xt_v(x, &resid));
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..50 {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let cll = logit_loglik(x, y, &cand);
            if cll >= ll {
                let gain = cll - ll;
                beta = cand;
                ll = cll;
                improved = gain > 1e-13;
                break;
            }
            t /= 2.0;
        }
        if !improved {
            break;
        }
    }
    beta
}

/// Central finite-difference gradient of `f` at `at`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, at: &[f64]) -> Vec<f64> {
    (0..at.len())
        .map(|j| {
            let h = 1e-5 * at[j].abs().max(1.0);
            let mut plus = at.to_vec();
            let mut minus = at.to_vec();
            plus[j] += h;
            minus[j] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
