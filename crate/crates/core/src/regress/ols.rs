//! Least-squares fitting via QR decomposition.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::RegressError;

/// A fitted linear model with classical inference statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    /// Two-sided p-values from the t distribution with n-k degrees of freedom.
    pub p_values: Vec<f64>,
    pub n: usize,
    pub k: usize,
    pub rss: f64,
    pub r_squared: f64,
    /// Overall F against the intercept-only model; NaN when k = 1.
    pub f_statistic: f64,
    pub rmse: f64,
}

/// Fit y on X by QR least squares with homoskedastic standard errors.
///
/// R-squared is measured against the mean-only model, F is the overall test
/// with k - 1 numerator degrees of freedom, and rmse is sqrt(RSS/(n-k)).
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit, RegressError> {
    let n = x.nrows();
    let k = x.ncols();
    if y.len() != n {
        return Err(RegressError::LengthMismatch(n, y.len()));
    }
    if n <= k {
        return Err(RegressError::TooFewRows { rows: n, cols: k });
    }

    let qr = x.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    if max_diag == 0.0 || (0..k).any(|i| r[(i, i)].abs() < 1e-13 * max_diag) {
        return Err(RegressError::Singular);
    }
    let qty = q.transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(RegressError::Singular)?;

    let residuals = y - x * &beta;
    let rss = residuals.norm_squared();
    let dof = (n - k) as f64;
    let sigma2 = rss / dof;

    // (X'X)^-1 = R^-1 R^-T
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(RegressError::Singular)?;
    let std_errors: Vec<f64> = (0..k)
        .map(|j| (sigma2 * r_inv.row(j).norm_squared()).sqrt())
        .collect();

    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if tss == 0.0 {
        return Err(RegressError::ConstantResponse);
    }
    let r_squared = (1.0 - rss / tss).clamp(0.0, 1.0);
    let f_statistic = if k > 1 {
        (r_squared / (k as f64 - 1.0)) / ((1.0 - r_squared) / dof)
    } else {
        f64::NAN
    };

    let t_dist = StudentsT::new(0.0, 1.0, dof).expect("positive dof");
    let mut t_values = Vec::with_capacity(k);
    let mut p_values = Vec::with_capacity(k);
    for j in 0..k {
        let t = beta[j] / std_errors[j];
        t_values.push(t);
        p_values.push(if t.is_finite() {
            2.0 * (1.0 - t_dist.cdf(t.abs()))
        } else {
            0.0
        });
    }

    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        std_errors,
        t_values,
        p_values,
        n,
        k,
        rss,
        r_squared,
        f_statistic,
        rmse: sigma2.sqrt(),
    })
}
