//! Small statistics toolkit: correlation, least squares, one-sample t-tests.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::linalg::compensated_sum;

pub fn mean(x: &[f64]) -> f64 {
    compensated_sum(x.iter().copied()) / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    (compensated_sum(x.iter().map(|v| (v - m).powi(2))) / (x.len() as f64 - 1.0)).sqrt()
}

/// Pearson product-moment correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "correlation inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "correlation needs at least three points, got {}",
            x.len()
        )));
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx = compensated_sum(x.iter().map(|v| (v - mx) * (v - mx)));
    let syy = compensated_sum(y.iter().map(|v| (v - my) * (v - my)));
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput(
            "correlation of a constant vector is undefined".into(),
        ));
    }
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    /// Intercept first when one was requested, then one entry per regressor column.
    pub coefficients: DVector<f64>,
    pub standard_errors: DVector<f64>,
    pub residual_variance: f64,
    pub r_squared: f64,
    pub residuals: DVector<f64>,
}

/// Ordinary least squares by Householder QR.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, intercept: bool) -> Result<LeastSquares> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::InvalidArgument(format!(
            "regression has {n} rows of regressors but {} responses",
            y.len()
        )));
    }
    let design = if intercept {
        let mut d = DMatrix::from_element(n, x.ncols() + 1, 1.0);
        d.columns_mut(1, x.ncols()).copy_from(x);
        d
    } else {
        x.clone()
    };
    let k = design.ncols();
    if n <= k {
        return Err(Error::RankDeficientRegressors(format!(
            "{n} observations for {k} coefficients"
        )));
    }
    let qr = design.clone().qr();
    let r = qr.r();
    let scale = design
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0f64, f64::max);
    let tol = 1e-10 * scale.max(f64::MIN_POSITIVE);
    if let Some(j) = (0..k).find(|j| r[(*j, *j)].abs() <= tol) {
        return Err(Error::RankDeficientRegressors(format!(
            "regressor column {j} is linearly dependent on the others"
        )));
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficientRegressors("triangular solve failed".into()))?;
    let residuals = y - &design * &beta;
    let rss = residuals.norm_squared();
    let dof = (n - k) as f64;
    let residual_variance = rss / dof;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::RankDeficientRegressors("triangular solve failed".into()))?;
    let cov_diag = (&r_inv * r_inv.transpose()).diagonal() * residual_variance;
    let my = y.mean();
    let tss = y.iter().map(|v| (v - my).powi(2)).sum::<f64>();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { f64::NAN };
    Ok(LeastSquares {
        coefficients: beta,
        standard_errors: cov_diag.map(f64::sqrt),
        residual_variance,
        r_squared,
        residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub t: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Two-sided one-sample Student t-test of `mean = 0` with a 95% interval.
pub fn one_sample_t_test(x: &[f64]) -> Result<TTest> {
    if x.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "t-test needs at least two values, got {}",
            x.len()
        )));
    }
    let n = x.len();
    let m = mean(x);
    let sd = std_dev(x);
    if !(sd > 0.0) {
        return Err(Error::DegenerateInput(
            "t-test on values with zero variance".into(),
        ));
    }
    let se = sd / (n as f64).sqrt();
    let t = m / se;
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let p_value = (2.0 * dist.cdf(-t.abs())).min(1.0);
    let q = dist.inverse_cdf(0.975);
    Ok(TTest {
        n,
        mean: m,
        std_dev: sd,
        t,
        p_value,
        ci_low: m - q * se,
        ci_high: m + q * se,
    })
}
