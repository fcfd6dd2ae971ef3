//! Auto-distance covariance/correlation across lags, plus the classical
//! autocorrelation and autocovariance estimators used by the
//! correlation-based tests.
//!
//! Negative lags are never recomputed: the univariate functions are even in
//! the lag, and the matrix versions transpose, per the usual conventions.

use crate::error::{Error, Result};
use crate::fastdcov::dcov_fast_slices;
use crate::linalg::Mat;
use crate::sample::{MultiSeries, Series};
use crate::scalar::Scalar;

pub(crate) fn abs_lag(j: isize) -> usize {
    j.unsigned_abs()
}

pub(crate) fn check_lag(n: usize, j: usize, max_allowed: usize) -> Result<()> {
    if j > max_allowed {
        return Err(Error::LagOutOfRange { lag: j, n });
    }
    Ok(())
}

/// Sample auto-distance covariance (squared) at lag `j`; even in `j`.
/// Computed on the n-|j| overlapping pairs; needs at least two of them.
pub fn adcv<F: Scalar>(x: &Series<F>, j: isize) -> Result<F> {
    let n = x.len();
    let j = abs_lag(j);
    check_lag(n, j, n - 2)?;
    let v = x.values();
    dcov_fast_slices(&v[..n - j], &v[j..])
}

/// Sample auto-distance correlation at lag `j`, in [0, 1]. The lag-0
/// normalizer is always the full-sample value, which pins adcf(0) = 1.
pub fn adcf<F: Scalar>(x: &Series<F>, j: isize) -> Result<F> {
    let v0 = adcv(x, 0)?;
    let vj = adcv(x, j)?;
    if v0 > F::zero() {
        Ok((vj / v0).min(F::one()).max(F::zero()).sqrt())
    } else {
        Ok(F::zero())
    }
}

/// Pairwise auto-distance covariance matrix at lag `j`: entry (r, m) pairs
/// component r at time t with component m at time t+j. Negative lags
/// transpose: V(-j) = V(j)'.
pub fn adcv_matrix<F: Scalar>(x: &MultiSeries<F>, j: isize) -> Result<Mat<F>> {
    let n = x.n();
    let d = x.dim();
    let lag = abs_lag(j);
    check_lag(n, lag, n - 2)?;
    let cols: Vec<Vec<F>> = (0..d).map(|r| x.column(r)).collect();
    let mut out = Mat::zeros(d, d);
    for r in 0..d {
        for m in 0..d {
            let v = dcov_fast_slices(&cols[r][..n - lag], &cols[m][lag..])?;
            if j < 0 {
                out[(m, r)] = v;
            } else {
                out[(r, m)] = v;
            }
        }
    }
    Ok(out)
}

/// Pairwise auto-distance correlation matrix at lag `j`; entries in [0, 1],
/// normalized by the full-sample lag-0 values of the two components.
pub fn adcf_matrix<F: Scalar>(x: &MultiSeries<F>, j: isize) -> Result<Mat<F>> {
    let d = x.dim();
    let v = adcv_matrix(x, j)?;
    let mut zero = Vec::with_capacity(d);
    for r in 0..d {
        let col = x.column(r);
        zero.push(dcov_fast_slices(&col, &col)?);
    }
    let mut out = Mat::zeros(d, d);
    for r in 0..d {
        for m in 0..d {
            let den = (zero[r] * zero[m]).sqrt();
            out[(r, m)] = if den > F::zero() {
                (v[(r, m)] / den).min(F::one()).max(F::zero()).sqrt()
            } else {
                F::zero()
            };
        }
    }
    Ok(out)
}

/// Sample autocorrelation at lag `j` (divisor n, grand-mean centering);
/// even in `j`; errors on zero-variance input.
pub fn acf<F: Scalar>(x: &Series<F>, j: isize) -> Result<F> {
    let n = x.len();
    let j = abs_lag(j);
    check_lag(n, j, n - 1)?;
    let v = x.values();
    let mean = v.iter().copied().sum::<F>() / F::from_usize(n);
    let mut var = F::zero();
    for &t in v {
        let d = t - mean;
        var += d * d;
    }
    if var <= F::zero() {
        return Err(Error::DegenerateSeries);
    }
    let mut cov = F::zero();
    for t in 0..n - j {
        cov += (v[t + j] - mean) * (v[t] - mean);
    }
    Ok(cov / var)
}

/// Sample autocovariance matrix at lag `j` (divisor n, grand-mean
/// centering): (1/n) sum_t (X_{t+j} - mean)(X_t - mean)'. Negative lags
/// transpose.
pub fn autocov_matrix<F: Scalar>(x: &MultiSeries<F>, j: isize) -> Result<Mat<F>> {
    let n = x.n();
    let d = x.dim();
    let lag = abs_lag(j);
    check_lag(n, lag, n - 1)?;
    let inv_n = F::from_usize(n).recip();
    let mut mean = vec![F::zero(); d];
    for t in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(t)) {
            *m += *v;
        }
    }
    for m in mean.iter_mut() {
        *m *= inv_n;
    }
    let mut out = Mat::zeros(d, d);
    for t in 0..n - lag {
        let lead = x.row(t + lag);
        let base = x.row(t);
        for a in 0..d {
            let da = lead[a] - mean[a];
            for b in 0..d {
                out[(a, b)] += da * (base[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..d {
            out[(a, b)] *= inv_n;
        }
    }
    if j < 0 {
        Ok(out.transpose())
    } else {
        Ok(out)
    }
}

/// Conventional default maximum lag for correlogram-style plots.
pub fn default_plot_max_lag(n: usize) -> usize {
    (10.0 * (n as f64).log10()).ceil() as usize
}

/// Per-lag ADCV/ADCF values over lags 0..=J, with room for critical bands
/// filled in by the resampling routines.
#[derive(Clone, Debug)]
pub struct LagProfile<F> {
    pub lags: Vec<usize>,
    pub adcv: Vec<F>,
    pub adcf: Vec<F>,
    /// Per-lag critical values, each lag calibrated on its own.
    pub pairwise_band: Option<Vec<F>>,
    /// One critical value shared by all lags, repeated per lag.
    pub simultaneous_band: Option<Vec<F>>,
}

/// ADCV and ADCF at lags 0..=max_lag.
pub fn lag_profile<F: Scalar>(x: &Series<F>, max_lag: usize) -> Result<LagProfile<F>> {
    let n = x.len();
    check_lag(n, max_lag, n - 2)?;
    let v0 = adcv(x, 0)?;
    let mut lags = Vec::with_capacity(max_lag + 1);
    let mut vs = Vec::with_capacity(max_lag + 1);
    let mut rs = Vec::with_capacity(max_lag + 1);
    for j in 0..=max_lag {
        let vj = if j == 0 { v0 } else { adcv(x, j as isize)? };
        lags.push(j);
        vs.push(vj);
        rs.push(if v0 > F::zero() {
            (vj / v0).min(F::one()).max(F::zero()).sqrt()
        } else {
            F::zero()
        });
    }
    Ok(LagProfile {
        lags,
        adcv: vs,
        adcf: rs,
        pairwise_band: None,
        simultaneous_band: None,
    })
}
