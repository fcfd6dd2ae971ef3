//! Portmanteau-style serial dependence statistics: correlation based (BP,
//! LB, mLB, H96, spectral T2n/T3n), EDF based (ST, H98), generalized
//! covariance based (H99), and distance covariance based (FP and the
//! multivariate FPm/STm/H98m).
//!
//! The correlation statistics divide by the sample variance and therefore
//! reject constant series. The V- and EDF-type statistics are well defined
//! there and evaluate to 0.

use crate::edf::d2_slices;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::sample::{MultiSeries, Series};
use crate::scalar::{Kahan, Scalar};
use crate::timeseries::{acf, adcv_matrix, autocov_matrix};

/// Names of the supported test statistics, including the plain distance
/// covariance and the rank-based Feuerverger statistic used by the
/// independent-pairs tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StatName {
    Bp,
    Lb,
    Mlb,
    H96,
    T2n,
    T3n,
    H98,
    H99,
    St,
    Fp,
    FpM,
    StM,
    H98M,
    Feuerverger,
    Dcov,
}

impl StatName {
    pub const ALL: [StatName; 15] = [
        StatName::Bp,
        StatName::Lb,
        StatName::Mlb,
        StatName::H96,
        StatName::T2n,
        StatName::T3n,
        StatName::H98,
        StatName::H99,
        StatName::St,
        StatName::Fp,
        StatName::FpM,
        StatName::StM,
        StatName::H98M,
        StatName::Feuerverger,
        StatName::Dcov,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            StatName::Bp => "BP",
            StatName::Lb => "LB",
            StatName::Mlb => "mLB",
            StatName::H96 => "H96",
            StatName::T2n => "T2n",
            StatName::T3n => "T3n",
            StatName::H98 => "H98",
            StatName::H99 => "H99",
            StatName::St => "ST",
            StatName::Fp => "FP",
            StatName::FpM => "FPm",
            StatName::StM => "STm",
            StatName::H98M => "H98m",
            StatName::Feuerverger => "Feuerverger",
            StatName::Dcov => "Dcov",
        }
    }

    /// Whether the statistic smooths lags through a kernel and bandwidth.
    pub fn uses_kernel(&self) -> bool {
        matches!(
            self,
            StatName::H96
                | StatName::T2n
                | StatName::T3n
                | StatName::H98
                | StatName::H99
                | StatName::Fp
                | StatName::FpM
                | StatName::H98M
        )
    }
}

impl std::fmt::Display for StatName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for StatName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        for name in StatName::ALL {
            if name.label().to_ascii_lowercase() == lower {
                return Ok(name);
            }
        }
        Err(Error::Parse(format!("unknown statistic: {s}")))
    }
}

/// A named statistic value with its lag/bandwidth metadata.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestStatistic<F> {
    pub name: StatName,
    pub value: F,
    /// Bandwidth or max lag; 0 when the statistic has neither.
    pub p: usize,
    pub kernel: Option<KernelSpec>,
}

fn check_bandwidth(p: usize, n: usize) -> Result<()> {
    if p == 0 || p >= n {
        return Err(Error::BandwidthOutOfRange { p, n });
    }
    Ok(())
}

/// Which per-lag summaries a [`SerialProfile`] should hold.
#[derive(Clone, Copy, Debug, Default)]
pub struct ProfileRequest {
    pub rho: bool,
    pub adcv: bool,
    pub gsig2: bool,
    pub d2: bool,
}

impl ProfileRequest {
    pub fn all() -> Self {
        ProfileRequest { rho: true, adcv: true, gsig2: true, d2: true }
    }

    /// The parts needed to evaluate each of `stats` through
    /// [`stat_from_profile`]. Statistics without a univariate profile
    /// backing contribute nothing.
    pub fn for_statistics(stats: &[StatName]) -> Self {
        let mut need = ProfileRequest::default();
        for s in stats {
            match s {
                StatName::Bp
                | StatName::Lb
                | StatName::H96
                | StatName::T2n
                | StatName::T3n => need.rho = true,
                StatName::Fp => need.adcv = true,
                StatName::H99 => need.gsig2 = true,
                StatName::St | StatName::H98 => need.d2 = true,
                _ => {}
            }
        }
        need
    }
}

/// Per-lag summaries of one series, shared across statistics and bandwidths
/// so that Monte Carlo sweeps touch the O(n^2) kernels once per lag.
///
/// Vectors are indexed by lag. Index 0 holds rho(0) = 1 and the full-sample
/// adcv(0); the gsig2 and d2 slots at 0 are unused and left at zero. Lags
/// whose pair count drops below 2 (only j = n-1) contribute exactly 0 for
/// the V- and EDF-type summaries.
#[derive(Clone, Debug)]
pub struct SerialProfile<F> {
    pub n: usize,
    pub max_lag: usize,
    pub rho: Option<Vec<F>>,
    pub adcv: Option<Vec<F>>,
    pub gsig2: Option<Vec<F>>,
    pub d2: Option<Vec<F>>,
}

impl<F: Scalar> SerialProfile<F> {
    pub fn compute(x: &Series<F>, max_lag: usize, need: ProfileRequest) -> Result<Self> {
        let n = x.len();
        if max_lag > n - 1 {
            return Err(Error::LagOutOfRange { lag: max_lag, n });
        }
        let v = x.values();

        let rho = if need.rho {
            let mut out = Vec::with_capacity(max_lag + 1);
            out.push(F::one());
            for j in 1..=max_lag {
                out.push(acf(x, j as isize)?);
            }
            Some(out)
        } else {
            None
        };

        let adcv = if need.adcv {
            let mut out = Vec::with_capacity(max_lag + 1);
            for j in 0..=max_lag {
                if n - j < 2 {
                    out.push(F::zero());
                } else {
                    out.push(crate::fastdcov::dcov_fast_slices(&v[..n - j], &v[j..])?);
                }
            }
            Some(out)
        } else {
            None
        };

        let gsig2 = if need.gsig2 {
            let mut out = Vec::with_capacity(max_lag + 1);
            out.push(F::zero());
            // One shared Gaussian kernel table turns each lag into a windowed
            // pass of multiplies instead of fresh exp calls; above the size cap
            // fall back to the O(n) memory streaming form.
            let table = if n * n <= GSIG2_TABLE_LIMIT {
                Some(gauss_table(v))
            } else {
                None
            };
            for j in 1..=max_lag {
                if n - j < 2 {
                    out.push(F::zero());
                } else if let Some(g) = &table {
                    out.push(gsig2_from_table(g, n, j));
                } else {
                    out.push(gsig2_slices(&v[..n - j], &v[j..]));
                }
            }
            Some(out)
        } else {
            None
        };

        let d2 = if need.d2 {
            let mut out = Vec::with_capacity(max_lag + 1);
            out.push(F::zero());
            for j in 1..=max_lag {
                if n - j < 2 {
                    out.push(F::zero());
                } else {
                    out.push(d2_slices(&v[..n - j], &v[j..]));
                }
            }
            Some(out)
        } else {
            None
        };

        Ok(SerialProfile { n, max_lag, rho, adcv, gsig2, d2 })
    }

    fn part<'a>(&'a self, values: &'a Option<Vec<F>>, through: usize, what: &'static str) -> Result<&'a [F]> {
        let v = values
            .as_deref()
            .ok_or_else(|| Error::invalid("profile", format!("missing {what} summaries")))?;
        if through > self.max_lag {
            return Err(Error::invalid(
                "profile",
                format!("needs {what} through lag {through}, has {}", self.max_lag),
            ));
        }
        Ok(v)
    }
}

/// Gaussian generalized covariance through the expanded three-sum with
/// a_ts = exp(-(u_t - u_s)^2 / 2), streamed one row at a time.
pub(crate) fn gsig2_slices<F: Scalar>(u: &[F], v: &[F]) -> F {
    let n = u.len();
    debug_assert_eq!(n, v.len());
    let half = F::from_f64(0.5);
    let mut s1 = Kahan::new();
    let mut sa = Kahan::new();
    let mut sb = Kahan::new();
    let mut s3 = Kahan::new();
    for t in 0..n {
        let mut row_ab = F::zero();
        let mut row_a = F::zero();
        let mut row_b = F::zero();
        for s in 0..n {
            let du = u[t] - u[s];
            let dv = v[t] - v[s];
            let a = (-half * du * du).exp();
            let b = (-half * dv * dv).exp();
            row_ab += a * b;
            row_a += a;
            row_b += b;
        }
        s1.add(row_ab);
        sa.add(row_a);
        sb.add(row_b);
        s3.add(row_a * row_b);
    }
    let nf = F::from_usize(n);
    let n2 = nf * nf;
    let value = s1.total() / n2 + (sa.total() / n2) * (sb.total() / n2)
        - F::from_f64(2.0) * s3.total() / (n2 * nf);
    if value > F::zero() {
        value
    } else {
        F::zero()
    }
}

// Table cap 2000^2 entries: 32 MB of f64, small against the profile's reuse.
const GSIG2_TABLE_LIMIT: usize = 4_000_000;

fn gauss_table<F: Scalar>(v: &[F]) -> Vec<F> {
    let n = v.len();
    let half = F::from_f64(0.5);
    let mut g = vec![F::one(); n * n];
    for t in 0..n {
        for s in t + 1..n {
            let d = v[t] - v[s];
            let e = (-half * d * d).exp();
            g[t * n + s] = e;
            g[s * n + t] = e;
        }
    }
    g
}

// Same three-sum as gsig2_slices with a_ts = g[t][s], b_ts = g[t+j][s+j];
// identical accumulation order keeps the result bit-equal to the slice form.
fn gsig2_from_table<F: Scalar>(g: &[F], n: usize, j: usize) -> F {
    let m = n - j;
    let mut s1 = Kahan::new();
    let mut sa = Kahan::new();
    let mut sb = Kahan::new();
    let mut s3 = Kahan::new();
    for t in 0..m {
        let arow = &g[t * n..t * n + m];
        let brow = &g[(t + j) * n + j..(t + j) * n + n];
        let mut row_ab = F::zero();
        let mut row_a = F::zero();
        let mut row_b = F::zero();
        for s in 0..m {
            row_ab += arow[s] * brow[s];
            row_a += arow[s];
            row_b += brow[s];
        }
        s1.add(row_ab);
        sa.add(row_a);
        sb.add(row_b);
        s3.add(row_a * row_b);
    }
    let mf = F::from_usize(m);
    let m2 = mf * mf;
    let value = s1.total() / m2 + (sa.total() / m2) * (sb.total() / m2)
        - F::from_f64(2.0) * s3.total() / (m2 * mf);
    if value > F::zero() {
        value
    } else {
        F::zero()
    }
}

/// Gaussian-weighted generalized covariance of the lag-j pairs; even in j.
pub fn gaussian_weighted_sigma2<F: Scalar>(x: &Series<F>, j: isize) -> Result<F> {
    let n = x.len();
    let lag = crate::timeseries::abs_lag(j);
    crate::timeseries::check_lag(n, lag, n - 2)?;
    let v = x.values();
    Ok(gsig2_slices(&v[..n - lag], &v[lag..]))
}

// Combinators over profile slices. Each statistic has exactly one
// implementation; the public Series functions and the Monte Carlo harness
// both route through these.

pub(crate) fn bp_from_rho<F: Scalar>(rho: &[F], n: usize, p: usize) -> F {
    let nf = F::from_usize(n);
    let mut acc = Kahan::new();
    for j in 1..=p {
        acc.add(rho[j] * rho[j]);
    }
    nf * acc.total()
}

pub(crate) fn lb_from_rho<F: Scalar>(rho: &[F], n: usize, p: usize) -> F {
    let nf = F::from_usize(n);
    let mut acc = Kahan::new();
    for j in 1..=p {
        acc.add(rho[j] * rho[j] / F::from_usize(n - j));
    }
    nf * (nf + F::from_f64(2.0)) * acc.total()
}

pub(crate) fn h96_from_rho<F: Scalar>(rho: &[F], n: usize, kernel: KernelSpec, p: usize) -> F {
    let jeff = kernel.max_effective_lag(p, n - 1);
    let nf = F::from_usize(n);
    let pf = F::from_usize(p);
    let mut acc = Kahan::new();
    for j in 1..=jeff {
        let k = kernel.weight(F::from_usize(j) / pf);
        acc.add(k * k * rho[j] * rho[j]);
    }
    nf * acc.total()
}

pub(crate) fn spectral_from_rho<F: Scalar>(
    rho: &[F],
    n: usize,
    kernel: KernelSpec,
    p: usize,
    omega: F,
) -> F {
    let jeff = kernel.max_effective_lag(p, n - 1);
    let pf = F::from_usize(p);
    let mut acc = Kahan::new();
    for j in 1..=jeff {
        let k = kernel.weight(F::from_usize(j) / pf);
        acc.add(k * rho[j] * (F::from_usize(j) * omega).cos());
    }
    (F::one() + F::from_f64(2.0) * acc.total()) / (F::from_f64(2.0) * F::PI())
}

/// Number of equispaced quadrature nodes over [-pi, pi] used by T2n/T3n.
pub(crate) const SPECTRAL_QUAD_POINTS: usize = 1025;

fn trapezoid<F: Scalar>(values: &[F], h: F) -> F {
    let mut acc = Kahan::new();
    for &v in values {
        acc.add(v);
    }
    let ends = (values[0] + values[values.len() - 1]) * F::from_f64(0.5);
    h * (acc.total() - ends)
}

fn spectral_grid<F: Scalar>(rho: &[F], n: usize, kernel: KernelSpec, p: usize) -> (Vec<F>, F) {
    let m = SPECTRAL_QUAD_POINTS;
    let h = F::from_f64(2.0) * F::PI() / F::from_usize(m - 1);
    let grid = (0..m)
        .map(|i| {
            let omega = -F::PI() + F::from_usize(i) * h;
            spectral_from_rho(rho, n, kernel, p, omega)
        })
        .collect();
    (grid, h)
}

pub(crate) fn t2n_from_rho<F: Scalar>(rho: &[F], n: usize, kernel: KernelSpec, p: usize) -> F {
    let (grid, h) = spectral_grid(rho, n, kernel, p);
    let f0 = (F::from_f64(2.0) * F::PI()).recip();
    let root0 = f0.sqrt();
    let integrand: Vec<F> = grid
        .iter()
        .map(|&f| {
            let root = if f > F::zero() { f.sqrt() } else { F::zero() };
            let d = root - root0;
            d * d
        })
        .collect();
    trapezoid(&integrand, h).max(F::zero()).sqrt()
}

pub(crate) fn t3n_from_rho<F: Scalar>(rho: &[F], n: usize, kernel: KernelSpec, p: usize) -> F {
    let (grid, h) = spectral_grid(rho, n, kernel, p);
    let f0 = (F::from_f64(2.0) * F::PI()).recip();
    let integrand: Vec<F> = grid
        .iter()
        .map(|&f| if f > F::zero() { (f / f0).ln() * f0 } else { F::zero() })
        .collect();
    -trapezoid(&integrand, h)
}

pub(crate) fn weighted_sum_from_lags<F: Scalar>(
    values: &[F],
    n: usize,
    kernel: KernelSpec,
    p: usize,
    square: bool,
) -> F {
    let jeff = kernel.max_effective_lag(p, n - 1);
    let pf = F::from_usize(p);
    let mut acc = Kahan::new();
    for j in 1..=jeff {
        let k = kernel.weight(F::from_usize(j) / pf);
        let v = if square { values[j] * values[j] } else { values[j] };
        acc.add(F::from_usize(n - j) * k * k * v);
    }
    acc.total()
}

pub(crate) fn st_from_d2<F: Scalar>(d2: &[F], p: usize) -> F {
    let mut acc = Kahan::new();
    for j in 1..=p {
        acc.add(d2[j]);
    }
    acc.total()
}

/// Evaluate a univariate statistic from a precomputed profile.
pub fn stat_from_profile<F: Scalar>(
    name: StatName,
    prof: &SerialProfile<F>,
    kernel: KernelSpec,
    p: usize,
) -> Result<F> {
    let n = prof.n;
    check_bandwidth(p, n)?;
    let jeff = kernel.max_effective_lag(p, n - 1);
    match name {
        StatName::Bp => Ok(bp_from_rho(prof.part(&prof.rho, p, "rho")?, n, p)),
        StatName::Lb => Ok(lb_from_rho(prof.part(&prof.rho, p, "rho")?, n, p)),
        StatName::H96 => Ok(h96_from_rho(prof.part(&prof.rho, jeff, "rho")?, n, kernel, p)),
        StatName::T2n => Ok(t2n_from_rho(prof.part(&prof.rho, jeff, "rho")?, n, kernel, p)),
        StatName::T3n => Ok(t3n_from_rho(prof.part(&prof.rho, jeff, "rho")?, n, kernel, p)),
        StatName::H98 => Ok(weighted_sum_from_lags(
            prof.part(&prof.d2, jeff, "d2")?,
            n,
            kernel,
            p,
            true,
        )),
        StatName::H99 => Ok(weighted_sum_from_lags(
            prof.part(&prof.gsig2, jeff, "gsig2")?,
            n,
            kernel,
            p,
            false,
        )),
        StatName::St => {
            if p >= n - 1 {
                return Err(Error::BandwidthOutOfRange { p, n });
            }
            Ok(st_from_d2(prof.part(&prof.d2, p, "d2")?, p))
        }
        StatName::Fp => Ok(weighted_sum_from_lags(
            prof.part(&prof.adcv, jeff, "adcv")?,
            n,
            kernel,
            p,
            false,
        )),
        other => Err(Error::invalid(
            "statistic",
            format!("{other} is not a univariate profile statistic"),
        )),
    }
}

fn rho_profile<F: Scalar>(x: &Series<F>, through: usize) -> Result<SerialProfile<F>> {
    SerialProfile::compute(x, through, ProfileRequest { rho: true, ..Default::default() })
}

/// Box-Pierce statistic n * sum_{j<=p} rho(j)^2.
pub fn stat_bp<F: Scalar>(x: &Series<F>, p: usize) -> Result<F> {
    check_bandwidth(p, x.len())?;
    Ok(bp_from_rho(rho_profile(x, p)?.rho.as_ref().unwrap(), x.len(), p))
}

/// Ljung-Box statistic n(n+2) * sum_{j<=p} rho(j)^2 / (n-j).
pub fn stat_lb<F: Scalar>(x: &Series<F>, p: usize) -> Result<F> {
    check_bandwidth(p, x.len())?;
    Ok(lb_from_rho(rho_profile(x, p)?.rho.as_ref().unwrap(), x.len(), p))
}

/// Multivariate Ljung-Box: n^2 sum_{j<=p} trace{G(j)' G(0)^-1 G(j) G(0)^-1} / (n-j).
pub fn stat_mlb<F: Scalar>(x: &MultiSeries<F>, p: usize) -> Result<F> {
    let n = x.n();
    check_bandwidth(p, n)?;
    let g0 = autocov_matrix(x, 0)?;
    let g0inv = g0.inverse("lag zero autocovariance")?;
    let nf = F::from_usize(n);
    let mut acc = Kahan::new();
    for j in 1..=p {
        let gj = autocov_matrix(x, j as isize)?;
        let inner = gj.transpose().matmul(&g0inv).matmul(&gj).matmul(&g0inv);
        acc.add(inner.trace() / F::from_usize(n - j));
    }
    Ok(nf * nf * acc.total())
}

/// Hong's kernel-weighted correlation statistic n * sum k^2(j/p) rho(j)^2.
pub fn stat_h96<F: Scalar>(x: &Series<F>, kernel: KernelSpec, p: usize) -> Result<F> {
    let n = x.len();
    check_bandwidth(p, n)?;
    let jeff = kernel.max_effective_lag(p, n - 1);
    Ok(h96_from_rho(rho_profile(x, jeff)?.rho.as_ref().unwrap(), n, kernel, p))
}

/// Kernel spectral density estimate at frequency omega in [-pi, pi].
pub fn spectral_estimate<F: Scalar>(
    x: &Series<F>,
    omega: F,
    kernel: KernelSpec,
    p: usize,
) -> Result<F> {
    let n = x.len();
    check_bandwidth(p, n)?;
    if omega.abs() > F::PI() {
        return Err(Error::invalid("omega", "must lie in [-pi, pi]"));
    }
    let jeff = kernel.max_effective_lag(p, n - 1);
    let prof = rho_profile(x, jeff)?;
    Ok(spectral_from_rho(prof.rho.as_ref().unwrap(), n, kernel, p, omega))
}

/// Hellinger-type spectral distance between the kernel estimate and the
/// flat white noise density.
pub fn stat_t2n<F: Scalar>(x: &Series<F>, kernel: KernelSpec, p: usize) -> Result<F> {
    let n = x.len();
    check_bandwidth(p, n)?;
    let jeff = kernel.max_effective_lag(p, n - 1);
    Ok(t2n_from_rho(rho_profile(x, jeff)?.rho.as_ref().unwrap(), n, kernel, p))
}

/// Kullback-Leibler type spectral distance against white noise.
pub fn stat_t3n<F: Scalar>(x: &Series<F>, kernel: KernelSpec, p: usize) -> Result<F> {
    let n = x.len();
    check_bandwidth(p, n)?;
    let jeff = kernel.max_effective_lag(p, n - 1);
    Ok(t3n_from_rho(rho_profile(x, jeff)?.rho.as_ref().unwrap(), n, kernel, p))
}

fn d2_profile<F: Scalar>(x: &Series<F>, through: usize) -> Result<SerialProfile<F>> {
    SerialProfile::compute(x, through, ProfileRequest { d2: true, ..Default::default() })
}

/// Skaug-Tjostheim statistic: sum of D2(j) over the first p lags.
pub fn stat_st<F: Scalar>(x: &Series<F>, p: usize) -> Result<F> {
    let n = x.len();
    if p == 0 || p >= n - 1 {
        return Err(Error::BandwidthOutOfRange { p, n });
    }
    Ok(st_from_d2(d2_profile(x, p)?.d2.as_ref().unwrap(), p))
}

/// Hong's EDF statistic sum (n-j) k^2(j/p) D2(j)^2.
pub fn stat_h98<F: Scalar>(x: &Series<F>, kernel: KernelSpec, p: usize) -> Result<F> {
    let n = x.len();
    check_bandwidth(p, n)?;
    let jeff = kernel.max_effective_lag(p, n - 1);
    let prof = d2_profile(x, jeff)?;
    Ok(weighted_sum_from_lags(prof.d2.as_ref().unwrap(), n, kernel, p, true))
}

/// Hong's generalized covariance statistic sum (n-j) k^2(j/p) gsig2(j).
pub fn stat_h99<F: Scalar>(x: &Series<F>, kernel: KernelSpec, p: usize) -> Result<F> {
    let n = x.len();
    check_bandwidth(p, n)?;
    let jeff = kernel.max_effective_lag(p, n - 1);
    let prof = SerialProfile::compute(x, jeff, ProfileRequest { gsig2: true, ..Default::default() })?;
    Ok(weighted_sum_from_lags(prof.gsig2.as_ref().unwrap(), x.len(), kernel, p, false))
}

/// Distance covariance portmanteau statistic sum (n-j) k^2(j/p) adcv(j).
pub fn stat_fp<F: Scalar>(x: &Series<F>, kernel: KernelSpec, p: usize) -> Result<F> {
    let n = x.len();
    check_bandwidth(p, n)?;
    let jeff = kernel.max_effective_lag(p, n - 1);
    let prof = SerialProfile::compute(x, jeff, ProfileRequest { adcv: true, ..Default::default() })?;
    Ok(weighted_sum_from_lags(prof.adcv.as_ref().unwrap(), n, kernel, p, false))
}

fn component_columns<F: Scalar>(x: &MultiSeries<F>) -> Vec<Vec<F>> {
    (0..x.dim()).map(|r| x.column(r)).collect()
}

/// Multivariate FP: sum_j (n-j) k^2(j/p) sum_{r,m} V2_rm(j), where V2_rm(j)
/// is the distance covariance between component r and lagged component m.
pub fn stat_fpm<F: Scalar>(x: &MultiSeries<F>, kernel: KernelSpec, p: usize) -> Result<F> {
    let n = x.n();
    check_bandwidth(p, n)?;
    let jeff = kernel.max_effective_lag(p, n - 1);
    let pf = F::from_usize(p);
    let mut acc = Kahan::new();
    for j in 1..=jeff {
        if n - j < 2 {
            continue;
        }
        let k = kernel.weight(F::from_usize(j) / pf);
        let vm = adcv_matrix(x, j as isize)?;
        let mut pair_sum = Kahan::new();
        for r in 0..x.dim() {
            for m in 0..x.dim() {
                pair_sum.add(vm[(r, m)]);
            }
        }
        acc.add(F::from_usize(n - j) * k * k * pair_sum.total());
    }
    Ok(acc.total())
}

fn d2_pair_lagged<F: Scalar>(cols: &[Vec<F>], r: usize, m: usize, j: usize, n: usize) -> F {
    d2_slices(&cols[r][..n - j], &cols[m][j..])
}

/// Multivariate ST: sum over ordered component pairs of the univariate ST
/// applied to (X_{t,r}, X_{t+j,m}).
pub fn stat_stm<F: Scalar>(x: &MultiSeries<F>, p: usize) -> Result<F> {
    let n = x.n();
    if p == 0 || p >= n - 1 {
        return Err(Error::BandwidthOutOfRange { p, n });
    }
    let cols = component_columns(x);
    let mut acc = Kahan::new();
    for j in 1..=p {
        for r in 0..x.dim() {
            for m in 0..x.dim() {
                acc.add(d2_pair_lagged(&cols, r, m, j, n));
            }
        }
    }
    Ok(acc.total())
}

/// Multivariate H98 with the squared cross-pair EDF distances.
pub fn stat_h98m<F: Scalar>(x: &MultiSeries<F>, kernel: KernelSpec, p: usize) -> Result<F> {
    let n = x.n();
    check_bandwidth(p, n)?;
    let jeff = kernel.max_effective_lag(p, n - 1);
    let pf = F::from_usize(p);
    let cols = component_columns(x);
    let mut acc = Kahan::new();
    for j in 1..=jeff {
        if n - j < 2 {
            continue;
        }
        let k = kernel.weight(F::from_usize(j) / pf);
        let mut pair_sum = Kahan::new();
        for r in 0..x.dim() {
            for m in 0..x.dim() {
                let d = d2_pair_lagged(&cols, r, m, j, n);
                pair_sum.add(d * d);
            }
        }
        acc.add(F::from_usize(n - j) * k * k * pair_sum.total());
    }
    Ok(acc.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::{dcov_v, MetricSpec};
    use crate::linalg::Mat;
    use crate::sample::Sample;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn x8() -> Series<f64> {
        Series::new(vec![0.25, -1.5, 0.75, 2.0, -0.5, 1.25, -2.25, 0.5]).unwrap()
    }

    fn m8() -> MultiSeries<f64> {
        MultiSeries::from_rows(
            &[
                [0.5, -0.25],
                [-1.0, 0.75],
                [1.5, 0.5],
                [0.25, -1.25],
                [-0.75, 1.0],
                [2.0, -0.5],
                [-1.5, 0.25],
                [0.75, 1.75],
            ]
            .iter()
            .map(|r| r.to_vec())
            .collect::<Vec<_>>(),
            None,
        )
        .unwrap()
    }

    fn rand_series(n: usize, seed: u64) -> Series<f64> {
        let mut rng = StdRng::seed_from_u64(seed);
        Series::new((0..n).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>()).unwrap()
    }

    #[test]
    fn bp_lb_reference_values() {
        let x = x8();
        assert!((stat_bp(&x, 3).unwrap() - 1.5837161989700166).abs() < 1e-13);
        assert!((stat_lb(&x, 3).unwrap() - 2.4360355806461835).abs() < 1e-13);
    }

    #[test]
    fn bp_lb_match_direct_acf_sums() {
        let x = rand_series(60, 71);
        let n = 60.0;
        let mut bp = 0.0;
        let mut lb = 0.0;
        for j in 1..=5 {
            let r = acf(&x, j).unwrap();
            bp += r * r;
            lb += r * r / (60 - j as usize) as f64;
        }
        assert!((stat_bp(&x, 5).unwrap() - n * bp).abs() < 1e-12);
        assert!((stat_lb(&x, 5).unwrap() - n * (n + 2.0) * lb).abs() < 1e-12);
    }

    #[test]
    fn bandwidth_validation() {
        let x = x8();
        assert!(matches!(stat_bp(&x, 0), Err(Error::BandwidthOutOfRange { .. })));
        assert!(matches!(stat_bp(&x, 8), Err(Error::BandwidthOutOfRange { .. })));
        assert!(stat_bp(&x, 7).is_ok());
        // ST needs the lag-p pair count to be at least 2.
        assert!(stat_st(&x, 6).is_ok());
        assert!(matches!(stat_st(&x, 7), Err(Error::BandwidthOutOfRange { .. })));
    }

    #[test]
    fn degenerate_series_split() {
        let c = Series::new(vec![2.0; 16]).unwrap();
        assert!(matches!(stat_bp(&c, 3), Err(Error::DegenerateSeries)));
        assert!(matches!(stat_lb(&c, 3), Err(Error::DegenerateSeries)));
        assert!(matches!(
            stat_h96(&c, KernelSpec::Bartlett, 3),
            Err(Error::DegenerateSeries)
        ));
        assert!(matches!(
            stat_t2n(&c, KernelSpec::Bartlett, 3),
            Err(Error::DegenerateSeries)
        ));
        // V- and EDF-type statistics are defined on constants and vanish.
        assert_eq!(stat_fp(&c, KernelSpec::Bartlett, 3).unwrap(), 0.0);
        assert_eq!(stat_h98(&c, KernelSpec::Bartlett, 3).unwrap(), 0.0);
        assert_eq!(stat_h99(&c, KernelSpec::Bartlett, 3).unwrap(), 0.0);
        assert_eq!(stat_st(&c, 3).unwrap(), 0.0);
    }

    #[test]
    fn mlb_reference_value_and_univariate_identity() {
        assert!((stat_mlb(&m8(), 3).unwrap() - 29.667419228436778).abs() < 1e-11);

        let x = rand_series(50, 72);
        let m = MultiSeries::from_rows(
            &x.values().iter().map(|&v| vec![v]).collect::<Vec<_>>(),
            None,
        )
        .unwrap();
        let mlb = stat_mlb(&m, 4).unwrap();
        let lb = stat_lb(&x, 4).unwrap();
        let expect = lb * 50.0 / 52.0;
        assert!((mlb - expect).abs() < 1e-10 * expect.abs().max(1.0));
    }

    #[test]
    fn mlb_singular_rejected() {
        let rows: Vec<Vec<f64>> = (0..10).map(|t| vec![t as f64, 1.0]).collect();
        let m = MultiSeries::from_rows(&rows, None).unwrap();
        assert!(matches!(stat_mlb(&m, 2), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn h96_reference_values_by_kernel() {
        let x = x8();
        assert!((stat_h96(&x, KernelSpec::Bartlett, 3).unwrap() - 0.5646197674334547).abs() < 1e-13);
        assert!((stat_h96(&x, KernelSpec::Daniell, 3).unwrap() - 0.9008481851914284).abs() < 1e-13);
        assert!((stat_h96(&x, KernelSpec::Parzen, 3).unwrap() - 0.3900436242056981).abs() < 1e-13);
    }

    #[test]
    fn h96_single_lag_formula() {
        // Bartlett with p = 2 keeps only lag 1 with weight 1/2.
        let x = rand_series(40, 73);
        let r1 = acf(&x, 1).unwrap();
        let expect = 40.0 * 0.25 * r1 * r1;
        assert!((stat_h96(&x, KernelSpec::Bartlett, 2).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn spectral_reference_values() {
        let x = x8();
        let f0 = spectral_estimate(&x, 0.0, KernelSpec::Bartlett, 3).unwrap();
        assert!((f0 - 0.08117970251667143).abs() < 1e-15);
        let f1 = spectral_estimate(&x, 1.0, KernelSpec::Bartlett, 3).unwrap();
        assert!((f1 - 0.11095168855457908).abs() < 1e-15);
        // Even in omega.
        let fm = spectral_estimate(&x, -1.0, KernelSpec::Bartlett, 3).unwrap();
        assert!((f1 - fm).abs() < 1e-15);
        assert!(spectral_estimate(&x, 3.5, KernelSpec::Bartlett, 3).is_err());
    }

    #[test]
    fn spectral_flat_for_bandwidth_one() {
        // p = 1 leaves no nonzero bartlett weight, so the estimate is the
        // white noise density everywhere and the distances vanish.
        let x = rand_series(100, 74);
        let f0 = 1.0 / (2.0 * std::f64::consts::PI);
        for omega in [0.0, 0.5, 3.0] {
            assert_eq!(spectral_estimate(&x, omega, KernelSpec::Bartlett, 1).unwrap(), f0);
        }
        assert_eq!(stat_t2n(&x, KernelSpec::Bartlett, 1).unwrap(), 0.0);
        assert_eq!(stat_t3n(&x, KernelSpec::Bartlett, 1).unwrap(), 0.0);
        assert_eq!(stat_h96(&x, KernelSpec::Bartlett, 1).unwrap(), 0.0);
    }

    #[test]
    fn spectral_iid_near_flat() {
        let x = rand_series(5000, 75);
        let f0 = 1.0 / (2.0 * std::f64::consts::PI);
        for omega in [0.0, 1.0, 2.0, std::f64::consts::PI] {
            let f = spectral_estimate(&x, omega, KernelSpec::Bartlett, 8).unwrap();
            assert!((f - f0).abs() < 0.03, "omega {omega}: {f} vs {f0}");
        }
    }

    #[test]
    fn t2n_t3n_reference_values() {
        let x = x8();
        assert!((stat_t2n(&x, KernelSpec::Bartlett, 3).unwrap() - 0.19152858760333255).abs() < 1e-13);
        assert!((stat_t3n(&x, KernelSpec::Bartlett, 3).unwrap() - 0.07577767036436912).abs() < 1e-13);
    }

    #[test]
    fn st_h98_reference_values() {
        let x = x8();
        assert!((stat_st(&x, 3).unwrap() - 0.01573459840243912).abs() < 1e-15);
        assert!((stat_h98(&x, KernelSpec::Bartlett, 3).unwrap() - 3.280759469841683e-05).abs() < 1e-17);
        // ST at p = 1 is exactly D2(1).
        let d1 = crate::edf::dist_d2(&x, 1).unwrap();
        assert_eq!(stat_st(&x, 1).unwrap(), d1);
    }

    #[test]
    fn gsig2_reference_value_and_symmetry() {
        let x = x8();
        let g1 = gaussian_weighted_sigma2(&x, 1).unwrap();
        assert!((g1 - 0.0694061635848996).abs() < 1e-15);
        let gm = gaussian_weighted_sigma2(&x, -1).unwrap();
        assert!((g1 - gm).abs() < 1e-15);
        assert!(matches!(
            gaussian_weighted_sigma2(&x, 7),
            Err(Error::LagOutOfRange { .. })
        ));
        let c = Series::new(vec![0.5; 10]).unwrap();
        assert_eq!(gaussian_weighted_sigma2(&c, 2).unwrap(), 0.0);
    }

    #[test]
    fn gsig2_profile_table_matches_streaming_exactly() {
        let x = rand_series(60, 41);
        let prof = SerialProfile::compute(
            &x,
            25,
            ProfileRequest { gsig2: true, ..Default::default() },
        )
        .unwrap();
        let got = prof.gsig2.as_ref().unwrap();
        for j in 1..=25usize {
            assert_eq!(got[j], gaussian_weighted_sigma2(&x, j as isize).unwrap());
        }
    }

    #[test]
    fn gsig2_equals_gaussian_metric_dcov() {
        let x = rand_series(40, 76);
        let v = x.values();
        for j in [1usize, 3] {
            let u = &v[..v.len() - j];
            let w = &v[j..];
            let sx = Sample::from_univariate(u).unwrap();
            let sy = Sample::from_univariate(w).unwrap();
            let metric = MetricSpec::GaussianInduced { sigma: 1.0 };
            let direct = dcov_v(&sx, &sy, &metric).unwrap().v2;
            let fast = gaussian_weighted_sigma2(&x, j as isize).unwrap();
            assert!((direct - fast).abs() < 1e-12, "lag {j}: {direct} vs {fast}");
        }
    }

    #[test]
    fn gsig2_matches_characteristic_function_quadrature() {
        // Direct 2-D quadrature of the weighted squared distance between the
        // joint and product empirical characteristic functions.
        let mut rng = StdRng::seed_from_u64(77);
        let n = 20usize;
        let x: Vec<f64> = {
            let mut prev = 0.0;
            (0..n)
                .map(|_| {
                    prev = 0.7 * prev + rng.gen_range(-1.0..1.0);
                    prev
                })
                .collect()
        };
        let series = Series::new(x.clone()).unwrap();
        let j = 2usize;
        let u = &x[..n - j];
        let v = &x[j..];
        let m = u.len();

        let grid = 200usize;
        let (lo, hi) = (-8.0f64, 8.0f64);
        let h = (hi - lo) / (grid - 1) as f64;
        let nodes: Vec<f64> = (0..grid).map(|i| lo + i as f64 * h).collect();
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();

        // Marginal empirical characteristic functions on the grid.
        let cf = |data: &[f64], s: f64| -> (f64, f64) {
            let mut re = 0.0;
            let mut im = 0.0;
            for &z in data {
                re += (s * z).cos();
                im += (s * z).sin();
            }
            (re / data.len() as f64, im / data.len() as f64)
        };
        let cf_u: Vec<(f64, f64)> = nodes.iter().map(|&s| cf(u, s)).collect();
        let cf_v: Vec<(f64, f64)> = nodes.iter().map(|&t| cf(v, t)).collect();

        let mut integral = 0.0;
        for (a, &s) in nodes.iter().enumerate() {
            let wa = if a == 0 || a == grid - 1 { 0.5 } else { 1.0 };
            for (b, &t) in nodes.iter().enumerate() {
                let wb = if b == 0 || b == grid - 1 { 0.5 } else { 1.0 };
                let mut jre = 0.0;
                let mut jim = 0.0;
                for k in 0..m {
                    let arg = s * u[k] + t * v[k];
                    jre += arg.cos();
                    jim += arg.sin();
                }
                jre /= m as f64;
                jim /= m as f64;
                let pre = cf_u[a].0 * cf_v[b].0 - cf_u[a].1 * cf_v[b].1;
                let pim = cf_u[a].0 * cf_v[b].1 + cf_u[a].1 * cf_v[b].0;
                let dre = jre - pre;
                let dim = jim - pim;
                integral += wa * wb * (dre * dre + dim * dim) * phi(s) * phi(t);
            }
        }
        integral *= h * h;

        let closed = gaussian_weighted_sigma2(&series, j as isize).unwrap();
        assert!(
            (closed - integral).abs() < 1e-4 * closed.max(1e-12),
            "closed {closed} vs quadrature {integral}"
        );
    }

    #[test]
    fn h99_fp_reference_values() {
        let x = x8();
        assert!((stat_h99(&x, KernelSpec::Bartlett, 3).unwrap() - 0.25535657154988817).abs() < 1e-13);
        assert!((stat_fp(&x, KernelSpec::Bartlett, 3).unwrap() - 1.6955591098873413).abs() < 1e-13);
    }

    #[test]
    fn fp_shift_invariant() {
        // The shift rounds each stored value, so only near-exact agreement
        // survives; an exact check needs dyadic data.
        let x = rand_series(30, 78);
        let shifted = Series::new(x.values().iter().map(|v| v + 2.5).collect::<Vec<_>>()).unwrap();
        let a = stat_fp(&x, KernelSpec::Parzen, 4).unwrap();
        let b = stat_fp(&shifted, KernelSpec::Parzen, 4).unwrap();
        assert!((a - b).abs() < 1e-12 * a.max(1.0));

        let dyadic = Series::new(vec![0.25, -1.5, 0.75, 2.0, -0.5, 1.25, -2.25, 0.5]).unwrap();
        let dshift =
            Series::new(dyadic.values().iter().map(|v| v + 2.5).collect::<Vec<_>>()).unwrap();
        assert_eq!(
            stat_fp(&dyadic, KernelSpec::Parzen, 4).unwrap(),
            stat_fp(&dshift, KernelSpec::Parzen, 4).unwrap()
        );
    }

    #[test]
    fn fp_matches_direct_adcv_sum() {
        let x = rand_series(35, 79);
        let p = 5usize;
        let mut expect = 0.0;
        for j in 1..p {
            let k = 1.0 - j as f64 / p as f64;
            expect += (35 - j) as f64 * k * k * crate::timeseries::adcv(&x, j as isize).unwrap();
        }
        let got = stat_fp(&x, KernelSpec::Bartlett, p).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn multivariate_reference_values() {
        let m = m8();
        assert!((stat_fpm(&m, KernelSpec::Bartlett, 3).unwrap() - 5.140165898811024).abs() < 1e-12);
        assert!((stat_stm(&m, 3).unwrap() - 0.09586546157893745).abs() < 1e-14);
        assert!((stat_h98m(&m, KernelSpec::Bartlett, 3).unwrap() - 0.001242825378871977).abs() < 1e-15);
    }

    #[test]
    fn multivariate_reduce_to_univariate() {
        let x = rand_series(40, 80);
        let m = MultiSeries::from_rows(
            &x.values().iter().map(|&v| vec![v]).collect::<Vec<_>>(),
            None,
        )
        .unwrap();
        let fp = stat_fp(&x, KernelSpec::Bartlett, 5).unwrap();
        let fpm = stat_fpm(&m, KernelSpec::Bartlett, 5).unwrap();
        assert!((fp - fpm).abs() < 1e-12);
        let st = stat_st(&x, 4).unwrap();
        let stm = stat_stm(&m, 4).unwrap();
        assert!((st - stm).abs() < 1e-14);
        let h98 = stat_h98(&x, KernelSpec::Parzen, 5).unwrap();
        let h98m = stat_h98m(&m, KernelSpec::Parzen, 5).unwrap();
        assert!((h98 - h98m).abs() < 1e-15);
    }

    #[test]
    fn fpm_trace_identity() {
        // Summing the cross-pair values equals trace(W'W) for the matrix of
        // their square roots.
        let mut rng = StdRng::seed_from_u64(81);
        let rows: Vec<Vec<f64>> = (0..25)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let m = MultiSeries::from_rows(&rows, None).unwrap();
        let p = 4usize;
        let n = 25usize;
        let mut expect = 0.0;
        for j in 1..p {
            let k = 1.0 - j as f64 / p as f64;
            let vm = adcv_matrix(&m, j as isize).unwrap();
            let mut w = Mat::zeros(2, 2);
            for r in 0..2 {
                for c in 0..2 {
                    w[(r, c)] = vm[(r, c)].sqrt();
                }
            }
            let traced = w.transpose().matmul(&w).trace();
            expect += (n - j) as f64 * k * k * traced;
        }
        let got = stat_fpm(&m, KernelSpec::Bartlett, p).unwrap();
        assert!((got - expect).abs() < 1e-10);
    }

    #[test]
    fn nonnegativity_across_statistics() {
        let x = rand_series(45, 82);
        assert!(stat_bp(&x, 5).unwrap() >= 0.0);
        assert!(stat_lb(&x, 5).unwrap() >= 0.0);
        assert!(stat_h96(&x, KernelSpec::Daniell, 5).unwrap() >= 0.0);
        assert!(stat_t2n(&x, KernelSpec::Daniell, 5).unwrap() >= 0.0);
        assert!(stat_t3n(&x, KernelSpec::Daniell, 5).unwrap() >= 0.0);
        assert!(stat_st(&x, 5).unwrap() >= 0.0);
        assert!(stat_h98(&x, KernelSpec::Daniell, 5).unwrap() >= 0.0);
        assert!(stat_h99(&x, KernelSpec::Daniell, 5).unwrap() >= 0.0);
        assert!(stat_fp(&x, KernelSpec::Daniell, 5).unwrap() >= 0.0);
    }

    #[test]
    fn profile_dispatch_matches_direct() {
        let x = rand_series(50, 83);
        let kernel = KernelSpec::Parzen;
        let p = 6usize;
        let prof = SerialProfile::compute(&x, 49, ProfileRequest::all()).unwrap();
        let cases: [(StatName, f64); 9] = [
            (StatName::Bp, stat_bp(&x, p).unwrap()),
            (StatName::Lb, stat_lb(&x, p).unwrap()),
            (StatName::H96, stat_h96(&x, kernel, p).unwrap()),
            (StatName::T2n, stat_t2n(&x, kernel, p).unwrap()),
            (StatName::T3n, stat_t3n(&x, kernel, p).unwrap()),
            (StatName::H98, stat_h98(&x, kernel, p).unwrap()),
            (StatName::H99, stat_h99(&x, kernel, p).unwrap()),
            (StatName::St, stat_st(&x, p).unwrap()),
            (StatName::Fp, stat_fp(&x, kernel, p).unwrap()),
        ];
        for (name, direct) in cases {
            let via = stat_from_profile(name, &prof, kernel, p).unwrap();
            assert_eq!(via, direct, "{name}");
        }
        assert!(stat_from_profile(StatName::Mlb, &prof, kernel, p).is_err());
    }

    #[test]
    fn profile_insufficient_depth_rejected() {
        let x = rand_series(50, 84);
        let prof = SerialProfile::compute(&x, 3, ProfileRequest { rho: true, ..Default::default() })
            .unwrap();
        assert!(stat_from_profile(StatName::Bp, &prof, KernelSpec::Bartlett, 3).is_ok());
        assert!(stat_from_profile(StatName::Bp, &prof, KernelSpec::Bartlett, 5).is_err());
        assert!(stat_from_profile(StatName::Fp, &prof, KernelSpec::Bartlett, 3).is_err());
    }

    #[test]
    fn stat_name_parsing() {
        assert_eq!("lb".parse::<StatName>().unwrap(), StatName::Lb);
        assert_eq!("mLB".parse::<StatName>().unwrap(), StatName::Mlb);
        assert_eq!("FPm".parse::<StatName>().unwrap(), StatName::FpM);
        assert_eq!("h98m".parse::<StatName>().unwrap(), StatName::H98M);
        assert!("xyz".parse::<StatName>().is_err());
        assert_eq!(StatName::T2n.to_string(), "T2n");
        assert!(StatName::H96.uses_kernel());
        assert!(!StatName::St.uses_kernel());
    }
}
