//! Calibration by resampling: permutation tests for independent pairs,
//! ordinary bootstrap under the i.i.d. null, wild bootstrap simultaneous
//! ADCF bands, and block subsampling pairwise bands.
//!
//! Determinism contract: every replicate draws from its own ChaCha stream
//! keyed by (seed, replicate index), and aggregation preserves replicate
//! order, so results are bit-identical regardless of worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::distance::{dcov_v, double_center, MetricSpec};
use crate::error::{Error, Result};
use crate::fastdcov::dcov_fast_slices;
use crate::kernels::KernelSpec;
use crate::linalg::Mat;
use crate::portmanteau::{StatName, TestStatistic};
use crate::sample::{MultiSeries, Sample, Series};
use crate::scalar::Scalar;
use crate::timeseries::{adcf, adcv};

/// How replicates are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResampleMethod {
    Permutation,
    IidBootstrap,
    WildBootstrap,
    Subsampling,
}

/// Multiplier law for the wild bootstrap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Multiplier {
    #[default]
    Normal,
    Rademacher,
}

/// Full description of a calibration run.
#[derive(Clone, Copy, Debug)]
pub struct ResamplingPlan {
    pub method: ResampleMethod,
    pub b: usize,
    pub seed: u64,
    /// Block length; only meaningful for subsampling.
    pub block: Option<usize>,
    pub multiplier: Multiplier,
}

impl ResamplingPlan {
    pub fn new(method: ResampleMethod, b: usize, seed: u64) -> Self {
        ResamplingPlan { method, b, seed, block: None, multiplier: Multiplier::Normal }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b < 1 {
            return Err(Error::invalid("B", "needs at least one replicate"));
        }
        if self.method == ResampleMethod::Subsampling {
            match self.block {
                Some(b) if b >= 2 => {}
                Some(_) => return Err(Error::invalid("block", "must be at least 2")),
                None => return Err(Error::invalid("block", "required for subsampling")),
            }
        }
        Ok(())
    }
}

/// Outcome of a calibrated test.
#[derive(Clone, Copy, Debug)]
pub struct TestResult<F> {
    pub statistic: TestStatistic<F>,
    /// Always in (0, 1] under the (1 + exceed)/(B + 1) convention.
    pub p_value: F,
    pub b_used: usize,
    /// Replicate quantile at the requested level, when one was requested.
    pub critical_value: Option<F>,
    pub seed: u64,
}

impl<F: Scalar> TestResult<F> {
    pub fn reject(&self, alpha: F) -> bool {
        self.p_value <= alpha
    }
}

pub(crate) fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

pub(crate) fn pvalue_from_replicates<F: Scalar>(observed: F, replicates: &[F]) -> F {
    let exceed = replicates.iter().filter(|&&r| r >= observed).count();
    F::from_usize(1 + exceed) / F::from_usize(replicates.len() + 1)
}

fn check_level<F: Scalar>(level: F) -> Result<()> {
    if level <= F::zero() || level >= F::one() {
        return Err(Error::invalid("level", "must lie strictly inside (0, 1)"));
    }
    Ok(())
}

/// Smallest-index order statistic at or above the level: index ceil(level*m),
/// 1-based, on the ascending sorted values.
pub(crate) fn quantile_type1<F: Scalar>(sorted: &[F], level: F) -> F {
    let m = sorted.len();
    debug_assert!(m >= 1);
    let raw = (level * F::from_usize(m)).ceil().to_f64() as usize;
    sorted[raw.clamp(1, m) - 1]
}

fn sorted_copy<F: Scalar>(values: &[F]) -> Vec<F> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn critical_from<F: Scalar>(replicates: &[F], alpha: Option<F>) -> Result<Option<F>> {
    match alpha {
        None => Ok(None),
        Some(a) => {
            check_level(a)?;
            let sorted = sorted_copy(replicates);
            Ok(Some(quantile_type1(&sorted, F::one() - a)))
        }
    }
}

/// The n * V2 permutation statistic; univariate pairs take the fast path.
pub(crate) fn scaled_dcov_stat<F: Scalar>(x: &Sample<F>, y: &Sample<F>) -> Result<F> {
    let v2 = if x.dim() == 1 && y.dim() == 1 {
        dcov_fast_slices(x.data(), y.data())?
    } else {
        dcov_v(x, y, &MetricSpec::Euclidean)?.v2
    };
    Ok(F::from_usize(x.n()) * v2)
}

fn permuted_rows<F: Scalar>(y: &Sample<F>, rng: &mut ChaCha8Rng) -> Sample<F> {
    let n = y.n();
    let dim = y.dim();
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let k = rng.gen_range(0..=i);
        idx.swap(i, k);
    }
    let mut data = Vec::with_capacity(n * dim);
    for &i in &idx {
        data.extend_from_slice(y.row(i));
    }
    Sample::from_flat(n, dim, data).expect("permuted rows stay valid")
}

/// Permutation test of pairwise independence with a caller-supplied
/// statistic; replicates permute the row order of `y`.
pub fn permutation_pvalue_with<F, S>(
    x: &Sample<F>,
    y: &Sample<F>,
    stat_fn: &S,
    name: StatName,
    b: usize,
    seed: u64,
    alpha: Option<F>,
) -> Result<TestResult<F>>
where
    F: Scalar,
    S: Fn(&Sample<F>, &Sample<F>) -> Result<F> + Sync,
{
    if x.n() != y.n() {
        return Err(Error::LengthMismatch { left: x.n(), right: y.n() });
    }
    if b < 1 {
        return Err(Error::invalid("B", "needs at least one replicate"));
    }
    let observed = stat_fn(x, y)?;
    let replicates: Vec<F> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(seed, rep);
            let y_perm = permuted_rows(y, &mut rng);
            stat_fn(x, &y_perm)
        })
        .collect::<Result<_>>()?;
    Ok(TestResult {
        statistic: TestStatistic { name, value: observed, p: 0, kernel: None },
        p_value: pvalue_from_replicates(observed, &replicates),
        b_used: b,
        critical_value: critical_from(&replicates, alpha)?,
        seed,
    })
}

/// Permutation test with the n * V2 distance covariance statistic.
pub fn permutation_pvalue<F: Scalar>(
    x: &Sample<F>,
    y: &Sample<F>,
    b: usize,
    seed: u64,
) -> Result<TestResult<F>> {
    permutation_pvalue_with(x, y, &scaled_dcov_stat, StatName::Dcov, b, seed, None)
}

fn resample_values<F: Scalar>(values: &[F], rng: &mut ChaCha8Rng) -> Vec<F> {
    let n = values.len();
    (0..n).map(|_| values[rng.gen_range(0..n)]).collect()
}

/// Ordinary bootstrap p-value for a serial statistic: replicates redraw the
/// observations with replacement, which is valid under the i.i.d. null.
pub fn iid_bootstrap_pvalue<F, S>(
    stat_fn: &S,
    x: &Series<F>,
    name: StatName,
    p: usize,
    kernel: Option<KernelSpec>,
    plan: &ResamplingPlan,
    alpha: Option<F>,
) -> Result<TestResult<F>>
where
    F: Scalar,
    S: Fn(&Series<F>) -> Result<F> + Sync,
{
    if plan.method != ResampleMethod::IidBootstrap {
        return Err(Error::invalid("plan", "method must be iid-bootstrap"));
    }
    plan.validate()?;
    let observed = stat_fn(x)?;
    let replicates: Vec<F> = (0..plan.b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(plan.seed, rep);
            let resampled = Series::new(resample_values(x.values(), &mut rng))
                .expect("resampled values stay valid");
            stat_fn(&resampled)
        })
        .collect::<Result<_>>()?;
    Ok(TestResult {
        statistic: TestStatistic { name, value: observed, p, kernel },
        p_value: pvalue_from_replicates(observed, &replicates),
        b_used: plan.b,
        critical_value: critical_from(&replicates, alpha)?,
        seed: plan.seed,
    })
}

/// Row-resampling bootstrap for multivariate serial statistics.
pub fn iid_bootstrap_pvalue_multi<F, S>(
    stat_fn: &S,
    x: &MultiSeries<F>,
    name: StatName,
    p: usize,
    kernel: Option<KernelSpec>,
    plan: &ResamplingPlan,
    alpha: Option<F>,
) -> Result<TestResult<F>>
where
    F: Scalar,
    S: Fn(&MultiSeries<F>) -> Result<F> + Sync,
{
    if plan.method != ResampleMethod::IidBootstrap {
        return Err(Error::invalid("plan", "method must be iid-bootstrap"));
    }
    plan.validate()?;
    let observed = stat_fn(x)?;
    let (n, dim) = (x.n(), x.dim());
    let replicates: Vec<F> = (0..plan.b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(plan.seed, rep);
            let mut data = Vec::with_capacity(n * dim);
            for _ in 0..n {
                data.extend_from_slice(x.row(rng.gen_range(0..n)));
            }
            let resampled =
                MultiSeries::from_flat(n, dim, data, None).expect("resampled rows stay valid");
            stat_fn(&resampled)
        })
        .collect::<Result<_>>()?;
    Ok(TestResult {
        statistic: TestStatistic { name, value: observed, p, kernel },
        p_value: pvalue_from_replicates(observed, &replicates),
        b_used: plan.b,
        critical_value: critical_from(&replicates, alpha)?,
        seed: plan.seed,
    })
}

/// Simultaneous wild bootstrap band for the ADCF over a set of lags.
#[derive(Clone, Debug)]
pub struct WildBand<F> {
    pub lags: Vec<usize>,
    pub adcf: Vec<F>,
    /// One simultaneous critical value on the ADCF scale.
    pub band: F,
    pub b_used: usize,
    pub seed: u64,
}

fn centered_product_matrix<F: Scalar>(u: &[F], v: &[F]) -> Mat<F> {
    let n = u.len();
    let mut a = Mat::zeros(n, n);
    for t in 0..n {
        for s in 0..n {
            a[(t, s)] = (u[t] - u[s]).abs();
        }
    }
    let mut ac = double_center(&a);
    for t in 0..n {
        for s in 0..n {
            a[(t, s)] = (v[t] - v[s]).abs();
        }
    }
    let bc = double_center(&a);
    for t in 0..n {
        for s in 0..n {
            ac[(t, s)] = ac[(t, s)] * bc[(t, s)];
        }
    }
    ac
}

fn draw_multipliers<F: Scalar>(rng: &mut ChaCha8Rng, n: usize, law: Multiplier) -> Vec<F> {
    (0..n)
        .map(|_| match law {
            Multiplier::Normal => F::from_f64(rng.sample(StandardNormal)),
            Multiplier::Rademacher => {
                if rng.gen::<bool>() {
                    F::one()
                } else {
                    -F::one()
                }
            }
        })
        .collect()
}

/// Wild bootstrap with an explicit multiplier law. One multiplier sequence
/// is drawn per replicate and shared across lags, which couples the lags
/// inside each replicate as a simultaneous band requires.
pub fn wild_bootstrap_band_with<F: Scalar>(
    x: &Series<F>,
    lags: &[usize],
    b: usize,
    seed: u64,
    level: F,
    multiplier: Multiplier,
) -> Result<WildBand<F>> {
    let n = x.len();
    if lags.is_empty() {
        return Err(Error::EmptyInput);
    }
    if b < 1 {
        return Err(Error::invalid("B", "needs at least one replicate"));
    }
    check_level(level)?;
    let max_lag = *lags.iter().max().unwrap();
    for &j in lags {
        if j < 1 || j + 1 >= n {
            return Err(Error::LagOutOfRange { lag: j, n });
        }
    }

    let v0 = adcv(x, 0)?;
    let adcf_obs: Vec<F> = lags.iter().map(|&j| adcf(x, j as isize)).collect::<Result<_>>()?;
    if v0 <= F::zero() {
        // Degenerate series: every replicate statistic is 0 as well.
        return Ok(WildBand { lags: lags.to_vec(), adcf: adcf_obs, band: F::zero(), b_used: b, seed });
    }

    let values = x.values();
    let mut rep_max = vec![F::zero(); b];
    let _ = max_lag;
    for &j in lags {
        let nj = n - j;
        let m = centered_product_matrix(&values[..nj], &values[j..]);
        let inv_n2 = F::recip_usize(nj) * F::recip_usize(nj);
        let lag_vals: Vec<F> = (0..b)
            .into_par_iter()
            .map(|rep| {
                // Re-deriving the stream per lag replays the same multiplier
                // sequence for this replicate at every lag.
                let mut rng = replicate_rng(seed, rep);
                let w: Vec<F> = draw_multipliers(&mut rng, n, multiplier);
                let mut total = F::zero();
                for t in 0..nj {
                    let row = m.row(t);
                    let mut inner = F::zero();
                    for s in 0..nj {
                        inner += w[s] * row[s];
                    }
                    total += w[t] * inner;
                }
                total * inv_n2
            })
            .collect();
        for (rep, v) in lag_vals.into_iter().enumerate() {
            let r = if v > F::zero() { (v / v0).sqrt() } else { F::zero() };
            if r > rep_max[rep] {
                rep_max[rep] = r;
            }
        }
    }
    rep_max.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let band = quantile_type1(&rep_max, level);
    Ok(WildBand { lags: lags.to_vec(), adcf: adcf_obs, band, b_used: b, seed })
}

/// Wild bootstrap simultaneous band with standard normal multipliers.
pub fn wild_bootstrap_band<F: Scalar>(
    x: &Series<F>,
    lags: &[usize],
    b: usize,
    seed: u64,
    level: F,
) -> Result<WildBand<F>> {
    wild_bootstrap_band_with(x, lags, b, seed, level, Multiplier::Normal)
}

/// Subsampling critical value for the lag-j distance covariance, on the V2
/// scale: the level-quantile of the block statistics rescaled by b/(n-j).
pub fn subsample_quantile<F: Scalar>(
    x: &Series<F>,
    j: usize,
    block: usize,
    level: F,
) -> Result<F> {
    let n = x.len();
    if j < 1 || j + 2 > n {
        return Err(Error::LagOutOfRange { lag: j, n });
    }
    check_level(level)?;
    let pairs = n - j;
    if block < 2 || block > pairs {
        return Err(Error::invalid("block", "needs 2 <= block <= n - j"));
    }
    let values = x.values();
    let u = &values[..pairs];
    let v = &values[j..];
    let scale = F::from_usize(block) / F::from_usize(pairs);
    let mut stats = Vec::with_capacity(pairs - block + 1);
    for start in 0..=pairs - block {
        let v2 = dcov_fast_slices(&u[start..start + block], &v[start..start + block])?;
        stats.push(scale * v2);
    }
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(quantile_type1(&stats, level))
}

/// Pairwise subsampling band on the ADCF scale.
pub fn subsample_band<F: Scalar>(x: &Series<F>, j: usize, block: usize, level: F) -> Result<F> {
    let q = subsample_quantile(x, j, block, level)?;
    let v0 = adcv(x, 0)?;
    if v0 <= F::zero() {
        return Ok(F::zero());
    }
    let ratio = q / v0;
    Ok(if ratio > F::zero() { ratio.sqrt() } else { F::zero() })
}

/// Index of the band whose neighborhood is flattest: population standard
/// deviation over a centered window (clamped at the ends), first minimum.
pub(crate) fn min_volatility_select<F: Scalar>(bands: &[F], window: usize) -> usize {
    let m = bands.len();
    let half = window.max(1) / 2;
    let mut best = 0usize;
    let mut best_sd = F::infinity();
    for i in 0..m {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(m - 1);
        let count = F::from_usize(hi - lo + 1);
        let mut mean = F::zero();
        for k in lo..=hi {
            mean += bands[k];
        }
        mean = mean / count;
        let mut var = F::zero();
        for k in lo..=hi {
            let d = bands[k] - mean;
            var += d * d;
        }
        let sd = (var / count).sqrt();
        if sd < best_sd {
            best_sd = sd;
            best = i;
        }
    }
    best
}

/// Minimum volatility block selection: evaluates the subsampling band at
/// every candidate block length and returns the candidate whose band is
/// locally most stable. Window defaults to 3 when 0 is passed.
pub fn min_volatility_block<F: Scalar>(
    x: &Series<F>,
    j: usize,
    candidates: &[usize],
    window: usize,
    level: F,
) -> Result<usize> {
    if candidates.len() < 3 {
        return Err(Error::invalid("candidates", "needs at least 3 block lengths"));
    }
    let window = if window == 0 { 3 } else { window };
    let bands: Vec<F> = candidates
        .iter()
        .map(|&b| subsample_band(x, j, b, level))
        .collect::<Result<_>>()?;
    Ok(candidates[min_volatility_select(&bands, window)])
}
