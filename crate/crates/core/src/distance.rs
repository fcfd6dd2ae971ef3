//! Distance covariance and correlation for independent samples.
//!
//! Estimators come in two flavors: the biased V-statistic built from
//! double-centered distance matrices, and the unbiased U-statistic built from
//! U-centered ones. The V-statistic here is the naive quadratic reference;
//! the sub-quadratic univariate path lives in [`crate::fastdcov`] and is
//! validated against this implementation.

use crate::error::{Error, Result};
use crate::fastdcov;
use crate::linalg::Mat;
use crate::sample::{MultiSeries, Sample, Series};
use crate::scalar::{Kahan, Scalar};
use crate::special::inv_norm_cdf_scalar;

/// Distance, or kernel-induced semimetric, used for pairwise matrices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MetricSpec<F> {
    /// Euclidean distance.
    Euclidean,
    /// `|x - y|^alpha` with `alpha` strictly inside (0, 2).
    AlphaPower { alpha: F },
    /// `1 - exp(-|x - y|^2 / (2 sigma^2))`, the semimetric induced by a
    /// Gaussian kernel weight; `sigma > 0`.
    GaussianInduced { sigma: F },
    /// Semimetric induced by the kernel `k(x, y) = |x| + |y| - |x - y|`.
    /// Collapses to euclidean distance; kept for parity checks.
    HsicKernelInduced,
}

impl<F: Scalar> MetricSpec<F> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MetricSpec::AlphaPower { alpha } => {
                if !alpha.is_finite() || alpha <= F::zero() || alpha >= F::from_f64(2.0) {
                    return Err(Error::invalid("alpha", "must lie strictly inside (0, 2)"));
                }
            }
            MetricSpec::GaussianInduced { sigma } => {
                if !sigma.is_finite() || sigma <= F::zero() {
                    return Err(Error::invalid("sigma", "must be positive"));
                }
            }
            MetricSpec::Euclidean | MetricSpec::HsicKernelInduced => {}
        }
        Ok(())
    }

    fn distance(&self, xi: &[F], xj: &[F]) -> F {
        let e = euclidean(xi, xj);
        match *self {
            MetricSpec::Euclidean => e,
            MetricSpec::AlphaPower { alpha } => {
                // alpha = 1 must reproduce euclidean results exactly.
                if alpha == F::one() {
                    e
                } else {
                    e.powf(alpha)
                }
            }
            MetricSpec::GaussianInduced { sigma } => {
                let two = F::from_f64(2.0);
                F::one() - (-(e * e) / (two * sigma * sigma)).exp()
            }
            MetricSpec::HsicKernelInduced => {
                // d(x, y) = (k(x,x) + k(y,y))/2 - k(x,y) with
                // k(x, y) = |x| + |y| - |x - y|.
                let nx = norm(xi);
                let ny = norm(xj);
                let k_cross = nx + ny - e;
                (nx + nx + ny + ny) / F::from_f64(2.0) - k_cross
            }
        }
    }
}

fn euclidean<F: Scalar>(a: &[F], b: &[F]) -> F {
    let mut s = F::zero();
    for (x, y) in a.iter().zip(b) {
        let d = *x - *y;
        s += d * d;
    }
    s.sqrt()
}

fn norm<F: Scalar>(a: &[F]) -> F {
    let mut s = F::zero();
    for x in a {
        s += *x * *x;
    }
    s.sqrt()
}

/// Pairwise distance matrix under the given metric.
pub fn pairwise_distances<F: Scalar>(sample: &Sample<F>, metric: &MetricSpec<F>) -> Result<Mat<F>> {
    metric.validate()?;
    let n = sample.n();
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = metric.distance(sample.row(i), sample.row(j));
            m[(i, j)] = d;
            m[(j, i)] = d;
        }
    }
    Ok(m)
}

/// Double centering: subtract row and column means, add back the grand mean.
/// Every row and column of the result sums to zero.
pub fn double_center<F: Scalar>(raw: &Mat<F>) -> Mat<F> {
    let n = raw.n_rows();
    assert_eq!(n, raw.n_cols(), "centering needs a square matrix");
    let inv_n = F::from_usize(n).recip();
    let mut row_mean = vec![F::zero(); n];
    let mut col_mean = vec![F::zero(); n];
    for i in 0..n {
        for j in 0..n {
            row_mean[i] += raw[(i, j)];
            col_mean[j] += raw[(i, j)];
        }
    }
    let mut grand = F::zero();
    for m in row_mean.iter_mut() {
        *m *= inv_n;
        grand += *m;
    }
    grand *= inv_n;
    for m in col_mean.iter_mut() {
        *m *= inv_n;
    }
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = raw[(i, j)] - row_mean[i] - col_mean[j] + grand;
        }
    }
    out
}

/// U-centering with zero diagonal; defined only for n > 3.
pub fn u_center<F: Scalar>(raw: &Mat<F>) -> Result<Mat<F>> {
    let n = raw.n_rows();
    assert_eq!(n, raw.n_cols(), "centering needs a square matrix");
    if n <= 3 {
        return Err(Error::TooFewObservations { need: 4, got: n });
    }
    let nm2 = F::from_usize(n - 2);
    let pair_div = F::from_usize(n - 1) * nm2;
    let mut row_sum = vec![F::zero(); n];
    let mut col_sum = vec![F::zero(); n];
    let mut grand = F::zero();
    for i in 0..n {
        for j in 0..n {
            row_sum[i] += raw[(i, j)];
            col_sum[j] += raw[(i, j)];
            grand += raw[(i, j)];
        }
    }
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            out[(i, j)] = raw[(i, j)] - row_sum[i] / nm2 - col_sum[j] / nm2 + grand / pair_div;
        }
    }
    Ok(out)
}

/// Which centering a [`CenteredDistanceMatrix`] carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Centering {
    Double,
    UCentered,
}

/// A raw pairwise-distance matrix bundled with its centered form.
#[derive(Clone, Debug)]
pub struct CenteredDistanceMatrix<F> {
    pub raw: Mat<F>,
    pub centered: Mat<F>,
    pub mode: Centering,
}

impl<F: Scalar> CenteredDistanceMatrix<F> {
    pub fn compute(sample: &Sample<F>, metric: &MetricSpec<F>, mode: Centering) -> Result<Self> {
        let raw = pairwise_distances(sample, metric)?;
        let centered = match mode {
            Centering::Double => double_center(&raw),
            Centering::UCentered => u_center(&raw)?,
        };
        Ok(CenteredDistanceMatrix {
            raw,
            centered,
            mode,
        })
    }
}

/// Which estimator produced a [`DcovValue`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    /// V-statistic; nonnegative by construction.
    BiasedV,
    /// U-statistic; may be negative.
    UnbiasedU,
}

/// A squared distance covariance tagged with its estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DcovValue<F> {
    pub v2: F,
    pub estimator: Estimator,
}

fn check_pair<F: Scalar>(x: &Sample<F>, y: &Sample<F>) -> Result<()> {
    if x.n() != y.n() {
        return Err(Error::LengthMismatch {
            left: x.n(),
            right: y.n(),
        });
    }
    if x.n() < 2 {
        return Err(Error::TooFewObservations { need: 2, got: x.n() });
    }
    Ok(())
}

fn row_means<F: Scalar>(m: &Mat<F>) -> (Vec<F>, F) {
    let n = m.n_rows();
    let inv_n = F::from_usize(n).recip();
    let mut means = vec![F::zero(); n];
    for i in 0..n {
        let mut s = F::zero();
        for j in 0..n {
            s += m[(i, j)];
        }
        means[i] = s * inv_n;
    }
    let mut grand = F::zero();
    for v in &means {
        grand += *v;
    }
    (means, grand * inv_n)
}

/// Mean of the entrywise product of the double-centered forms of two
/// symmetric matrices, computed without materializing the centered matrices.
pub(crate) fn v_product<F: Scalar>(a: &Mat<F>, b: &Mat<F>) -> F {
    let n = a.n_rows();
    debug_assert_eq!(b.n_rows(), n);
    let (am, ag) = row_means(a);
    let (bm, bg) = row_means(b);
    let mut acc = Kahan::new();
    for i in 0..n {
        for j in 0..n {
            let ac = a[(i, j)] - am[i] - am[j] + ag;
            let bc = b[(i, j)] - bm[i] - bm[j] + bg;
            acc.add(ac * bc);
        }
    }
    let n2 = F::from_usize(n) * F::from_usize(n);
    (acc.total() / n2).max(F::zero())
}

/// Squared distance covariance, biased V-statistic.
pub fn dcov_v<F: Scalar>(x: &Sample<F>, y: &Sample<F>, metric: &MetricSpec<F>) -> Result<DcovValue<F>> {
    check_pair(x, y)?;
    let a = pairwise_distances(x, metric)?;
    let b = pairwise_distances(y, metric)?;
    Ok(DcovValue {
        v2: v_product(&a, &b),
        estimator: Estimator::BiasedV,
    })
}

/// Same V-statistic evaluated through the expanded raw-sum identity
/// `S1/n^2 + Sa*Sb/n^4 - 2*S3/n^3`; kept as an independent cross-check of
/// the centered form.
pub fn dcov_v_expanded<F: Scalar>(
    x: &Sample<F>,
    y: &Sample<F>,
    metric: &MetricSpec<F>,
) -> Result<F> {
    check_pair(x, y)?;
    let a = pairwise_distances(x, metric)?;
    let b = pairwise_distances(y, metric)?;
    let n = x.n();
    let mut ra = vec![F::zero(); n];
    let mut rb = vec![F::zero(); n];
    let mut s1 = Kahan::new();
    for i in 0..n {
        let mut sa = Kahan::new();
        let mut sb = Kahan::new();
        for j in 0..n {
            s1.add(a[(i, j)] * b[(i, j)]);
            sa.add(a[(i, j)]);
            sb.add(b[(i, j)]);
        }
        ra[i] = sa.total();
        rb[i] = sb.total();
    }
    let mut sum_a = Kahan::new();
    let mut sum_b = Kahan::new();
    let mut s3 = Kahan::new();
    for i in 0..n {
        sum_a.add(ra[i]);
        sum_b.add(rb[i]);
        s3.add(ra[i] * rb[i]);
    }
    let nf = F::from_usize(n);
    let n2 = nf * nf;
    let two = F::from_f64(2.0);
    Ok(s1.total() / n2 + sum_a.total() * sum_b.total() / (n2 * n2)
        - two * s3.total() / (n2 * nf))
}

/// Squared distance covariance, unbiased U-statistic; may be negative.
pub fn dcov_u<F: Scalar>(x: &Sample<F>, y: &Sample<F>, metric: &MetricSpec<F>) -> Result<DcovValue<F>> {
    check_pair(x, y)?;
    let n = x.n();
    if n <= 3 {
        return Err(Error::TooFewObservations { need: 4, got: n });
    }
    let at = u_center(&pairwise_distances(x, metric)?)?;
    let bt = u_center(&pairwise_distances(y, metric)?)?;
    let mut acc = Kahan::new();
    for i in 0..n {
        for j in 0..n {
            // Diagonals are zero, so summing everything covers i != j.
            acc.add(at[(i, j)] * bt[(i, j)]);
        }
    }
    let v2 = acc.total() / (F::from_usize(n) * F::from_usize(n - 3));
    Ok(DcovValue {
        v2,
        estimator: Estimator::UnbiasedU,
    })
}

fn correlation_from_v2<F: Scalar>(vxy: F, vxx: F, vyy: F) -> F {
    let den = (vxx * vyy).sqrt();
    if den > F::zero() {
        (vxy / den).min(F::one()).max(F::zero()).sqrt()
    } else {
        F::zero()
    }
}

/// Distance correlation in [0, 1]; degenerate denominators yield 0.
pub fn dcor<F: Scalar>(x: &Sample<F>, y: &Sample<F>, metric: &MetricSpec<F>) -> Result<F> {
    check_pair(x, y)?;
    metric.validate()?;
    if x.dim() == 1 && y.dim() == 1 && matches!(metric, MetricSpec::Euclidean) {
        let vxy = fastdcov::dcov_fast_slices(x.data(), y.data())?;
        let vxx = fastdcov::dcov_fast_slices(x.data(), x.data())?;
        let vyy = fastdcov::dcov_fast_slices(y.data(), y.data())?;
        return Ok(correlation_from_v2(vxy, vxx, vyy));
    }
    let a = pairwise_distances(x, metric)?;
    let b = pairwise_distances(y, metric)?;
    Ok(correlation_from_v2(
        v_product(&a, &b),
        v_product(&a, &a),
        v_product(&b, &b),
    ))
}

/// Closed-form squared distance correlation of a bivariate normal pair with
/// standard margins and Pearson correlation `r`.
pub fn dcor_normal_closed_form<F: Scalar>(r: F) -> Result<F> {
    if !r.is_finite() || r.abs() > F::one() {
        return Err(Error::invalid("r", "must lie in [-1, 1]"));
    }
    let one = F::one();
    let two = F::from_f64(2.0);
    let four = F::from_f64(4.0);
    let three = F::from_f64(3.0);
    let num = r * r.asin() + (one - r * r).sqrt() - r * (r / two).asin() - (four - r * r).sqrt()
        + one;
    let den = one + F::PI() / three - three.sqrt();
    Ok(num / den)
}

/// Closed-form squared distance correlation of identically distributed
/// Bernoulli variables whose joint success probability parameter is `p`.
pub fn dcor_bernoulli_closed_form<F: Scalar>(p: F) -> Result<F> {
    if !p.is_finite() || p < F::zero() || p > F::one() {
        return Err(Error::invalid("p", "must lie in [0, 1]"));
    }
    let d = F::from_f64(2.0) * p - F::one();
    Ok(d * d)
}

/// Rows mapped through the inverse symmetric square root of the sample
/// covariance (divisor n-1). Errors when the covariance is numerically
/// singular: any eigenvalue at or below 1e-10 times the largest.
fn whiten<F: Scalar>(sample: &Sample<F>) -> Result<Sample<F>> {
    let n = sample.n();
    let p = sample.dim();
    let inv_n = F::from_usize(n).recip();
    let mut mean = vec![F::zero(); p];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(sample.row(i)) {
            *m += *v;
        }
    }
    for m in mean.iter_mut() {
        *m *= inv_n;
    }
    let mut cov = Mat::zeros(p, p);
    for i in 0..n {
        let row = sample.row(i);
        for a in 0..p {
            let da = row[a] - mean[a];
            for b in a..p {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    let denom = F::from_usize(n - 1);
    for a in 0..p {
        for b in a..p {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let (eig, vecs) = cov.sym_eigen();
    let max_eig = eig.iter().fold(F::zero(), |m, &e| m.max(e));
    let floor = F::from_f64(1e-10) * max_eig;
    for &e in &eig {
        if e <= floor || max_eig <= F::zero() {
            return Err(Error::SingularMatrix {
                context: "sample covariance",
            });
        }
    }
    // inv_sqrt = V diag(1/sqrt(eig)) V'
    let mut inv_sqrt = Mat::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            let mut s = F::zero();
            for k in 0..p {
                s += vecs[(a, k)] * vecs[(b, k)] / eig[k].sqrt();
            }
            inv_sqrt[(a, b)] = s;
        }
    }
    let mut data = Vec::with_capacity(n * p);
    for i in 0..n {
        let row = sample.row(i);
        for a in 0..p {
            let mut s = F::zero();
            for b in 0..p {
                s += inv_sqrt[(a, b)] * row[b];
            }
            data.push(s);
        }
    }
    Sample::from_flat(n, p, data)
}

/// Affinely invariant squared distance covariance: the V-statistic applied
/// to covariance-whitened samples.
pub fn dcov_affine<F: Scalar>(x: &Sample<F>, y: &Sample<F>) -> Result<F> {
    check_pair(x, y)?;
    let need = x.dim().max(y.dim()) + 1;
    if x.n() < need {
        return Err(Error::TooFewObservations { need, got: x.n() });
    }
    let xw = whiten(x)?;
    let yw = whiten(y)?;
    Ok(dcov_v(&xw, &yw, &MetricSpec::Euclidean)?.v2)
}

/// Affinely invariant distance correlation, derived from [`dcov_affine`].
pub fn dcor_affine<F: Scalar>(x: &Sample<F>, y: &Sample<F>) -> Result<F> {
    check_pair(x, y)?;
    let need = x.dim().max(y.dim()) + 1;
    if x.n() < need {
        return Err(Error::TooFewObservations { need, got: x.n() });
    }
    let xw = whiten(x)?;
    let yw = whiten(y)?;
    dcor(&xw, &yw, &MetricSpec::Euclidean)
}

fn dcor_squared_slices<F: Scalar>(x: &[F], y: &[F]) -> Result<F> {
    let vxy = fastdcov::dcov_fast_slices(x, y)?;
    let vxx = fastdcov::dcov_fast_slices(x, x)?;
    let vyy = fastdcov::dcov_fast_slices(y, y)?;
    let den = (vxx * vyy).sqrt();
    if den > F::zero() {
        Ok((vxy / den).min(F::one()).max(F::zero()))
    } else {
        Ok(F::zero())
    }
}

/// Partial distance correlation of `x` and `y` with `z` removed, built from
/// squared distance correlations; the degenerate branches return 0.
pub fn pdcor<F: Scalar>(x: &Series<F>, y: &Series<F>, z: &Series<F>) -> Result<F> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() != z.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: z.len(),
        });
    }
    let rxy = dcor_squared_slices(x.values(), y.values())?;
    let rxz = dcor_squared_slices(x.values(), z.values())?;
    let ryz = dcor_squared_slices(y.values(), z.values())?;
    let dx = F::one() - rxz * rxz;
    let dy = F::one() - ryz * ryz;
    if dx <= F::zero() || dy <= F::zero() {
        return Ok(F::zero());
    }
    Ok((rxy - rxz * ryz) / (dx.sqrt() * dy.sqrt()))
}

/// Average ranks, 1-based; exact ties share the mean of their positions.
pub(crate) fn average_ranks<F: Scalar>(x: &[F]) -> Vec<F> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("finite values"));
    let mut ranks = vec![F::zero(); n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        // Positions i+1 ..= j+1 share one averaged rank.
        let avg = F::from_f64((i + j + 2) as f64) / F::from_f64(2.0);
        for k in i..=j {
            ranks[idx[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Blom-type normal scores: `inv_Phi((rank - 3/8) / (n + 1/4))` with average
/// ranks for ties.
pub fn normal_scores<F: Scalar>(x: &[F]) -> Result<Vec<F>> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    for (i, v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
    }
    let shift = F::from_f64(0.375);
    let den = F::from_usize(x.len()) + F::from_f64(0.25);
    average_ranks(x)
        .into_iter()
        .map(|r| inv_norm_cdf_scalar((r - shift) / den))
        .collect()
}

/// The normal-scores dependence statistic: n times the squared distance
/// covariance of the score transforms. Depends on the data through ranks
/// only.
pub fn feuerverger_stat<F: Scalar>(x: &[F], y: &[F]) -> Result<F> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let sx = normal_scores(x)?;
    let sy = normal_scores(y)?;
    Ok(F::from_usize(x.len()) * fastdcov::dcov_fast_slices(&sx, &sy)?)
}

/// Sure-independence screening: indices of the `d` predictor columns with
/// the largest distance correlation against the response, in descending
/// order; score ties break toward the lower index.
pub fn dcor_screen<F: Scalar>(
    predictors: &MultiSeries<F>,
    response: &Series<F>,
    d: usize,
) -> Result<Vec<usize>> {
    if d == 0 {
        return Err(Error::invalid("d", "must select at least one predictor"));
    }
    if d > predictors.dim() {
        return Err(Error::invalid("d", "exceeds the number of predictors"));
    }
    if predictors.n() != response.len() {
        return Err(Error::LengthMismatch {
            left: predictors.n(),
            right: response.len(),
        });
    }
    let mut scores = Vec::with_capacity(predictors.dim());
    for k in 0..predictors.dim() {
        let col = predictors.column(k);
        // Ranking by squared correlation preserves the correlation order.
        scores.push(dcor_squared_slices(&col, response.values())?);
    }
    let mut order: Vec<usize> = (0..predictors.dim()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then(a.cmp(&b))
    });
    order.truncate(d);
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    const X5: [f64; 5] = [0.25, -1.0, 1.5, 0.75, -0.5];
    const Y5: [f64; 5] = [1.0, 0.5, -0.25, 2.0, 0.125];
    const Z5: [f64; 5] = [0.5, 0.5, -1.25, 0.25, 1.0];

    fn uni(v: &[f64]) -> Sample<f64> {
        Sample::from_univariate(v).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    fn random_sample(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Sample<f64> {
        let data: Vec<f64> = (0..n * dim).map(|_| rng.sample(StandardNormal)).collect();
        Sample::from_flat(n, dim, data).unwrap()
    }

    #[test]
    fn metric_values() {
        let s01 = uni(&[0.0, 1.0]);
        let raw = pairwise_distances(&s01, &MetricSpec::Euclidean).unwrap();
        assert_eq!(raw[(0, 1)], 1.0);
        assert_eq!(raw[(1, 0)], 1.0);
        assert_eq!(raw[(0, 0)], 0.0);

        let s02 = uni(&[0.0, 2.0]);
        let raw = pairwise_distances(&s02, &MetricSpec::AlphaPower { alpha: 0.5 }).unwrap();
        assert!(close(raw[(0, 1)], 2f64.sqrt(), 1e-15));

        let raw = pairwise_distances(&s01, &MetricSpec::GaussianInduced { sigma: 1.0 }).unwrap();
        assert!(close(raw[(0, 1)], 0.3934693402873666, 1e-15));
    }

    #[test]
    fn metric_parameter_validation() {
        for alpha in [0.0, 2.0, -0.5, f64::NAN] {
            assert!(MetricSpec::AlphaPower { alpha }.validate().is_err());
        }
        for sigma in [0.0, -1.0, f64::NAN] {
            assert!(MetricSpec::GaussianInduced { sigma }.validate().is_err());
        }
        assert!(MetricSpec::AlphaPower { alpha: 1.5 }.validate().is_ok());
    }

    #[test]
    fn alpha_one_is_bitwise_euclidean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_sample(&mut rng, 20, 3);
        let e = pairwise_distances(&s, &MetricSpec::Euclidean).unwrap();
        let a = pairwise_distances(&s, &MetricSpec::AlphaPower { alpha: 1.0 }).unwrap();
        assert_eq!(e, a);
    }

    #[test]
    fn hsic_kernel_metric_matches_euclidean() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_sample(&mut rng, 25, 2);
        let y = random_sample(&mut rng, 25, 2);
        let ve = dcov_v(&x, &y, &MetricSpec::Euclidean).unwrap().v2;
        let vh = dcov_v(&x, &y, &MetricSpec::HsicKernelInduced).unwrap().v2;
        assert!(close(ve, vh, 1e-12));
    }

    #[test]
    fn double_center_examples() {
        let raw = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let c = double_center(&raw);
        assert_eq!(c.row(0), &[-0.5, 0.5]);
        assert_eq!(c.row(1), &[0.5, -0.5]);

        let zeros = Mat::<f64>::zeros(4, 4);
        assert_eq!(double_center(&zeros), zeros);
    }

    #[test]
    fn centering_sum_invariants_hold_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let n = rng.gen_range(2..=12).max(4);
            let s = random_sample(&mut rng, n, 2);
            let raw = pairwise_distances(&s, &MetricSpec::Euclidean).unwrap();
            let tol = 1e-12 * n as f64 * raw.max_abs().max(1.0);

            let c = double_center(&raw);
            for i in 0..n {
                let rs: f64 = (0..n).map(|j| c[(i, j)]).sum();
                let cs: f64 = (0..n).map(|j| c[(j, i)]).sum();
                assert!(rs.abs() <= tol && cs.abs() <= tol);
            }

            let u = u_center(&raw).unwrap();
            for i in 0..n {
                assert_eq!(u[(i, i)], 0.0);
                let rs: f64 = (0..n).filter(|&j| j != i).map(|j| u[(i, j)]).sum();
                assert!(rs.abs() <= tol);
            }
        }
    }

    #[test]
    fn u_center_hand_values() {
        let pts = uni(&[0.0, 1.0, 2.0, 3.0]);
        let raw = pairwise_distances(&pts, &MetricSpec::Euclidean).unwrap();
        let u = u_center(&raw).unwrap();
        assert!(close(u[(0, 1)], -2.0 / 3.0, 1e-14));
        assert!(close(u[(0, 2)], 1.0 / 3.0, 1e-14));
        assert!(close(u[(0, 3)], 1.0 / 3.0, 1e-14));
        assert!(close(u[(1, 0)], -2.0 / 3.0, 1e-14));

        let small = Mat::<f64>::zeros(3, 3);
        assert!(u_center(&small).is_err());
    }

    #[test]
    fn dcov_v_hand_values() {
        let a = uni(&[0.0, 1.0]);
        assert_eq!(dcov_v(&a, &a, &MetricSpec::Euclidean).unwrap().v2, 0.25);

        let b = uni(&[1.0, 0.0]);
        assert_eq!(dcov_v(&a, &b, &MetricSpec::Euclidean).unwrap().v2, 0.25);

        let c = uni(&[5.0, 5.0, 5.0]);
        let y = uni(&[1.0, 2.0, 3.0]);
        assert_eq!(dcov_v(&c, &y, &MetricSpec::Euclidean).unwrap().v2, 0.0);

        let v = dcov_v(&uni(&X5), &uni(&Y5), &MetricSpec::Euclidean).unwrap();
        assert!(close(v.v2, 0.184, 1e-14));
        assert_eq!(v.estimator, Estimator::BiasedV);
    }

    #[test]
    fn dcov_v_shape_errors() {
        let a = uni(&[0.0, 1.0]);
        let b = uni(&[0.0, 1.0, 2.0]);
        assert!(dcov_v(&a, &b, &MetricSpec::Euclidean).is_err());
        let single = uni(&[1.0]);
        assert!(dcov_v(&single, &single, &MetricSpec::Euclidean).is_err());
    }

    #[test]
    fn centered_and_expanded_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..200 {
            let n = rng.gen_range(2..=40);
            let dim = rng.gen_range(1..=3);
            let x = random_sample(&mut rng, n, dim);
            let y = random_sample(&mut rng, n, dim);
            let v6 = dcov_v(&x, &y, &MetricSpec::Euclidean).unwrap().v2;
            let v7 = dcov_v_expanded(&x, &y, &MetricSpec::Euclidean).unwrap();
            assert!(
                (v6 - v7).abs() <= 1e-10 * v6.abs().max(v7.abs()).max(1e-30),
                "n={n} dim={dim}: {v6} vs {v7}"
            );
        }
    }

    #[test]
    fn dcov_u_hand_values() {
        let pts = uni(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let v = dcov_u(&pts, &pts, &MetricSpec::Euclidean).unwrap();
        assert_eq!(v.estimator, Estimator::UnbiasedU);
        assert!(v.v2 > 0.0);
        assert!(close(v.v2, 16.0 / 15.0, 1e-14));

        let v = dcov_u(&uni(&X5), &uni(&Y5), &MetricSpec::Euclidean).unwrap();
        assert!(close(v.v2, -0.04583333333333329, 1e-12));

        let c = uni(&[2.0; 6]);
        let y = uni(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(dcov_u(&c, &y, &MetricSpec::Euclidean).unwrap().v2, 0.0);

        let short = uni(&[0.0, 1.0, 2.0]);
        assert!(dcov_u(&short, &short, &MetricSpec::Euclidean).is_err());
    }

    #[test]
    fn dcov_u_brute_force_cross_check() {
        // Direct evaluation of the U-centered sum, independent of dcov_u's
        // internal path.
        let x = uni(&X5);
        let y = uni(&Y5);
        let at = u_center(&pairwise_distances(&x, &MetricSpec::Euclidean).unwrap()).unwrap();
        let bt = u_center(&pairwise_distances(&y, &MetricSpec::Euclidean).unwrap()).unwrap();
        let mut s = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    s += at[(i, j)] * bt[(i, j)];
                }
            }
        }
        let direct = s / (5.0 * 2.0);
        let v = dcov_u(&x, &y, &MetricSpec::Euclidean).unwrap().v2;
        assert!(close(direct, v, 1e-14));
    }

    #[test]
    fn dcov_u_mean_near_zero_under_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let reps = 10_000;
        let n = 20;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..reps {
            let x = random_sample(&mut rng, n, 1);
            let y = random_sample(&mut rng, n, 1);
            let v = dcov_u(&x, &y, &MetricSpec::Euclidean).unwrap().v2;
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / reps as f64;
        let var = (sum_sq / reps as f64 - mean * mean).max(0.0);
        let se = (var / reps as f64).sqrt();
        assert!(
            mean.abs() <= 3.0 * se,
            "mean {mean} exceeds 3 standard errors {se}"
        );
    }

    #[test]
    fn dcov_v_bias_law_under_independence() {
        // For independent data the V-statistic's expectation is
        // alpha*beta*(n-1)/n^2 with alpha = E|X-X'|, beta = E|Y-Y'|;
        // standard normals give alpha = beta = 2/sqrt(pi).
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let reps = 10_000;
        let n = 10;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..reps {
            let x = random_sample(&mut rng, n, 1);
            let y = random_sample(&mut rng, n, 1);
            let v = dcov_v(&x, &y, &MetricSpec::Euclidean).unwrap().v2;
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / reps as f64;
        let var = (sum_sq / reps as f64 - mean * mean).max(0.0);
        let se = (var / reps as f64).sqrt();
        let alpha = 2.0 / std::f64::consts::PI.sqrt();
        let expect = alpha * alpha * (n as f64 - 1.0) / (n as f64 * n as f64);
        assert!(
            (mean - expect).abs() <= 3.0 * se,
            "mean {mean} vs {expect} (se {se})"
        );
    }

    #[test]
    fn dcor_golden_and_bounds() {
        let r = dcor(&uni(&X5), &uni(&Y5), &MetricSpec::Euclidean).unwrap();
        assert!(close(r, 0.6687719126950487, 1e-12));

        let c = uni(&[3.0, 3.0, 3.0]);
        let y = uni(&[1.0, 2.0, 3.0]);
        assert_eq!(dcor(&c, &y, &MetricSpec::Euclidean).unwrap(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.gen_range(2..=30);
            let x = random_sample(&mut rng, n, 1);
            let y = random_sample(&mut rng, n, 1);
            let r = dcor(&x, &y, &MetricSpec::Euclidean).unwrap();
            assert!((0.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn dcor_is_one_under_orthogonal_affine_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let x = random_sample(&mut rng, 30, 2);
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let b = 2.5;
        let rows: Vec<Vec<f64>> = (0..x.n())
            .map(|i| {
                let r = x.row(i);
                vec![
                    0.3 + b * (r[0] * c + r[1] * s),
                    -1.2 + b * (-r[0] * s + r[1] * c),
                ]
            })
            .collect();
        let y = Sample::from_rows(&rows).unwrap();
        let r = dcor(&x, &y, &MetricSpec::Euclidean).unwrap();
        assert!((r - 1.0).abs() <= 1e-12, "r = {r}");
    }

    #[test]
    fn closed_form_normal() {
        assert_eq!(dcor_normal_closed_form(0.0).unwrap(), 0.0);
        assert!(close(dcor_normal_closed_form(1.0).unwrap(), 1.0, 1e-14));
        assert!(close(
            dcor_normal_closed_form(0.25).unwrap(),
            0.050041637953727514,
            1e-12
        ));
        assert!(close(
            dcor_normal_closed_form(0.5).unwrap(),
            0.20623088203511827,
            1e-12
        ));
        assert!(close(
            dcor_normal_closed_form(0.9).unwrap(),
            0.7537331340529275,
            1e-12
        ));
        // The correlation root never exceeds |r|.
        for r in [0.1f64, 0.3, 0.5, 0.7, 0.9] {
            assert!(dcor_normal_closed_form(r).unwrap().sqrt() <= r);
        }
        assert!(dcor_normal_closed_form(1.5).is_err());
    }

    #[test]
    fn closed_form_bernoulli() {
        assert_eq!(dcor_bernoulli_closed_form(0.5).unwrap(), 0.0);
        assert_eq!(dcor_bernoulli_closed_form(1.0).unwrap(), 1.0);
        assert_eq!(dcor_bernoulli_closed_form(0.75).unwrap(), 0.25);
        assert!(dcor_bernoulli_closed_form(-0.1).is_err());
        assert!(dcor_bernoulli_closed_form(1.1).is_err());
    }

    #[test]
    fn affine_dcov_matches_plain_on_whitened_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let x = random_sample(&mut rng, 40, 2);
        let y = random_sample(&mut rng, 40, 2);
        let xw = whiten(&x).unwrap();
        let yw = whiten(&y).unwrap();
        // Whitened data has identity covariance, so a second whitening is a
        // near-identity map.
        let plain = dcov_v(&xw, &yw, &MetricSpec::Euclidean).unwrap().v2;
        let affine = dcov_affine(&xw, &yw).unwrap();
        assert!(close(plain, affine, 1e-10));
    }

    #[test]
    fn affine_invariance_under_invertible_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let x = random_sample(&mut rng, 35, 2);
        let y = random_sample(&mut rng, 35, 1);
        // Scalar affine maps of each sample.
        let x2_rows: Vec<Vec<f64>> = (0..x.n())
            .map(|i| {
                let r = x.row(i);
                // Invertible non-orthogonal map plus shift.
                vec![3.0 * r[0] + 1.0 + 0.5 * r[1], -2.0 * r[1] + 5.0]
            })
            .collect();
        let x2 = Sample::from_rows(&x2_rows).unwrap();
        let y2_data: Vec<f64> = y.data().iter().map(|v| -2.0 * v + 5.0).collect();
        let y2 = Sample::from_flat(y.n(), 1, y2_data).unwrap();

        let v1 = dcov_affine(&x, &y).unwrap();
        let v2 = dcov_affine(&x2, &y2).unwrap();
        assert!(close(v1, v2, 1e-10), "{v1} vs {v2}");

        let r1 = dcor_affine(&x, &y).unwrap();
        let r2 = dcor_affine(&x2, &y2).unwrap();
        assert!((r1 - r2).abs() <= 1e-10, "{r1} vs {r2}");
    }

    #[test]
    fn affine_rejects_singular_covariance() {
        // Duplicate column makes the covariance singular.
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let x = Sample::from_rows(&rows).unwrap();
        let y = Sample::from_rows(&rows).unwrap();
        assert!(matches!(
            dcov_affine(&x, &y),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn pdcor_values() {
        let x = Series::new(X5.to_vec()).unwrap();
        let y = Series::new(Y5.to_vec()).unwrap();
        let z = Series::new(Z5.to_vec()).unwrap();
        let r = pdcor(&x, &y, &z).unwrap();
        assert!(close(r, 0.17389265987957922, 1e-12));

        // Removing x itself collapses to the degenerate branch.
        assert_eq!(pdcor(&x, &y, &x).unwrap(), 0.0);

        // A constant z has zero distance correlation with anything, so the
        // formula collapses to the plain squared correlation.
        let zc = Series::new(vec![1.0; 5]).unwrap();
        let plain = dcor(&uni(&X5), &uni(&Y5), &MetricSpec::Euclidean).unwrap();
        assert!(close(pdcor(&x, &y, &zc).unwrap(), plain * plain, 1e-12));
    }

    #[test]
    fn normal_scores_values() {
        assert!(normal_scores::<f64>(&[]).is_err());
        assert_eq!(normal_scores(&[42.0]).unwrap(), vec![0.0]);

        let s = normal_scores(&[10.0, 20.0]).unwrap();
        assert!(close(s[1], 0.5894557978497785, 1e-12));
        assert!(close(s[0], -s[1], 1e-12));

        let s = normal_scores(&[1.0, 1.0, 2.0]).unwrap();
        assert!(close(s[0], -0.3957252958144873, 1e-12));
        assert_eq!(s[0], s[1]);
        assert!(close(s[2], 0.869423773288886, 1e-12));

        // Monotone input keeps score order.
        let s = normal_scores(&[3.0, 1.0, 2.0, 5.0]).unwrap();
        assert!(s[1] < s[2] && s[2] < s[0] && s[0] < s[3]);
    }

    #[test]
    fn feuerverger_depends_on_ranks_only() {
        let x: Vec<f64> = vec![0.3, -1.2, 0.8, 2.1, -0.4, 1.6];
        let y: Vec<f64> = vec![1.0, 0.2, -0.7, 0.9, 1.4, -2.0];
        let t = feuerverger_stat(&x, &y).unwrap();
        assert!(t > 0.0);
        // Strictly monotone transforms leave the statistic unchanged.
        let xm: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let ym: Vec<f64> = y.iter().map(|v| v * v * v).collect();
        assert_eq!(t, feuerverger_stat(&xm, &ym).unwrap());
    }

    #[test]
    fn screen_picks_exact_match_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 30;
        let p = 6;
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let r: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
            rows.push(r);
        }
        let preds = MultiSeries::from_rows(&rows, None).unwrap();
        let response = Series::new(preds.column(3)).unwrap();
        let picked = dcor_screen(&preds, &response, 2).unwrap();
        assert_eq!(picked[0], 3);
    }

    #[test]
    fn screen_tie_and_error_rules() {
        let rows: Vec<Vec<f64>> = (0..8).map(|_| vec![1.0, 1.0, 1.0]).collect();
        let preds = MultiSeries::from_rows(&rows, None).unwrap();
        let resp = Series::new((0..8).map(|i| i as f64).collect()).unwrap();
        assert_eq!(dcor_screen(&preds, &resp, 2).unwrap(), vec![0, 1]);
        assert!(dcor_screen(&preds, &resp, 0).is_err());
        assert!(dcor_screen(&preds, &resp, 4).is_err());
    }

    #[test]
    fn screen_finds_quadratic_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let n = 150;
        let p = 8;
        let mut rows = Vec::with_capacity(n);
        let mut resp = Vec::with_capacity(n);
        for _ in 0..n {
            let r: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
            let noise: f64 = rng.sample(StandardNormal);
            resp.push(r[0] * r[0] + 0.1 * noise);
            rows.push(r);
        }
        let preds = MultiSeries::from_rows(&rows, None).unwrap();
        let response = Series::new(resp).unwrap();
        let picked = dcor_screen(&preds, &response, 1).unwrap();
        assert_eq!(picked, vec![0]);
    }
}
