//! Vector autoregression fitting by least squares, for the residual
//! diagnostics workflow: fit a VAR, pull out the residuals, test them for
//! remaining serial dependence.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::sample::MultiSeries;
use crate::scalar::Scalar;

/// A fitted VAR(p) model X_t = c + sum_i Phi_i X_{t-i} + e_t.
#[derive(Clone, Debug)]
pub struct VarModel<F> {
    /// Total observation count of the input series.
    pub n: usize,
    pub dim: usize,
    pub order: usize,
    pub intercept: Vec<F>,
    /// Phi_1..Phi_p; rows are equations, columns lagged components.
    pub phi: Vec<Mat<F>>,
    /// (n - p) x d matrix of one-step-ahead residuals.
    pub residuals: Mat<F>,
    /// Innovation covariance E'E / (n - p).
    pub sigma: Mat<F>,
    /// ln det(sigma) + 2 d^2 p / n; ln det is -inf when sigma is singular.
    pub aic: F,
}

impl<F: Scalar> VarModel<F> {
    /// Residuals as a series for downstream dependence tests.
    pub fn residual_series(&self) -> Result<MultiSeries<F>> {
        let m = self.residuals.n_rows();
        MultiSeries::from_flat(m, self.dim, self.residuals.data().to_vec(), None)
    }
}

/// Least squares VAR fit with intercept.
pub fn var_fit<F: Scalar>(x: &MultiSeries<F>, order: usize) -> Result<VarModel<F>> {
    if order < 1 {
        return Err(Error::invalid("order", "must be at least 1"));
    }
    let n = x.n();
    let d = x.dim();
    if n <= d * order + 1 {
        return Err(Error::TooFewObservations { need: d * order + 2, got: n });
    }
    let m = n - order;
    let k = 1 + d * order;

    let mut z = Mat::zeros(m, k);
    let mut y = Mat::zeros(m, d);
    for row in 0..m {
        let t = row + order;
        z[(row, 0)] = F::one();
        for lag in 1..=order {
            let past = x.row(t - lag);
            for b in 0..d {
                z[(row, 1 + (lag - 1) * d + b)] = past[b];
            }
        }
        let current = x.row(t);
        for a in 0..d {
            y[(row, a)] = current[a];
        }
    }

    let beta = crate::linalg::qr_least_squares(&z, &y, "VAR regressors")?;

    let intercept: Vec<F> = (0..d).map(|a| beta[(0, a)]).collect();
    let mut phi = Vec::with_capacity(order);
    for lag in 1..=order {
        let mut p = Mat::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                p[(a, b)] = beta[(1 + (lag - 1) * d + b, a)];
            }
        }
        phi.push(p);
    }

    let fitted = z.matmul(&beta);
    let mut residuals = Mat::zeros(m, d);
    for row in 0..m {
        for a in 0..d {
            residuals[(row, a)] = y[(row, a)] - fitted[(row, a)];
        }
    }

    let mut sigma = Mat::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let mut total = F::zero();
            for row in 0..m {
                total += residuals[(row, a)] * residuals[(row, b)];
            }
            sigma[(a, b)] = total / F::from_usize(m);
        }
    }

    let log_det = sigma.sym_log_det().unwrap_or(F::neg_infinity());
    let df = F::from_usize(2 * d * d * order) / F::from_usize(n);
    let aic = log_det + df;

    Ok(VarModel { n, dim: d, order, intercept, phi, residuals, sigma, aic })
}

/// Order minimizing the AIC over 1..=max_order; ties take the smaller order.
pub fn var_order_select<F: Scalar>(x: &MultiSeries<F>, max_order: usize) -> Result<usize> {
    if max_order < 1 {
        return Err(Error::invalid("max_order", "must be at least 1"));
    }
    let mut best_order = 0usize;
    let mut best_aic = F::infinity();
    for p in 1..=max_order {
        let model = var_fit(x, p)?;
        if model.aic < best_aic {
            best_aic = model.aic;
            best_order = p;
        }
    }
    Ok(best_order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use rand_distr::Distribution;

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

    fn simulate_var(
        intercept: &[f64],
        phi: &[Mat<f64>],
        n: usize,
        noise_sd: f64,
        rng: &mut StdRng,
    ) -> MultiSeries<f64> {
        let d = intercept.len();
        let order = phi.len();
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let total = n + 100;
        let mut rows: Vec<Vec<f64>> = vec![vec![0.0; d]; order];
        for _ in order..total {
            let mut next = intercept.to_vec();
            for (lag, p) in phi.iter().enumerate() {
                let past = &rows[rows.len() - 1 - lag];
                for a in 0..d {
                    for b in 0..d {
                        next[a] += p[(a, b)] * past[b];
                    }
                }
            }
            if noise_sd > 0.0 {
                for v in next.iter_mut() {
                    *v += noise_sd * normal.sample(rng);
                }
            }
            rows.push(next);
        }
        let keep: Vec<Vec<f64>> = rows[rows.len() - n..].to_vec();
        MultiSeries::from_rows(&keep, None).unwrap()
    }

    #[test]
    fn var1_reference_fit() {
        let model = var_fit(&m8(), 1).unwrap();
        assert_eq!(model.order, 1);
        assert_eq!(model.residuals.n_rows(), 7);
        assert!((model.intercept[0] - 0.1664047204210303).abs() < 1e-12);
        assert!((model.intercept[1] - 0.5195606487884612).abs() < 1e-12);
        let phi = &model.phi[0];
        assert!((phi[(0, 0)] - -0.46241445584035357).abs() < 1e-12);
        assert!((phi[(0, 1)] - 1.0951628257862873).abs() < 1e-12);
        assert!((phi[(1, 0)] - -0.6352450918757746).abs() < 1e-12);
        assert!((phi[(1, 1)] - -1.003358899286907).abs() < 1e-12);
        assert!((model.sigma[(0, 0)] - 0.16482662793711236).abs() < 1e-12);
        assert!((model.sigma[(0, 1)] - -0.1580045854492175).abs() < 1e-12);
        assert!((model.sigma[(1, 0)] - -0.1580045854492175).abs() < 1e-12);
        assert!((model.sigma[(1, 1)] - 0.19234894575724057).abs() < 1e-12);
        assert!((model.aic - -3.999876513872093).abs() < 1e-12);
    }

    #[test]
    fn exact_recovery_without_noise() {
        // A damped rotation keeps the regressors well conditioned while the
        // trajectory decays, so a noiseless fit recovers the coefficients.
        let mut phi: Mat<f64> = Mat::zeros(2, 2);
        phi[(0, 1)] = 0.9;
        phi[(1, 0)] = -0.9;
        let intercept = [0.05f64, -0.02];
        let mut rows = vec![vec![1.5, -0.75]];
        for _ in 1..24 {
            let past = rows.last().unwrap().clone();
            rows.push(vec![
                intercept[0] + phi[(0, 0)] * past[0] + phi[(0, 1)] * past[1],
                intercept[1] + phi[(1, 0)] * past[0] + phi[(1, 1)] * past[1],
            ]);
        }
        let x = MultiSeries::from_rows(&rows, None).unwrap();
        let model = var_fit(&x, 1).unwrap();
        for a in 0..2 {
            assert!((model.intercept[a] - intercept[a]).abs() < 1e-8);
            for b in 0..2 {
                assert!((model.phi[0][(a, b)] - phi[(a, b)]).abs() < 1e-8);
            }
        }
        assert!(model.residuals.max_abs() < 1e-8);
    }

    #[test]
    fn white_noise_coefficients_near_zero() {
        let mut rng = StdRng::seed_from_u64(111);
        let x = simulate_var(&[0.0, 0.0], &[Mat::zeros(2, 2)], 2000, 1.0, &mut rng);
        let model = var_fit(&x, 1).unwrap();
        assert!(model.phi[0].max_abs() < 0.12, "phi = {:?}", model.phi[0]);
    }

    #[test]
    fn sigma_symmetric_positive_semidefinite() {
        let mut rng = StdRng::seed_from_u64(112);
        let mut phi = Mat::zeros(2, 2);
        phi[(0, 0)] = 0.4;
        phi[(1, 1)] = -0.3;
        let x = simulate_var(&[0.1, -0.1], &[phi], 300, 1.0, &mut rng);
        let model = var_fit(&x, 1).unwrap();
        assert_eq!(model.sigma[(0, 1)], model.sigma[(1, 0)]);
        let (eigs, _) = model.sigma.sym_eigen();
        for e in eigs {
            assert!(e > -1e-10, "eigenvalue {e}");
        }
        let resid = model.residual_series().unwrap();
        assert_eq!(resid.n(), 299);
    }

    #[test]
    fn too_few_observations_rejected() {
        let rows: Vec<Vec<f64>> = (0..5).map(|t| vec![t as f64, (t * t) as f64]).collect();
        let x = MultiSeries::from_rows(&rows, None).unwrap();
        assert!(matches!(var_fit(&x, 2), Err(Error::TooFewObservations { .. })));
        assert!(matches!(var_fit(&x, 4), Err(Error::TooFewObservations { .. })));
    }

    #[test]
    fn rank_deficient_regressors_rejected() {
        // Identical components make the lagged regressor block collinear.
        let mut rng = StdRng::seed_from_u64(113);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let v: f64 = normal.sample(&mut rng);
                vec![v, v]
            })
            .collect();
        let x = MultiSeries::from_rows(&rows, None).unwrap();
        assert!(matches!(var_fit(&x, 1), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn order_selection_finds_var2() {
        let mut rng = StdRng::seed_from_u64(114);
        let mut phi1 = Mat::zeros(2, 2);
        phi1[(0, 0)] = 0.2;
        phi1[(1, 1)] = 0.2;
        let mut phi2 = Mat::zeros(2, 2);
        phi2[(0, 0)] = 0.5;
        phi2[(1, 1)] = 0.5;
        let mut hits = 0;
        for _ in 0..5 {
            let x = simulate_var(&[0.0, 0.0], &[phi1.clone(), phi2.clone()], 400, 1.0, &mut rng);
            if var_order_select(&x, 5).unwrap() == 2 {
                hits += 1;
            }
        }
        assert!(hits >= 4, "selected order 2 in {hits}/5 runs");
    }

    #[test]
    fn order_selection_white_noise_small() {
        let mut rng = StdRng::seed_from_u64(115);
        let mut small = 0;
        for _ in 0..10 {
            let x = simulate_var(&[0.0, 0.0], &[Mat::zeros(2, 2)], 300, 1.0, &mut rng);
            if var_order_select(&x, 4).unwrap() == 1 {
                small += 1;
            }
        }
        assert!(small >= 6, "order 1 chosen {small}/10 times");
    }

    #[test]
    fn max_order_one_returns_one() {
        let mut rng = StdRng::seed_from_u64(116);
        let x = simulate_var(&[0.0, 0.0], &[Mat::zeros(2, 2)], 60, 1.0, &mut rng);
        assert_eq!(var_order_select(&x, 1).unwrap(), 1);
        assert!(var_order_select(&x, 0).is_err());
    }
}
