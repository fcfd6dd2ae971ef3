//! Empirical distribution functions and the Cramer/Kolmogorov style
//! dependence distances between a series and its lagged copy.
//!
//! All counts use weak inequalities on both coordinates, so a point is
//! counted as dominating itself.

use crate::error::{Error, Result};
use crate::sample::{check_finite, Series};
use crate::scalar::{Kahan, Scalar};
use crate::timeseries::{abs_lag, check_lag};

/// Marginal empirical distribution function F(x) = #{t : X_t <= x} / N.
#[derive(Clone, Debug)]
pub struct Edf<F> {
    sorted: Vec<F>,
}

impl<F: Scalar> Edf<F> {
    pub fn new(values: &[F]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        check_finite(values)?;
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Edf { sorted })
    }

    /// Right-continuous step evaluation.
    pub fn eval(&self, x: F) -> F {
        let count = self.sorted.partition_point(|v| *v <= x);
        F::from_usize(count) * F::recip_usize(self.sorted.len())
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Joint empirical distribution function of paired observations.
#[derive(Clone, Debug)]
pub struct JointEdf<F> {
    x: Vec<F>,
    y: Vec<F>,
}

impl<F: Scalar> JointEdf<F> {
    pub fn new(x: &[F], y: &[F]) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::EmptyInput);
        }
        if x.len() != y.len() {
            return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
        }
        check_finite(x)?;
        check_finite(y)?;
        Ok(JointEdf { x: x.to_vec(), y: y.to_vec() })
    }

    pub fn eval(&self, a: F, b: F) -> F {
        let mut count = 0usize;
        for t in 0..self.x.len() {
            if self.x[t] <= a && self.y[t] <= b {
                count += 1;
            }
        }
        F::from_usize(count) * F::recip_usize(self.x.len())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn edf_marginal<F: Scalar>(values: &[F]) -> Result<Edf<F>> {
    Edf::new(values)
}

pub fn edf_joint<F: Scalar>(x: &[F], y: &[F]) -> Result<JointEdf<F>> {
    JointEdf::new(x, y)
}

/// Fenwick tree over dense rank ids holding plain counts.
struct CountBit {
    tree: Vec<usize>,
}

impl CountBit {
    fn new(size: usize) -> Self {
        CountBit { tree: vec![0; size + 1] }
    }

    fn add(&mut self, pos: usize) {
        let mut i = pos + 1;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    fn prefix(&self, pos: usize) -> usize {
        let mut i = pos + 1;
        let mut total = 0;
        while i > 0 {
            total += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        total
    }
}

/// Dense tie-group ids in sorted order plus, per observation, the count of
/// values weakly below it (the max tie rank).
fn tie_ranks<F: Scalar>(values: &[F]) -> (Vec<usize>, Vec<usize>) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut group = vec![0usize; n];
    let mut below = vec![0usize; n];
    let mut g = 0usize;
    let mut start = 0usize;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        for &idx in &order[start..end] {
            group[idx] = g;
            below[idx] = end;
        }
        g += 1;
        start = end;
    }
    (group, below)
}

/// Mean squared gap between the joint and product EDFs over the observed
/// pairs: (1/N) sum_t {F_xy(u_t, v_t) - F_x(u_t) F_y(v_t)}^2.
///
/// Joint dominance counts come from a Fenwick tree over v tie groups while
/// sweeping u groups in ascending order. Every member of an equal-u group is
/// inserted before any member is queried, which keeps both inequalities weak.
pub(crate) fn d2_slices<F: Scalar>(u: &[F], v: &[F]) -> F {
    let n = u.len();
    debug_assert_eq!(n, v.len());
    debug_assert!(n >= 1);
    let inv = F::recip_usize(n);

    let (_, below_u) = tie_ranks(u);
    let (group_v, below_v) = tie_ranks(v);
    let groups_v = group_v.iter().copied().max().unwrap_or(0) + 1;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| u[a].partial_cmp(&u[b]).unwrap());

    let mut bit = CountBit::new(groups_v);
    let mut acc = Kahan::new();
    let mut start = 0usize;
    while start < n {
        let mut end = start + 1;
        while end < n && u[order[end]] == u[order[start]] {
            end += 1;
        }
        for &t in &order[start..end] {
            bit.add(group_v[t]);
        }
        for &t in &order[start..end] {
            let joint = F::from_usize(bit.prefix(group_v[t])) * inv;
            let fx = F::from_usize(below_u[t]) * inv;
            let fy = F::from_usize(below_v[t]) * inv;
            let gap = joint - fx * fy;
            acc.add(gap * gap);
        }
        start = end;
    }
    acc.total() * inv
}

/// Supremum of |F_xy(a, b) - F_x(a) F_y(b)| over the full product grid of
/// observed coordinates, i.e. all N^2 points (u_s, v_r). The sup of the step
/// function gap is attained on that grid, not necessarily at an observed pair.
pub(crate) fn d1_slices<F: Scalar>(u: &[F], v: &[F]) -> F {
    let n = u.len();
    debug_assert_eq!(n, v.len());
    debug_assert!(n >= 1);
    let inv = F::recip_usize(n);

    let (group_v, _) = tie_ranks(v);
    let groups_v = group_v.iter().copied().max().unwrap_or(0) + 1;

    // Cumulative counts of v weakly below each v tie group.
    let mut v_group_count = vec![0usize; groups_v];
    for &g in &group_v {
        v_group_count[g] += 1;
    }
    let mut v_below = vec![0usize; groups_v];
    let mut run = 0usize;
    for g in 0..groups_v {
        run += v_group_count[g];
        v_below[g] = run;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| u[a].partial_cmp(&u[b]).unwrap());

    // Sweep u tie groups; counts[g] accumulates v-group memberships of the
    // pairs whose u lies weakly below the current grid row.
    let mut counts = vec![0usize; groups_v];
    let mut sup = F::zero();
    let mut seen = 0usize;
    let mut start = 0usize;
    while start < n {
        let mut end = start + 1;
        while end < n && u[order[end]] == u[order[start]] {
            end += 1;
        }
        for &t in &order[start..end] {
            counts[group_v[t]] += 1;
        }
        seen = end;
        let fx = F::from_usize(seen) * inv;
        let mut joint_count = 0usize;
        for g in 0..groups_v {
            joint_count += counts[g];
            let joint = F::from_usize(joint_count) * inv;
            let fy = F::from_usize(v_below[g]) * inv;
            let gap = (joint - fx * fy).abs();
            if gap > sup {
                sup = gap;
            }
        }
        start = end;
    }
    debug_assert_eq!(seen, n);
    sup
}

fn lag_pair_slices<F: Scalar>(x: &Series<F>, j: isize) -> Result<(&[F], &[F])> {
    let v = x.values();
    let n = v.len();
    let lag = abs_lag(j);
    check_lag(n, lag, n.saturating_sub(2))?;
    Ok((&v[..n - lag], &v[lag..]))
}

/// Cramer-von Mises type distance D2(j) between the lag-j pair EDF and the
/// product of its marginals.
pub fn dist_d2<F: Scalar>(x: &Series<F>, j: isize) -> Result<F> {
    let (u, v) = lag_pair_slices(x, j)?;
    Ok(d2_slices(u, v))
}

/// Kolmogorov-Smirnov type distance D1(j): the sup norm analogue of D2.
pub fn dist_d1<F: Scalar>(x: &Series<F>, j: isize) -> Result<F> {
    let (u, v) = lag_pair_slices(x, j)?;
    Ok(d1_slices(u, v))
}
