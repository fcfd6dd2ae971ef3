//! Validated input containers.
//!
//! All numeric input enters through these constructors, which enforce the
//! basic shape and finiteness rules once so downstream code can assume them.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) fn check_finite<F: Scalar>(values: &[F]) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
    }
    Ok(())
}

/// A sample of `n` observations in `R^dim`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<F> {
    n: usize,
    dim: usize,
    data: Vec<F>,
}

impl<F: Scalar> Sample<F> {
    /// Builds from row-major flat data (`n*dim` values).
    pub fn from_flat(n: usize, dim: usize, data: Vec<F>) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::EmptyInput);
        }
        if data.len() != n * dim {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: n * dim,
            });
        }
        check_finite(&data)?;
        Ok(Sample { n, dim, data })
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let dim = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::LengthMismatch {
                    left: r.len(),
                    right: dim,
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(rows.len(), dim, data)
    }

    /// One-dimensional sample from a slice of scalars.
    pub fn from_univariate(values: &[F]) -> Result<Self> {
        Self::from_flat(values.len(), 1, values.to_vec())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }
}

/// A univariate time series with at least two observations.
#[derive(Clone, Debug, PartialEq)]
pub struct Series<F> {
    values: Vec<F>,
}

impl<F: Scalar> Series<F> {
    pub fn new(values: Vec<F>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewObservations {
                need: 2,
                got: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(Series { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 2 by construction
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }
}

/// A `d`-component time series, row per time point, with component labels.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiSeries<F> {
    n: usize,
    dim: usize,
    data: Vec<F>,
    labels: Vec<String>,
}

impl<F: Scalar> MultiSeries<F> {
    /// Builds from row-major flat data; labels default to `x1..xd`.
    pub fn from_flat(
        n: usize,
        dim: usize,
        data: Vec<F>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewObservations { need: 2, got: n });
        }
        if dim == 0 {
            return Err(Error::EmptyInput);
        }
        if data.len() != n * dim {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: n * dim,
            });
        }
        check_finite(&data)?;
        let labels = match labels {
            Some(l) => {
                if l.len() != dim {
                    return Err(Error::LengthMismatch {
                        left: l.len(),
                        right: dim,
                    });
                }
                l
            }
            None => (1..=dim).map(|i| format!("x{i}")).collect(),
        };
        Ok(MultiSeries {
            n,
            dim,
            data,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<F>], labels: Option<Vec<String>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let dim = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::LengthMismatch {
                    left: r.len(),
                    right: dim,
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(rows.len(), dim, data, labels)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[F] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    /// Extracts component `r` as an owned column vector.
    pub fn column(&self, r: usize) -> Vec<F> {
        assert!(r < self.dim, "component index out of range");
        (0..self.n).map(|t| self.data[t * self.dim + r]).collect()
    }

    /// Extracts component `r` as a `Series`.
    pub fn component(&self, r: usize) -> Series<F> {
        // n >= 2 and finiteness already hold, so this cannot fail.
        Series::new(self.column(r)).expect("component inherits series invariants")
    }
}
