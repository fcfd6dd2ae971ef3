//! Lag-window kernels and bandwidth resolution for the spectral-type tests.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Supported lag-window kernels. All satisfy k(0) = 1, |k| <= 1, symmetry,
/// and square integrability.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelSpec {
    Bartlett,
    Parzen,
    Daniell,
}

impl KernelSpec {
    /// Kernel weight at `z`; even in `z`.
    pub fn weight<F: Scalar>(&self, z: F) -> F {
        let z = z.abs();
        let one = F::one();
        match self {
            KernelSpec::Bartlett => {
                if z <= one {
                    one - z
                } else {
                    F::zero()
                }
            }
            KernelSpec::Parzen => {
                let half = F::from_f64(0.5);
                let six = F::from_f64(6.0);
                let two = F::from_f64(2.0);
                if z <= half {
                    one - six * z * z + six * z * z * z
                } else if z <= one {
                    let w = one - z;
                    two * w * w * w
                } else {
                    F::zero()
                }
            }
            KernelSpec::Daniell => {
                if z == F::zero() {
                    one
                } else {
                    let t = F::PI() * z;
                    t.sin() / t
                }
            }
        }
    }

    /// Largest lag with a (possibly) nonzero weight, capped at `cap`.
    /// Bartlett and parzen vanish from lag p on; daniell never truncates.
    pub fn max_effective_lag(&self, p: usize, cap: usize) -> usize {
        match self {
            KernelSpec::Bartlett | KernelSpec::Parzen => cap.min(p.saturating_sub(1)),
            KernelSpec::Daniell => cap,
        }
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            KernelSpec::Bartlett => "bartlett",
            KernelSpec::Parzen => "parzen",
            KernelSpec::Daniell => "daniell",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for KernelSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bartlett" => Ok(KernelSpec::Bartlett),
            "parzen" => Ok(KernelSpec::Parzen),
            "daniell" => Ok(KernelSpec::Daniell),
            _ => Err(Error::Parse(format!("unknown kernel: {s}"))),
        }
    }
}

/// Free-function form of [`KernelSpec::weight`].
pub fn kernel_weight<F: Scalar>(spec: &KernelSpec, z: F) -> F {
    spec.weight(z)
}

/// A resolved bandwidth p = ceil(c * n^lambda).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandwidthSpec {
    pub c: f64,
    pub lambda: f64,
    pub p: usize,
}

impl BandwidthSpec {
    pub const DEFAULT_C: f64 = 3.0;

    pub fn resolve(c: f64, lambda: f64, n: usize) -> Result<Self> {
        let p = resolve_bandwidth(c, lambda, n)?;
        Ok(BandwidthSpec { c, lambda, p })
    }
}

/// Bandwidth rule p = ceil(c * n^lambda). The ceiling matters: rounding
/// would shift several of the standard (c = 3) table values down by one.
pub fn resolve_bandwidth(c: f64, lambda: f64, n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::TooFewObservations { need: 2, got: n });
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid("c", "must be positive"));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid("lambda", "must lie strictly inside (0, 1)"));
    }
    let p = (c * (n as f64).powf(lambda)).ceil() as usize;
    if p >= n {
        return Err(Error::BandwidthOutOfRange { p, n });
    }
    Ok(p.max(1))
}
