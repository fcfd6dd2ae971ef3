//! Data-generating processes and the Monte Carlo size/power harness.
//!
//! Each experiment draws one series, profiles it once, and reuses that
//! profile (and one profile per bootstrap replicate) across every statistic
//! and bandwidth in the grid, so adding a statistic to a run is nearly free.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernels::{resolve_bandwidth, BandwidthSpec, KernelSpec};
use crate::portmanteau::{stat_from_profile, ProfileRequest, SerialProfile, StatName};
use crate::resampling::{pvalue_from_replicates, replicate_rng};
use crate::sample::Series;

/// Null and alternative processes used in the size/power study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// Independent standard normals.
    IidNormal,
    /// Nonlinear moving average X_t = e_t e_{t-1} e_{t-2}: white noise with
    /// serial dependence concentrated at lags 1 and 2.
    Nma2,
    /// AR(1) with coefficient 0.4.
    Ar1,
    /// ARCH(2): X_t = s_t e_t, s_t^2 = 0.5 + 0.8 X_{t-1}^2 + 0.1 X_{t-2}^2.
    Arch2,
}

pub const AR1_PHI: f64 = 0.4;
pub const ARCH_OMEGA: f64 = 0.5;
pub const ARCH_A1: f64 = 0.8;
pub const ARCH_A2: f64 = 0.1;

// Recursive models discard this many warm-up steps before recording.
const BURN_IN: usize = 500;

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::IidNormal,
        ModelKind::Nma2,
        ModelKind::Ar1,
        ModelKind::Arch2,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::IidNormal => "iid-normal",
            ModelKind::Nma2 => "nma2",
            ModelKind::Ar1 => "ar1",
            ModelKind::Arch2 => "arch2",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "iid" {
            return Ok(ModelKind::IidNormal);
        }
        ModelKind::ALL
            .into_iter()
            .find(|m| m.label() == lower)
            .ok_or_else(|| Error::Parse(format!("unknown model '{s}'")))
    }
}

/// Simulate `n` observations from `kind`, deterministically from `seed`.
pub fn generate(kind: ModelKind, n: usize, seed: u64) -> Result<Series<f64>> {
    if n < 2 {
        return Err(Error::TooFewObservations { need: 2, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = move || -> f64 { rng.sample(StandardNormal) };
    let values = match kind {
        ModelKind::IidNormal => (0..n).map(|_| draw()).collect(),
        ModelKind::Nma2 => {
            // Two presample innovations start the product window.
            let eps: Vec<f64> = (0..n + 2).map(|_| draw()).collect();
            (2..n + 2).map(|t| eps[t] * eps[t - 1] * eps[t - 2]).collect()
        }
        ModelKind::Ar1 => {
            let mut x = 0.0;
            let mut out = Vec::with_capacity(n);
            for t in 0..BURN_IN + n {
                x = AR1_PHI * x + draw();
                if t >= BURN_IN {
                    out.push(x);
                }
            }
            out
        }
        ModelKind::Arch2 => {
            // Presample values are zero, so the first variance is omega.
            let (mut x1, mut x2) = (0.0, 0.0);
            let mut out = Vec::with_capacity(n);
            for t in 0..BURN_IN + n {
                let s2 = ARCH_OMEGA + ARCH_A1 * x1 * x1 + ARCH_A2 * x2 * x2;
                let x = s2.sqrt() * draw();
                x2 = x1;
                x1 = x;
                if t >= BURN_IN {
                    out.push(x);
                }
            }
            out
        }
    };
    Series::new(values)
}

pub const DESK_EXPERIMENTS: usize = 500;
pub const DESK_REPLICATES: usize = 299;
pub const FULL_EXPERIMENTS: usize = 1000;
pub const FULL_REPLICATES: usize = 499;

/// Grid description for one study: every (model, n, lambda, statistic) cell
/// is run with the same experiment count and bootstrap depth.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub models: Vec<ModelKind>,
    pub sizes: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub statistics: Vec<StatName>,
    /// Bootstrap replicates per experiment (B).
    pub replicates: usize,
    /// Independent experiments per cell.
    pub experiments: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty()
            || self.sizes.is_empty()
            || self.lambdas.is_empty()
            || self.statistics.is_empty()
        {
            return Err(Error::invalid("grid", "models, sizes, lambdas and statistics must be nonempty"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates", "need at least one bootstrap replicate"));
        }
        if self.experiments == 0 {
            return Err(Error::invalid("experiments", "need at least one experiment"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha", "must lie strictly inside (0, 1)"));
        }
        Ok(())
    }
}

/// Rejection tally for one grid cell; `error` marks a failed cell whose rate
/// is meaningless (reported as NA).
#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub model: ModelKind,
    pub n: usize,
    pub lambda: f64,
    pub p: Option<usize>,
    pub statistic: StatName,
    pub rejections: usize,
    pub completed: usize,
    pub error: Option<String>,
}

impl CellOutcome {
    pub fn rate_pct(&self) -> Option<f64> {
        if self.error.is_some() || self.completed == 0 {
            return None;
        }
        Some(100.0 * self.rejections as f64 / self.completed as f64)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub cells: Vec<CellOutcome>,
}

impl ExperimentReport {
    pub const CSV_HEADER: &'static str =
        "model,n,lambda,p,statistic,rate_pct,n_experiments,B,alpha,seed";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            let p = c.p.map_or_else(|| "NA".to_string(), |p| p.to_string());
            let rate = c
                .rate_pct()
                .map_or_else(|| "NA".to_string(), |r| format!("{r}"));
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                c.model,
                c.n,
                c.lambda,
                p,
                c.statistic,
                rate,
                c.completed,
                self.config.replicates,
                self.config.alpha,
                self.config.seed,
            ));
        }
        out
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

// Distinct stream per (purpose, model index, size index, experiment).
fn derive_seed(master: u64, parts: [u64; 4]) -> u64 {
    let mut s = splitmix64(master);
    for p in parts {
        s = splitmix64(s ^ p);
    }
    s
}

struct CellGrid<'a> {
    stats: &'a [StatName],
    ps: &'a [std::result::Result<usize, String>],
}

impl CellGrid<'_> {
    fn len(&self) -> usize {
        self.stats.len() * self.ps.len()
    }
}

type CellResults = Vec<std::result::Result<bool, String>>;

fn run_one(
    model: ModelKind,
    n: usize,
    grid: &CellGrid<'_>,
    need: ProfileRequest,
    max_lag: usize,
    kernel: KernelSpec,
    config: &ExperimentConfig,
    series_seed: u64,
    boot_seed: u64,
) -> CellResults {
    let cells = grid.len();
    let fail_all = |msg: String| vec![Err(msg); cells];

    let series = match generate(model, n, series_seed) {
        Ok(s) => s,
        Err(e) => return fail_all(e.to_string()),
    };
    let eval_profile = |prof: &SerialProfile<f64>| -> Vec<std::result::Result<f64, String>> {
        let mut vals = Vec::with_capacity(cells);
        for pr in grid.ps {
            for &stat in grid.stats {
                vals.push(match pr {
                    Ok(p) => stat_from_profile(stat, prof, kernel, *p).map_err(|e| e.to_string()),
                    Err(e) => Err(e.clone()),
                });
            }
        }
        vals
    };

    let prof = match SerialProfile::compute(&series, max_lag, need) {
        Ok(p) => p,
        Err(e) => return fail_all(e.to_string()),
    };
    let observed = eval_profile(&prof);

    let values = series.values();
    let mut replicated: Vec<Vec<f64>> = vec![Vec::with_capacity(config.replicates); cells];
    let mut rep_err: Vec<Option<String>> = vec![None; cells];
    for r in 0..config.replicates {
        let mut rng = replicate_rng(boot_seed, r);
        let drawn: Vec<f64> = (0..n).map(|_| values[rng.gen_range(0..n)]).collect();
        let rprof = match Series::new(drawn).and_then(|s| SerialProfile::compute(&s, max_lag, need))
        {
            Ok(p) => p,
            Err(e) => return fail_all(e.to_string()),
        };
        for (c, v) in eval_profile(&rprof).into_iter().enumerate() {
            match v {
                Ok(v) => replicated[c].push(v),
                Err(e) => {
                    if rep_err[c].is_none() {
                        rep_err[c] = Some(e);
                    }
                }
            }
        }
    }

    observed
        .into_iter()
        .enumerate()
        .map(|(c, obs)| {
            let obs = obs?;
            if let Some(e) = rep_err[c].take() {
                return Err(e);
            }
            let p = pvalue_from_replicates(obs, &replicated[c]);
            Ok(p <= config.alpha)
        })
        .collect()
}

/// Run the full grid; statistic or calibration failures mark their cell
/// failed without aborting the rest of the study.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let kernel = KernelSpec::Bartlett;
    let need = ProfileRequest::for_statistics(&config.statistics);
    let mut cells = Vec::new();

    for (mi, &model) in config.models.iter().enumerate() {
        for (ni, &n) in config.sizes.iter().enumerate() {
            let ps: Vec<std::result::Result<usize, String>> = config
                .lambdas
                .iter()
                .map(|&l| resolve_bandwidth(BandwidthSpec::DEFAULT_C, l, n).map_err(|e| e.to_string()))
                .collect();
            let grid = CellGrid { stats: &config.statistics, ps: &ps };
            // resolve_bandwidth guarantees p < n, so the deepest profile fits.
            let max_lag = ps.iter().filter_map(|r| r.as_ref().ok().copied()).max().unwrap_or(1);

            let per_exp: Vec<CellResults> = (0..config.experiments)
                .into_par_iter()
                .map(|e| {
                    let series_seed = derive_seed(config.seed, [0, mi as u64, ni as u64, e as u64]);
                    let boot_seed = derive_seed(config.seed, [1, mi as u64, ni as u64, e as u64]);
                    run_one(model, n, &grid, need, max_lag, kernel, config, series_seed, boot_seed)
                })
                .collect();

            for (li, pr) in ps.iter().enumerate() {
                for (si, &stat) in config.statistics.iter().enumerate() {
                    let c = li * config.statistics.len() + si;
                    let mut rejections = 0;
                    let mut completed = 0;
                    let mut error = None;
                    for exp in &per_exp {
                        match &exp[c] {
                            Ok(true) => {
                                rejections += 1;
                                completed += 1;
                            }
                            Ok(false) => completed += 1,
                            Err(e) => {
                                if error.is_none() {
                                    error = Some(e.clone());
                                }
                            }
                        }
                    }
                    cells.push(CellOutcome {
                        model,
                        n,
                        lambda: config.lambdas[li],
                        p: pr.as_ref().ok().copied(),
                        statistic: stat,
                        rejections,
                        completed,
                        error,
                    });
                }
            }
        }
    }

    Ok(ExperimentReport { config: config.clone(), cells })
}
