//! Command-line surface over the serialdep library.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on data errors. Every
//! randomized command is a pure function of its arguments and --seed.

mod io;

use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use serialdep::distance::{dcor, dcov_u, dcov_v};
use serialdep::kernels::{resolve_bandwidth, BandwidthSpec, KernelSpec};
use serialdep::portmanteau::{
    stat_fpm, stat_from_profile, stat_h98m, stat_mlb, stat_stm, ProfileRequest, SerialProfile,
    StatName,
};
use serialdep::resampling::{
    iid_bootstrap_pvalue, iid_bootstrap_pvalue_multi, permutation_pvalue, subsample_band,
    wild_bootstrap_band, ResampleMethod, ResamplingPlan, TestResult,
};
use serialdep::simulation::{
    run_experiment, ExperimentConfig, ModelKind, DESK_EXPERIMENTS, DESK_REPLICATES,
    FULL_EXPERIMENTS, FULL_REPLICATES,
};
use serialdep::timeseries::{default_plot_max_lag, lag_profile};
use serialdep::var::{var_fit, var_order_select};
use serialdep::{Mat, MetricSpec, MultiSeries, Sample, Series};

use crate::io::{data, usage, write_output, AppError, AppResult};

#[derive(Parser)]
#[command(
    name = "serialdep",
    version,
    about = "Distance covariance dependence measurement and testing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distance covariance between two samples
    Dcov(PairArgs),
    /// Distance correlation between two samples
    Dcor(PairArgs),
    /// Portmanteau serial dependence test on one series
    Test(TestArgs),
    /// ADCF plot data with subsampling and wild bootstrap bands
    Adcf(AdcfArgs),
    /// Fit a vector autoregression, optionally testing its residuals
    Var(VarArgs),
    /// Monte Carlo size/power study over models, sizes and statistics
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Permutation of the paired sample (dcov, dcor)
    Perm,
    /// Observation bootstrap under the i.i.d. null (test)
    Boot,
    /// Wild bootstrap simultaneous band (adcf)
    Wild,
    /// Block subsampling pairwise band (adcf)
    Subsample,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Euclidean,
    /// |x - y|^a with 0 < a < 2
    Alpha,
    /// Gaussian-kernel-induced semimetric
    Gaussian,
    /// HSIC kernel |x| + |y| - |x - y|
    Hsic,
}

#[derive(Clone)]
enum OrderArg {
    Auto,
    Fixed(usize),
}

impl FromStr for OrderArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(OrderArg::Auto);
        }
        s.parse::<usize>()
            .ok()
            .filter(|&p| p >= 1)
            .map(OrderArg::Fixed)
            .ok_or_else(|| format!("expected 'auto' or a positive integer, got '{s}'"))
    }
}

#[derive(Args)]
struct OutputOpts {
    /// Write the result here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format; defaults to json (csv for adcf and simulate)
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl OutputOpts {
    fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

#[derive(Args)]
struct SeriesOpts {
    /// Input CSV, one column per component, optional header row
    file: PathBuf,
    /// Natural log transform, applied before differencing
    #[arg(long)]
    log: bool,
    /// First difference, applied after --log; shortens the series by one
    #[arg(long)]
    diff: bool,
    /// Use one zero-based column of a multi-column file
    #[arg(long, value_name = "IDX")]
    col: Option<usize>,
}

impl SeriesOpts {
    fn load(&self) -> AppResult<MultiSeries> {
        let ms = io::read_series(&self.file, self.log, self.diff)?;
        match self.col {
            None => Ok(ms),
            Some(c) if c < ms.dim() => {
                let rows: Vec<Vec<f64>> = ms.column(c).into_iter().map(|v| vec![v]).collect();
                MultiSeries::from_rows(&rows, None).map_err(AppError::from)
            }
            Some(c) => Err(usage(format!(
                "--col {c} out of range for a {}-column file",
                ms.dim()
            ))),
        }
    }

    fn univariate(&self) -> AppResult<Series> {
        let ms = self.load()?;
        if ms.dim() != 1 {
            return Err(usage(format!(
                "{} has {} columns; pick one with --col",
                self.file.display(),
                ms.dim()
            )));
        }
        Ok(ms.component(0))
    }
}

#[derive(Args)]
struct BandwidthOpts {
    /// Bandwidth exponent: p = ceil(3 n^lambda)
    #[arg(long, conflicts_with = "bandwidth")]
    lambda: Option<f64>,
    /// Explicit bandwidth p
    #[arg(long, value_name = "P")]
    bandwidth: Option<usize>,
}

impl BandwidthOpts {
    fn is_set(&self) -> bool {
        self.lambda.is_some() || self.bandwidth.is_some()
    }

    fn resolve(&self, n: usize) -> AppResult<(usize, Option<f64>)> {
        if let Some(p) = self.bandwidth {
            if p == 0 || p >= n {
                return Err(data(format!("bandwidth p={p} out of range for n={n}")));
            }
            return Ok((p, None));
        }
        let lambda = self.lambda.unwrap_or(0.1);
        let p = resolve_bandwidth(BandwidthSpec::DEFAULT_C, lambda, n)?;
        Ok((p, Some(lambda)))
    }
}

#[derive(Args)]
struct PairArgs {
    /// Sample X, one row per observation
    x: PathBuf,
    /// Sample Y, same number of rows
    y: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
    metric: MetricArg,
    /// Exponent for --metric alpha
    #[arg(long, value_name = "A")]
    exponent: Option<f64>,
    /// Width for --metric gaussian
    #[arg(long)]
    sigma: Option<f64>,
    /// U-centered estimator instead of the V-statistic (dcov only)
    #[arg(long)]
    unbiased: bool,
    /// Permutation replicates; runs the independence test when given
    #[arg(long, value_name = "B")]
    boot: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Calibration method; this command supports perm
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    series: SeriesOpts,
    /// Statistic: bp, lb, h96, t2n, t3n, h98, h99, st, fp for one component;
    /// fpm, mlb, stm, h98m for multivariate series
    #[arg(long, default_value = "fp")]
    stat: StatName,
    #[command(flatten)]
    bandwidth: BandwidthOpts,
    /// Lag window for the kernel-weighted statistics
    #[arg(long, default_value = "bartlett")]
    kernel: KernelSpec,
    /// Bootstrap replicates B
    #[arg(long, default_value_t = 299, value_name = "B")]
    boot: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Calibration method; this command supports boot
    #[arg(long, value_enum, default_value_t = Method::Boot)]
    method: Method,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args)]
struct AdcfArgs {
    #[command(flatten)]
    series: SeriesOpts,
    /// Largest lag J; defaults to ceil(10 log10 n)
    #[arg(long, value_name = "J")]
    lags: Option<usize>,
    /// Wild bootstrap replicates for the simultaneous band
    #[arg(long, default_value_t = 299, value_name = "B")]
    boot: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bands cover level 1 - alpha
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Subsampling block length; defaults to ceil(sqrt(n))
    #[arg(long)]
    block: Option<usize>,
    /// Emit only one band: wild or subsample (default both)
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args)]
struct VarArgs {
    #[command(flatten)]
    series: SeriesOpts,
    /// Model order, or auto for AIC selection
    #[arg(long, default_value = "auto")]
    order: OrderArg,
    /// Largest order tried by auto selection
    #[arg(long, default_value_t = 10, value_name = "N")]
    max_order: usize,
    /// Follow-up on the residuals; the only action is test
    #[arg(long, value_name = "ACTION")]
    then: Option<String>,
    /// Residual test statistic (with --then test; default fpm)
    #[arg(long)]
    stat: Option<StatName>,
    #[command(flatten)]
    bandwidth: BandwidthOpts,
    #[arg(long, default_value = "bartlett")]
    kernel: KernelSpec,
    #[arg(long, default_value_t = 299, value_name = "B")]
    boot: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args)]
struct SimulateArgs {
    /// Models: iid-normal, nma2, ar1, arch2
    #[arg(long, value_delimiter = ',', default_value = "iid-normal")]
    model: Vec<ModelKind>,
    /// Series lengths
    #[arg(long = "n", value_delimiter = ',', default_value = "100", value_name = "N")]
    sizes: Vec<usize>,
    /// Bandwidth exponents
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3")]
    lambda: Vec<f64>,
    /// Statistics to tabulate
    #[arg(long, value_delimiter = ',', default_value = "bp,lb,h96,h98,h99,st,fp")]
    stats: Vec<StatName>,
    /// Experiments per cell; defaults to 500, or 1000 with --full
    #[arg(long)]
    experiments: Option<usize>,
    /// Bootstrap replicates; defaults to 299, or 499 with --full
    #[arg(long, value_name = "B")]
    boot: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Full-scale defaults: 1000 experiments, B = 499
    #[arg(long)]
    full: bool,
    #[command(flatten)]
    output: OutputOpts,
}

fn main() {
    configure_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Dcov(args) => run_pair(&args, false),
        Command::Dcor(args) => run_pair(&args, true),
        Command::Test(args) => run_test(&args),
        Command::Adcf(args) => run_adcf(&args),
        Command::Var(args) => run_var(&args),
        Command::Simulate(args) => run_simulate(&args),
    };
    if let Err(e) = result {
        eprintln!("serialdep: {}", e.message());
        std::process::exit(e.code());
    }
}

// SERIALDEP_THREADS caps the rayon pool; results do not depend on it.
fn configure_threads() {
    if let Ok(raw) = std::env::var("SERIALDEP_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(k) if k >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
            _ => eprintln!("serialdep: ignoring SERIALDEP_THREADS={raw}"),
        }
    }
}

fn read_sample(path: &PathBuf) -> AppResult<Sample> {
    let ms = io::read_series(path, false, false)?;
    Sample::from_flat(ms.n(), ms.dim(), ms.data().to_vec()).map_err(AppError::from)
}

fn metric_of(args: &PairArgs) -> AppResult<(MetricSpec, &'static str)> {
    if args.exponent.is_some() && args.metric != MetricArg::Alpha {
        return Err(usage("--exponent requires --metric alpha"));
    }
    if args.sigma.is_some() && args.metric != MetricArg::Gaussian {
        return Err(usage("--sigma requires --metric gaussian"));
    }
    let metric = match args.metric {
        MetricArg::Euclidean => (MetricSpec::Euclidean, "euclidean"),
        MetricArg::Alpha => (
            MetricSpec::AlphaPower { alpha: args.exponent.unwrap_or(1.0) },
            "alpha",
        ),
        MetricArg::Gaussian => (
            MetricSpec::GaussianInduced { sigma: args.sigma.unwrap_or(1.0) },
            "gaussian",
        ),
        MetricArg::Hsic => (MetricSpec::HsicKernelInduced, "hsic"),
    };
    metric.0.validate().map_err(|e| usage(e.to_string()))?;
    Ok(metric)
}

fn test_result_json(r: &TestResult<f64>, alpha: f64, method: &str) -> serde_json::Value {
    let mut body = json!({
        "statistic": r.statistic.name.label(),
        "value": r.statistic.value,
        "p_value": r.p_value,
        "replicates": r.b_used,
        "seed": r.seed,
        "alpha": alpha,
        "reject": r.reject(alpha),
        "method": method,
    });
    if let Some(c) = r.critical_value {
        body["critical_value"] = json!(c);
    }
    body
}

fn run_pair(args: &PairArgs, correlation: bool) -> AppResult<()> {
    let command = if correlation { "dcor" } else { "dcov" };
    if correlation && args.unbiased {
        return Err(usage("--unbiased applies to dcov only"));
    }
    if let Some(m) = args.method {
        if m != Method::Perm {
            return Err(usage(format!("{command} supports --method perm only")));
        }
        if args.boot.is_none() {
            return Err(usage("--method perm needs --boot B"));
        }
    }
    let x = read_sample(&args.x)?;
    let y = read_sample(&args.y)?;
    let (metric, metric_label) = metric_of(args)?;

    let mut body = json!({
        "schema_version": 1,
        "command": command,
        "n": x.n(),
        "dim_x": x.dim(),
        "dim_y": y.dim(),
        "metric": metric_label,
    });
    if let Some(a) = args.exponent {
        body["exponent"] = json!(a);
    }
    if let Some(s) = args.sigma {
        body["sigma"] = json!(s);
    }
    if correlation {
        let r = dcor(&x, &y, &metric)?;
        body["dcor"] = json!(r);
        body["r2"] = json!(r * r);
    } else {
        let v = if args.unbiased { dcov_u(&x, &y, &metric)? } else { dcov_v(&x, &y, &metric)? };
        body["estimator"] = json!(if args.unbiased { "u" } else { "v" });
        body["v2"] = json!(v.v2);
        body["dcov"] = json!(if v.v2 > 0.0 { v.v2.sqrt() } else { 0.0 });
    }
    if let Some(b) = args.boot {
        // permutation test always uses the scaled V-statistic n * dcov^2
        let test = permutation_pvalue(&x, &y, b, args.seed)?;
        body["test"] = test_result_json(&test, args.alpha, "perm");
    }

    emit(&args.output, Format::Json, body)
}

const UNIVARIATE_STATS: [StatName; 9] = [
    StatName::Bp,
    StatName::Lb,
    StatName::H96,
    StatName::T2n,
    StatName::T3n,
    StatName::H98,
    StatName::H99,
    StatName::St,
    StatName::Fp,
];

const MULTIVARIATE_STATS: [StatName; 4] =
    [StatName::FpM, StatName::Mlb, StatName::StM, StatName::H98M];

struct SeriesTestSpec {
    stat: StatName,
    kernel: KernelSpec,
    bandwidth: (usize, Option<f64>),
    boot: usize,
    seed: u64,
    alpha: f64,
}

fn run_series_test(ms: &MultiSeries, spec: &SeriesTestSpec) -> AppResult<serde_json::Value> {
    let (p, lambda) = spec.bandwidth;
    let (stat, kernel) = (spec.stat, spec.kernel);
    let plan = ResamplingPlan::new(ResampleMethod::IidBootstrap, spec.boot, spec.seed);
    let kernel_tag = stat.uses_kernel().then_some(kernel);

    let result = if MULTIVARIATE_STATS.contains(&stat) {
        let f = move |m: &MultiSeries| match stat {
            StatName::FpM => stat_fpm(m, kernel, p),
            StatName::Mlb => stat_mlb(m, p),
            StatName::StM => stat_stm(m, p),
            StatName::H98M => stat_h98m(m, kernel, p),
            _ => unreachable!(),
        };
        iid_bootstrap_pvalue_multi(&f, ms, stat, p, kernel_tag, &plan, Some(spec.alpha))?
    } else if UNIVARIATE_STATS.contains(&stat) {
        if ms.dim() != 1 {
            return Err(usage(format!(
                "statistic {stat} needs a univariate series; pick a column with --col"
            )));
        }
        let x = ms.component(0);
        let need = ProfileRequest::for_statistics(&[stat]);
        let depth = kernel.max_effective_lag(p, x.len() - 1).max(p);
        let f = move |s: &Series| {
            SerialProfile::compute(s, depth, need)
                .and_then(|prof| stat_from_profile(stat, &prof, kernel, p))
        };
        iid_bootstrap_pvalue(&f, &x, stat, p, kernel_tag, &plan, Some(spec.alpha))?
    } else {
        return Err(usage(format!("{stat} is not a serial dependence statistic")));
    };

    let mut body = test_result_json(&result, spec.alpha, "boot");
    body["n"] = json!(ms.n());
    body["dim"] = json!(ms.dim());
    body["bandwidth"] = json!(p);
    if let Some(l) = lambda {
        body["lambda"] = json!(l);
    }
    if let Some(k) = kernel_tag {
        body["kernel"] = json!(k.to_string());
    }
    Ok(body)
}

fn run_test(args: &TestArgs) -> AppResult<()> {
    if args.method != Method::Boot {
        return Err(usage("test supports --method boot only"));
    }
    let ms = args.series.load()?;
    let spec = SeriesTestSpec {
        stat: args.stat,
        kernel: args.kernel,
        bandwidth: args.bandwidth.resolve(ms.n())?,
        boot: args.boot,
        seed: args.seed,
        alpha: args.alpha,
    };
    let mut body = run_series_test(&ms, &spec)?;
    body["schema_version"] = json!(1);
    body["command"] = json!("test");
    emit(&args.output, Format::Json, body)
}

fn run_adcf(args: &AdcfArgs) -> AppResult<()> {
    let (want_sub, want_wild) = match args.method {
        None => (true, true),
        Some(Method::Subsample) => (true, false),
        Some(Method::Wild) => (false, true),
        Some(_) => return Err(usage("adcf supports --method wild or subsample")),
    };
    if args.block.is_some() && !want_sub {
        return Err(usage("--block applies to the subsampling band"));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(usage("--alpha must lie strictly inside (0, 1)"));
    }
    let x = args.series.univariate()?;
    let n = x.len();
    let max_lag = args.lags.unwrap_or_else(|| default_plot_max_lag(n));
    if max_lag < 1 || max_lag + 2 > n {
        return Err(data(format!("lags must fit 1..=n-2, got {max_lag} for n={n}")));
    }
    let level = 1.0 - args.alpha;

    let mut profile = lag_profile(&x, max_lag)?;
    let lags: Vec<usize> = (1..=max_lag).collect();
    if want_wild {
        let band = wild_bootstrap_band(&x, &lags, args.boot, args.seed, level)?;
        profile.simultaneous_band = Some(vec![band.band; lags.len()]);
    }
    let block = want_sub.then(|| {
        args.block.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize)
    });
    if let Some(b) = block {
        let bands: Vec<f64> = lags
            .iter()
            .map(|&j| subsample_band(&x, j, b, level))
            .collect::<serialdep::Result<_>>()?;
        profile.pairwise_band = Some(bands);
    }

    let records: Vec<serde_json::Value> = lags
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            json!({
                "lag": j,
                "adcf": profile.adcf[j],
                "pairwise_band": profile.pairwise_band.as_ref().map(|b| b[i]),
                "simultaneous_band": profile.simultaneous_band.as_ref().map(|b| b[i]),
            })
        })
        .collect();

    match args.output.format_or(Format::Csv) {
        Format::Csv => {
            let mut out = String::from("lag,adcf,pairwise_band,simultaneous_band\n");
            for (i, &j) in lags.iter().enumerate() {
                let pair = profile
                    .pairwise_band
                    .as_ref()
                    .map_or_else(|| "NA".into(), |b| io::fmt_f64(b[i]));
                let simu = profile
                    .simultaneous_band
                    .as_ref()
                    .map_or_else(|| "NA".into(), |b| io::fmt_f64(b[i]));
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    j,
                    io::fmt_f64(profile.adcf[j]),
                    pair,
                    simu
                ));
            }
            write_output(args.output.out.as_ref(), &out)
        }
        Format::Json => {
            let body = json!({
                "schema_version": 1,
                "command": "adcf",
                "n": n,
                "max_lag": max_lag,
                "level": level,
                "boot": want_wild.then_some(args.boot),
                "block": block,
                "seed": args.seed,
                "records": records,
            });
            write_json(args.output.out.as_ref(), body)
        }
    }
}

fn mat_json(m: &Mat) -> serde_json::Value {
    let rows: Vec<Vec<f64>> = (0..m.n_rows())
        .map(|i| (0..m.n_cols()).map(|j| m[(i, j)]).collect())
        .collect();
    json!(rows)
}

fn run_var(args: &VarArgs) -> AppResult<()> {
    let run_residual_test = match args.then.as_deref() {
        None => false,
        Some("test") => true,
        Some(other) => return Err(usage(format!("unknown --then action '{other}'"))),
    };
    if !run_residual_test && (args.stat.is_some() || args.bandwidth.is_set()) {
        return Err(usage("--stat, --lambda and --bandwidth need --then test"));
    }
    let ms = args.series.load()?;

    let (order, selected) = match args.order {
        OrderArg::Fixed(p) => (p, false),
        OrderArg::Auto => (var_order_select(&ms, args.max_order)?, true),
    };
    let model = var_fit(&ms, order)?;

    let mut body = json!({
        "schema_version": 1,
        "command": "var",
        "n": model.n,
        "dim": model.dim,
        "order": model.order,
        "order_selected": selected,
        "aic": model.aic,
        "intercept": model.intercept,
        "phi": model.phi.iter().map(mat_json).collect::<Vec<_>>(),
        "sigma": mat_json(&model.sigma),
        "n_residuals": model.residuals.n_rows(),
    });
    if run_residual_test {
        let residuals = model.residual_series()?;
        let stat = args.stat.unwrap_or(StatName::FpM);
        let spec = SeriesTestSpec {
            stat,
            kernel: args.kernel,
            bandwidth: args.bandwidth.resolve(residuals.n())?,
            boot: args.boot,
            seed: args.seed,
            alpha: args.alpha,
        };
        body["residual_test"] = run_series_test(&residuals, &spec)?;
    }
    emit(&args.output, Format::Json, body)
}

fn run_simulate(args: &SimulateArgs) -> AppResult<()> {
    let (experiments, boot) = if args.full {
        (
            args.experiments.unwrap_or(FULL_EXPERIMENTS),
            args.boot.unwrap_or(FULL_REPLICATES),
        )
    } else {
        (
            args.experiments.unwrap_or(DESK_EXPERIMENTS),
            args.boot.unwrap_or(DESK_REPLICATES),
        )
    };
    let config = ExperimentConfig {
        models: args.model.clone(),
        sizes: args.sizes.clone(),
        lambdas: args.lambda.clone(),
        statistics: args.stats.clone(),
        replicates: boot,
        experiments,
        alpha: args.alpha,
        seed: args.seed,
    };
    let started = Instant::now();
    let report = run_experiment(&config).map_err(|e| usage(e.to_string()))?;
    // runtime is log-only so reruns stay byte-identical
    let cells = report.cells.len();
    eprintln!(
        "serialdep: {cells} cell{} in {:.1}s",
        if cells == 1 { "" } else { "s" },
        started.elapsed().as_secs_f64()
    );
    for cell in &report.cells {
        if let Some(err) = &cell.error {
            eprintln!(
                "serialdep: cell {} n={} lambda={} {}: {err}",
                cell.model, cell.n, cell.lambda, cell.statistic
            );
        }
    }

    match args.output.format_or(Format::Csv) {
        Format::Csv => write_output(args.output.out.as_ref(), &report.to_csv()),
        Format::Json => {
            let cells: Vec<serde_json::Value> = report
                .cells
                .iter()
                .map(|c| {
                    json!({
                        "model": c.model.label(),
                        "n": c.n,
                        "lambda": c.lambda,
                        "p": c.p,
                        "statistic": c.statistic.label(),
                        "rate_pct": c.rate_pct(),
                        "rejections": c.rejections,
                        "completed": c.completed,
                        "error": c.error,
                    })
                })
                .collect();
            let body = json!({
                "schema_version": 1,
                "command": "simulate",
                "experiments": experiments,
                "replicates": boot,
                "alpha": args.alpha,
                "seed": args.seed,
                "cells": cells,
            });
            write_json(args.output.out.as_ref(), body)
        }
    }
}

fn write_json(out: Option<&PathBuf>, body: serde_json::Value) -> AppResult<()> {
    let mut text = serde_json::to_string_pretty(&body)
        .map_err(|e| data(format!("json encoding: {e}")))?;
    text.push('\n');
    write_output(out, &text)
}

/// Scalar-result commands: json object, or the same fields as key,value CSV.
fn emit(output: &OutputOpts, default: Format, body: serde_json::Value) -> AppResult<()> {
    match output.format_or(default) {
        Format::Json => write_json(output.out.as_ref(), body),
        Format::Csv => {
            let mut out = String::from("field,value\n");
            flatten_csv("", &body, &mut out);
            write_output(output.out.as_ref(), &out)
        }
    }
}

fn flatten_csv(prefix: &str, value: &serde_json::Value, out: &mut String) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_csv(&key, v, out);
            }
        }
        serde_json::Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten_csv(&format!("{prefix}.{i}"), v, out);
            }
        }
        scalar => {
            let text = match scalar {
                serde_json::Value::Number(x) => x.to_string(),
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Bool(b) => b.to_string(),
                serde_json::Value::Null => "NA".to_string(),
                _ => unreachable!(),
            };
            out.push_str(&format!("{prefix},{text}\n"));
        }
    }
}
