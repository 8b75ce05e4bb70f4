//! Variance-decay experiment: replicated DPP quadrature of a bump function
//! over product Jacobi measures, a Kolmogorov-Smirnov screen for Gaussianity,
//! and a log-log fit of the sample variance against `N`, to be compared with
//! the slope `-1 - 1/d`.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::estimator::{estimate, Integrand};
use crate::kernel::{CDKernel, ProductMeasure};
use crate::orthopoly::{JacobiDensity, JacobiParams};
use crate::quadrature::{gauss_rule, tanh_sinh};
use crate::rng::{stream_id, stream_rng};
use crate::sampler::{BoundStrategy, Sampler, SamplerConfig};

/// `Π_j exp(-1 / (1 - ε - x_j²))` on `[-1 + ε, 1 - ε]^d`, zero elsewhere.
pub fn bump(x: &[f64], epsilon: f64) -> f64 {
    x.iter().map(|&t| bump_1d(t, epsilon)).product()
}

fn bump_1d(t: f64, epsilon: f64) -> f64 {
    let gap = 1.0 - epsilon - t * t;
    if t.abs() > 1.0 - epsilon || gap <= 0.0 {
        0.0
    } else {
        (-1.0 / gap).exp()
    }
}

/// The bump as an [`Integrand`], with its analytic gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub d: usize,
    pub epsilon: f64,
}

impl Integrand for Bump {
    fn dim(&self) -> usize {
        self.d
    }

    fn eval(&self, x: &[f64]) -> f64 {
        bump(x, self.epsilon)
    }

    fn support_margin(&self) -> f64 {
        self.epsilon
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let f = self.eval(x);
        Some(
            x.iter()
                .map(|&t| {
                    if f == 0.0 {
                        return 0.0;
                    }
                    let gap = 1.0 - self.epsilon - t * t;
                    f * (-2.0 * t / (gap * gap))
                })
                .collect(),
        )
    }
}

/// `∫ bump_1d dμ` for one Jacobi marginal: Gauss rule of the measure with the
/// node count doubled until two successive values agree to `1e-10`.
pub fn bump_marginal_integral(params: JacobiParams, epsilon: f64) -> Result<f64> {
    let mut n = 64;
    let mut prev = f64::NAN;
    while n <= 8192 {
        let table = crate::orthopoly::RecurrenceTable::jacobi(params, n)?;
        let rule = gauss_rule(&table, n)?;
        let v = rule.integrate(|t| bump_1d(t, epsilon));
        if (v - prev).abs() < 1e-10 {
            return Ok(v);
        }
        prev = v;
        n *= 2;
    }
    // slow Gauss convergence: integrate the smooth part directly
    let density = JacobiDensity::new(params);
    let r = 1.0 - epsilon;
    tanh_sinh(|t| bump_1d(t, epsilon) * density.eval(t), -r, r, 1e-12)
}

/// `∫ bump dμ` for a product measure (the bump factorizes).
pub fn bump_integral(measure: &ProductMeasure, epsilon: f64) -> Result<f64> {
    measure
        .params()
        .into_iter()
        .map(|p| bump_marginal_integral(p, epsilon))
        .product()
}

/// Asymptotic Kolmogorov tail `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // P(K <= λ) = √(2π)/λ Σ_{k>=1} exp(-(2k-1)² π² / (8 λ²))
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (c * m * m).exp()
            })
            .sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                let k = k as f64;
                sign * (-2.0 * k * k * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Minimum sample size for the Gaussianity screen.
pub const KS_MIN_SAMPLES: usize = 8;

/// One-sample KS test of standardized `samples` against `N(0, 1)`, with the
/// plain asymptotic Kolmogorov p-value. Location and scale are estimated
/// from the data, which makes the p-value conservative; it is meant as a
/// loose screen only.
///
/// Returns `None` when there are fewer than 8 samples or they are constant.
pub fn ks_normality_p(samples: &[f64]) -> Option<f64> {
    let n = samples.len();
    if n < KS_MIN_SAMPLES {
        return None;
    }
    let (mean, var) = mean_and_variance(samples);
    let sd = var.sqrt();
    if !sd.is_finite() || sd <= 0.0 {
        return None;
    }
    let mut z: Vec<f64> = samples.iter().map(|v| (v - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let nf = n as f64;
    let stat = z
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let cdf = normal.cdf(v);
            (cdf - i as f64 / nf).max((i + 1) as f64 / nf - cdf)
        })
        .fold(0.0f64, f64::max);
    Some(kolmogorov_sf(nf.sqrt() * stat))
}

/// Sample mean and unbiased (`n - 1`) variance.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let ss: f64 = xs.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, ss / (n - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// Two-sided 95% t-interval on the slope.
    pub interval: (f64, f64),
}

/// Ordinary least squares of `y` on `x` with a t-based 95% interval.
pub fn loglog_regression(points: &[(f64, f64)]) -> Result<Regression> {
    let n = points.len();
    if n < 3 {
        return Err(Error::RegressionDegenerate(format!(
            "need at least 3 points, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx.is_nan() || sxx <= 1e-14 * (1.0 + mx * mx) {
        return Err(Error::RegressionDegenerate(
            "abscissae are collinear".into(),
        ));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let s2 = rss / (nf - 2.0);
    let se = (s2 / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    Ok(Regression {
        slope,
        intercept,
        slope_stderr: se,
        interval: (slope - t * se, slope + t * se),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobiPolicy {
    /// Use `fixed_params` (broadcast if a single pair is given).
    Fixed,
    /// First dimension `(-1/2, -1/2)`, the others uniform on `[-1/2, 1/2]`.
    Random,
}

fn default_n_grid() -> Vec<usize> {
    (1..=15).map(|k| 10 * k).collect()
}

fn default_safety() -> f64 {
    1.2
}

fn default_max_rejections() -> u64 {
    10_000_000
}

fn default_epsilon() -> f64 {
    0.05
}

fn default_ks_alpha() -> f64 {
    0.05
}

fn default_n_repeat() -> usize {
    100
}

fn default_policy() -> JacobiPolicy {
    JacobiPolicy::Random
}

fn default_strategy() -> BoundStrategy {
    BoundStrategy::EmpiricalScan
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dims: Vec<usize>,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_n_repeat")]
    pub n_repeat: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_policy")]
    pub jacobi_policy: JacobiPolicy,
    /// `[[alpha, beta], …]` for the fixed policy.
    #[serde(default)]
    pub fixed_params: Vec<[f64; 2]>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_ks_alpha")]
    pub ks_alpha: f64,
    #[serde(default = "default_safety")]
    pub safety_factor: f64,
    #[serde(default = "default_strategy")]
    pub bound_strategy: BoundStrategy,
    #[serde(default = "default_max_rejections")]
    pub max_rejection_iterations: u64,
    #[serde(default)]
    pub replicates_csv: Option<PathBuf>,
    #[serde(default)]
    pub summary_json: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dims: vec![1, 2],
            n_grid: default_n_grid(),
            n_repeat: default_n_repeat(),
            epsilon: default_epsilon(),
            jacobi_policy: default_policy(),
            fixed_params: Vec::new(),
            seed: 0,
            ks_alpha: default_ks_alpha(),
            safety_factor: default_safety(),
            bound_strategy: default_strategy(),
            max_rejection_iterations: default_max_rejections(),
            replicates_csv: None,
            summary_json: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dims.is_empty() || self.dims.contains(&0) {
            return bad("dims must be a non-empty list of positive integers".into());
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return bad("n_grid must be a non-empty list of positive integers".into());
        }
        if self.n_repeat < 2 {
            return bad(format!("n_repeat must be >= 2, got {}", self.n_repeat));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.ks_alpha > 0.0 && self.ks_alpha < 1.0) {
            return bad(format!(
                "ks_alpha must lie in (0, 1), got {}",
                self.ks_alpha
            ));
        }
        if self.jacobi_policy == JacobiPolicy::Fixed {
            for p in &self.fixed_params {
                JacobiParams::new(p[0], p[1]).map_err(|e| Error::Config(e.to_string()))?;
            }
            if self.fixed_params.len() > 1
                && self.dims.iter().any(|&d| d != self.fixed_params.len())
            {
                return bad("fixed_params must hold one pair or one pair per dimension".into());
            }
        }
        self.sampler_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            bound_strategy: self.bound_strategy,
            safety_factor: self.safety_factor,
            max_rejection_iterations: self.max_rejection_iterations,
            rng_seed: self.seed,
        }
    }

    /// The reference measure for dimension `d`. Random parameters are drawn
    /// once per `d` from a dedicated stream.
    pub fn measure_for(&self, d: usize) -> Result<ProductMeasure> {
        let params: Vec<JacobiParams> = match self.jacobi_policy {
            JacobiPolicy::Fixed => match self.fixed_params.as_slice() {
                [] => vec![JacobiParams::equilibrium(); d],
                [p] => vec![JacobiParams::new(p[0], p[1])?; d],
                ps => ps
                    .iter()
                    .map(|p| JacobiParams::new(p[0], p[1]))
                    .collect::<Result<_>>()?,
            },
            JacobiPolicy::Random => {
                let mut rng = stream_rng(self.seed, stream_id(&[PARAM_STREAM, d as u64]));
                let mut ps = vec![JacobiParams::equilibrium()];
                for _ in 1..d {
                    ps.push(JacobiParams::new(
                        rng.gen_range(-0.5..=0.5),
                        rng.gen_range(-0.5..=0.5),
                    )?);
                }
                ps
            }
        };
        ProductMeasure::new(&params)
    }
}

const PARAM_STREAM: u64 = 0x5041_5241_4D53;

/// Stream id of replicate `r` in cell `(d, N)`.
pub fn replicate_stream(d: usize, n: usize, r: usize) -> u64 {
    stream_id(&[d as u64, n as u64, r as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: usize,
    pub estimates: Vec<f64>,
    pub streams: Vec<u64>,
    pub mean: f64,
    pub variance: f64,
    pub ks_p: Option<f64>,
    pub retained: bool,
    pub rejection_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionResult {
    pub d: usize,
    pub params: Vec<JacobiParams>,
    pub truth: f64,
    pub cells: Vec<CellResult>,
    pub regression: Option<Regression>,
    pub regression_error: Option<String>,
    pub theoretical_slope: f64,
    pub contains_theoretical: Option<bool>,
}

impl DimensionResult {
    pub fn retained_n(&self) -> Vec<usize> {
        self.cells
            .iter()
            .filter(|c| c.retained)
            .map(|c| c.n)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub dims: Vec<DimensionResult>,
}

impl ExperimentResult {
    /// Error if any dimension ended without a regression.
    pub fn check(&self) -> Result<()> {
        match self
            .dims
            .iter()
            .find_map(|d| d.regression_error.as_ref().map(|e| (d.d, e)))
        {
            Some((d, e)) => Err(Error::RegressionDegenerate(format!("d = {d}: {e}"))),
            None => Ok(()),
        }
    }

    /// `{d: {slopes, interval, theoretical, retained_N, ks_p: {N: p}, …}}`.
    pub fn summary_json(&self) -> serde_json::Value {
        let mut top = serde_json::Map::new();
        for dim in &self.dims {
            let ks: serde_json::Map<String, serde_json::Value> = dim
                .cells
                .iter()
                .map(|c| (c.n.to_string(), serde_json::json!(c.ks_p)))
                .collect();
            let variances: serde_json::Map<String, serde_json::Value> = dim
                .cells
                .iter()
                .map(|c| (c.n.to_string(), serde_json::json!(c.variance)))
                .collect();
            let reg = dim.regression;
            top.insert(
                dim.d.to_string(),
                serde_json::json!({
                    "slopes": reg.map(|r| r.slope),
                    "intercept": reg.map(|r| r.intercept),
                    "interval": reg.map(|r| [r.interval.0, r.interval.1]),
                    "interval_kind": "95% CI (OLS)",
                    "theoretical": dim.theoretical_slope,
                    "contains_theoretical": dim.contains_theoretical,
                    "retained_N": dim.retained_n(),
                    "ks_p": ks,
                    "variance": variances,
                    "truth": dim.truth,
                    "params": dim.params.iter().map(|p| [p.alpha, p.beta]).collect::<Vec<_>>(),
                    "error": dim.regression_error,
                }),
            );
        }
        serde_json::Value::Object(top)
    }

    /// Replicates CSV: `d,N,replicate,estimate,seed_stream_id`.
    pub fn write_replicates_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        out.write_record(["d", "N", "replicate", "estimate", "seed_stream_id"])
            .map_err(csv_err)?;
        for dim in &self.dims {
            for cell in &dim.cells {
                for (r, (e, s)) in cell.estimates.iter().zip(&cell.streams).enumerate() {
                    out.write_record(&[
                        dim.d.to_string(),
                        cell.n.to_string(),
                        r.to_string(),
                        format!("{e:e}"),
                        s.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Thread pool honouring `DPPMC_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("DPPMC_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| {
            Error::Config(format!(
                "DPPMC_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
        if n == 0 {
            return Err(Error::Config("DPPMC_THREADS must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))
}

/// Draw `n_repeat` weighted samples for one `(d, N)` and estimate the bump.
pub fn run_cell(
    config: &ExperimentConfig,
    measure: &ProductMeasure,
    n: usize,
) -> Result<CellResult> {
    let d = measure.dim();
    let kernel = CDKernel::new(measure.clone(), n)?;
    let sampler = Sampler::new(&kernel, config.sampler_config())?;
    let f = Bump {
        d,
        epsilon: config.epsilon,
    };
    let streams: Vec<u64> = (0..config.n_repeat)
        .map(|r| replicate_stream(d, n, r))
        .collect();
    let estimates = streams
        .par_iter()
        .map(|&s| {
            let sample = sampler.sample_stream(s)?;
            Ok(estimate(&f, &sample)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, variance) = mean_and_variance(&estimates);
    let ks_p = ks_normality_p(&estimates);
    let retained = ks_p.is_some_and(|p| p > config.ks_alpha) && variance > 0.0;
    Ok(CellResult {
        n,
        estimates,
        streams,
        mean,
        variance,
        ks_p,
        retained,
        rejection_bound: sampler.bound(),
    })
}

pub fn run_dimension(config: &ExperimentConfig, d: usize) -> Result<DimensionResult> {
    let measure = config.measure_for(d)?;
    let truth = bump_integral(&measure, config.epsilon)?;
    let mut cells = Vec::with_capacity(config.n_grid.len());
    for &n in &config.n_grid {
        log::info!("d = {d}, N = {n}: drawing {} replicates", config.n_repeat);
        cells.push(run_cell(config, &measure, n)?);
    }
    let points: Vec<(f64, f64)> = cells
        .iter()
        .filter(|c| c.retained)
        .map(|c| ((c.n as f64).ln(), c.variance.ln()))
        .collect();
    let theoretical_slope = -1.0 - 1.0 / d as f64;
    let (regression, regression_error) = match loglog_regression(&points) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(DimensionResult {
        d,
        params: measure.params(),
        truth,
        cells,
        contains_theoretical: regression
            .map(|r| r.interval.0 <= theoretical_slope && theoretical_slope <= r.interval.1),
        regression,
        regression_error,
        theoretical_slope,
    })
}

/// Run every dimension of the experiment. Dimensions whose regression is
/// degenerate are kept with `regression_error` set; see
/// [`ExperimentResult::check`].
pub fn run_variance_decay(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let pool = thread_pool()?;
    pool.install(|| {
        let dims = config
            .dims
            .iter()
            .map(|&d| run_dimension(config, d))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExperimentResult {
            config: config.clone(),
            dims,
        })
    })
}
