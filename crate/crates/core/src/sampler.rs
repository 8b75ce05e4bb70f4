//! Exact sampling of the multivariate OP Ensemble by the chain rule.
//!
//! Step `i` draws `x_i` from the density
//!
//! ```text
//! (K_N(x, x) - k(x)^T K^{-1} k(x)) ω(x) / (N - i + 1)
//! ```
//!
//! where `k(x) = (K_N(x_1, x), …, K_N(x_{i-1}, x))` and `K` is the Gram
//! matrix of the accepted points. Each step is a rejection sampler with the
//! product arcsine proposal `ω_eq^{⊗d}`: since the Schur complement never
//! exceeds `K_N(x, x)`, a single `B >= sup K_N(x, x) ω(x) / ω_eq(x)`
//! dominates every step, and a proposal is accepted with probability
//! `schur(x) ω(x) / (ω_eq(x) B)`.

use std::f64::consts::{E, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::CDKernel;
use crate::orthopoly::JacobiDensity;
use crate::rng::{stream_rng, StreamRng};

/// Schur complements in `[-CLAMP_TOL · K_N(x,x), 0)` are rounded to zero.
const CLAMP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundStrategy {
    /// Closed-form per-polynomial bounds; Jacobi with `|α|, |β| <= 1/2` only.
    Analytic,
    /// Dense scan in the angle variable, times the safety factor.
    EmpiricalScan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub bound_strategy: BoundStrategy,
    pub safety_factor: f64,
    pub max_rejection_iterations: u64,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            bound_strategy: BoundStrategy::EmpiricalScan,
            safety_factor: 1.2,
            max_rejection_iterations: 10_000_000,
            rng_seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.safety_factor.is_finite() || self.safety_factor < 1.0 {
            return Err(Error::ParameterDomain(format!(
                "safety_factor must be >= 1, got {}",
                self.safety_factor
            )));
        }
        if self.max_rejection_iterations == 0 {
            return Err(Error::ParameterDomain(
                "max_rejection_iterations must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Nodes and weights `1 / K_N(x_i, x_i)` of one DPP draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Proposals made at each chain step (the last one accepted).
    pub proposals: Vec<u64>,
    pub seed: u64,
    pub stream: u64,
    pub measure_id: String,
}

impl WeightedSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn rejections(&self) -> Vec<u64> {
        self.proposals.iter().map(|p| p - 1).collect()
    }
}

/// Accepted prefix of a chain together with the Cholesky factor of its Gram
/// matrix.
#[derive(Debug, Clone)]
pub struct ChainState {
    n: usize,
    points: Vec<Vec<f64>>,
    /// Feature vectors `Φ(x_l)`, `l`-th at `l * N`.
    features: Vec<f64>,
    /// Lower-triangular factor, row `l` at `l (l + 1) / 2`.
    chol: Vec<f64>,
}

/// Per-proposal buffers, reused across a whole chain.
#[derive(Debug, Clone)]
struct Workspace {
    scratch: Vec<f64>,
    phi: Vec<f64>,
    solve: Vec<f64>,
}

impl Workspace {
    fn new(kernel: &CDKernel) -> Self {
        Workspace {
            scratch: vec![0.0; kernel.scratch_len()],
            phi: vec![0.0; kernel.n()],
            solve: vec![0.0; kernel.n()],
        }
    }
}

impl ChainState {
    pub fn new(kernel: &CDKernel) -> Self {
        let n = kernel.n();
        ChainState {
            n,
            points: Vec::with_capacity(n),
            features: Vec::with_capacity(n * n),
            chol: Vec::with_capacity(n * (n + 1) / 2),
        }
    }

    /// Number of accepted points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// `K_N(x, x) - |L^{-1} k(x)|²` given `phi = Φ(x)`; leaves `L^{-1} k(x)`
    /// in `solve`. Not clamped.
    fn schur(&self, phi: &[f64], k_xx: f64, solve: &mut [f64]) -> f64 {
        let n = self.n;
        let mut acc = k_xx;
        for l in 0..self.len() {
            let fl = &self.features[l * n..(l + 1) * n];
            let k_l: f64 = fl.iter().zip(phi).map(|(a, b)| a * b).sum();
            let row = &self.chol[l * (l + 1) / 2..(l + 1) * (l + 2) / 2];
            let partial: f64 = row[..l].iter().zip(&solve[..l]).map(|(a, b)| a * b).sum();
            let v = (k_l - partial) / row[l];
            solve[l] = v;
            acc -= v * v;
        }
        acc
    }

    fn clamp(value: f64, k_xx: f64) -> Result<f64> {
        if value >= 0.0 {
            Ok(value)
        } else if value >= -CLAMP_TOL * k_xx.max(1.0) {
            Ok(0.0)
        } else {
            Err(Error::NumericalDegeneracy(format!(
                "negative conditional density {value} (K_N(x,x) = {k_xx}); Gram matrix is ill-conditioned"
            )))
        }
    }

    fn push(&mut self, x: &[f64], phi: &[f64], solve: &[f64], schur: f64) -> Result<()> {
        let k_xx: f64 = phi.iter().map(|v| v * v).sum();
        if schur.is_nan() || schur <= CLAMP_TOL * k_xx.max(1.0) {
            return Err(Error::NumericalDegeneracy(format!(
                "Cholesky update failed at step {} (pivot {schur})",
                self.len() + 1
            )));
        }
        let l = self.len();
        self.chol.extend_from_slice(&solve[..l]);
        self.chol.push(schur.sqrt());
        self.features.extend_from_slice(phi);
        self.points.push(x.to_vec());
        Ok(())
    }

    /// Append `x` to the prefix, as if it had been accepted.
    pub fn accept(&mut self, kernel: &CDKernel, x: &[f64]) -> Result<()> {
        if self.len() >= self.n {
            return Err(Error::Precondition("chain already holds N points".into()));
        }
        let mut ws = Workspace::new(kernel);
        kernel.features_into(x, &mut ws.scratch, &mut ws.phi);
        let k_xx: f64 = ws.phi.iter().map(|v| v * v).sum();
        let s = self.schur(&ws.phi, k_xx, &mut ws.solve);
        self.push(x, &ws.phi, &ws.solve, s)
    }
}

/// `‖P_{H_{i-1}} K_N(x, ·)‖²`, the unnormalized conditional density of the
/// next point with respect to the reference measure.
pub fn conditional_unnormalized_density(
    state: &ChainState,
    kernel: &CDKernel,
    x: &[f64],
) -> Result<f64> {
    if x.len() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            found: x.len(),
        });
    }
    let mut ws = Workspace::new(kernel);
    kernel.features_into(x, &mut ws.scratch, &mut ws.phi);
    let k_xx: f64 = ws.phi.iter().map(|v| v * v).sum();
    let s = state.schur(&ws.phi, k_xx, &mut ws.solve);
    ChainState::clamp(s, k_xx)
}

/// A draw from `ω_eq^{⊗d}`: `x_j = cos(π U_j)`.
pub fn sample_equilibrium_point<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| (PI * rng.gen::<f64>()).cos()).collect()
}

/// Analytic bound on `π √(1 - t²) ω(t) φ_k(t)²` valid for every `k`, when
/// `|α|, |β| <= 1/2`. Chebyshev is exact (`1` for `k = 0`, `2` otherwise);
/// otherwise the Erdélyi-Magnus-Nevai constant `2e (2 + √(α² + β²))`.
fn analytic_constant(density: &JacobiDensity, k: usize) -> Option<f64> {
    let p = density.params;
    if p.is_equilibrium() {
        return Some(if k == 0 { 1.0 } else { 2.0 });
    }
    if p.alpha.abs() <= 0.5 && p.beta.abs() <= 0.5 {
        Some(2.0 * E * (2.0 + p.alpha.hypot(p.beta)))
    } else {
        None
    }
}

/// Angles for the bound scan: a uniform grid plus geometric refinement toward
/// both endpoints, endpoints included.
fn scan_angles(max_degree: usize) -> Vec<f64> {
    let g = (64 * (max_degree + 1)).max(4096);
    let mut out: Vec<f64> = (0..=g).map(|i| PI * i as f64 / g as f64).collect();
    let mut h = PI / g as f64;
    while h > 1e-12 {
        h *= 0.5;
        out.push(h);
        out.push(PI - h);
    }
    out
}

/// Per-dimension scan results: `sup_t g_k(t)` for each degree, and
/// `sup_t Σ_{k <= deg} g_k(t)`.
fn scan_dimension(kernel: &CDKernel, j: usize) -> Result<(Vec<f64>, f64)> {
    let deg = kernel.max_degree()[j];
    let table = kernel.measure().table(j, deg + 1)?;
    let density = &kernel.measure().marginals()[j];
    let mut per_degree = vec![0.0f64; deg + 1];
    let mut summed = 0.0f64;
    let mut phi = vec![0.0; deg + 1];
    for theta in scan_angles(deg) {
        let rho = density.equilibrium_ratio_theta(theta);
        if !rho.is_finite() {
            return Err(Error::BoundUnavailable(format!(
                "ω/ω_eq is unbounded for {:?}; the arcsine proposal cannot dominate it",
                density.params
            )));
        }
        table.eval_into(theta.cos(), &mut phi)?;
        let mut s = 0.0;
        for (k, v) in phi.iter().enumerate() {
            let g = rho * v * v;
            per_degree[k] = per_degree[k].max(g);
            s += g;
        }
        summed = summed.max(s);
    }
    Ok((per_degree, summed))
}

/// `B >= sup_x K_N(x, x) ω(x) / ω_eq^{⊗d}(x)`.
pub fn rejection_bound(kernel: &CDKernel, config: &SamplerConfig) -> Result<f64> {
    config.validate()?;
    let d = kernel.dim();
    let marginals = kernel.measure().marginals();
    let analytic_ok = marginals.iter().all(|m| analytic_constant(m, 1).is_some());

    let per_dim: Vec<Vec<f64>> = match config.bound_strategy {
        BoundStrategy::Analytic if analytic_ok => (0..d)
            .map(|j| {
                (0..=kernel.max_degree()[j])
                    .map(|k| analytic_constant(&marginals[j], k).unwrap_or(f64::INFINITY))
                    .collect()
            })
            .collect(),
        strategy => {
            if strategy == BoundStrategy::Analytic {
                log::warn!(
                    "analytic rejection bound needs |alpha|, |beta| <= 1/2; falling back to a scan"
                );
            }
            let mut per_dim = Vec::with_capacity(d);
            let mut product_of_sums = 1.0;
            for j in 0..d {
                let (sups, summed) = scan_dimension(kernel, j)?;
                per_dim.push(sups);
                product_of_sums *= summed;
            }
            let sum_of_products = sum_over_indices(kernel, &per_dim);
            return Ok(config.safety_factor * sum_of_products.min(product_of_sums));
        }
    };
    Ok(sum_over_indices(kernel, &per_dim))
}

fn sum_over_indices(kernel: &CDKernel, per_dim: &[Vec<f64>]) -> f64 {
    (0..kernel.n())
        .map(|k| {
            kernel
                .multi_index(k)
                .iter()
                .enumerate()
                .map(|(j, &deg)| per_dim[j][deg])
                .product::<f64>()
        })
        .sum()
}

/// A kernel paired with its rejection bound, ready to draw many samples.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    kernel: &'a CDKernel,
    bound: f64,
    config: SamplerConfig,
}

impl<'a> Sampler<'a> {
    pub fn new(kernel: &'a CDKernel, config: SamplerConfig) -> Result<Self> {
        let bound = rejection_bound(kernel, &config)?;
        Self::with_bound(kernel, config, bound)
    }

    pub fn with_bound(kernel: &'a CDKernel, config: SamplerConfig, bound: f64) -> Result<Self> {
        config.validate()?;
        if !bound.is_finite() || bound <= 0.0 {
            return Err(Error::BoundUnavailable(format!("invalid bound {bound}")));
        }
        Ok(Sampler {
            kernel,
            bound,
            config,
        })
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn kernel(&self) -> &CDKernel {
        self.kernel
    }

    /// Draw from stream `stream` of the configured seed.
    pub fn sample_stream(&self, stream: u64) -> Result<WeightedSample> {
        let mut rng = stream_rng(self.config.rng_seed, stream);
        let mut s = self.sample_with(&mut rng)?;
        s.seed = self.config.rng_seed;
        s.stream = stream;
        Ok(s)
    }

    pub fn sample_with(&self, rng: &mut StreamRng) -> Result<WeightedSample> {
        let kernel = self.kernel;
        let n = kernel.n();
        let d = kernel.dim();
        let measure = kernel.measure();
        let mut state = ChainState::new(kernel);
        let mut ws = Workspace::new(kernel);
        let mut theta = vec![0.0; d];
        let mut x = vec![0.0; d];
        let mut proposals = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);

        for step in 1..=n {
            let mut tries: u64 = 0;
            loop {
                if tries >= self.config.max_rejection_iterations {
                    return Err(Error::BoundTooTight {
                        step,
                        iterations: tries,
                    });
                }
                tries += 1;
                let mut on_edge = false;
                for j in 0..d {
                    let u: f64 = rng.gen();
                    theta[j] = PI * u;
                    x[j] = theta[j].cos();
                    on_edge |= u == 0.0 || x[j].abs() >= 1.0;
                }
                let u: f64 = rng.gen();
                if on_edge {
                    continue;
                }
                let rho = measure.equilibrium_ratio_theta(&theta);
                kernel.features_into(&x, &mut ws.scratch, &mut ws.phi);
                let k_xx: f64 = ws.phi.iter().map(|v| v * v).sum();
                let envelope = k_xx * rho / self.bound;
                if envelope > 1.0 {
                    return Err(Error::BoundViolation {
                        point: x.clone(),
                        ratio: envelope,
                    });
                }
                if u >= envelope {
                    continue;
                }
                let schur = ChainState::clamp(state.schur(&ws.phi, k_xx, &mut ws.solve), k_xx)?;
                if schur > 0.0 && u < schur * rho / self.bound {
                    state.push(&x, &ws.phi, &ws.solve, schur)?;
                    weights.push(1.0 / k_xx);
                    break;
                }
            }
            proposals.push(tries);
        }

        for a in 0..n {
            for b in 0..a {
                if state.points[a] == state.points[b] {
                    return Err(Error::NumericalDegeneracy(format!(
                        "duplicate nodes at steps {} and {}",
                        b + 1,
                        a + 1
                    )));
                }
            }
        }

        Ok(WeightedSample {
            points: state.points,
            weights,
            proposals,
            seed: self.config.rng_seed,
            stream: 0,
            measure_id: measure.id(),
        })
    }
}

/// One draw of the OP Ensemble, using stream 0 of `config.rng_seed`.
pub fn sample(kernel: &CDKernel, config: &SamplerConfig) -> Result<WeightedSample> {
    Sampler::new(kernel, *config)?.sample_stream(0)
}
