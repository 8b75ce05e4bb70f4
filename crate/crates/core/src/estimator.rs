//! The DPP quadrature estimator `Σ_i f(x_i) / K_N(x_i, x_i)` and its
//! importance-sampling variant.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::ProductMeasure;
use crate::sampler::WeightedSample;

/// A real function on `[-1, 1]^d`.
pub trait Integrand: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64]) -> f64;

    /// `ε` such that `f` vanishes whenever some `|x_j| > 1 - ε`.
    fn support_margin(&self) -> f64 {
        0.0
    }

    /// Analytic gradient, when known.
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Closure-backed integrand.
pub struct FnIntegrand<F> {
    d: usize,
    margin: f64,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnIntegrand<F> {
    pub fn new(d: usize, f: F) -> Self {
        FnIntegrand { d, margin: 0.0, f }
    }

    pub fn with_margin(d: usize, margin: f64, f: F) -> Self {
        FnIntegrand { d, margin, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Integrand for FnIntegrand<F> {
    fn dim(&self) -> usize {
        self.d
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn support_margin(&self) -> f64 {
        self.margin
    }
}

/// Draw `trials` points uniformly in the boundary shell `{x : max_j |x_j| > 1 - ε}`
/// and return the first one where `f` does not vanish.
pub fn support_violation<R: Rng + ?Sized>(
    f: &dyn Integrand,
    rng: &mut R,
    trials: usize,
) -> Option<Vec<f64>> {
    let eps = f.support_margin();
    if eps <= 0.0 {
        return None;
    }
    let d = f.dim();
    for _ in 0..trials {
        let mut x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let j = rng.gen_range(0..d);
        let t = 1.0 - eps * rng.gen::<f64>();
        x[j] = if rng.gen::<bool>() { t } else { -t };
        if x[j].abs() > 1.0 - eps && f.eval(&x) != 0.0 {
            return Some(x);
        }
    }
    None
}

/// Neumaier's variant of compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        iter.into_iter().for_each(|v| s.add(v));
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub n: usize,
    pub seed: u64,
    pub stream: u64,
    pub measure_id: String,
}

fn checked_eval(f: &dyn Integrand, x: &[f64]) -> Result<f64> {
    let v = f.eval(x);
    if !v.is_finite() {
        return Err(Error::Evaluation {
            point: x.to_vec(),
            value: v,
        });
    }
    Ok(v)
}

fn wrap(value: f64, sample: &WeightedSample) -> Estimate {
    Estimate {
        value,
        n: sample.len(),
        seed: sample.seed,
        stream: sample.stream,
        measure_id: sample.measure_id.clone(),
    }
}

/// `Σ_i f(x_i) w_i`, an unbiased estimate of `∫ f dμ`.
pub fn estimate(f: &dyn Integrand, sample: &WeightedSample) -> Result<Estimate> {
    let mut acc = CompensatedSum::default();
    for (x, &w) in sample.points.iter().zip(&sample.weights) {
        acc.add(checked_eval(f, x)? * w);
    }
    Ok(wrap(acc.value(), sample))
}

/// `Σ_i f(x_i) w_i ω(x_i) / q(x_i)`, an unbiased estimate of `∫ f ω dx`
/// when the sample comes from the OP Ensemble of `q(x) dx`.
pub fn importance_estimate(
    f: &dyn Integrand,
    target_density: &dyn Fn(&[f64]) -> f64,
    proposal: &ProductMeasure,
    sample: &WeightedSample,
) -> Result<Estimate> {
    let mut acc = CompensatedSum::default();
    for (x, &w) in sample.points.iter().zip(&sample.weights) {
        let fx = checked_eval(f, x)?;
        let omega = target_density(x);
        let q = proposal.density(x);
        if q == 0.0 {
            if fx * omega != 0.0 {
                return Err(Error::InvalidProposal { point: x.clone() });
            }
            continue;
        }
        let ratio = if omega == q { 1.0 } else { omega / q };
        acc.add(fx * w * ratio);
    }
    Ok(wrap(acc.value(), sample))
}
