//! Limiting variances of DPP linear statistics and quadrature errors.
//!
//! With `f̂(k) = ∫ f Π_j T_{k_j}(x_j) μ_eq(dx)` the coefficients of `f` in the
//! tensor basis of normalized Chebyshev polynomials,
//!
//! ```text
//! σ_f²    = ½ Σ_k (k_1 + … + k_d) f̂(k)²
//! Ω_{f,ω}² = σ²_g   with g = f ω / ω_eq^{⊗d}
//! ```
//!
//! and `σ_f²` is dominated by the Dirichlet energy
//! `½ Σ_a ∫ (1 - x_a²) (∂_a f)² dμ_eq`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Integrand;
use crate::quadrature::{chebyshev_angles, gauss_chebyshev, tensor_integrate, Rule};

/// Dense table of `f̂(k)` for `k ∈ {0, …, cutoff}^d`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebCoeffs {
    pub d: usize,
    pub cutoff: usize,
    pub values: Vec<f64>,
    /// `Σ f̂(k)²` over the outermost shell `max_j k_j = cutoff`.
    pub tail_mass: f64,
}

impl ChebCoeffs {
    fn side(&self) -> usize {
        self.cutoff + 1
    }

    pub fn get(&self, k: &[usize]) -> f64 {
        if k.len() != self.d || k.iter().any(|&c| c > self.cutoff) {
            return 0.0;
        }
        let flat = k.iter().fold(0, |acc, &c| acc * self.side() + c);
        self.values[flat]
    }

    /// Iterate `(multi-index, coefficient)` over the stored table.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let side = self.side();
        let d = self.d;
        self.values.iter().enumerate().map(move |(flat, &v)| {
            let mut k = vec![0; d];
            let mut r = flat;
            for j in (0..d).rev() {
                k[j] = r % side;
                r /= side;
            }
            (k, v)
        })
    }

    /// `Σ_k f̂(k)²`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// A variance value with its truncation-tail estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSeries {
    pub value: f64,
    pub tail_bound: f64,
}

/// `T_k(cos θ)`.
fn cheb_t(k: usize, theta: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        SQRT_2 * (k as f64 * theta).cos()
    }
}

/// Coefficients of `g` sampled on the tensor Gauss-Chebyshev grid
/// (`values[i_0, …, i_{d-1}] = g(cos θ_{i_0}, …)`).
fn transform(grid: Vec<f64>, d: usize, nodes: usize, cutoff: usize) -> ChebCoeffs {
    let angles = chebyshev_angles(nodes);
    let side = cutoff + 1;
    // basis[k * nodes + i] = T_k(cos θ_i) / nodes
    let basis: Vec<f64> = (0..side)
        .flat_map(|k| angles.iter().map(move |&t| cheb_t(k, t) / nodes as f64))
        .collect();

    let mut shape = vec![nodes; d];
    let mut data = grid;
    for axis in 0..d {
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let len = shape[axis];
        let mut next = vec![0.0; outer * side * inner];
        for o in 0..outer {
            for k in 0..side {
                let b = &basis[k * nodes..(k + 1) * nodes];
                let dst = &mut next[(o * side + k) * inner..(o * side + k + 1) * inner];
                for (m, &bm) in b.iter().enumerate().take(len) {
                    let src = &data[(o * len + m) * inner..(o * len + m + 1) * inner];
                    for (t, s) in dst.iter_mut().zip(src) {
                        *t += bm * s;
                    }
                }
            }
        }
        shape[axis] = side;
        data = next;
    }

    let mut coeffs = ChebCoeffs {
        d,
        cutoff,
        values: data,
        tail_mass: 0.0,
    };
    coeffs.tail_mass = coeffs
        .iter()
        .filter(|(k, _)| k.contains(&cutoff))
        .map(|(_, v)| v * v)
        .sum();
    coeffs
}

fn node_count(cutoff: usize) -> usize {
    4 * (cutoff + 1)
}

/// Evaluate `g` on the tensor grid of `nodes` Gauss-Chebyshev angles.
fn sample_grid<G: FnMut(&[f64]) -> f64>(d: usize, nodes: usize, mut g: G) -> Vec<f64> {
    let xs: Vec<f64> = chebyshev_angles(nodes).into_iter().map(f64::cos).collect();
    let total = nodes.pow(d as u32);
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    let mut point: Vec<f64> = vec![xs[0]; d];
    for _ in 0..total {
        out.push(g(&point));
        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < nodes {
                point[j] = xs[idx[j]];
                break;
            }
            idx[j] = 0;
            point[j] = xs[0];
        }
    }
    out
}

/// `f̂(k)` for `max_j k_j <= cutoff`, by tensor Gauss-Chebyshev quadrature
/// with `4 (cutoff + 1)` nodes per dimension.
pub fn cheb_coeffs(f: &dyn Integrand, d: usize, cutoff: usize) -> Result<ChebCoeffs> {
    if cutoff == 0 {
        return Err(Error::Precondition("cutoff must be >= 1".into()));
    }
    if d != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: d,
        });
    }
    let nodes = node_count(cutoff);
    let grid = sample_grid(d, nodes, |x| f.eval(x));
    if let Some(v) = grid.iter().find(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            point: Vec::new(),
            value: *v,
        });
    }
    Ok(transform(grid, d, nodes, cutoff))
}

/// `σ_f² = ½ Σ (k_1 + … + k_d) f̂(k)²` over the stored coefficients, with
/// `tail_bound = tail_mass · cutoff · d`.
pub fn sigma_f_sq(coeffs: &ChebCoeffs) -> TruncatedSeries {
    let value = 0.5
        * coeffs
            .iter()
            .map(|(k, v)| k.iter().sum::<usize>() as f64 * v * v)
            .sum::<f64>();
    TruncatedSeries {
        value,
        tail_bound: coeffs.tail_mass * (coeffs.cutoff * coeffs.d) as f64,
    }
}

/// `Ω_{f,ω}²`, the limiting variance of `√(N^{1+1/d})` times the quadrature
/// error under the reference density `omega`.
pub fn omega_f_omega_sq(
    f: &dyn Integrand,
    omega: &dyn Fn(&[f64]) -> f64,
    d: usize,
    cutoff: usize,
) -> Result<TruncatedSeries> {
    if cutoff == 0 {
        return Err(Error::Precondition("cutoff must be >= 1".into()));
    }
    if d != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: d,
        });
    }
    let nodes = node_count(cutoff);
    let mut bad: Option<Vec<f64>> = None;
    let grid = sample_grid(d, nodes, |x| {
        let fx = f.eval(x);
        if fx == 0.0 {
            return 0.0;
        }
        let eq: f64 = x.iter().map(|&t| PI * (1.0 - t * t).sqrt()).product();
        let g = fx * omega(x) * eq;
        if !g.is_finite() && bad.is_none() {
            bad = Some(x.to_vec());
        }
        g
    });
    if let Some(x) = bad {
        return Err(Error::UnboundedComposite(format!(
            "f ω / ω_eq is not finite at {x:?}"
        )));
    }
    Ok(sigma_f_sq(&transform(grid, d, nodes, cutoff)))
}

/// Central difference step used when the integrand has no analytic gradient.
pub const FD_STEP: f64 = 1e-5;

fn gradient(f: &dyn Integrand, x: &[f64]) -> Vec<f64> {
    if let Some(g) = f.gradient(x) {
        return g;
    }
    let mut y = x.to_vec();
    (0..x.len())
        .map(|j| {
            y[j] = x[j] + FD_STEP;
            let up = f.eval(&y);
            y[j] = x[j] - FD_STEP;
            let down = f.eval(&y);
            y[j] = x[j];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `½ Σ_a ∫ (1 - x_a²) (∂_a f)² dμ_eq^{⊗d}` with an `order`-point
/// Gauss-Chebyshev rule per dimension.
pub fn dirichlet_bound(f: &dyn Integrand, d: usize, order: usize) -> Result<f64> {
    if order == 0 {
        return Err(Error::Precondition("quadrature order must be >= 1".into()));
    }
    if d != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: d,
        });
    }
    let rule: Rule = gauss_chebyshev(order);
    let rules: Vec<&Rule> = vec![&rule; d];
    let value = 0.5
        * tensor_integrate(&rules, |x| {
            gradient(f, x)
                .iter()
                .zip(x)
                .map(|(g, &t)| (1.0 - t * t) * g * g)
                .sum()
        });
    if !value.is_finite() {
        return Err(Error::Evaluation {
            point: Vec::new(),
            value,
        });
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::FnIntegrand;
    use approx::assert_abs_diff_eq;

    #[test]
    fn chebyshev_polynomial_has_unit_coefficient() {
        let f = FnIntegrand::new(1, |x: &[f64]| SQRT_2 * (3.0 * x[0].acos()).cos());
        let c = cheb_coeffs(&f, 1, 6).unwrap();
        for k in 0..=6 {
            let expected = if k == 3 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(c.get(&[k]), expected, epsilon = 1e-13);
        }
    }

    #[test]
    fn constant_and_linear() {
        let c = cheb_coeffs(&FnIntegrand::new(2, |_: &[f64]| 2.5), 2, 3).unwrap();
        assert_abs_diff_eq!(c.get(&[0, 0]), 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(c.energy(), 6.25, epsilon = 1e-12);
        assert_abs_diff_eq!(sigma_f_sq(&c).value, 0.0, epsilon = 1e-14);

        let lin = FnIntegrand::new(1, |x: &[f64]| x[0]);
        let c = cheb_coeffs(&lin, 1, 4).unwrap();
        assert_abs_diff_eq!(c.get(&[1]), 1.0 / SQRT_2, epsilon = 1e-14);
        assert_abs_diff_eq!(sigma_f_sq(&c).value, 0.25, epsilon = 1e-14);
        assert!(cheb_coeffs(&lin, 1, 0).is_err());
        assert!(cheb_coeffs(&lin, 2, 3).is_err());
    }

    #[test]
    fn sigma_of_t10() {
        let f = FnIntegrand::new(2, |x: &[f64]| SQRT_2 * x[0]);
        let s = sigma_f_sq(&cheb_coeffs(&f, 2, 3).unwrap());
        assert_abs_diff_eq!(s.value, 0.5, epsilon = 1e-13);
        assert!(s.tail_bound < 1e-20);
    }

    #[test]
    fn omega_reduces_to_sigma_for_equilibrium() {
        let f = FnIntegrand::new(1, |x: &[f64]| x[0]);
        let w = |x: &[f64]| 1.0 / (PI * (1.0 - x[0] * x[0]).sqrt());
        let o = omega_f_omega_sq(&f, &w, 1, 4).unwrap();
        assert_abs_diff_eq!(o.value, 0.25, epsilon = 1e-12);
        let zero = FnIntegrand::new(1, |_: &[f64]| 0.0);
        assert_eq!(omega_f_omega_sq(&zero, &w, 1, 4).unwrap().value, 0.0);
        let blow = |_: &[f64]| f64::INFINITY;
        assert!(matches!(
            omega_f_omega_sq(&f, &blow, 1, 4),
            Err(Error::UnboundedComposite(_))
        ));
    }

    #[test]
    fn dirichlet_examples() {
        let c = FnIntegrand::new(1, |_: &[f64]| 4.0);
        assert_eq!(dirichlet_bound(&c, 1, 8).unwrap(), 0.0);
        let x1 = FnIntegrand::new(2, |x: &[f64]| x[0]);
        assert_abs_diff_eq!(dirichlet_bound(&x1, 2, 8).unwrap(), 0.25, epsilon = 1e-9);
        let sq = FnIntegrand::new(1, |x: &[f64]| x[0] * x[0]);
        assert_abs_diff_eq!(dirichlet_bound(&sq, 1, 8).unwrap(), 0.25, epsilon = 1e-9);
        let s = sigma_f_sq(&cheb_coeffs(&sq, 1, 4).unwrap());
        assert_abs_diff_eq!(s.value, 0.125, epsilon = 1e-13);
    }
}
