//! Univariate orthonormal polynomials on `[-1, 1]` given by a three-term
//! recurrence
//!
//! ```text
//! x φ_k(x) = a_k φ_{k+1}(x) + b_k φ_k(x) + a_{k-1} φ_{k-1}(x),   a_{-1} = 0.
//! ```
//!
//! Reference measures are always normalized to probability measures, so that
//! `φ_0 ≡ 1`. Jacobi coefficients come from their closed forms; Chebyshev
//! (first kind, normalized) and Legendre are the special cases
//! `α = β = -1/2` and `α = β = 0`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Exponents of the Jacobi weight `(1 - x)^alpha (1 + x)^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiParams {
    pub alpha: f64,
    pub beta: f64,
}

impl JacobiParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > -1.0 && beta > -1.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::ParameterDomain(format!(
                "Jacobi parameters must satisfy alpha > -1 and beta > -1, got ({alpha}, {beta})"
            )));
        }
        Ok(JacobiParams { alpha, beta })
    }

    /// The arcsine (equilibrium) measure `1 / (π √(1 - x²))`.
    pub const fn equilibrium() -> Self {
        JacobiParams {
            alpha: -0.5,
            beta: -0.5,
        }
    }

    pub const fn uniform() -> Self {
        JacobiParams {
            alpha: 0.0,
            beta: 0.0,
        }
    }

    pub fn is_equilibrium(&self) -> bool {
        self.alpha == -0.5 && self.beta == -0.5
    }

    /// `ln ∫_{-1}^{1} (1 - x)^α (1 + x)^β dx = ln(2^{α+β+1} B(α+1, β+1))`.
    pub fn log_normalization(&self) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        (a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
            - ln_gamma(a + b + 2.0)
    }
}

/// A Jacobi probability density on `[-1, 1]`, with its normalizing constant
/// cached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiDensity {
    pub params: JacobiParams,
    log_norm: f64,
}

impl JacobiDensity {
    pub fn new(params: JacobiParams) -> Self {
        JacobiDensity {
            params,
            log_norm: params.log_normalization(),
        }
    }

    /// `ω(x) = (1 - x)^α (1 + x)^β / c_{α,β}`; zero outside `[-1, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            return 0.0;
        }
        let JacobiParams { alpha, beta } = self.params;
        (1.0 - x).powf(alpha) * (1.0 + x).powf(beta) * (-self.log_norm).exp()
    }

    /// `ω(x) / ω_eq(x) = π √(1 - x²) ω(x)` at `x = cos θ`, evaluated with
    /// half-angle identities so that it stays accurate near the endpoints.
    pub fn equilibrium_ratio_theta(&self, theta: f64) -> f64 {
        let JacobiParams { alpha, beta } = self.params;
        let s = (0.5 * theta).sin().abs();
        let c = (0.5 * theta).cos().abs();
        let log_scale = (1.0 + alpha + beta) * std::f64::consts::LN_2 - self.log_norm;
        PI * log_scale.exp() * s.powf(2.0 * alpha + 1.0) * c.powf(2.0 * beta + 1.0)
    }

    /// `π √(1 - x²) ω(x)` for `x` in `[-1, 1]`.
    pub fn equilibrium_ratio(&self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            return 0.0;
        }
        self.equilibrium_ratio_theta(x.acos())
    }
}

/// The density of the arcsine law.
pub fn equilibrium_density(x: f64) -> f64 {
    if x <= -1.0 || x >= 1.0 {
        return if x.abs() == 1.0 { f64::INFINITY } else { 0.0 };
    }
    1.0 / (PI * (1.0 - x * x).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Jacobi(JacobiParams),
    ChebyshevT,
    Legendre,
    Custom,
}

impl Family {
    pub fn jacobi_params(&self) -> Option<JacobiParams> {
        match *self {
            Family::Jacobi(p) => Some(p),
            Family::ChebyshevT => Some(JacobiParams::equilibrium()),
            Family::Legendre => Some(JacobiParams::uniform()),
            Family::Custom => None,
        }
    }
}

/// Recurrence coefficients `(a_k, b_k)` for `0 <= k < len`.
///
/// A table of length `L` determines `φ_0, …, φ_{L-1}` (and `φ_L`, which is
/// never exposed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceTable {
    a: Vec<f64>,
    b: Vec<f64>,
    family: Family,
}

impl RecurrenceTable {
    /// Coefficients of the orthonormal polynomials of the normalized Jacobi
    /// measure. Dispatches to the exact Chebyshev and Legendre tables for the
    /// matching parameters.
    pub fn jacobi(params: JacobiParams, n_max: usize) -> Result<Self> {
        let params = JacobiParams::new(params.alpha, params.beta)?;
        if n_max == 0 {
            return Err(Error::Precondition("n_max must be at least 1".into()));
        }
        if params.is_equilibrium() {
            return Ok(Self::chebyshev(n_max));
        }
        if params == JacobiParams::uniform() {
            return Ok(Self::legendre(n_max));
        }
        let (al, be) = (params.alpha, params.beta);
        let mut a = Vec::with_capacity(n_max);
        let mut b = Vec::with_capacity(n_max);
        for k in 0..n_max {
            let (ak, bk) = jacobi_coefficients(al, be, k);
            a.push(ak);
            b.push(bk);
        }
        Ok(RecurrenceTable {
            a,
            b,
            family: Family::Jacobi(params),
        })
    }

    /// Normalized Chebyshev polynomials of the first kind,
    /// `T_0 = 1`, `T_k(cos θ) = √2 cos(kθ)`.
    pub fn chebyshev(n_max: usize) -> Self {
        let n_max = n_max.max(1);
        let mut a = vec![0.5; n_max];
        a[0] = FRAC_1_SQRT_2;
        RecurrenceTable {
            a,
            b: vec![0.0; n_max],
            family: Family::ChebyshevT,
        }
    }

    /// Orthonormal Legendre polynomials for `dx / 2`:
    /// `a_k = (k + 1) / √((2k + 1)(2k + 3))`.
    pub fn legendre(n_max: usize) -> Self {
        let n_max = n_max.max(1);
        let a = (0..n_max)
            .map(|k| {
                let k = k as f64;
                (k + 1.0) / ((2.0 * k + 1.0) * (2.0 * k + 3.0)).sqrt()
            })
            .collect();
        RecurrenceTable {
            a,
            b: vec![0.0; n_max],
            family: Family::Legendre,
        }
    }

    pub fn custom(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::Precondition(format!(
                "recurrence coefficient lengths must match and be non-zero (a: {}, b: {})",
                a.len(),
                b.len()
            )));
        }
        if let Some(k) = a.iter().position(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::ParameterDomain(format!("a_{k} must be positive")));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::ParameterDomain("b_k must be finite".into()));
        }
        Ok(RecurrenceTable {
            a,
            b,
            family: Family::Custom,
        })
    }

    /// Rebuild the same family with a different length. Custom tables can
    /// only be truncated.
    pub fn resized(&self, n_max: usize) -> Result<Self> {
        match self.family {
            Family::ChebyshevT => Ok(Self::chebyshev(n_max)),
            Family::Legendre => Ok(Self::legendre(n_max)),
            Family::Jacobi(p) => Self::jacobi(p, n_max),
            Family::Custom if n_max <= self.len() && n_max > 0 => {
                Self::custom(self.a[..n_max].to_vec(), self.b[..n_max].to_vec())
            }
            Family::Custom => Err(Error::Range {
                what: "custom recurrence",
                index: n_max,
                len: self.len(),
            }),
        }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Fill `out[k] = φ_k(x)` for `k < out.len()` by forward recurrence.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        if out.len() > self.len() {
            return Err(Error::Range {
                what: "polynomial degree",
                index: out.len() - 1,
                len: self.len(),
            });
        }
        self.eval_unchecked(x, out);
        Ok(())
    }

    pub(crate) fn eval_unchecked(&self, x: f64, out: &mut [f64]) {
        let n = out.len();
        if n == 0 {
            return;
        }
        out[0] = 1.0;
        if n == 1 {
            return;
        }
        out[1] = (x - self.b[0]) / self.a[0];
        for k in 1..n - 1 {
            out[k + 1] = ((x - self.b[k]) * out[k] - self.a[k - 1] * out[k - 1]) / self.a[k];
        }
    }

    /// `[φ_0(x), …, φ_{degree}(x)]`.
    pub fn eval_all(&self, x: f64, degree: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; degree + 1];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    pub fn eval_phi(&self, k: usize, x: f64) -> Result<f64> {
        Ok(self.eval_all(x, k)?[k])
    }

    /// `(sup_{k >= k_min} |a_k - 1/2|, sup_{k >= k_min} |b_k|)` over the
    /// stored coefficients.
    pub fn nevai_diagnostic(&self, k_min: usize) -> Result<(f64, f64)> {
        if k_min >= self.len() {
            return Err(Error::Range {
                what: "nevai k_min",
                index: k_min,
                len: self.len(),
            });
        }
        let da = self.a[k_min..]
            .iter()
            .fold(0.0f64, |m, &v| m.max((v - 0.5).abs()));
        let db = self.b[k_min..].iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        Ok((da, db))
    }

    /// Coefficients of `x^m φ_k` in the orthonormal basis, as a band
    /// `(offset, coeffs)` with `coeffs[i]` the coefficient of
    /// `φ_{offset + i}`. Requires `k + m < len`.
    pub fn x_power_expansion(&self, m: usize, k: usize) -> Result<(usize, Vec<f64>)> {
        if k + m >= self.len() {
            return Err(Error::Range {
                what: "recurrence for x^m φ_k",
                index: k + m,
                len: self.len(),
            });
        }
        let lo = k.saturating_sub(m);
        let width = k + m - lo + 1;
        let mut cur = vec![0.0; width];
        let mut next = vec![0.0; width];
        cur[k - lo] = 1.0;
        for _ in 0..m {
            next.iter_mut().for_each(|v| *v = 0.0);
            for (i, &c) in cur.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let j = lo + i;
                next[i] += self.b[j] * c;
                if i + 1 < width {
                    next[i + 1] += self.a[j] * c;
                }
                if j > 0 && i > 0 {
                    next[i - 1] += self.a[j - 1] * c;
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok((lo, cur))
    }

    /// `⟨x^m φ_k, φ_l⟩` in `L²(μ)`, exactly zero when `|k - l| > m`.
    pub fn inner_product_x_power(&self, m: usize, k: usize, l: usize) -> Result<f64> {
        let top = k.max(l) + m;
        if top >= self.len() {
            return Err(Error::Range {
                what: "recurrence for inner product",
                index: top,
                len: self.len(),
            });
        }
        if k.abs_diff(l) > m {
            return Ok(0.0);
        }
        let (lo, coeffs) = self.x_power_expansion(m, k)?;
        Ok(coeffs[l - lo])
    }
}

/// Orthonormal Jacobi coefficients `(a_k, b_k)`, with the `k = 0` terms in
/// simplified form so that `α + β ∈ {-1, 0}` does not divide by zero.
fn jacobi_coefficients(alpha: f64, beta: f64, k: usize) -> (f64, f64) {
    let s = alpha + beta;
    if k == 0 {
        let b0 = (beta - alpha) / (s + 2.0);
        let a0_sq = 4.0 * (alpha + 1.0) * (beta + 1.0) / ((s + 2.0).powi(2) * (s + 3.0));
        return (a0_sq.sqrt(), b0);
    }
    let k = k as f64;
    let t = 2.0 * k + s;
    let bk = (beta * beta - alpha * alpha) / (t * (t + 2.0));
    let num = 4.0 * (k + 1.0) * (k + 1.0 + alpha) * (k + 1.0 + beta) * (k + 1.0 + s);
    let den = (t + 1.0) * (t + 2.0).powi(2) * (t + 3.0);
    ((num / den).sqrt(), bk)
}
