//! Finite-N ground truths for linear statistics of the OP Ensemble.
//!
//! For polynomials `P, Q` the covariance of `Σ P(x_i)` and `Σ Q(x_i)` is
//!
//! ```text
//! Σ_{n<N} Σ_{m>=N} ⟨P φ_n, φ_m⟩ ⟨Q φ_n, φ_m⟩
//! ```
//!
//! and the inner sum is finite: `⟨x^a φ_n, φ_m⟩` vanishes as soon as
//! `|n_j - m_j| > a_j` in some coordinate. The variance of `Σ f(x_i)` is also
//! available as the double integral `½ ∬ (f(x) - f(y))² K_N(x, y)² dμ dμ`.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Integrand;
use crate::kernel::CDKernel;
use crate::multiindex::MultiIndex;
use crate::orthopoly::RecurrenceTable;
use crate::quadrature::{gauss_rule, tensor_for_each, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolyBasis {
    /// `Π_j x_j^{k_j}`
    Monomial,
    /// `Π_j T_{k_j}(x_j)`, normalized Chebyshev polynomials
    Chebyshev,
}

/// A multivariate polynomial with finitely many terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialStatistic {
    d: usize,
    basis: PolyBasis,
    terms: BTreeMap<Vec<usize>, f64>,
}

/// `T_k = Σ_m c_m x^m`.
fn chebyshev_to_monomial_1d(k: usize) -> Vec<f64> {
    // classical T_k: T_0 = 1, T_1 = x, T_{k+1} = 2x T_k - T_{k-1}
    let mut prev = vec![1.0];
    if k == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0];
    for _ in 1..k {
        let mut next = vec![0.0; cur.len() + 1];
        for (m, &c) in cur.iter().enumerate() {
            next[m + 1] += 2.0 * c;
        }
        for (m, &c) in prev.iter().enumerate() {
            next[m] -= c;
        }
        prev = cur;
        cur = next;
    }
    cur.iter().map(|c| c * SQRT_2).collect()
}

/// `x^m = Σ_k c_k T_k` (normalized `T_k`).
fn monomial_to_chebyshev_1d(m: usize) -> Vec<f64> {
    // repeated multiplication by x = T_1 / √2 using the product formula
    let mut cur = vec![1.0];
    for _ in 0..m {
        let mut next = vec![0.0; cur.len() + 1];
        for (k, &c) in cur.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (j, coef) in cheb_times_t1(k) {
                next[j] += c * coef * FRAC_1_SQRT_2;
            }
        }
        cur = next;
    }
    cur
}

/// `T_1 T_k` in the normalized basis.
fn cheb_times_t1(k: usize) -> Vec<(usize, f64)> {
    match k {
        0 => vec![(1, 1.0)],
        1 => vec![(2, FRAC_1_SQRT_2), (0, 1.0)],
        _ => vec![(k + 1, FRAC_1_SQRT_2), (k - 1, FRAC_1_SQRT_2)],
    }
}

/// `⟨T_k T_n, T_m⟩` in `L²(μ_eq)`:
/// `T_k T_n = T_{n+k}/√2 · 1{kn ≠ 0} + (1/√2)^{1{kn≠0} 1{n≠k}} T_{|n-k|}`.
pub fn chebyshev_triple(k: usize, n: usize, m: usize) -> f64 {
    if k == 0 {
        return if n == m { 1.0 } else { 0.0 };
    }
    if n == 0 {
        return if k == m { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    if n + k == m {
        v += FRAC_1_SQRT_2;
    }
    if n.abs_diff(k) == m {
        v += if n == k { 1.0 } else { FRAC_1_SQRT_2 };
    }
    v
}

impl PolynomialStatistic {
    fn build(d: usize, basis: PolyBasis, terms: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Precondition(
                "polynomial dimension must be >= 1".into(),
            ));
        }
        let mut map = BTreeMap::new();
        for (k, c) in terms {
            if k.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: k.len(),
                });
            }
            if c != 0.0 {
                *map.entry(k).or_insert(0.0) += c;
            }
        }
        map.retain(|_, c| *c != 0.0);
        Ok(PolynomialStatistic {
            d,
            basis,
            terms: map,
        })
    }

    pub fn monomial(d: usize, terms: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        Self::build(d, PolyBasis::Monomial, terms)
    }

    pub fn chebyshev(d: usize, terms: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        Self::build(d, PolyBasis::Chebyshev, terms)
    }

    /// The single normalized Chebyshev polynomial `T_k`.
    pub fn chebyshev_t(k: &MultiIndex) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(k.components().to_vec(), 1.0);
        PolynomialStatistic {
            d: k.dim(),
            basis: PolyBasis::Chebyshev,
            terms,
        }
    }

    pub fn constant(d: usize, c: f64) -> Self {
        Self::build(d, PolyBasis::Monomial, vec![(vec![0; d.max(1)], c)])
            .expect("dimension is positive")
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn basis(&self) -> PolyBasis {
        self.basis
    }

    pub fn terms(&self) -> &BTreeMap<Vec<usize>, f64> {
        &self.terms
    }

    /// Per-coordinate degree.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.d];
        for k in self.terms.keys() {
            for (j, &c) in k.iter().enumerate() {
                deg[j] = deg[j].max(c);
            }
        }
        deg
    }

    fn convert(&self, to: PolyBasis, expand: fn(usize) -> Vec<f64>) -> Self {
        let mut out: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        let mut cache: HashMap<usize, Vec<f64>> = HashMap::new();
        for (k, &c) in &self.terms {
            let factors: Vec<Vec<f64>> = k
                .iter()
                .map(|&kj| cache.entry(kj).or_insert_with(|| expand(kj)).clone())
                .collect();
            let mut idx = vec![0usize; self.d];
            'outer: loop {
                let coef: f64 = factors.iter().zip(&idx).map(|(f, &i)| f[i]).product();
                if coef != 0.0 {
                    *out.entry(idx.clone()).or_insert(0.0) += c * coef;
                }
                for j in (0..self.d).rev() {
                    idx[j] += 1;
                    if idx[j] < factors[j].len() {
                        continue 'outer;
                    }
                    idx[j] = 0;
                }
                break;
            }
        }
        out.retain(|_, c| *c != 0.0);
        PolynomialStatistic {
            d: self.d,
            basis: to,
            terms: out,
        }
    }

    pub fn to_monomial(&self) -> Self {
        match self.basis {
            PolyBasis::Monomial => self.clone(),
            PolyBasis::Chebyshev => self.convert(PolyBasis::Monomial, chebyshev_to_monomial_1d),
        }
    }

    pub fn to_chebyshev(&self) -> Self {
        match self.basis {
            PolyBasis::Chebyshev => self.clone(),
            PolyBasis::Monomial => self.convert(PolyBasis::Chebyshev, monomial_to_chebyshev_1d),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self.basis {
            PolyBasis::Monomial => self
                .terms
                .iter()
                .map(|(k, c)| {
                    c * k
                        .iter()
                        .zip(x)
                        .map(|(&e, &t)| t.powi(e as i32))
                        .product::<f64>()
                })
                .sum(),
            PolyBasis::Chebyshev => {
                let table =
                    RecurrenceTable::chebyshev(self.degrees().iter().max().unwrap_or(&0) + 1);
                let vals: Vec<Vec<f64>> = x
                    .iter()
                    .zip(self.degrees())
                    .map(|(&t, deg)| table.eval_all(t, deg).unwrap_or_default())
                    .collect();
                self.terms
                    .iter()
                    .map(|(k, c)| {
                        c * k
                            .iter()
                            .enumerate()
                            .map(|(j, &e)| vals[j][e])
                            .product::<f64>()
                    })
                    .sum()
            }
        }
    }

    fn monomial_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mono = self.to_monomial();
        (0..self.d)
            .map(|a| {
                mono.terms
                    .iter()
                    .filter(|(k, _)| k[a] > 0)
                    .map(|(k, c)| {
                        let mut v = c * k[a] as f64;
                        for (j, (&e, &t)) in k.iter().zip(x).enumerate() {
                            let p = if j == a { e - 1 } else { e };
                            v *= t.powi(p as i32);
                        }
                        v
                    })
                    .sum()
            })
            .collect()
    }
}

impl Integrand for PolynomialStatistic {
    fn dim(&self) -> usize {
        self.d
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.evaluate(x)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(self.monomial_gradient(x))
    }
}

/// `⟨x^p φ_ν, ·⟩` bands for one coordinate, for all `ν <= max_nu`, `p <= max_p`.
struct Bands {
    /// `[nu][p] -> (offset, coefficients)`
    data: Vec<Vec<(usize, Vec<f64>)>>,
}

impl Bands {
    fn new(table: &RecurrenceTable, max_nu: usize, max_p: usize) -> Result<Self> {
        let data = (0..=max_nu)
            .map(|nu| {
                (0..=max_p)
                    .map(|p| table.x_power_expansion(p, nu))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Bands { data })
    }

    fn get(&self, p: usize, nu: usize, mu: usize) -> f64 {
        let (lo, ref c) = self.data[nu][p];
        if mu < lo || mu - lo >= c.len() {
            0.0
        } else {
            c[mu - lo]
        }
    }
}

enum Route<'a> {
    Chebyshev(&'a PolynomialStatistic, &'a PolynomialStatistic),
    Generic {
        p: PolynomialStatistic,
        q: PolynomialStatistic,
        bands: Vec<Bands>,
    },
}

fn matrix_element(
    poly: &PolynomialStatistic,
    route_cheb: bool,
    bands: &[Bands],
    nu: &[usize],
    mu: &[usize],
) -> f64 {
    poly.terms
        .iter()
        .map(|(k, c)| {
            let mut v = *c;
            for j in 0..nu.len() {
                v *= if route_cheb {
                    chebyshev_triple(k[j], nu[j], mu[j])
                } else {
                    bands[j].get(k[j], nu[j], mu[j])
                };
                if v == 0.0 {
                    break;
                }
            }
            v
        })
        .sum()
}

/// `Cov[Σ P(x_i), Σ Q(x_i)]` for the OP Ensemble of `kernel`, exactly (up to
/// round-off). When both polynomials are given in the Chebyshev basis and
/// the measure is `μ_eq^{⊗d}`, inner products come from the Chebyshev
/// product formula; otherwise from the three-term recurrence.
pub fn cov_exact(
    p: &PolynomialStatistic,
    q: &PolynomialStatistic,
    kernel: &CDKernel,
) -> Result<f64> {
    let d = kernel.dim();
    for poly in [p, q] {
        if poly.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: poly.dim(),
            });
        }
    }
    let cheb = p.basis() == PolyBasis::Chebyshev
        && q.basis() == PolyBasis::Chebyshev
        && kernel.measure().is_equilibrium();
    let route = if cheb {
        Route::Chebyshev(p, q)
    } else {
        let pm = p.to_monomial();
        let qm = q.to_monomial();
        let spread: Vec<usize> = pm
            .degrees()
            .iter()
            .zip(qm.degrees())
            .map(|(&a, b)| a.max(b))
            .collect();
        let bands = (0..d)
            .map(|j| {
                let top = kernel.max_degree()[j];
                let table = kernel.measure().table(j, top + spread[j] + 1)?;
                Bands::new(&table, top, spread[j])
            })
            .collect::<Result<Vec<_>>>()?;
        Route::Generic {
            p: pm,
            q: qm,
            bands,
        }
    };
    let (pp, qq, bands, route_cheb): (&PolynomialStatistic, &PolynomialStatistic, &[Bands], bool) =
        match &route {
            Route::Chebyshev(p, q) => (p, q, &[], true),
            Route::Generic { p, q, bands } => (p, q, bands.as_slice(), false),
        };
    let spread: Vec<usize> = pp
        .degrees()
        .iter()
        .zip(qq.degrees())
        .map(|(&a, b)| a.max(b))
        .collect();

    let n = kernel.n();
    let basis = kernel.basis();
    let mut total = 0.0;
    let mut mu = vec![0usize; d];
    for flat in 0..n {
        let nu = kernel.multi_index(flat).to_vec();
        let lo: Vec<usize> = nu
            .iter()
            .zip(&spread)
            .map(|(&a, &s)| a.saturating_sub(s))
            .collect();
        let hi: Vec<usize> = nu.iter().zip(&spread).map(|(&a, &s)| a + s).collect();
        mu.copy_from_slice(&lo);
        'walk: loop {
            let rank = basis.bijection_inverse(&MultiIndex::from(mu.clone()))?;
            if rank >= n {
                let a = matrix_element(pp, route_cheb, bands, &nu, &mu);
                if a != 0.0 {
                    total += a * matrix_element(qq, route_cheb, bands, &nu, &mu);
                }
            }
            for j in (0..d).rev() {
                mu[j] += 1;
                if mu[j] <= hi[j] {
                    continue 'walk;
                }
                mu[j] = lo[j];
            }
            break;
        }
    }
    Ok(total)
}

/// `Var[Σ f(x_i)] = ½ ∬ (f(x) - f(y))² K_N(x, y)² μ(dx) μ(dy)` by tensor
/// Gauss quadrature of the reference measure, `order` nodes per dimension.
pub fn var_double_integral(f: &dyn Integrand, kernel: &CDKernel, order: usize) -> Result<f64> {
    let d = kernel.dim();
    if d > 2 {
        return Err(Error::UnsupportedDimension { d, max: 2 });
    }
    if f.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: f.dim(),
        });
    }
    let rules: Vec<Rule> = (0..d)
        .map(|j| gauss_rule(&kernel.measure().table(j, order)?, order))
        .collect::<Result<_>>()?;
    let refs: Vec<&Rule> = rules.iter().collect();
    let mut pts: Vec<(Vec<f64>, f64)> = Vec::new();
    tensor_for_each(&refs, |x, w| pts.push((x.to_vec(), w)));

    let n = kernel.n();
    let mut scratch = vec![0.0; kernel.scratch_len()];
    let mut feats = vec![0.0; pts.len() * n];
    let mut values = Vec::with_capacity(pts.len());
    for (i, (x, _)) in pts.iter().enumerate() {
        kernel.features_into(x, &mut scratch, &mut feats[i * n..(i + 1) * n]);
        values.push(f.eval(x));
    }
    let mut total = 0.0;
    for a in 0..pts.len() {
        let fa = &feats[a * n..(a + 1) * n];
        for b in 0..a {
            let fb = &feats[b * n..(b + 1) * n];
            let k: f64 = fa.iter().zip(fb).map(|(s, t)| s * t).sum();
            let diff = values[a] - values[b];
            total += pts[a].1 * pts[b].1 * diff * diff * k * k;
        }
    }
    // pairs were visited once each; the ½ cancels the symmetric double count
    Ok(total)
}

/// Limiting covariance of `Σ T_k(x_i)` and `Σ T_l(x_i)` divided by
/// `N^{1 - 1/d}`: `½ (k_1 + … + k_d)` if `k = l`, else 0.
pub fn cov_limit_cheby(k: &MultiIndex, l: &MultiIndex) -> f64 {
    if k == l {
        0.5 * k.total_degree() as f64
    } else {
        0.0
    }
}
