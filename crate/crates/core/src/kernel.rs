//! Tensorized multivariate orthonormal polynomials and the
//! Christoffel-Darboux kernel `K_N(x, y) = Σ_{k<N} φ_k(x) φ_k(y)` of a
//! product Jacobi measure on `[-1, 1]^d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiindex::{MultiIndex, MultiIndexBasis};
use crate::orthopoly::{JacobiDensity, JacobiParams, RecurrenceTable};

/// A product of Jacobi probability measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductMeasure {
    marginals: Vec<JacobiDensity>,
}

impl ProductMeasure {
    pub fn new(params: &[JacobiParams]) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Precondition(
                "measure needs at least one dimension".into(),
            ));
        }
        let marginals = params
            .iter()
            .map(|p| JacobiParams::new(p.alpha, p.beta).map(JacobiDensity::new))
            .collect::<Result<_>>()?;
        Ok(ProductMeasure { marginals })
    }

    /// `μ_eq^{⊗d}`.
    pub fn equilibrium(d: usize) -> Result<Self> {
        Self::new(&vec![JacobiParams::equilibrium(); d])
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[JacobiDensity] {
        &self.marginals
    }

    pub fn params(&self) -> Vec<JacobiParams> {
        self.marginals.iter().map(|m| m.params).collect()
    }

    pub fn is_equilibrium(&self) -> bool {
        self.marginals.iter().all(|m| m.params.is_equilibrium())
    }

    /// Recurrence table of marginal `j` covering degrees `0..len`.
    pub fn table(&self, j: usize, len: usize) -> Result<RecurrenceTable> {
        RecurrenceTable::jacobi(self.marginals[j].params, len.max(1))
    }

    /// `ω(x) = Π_j ω_j(x_j)`.
    pub fn density(&self, x: &[f64]) -> f64 {
        self.marginals
            .iter()
            .zip(x)
            .map(|(m, &xj)| m.eval(xj))
            .product()
    }

    /// `ω(x) / ω_eq^{⊗d}(x)`.
    pub fn equilibrium_ratio(&self, x: &[f64]) -> f64 {
        self.marginals
            .iter()
            .zip(x)
            .map(|(m, &xj)| m.equilibrium_ratio(xj))
            .product()
    }

    /// Same as [`equilibrium_ratio`](Self::equilibrium_ratio) with the point
    /// given by angles `x_j = cos θ_j`.
    pub fn equilibrium_ratio_theta(&self, theta: &[f64]) -> f64 {
        self.marginals
            .iter()
            .zip(theta)
            .map(|(m, &t)| m.equilibrium_ratio_theta(t))
            .product()
    }

    /// Short identifier, e.g. `jacobi:-0.5,-0.5;0.1,0.2`.
    pub fn id(&self) -> String {
        let parts: Vec<String> = self
            .marginals
            .iter()
            .map(|m| format!("{},{}", m.params.alpha, m.params.beta))
            .collect();
        format!("jacobi:{}", parts.join(";"))
    }
}

/// `K_N` for a product measure, with the first `N` multi-indices and the
/// per-dimension recurrence tables frozen at construction.
#[derive(Debug, Clone)]
pub struct CDKernel {
    measure: ProductMeasure,
    n: usize,
    basis: MultiIndexBasis,
    /// `𝔟(k)_j` at `k * d + j`.
    indices: Vec<usize>,
    max_degree: Vec<usize>,
    tables: Vec<RecurrenceTable>,
    offsets: Vec<usize>,
}

impl CDKernel {
    pub fn new(measure: ProductMeasure, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Precondition("kernel needs N >= 1".into()));
        }
        let d = measure.dim();
        let basis = MultiIndexBasis::with_capacity(d, n)?;
        let first = basis.first(n);
        let mut max_degree = vec![0usize; d];
        let mut indices = Vec::with_capacity(n * d);
        for k in &first {
            for (j, &c) in k.components().iter().enumerate() {
                max_degree[j] = max_degree[j].max(c);
                indices.push(c);
            }
        }
        let tables = (0..d)
            .map(|j| measure.table(j, max_degree[j] + 1))
            .collect::<Result<Vec<_>>>()?;
        let mut offsets = Vec::with_capacity(d + 1);
        let mut acc = 0;
        for &m in &max_degree {
            offsets.push(acc);
            acc += m + 1;
        }
        offsets.push(acc);
        Ok(CDKernel {
            measure,
            n,
            basis,
            indices,
            max_degree,
            tables,
            offsets,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }

    pub fn measure(&self) -> &ProductMeasure {
        &self.measure
    }

    pub fn basis(&self) -> &MultiIndexBasis {
        &self.basis
    }

    /// Largest degree in dimension `j` among `𝔟(0), …, 𝔟(N-1)`.
    pub fn max_degree(&self) -> &[usize] {
        &self.max_degree
    }

    pub fn multi_index(&self, k: usize) -> &[usize] {
        let d = self.dim();
        &self.indices[k * d..(k + 1) * d]
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Length of the scratch buffer used by [`features_into`](Self::features_into).
    pub fn scratch_len(&self) -> usize {
        self.offsets[self.dim()]
    }

    /// `out[k] = φ_k(x)` for `k < N`. `scratch` must hold
    /// [`scratch_len`](Self::scratch_len) values.
    pub fn features_into(&self, x: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        let d = self.dim();
        for (j, &xj) in x.iter().enumerate().take(d) {
            let (lo, hi) = (self.offsets[j], self.offsets[j + 1]);
            self.tables[j].eval_unchecked(xj, &mut scratch[lo..hi]);
        }
        if d == 1 {
            out[..self.n].copy_from_slice(&scratch[..self.n]);
            return;
        }
        for (k, o) in out.iter_mut().enumerate().take(self.n) {
            let idx = &self.indices[k * d..(k + 1) * d];
            let mut v = 1.0;
            for j in 0..d {
                v *= scratch[self.offsets[j] + idx[j]];
            }
            *o = v;
        }
    }

    /// `(φ_0(x), …, φ_{N-1}(x))`.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut scratch = vec![0.0; self.scratch_len()];
        let mut out = vec![0.0; self.n];
        self.features_into(x, &mut scratch, &mut out);
        Ok(out)
    }

    /// `φ_k(x) = Π_j φ^{(j)}_{𝔟(k)_j}(x_j)`, for any flat index `k`.
    pub fn eval_multivariate_phi(&self, k: usize, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let idx: MultiIndex = self.basis.bijection(k);
        let mut v = 1.0;
        for (j, &deg) in idx.components().iter().enumerate() {
            let table = if deg < self.tables[j].len() {
                std::borrow::Cow::Borrowed(&self.tables[j])
            } else {
                std::borrow::Cow::Owned(self.measure.table(j, deg + 1)?)
            };
            v *= table.eval_phi(deg, x[j])?;
        }
        Ok(v)
    }

    pub fn eval_kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let fx = self.features(x)?;
        let fy = self.features(y)?;
        Ok(fx.iter().zip(&fy).map(|(a, b)| a * b).sum())
    }

    /// `K_N(x, x)`.
    pub fn diagonal(&self, x: &[f64]) -> Result<f64> {
        Ok(self.features(x)?.iter().map(|v| v * v).sum())
    }

    /// The quadrature weight `1 / K_N(x, x)`.
    pub fn leverage(&self, x: &[f64]) -> Result<f64> {
        let k = self.diagonal(x)?;
        if !k.is_finite() || k <= 0.0 {
            return Err(Error::DegeneratePoint {
                point: x.to_vec(),
                value: k,
            });
        }
        Ok(1.0 / k)
    }

    /// Univariate kernel `K_M^{(j)}(s, t)` of marginal `j`.
    pub fn univariate_kernel(&self, j: usize, m: usize, s: f64, t: f64) -> Result<f64> {
        let table = self.measure.table(j, m)?;
        let ps = table.eval_all(s, m - 1)?;
        let pt = table.eval_all(t, m - 1)?;
        Ok(ps.iter().zip(&pt).map(|(a, b)| a * b).sum())
    }

    /// `(K_{M^d}(x, y), Π_j K_M^{(j)}(x_j, y_j))`; requires `N = M^d`.
    pub fn product_identity_check(&self, m: usize, x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
        let d = self.dim();
        if m == 0 || m.checked_pow(d as u32) != Some(self.n) {
            return Err(Error::Precondition(format!(
                "product identity needs N = M^d (N = {}, M = {m}, d = {d})",
                self.n
            )));
        }
        self.check_point(y)?;
        let lhs = self.eval_kernel(x, y)?;
        let mut rhs = 1.0;
        for j in 0..d {
            rhs *= self.univariate_kernel(j, m, x[j], y[j])?;
        }
        Ok((lhs, rhs))
    }
}
