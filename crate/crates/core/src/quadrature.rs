//! Quadrature rules: Gauss rules built from a recurrence table
//! (Golub-Welsch), Gauss-Chebyshev nodes in the angle variable, tensor
//! products of 1-d rules, and a tanh-sinh rule for integrands that are only
//! smooth in the interior.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::orthopoly::RecurrenceTable;

/// Nodes and weights of a 1-d rule. Weights of Gauss rules sum to one
/// (probability reference measure).
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// The `n`-point Gauss rule of the measure whose orthonormal polynomials
/// `table` describes. Requires `table.len() >= n`.
pub fn gauss_rule(table: &RecurrenceTable, n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::Precondition(
            "Gauss rule needs at least one node".into(),
        ));
    }
    if table.len() < n {
        return Err(Error::Range {
            what: "recurrence for Gauss rule",
            index: n,
            len: table.len(),
        });
    }
    let mut diag = table.b()[..n].to_vec();
    let mut off = vec![0.0; n];
    off[..n - 1].copy_from_slice(&table.a()[..n - 1]);
    let mut first = vec![0.0; n];
    first[0] = 1.0;
    tridiagonal_ql(&mut diag, &mut off, &mut first)?;

    let mut pairs: Vec<(f64, f64)> = diag
        .into_iter()
        .zip(first)
        .map(|(x, v)| (x, v * v))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (nodes, weights) = pairs.into_iter().unzip();
    Ok(Rule { nodes, weights })
}

/// Implicit QL on a symmetric tridiagonal matrix. On exit `diag` holds the
/// eigenvalues and `first` the first components of the eigenvectors (if it
/// started as `e_0`).
fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64], first: &mut [f64]) -> Result<()> {
    let n = diag.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NumericalDegeneracy(
                    "tridiagonal eigenvalue iteration did not converge".into(),
                ));
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let z = first[i + 1];
                first[i + 1] = s * first[i] + c * z;
                first[i] = c * first[i] - s * z;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

/// Gauss-Chebyshev angles `θ_i = π (i + 1/2) / n`. With equal weights `1/n`
/// the rule integrates `g(cos θ)` against `μ_eq` exactly for polynomials of
/// degree `< 2n`.
pub fn chebyshev_angles(n: usize) -> Vec<f64> {
    (0..n).map(|i| PI * (i as f64 + 0.5) / n as f64).collect()
}

/// The Gauss rule of the arcsine measure.
pub fn gauss_chebyshev(n: usize) -> Rule {
    let nodes = chebyshev_angles(n).into_iter().map(f64::cos).collect();
    Rule {
        nodes,
        weights: vec![1.0 / n as f64; n],
    }
}

/// Tensor product of 1-d rules, visited point by point.
pub fn tensor_for_each<F: FnMut(&[f64], f64)>(rules: &[&Rule], mut f: F) {
    let d = rules.len();
    if d == 0 || rules.iter().any(|r| r.is_empty()) {
        return;
    }
    let mut idx = vec![0usize; d];
    let mut point: Vec<f64> = rules.iter().map(|r| r.nodes[0]).collect();
    loop {
        let w: f64 = rules.iter().zip(&idx).map(|(r, &i)| r.weights[i]).product();
        f(&point, w);
        let mut j = d;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < rules[j].len() {
                point[j] = rules[j].nodes[idx[j]];
                break;
            }
            idx[j] = 0;
            point[j] = rules[j].nodes[0];
        }
    }
}

pub fn tensor_integrate<F: FnMut(&[f64]) -> f64>(rules: &[&Rule], mut f: F) -> f64 {
    let mut acc = 0.0;
    tensor_for_each(rules, |x, w| acc += w * f(x));
    acc
}

/// Tanh-sinh integration of `f` over `[a, b]`, refining the step until two
/// successive levels agree to `tol` (relative to the running magnitude).
/// The integrand is never evaluated at the endpoints.
pub fn tanh_sinh<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let half = 0.5 * (b - a);
    let t_max = 4.0;
    let mut h = 0.5;
    let node = |t: f64| {
        let u = FRAC_PI_2 * t.sinh();
        let x = u.tanh();
        let w = FRAC_PI_2 * t.cosh() / u.cosh().powi(2);
        // distance to the nearer endpoint, computed without cancellation
        let gap = 1.0 / (u.abs().exp() * u.cosh());
        (x, gap, w)
    };
    let eval = |t: f64, f: &mut F| -> f64 {
        let (x, gap, w) = node(t);
        if gap <= 0.0 || w == 0.0 {
            return 0.0;
        }
        let y = if x >= 0.0 {
            b - half * gap
        } else {
            a + half * gap
        };
        if y <= a || y >= b {
            return 0.0;
        }
        w * f(y)
    };

    let mut sum = eval(0.0, &mut f);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        let t = k as f64 * h;
        sum += eval(t, &mut f) + eval(-t, &mut f);
        k += 1;
    }
    let mut estimate = half * h * sum;
    for _ in 0..10 {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= t_max {
            let t = k as f64 * h;
            sum += eval(t, &mut f) + eval(-t, &mut f);
            k += 2;
        }
        let next = half * h * sum;
        if !next.is_finite() {
            return Err(Error::NumericalDegeneracy(
                "non-finite tanh-sinh estimate".into(),
            ));
        }
        if (next - estimate).abs() <= tol * next.abs().max(1e-300) {
            return Ok(next);
        }
        estimate = next;
    }
    Ok(estimate)
}
