#![allow(dead_code)]

use rand::Rng;

use dppmc::oracle::PolynomialStatistic;

/// Random polynomial in the normalized Chebyshev basis with every
/// per-coordinate degree at most `max_deg` and `terms` non-zero terms.
pub fn random_chebyshev_poly<R: Rng>(
    rng: &mut R,
    d: usize,
    max_deg: usize,
    terms: usize,
) -> PolynomialStatistic {
    let t = (0..terms)
        .map(|_| {
            let k: Vec<usize> = (0..d).map(|_| rng.gen_range(0..=max_deg)).collect();
            (k, rng.gen_range(-1.0..1.0))
        })
        .collect();
    PolynomialStatistic::chebyshev(d, t).unwrap()
}

/// Random polynomial in the monomial basis.
pub fn random_monomial_poly<R: Rng>(
    rng: &mut R,
    d: usize,
    max_deg: usize,
    terms: usize,
) -> PolynomialStatistic {
    let t = (0..terms)
        .map(|_| {
            let k: Vec<usize> = (0..d).map(|_| rng.gen_range(0..=max_deg)).collect();
            (k, rng.gen_range(-1.0..1.0))
        })
        .collect();
    PolynomialStatistic::monomial(d, t).unwrap()
}

/// Mean and its standard error.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Unbiased sample variance and its large-sample standard error
/// `√((m_4 - s⁴) / n)`.
pub fn variance_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (s2, ((m4 - s2 * s2).max(0.0) / n).sqrt())
}
