use std::f64::consts::SQRT_2;

use approx::assert_relative_eq;
use rand::Rng;

use dppmc::kernel::{CDKernel, ProductMeasure};
use dppmc::orthopoly::JacobiParams;
use dppmc::quadrature::{gauss_rule, tensor_integrate, Rule};
use dppmc::rng::stream_rng;

fn measures() -> Vec<ProductMeasure> {
    vec![
        ProductMeasure::equilibrium(1).unwrap(),
        ProductMeasure::equilibrium(2).unwrap(),
        ProductMeasure::new(&[JacobiParams::new(0.3, -0.2).unwrap()]).unwrap(),
        ProductMeasure::new(&[
            JacobiParams::equilibrium(),
            JacobiParams::new(0.4, 0.1).unwrap(),
        ])
        .unwrap(),
        ProductMeasure::new(&[
            JacobiParams::equilibrium(),
            JacobiParams::new(-0.3, 0.5).unwrap(),
            JacobiParams::uniform(),
        ])
        .unwrap(),
    ]
}

fn rules(measure: &ProductMeasure, order: usize) -> Vec<Rule> {
    (0..measure.dim())
        .map(|j| gauss_rule(&measure.table(j, order).unwrap(), order).unwrap())
        .collect()
}

fn random_point<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn trace_equals_n() {
    for m in measures() {
        let order = if m.dim() == 3 { 8 } else { 16 };
        let r = rules(&m, order);
        let refs: Vec<&Rule> = r.iter().collect();
        for n in [1, 3, 7, 12] {
            let k = CDKernel::new(m.clone(), n).unwrap();
            if k.max_degree().iter().any(|&deg| deg >= order) {
                continue;
            }
            let trace = tensor_integrate(&refs, |x| k.diagonal(x).unwrap());
            assert_relative_eq!(trace, n as f64, max_relative = 1e-12);
        }
    }
}

#[test]
fn reproducing_property() {
    let mut rng = stream_rng(7, 1);
    for m in measures().into_iter().filter(|m| m.dim() <= 2) {
        let r = rules(&m, 20);
        let refs: Vec<&Rule> = r.iter().collect();
        let k = CDKernel::new(m.clone(), 9).unwrap();
        for _ in 0..5 {
            let x = random_point(&mut rng, m.dim());
            let z = random_point(&mut rng, m.dim());
            let lhs = tensor_integrate(&refs, |y| {
                k.eval_kernel(&x, y).unwrap() * k.eval_kernel(y, &z).unwrap()
            });
            let rhs = k.eval_kernel(&x, &z).unwrap();
            assert!(
                (lhs - rhs).abs() < 1e-11 * rhs.abs().max(1.0),
                "{lhs} vs {rhs}"
            );
        }
    }
}

#[test]
fn gram_matrices_are_positive_semidefinite() {
    let mut rng = stream_rng(3, 2);
    for m in measures() {
        let k = CDKernel::new(m.clone(), 10).unwrap();
        let pts: Vec<Vec<f64>> = (0..15).map(|_| random_point(&mut rng, m.dim())).collect();
        let gram: Vec<Vec<f64>> = pts
            .iter()
            .map(|x| pts.iter().map(|y| k.eval_kernel(x, y).unwrap()).collect())
            .collect();
        for (a, row) in gram.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                assert_eq!(*v, gram[b][a]);
            }
        }
        for _ in 0..200 {
            let c: Vec<f64> = (0..pts.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q: f64 = (0..pts.len())
                .flat_map(|a| (0..pts.len()).map(move |b| (a, b)))
                .map(|(a, b)| c[a] * gram[a][b] * c[b])
                .sum();
            assert!(q > -1e-9, "quadratic form {q}");
        }
    }
}

#[test]
fn diagonal_and_leverage() {
    let mut rng = stream_rng(5, 5);
    for m in measures() {
        let k = CDKernel::new(m.clone(), 6).unwrap();
        for _ in 0..50 {
            let x = random_point(&mut rng, m.dim());
            let diag = k.diagonal(&x).unwrap();
            assert!(diag >= 1.0);
            let direct: f64 = (0..6)
                .map(|i| k.eval_multivariate_phi(i, &x).unwrap().powi(2))
                .sum();
            assert_relative_eq!(diag, direct, max_relative = 1e-13);
            assert_relative_eq!(k.leverage(&x).unwrap(), 1.0 / diag, max_relative = 1e-15);
        }
    }
    let k = CDKernel::new(ProductMeasure::equilibrium(1).unwrap(), 1).unwrap();
    assert_eq!(k.diagonal(&[0.3]).unwrap(), 1.0);
    assert!(k.diagonal(&[0.3, 0.1]).is_err());
}

/// Chebyshev CD kernel from cosines: `1 + 2 Σ_{1 <= k < M} cos kθ cos kψ`.
fn chebyshev_kernel(m: usize, s: f64, t: f64) -> f64 {
    let (a, b) = (s.acos(), t.acos());
    1.0 + (1..m)
        .map(|k| SQRT_2 * (k as f64 * a).cos() * SQRT_2 * (k as f64 * b).cos())
        .sum::<f64>()
}

#[test]
fn hypercube_kernels_factorize() {
    let mut rng = stream_rng(11, 0);
    for d in [2usize, 3] {
        for side in [2usize, 3, 4] {
            let k =
                CDKernel::new(ProductMeasure::equilibrium(d).unwrap(), side.pow(d as u32)).unwrap();
            for _ in 0..20 {
                let x = random_point(&mut rng, d);
                let y = random_point(&mut rng, d);
                let (lhs, rhs) = k.product_identity_check(side, &x, &y).unwrap();
                let independent: f64 = (0..d).map(|j| chebyshev_kernel(side, x[j], y[j])).product();
                assert!((lhs - rhs).abs() < 1e-12);
                assert!((lhs - independent).abs() < 1e-12);
            }
        }
    }
    let k = CDKernel::new(ProductMeasure::equilibrium(2).unwrap(), 5).unwrap();
    assert!(k
        .product_identity_check(2, &[0.0, 0.0], &[0.0, 0.0])
        .is_err());
}
