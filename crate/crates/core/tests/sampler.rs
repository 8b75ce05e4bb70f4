use std::f64::consts::PI;

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use dppmc::error::Error;
use dppmc::estimator::{estimate, importance_estimate, FnIntegrand};
use dppmc::experiments::kolmogorov_sf;
use dppmc::kernel::{CDKernel, ProductMeasure};
use dppmc::orthopoly::JacobiParams;
use dppmc::quadrature::{gauss_chebyshev, gauss_rule, tensor_integrate};
use dppmc::rng::stream_rng;
use dppmc::sampler::{
    conditional_unnormalized_density, rejection_bound, sample_equilibrium_point, BoundStrategy,
    ChainState, Sampler, SamplerConfig,
};

fn eq_kernel(d: usize, n: usize) -> CDKernel {
    CDKernel::new(ProductMeasure::equilibrium(d).unwrap(), n).unwrap()
}

fn jacobi_kernel(params: &[(f64, f64)], n: usize) -> CDKernel {
    let p: Vec<JacobiParams> = params
        .iter()
        .map(|&(a, b)| JacobiParams::new(a, b).unwrap())
        .collect();
    CDKernel::new(ProductMeasure::new(&p).unwrap(), n).unwrap()
}

/// Replicate values `g(sample)` over streams `0..reps`.
fn replicate(
    kernel: &CDKernel,
    seed: u64,
    reps: u64,
    g: impl Fn(&dppmc::WeightedSample) -> f64,
) -> Vec<f64> {
    let sampler = Sampler::new(
        kernel,
        SamplerConfig {
            rng_seed: seed,
            ..SamplerConfig::default()
        },
    )
    .unwrap();
    (0..reps)
        .map(|s| g(&sampler.sample_stream(s).unwrap()))
        .collect()
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn conditionals_are_probability_densities() {
    let prefix = [0.31, -0.72, 0.05, 0.93, -0.4];
    let cases: Vec<(CDKernel, dppmc::quadrature::Rule)> = vec![
        (eq_kernel(1, 5), gauss_chebyshev(400)),
        (
            jacobi_kernel(&[(0.3, -0.2)], 5),
            gauss_rule(
                &ProductMeasure::new(&[JacobiParams::new(0.3, -0.2).unwrap()])
                    .unwrap()
                    .table(0, 60)
                    .unwrap(),
                60,
            )
            .unwrap(),
        ),
    ];
    for (k, rule) in &cases {
        let mut state = ChainState::new(k);
        for i in 1..=5 {
            let total =
                rule.integrate(|x| conditional_unnormalized_density(&state, k, &[x]).unwrap());
            let mass = total / (5 - i + 1) as f64;
            assert!((mass - 1.0).abs() < 1e-6, "step {i}: {mass}");
            state.accept(k, &[prefix[i - 1]]).unwrap();
        }
    }
    // d = 2 with a tensor rule
    let k = jacobi_kernel(&[(-0.5, -0.5), (0.2, 0.4)], 6);
    let r0 = gauss_chebyshev(30);
    let r1 = gauss_rule(&k.measure().table(1, 30).unwrap(), 30).unwrap();
    let mut state = ChainState::new(&k);
    let pts = [[0.1, 0.2], [-0.5, 0.7], [0.8, -0.3]];
    for (i, p) in pts.iter().enumerate() {
        let total = tensor_integrate(&[&r0, &r1], |x| {
            conditional_unnormalized_density(&state, &k, x).unwrap()
        });
        assert!((total - (6 - i) as f64).abs() < 1e-9);
        state.accept(&k, p).unwrap();
    }
}

/// One-sample KS p-value against a continuous CDF.
fn ks_p(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    kolmogorov_sf(n.sqrt() * d)
}

fn arcsine_cdf(x: f64) -> f64 {
    0.5 + x.asin() / PI
}

#[test]
fn proposals_follow_the_arcsine_law() {
    let mut rng = stream_rng(21, 0);
    let xs: Vec<f64> = (0..20_000)
        .map(|_| sample_equilibrium_point(&mut rng, 1)[0])
        .collect();
    assert!(ks_p(xs, arcsine_cdf) > 0.001);
    // N = 1 on the equilibrium measure: constant acceptance ratio
    let k = eq_kernel(1, 1);
    let xs = replicate(&k, 4, 5000, |s| {
        assert_eq!(s.weights, vec![1.0]);
        s.points[0][0]
    });
    assert!(ks_p(xs, arcsine_cdf) > 0.001);
    // with the sharp bound B = 1 every proposal is accepted
    let cfg = SamplerConfig {
        bound_strategy: BoundStrategy::Analytic,
        ..SamplerConfig::default()
    };
    let sampler = Sampler::new(&k, cfg).unwrap();
    assert_eq!(sampler.bound(), 1.0);
    for s in 0..200 {
        assert_eq!(sampler.sample_stream(s).unwrap().proposals, vec![1]);
    }
}

#[test]
fn one_point_density_chi_square() {
    // pooled points of N = 5 draws have density K_5(x, x) / 5 w.r.t. μ_eq
    let n = 5;
    let k = eq_kernel(1, n);
    let bins = 20;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| -1.0 + 2.0 * i as f64 / bins as f64)
        .collect();
    let rule = gauss_chebyshev(2000);
    let expected_p: Vec<f64> = (0..bins)
        .map(|b| {
            rule.integrate(|x| {
                if x >= edges[b] && x < edges[b + 1] {
                    k.diagonal(&[x]).unwrap() / n as f64
                } else {
                    0.0
                }
            })
        })
        .collect();
    let p_sum: f64 = expected_p.iter().sum();
    assert!((p_sum - 1.0).abs() < 1e-3);
    let reps = 10_000;
    let mut counts = vec![0usize; bins];
    let sampler = Sampler::new(
        &k,
        SamplerConfig {
            rng_seed: 8,
            ..SamplerConfig::default()
        },
    )
    .unwrap();
    for s in 0..reps {
        for p in sampler.sample_stream(s).unwrap().points {
            let b = (((p[0] + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    let total = (reps as usize * n) as f64;
    let chi2: f64 = counts
        .iter()
        .zip(&expected_p)
        .map(|(&c, &p)| {
            let e = total * p / p_sum;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.001, "chi2 = {chi2}, p = {p}");
}

#[test]
fn chain_order_is_exchangeable() {
    // every position of the chain has the same marginal law K_N / N
    let k = jacobi_kernel(&[(0.3, -0.2)], 6);
    let sampler = Sampler::new(
        &k,
        SamplerConfig {
            rng_seed: 13,
            ..SamplerConfig::default()
        },
    )
    .unwrap();
    let draws: Vec<Vec<Vec<f64>>> = (0..4000)
        .map(|s| sampler.sample_stream(s).unwrap().points)
        .collect();
    let first: Vec<f64> = draws.iter().map(|p| p[0][0].powi(2)).collect();
    let last: Vec<f64> = draws.iter().map(|p| p[5][0].powi(2)).collect();
    let rule = gauss_rule(&k.measure().table(0, 40).unwrap(), 40).unwrap();
    let truth = rule.integrate(|x| x * x * k.diagonal(&[x]).unwrap() / 6.0);
    for v in [&first, &last] {
        let (m, se) = mean_se(v);
        assert!((m - truth).abs() < 3.0 * se, "{m} vs {truth} ({se})");
    }
    let (m1, s1) = mean_se(&first);
    let (m2, s2) = mean_se(&last);
    assert!((m1 - m2).abs() < 3.0 * s1.hypot(s2));
    // symmetric statistics do not see the order
    let sym: Vec<f64> = draws
        .iter()
        .map(|p| p.iter().map(|x| x[0].powi(2)).sum())
        .collect();
    let mut rev = draws.clone();
    rev.iter_mut().for_each(|p| p.reverse());
    let sym_rev: Vec<f64> = rev
        .iter()
        .map(|p| p.iter().rev().map(|x| x[0].powi(2)).sum())
        .collect();
    assert_eq!(sym, sym_rev);
}

#[test]
fn identical_seeds_give_identical_samples() {
    let k = jacobi_kernel(&[(-0.5, -0.5), (0.25, -0.1)], 12);
    let cfg = SamplerConfig {
        rng_seed: 99,
        ..SamplerConfig::default()
    };
    let a = Sampler::new(&k, cfg).unwrap().sample_stream(3).unwrap();
    let b = Sampler::new(&k, cfg).unwrap().sample_stream(3).unwrap();
    assert_eq!(a, b);
    for (x, y) in a.points.iter().flatten().zip(b.points.iter().flatten()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    let c = Sampler::new(&k, cfg).unwrap().sample_stream(4).unwrap();
    assert_ne!(a.points, c.points);
    let other = SamplerConfig {
        rng_seed: 100,
        ..cfg
    };
    assert_ne!(
        a.points,
        Sampler::new(&k, other)
            .unwrap()
            .sample_stream(3)
            .unwrap()
            .points
    );
    assert_eq!(a.len(), 12);
    assert_eq!(a.proposals.len(), 12);
    assert_eq!(
        a.rejections()
            .iter()
            .zip(&a.proposals)
            .filter(|(r, p)| **r + 1 != **p)
            .count(),
        0
    );
}

#[test]
fn second_moment_is_unbiased() {
    let f = FnIntegrand::new(1, |x: &[f64]| x[0] * x[0]);
    for (n, seed) in [(5usize, 1u64), (8, 2)] {
        let k = eq_kernel(1, n);
        let v = replicate(&k, seed, 10_000, |s| estimate(&f, s).unwrap().value);
        let (m, se) = mean_se(&v);
        assert!((m - 0.5).abs() < 4.0 * se.max(1e-15), "N={n}: {m} ± {se}");
    }
}

#[test]
fn unbiased_on_a_mixed_product_measure() {
    let k = jacobi_kernel(&[(-0.5, -0.5), (0.4, -0.3)], 10);
    let f = FnIntegrand::new(2, |x: &[f64]| {
        (x[0] + 0.3).exp() * x[1].cos() + x[1].powi(3)
    });
    let r0 = gauss_chebyshev(40);
    let r1 = gauss_rule(&k.measure().table(1, 40).unwrap(), 40).unwrap();
    let truth = tensor_integrate(&[&r0, &r1], |x| {
        (x[0] + 0.3).exp() * x[1].cos() + x[1].powi(3)
    });
    let v = replicate(&k, 17, 3000, |s| estimate(&f, s).unwrap().value);
    let (m, se) = mean_se(&v);
    assert!((m - truth).abs() < 4.0 * se, "{m} vs {truth} ({se})");
}

#[test]
fn importance_sampling_recovers_uniform_moment() {
    // ∫ x² (1/2) dx = 1/3 from arcsine-ensemble nodes
    let k = eq_kernel(1, 8);
    let f = FnIntegrand::new(1, |x: &[f64]| x[0] * x[0]);
    let target = |x: &[f64]| if x[0].abs() <= 1.0 { 0.5 } else { 0.0 };
    let measure = k.measure().clone();
    let v = replicate(&k, 5, 5000, |s| {
        importance_estimate(&f, &target, &measure, s).unwrap().value
    });
    let (m, se) = mean_se(&v);
    assert!((m - 1.0 / 3.0).abs() < 4.0 * se, "{m} ± {se}");
}

#[test]
fn scanned_bound_dominates_a_million_proposals() {
    let k = jacobi_kernel(&[(0.3, -0.2)], 10);
    let b = rejection_bound(&k, &SamplerConfig::default()).unwrap();
    let measure = k.measure();
    let mut rng = stream_rng(2024, 0);
    let mut worst = 0.0f64;
    for _ in 0..1_000_000 {
        let x = sample_equilibrium_point(&mut rng, 1);
        let r = k.diagonal(&x).unwrap() * measure.equilibrium_ratio(&x) / b;
        worst = worst.max(r);
    }
    assert!(worst <= 1.0, "ratio {worst}");
    // the safety factor leaves visible slack
    assert!(worst < 1.0 / 1.1);
    // the analytic constant is looser than the scan
    let analytic = rejection_bound(
        &k,
        &SamplerConfig {
            bound_strategy: BoundStrategy::Analytic,
            ..SamplerConfig::default()
        },
    )
    .unwrap();
    assert!(analytic >= b / 1.2);
}

#[test]
fn chebyshev_analytic_bound_is_sharp() {
    // sup of K_N ω/ω_eq is attained at x = ±1, where it equals 2N - 1
    for n in [1usize, 2, 5, 30] {
        let k = eq_kernel(1, n);
        let cfg = SamplerConfig {
            bound_strategy: BoundStrategy::Analytic,
            ..SamplerConfig::default()
        };
        let b = rejection_bound(&k, &cfg).unwrap();
        assert_eq!(b, (2 * n - 1) as f64);
        assert!((k.diagonal(&[1.0]).unwrap() - b).abs() < 1e-9);
    }
    // tensorized in higher dimension
    let k = eq_kernel(2, 9);
    let cfg = SamplerConfig {
        bound_strategy: BoundStrategy::Analytic,
        ..SamplerConfig::default()
    };
    assert_eq!(rejection_bound(&k, &cfg).unwrap(), 25.0);
}

#[test]
fn analytic_request_outside_range_falls_back() {
    let k = jacobi_kernel(&[(1.5, 0.0)], 4);
    let cfg = SamplerConfig {
        bound_strategy: BoundStrategy::Analytic,
        ..SamplerConfig::default()
    };
    let fallback = rejection_bound(&k, &cfg).unwrap();
    let scan = rejection_bound(&k, &SamplerConfig::default()).unwrap();
    assert_eq!(fallback, scan);
}

#[test]
fn invalid_bounds_are_fatal() {
    let k = eq_kernel(1, 6);
    let s = Sampler::with_bound(&k, SamplerConfig::default(), 2.0).unwrap();
    assert!(matches!(
        s.sample_stream(0),
        Err(Error::BoundViolation { .. })
    ));
    let cfg = SamplerConfig {
        max_rejection_iterations: 1,
        ..SamplerConfig::default()
    };
    let s = Sampler::with_bound(&k, cfg, 1e6).unwrap();
    assert!(matches!(
        s.sample_stream(0),
        Err(Error::BoundTooTight { .. })
    ));
    assert!(Sampler::with_bound(&k, SamplerConfig::default(), f64::NAN).is_err());
    let bad = SamplerConfig {
        safety_factor: 0.5,
        ..SamplerConfig::default()
    };
    assert!(Sampler::new(&k, bad).is_err());
}

#[test]
fn points_are_distinct_and_inside_the_cube() {
    let k = jacobi_kernel(&[(-0.5, -0.5), (0.1, 0.5), (-0.4, -0.2)], 27);
    let sampler = Sampler::new(&k, SamplerConfig::default()).unwrap();
    let mut rng = stream_rng(0, 77);
    for _ in 0..20 {
        let s = sampler.sample_with(&mut rng).unwrap();
        assert_eq!(s.len(), 27);
        for (x, w) in s.points.iter().zip(&s.weights) {
            assert!(x.iter().all(|v| v.abs() < 1.0));
            assert!((w - k.leverage(x).unwrap()).abs() < 1e-15);
        }
        let _ = rng.gen::<u8>();
    }
}
