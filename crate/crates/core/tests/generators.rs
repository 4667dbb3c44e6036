//! Generators against their declared laws, with quadrature oracles written
//! independently of the library code.

use gibbs_core::harness::{holdout_misclassification, Curve, GeneratorSpec};
use gibbs_core::losses::auc_point_estimate;
use gibbs_core::model::{Dataset, Observation, Reference};
use gibbs_core::rates::auc_covariances;
use gibbs_core::rng::{stream, stream_rng};
use gibbs_core::stats::{mean, normal_cdf, variance};

const N: usize = 100_000;

fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Composite Simpson with `m` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let s: f64 = (1..m).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    h / 3.0 * (f(a) + f(b) + s)
}

fn within_3se(xs: &[f64], target: f64) -> bool {
    (mean(xs) - target).abs() < 3.0 * (variance(xs) / xs.len() as f64).sqrt()
}

fn triples(d: &Dataset) -> Vec<(f64, f64, Vec<f64>)> {
    d.observations()
        .iter()
        .map(|u| match u {
            Observation::ClassTriple { x, y, z } => (x[0], *y, z.clone().unwrap_or_default()),
            _ => panic!("expected triples"),
        })
        .collect()
}

fn mu1(z: f64) -> f64 {
    z * z * z - 3.0 * z * z + 5.0
}

/// `P(Y = 1 | x, z)` for the one-covariate design, written out from the model.
fn eta1(x: f64, z: f64) -> f64 {
    let m = mu1(z);
    if x > m {
        normal_cdf((x - (m - 0.05)) / 0.5)
    } else {
        normal_cdf((x - (m + 0.05)) / 0.5)
    }
}

#[test]
fn mcid1_moments() {
    let g = GeneratorSpec::Mcid1;
    let rows = triples(&g.generate(N, &mut stream_rng(1, stream::DATA)).unwrap());
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| (r.1 + 1.0) / 2.0).collect();
    let zs: Vec<f64> = rows.iter().map(|r| r.2[0]).collect();
    assert!(within_3se(&zs, 1.5));
    let ex = simpson(mu1, 0.0, 3.0, 600) / 3.0;
    assert!(within_3se(&xs, ex), "{} vs {ex}", mean(&xs));
    // P(Y = 1) = ∫∫ η(x, z) φ(x − μ(z)) dx dz / 3
    let py =
        simpson(|z| simpson(|x| eta1(x, z) * phi(x - mu1(z)), mu1(z) - 9.0, mu1(z) + 9.0, 1800), 0.0, 3.0, 120) / 3.0;
    assert!(within_3se(&ys, py), "{} vs {py}", mean(&ys));
}

#[test]
fn mcid1_bayes_rate_against_two_dimensional_quadrature() {
    let g = GeneratorSpec::Mcid1;
    // split the inner integral at the threshold, where η jumps
    let inner = |z: f64| {
        let m = mu1(z);
        let f = |x: f64| {
            let e = eta1(x, z);
            e.min(1.0 - e) * phi(x - m)
        };
        simpson(f, m - 10.0, m, 2000) + simpson(f, m, m + 10.0, 2000)
    };
    let oracle = simpson(inner, 0.0, 3.0, 60) / 3.0;
    assert!((g.bayes_rate().unwrap() - oracle).abs() < 1e-7, "{} vs {oracle}", g.bayes_rate().unwrap());

    let holdout = g.generate(N, &mut stream_rng(2, stream::HOLDOUT)).unwrap();
    let rate = holdout_misclassification(|z| Ok(mu1(z[0])), &holdout).unwrap();
    let se = (oracle * (1.0 - oracle) / N as f64).sqrt();
    assert!((rate - oracle).abs() < 3.0 * se, "{rate} vs {oracle} ± {se}");
}

#[test]
fn mcid2_moments_and_bayes_rate() {
    let g = GeneratorSpec::Mcid2;
    let rows = triples(&g.generate(N, &mut stream_rng(3, stream::DATA)).unwrap());
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    // E X = 1.5 + 3, Var X = 1 + Var(Z₁ + 2Z₂) = 1 + 5·(9/12)
    assert!(within_3se(&xs, 4.5));
    assert!((variance(&xs) - (1.0 + 5.0 * 0.75)).abs() < 0.05);
    let holdout = g.generate(N, &mut stream_rng(4, stream::HOLDOUT)).unwrap();
    let rate = holdout_misclassification(|z| Ok(z[0] + 2.0 * z[1]), &holdout).unwrap();
    let bayes = g.bayes_rate().unwrap();
    assert!((rate - bayes).abs() < 3.0 * (bayes * (1.0 - bayes) / N as f64).sqrt(), "{rate} vs {bayes}");
}

#[test]
fn mcid_margin_on_dense_grid() {
    for (g, sd) in [(GeneratorSpec::Mcid1, 0.5), (GeneratorSpec::Mcid2, 1.0)] {
        let bound = 2.0 * normal_cdf(0.05 / sd) - 1.0;
        let mut worst = f64::INFINITY;
        for i in 0..=200 {
            for k in 0..=400 {
                let z = [3.0 * i as f64 / 200.0, 3.0 * ((i * 7) % 201) as f64 / 200.0];
                let mu = g.mcid_truth(&z).unwrap();
                let x = mu - 4.0 + 8.0 * k as f64 / 400.0;
                worst = worst.min((2.0 * g.eta(x, &z).unwrap() - 1.0).abs());
            }
        }
        assert!(worst >= bound - 1e-12 && bound > 0.0, "{worst} < {bound}");
    }
}

#[test]
fn quantile_generator_truth_is_the_conditional_quantile() {
    let g = GeneratorSpec::QuantileReg { tau: 0.75, beta: vec![1.0, 2.0], sd: 1.0 };
    let Reference::Point(t) = g.truth() else { panic!() };
    let d = g.generate(N, &mut stream_rng(5, stream::DATA)).unwrap();
    let below: Vec<f64> = d
        .observations()
        .iter()
        .map(|u| match u {
            Observation::RegPair { x, y } => f64::from(u8::from(*y <= t[0] + t[1] * x[0])),
            _ => unreachable!(),
        })
        .collect();
    assert!(within_3se(&below, 0.75), "{}", mean(&below));
}

#[test]
fn heavy_tail_residual_variance() {
    let df = 5.0;
    let g = GeneratorSpec::HeavyTail { beta: vec![0.5, -1.0], df };
    let d = g.generate(N, &mut stream_rng(6, stream::DATA)).unwrap();
    let r: Vec<f64> = d
        .observations()
        .iter()
        .map(|u| match u {
            Observation::RegPair { x, y } => y - 0.5 + x[0],
            _ => unreachable!(),
        })
        .collect();
    assert!(within_3se(&r, 0.0));
    // t₅ has variance 5/3 and a finite fourth moment
    assert!((variance(&r) - df / (df - 2.0)).abs() < 0.1, "{}", variance(&r));
}

#[test]
fn auc_generator_and_large_sample_covariances() {
    let g = GeneratorSpec::Auc { shift: 1.0 };
    let d = g.generate(4000, &mut stream_rng(7, stream::DATA)).unwrap();
    let (s0, s1) = d.scores().unwrap();
    let theta = normal_cdf(1.0 / std::f64::consts::SQRT_2);
    assert!((auc_point_estimate(&s0, &s1).unwrap() - theta).abs() < 0.02);
    // sharing a group-1 score: E Φ(U₁)² − θ²; sharing a group-0 score: E{1 − Φ(U₀ − 1)}² − θ²
    let tau10 = simpson(|u| normal_cdf(u).powi(2) * phi(u - 1.0), -9.0, 11.0, 4000) - theta * theta;
    let tau01 = simpson(|u| (1.0 - normal_cdf(u - 1.0)).powi(2) * phi(u), -10.0, 10.0, 4000) - theta * theta;
    let cov = auc_covariances(&s0, &s1).unwrap();
    assert!((cov.tau10 - tau10).abs() < 0.01, "{} vs {tau10}", cov.tau10);
    assert!((cov.tau01 - tau01).abs() < 0.01, "{} vs {tau01}", cov.tau01);
}

#[test]
fn massart_flip_rate() {
    let g = GeneratorSpec::Massart { q: 5, beta_star: vec![1.0, -1.0], flip: 0.1 };
    let Reference::Point(theta) = g.truth() else { panic!() };
    assert_eq!(theta, vec![1.0, 1.0, -1.0, 0.0, 0.0, 0.0]);
    let d = g.generate(N, &mut stream_rng(8, stream::DATA)).unwrap();
    let flipped: Vec<f64> = d
        .observations()
        .iter()
        .map(|u| match u {
            Observation::ClassTriple { x, y, .. } => {
                let clean = x.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() > 0.0;
                f64::from(u8::from(clean != (*y == 1.0)))
            }
            _ => unreachable!(),
        })
        .collect();
    assert!(within_3se(&flipped, 0.1));
}

#[test]
fn mean_curve_noise() {
    let g = GeneratorSpec::MeanCurve { function: Curve::Bump, sd: 0.3 };
    let d = g.generate(N, &mut stream_rng(9, stream::DATA)).unwrap();
    let r: Vec<f64> = d
        .observations()
        .iter()
        .map(|u| match u {
            Observation::RegPair { x, y } => y - (-(x[0] - 0.5).powi(2) / 0.02).exp(),
            _ => unreachable!(),
        })
        .collect();
    assert!(within_3se(&r, 0.0));
    assert!((variance(&r).sqrt() - 0.3).abs() < 0.005);
}
