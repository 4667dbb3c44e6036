//! End-to-end acceptance suite. Runs every check, prints one PASS/FAIL line
//! each, and exits non-zero if any fails.
//!
//! Run alone with `cargo test -p gibbs-core --test acceptance`.

use std::path::PathBuf;
use std::time::Instant;

use gibbs_core::diagnostics::{mgf_condition_check, Divergence};
use gibbs_core::harness::{load_json, run_experiment, write_experiment, ExperimentSpec, GeneratorSpec, RunOptions};
use gibbs_core::losses::{auc_point_estimate, capped_squared_loss, LossSpec};
use gibbs_core::model::{BasisSpec, CubicBSpline, Dataset, Observation};
use gibbs_core::priors::{spike_slab_log_mass, spike_slab_log_size_masses, PriorSpec};
use gibbs_core::rates::{auc_covariances, auc_learning_rate, heavy_tail_terms, rate_at, RateSchedule};
use gibbs_core::rng::{hash64, stream, stream_rng};
use gibbs_core::sampler::{credible_interval, mh_run, ss_mh_run, GibbsTarget, InitSpec, MHConfig, ProposalScale};
use gibbs_core::stats::{effective_sample_size, mean, normal_cdf, variance};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::Rng;

type Outcome = Result<String, String>;

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

fn mcid_rates(config: &str, est: (f64, f64), truth: (f64, f64)) -> Outcome {
    let spec: ExperimentSpec = load_json(&config_path(config)).map_err(|e| e.to_string())?;
    let out = run_experiment(&spec, &RunOptions::default()).map_err(|e| e.to_string())?;
    let g = &out.summary.grid[0];
    let (e, t) = (g.mean_misclass_est.unwrap_or(f64::NAN), g.mean_misclass_truth.unwrap_or(f64::NAN));
    let msg = format!(
        "reps={} errors={} estimate-based={e:.4} in [{}, {}], truth-based={t:.4} in [{}, {}]",
        g.rows, g.errors, est.0, est.1, truth.0, truth.1
    );
    if g.errors == 0 && within(e, est.0, est.1) && within(t, truth.0, truth.1) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn mcid_single_covariate() -> Outcome {
    mcid_rates("mcid1.json", (0.13, 0.19), (0.10, 0.16))
}

fn mcid_two_covariates() -> Outcome {
    mcid_rates("mcid2.json", (0.21, 0.27), (0.20, 0.26))
}

fn conjugate_gaussian_oracle() -> Outcome {
    // ω = ½ turns ω·Σ(y − θ)² into the N(θ, 1) log-likelihood
    let n = 50;
    let mut rng = stream_rng(31, stream::DATA);
    let ys: Vec<f64> = (0..n).map(|_| 1.3 + rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
    let data = Dataset::new(ys.iter().map(|&y| Observation::RegPair { x: vec![0.0], y }).collect()).unwrap();
    let loss = LossSpec::Squared { features: BasisSpec::dictionary(&["1"]).unwrap() };
    let prior = PriorSpec::GaussianIid { mean: 0.0, sd: 10.0, dim: 1 };
    let target = GibbsTarget::new(loss, prior, &data, 0.5).map_err(|e| e.to_string())?;
    let config = MHConfig {
        steps: 105_000,
        burn_in: 5_000,
        thin: 5,
        proposal_scale: Some(ProposalScale::Scalar(0.35)),
        seed: 32,
        ..Default::default()
    };
    let chain = mh_run(&target, &config).map_err(|e| e.to_string())?;
    let xs = chain.coordinate(0);
    let precision = n as f64 + 1.0 / 100.0;
    let post_mean = ys.iter().sum::<f64>() / precision;
    let post_sd = precision.powf(-0.5);
    let ess = effective_sample_size(&xs);
    let (m, sd) = (mean(&xs), variance(&xs).sqrt());
    let se_mean = sd / ess.sqrt();
    // delta-method s.e. of the sample sd for near-normal draws
    let se_sd = sd / (2.0 * ess).sqrt();
    let msg = format!(
        "draws={} ESS={ess:.0} mean {m:.5} vs {post_mean:.5} (se {se_mean:.5}), sd {sd:.5} vs {post_sd:.5} (se {se_sd:.5})",
        chain.len()
    );
    if chain.len() >= 20_000 && (m - post_mean).abs() < 3.0 * se_mean && (sd - post_sd).abs() < 3.0 * se_sd {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn auc_equals_mann_whitney() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    // small integer-valued scores so ties across groups occur
    let sample = (prop::collection::vec(0i32..8, 1..12), prop::collection::vec(0i32..8, 1..12));
    runner
        .run(&sample, |(s0, s1)| {
            let (a, b): (Vec<f64>, Vec<f64>) =
                (s0.iter().map(|&v| v as f64).collect(), s1.iter().map(|&v| v as f64).collect());
            // U statistic counting group-1 wins only
            let wins = b.iter().map(|u1| a.iter().filter(|u0| u1 > *u0).count()).sum::<usize>();
            let expected = wins as f64 / (a.len() * b.len()) as f64;
            prop_assert_eq!(auc_point_estimate(&a, &b).unwrap(), expected);
            Ok(())
        })
        .map(|_| "1000 random datasets, exact equality".to_string())
        .map_err(|e| e.to_string())
}

fn auc_calibration() -> Outcome {
    let g = GeneratorSpec::Auc { shift: 1.0 };
    let truth = normal_cdf(1.0 / std::f64::consts::SQRT_2);
    let reps = 200;
    let mut covered = 0;
    for rep in 0..reps {
        let seed = hash64(5150, 0, rep);
        let data = g.generate(200, &mut stream_rng(seed, stream::DATA)).map_err(|e| e.to_string())?;
        let (s0, s1) = data.scores().unwrap();
        let cov = auc_covariances(&s0, &s1).map_err(|e| e.to_string())?;
        let omega = auc_learning_rate(&cov, s0.len(), s1.len(), 1.0).map_err(|e| e.to_string())?;
        let target = GibbsTarget::new(LossSpec::Auc, PriorSpec::Uniform { lo: 0.0, hi: 1.0, dim: 1 }, &data, omega)
            .map_err(|e| e.to_string())?;
        let config = MHConfig {
            steps: 12_000,
            burn_in: 2_000,
            thin: 2,
            proposal_scale: Some(ProposalScale::Scalar(0.06)),
            seed,
            init: InitSpec::Erm,
            ..Default::default()
        };
        let chain = mh_run(&target, &config).map_err(|e| e.to_string())?;
        let (lo, hi) = credible_interval(&chain, 0, 0.95).map_err(|e| e.to_string())?;
        if lo <= truth && truth <= hi {
            covered += 1;
        }
    }
    let coverage = covered as f64 / reps as f64;
    let msg = format!("θ* = {truth:.5}, coverage {covered}/{reps} = {coverage:.3} in [0.88, 0.99]");
    if within(coverage, 0.88, 0.99) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn quantile_root_n_rate() -> Outcome {
    let spec: ExperimentSpec = load_json(&config_path("quantile_rate.json")).map_err(|e| e.to_string())?;
    let out = run_experiment(&spec, &RunOptions::default()).map_err(|e| e.to_string())?;
    let fit = out.summary.rate_fit.as_ref().ok_or("no rate fit")?;
    let radii: Vec<String> =
        out.summary.grid.iter().map(|g| format!("n={}:{:.4}", g.n, g.mean_radius.unwrap_or(f64::NAN))).collect();
    let msg =
        format!("errors={} radii [{}] slope {:.4} in [-0.65, -0.35]", out.summary.errors, radii.join(" "), fit.slope);
    if out.summary.errors == 0 && within(fit.slope, -0.65, -0.35) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn heavy_tail_identities() -> Outcome {
    let s = 4.0;
    let mut worst: f64 = 0.0;
    for n in [100usize, 1_000, 10_000] {
        let nf = n as f64;
        let t = heavy_tail_terms(s, n).map_err(|e| e.to_string())?;
        let t_n = nf.powf(2.0 / (s - 2.0));
        let omega = t_n.powf(-0.5);
        let eps = nf.ln().sqrt() * nf.powf(-(s - 3.0) / (2.0 * s - 4.0));
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        let scheduled = rate_at(&RateSchedule::HeavyTail { s }, n).map_err(|e| e.to_string())?;
        for r in [
            rel(t.t_n, t_n),
            rel(t.omega_n, omega),
            rel(t.eps_n, eps),
            rel(scheduled, omega),
            rel(nf * t.omega_n * t.eps_n * t.eps_n, nf.ln()),
        ] {
            worst = worst.max(r);
        }
    }
    let mut rng = stream_rng(77, stream::DIAGNOSTIC);
    let cap = 2.5;
    let mut violations = 0;
    for _ in 0..100_000 {
        let y: f64 = rng.random_range(-5.0..5.0);
        let p: f64 = rng.random_range(-5.0..5.0);
        let r2 = (y - p) * (y - p);
        let c = capped_squared_loss(cap, y, p);
        if c > r2 || (r2 <= cap && c != r2) {
            violations += 1;
        }
    }
    let msg = format!("max relative error {worst:.2e} (tol 1e-10), capped-loss violations {violations}/100000");
    if worst < 1e-10 && violations == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn spike_slab_masses() -> Outcome {
    let mut worst: f64 = 0.0;
    for q in 1..=12usize {
        let prior = PriorSpec::SpikeSlab { q, a: 1.0, c: 1.0, lambda: None };
        let mut total = 0.0;
        for mask in 0u32..(1 << q) {
            let s: Vec<usize> = (0..q).filter(|k| mask >> k & 1 == 1).collect();
            total += spike_slab_log_mass(&prior, &s).map_err(|e| e.to_string())?.exp();
        }
        let size_total: f64 = spike_slab_log_size_masses(q, 1.0, 1.0).iter().map(|l| l.exp()).sum();
        worst = worst.max((total - 1.0).abs()).max((size_total - 1.0).abs());
    }
    let prior = PriorSpec::SpikeSlab { q: 2, a: 1.0, c: 1.0, lambda: Some(1.0) };
    let configs: [&[usize]; 4] = [&[], &[0], &[1], &[0, 1]];
    let expected = [4.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0];
    let exact: Vec<f64> = configs.iter().map(|s| spike_slab_log_mass(&prior, s).unwrap().exp()).collect();
    let exact_ok = exact.iter().zip(&expected).all(|(a, b)| (a - b).abs() < 1e-15);

    // prior-only chain: any dataset with ω = 0
    let data = Dataset::new(
        (0..10).map(|i| Observation::ClassTriple { x: vec![1.0, i as f64 / 10.0, 0.5], y: 1.0, z: None }).collect(),
    )
    .unwrap();
    let target = GibbsTarget::new(LossSpec::ZeroOneLinear, prior, &data, 0.0).map_err(|e| e.to_string())?;
    let config = MHConfig { steps: 202_000, burn_in: 2_000, thin: 1, seed: 88, ..Default::default() };
    let chain = ss_mh_run(&target, &config).map_err(|e| e.to_string())?;
    let mut freq_ok = true;
    let mut parts = Vec::new();
    for (s, p) in configs.iter().zip(&expected) {
        let ind: Vec<f64> = chain.draws.iter().map(|d| if d.support == *s { 1.0 } else { 0.0 }).collect();
        let f = mean(&ind);
        let se = (p * (1.0 - p) / effective_sample_size(&ind)).sqrt();
        freq_ok &= (f - p).abs() < 3.0 * se;
        parts.push(format!("{f:.4}±{se:.4}"));
    }
    let msg = format!(
        "sum error {worst:.1e} (q ≤ 12), q=2 masses {exact:.6?}, chain frequencies [{}] vs [0.5714, 0.1429, 0.1429, 0.1429]",
        parts.join(", ")
    );
    if worst < 1e-10 && exact_ok && freq_ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn sparse_classification_trend() -> Outcome {
    let spec: ExperimentSpec = load_json(&config_path("sparse_massart.json")).map_err(|e| e.to_string())?;
    let out = run_experiment(&spec, &RunOptions::default()).map_err(|e| e.to_string())?;
    let reps = out.summary.replications;
    let (small, large) = out.rows.split_at(reps);
    let mut wins = 0;
    for (a, b) in small.iter().zip(large) {
        match (a.div_median, b.div_median) {
            (Some(x), Some(y)) if y < x => wins += 1,
            (Some(_), Some(_)) => {}
            _ => return Err(format!("failed rows: {:?} {:?}", a.error, b.error)),
        }
    }
    let msg = format!(
        "median divergence smaller at n={} than n={} in {wins}/{reps} paired reps (need ≥ 8)",
        large[0].n, small[0].n
    );
    if wins >= 8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn auc_moment_condition() -> Outcome {
    let g = GeneratorSpec::Auc { shift: 1.0 };
    let star = normal_cdf(1.0 / std::f64::consts::SQRT_2);
    let grid: Vec<Vec<f64>> = [-0.3, -0.2, -0.1, 0.1, 0.2, 0.3].iter().map(|d| vec![star + d]).collect();
    let mut rng = stream_rng(1010, stream::DIAGNOSTIC);
    let report =
        mgf_condition_check(&LossSpec::Auc, &grid, &[star], 1.0, &Divergence::AbsScalar, 2.0, &g, 100_000, &mut rng)
            .map_err(|e| e.to_string())?;
    let msg = format!("min K̂ {:.4}, min K̂ − 3·se {:.4} (need > 0)", report.min_k_hat, report.min_k_lower);
    if report.min_k_lower > 0.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn byte_identical_reruns() -> Outcome {
    let mut spec: ExperimentSpec = load_json(&config_path("mcid1.json")).map_err(|e| e.to_string())?;
    spec.replications = Some(4);
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    let mut files = Vec::new();
    for (dir, workers) in dirs.iter().zip([1, 3]) {
        let out = run_experiment(&spec, &RunOptions { workers: Some(workers), ..Default::default() })
            .map_err(|e| e.to_string())?;
        files.push(write_experiment(dir.path(), &out).map_err(|e| e.to_string())?);
    }
    for (a, b) in files[0].iter().zip(&files[1]) {
        if std::fs::read(a).unwrap() != std::fs::read(b).unwrap() {
            return Err(format!("{} differs between runs", a.file_name().unwrap().to_string_lossy()));
        }
    }
    Ok(format!("{} output files identical across two runs (1 and 3 workers)", files[0].len()))
}

fn bspline_invariants() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut support_violations = 0;
    for (lo, hi, j) in [(0.0, 3.0, 6), (0.0, 3.0, 4), (-1.0, 2.0, 10), (0.0, 1.0, 4)] {
        let b = CubicBSpline::new(lo, hi, j).unwrap();
        let knots = b.knots().to_vec();
        for i in 0..10_000 {
            let x = lo + (hi - lo) * i as f64 / 9_999.0;
            let v = b.eval(x).unwrap();
            worst = worst.max((v.iter().sum::<f64>() - 1.0).abs());
            let nonzero: Vec<usize> = (0..j).filter(|&k| v[k] != 0.0).collect();
            let contiguous = nonzero.windows(2).all(|w| w[1] == w[0] + 1);
            let in_support = nonzero.iter().all(|&k| knots[k] <= x && x <= knots[k + 4]);
            if nonzero.len() > 4 || !contiguous || !in_support || v.iter().any(|&e| e < 0.0) {
                support_violations += 1;
            }
        }
    }
    let msg = format!("max |Σ B_j − 1| = {worst:.1e} (tol 1e-12), local-support violations {support_violations}");
    if worst <= 1e-12 && support_violations == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

type Check = (&'static str, fn() -> Outcome);

fn main() {
    let checks: [Check; 12] = [
        ("mcid_single_covariate", mcid_single_covariate),
        ("mcid_two_covariates", mcid_two_covariates),
        ("conjugate_gaussian_oracle", conjugate_gaussian_oracle),
        ("auc_equals_mann_whitney", auc_equals_mann_whitney),
        ("auc_calibration", auc_calibration),
        ("quantile_root_n_rate", quantile_root_n_rate),
        ("heavy_tail_identities", heavy_tail_identities),
        ("spike_slab_masses", spike_slab_masses),
        ("sparse_classification_trend", sparse_classification_trend),
        ("auc_moment_condition", auc_moment_condition),
        ("byte_identical_reruns", byte_identical_reruns),
        ("bspline_invariants", bspline_invariants),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name:<28} {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name:<28} {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
