//! wasm-bindgen entry points for the static page in `www/`. Each export
//! returns a JSON string; the plain functions below are what the tests call.

use gibbs_core::harness::{holdout_misclassification, resolve_omega, GeneratorSpec};
use gibbs_core::losses::{auc_point_estimate, LossSpec};
use gibbs_core::model::{BasisSpec, CubicBSpline};
use gibbs_core::priors::PriorSpec;
use gibbs_core::rates::{Multiplier, RateSchedule};
use gibbs_core::rng::{stream, stream_rng};
use gibbs_core::sampler::{credible_interval_of, mh_run, posterior_mean, GibbsTarget, MHConfig, ProposalScale};
use gibbs_core::stats::normal_cdf;
use gibbs_core::Result;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Basis functions on `[lo, hi]` evaluated at `points` equispaced abscissae.
pub fn basis_curves(lo: f64, hi: f64, num_basis: usize, points: usize) -> Result<Value> {
    let basis = CubicBSpline::new(lo, hi, num_basis)?;
    let xs: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points.max(2) - 1) as f64).collect();
    let mut curves = vec![Vec::with_capacity(points); num_basis];
    for &x in &xs {
        for (c, v) in curves.iter_mut().zip(basis.eval(x)?) {
            c.push(v);
        }
    }
    Ok(json!({ "x": xs, "curves": curves, "knots": basis.knots() }))
}

/// Gibbs posterior of the AUC for two normal groups `shift` apart, with the
/// data-driven learning rate scaled by `multiplier`.
pub fn auc_posterior(shift: f64, n: usize, multiplier: f64, seed: u64) -> Result<Value> {
    let g = GeneratorSpec::Auc { shift };
    g.validate()?;
    let data = g.generate(n, &mut stream_rng(seed, stream::DATA))?;
    let (s0, s1) = data.scores()?;
    let omega =
        resolve_omega(&RateSchedule::AucDataDriven { multiplier: Multiplier::Fixed { value: multiplier } }, n, &data)?;
    let target = GibbsTarget::new(LossSpec::Auc, PriorSpec::Uniform { lo: 0.0, hi: 1.0, dim: 1 }, &data, omega)?;
    let cfg = MHConfig { steps: 12_000, burn_in: 2_000, thin: 5, seed, ..Default::default() };
    let chain = mh_run(&target, &cfg)?;
    let draws = chain.coordinate(0);
    let (lo, hi) = credible_interval_of(&draws, 0.95)?;
    Ok(json!({
        "draws": draws,
        "omega": omega,
        "estimate": auc_point_estimate(&s0, &s1)?,
        "truth": normal_cdf(shift / std::f64::consts::SQRT_2),
        "interval": [lo, hi],
        "acceptance": chain.acceptance_rate(),
    }))
}

/// One single-covariate MCID fit: posterior-mean threshold curve against the
/// truth, with misclassification on a fresh hold-out.
pub fn mcid_fit(n: usize, seed: u64) -> Result<Value> {
    let g = GeneratorSpec::Mcid1;
    let basis = BasisSpec::cubic_bspline(0.0, 3.0, 6)?;
    let data = g.generate(n, &mut stream_rng(seed, stream::DATA))?;
    let target = GibbsTarget::new(
        LossSpec::Mcid { basis: basis.clone() },
        PriorSpec::GaussianIid { mean: 0.0, sd: 6.0, dim: basis.len() },
        &data,
        1.0,
    )?;
    let cfg = MHConfig {
        steps: 20_000,
        burn_in: 5_000,
        thin: 10,
        proposal_scale: Some(ProposalScale::Scalar(0.6)),
        seed,
        ..Default::default()
    };
    let chain = mh_run(&target, &cfg)?;
    let coef = posterior_mean(&chain)?;
    let fitted = |z: &[f64]| -> Result<f64> {
        let mut row = vec![0.0; basis.len()];
        basis.eval_into(z, &mut row)?;
        Ok(row.iter().zip(&coef).map(|(a, b)| a * b).sum())
    };
    let zs: Vec<f64> = (0..=60).map(|i| 3.0 * i as f64 / 60.0).collect();
    let curve = zs.iter().map(|z| fitted(&[*z])).collect::<Result<Vec<_>>>()?;
    let truth: Vec<f64> = zs.iter().filter_map(|z| g.mcid_truth(&[*z])).collect();
    let holdout = g.generate(1000, &mut stream_rng(seed, stream::HOLDOUT))?;
    Ok(json!({
        "z": zs,
        "fitted": curve,
        "truth": truth,
        "misclass": holdout_misclassification(fitted, &holdout)?,
        "bayes": g.bayes_rate(),
        "acceptance": chain.acceptance_rate(),
    }))
}

fn export(v: Result<Value>) -> std::result::Result<String, JsValue> {
    v.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = basisCurves)]
pub fn basis_curves_js(lo: f64, hi: f64, num_basis: usize, points: usize) -> std::result::Result<String, JsValue> {
    export(basis_curves(lo, hi, num_basis, points))
}

#[wasm_bindgen(js_name = aucPosterior)]
pub fn auc_posterior_js(shift: f64, n: usize, multiplier: f64, seed: u32) -> std::result::Result<String, JsValue> {
    export(auc_posterior(shift, n, multiplier, seed.into()))
}

#[wasm_bindgen(js_name = mcidFit)]
pub fn mcid_fit_js(n: usize, seed: u32) -> std::result::Result<String, JsValue> {
    export(mcid_fit(n, seed.into()))
}
