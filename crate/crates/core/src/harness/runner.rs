use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentSpec;
use super::generators::{holdout_misclassification, GeneratorSpec};
use crate::diagnostics::{concentration_slope, Divergence, DivergenceSpec, RateFit};
use crate::error::{precondition, Result};
use crate::losses::LossSpec;
use crate::model::{BasisSpec, Dataset, FunctionParam, Observation};
use crate::rates::{auc_covariances, auc_learning_rate, rate_at, RateSchedule};
use crate::rng::{hash64, stream, stream_rng};
use crate::sampler::{mh_run, posterior_mean, ss_mh_run, GibbsTarget, MHConfig};
use crate::stats::{mean, quantile_type7};

/// One `(n, replication)` cell of an experiment. Failed cells keep their
/// identifiers and seed and carry the error message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub omega: Option<f64>,
    pub radius_q90: Option<f64>,
    pub div_point_est: Option<f64>,
    pub misclass_est: Option<f64>,
    pub misclass_truth: Option<f64>,
    pub accept_rate: Option<f64>,
    pub wall_ms: Option<f64>,
    pub error: Option<String>,
    /// Posterior median divergence; reported in the long-format output only.
    pub div_median: Option<f64>,
}

impl ResultRow {
    fn failed(n: usize, rep: usize, seed: u64, error: String) -> Self {
        Self {
            n,
            rep,
            seed,
            omega: None,
            radius_q90: None,
            div_point_est: None,
            misclass_est: None,
            misclass_truth: None,
            accept_rate: None,
            wall_ms: None,
            error: Some(error),
            div_median: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Use the full-size replication count.
    pub full: bool,
    /// Record wall-clock time per row; outputs are then no longer byte-reproducible.
    pub record_timing: bool,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaEntry {
    pub n: usize,
    /// `None` when `ω` is estimated from each dataset; see the rows.
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub n: usize,
    pub rows: usize,
    pub errors: usize,
    pub mean_omega: Option<f64>,
    pub mean_radius: Option<f64>,
    pub median_radius: Option<f64>,
    pub mean_div_point_est: Option<f64>,
    pub mean_misclass_est: Option<f64>,
    pub mean_misclass_truth: Option<f64>,
    pub mean_accept_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: u32,
    pub spec: ExperimentSpec,
    pub full: bool,
    pub replications: usize,
    pub holdout: Option<usize>,
    pub omega_by_n: Vec<OmegaEntry>,
    pub grid: Vec<GridSummary>,
    /// Log–log fit of mean radius against `n` (three or more grid sizes).
    pub rate_fit: Option<RateFit>,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
}

/// `ω` for a dataset of grid size `n`.
pub fn resolve_omega(rate: &RateSchedule, n: usize, data: &Dataset) -> Result<f64> {
    match rate {
        RateSchedule::AucDataDriven { multiplier } => {
            let (s0, s1) = data.scores()?;
            let cov = auc_covariances(&s0, &s1)?;
            auc_learning_rate(&cov, s0.len(), s1.len(), multiplier.at(s0.len() + s1.len()))
        }
        _ => rate_at(rate, n),
    }
}

fn loss_basis(loss: &LossSpec) -> Result<&BasisSpec> {
    match loss {
        LossSpec::Check { features, .. }
        | LossSpec::Squared { features }
        | LossSpec::CappedSquared { features, .. } => Ok(features),
        LossSpec::Mcid { basis } => Ok(basis),
        _ => Err(precondition(format!("{loss:?} has no function basis for a functional divergence"))),
    }
}

fn covariates(data: &Dataset) -> Result<Vec<Vec<f64>>> {
    data.observations()
        .iter()
        .map(|u| match u {
            Observation::RegPair { x, .. } => Ok(x.clone()),
            Observation::ClassTriple { z: Some(z), .. } => Ok(z.clone()),
            Observation::ClassTriple { x, .. } => Ok(x.clone()),
            Observation::Score { .. } => Err(precondition("score data has no covariates")),
        })
        .collect()
}

/// Runtime divergence for a config, with the generator as its sampler.
pub fn build_divergence(
    spec: DivergenceSpec,
    loss: &LossSpec,
    generator: &GeneratorSpec,
    data: &Dataset,
) -> Result<Divergence> {
    let sampler = Arc::new(generator.clone());
    Ok(match spec {
        DivergenceSpec::Euclid => Divergence::Euclid,
        DivergenceSpec::AbsScalar => Divergence::AbsScalar,
        DivergenceSpec::EmpiricalL2 => {
            Divergence::EmpiricalL2 { basis: loss_basis(loss)?.clone(), xs: covariates(data)? }
        }
        DivergenceSpec::L2P { mc_size } => Divergence::L2P { basis: loss_basis(loss)?.clone(), sampler, mc_size },
        DivergenceSpec::RiskDiffSqrt { mc_size } => Divergence::RiskDiffSqrt { loss: loss.clone(), sampler, mc_size },
        DivergenceSpec::McidMeasure { mc_size } => {
            Divergence::McidMeasure { basis: loss_basis(loss)?.clone(), sampler, mc_size }
        }
    })
}

/// Runs the `(n_index, rep_index)` cell; the seed is `hash64(baseSeed, n_index, rep_index)`.
pub fn run_replication(spec: &ExperimentSpec, n_index: usize, rep_index: usize, options: &RunOptions) -> ResultRow {
    let n = spec.n_grid[n_index];
    let seed = hash64(spec.base_seed, n_index as u64, rep_index as u64);
    // no clock unless asked for: `Instant` is unavailable on wasm32
    let start = options.record_timing.then(Instant::now);
    match replicate(spec, n, seed) {
        Ok(mut row) => {
            row.rep = rep_index;
            row.wall_ms = start.map(|t| t.elapsed().as_secs_f64() * 1e3);
            row
        }
        Err(e) => ResultRow::failed(n, rep_index, seed, e.to_string()),
    }
}

fn replicate(spec: &ExperimentSpec, n: usize, seed: u64) -> Result<ResultRow> {
    let generator = &spec.generator;
    let data = generator.generate(n, &mut stream_rng(seed, stream::DATA))?;
    let omega = resolve_omega(&spec.rate, n, &data)?;
    let target = GibbsTarget::new(spec.loss.clone(), spec.prior.clone(), &data, omega)?;
    let mh = MHConfig { seed, ..spec.mh.clone() };
    let truth = generator.truth();
    let divergence = build_divergence(spec.divergence, &spec.loss, generator, &data)?;
    let prepared = divergence.prepare(&truth, &mut stream_rng(seed, stream::DIVERGENCE))?;

    let (distances, point, accept_rate) = if target.is_sparse() {
        let chain = ss_mh_run(&target, &mh)?;
        let q = target.dim() - 1;
        let d: Vec<f64> = chain.draws.iter().map(|p| prepared.eval_sparse(p)).collect();
        let mode = chain.mode().ok_or_else(|| precondition("empty chain"))?.to_dense(q);
        (d, mode, chain.acceptance_rate())
    } else {
        let chain = mh_run(&target, &mh)?;
        let d: Vec<f64> = chain.draws.iter().map(|t| prepared.eval(t)).collect();
        (d, posterior_mean(&chain)?, chain.acceptance_rate())
    };

    let (misclass_est, misclass_truth) = match (&spec.loss, spec.holdout_size()) {
        (LossSpec::Mcid { basis }, Some(h)) if generator.is_mcid() => {
            let holdout = generator.generate(h, &mut stream_rng(seed, stream::HOLDOUT))?;
            let fitted = FunctionParam::new(basis.clone(), point.clone())?;
            let est = holdout_misclassification(|z| fitted.eval(z), &holdout)?;
            let tru = holdout_misclassification(|z| Ok(generator.mcid_truth(z).unwrap_or(f64::NAN)), &holdout)?;
            (Some(est), Some(tru))
        }
        _ => (None, None),
    };

    Ok(ResultRow {
        n,
        rep: 0,
        seed,
        omega: Some(omega),
        radius_q90: Some(quantile_type7(&distances, spec.radius_level)?),
        div_point_est: Some(prepared.eval(&point)),
        misclass_est,
        misclass_truth,
        accept_rate: Some(accept_rate),
        wall_ms: None,
        error: None,
        div_median: Some(quantile_type7(&distances, 0.5)?),
    })
}

/// Worker count: `GIBBS_WORKERS`, then the options, then the experiment config, then the hardware.
pub fn worker_count(spec: &ExperimentSpec, options: &RunOptions) -> usize {
    std::env::var("GIBBS_WORKERS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .or(options.workers)
        .or(spec.workers)
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()))
}

#[cfg(feature = "parallel")]
fn map_cells<T: Send>(
    cells: Vec<(usize, usize)>,
    workers: usize,
    f: impl Fn((usize, usize)) -> T + Sync + Send,
) -> Vec<T> {
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        // indexed collect keeps (nIndex, repIndex) order whatever the completion order
        Ok(pool) => pool.install(|| cells.into_par_iter().map(&f).collect()),
        Err(_) => cells.into_iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_cells<T: Send>(
    cells: Vec<(usize, usize)>,
    _workers: usize,
    f: impl Fn((usize, usize)) -> T + Sync + Send,
) -> Vec<T> {
    cells.into_iter().map(f).collect()
}

fn mean_of(rows: &[&ResultRow], f: impl Fn(&ResultRow) -> Option<f64>) -> Option<f64> {
    let v: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
    (!v.is_empty()).then(|| mean(&v))
}

/// Runs every cell of the grid. Cell failures are recorded in their rows and
/// do not stop the run; only an invalid spec is an error.
pub fn run_experiment(spec: &ExperimentSpec, options: &RunOptions) -> Result<ExperimentOutput> {
    spec.validate()?;
    let reps = spec.replications(options.full);
    let cells: Vec<(usize, usize)> = (0..spec.n_grid.len()).flat_map(|i| (0..reps).map(move |r| (i, r))).collect();
    let rows = map_cells(cells, worker_count(spec, options), |(i, r)| run_replication(spec, i, r, options));

    let grid: Vec<GridSummary> = spec
        .n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let cell = &rows[i * reps..(i + 1) * reps];
            let ok: Vec<&ResultRow> = cell.iter().filter(|r| r.error.is_none()).collect();
            let radii: Vec<f64> = ok.iter().filter_map(|r| r.radius_q90).collect();
            GridSummary {
                n,
                rows: cell.len(),
                errors: cell.len() - ok.len(),
                mean_omega: mean_of(&ok, |r| r.omega),
                mean_radius: mean_of(&ok, |r| r.radius_q90),
                median_radius: quantile_type7(&radii, 0.5).ok(),
                mean_div_point_est: mean_of(&ok, |r| r.div_point_est),
                mean_misclass_est: mean_of(&ok, |r| r.misclass_est),
                mean_misclass_truth: mean_of(&ok, |r| r.misclass_truth),
                mean_accept_rate: mean_of(&ok, |r| r.accept_rate),
            }
        })
        .collect();
    let pairs: Vec<(f64, f64)> =
        grid.iter().filter_map(|g| g.mean_radius.filter(|r| *r > 0.0).map(|r| (g.n as f64, r))).collect();
    let omega_by_n = spec
        .n_grid
        .iter()
        .map(|&n| OmegaEntry { n, omega: if spec.rate.is_data_driven() { None } else { rate_at(&spec.rate, n).ok() } })
        .collect();
    let summary = Summary {
        schema: spec.schema,
        spec: spec.clone(),
        full: options.full,
        replications: reps,
        holdout: spec.holdout_size(),
        omega_by_n,
        rate_fit: concentration_slope(&pairs).ok(),
        errors: rows.iter().filter(|r| r.error.is_some()).count(),
        grid,
    };
    Ok(ExperimentOutput { rows, summary })
}
