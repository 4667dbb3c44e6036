use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::priors::SparseParam;
use crate::stats::{effective_sample_size, quantile_sorted};

/// Kept draws of one Metropolis–Hastings run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain<D = Vec<f64>> {
    pub draws: Vec<D>,
    /// Target log-density at each kept draw.
    pub log_density: Vec<f64>,
    /// Accepted proposals over all `steps` iterations (burn-in included).
    pub accepted: usize,
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub omega: f64,
}

impl<D> Chain<D> {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.steps as f64
    }

    /// Draw with the highest target density.
    pub fn mode(&self) -> Option<&D> {
        self.log_density.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| &self.draws[i])
    }

    fn map_draws<E>(&self, f: impl Fn(&D) -> E) -> Chain<E> {
        Chain {
            draws: self.draws.iter().map(f).collect(),
            log_density: self.log_density.clone(),
            accepted: self.accepted,
            steps: self.steps,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            omega: self.omega,
        }
    }
}

impl Chain<SparseParam> {
    /// Dense `(α, β₁, …, β_q)` draws.
    pub fn to_dense(&self, q: usize) -> Chain<Vec<f64>> {
        self.map_draws(|p| p.to_dense(q))
    }
}

impl Chain<Vec<f64>> {
    pub fn dim(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }

    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[j]).collect()
    }
}

/// Coordinate-wise mean of the draws.
pub fn posterior_mean(chain: &Chain) -> Result<Vec<f64>> {
    if chain.is_empty() {
        return Err(precondition("posterior mean of an empty chain"));
    }
    let dim = chain.dim();
    let mut acc = vec![0.0; dim];
    for d in &chain.draws {
        for (a, v) in acc.iter_mut().zip(d) {
            *a += v;
        }
    }
    Ok(acc.into_iter().map(|a| a / chain.len() as f64).collect())
}

/// Equal-tailed interval from type-7 quantiles at `(1 ∓ level)/2`.
pub fn credible_interval_of(values: &[f64], level: f64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(precondition("credible interval of an empty chain"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(precondition(format!("credible level {level} outside (0, 1)")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((quantile_sorted(&sorted, (1.0 - level) / 2.0), quantile_sorted(&sorted, (1.0 + level) / 2.0)))
}

pub fn credible_interval(chain: &Chain, coordinate: usize, level: f64) -> Result<(f64, f64)> {
    if coordinate >= chain.dim() && !chain.is_empty() {
        return Err(crate::error::shape(format!("coordinate {coordinate} of a {}-dimensional chain", chain.dim())));
    }
    credible_interval_of(&chain.coordinate(coordinate), level)
}

/// One draw per row: `draw, theta_1, …, theta_J, log_density`.
pub fn write_chain_csv<W: Write>(chain: &Chain, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["draw".to_string()];
    header.extend((1..=chain.dim()).map(|j| format!("theta_{j}")));
    header.push("log_density".into());
    w.write_record(&header)?;
    for (i, (d, lp)) in chain.draws.iter().zip(&chain.log_density).enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(d.iter().map(|v| v.to_string()));
        rec.push(lp.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub draws: usize,
    pub mean: Vec<f64>,
    pub level: f64,
    pub intervals: Vec<(f64, f64)>,
    pub ess: Vec<f64>,
    pub acceptance_rate: f64,
    pub seed: u64,
    pub omega: f64,
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl ChainSummary {
    pub fn new(chain: &Chain, level: f64) -> Result<Self> {
        let mean = posterior_mean(chain)?;
        let intervals = (0..chain.dim()).map(|j| credible_interval(chain, j, level)).collect::<Result<_>>()?;
        let ess = (0..chain.dim()).map(|j| effective_sample_size(&chain.coordinate(j))).collect();
        Ok(Self {
            draws: chain.len(),
            mean,
            level,
            intervals,
            ess,
            acceptance_rate: chain.acceptance_rate(),
            seed: chain.seed,
            omega: chain.omega,
            steps: chain.steps,
            burn_in: chain.burn_in,
            thin: chain.thin,
        })
    }
}
