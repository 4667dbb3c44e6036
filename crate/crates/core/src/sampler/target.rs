use crate::error::{precondition, shape, Result};
use crate::losses::{LossSpec, PreparedRisk};
use crate::model::Dataset;
use crate::priors::{PreparedPrior, PriorSpec, SparseParam};

/// `θ ↦ −ω·n·Rₙ(θ) + log Π(θ)`, with the data and prior prepared once.
///
/// For two-sample AUC data the multiplier `n` is the number of score pairs.
/// With a spike-and-slab prior the parameter is `(α, β)`: the prior covers
/// `β` and `α` must be `±1`.
#[derive(Debug, Clone)]
pub struct GibbsTarget {
    loss: LossSpec,
    prior: PriorSpec,
    risk: PreparedRisk,
    log_prior: PreparedPrior,
    omega: f64,
    n_obs: usize,
}

impl GibbsTarget {
    pub fn new(loss: LossSpec, prior: PriorSpec, data: &Dataset, omega: f64) -> Result<Self> {
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(precondition(format!("learning rate must be finite and ≥ 0, got {omega}")));
        }
        let prior = prior.resolve(data.len())?;
        let risk = loss.prepare(data)?;
        let log_prior = prior.prepare()?;
        let dim = risk.dim();
        match (&prior, log_prior.dim()) {
            (PriorSpec::SpikeSlab { q, .. }, _) if *q + 1 != dim => {
                return Err(shape(format!("spike-and-slab prior has q = {q}, parameter dimension is {dim}")))
            }
            (PriorSpec::SpikeSlab { .. }, _) | (_, None) => {}
            (_, Some(d)) if d != dim => return Err(shape(format!("prior dimension {d}, loss dimension {dim}"))),
            _ => {}
        }
        Ok(Self { loss, prior, risk, log_prior, omega, n_obs: data.len() })
    }

    pub fn dim(&self) -> usize {
        self.risk.dim()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn risk(&self) -> &PreparedRisk {
        &self.risk
    }

    pub(crate) fn prepared_prior(&self) -> &PreparedPrior {
        &self.log_prior
    }

    /// Number of observations (not pairs).
    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.prior, PriorSpec::SpikeSlab { .. })
    }

    pub fn log_unnormalized(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim() {
            return Err(shape(format!("θ has length {}, target dimension is {}", theta.len(), self.dim())));
        }
        Ok(self.log_density(theta))
    }

    /// Unchecked [`Self::log_unnormalized`].
    pub(crate) fn log_density(&self, theta: &[f64]) -> f64 {
        let lp = if self.is_sparse() {
            if theta[0] != 1.0 && theta[0] != -1.0 {
                return f64::NEG_INFINITY;
            }
            self.log_prior.log_density(&theta[1..])
        } else {
            self.log_prior.log_density(theta)
        };
        if lp == f64::NEG_INFINITY || !self.risk.in_domain(theta) {
            return f64::NEG_INFINITY;
        }
        lp - self.omega * self.risk.sample_size() as f64 * self.risk.risk(theta)
    }

    pub(crate) fn log_density_sparse(&self, p: &SparseParam) -> f64 {
        let r = self.risk.risk_sparse(p.alpha, &p.support, &p.values);
        self.log_prior.log_density_sparse(p) - self.omega * self.risk.sample_size() as f64 * r
    }
}
