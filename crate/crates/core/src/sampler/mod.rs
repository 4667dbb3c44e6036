//! The Gibbs posterior as a target density and Metropolis–Hastings samplers
//! over continuous and sparse parameter spaces.

mod chain;
mod mh;
mod sparse;
mod target;

pub use chain::{credible_interval, credible_interval_of, posterior_mean, write_chain_csv, Chain, ChainSummary};
pub use mh::{accept_probability, metropolis, metropolis_accept, mh_run};
pub use sparse::ss_mh_run;
pub use target::GibbsTarget;

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};

/// Random-walk step size: one value for every coordinate, or one per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProposalScale {
    Scalar(f64),
    PerCoord(Vec<f64>),
}

/// Starting point of a chain.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSpec {
    /// Prior draw, retried until the target density is finite.
    #[default]
    Prior,
    Zero,
    Point(Vec<f64>),
    /// Closed-form risk minimizer (least squares, or `θ̂` for the AUC).
    Erm,
}

/// Move probabilities of the sparse sampler; add/remove/within are renormalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SparseMoves {
    pub add: f64,
    pub remove: f64,
    pub within: f64,
    /// Probability of additionally proposing `α → −α` in a step.
    pub flip: f64,
}

impl Default for SparseMoves {
    fn default() -> Self {
        Self { add: 1.0 / 3.0, remove: 1.0 / 3.0, within: 1.0 / 3.0, flip: 0.05 }
    }
}

/// Initial retries for [`InitSpec::Prior`].
pub const MAX_INIT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MHConfig {
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Defaults to `2.4/√J` times the prior scale.
    pub proposal_scale: Option<ProposalScale>,
    /// Scales are multiplied by `n^{−e}`, so one config serves a grid of sample sizes.
    pub scale_exponent: f64,
    pub seed: u64,
    pub init: InitSpec,
    pub moves: SparseMoves,
}

impl Default for MHConfig {
    fn default() -> Self {
        Self {
            steps: 50_000,
            burn_in: 10_000,
            thin: 5,
            proposal_scale: None,
            scale_exponent: 0.0,
            seed: 0,
            init: InitSpec::Prior,
            moves: SparseMoves::default(),
        }
    }
}

impl MHConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps <= self.burn_in {
            return Err(precondition(format!("steps ({}) must exceed burn-in ({})", self.steps, self.burn_in)));
        }
        if self.thin == 0 {
            return Err(precondition("thin must be at least 1"));
        }
        let ok = |s: &f64| *s > 0.0 && s.is_finite();
        match &self.proposal_scale {
            Some(ProposalScale::Scalar(s)) if !ok(s) => {
                return Err(precondition(format!("proposal scale must be positive, got {s}")))
            }
            Some(ProposalScale::PerCoord(v)) if !v.iter().all(ok) => {
                return Err(precondition("proposal scales must be positive"))
            }
            _ => {}
        }
        let m = self.moves;
        if [m.add, m.remove, m.within].iter().any(|p| !(*p > 0.0)) || !(0.0..=1.0).contains(&m.flip) {
            return Err(precondition("sparse move probabilities must be positive (flip in [0, 1])"));
        }
        Ok(())
    }

    /// Number of kept draws, `⌊(steps − burnIn)/thin⌋`.
    pub fn kept_draws(&self) -> usize {
        (self.steps - self.burn_in) / self.thin
    }

    /// Per-coordinate scales for a `dim`-dimensional target at sample size `n`.
    pub fn scales(&self, dim: usize, prior_scale: f64, n: usize) -> Result<Vec<f64>> {
        let shrink = (n.max(1) as f64).powf(-self.scale_exponent);
        let base = match &self.proposal_scale {
            None => vec![2.4 / (dim as f64).sqrt() * prior_scale; dim],
            Some(ProposalScale::Scalar(s)) => vec![*s; dim],
            Some(ProposalScale::PerCoord(v)) => {
                if v.len() != dim {
                    return Err(crate::error::shape(format!("{} proposal scales for dimension {dim}", v.len())));
                }
                v.clone()
            }
        };
        Ok(base.into_iter().map(|s| s * shrink).collect())
    }

    /// Whether iteration `t` (1-based) is recorded.
    #[inline]
    pub(crate) fn keeps(&self, t: usize) -> bool {
        t > self.burn_in && (t - self.burn_in).is_multiple_of(self.thin)
    }
}
