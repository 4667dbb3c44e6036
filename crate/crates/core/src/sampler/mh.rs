use rand::Rng;
use rand_distr::StandardNormal;

use super::{Chain, GibbsTarget, InitSpec, MHConfig, MAX_INIT_ATTEMPTS};
use crate::error::{precondition, shape, GibbsError, Result};
use crate::rng::{stream, stream_rng};

/// `min(1, exp(Δ))`; zero for `Δ = −∞` or NaN.
pub fn accept_probability(delta: f64) -> f64 {
    if delta >= 0.0 {
        1.0
    } else if delta.is_nan() {
        0.0
    } else {
        delta.exp()
    }
}

/// Metropolis rule. Consumes a uniform only when `Δ < 0`.
#[inline]
pub fn metropolis_accept<R: Rng + ?Sized>(delta: f64, rng: &mut R) -> bool {
    delta >= 0.0 || rng.random::<f64>() < accept_probability(delta)
}

/// Gaussian random-walk Metropolis on an arbitrary log-density.
pub fn metropolis<F, R>(
    mut log_density: F,
    init: Vec<f64>,
    scales: &[f64],
    config: &MHConfig,
    rng: &mut R,
) -> Result<Chain>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    config.validate()?;
    if scales.len() != init.len() {
        return Err(shape(format!("{} proposal scales for dimension {}", scales.len(), init.len())));
    }
    let mut current = init;
    let mut lp = log_density(&current);
    if !lp.is_finite() {
        return Err(GibbsError::Initialization(1));
    }
    let mut proposal = current.clone();
    let mut chain = Chain {
        draws: Vec::with_capacity(config.kept_draws()),
        log_density: Vec::with_capacity(config.kept_draws()),
        accepted: 0,
        steps: config.steps,
        burn_in: config.burn_in,
        thin: config.thin,
        seed: config.seed,
        omega: f64::NAN,
    };
    for t in 1..=config.steps {
        for ((p, c), s) in proposal.iter_mut().zip(&current).zip(scales) {
            let z: f64 = rng.sample(StandardNormal);
            *p = c + s * z;
        }
        let lp_new = log_density(&proposal);
        if metropolis_accept(lp_new - lp, rng) {
            std::mem::swap(&mut current, &mut proposal);
            lp = lp_new;
            chain.accepted += 1;
        }
        if config.keeps(t) {
            chain.draws.push(current.clone());
            chain.log_density.push(lp);
        }
    }
    Ok(chain)
}

pub(super) fn initial_point<R: Rng + ?Sized>(target: &GibbsTarget, init: &InitSpec, rng: &mut R) -> Result<Vec<f64>> {
    let dim = target.dim();
    let theta = match init {
        InitSpec::Prior => {
            for _ in 0..MAX_INIT_ATTEMPTS {
                let theta = target.prepared_prior().sample(rng)?;
                if theta.len() == dim && target.log_density(&theta).is_finite() {
                    return Ok(theta);
                }
            }
            return Err(GibbsError::Initialization(MAX_INIT_ATTEMPTS));
        }
        InitSpec::Zero => vec![0.0; dim],
        InitSpec::Point(theta) => {
            if theta.len() != dim {
                return Err(shape(format!("initial point has length {}, target dimension is {dim}", theta.len())));
            }
            theta.clone()
        }
        InitSpec::Erm => target
            .risk()
            .closed_form_minimizer()
            .ok_or_else(|| precondition("this loss has no closed-form minimizer for initialisation"))??,
    };
    if !target.log_density(&theta).is_finite() {
        return Err(GibbsError::Initialization(1));
    }
    Ok(theta)
}

/// Samples the Gibbs posterior of a continuous-parameter target.
///
/// Deterministic given `config.seed`.
pub fn mh_run(target: &GibbsTarget, config: &MHConfig) -> Result<Chain> {
    config.validate()?;
    if target.is_sparse() {
        return Err(precondition("spike-and-slab targets are sampled with ss_mh_run"));
    }
    let mut rng = stream_rng(config.seed, stream::CHAIN);
    let init = initial_point(target, &config.init, &mut rng)?;
    let scales = config.scales(target.dim(), target.prior().scale(), target.n_obs())?;
    let mut chain = metropolis(|th| target.log_density(th), init, &scales, config, &mut rng)?;
    chain.omega = target.omega();
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossSpec;
    use crate::model::{BasisSpec, Dataset, Observation};
    use crate::priors::PriorSpec;
    use crate::rng::Rng as ChainRng;
    use crate::sampler::{posterior_mean, ProposalScale};
    use crate::stats::{effective_sample_size, mean, variance};
    use rand::SeedableRng;

    fn normal_prior_target(omega: f64) -> GibbsTarget {
        let data = Dataset::new(vec![Observation::RegPair { x: vec![0.0], y: 0.3 }]).unwrap();
        GibbsTarget::new(
            LossSpec::Squared { features: BasisSpec::dictionary(&["1"]).unwrap() },
            PriorSpec::GaussianIid { mean: 0.0, sd: 1.0, dim: 1 },
            &data,
            omega,
        )
        .unwrap()
    }

    #[test]
    fn acceptance_probability_values() {
        assert!((accept_probability(-0.5) - 0.606_530_659_712_633_4).abs() < 1e-15);
        assert_eq!(accept_probability(0.3), 1.0);
        assert_eq!(accept_probability(f64::NEG_INFINITY), 0.0);
        assert_eq!(accept_probability(f64::NAN), 0.0);
    }

    #[test]
    fn samples_standard_normal() {
        let target = normal_prior_target(0.0);
        let config = MHConfig {
            steps: 50_000,
            burn_in: 1000,
            thin: 1,
            proposal_scale: Some(ProposalScale::Scalar(2.4)),
            seed: 17,
            ..Default::default()
        };
        let chain = mh_run(&target, &config).unwrap();
        let xs = chain.coordinate(0);
        let se = (variance(&xs) / effective_sample_size(&xs)).sqrt();
        assert!(mean(&xs).abs() < 3.0 * se, "mean {} se {se}", mean(&xs));
        assert!((variance(&xs) - 1.0).abs() < 0.1);
        assert_eq!(chain.len(), config.kept_draws());
        assert!(chain.accepted <= chain.steps);
    }

    #[test]
    fn reproducible() {
        let target = normal_prior_target(1.0);
        let config = MHConfig { steps: 2000, burn_in: 100, seed: 5, ..Default::default() };
        let a = mh_run(&target, &config).unwrap();
        let b = mh_run(&target, &config).unwrap();
        assert_eq!(a, b);
        let c = mh_run(&target, &MHConfig { seed: 6, ..config }).unwrap();
        assert_ne!(a.draws, c.draws);
        assert_eq!(posterior_mean(&a).unwrap().len(), 1);
    }

    #[test]
    fn bad_init_is_initialization_error() {
        let d = Dataset::two_sample(&[0.1, 0.7], &[0.5, 0.9]).unwrap();
        let t = GibbsTarget::new(LossSpec::Auc, PriorSpec::Uniform { lo: 0.0, hi: 1.0, dim: 1 }, &d, 1.0).unwrap();
        let config = MHConfig { steps: 10, burn_in: 0, init: InitSpec::Point(vec![2.0]), ..Default::default() };
        assert!(matches!(mh_run(&t, &config), Err(GibbsError::Initialization(_))));
        let ok = MHConfig { init: InitSpec::Erm, ..config };
        assert!(mh_run(&t, &ok).is_ok());
    }

    #[test]
    fn detailed_balance_on_five_states() {
        // discretized target with a symmetric ±1 (mod 5) proposal and the same accept rule
        let weights = [1.0, 3.0, 2.0, 5.0, 4.0];
        let total: f64 = weights.iter().sum();
        let pi: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut rng = ChainRng::seed_from_u64(99);
        let steps = 400_000;
        let mut counts = [[0usize; 5]; 5];
        let mut state = 0usize;
        for _ in 0..steps {
            let prop = if rng.random::<bool>() { (state + 1) % 5 } else { (state + 4) % 5 };
            let next = if metropolis_accept(pi[prop].ln() - pi[state].ln(), &mut rng) { prop } else { state };
            counts[state][next] += 1;
            state = next;
        }
        // flow i→j estimated by the joint frequency, which equals π(i)P(i,j) at stationarity
        for i in 0..5 {
            let j = (i + 1) % 5;
            let fij = counts[i][j] as f64 / steps as f64;
            let fji = counts[j][i] as f64 / steps as f64;
            let expected = pi[i].min(pi[j]) * 0.5;
            let se = (expected / steps as f64).sqrt() * 3.0; // inflation for autocorrelation
            assert!((fij - fji).abs() < 3.0 * se, "{i}->{j}: {fij} vs {fji}");
            assert!((fij - expected).abs() < 3.0 * se, "{i}->{j}: {fij} vs {expected}");
        }
    }
}
