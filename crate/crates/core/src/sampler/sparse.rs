use rand::Rng;
use rand_distr::StandardNormal;

use super::{Chain, GibbsTarget, InitSpec, MHConfig, ProposalScale};
use crate::error::{precondition, GibbsError, Result};
use crate::priors::{laplace_log_density, sample_laplace, PreparedPrior, SparseParam};
use crate::rng::{stream, stream_rng};

use super::mh::metropolis_accept;

/// Within-model step as a fraction of the slab scale `√2/λ`, when not configured.
const DEFAULT_WITHIN_FRACTION: f64 = 0.25;

/// Samples `(α, S, β_S)` under a spike-and-slab prior with add / remove /
/// within-model moves, plus an optional sign flip of `α` each step.
///
/// The add move draws the new coefficient from the slab, so the slab density
/// cancels from the acceptance ratio; only the configuration masses and the
/// index-selection probabilities remain. Moves that are impossible in the
/// current state (add when `|S| = q`, remove or within when `S = ∅`) leave the
/// chain in place.
pub fn ss_mh_run(target: &GibbsTarget, config: &MHConfig) -> Result<Chain<SparseParam>> {
    config.validate()?;
    let PreparedPrior::SpikeSlab { q, lambda, .. } = *target.prepared_prior() else {
        return Err(precondition("ss_mh_run needs a spike-and-slab prior"));
    };
    let mut rng = stream_rng(config.seed, stream::CHAIN);
    let mut current = match &config.init {
        InitSpec::Prior => {
            let mut found = None;
            for _ in 0..super::MAX_INIT_ATTEMPTS {
                let p = target.prepared_prior().sample_sparse(&mut rng);
                if target.log_density_sparse(&p).is_finite() {
                    found = Some(p);
                    break;
                }
            }
            found.ok_or(GibbsError::Initialization(super::MAX_INIT_ATTEMPTS))?
        }
        InitSpec::Zero => SparseParam::empty(1.0),
        InitSpec::Point(theta) => {
            if theta.len() != q + 1 {
                return Err(crate::error::shape(format!(
                    "initial point has length {}, expected {}",
                    theta.len(),
                    q + 1
                )));
            }
            let (support, values): (Vec<usize>, Vec<f64>) =
                theta[1..].iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(k, b)| (k, *b)).unzip();
            SparseParam::new(theta[0], support, values)?
        }
        InitSpec::Erm => return Err(precondition("no closed-form initialisation for sparse classifiers")),
    };
    let mut lp = target.log_density_sparse(&current);
    if !lp.is_finite() {
        return Err(GibbsError::Initialization(1));
    }

    let shrink = (target.n_obs().max(1) as f64).powf(-config.scale_exponent);
    let within_scale = shrink
        * match &config.proposal_scale {
            Some(ProposalScale::Scalar(s)) => *s,
            Some(ProposalScale::PerCoord(v)) => v[0],
            None => DEFAULT_WITHIN_FRACTION * std::f64::consts::SQRT_2 / lambda,
        };
    let m = config.moves;
    let total = m.add + m.remove + m.within;
    let (p_add, p_remove) = (m.add / total, m.remove / total);
    let log_rev_add = (p_remove / p_add).ln();

    let mut chain = Chain {
        draws: Vec::with_capacity(config.kept_draws()),
        log_density: Vec::with_capacity(config.kept_draws()),
        accepted: 0,
        steps: config.steps,
        burn_in: config.burn_in,
        thin: config.thin,
        seed: config.seed,
        omega: target.omega(),
    };
    let qf = q as f64;
    for t in 1..=config.steps {
        let u: f64 = rng.random();
        let s = current.support.len();
        let mut proposal = None;
        if u < p_add {
            if s < q {
                // r-th index not in S
                let mut r = rng.random_range(0..q - s);
                let mut k = 0;
                let mut pos = 0;
                loop {
                    if pos < s && current.support[pos] == k {
                        pos += 1;
                    } else if r == 0 {
                        break;
                    } else {
                        r -= 1;
                    }
                    k += 1;
                }
                let b = sample_laplace(lambda, &mut rng);
                let mut next = current.clone();
                next.support.insert(pos, k);
                next.values.insert(pos, b);
                let correction =
                    -laplace_log_density(lambda, b) + (qf - s as f64).ln() - (s as f64 + 1.0).ln() + log_rev_add;
                proposal = Some((next, correction));
            }
        } else if u < p_add + p_remove {
            if s > 0 {
                let j = rng.random_range(0..s);
                let mut next = current.clone();
                next.support.remove(j);
                let b = next.values.remove(j);
                let correction =
                    laplace_log_density(lambda, b) + (s as f64).ln() - (qf - s as f64 + 1.0).ln() - log_rev_add;
                proposal = Some((next, correction));
            }
        } else if s > 0 {
            let mut next = current.clone();
            for v in next.values.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v += within_scale * z;
            }
            proposal = Some((next, 0.0));
        }
        if let Some((next, correction)) = proposal {
            let lp_new = target.log_density_sparse(&next);
            if metropolis_accept(lp_new - lp + correction, &mut rng) {
                current = next;
                lp = lp_new;
                chain.accepted += 1;
            }
        }
        if m.flip > 0.0 && rng.random::<f64>() < m.flip {
            let mut next = current.clone();
            next.alpha = -next.alpha;
            let lp_new = target.log_density_sparse(&next);
            if metropolis_accept(lp_new - lp, &mut rng) {
                current = next;
                lp = lp_new;
            }
        }
        if config.keeps(t) {
            chain.draws.push(current.clone());
            chain.log_density.push(lp);
        }
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossSpec;
    use crate::model::{Dataset, Observation};
    use crate::priors::{spike_slab_log_mass, PriorSpec};

    fn classifier_data(q: usize, n: usize, seed: u64) -> Dataset {
        // x₀ = 1 so α is an intercept sign; label 1{x₁ > 0.1}
        let mut rng = stream_rng(seed, stream::DATA);
        let obs = (0..n)
            .map(|_| {
                let mut x = vec![1.0];
                x.extend((0..q).map(|_| rng.random_range(-1.0..1.0)));
                let y = if x[1] > 0.1 { 1.0 } else { 0.0 };
                Observation::ClassTriple { x, y, z: None }
            })
            .collect();
        Dataset::new(obs).unwrap()
    }

    #[test]
    fn prior_only_matches_configuration_masses() {
        let q = 3;
        let prior = PriorSpec::SpikeSlab { q, a: 1.0, c: 1.0, lambda: Some(1.0) };
        let target = GibbsTarget::new(LossSpec::ZeroOneLinear, prior.clone(), &classifier_data(q, 20, 1), 0.0).unwrap();
        let config = MHConfig { steps: 300_000, burn_in: 1000, thin: 1, seed: 3, ..Default::default() };
        let chain = ss_mh_run(&target, &config).unwrap();
        let n = chain.len() as f64;
        let mut counts = [0usize; 8];
        for d in &chain.draws {
            let mask: usize = d.support.iter().map(|k| 1 << k).sum();
            counts[mask] += 1;
        }
        for (mask, &c) in counts.iter().enumerate() {
            let s: Vec<usize> = (0..q).filter(|k| mask >> k & 1 == 1).collect();
            let p = spike_slab_log_mass(&prior, &s).unwrap().exp();
            let f = c as f64 / n;
            // autocorrelated draws: compare against an inflated binomial s.e.
            let se = (p * (1.0 - p) / n).sqrt() * 4.0;
            assert!((f - p).abs() < 3.0 * se, "S={s:?}: {f} vs {p}");
        }
    }

    #[test]
    fn finds_the_true_configuration() {
        let q = 3;
        let prior = PriorSpec::SpikeSlab { q, a: 1.0, c: 1.0, lambda: Some(1.0) };
        let target = GibbsTarget::new(LossSpec::ZeroOneLinear, prior, &classifier_data(q, 2000, 2), 2.0).unwrap();
        let config = MHConfig { steps: 40_000, burn_in: 10_000, thin: 2, seed: 4, ..Default::default() };
        let chain = ss_mh_run(&target, &config).unwrap();
        let hits = chain.draws.iter().filter(|d| d.support == vec![0]).count();
        assert!(hits as f64 >= 0.9 * chain.len() as f64, "{hits} of {}", chain.len());
        let again = ss_mh_run(&target, &config).unwrap();
        assert_eq!(chain, again);
    }
}
