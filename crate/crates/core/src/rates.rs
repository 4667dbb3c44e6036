//! Learning-rate schedules `ωₙ` and the data-driven AUC rate `ω̂ₙ`.

use serde::{Deserialize, Serialize};

use crate::error::{precondition, GibbsError, Result};
use crate::losses::concordance_counts;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateSchedule {
    Fixed {
        omega: f64,
    },
    /// `ωₙ = c·n^{−γ}`.
    PowerLaw {
        c: f64,
        gamma: f64,
    },
    /// `tₙ = n^{2/(s−2)}`, `ωₙ = tₙ^{−1/2}`; for responses with polynomial tails of order `s > 3`.
    HeavyTail {
        s: f64,
    },
    /// `εₙ = (log n)^{γ/(2+2γ)} n^{−γ/(3+2γ)}`, `ωₙ = εₙ^{1/γ}`.
    Tsybakov {
        gamma: f64,
    },
    /// `aₙ·ω̂ₙ` from the two-sample covariances; resolved per dataset.
    AucDataDriven {
        #[serde(default)]
        multiplier: Multiplier,
    },
}

/// The factor `aₙ`, as a function of the total sample size `N = m + n`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Multiplier {
    Fixed {
        value: f64,
    },
    /// `log N`.
    #[default]
    Log,
    /// `c·N^γ`.
    PowerLaw {
        c: f64,
        gamma: f64,
    },
}

impl Multiplier {
    pub fn at(&self, total: usize) -> f64 {
        let n = total as f64;
        match *self {
            Multiplier::Fixed { value } => value,
            Multiplier::Log => n.ln(),
            Multiplier::PowerLaw { c, gamma } => c * n.powf(gamma),
        }
    }
}

/// The three heavy-tail sequences at one `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeavyTailTerms {
    pub t_n: f64,
    pub omega_n: f64,
    pub eps_n: f64,
}

pub fn heavy_tail_terms(s: f64, n: usize) -> Result<HeavyTailTerms> {
    if !(s > 3.0) {
        return Err(precondition(format!("heavy-tail order s must exceed 3, got {s}")));
    }
    if n < 2 {
        return Err(precondition("heavy-tail εₙ needs n ≥ 2"));
    }
    let nf = n as f64;
    let t_n = nf.powf(2.0 / (s - 2.0));
    Ok(HeavyTailTerms { t_n, omega_n: t_n.powf(-0.5), eps_n: nf.ln().sqrt() * nf.powf(-(s - 3.0) / (2.0 * s - 4.0)) })
}

pub fn tsybakov_eps(gamma: f64, n: usize) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(precondition(format!("Tsybakov exponent must be positive, got {gamma}")));
    }
    if n < 2 {
        return Err(precondition("Tsybakov εₙ needs n ≥ 2"));
    }
    let nf = n as f64;
    Ok(nf.ln().powf(gamma / (2.0 + 2.0 * gamma)) * nf.powf(-gamma / (3.0 + 2.0 * gamma)))
}

impl RateSchedule {
    pub fn validate(&self) -> Result<()> {
        let pos = |what: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(precondition(format!("{what} must be positive, got {v}")))
            }
        };
        match *self {
            RateSchedule::Fixed { omega } => pos("ω", omega),
            RateSchedule::PowerLaw { c, gamma } => {
                pos("c", c)?;
                if gamma >= 0.0 {
                    Ok(())
                } else {
                    Err(precondition(format!("power-law exponent must be ≥ 0, got {gamma}")))
                }
            }
            RateSchedule::HeavyTail { s } if !(s > 3.0) => {
                Err(precondition(format!("heavy-tail order s must exceed 3, got {s}")))
            }
            RateSchedule::HeavyTail { .. } => Ok(()),
            RateSchedule::Tsybakov { gamma } => pos("γ", gamma),
            RateSchedule::AucDataDriven { multiplier } => match multiplier {
                Multiplier::Fixed { value } if !(value >= 1.0) => {
                    Err(precondition(format!("AUC multiplier must be ≥ 1, got {value}")))
                }
                Multiplier::PowerLaw { c, gamma } if !(c >= 1.0 && gamma >= 0.0) => {
                    Err(precondition("AUC power-law multiplier needs c ≥ 1 and γ ≥ 0"))
                }
                _ => Ok(()),
            },
        }
    }

    pub fn is_data_driven(&self) -> bool {
        matches!(self, RateSchedule::AucDataDriven { .. })
    }
}

/// `ωₙ` for a deterministic schedule.
pub fn rate_at(schedule: &RateSchedule, n: usize) -> Result<f64> {
    schedule.validate()?;
    match *schedule {
        RateSchedule::Fixed { omega } => Ok(omega),
        RateSchedule::PowerLaw { c, gamma } => {
            if n == 0 {
                return Err(precondition("power-law rate needs n ≥ 1"));
            }
            Ok(c * (n as f64).powf(-gamma))
        }
        RateSchedule::HeavyTail { s } => Ok(heavy_tail_terms(s, n)?.omega_n),
        RateSchedule::Tsybakov { gamma } => Ok(tsybakov_eps(gamma, n)?.powf(1.0 / gamma)),
        RateSchedule::AucDataDriven { .. } => {
            Err(precondition("the AUC rate depends on the data; use auc_learning_rate"))
        }
    }
}

/// Empirical covariances of the concordance indicators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucCovariances {
    /// Pairs sharing a group-1 score.
    pub tau10: f64,
    /// Pairs sharing a group-0 score.
    pub tau01: f64,
    pub theta_hat: f64,
}

/// `τ̂₁₀`, `τ̂₀₁` and `θ̂` for group-0 scores (`m` of them) and group-1 scores (`n`).
pub fn auc_covariances(scores0: &[f64], scores1: &[f64]) -> Result<AucCovariances> {
    let (m, n) = (scores0.len(), scores1.len());
    if m < 2 || n < 2 {
        return Err(precondition(format!("AUC covariances need two scores per group, got {m} and {n}")));
    }
    let (per1, per0) = concordance_counts(scores0, scores1);
    let concordant: u64 = per1.iter().sum();
    let theta_hat = concordant as f64 / (m * n) as f64;
    // ordered pairs of distinct partners sharing one score: c(c − 1)
    let shared = |counts: &[u64]| counts.iter().map(|&c| (c * c.saturating_sub(1)) as f64).sum::<f64>();
    let th2 = theta_hat * theta_hat;
    Ok(AucCovariances {
        tau10: shared(&per1) / (n * m * (m - 1)) as f64 - th2,
        tau01: shared(&per0) / (m * n * (n - 1)) as f64 - th2,
        theta_hat,
    })
}

/// `multiplier · (m+n)/(2mn) · (τ̂₁₀/λ + τ̂₀₁/(1−λ))⁻¹` with `λ = n/(m+n)` the
/// group-1 fraction, `m` the group-0 size and `n` the group-1 size.
pub fn auc_learning_rate(cov: &AucCovariances, m: usize, n: usize, multiplier: f64) -> Result<f64> {
    if m == 0 || n == 0 {
        return Err(precondition("AUC learning rate needs nonempty groups"));
    }
    if !(multiplier >= 1.0) {
        return Err(precondition(format!("AUC multiplier must be ≥ 1, got {multiplier}")));
    }
    let total = (m + n) as f64;
    let lambda = n as f64 / total;
    let proxy = cov.tau10 / lambda + cov.tau01 / (1.0 - lambda);
    if !(proxy > 0.0) {
        return Err(GibbsError::DegenerateEstimate(format!(
            "variance proxy τ̂₁₀/λ + τ̂₀₁/(1−λ) = {proxy} is not positive"
        )));
    }
    Ok(multiplier * total / (2.0 * (m * n) as f64) / proxy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn heavy_tail_values() {
        let t = heavy_tail_terms(4.0, 10_000).unwrap();
        assert_relative_eq!(t.t_n, 10_000.0, max_relative = 1e-12);
        assert_relative_eq!(t.omega_n, 0.01, max_relative = 1e-12);
        assert_abs_diff_eq!(t.eps_n, 0.30348, epsilon = 1e-5);
        assert_eq!(rate_at(&RateSchedule::HeavyTail { s: 4.0 }, 10_000).unwrap(), t.omega_n);
        assert!(rate_at(&RateSchedule::HeavyTail { s: 3.0 }, 100).is_err());
        assert!(rate_at(&RateSchedule::HeavyTail { s: 4.0 }, 1).is_err());
    }

    #[test]
    fn fixed_and_tsybakov() {
        assert_eq!(rate_at(&RateSchedule::Fixed { omega: 1.0 }, 7).unwrap(), 1.0);
        let eps = tsybakov_eps(1.0, 100_000).unwrap();
        assert_abs_diff_eq!(eps, 0.184203, epsilon = 1e-6);
        assert_relative_eq!(rate_at(&RateSchedule::Tsybakov { gamma: 1.0 }, 100_000).unwrap(), eps);
        assert_relative_eq!(rate_at(&RateSchedule::PowerLaw { c: 2.0, gamma: 0.5 }, 100).unwrap(), 0.2);
        assert!(rate_at(&RateSchedule::AucDataDriven { multiplier: Multiplier::Log }, 10).is_err());
    }

    #[test]
    fn schedules_decrease() {
        for sched in [RateSchedule::HeavyTail { s: 5.0 }, RateSchedule::Tsybakov { gamma: 0.7 }] {
            let mut prev = f64::INFINITY;
            for n in 8..3000 {
                let w = rate_at(&sched, n).unwrap();
                assert!(w > 0.0 && w <= prev);
                prev = w;
            }
        }
    }

    #[test]
    fn heavy_tail_identity() {
        for s in [3.5, 4.0, 6.0, 10.0] {
            for n in [10, 100, 1000, 10_000, 1_000_000] {
                let t = heavy_tail_terms(s, n).unwrap();
                let lhs = n as f64 * t.omega_n * t.eps_n * t.eps_n;
                assert_relative_eq!(lhs, (n as f64).ln(), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn auc_covariance_worked_example() {
        let c = auc_covariances(&[0.1, 0.7], &[0.5, 0.9]).unwrap();
        assert_abs_diff_eq!(c.theta_hat, 0.75);
        assert_abs_diff_eq!(c.tau10, -0.0625, epsilon = 1e-15);
        assert_abs_diff_eq!(c.tau01, -0.0625, epsilon = 1e-15);
        assert!(matches!(auc_learning_rate(&c, 2, 2, 1.0), Err(GibbsError::DegenerateEstimate(_))));

        let sep = auc_covariances(&[0.0, 0.1, 0.2], &[1.0, 2.0]).unwrap();
        assert_eq!((sep.tau10, sep.tau01), (0.0, 0.0));
        assert!(auc_covariances(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn auc_rate_formula() {
        let c = AucCovariances { tau10: 0.05, tau01: 0.05, theta_hat: 0.7 };
        assert_relative_eq!(auc_learning_rate(&c, 100, 100, 1.0).unwrap(), 0.05, max_relative = 1e-14);
        assert_eq!(auc_learning_rate(&c, 100, 100, 2.0).unwrap(), 2.0 * auc_learning_rate(&c, 100, 100, 1.0).unwrap());
        assert!(auc_learning_rate(&c, 100, 100, 0.5).is_err());
    }

    #[test]
    fn auc_rate_swap_invariance() {
        let s0 = [0.3, -0.2, 1.1, 0.05, 0.9, -1.0, 0.4];
        let s1 = [1.3, 0.2, 0.8, 2.0, -0.3];
        let a = auc_covariances(&s0, &s1).unwrap();
        // negate scores so that concordance is preserved when the groups trade places
        let n0: Vec<f64> = s1.iter().map(|v| -v).collect();
        let n1: Vec<f64> = s0.iter().map(|v| -v).collect();
        let b = auc_covariances(&n0, &n1).unwrap();
        assert_abs_diff_eq!(a.theta_hat, b.theta_hat, epsilon = 1e-15);
        assert_abs_diff_eq!(a.tau10, b.tau01, epsilon = 1e-15);
        assert_abs_diff_eq!(a.tau01, b.tau10, epsilon = 1e-15);
        let ra = auc_learning_rate(&a, s0.len(), s1.len(), 1.0).unwrap();
        let rb = auc_learning_rate(&b, n0.len(), n1.len(), 1.0).unwrap();
        assert_relative_eq!(ra, rb, max_relative = 1e-13);
        // plain swap (no negation): θ̂ ↦ 1 − θ̂ up to ties
        let c = auc_covariances(&s1, &s0).unwrap();
        assert_abs_diff_eq!(c.theta_hat, 1.0 - a.theta_hat, epsilon = 1e-15);
    }

    #[test]
    fn multiplier_values() {
        assert_relative_eq!(Multiplier::Log.at(400), 400f64.ln());
        assert_eq!(Multiplier::Fixed { value: 1.0 }.at(400), 1.0);
        assert_relative_eq!(Multiplier::PowerLaw { c: 1.0, gamma: 0.5 }.at(400), 20.0);
    }
}
