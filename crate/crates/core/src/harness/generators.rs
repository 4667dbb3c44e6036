use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{GibbsError, Result};
use crate::model::{Dataset, Observation, ObservationSampler, Reference};
use crate::stats::{normal_cdf, normal_quantile};

/// Shift that keeps `η` away from ½ on either side of the threshold.
pub const MCID_MARGIN: f64 = 0.05;

/// Named smooth mean functions on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    /// `sin(2πx)`.
    Sine,
    /// `exp(−(x − ½)²/0.02)`.
    Bump,
    /// `x³ − x`.
    Cubic,
}

impl Curve {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Curve::Sine => (2.0 * std::f64::consts::PI * x).sin(),
            Curve::Bump => (-(x - 0.5) * (x - 0.5) / 0.02).exp(),
            Curve::Cubic => x * x * x - x,
        }
    }
}

/// Data-generating processes with known truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// `Z ~ U[0,3]`, `X | z ~ N(z³ − 3z² + 5, 1)`, `P(Y = 1 | x, z)` a shifted
    /// normal CDF with sd ½ around the threshold.
    Mcid1,
    /// `Z ~ U[0,3]²`, `X | z ~ N(z₁ + 2z₂, 1)`, shifted normal CDF with sd 1.
    Mcid2,
    /// `y = β₀ + Σ βⱼxⱼ + sd·ε`, `xⱼ ~ U[0,1]`, `ε ~ N(0,1)`.
    QuantileReg { tau: f64, beta: Vec<f64>, sd: f64 },
    /// `U₀ ~ N(0,1)`, `U₁ ~ N(shift,1)`, `n` scores per group.
    Auc { shift: f64 },
    /// `y = β₀ + Σ βⱼxⱼ + t_df`, `xⱼ ~ U[0,1]`.
    HeavyTail { beta: Vec<f64>, df: f64 },
    /// Fixed design `xᵢ = i/n`, `yᵢ = f(xᵢ) + sd·εᵢ`.
    MeanCurve { function: Curve, sd: f64 },
    /// `X ~ U[−1,1]^{q+1}`, `y = 1{xᵀθ* > 0}` flipped with probability `flip`,
    /// `θ* = (1, β*, 0, …, 0)`.
    Massart { q: usize, beta_star: Vec<f64>, flip: f64 },
}

fn config(msg: String) -> GibbsError {
    GibbsError::Config(msg)
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            GeneratorSpec::QuantileReg { tau, beta, sd } => {
                if !(*tau > 0.0 && *tau < 1.0) {
                    return Err(config(format!("quantile level {tau} outside (0, 1)")));
                }
                if beta.is_empty() {
                    return Err(config("quantile generator needs an intercept".into()));
                }
                if !(*sd > 0.0) {
                    return Err(config(format!("noise sd must be positive, got {sd}")));
                }
            }
            GeneratorSpec::Auc { shift } if !shift.is_finite() => {
                return Err(config(format!("AUC shift must be finite, got {shift}")))
            }
            GeneratorSpec::HeavyTail { beta, df } => {
                if !(*df > 2.0) {
                    return Err(config(format!("degrees of freedom must exceed 2, got {df}")));
                }
                if beta.is_empty() {
                    return Err(config("heavy-tail generator needs an intercept".into()));
                }
            }
            GeneratorSpec::MeanCurve { sd, .. } if !(*sd > 0.0) => {
                return Err(config(format!("noise sd must be positive, got {sd}")))
            }
            GeneratorSpec::Massart { q, beta_star, flip } => {
                if beta_star.len() > *q {
                    return Err(config(format!("{} active coefficients for q = {q}", beta_star.len())));
                }
                if !(0.0..0.5).contains(flip) {
                    return Err(config(format!("label-flip probability {flip} outside [0, ½)")));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn is_mcid(&self) -> bool {
        matches!(self, GeneratorSpec::Mcid1 | GeneratorSpec::Mcid2)
    }

    /// Hold-out size used for misclassification rates.
    pub fn default_holdout(&self) -> Option<usize> {
        match self {
            GeneratorSpec::Mcid1 => Some(100),
            GeneratorSpec::Mcid2 => Some(1000),
            _ => None,
        }
    }

    /// `(desk, full)` replication counts.
    pub fn default_replications(&self) -> Option<(usize, usize)> {
        match self {
            GeneratorSpec::Mcid1 => Some((50, 250)),
            GeneratorSpec::Mcid2 => Some((20, 100)),
            _ => None,
        }
    }

    /// The true MCID `θ*(z)`.
    pub fn mcid_truth(&self, z: &[f64]) -> Option<f64> {
        match self {
            GeneratorSpec::Mcid1 => Some(z[0].powi(3) - 3.0 * z[0] * z[0] + 5.0),
            GeneratorSpec::Mcid2 => Some(z[0] + 2.0 * z[1]),
            _ => None,
        }
    }

    fn mcid_sd(&self) -> f64 {
        if matches!(self, GeneratorSpec::Mcid1) {
            0.5
        } else {
            1.0
        }
    }

    /// `η_z(x) = P(Y = +1 | x, z)`.
    pub fn eta(&self, x: f64, z: &[f64]) -> Option<f64> {
        let mu = self.mcid_truth(z)?;
        Some(mcid_eta(x - mu, self.mcid_sd()))
    }

    /// Bayes misclassification rate `E min(η, 1 − η)`.
    ///
    /// `η` depends on `(x, z)` only through `x − θ*(z) ~ N(0, 1)`, so this is a
    /// one-dimensional integral, done by composite Simpson on `[−10, 10]`.
    pub fn bayes_rate(&self) -> Option<f64> {
        if !self.is_mcid() {
            return None;
        }
        let sd = self.mcid_sd();
        let f = |d: f64| {
            let e = mcid_eta(d, sd);
            e.min(1.0 - e) * (-0.5 * d * d).exp() / (2.0 * std::f64::consts::PI).sqrt()
        };
        // split at the discontinuity d = 0
        Some(simpson(f, -10.0, 0.0, 4000) + simpson(f, 0.0, 10.0, 4000))
    }

    /// The true parameter.
    pub fn truth(&self) -> Reference {
        match self {
            GeneratorSpec::Mcid1 | GeneratorSpec::Mcid2 => {
                let g = self.clone();
                Reference::Function(Arc::new(move |z| g.mcid_truth(z).unwrap_or(f64::NAN)))
            }
            GeneratorSpec::QuantileReg { tau, beta, sd } => {
                let mut t = beta.clone();
                t[0] += sd * normal_quantile(*tau);
                Reference::Point(t)
            }
            GeneratorSpec::Auc { shift } => Reference::Point(vec![normal_cdf(shift / std::f64::consts::SQRT_2)]),
            GeneratorSpec::HeavyTail { beta, .. } => Reference::Point(beta.clone()),
            GeneratorSpec::MeanCurve { function, .. } => {
                let f = *function;
                Reference::Function(Arc::new(move |x| f.eval(x[0])))
            }
            GeneratorSpec::Massart { q, beta_star, .. } => Reference::Point(massart_theta(*q, beta_star)),
        }
    }

    pub fn generate(&self, n: usize, rng: &mut dyn RngCore) -> Result<Dataset> {
        self.validate()?;
        if n == 0 {
            return Err(crate::error::precondition("cannot generate an empty dataset"));
        }
        let normal = |rng: &mut dyn RngCore| -> f64 { StandardNormal.sample(rng) };
        let obs: Vec<Observation> = match self {
            GeneratorSpec::Mcid1 | GeneratorSpec::Mcid2 => (0..n)
                .map(|_| {
                    let z: Vec<f64> = match self {
                        GeneratorSpec::Mcid1 => vec![rng.random_range(0.0..3.0)],
                        _ => vec![rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)],
                    };
                    let mu = self.mcid_truth(&z).unwrap();
                    let x = mu + normal(rng);
                    let eta = mcid_eta(x - mu, self.mcid_sd());
                    let y = if rng.random::<f64>() < eta { 1.0 } else { -1.0 };
                    Observation::ClassTriple { x: vec![x], y, z: Some(z) }
                })
                .collect(),
            GeneratorSpec::QuantileReg { beta, sd, .. } => (0..n)
                .map(|_| {
                    let x: Vec<f64> = (1..beta.len()).map(|_| rng.random::<f64>()).collect();
                    let y = linear_mean(beta, &x) + sd * normal(rng);
                    Observation::RegPair { x, y }
                })
                .collect(),
            GeneratorSpec::HeavyTail { beta, df } => {
                let t = StudentT::new(*df).map_err(|e| config(format!("Student-t: {e}")))?;
                (0..n)
                    .map(|_| {
                        let x: Vec<f64> = (1..beta.len()).map(|_| rng.random::<f64>()).collect();
                        let y = linear_mean(beta, &x) + t.sample(rng);
                        Observation::RegPair { x, y }
                    })
                    .collect()
            }
            GeneratorSpec::Auc { shift } => {
                let s0: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
                let s1: Vec<f64> = (0..n).map(|_| shift + normal(rng)).collect();
                return Dataset::two_sample(&s0, &s1);
            }
            GeneratorSpec::MeanCurve { function, sd } => (1..=n)
                .map(|i| {
                    let x = i as f64 / n as f64;
                    Observation::RegPair { x: vec![x], y: function.eval(x) + sd * normal(rng) }
                })
                .collect(),
            GeneratorSpec::Massart { q, beta_star, flip } => {
                let theta = massart_theta(*q, beta_star);
                (0..n)
                    .map(|_| {
                        let x: Vec<f64> = (0..=*q).map(|_| rng.random_range(-1.0..1.0)).collect();
                        let clean = crate::model::dot(&x, &theta) > 0.0;
                        let y = if clean ^ (rng.random::<f64>() < *flip) { 1.0 } else { 0.0 };
                        Observation::ClassTriple { x, y, z: None }
                    })
                    .collect()
            }
        };
        Dataset::new(obs)
    }
}

impl ObservationSampler for GeneratorSpec {
    fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Result<Dataset> {
        self.generate(n, rng)
    }
}

fn linear_mean(beta: &[f64], x: &[f64]) -> f64 {
    beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
}

fn massart_theta(q: usize, beta_star: &[f64]) -> Vec<f64> {
    let mut theta = vec![0.0; q + 1];
    theta[0] = 1.0;
    theta[1..=beta_star.len()].copy_from_slice(beta_star);
    theta
}

/// `η` as a function of `d = x − θ*(z)`.
pub fn mcid_eta(d: f64, sd: f64) -> f64 {
    if d > 0.0 {
        normal_cdf((d + MCID_MARGIN) / sd)
    } else {
        normal_cdf((d - MCID_MARGIN) / sd)
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = (b - a) / m as f64;
    let inner: f64 = (1..m).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    h / 3.0 * (f(a) + f(b) + inner)
}

/// Fraction of hold-out points with `y ≠ sign(x − θ(z))`, `sign(0) = −1`.
pub fn holdout_misclassification(threshold: impl Fn(&[f64]) -> Result<f64>, holdout: &Dataset) -> Result<f64> {
    if holdout.is_empty() {
        return Err(crate::error::precondition("empty hold-out sample"));
    }
    let mut wrong = 0usize;
    for u in holdout.observations() {
        let Observation::ClassTriple { x, y, z: Some(z) } = u else {
            return Err(crate::error::shape("hold-out must come from an MCID generator"));
        };
        if crate::losses::mcid_loss(*y, x[0], threshold(z)?) != 0.0 {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / holdout.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, stream_rng};
    use approx::assert_abs_diff_eq;

    #[test]
    fn mcid1_examples() {
        let g = GeneratorSpec::Mcid1;
        assert_eq!(g.mcid_truth(&[1.0]), Some(3.0));
        assert_abs_diff_eq!(g.eta(3.5, &[1.0]).unwrap(), 0.864_333_939_053_617_3, epsilon = 1e-12);
        assert_abs_diff_eq!(g.eta(3.0 + 1e-12, &[1.0]).unwrap(), 0.539_827_837_277_029, epsilon = 1e-9);
    }

    #[test]
    fn truths() {
        let g = GeneratorSpec::QuantileReg { tau: 0.75, beta: vec![1.0, 2.0], sd: 1.0 };
        let Reference::Point(t) = g.truth() else { panic!() };
        assert_abs_diff_eq!(t[0], 1.0 + 0.674_489_750_196_081_7, epsilon = 1e-9);
        assert_eq!(t[1], 2.0);
        let Reference::Point(t) = GeneratorSpec::Auc { shift: 1.0 }.truth() else { panic!() };
        assert_abs_diff_eq!(t[0], 0.760_249_938_906_523_5, epsilon = 1e-9);
    }

    #[test]
    fn invalid_parameters_are_config_errors() {
        let bad = [
            GeneratorSpec::QuantileReg { tau: 1.0, beta: vec![0.0], sd: 1.0 },
            GeneratorSpec::HeavyTail { beta: vec![0.0], df: 2.0 },
            GeneratorSpec::MeanCurve { function: Curve::Sine, sd: 0.0 },
            GeneratorSpec::Massart { q: 1, beta_star: vec![1.0, 1.0], flip: 0.1 },
        ];
        for g in bad {
            assert!(matches!(g.generate(10, &mut stream_rng(0, stream::DATA)), Err(GibbsError::Config(_))), "{g:?}");
        }
    }

    #[test]
    fn holdout_rates() {
        let g = GeneratorSpec::Mcid1;
        let h = g.generate(200, &mut stream_rng(1, stream::HOLDOUT)).unwrap();
        // threshold −∞ predicts +1 everywhere, +∞ predicts −1
        let plus = holdout_misclassification(|_| Ok(f64::NEG_INFINITY), &h).unwrap();
        let minus = holdout_misclassification(|_| Ok(f64::INFINITY), &h).unwrap();
        assert_abs_diff_eq!(plus + minus, 1.0, epsilon = 1e-12);
        let not_mcid = GeneratorSpec::Auc { shift: 0.0 }.generate(5, &mut stream_rng(1, stream::DATA)).unwrap();
        assert!(holdout_misclassification(|_| Ok(0.0), &not_mcid).is_err());
    }

    #[test]
    fn fixed_design_and_two_sample_sizes() {
        let d = GeneratorSpec::MeanCurve { function: Curve::Sine, sd: 0.1 }
            .generate(4, &mut stream_rng(0, stream::DATA))
            .unwrap();
        let xs: Vec<f64> = d
            .observations()
            .iter()
            .map(|u| match u {
                Observation::RegPair { x, .. } => x[0],
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(xs, vec![0.25, 0.5, 0.75, 1.0]);
        let a = GeneratorSpec::Auc { shift: 1.0 }.generate(7, &mut stream_rng(0, stream::DATA)).unwrap();
        let (s0, s1) = a.scores().unwrap();
        assert_eq!((s0.len(), s1.len()), (7, 7));
    }
}
