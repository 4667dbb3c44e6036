//! Monte-Carlo checks of the concentration theory: excess-loss moments, the
//! exponential-moment condition, divergences `d(θ, θ*)`, posterior mass
//! outside a ball, and log–log rate fitting.

use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, shape, GibbsError, Result};
use crate::losses::{auc_pair_loss, least_squares, loss_value, LossSpec, PreparedRisk};
use crate::model::{design_matrix, dot, BasisSpec, Dataset, DesignMatrix, Observation, ObservationSampler, Reference};
use crate::priors::SparseParam;
use crate::stats::{mean, variance};

/// Minimum Monte-Carlo size for moment estimates.
pub const MIN_MC_SIZE: usize = 100;

/// Divergence as declared in a run config; samplers are attached by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DivergenceSpec {
    Euclid,
    AbsScalar,
    /// `‖θ − θ*‖_{n,2}` over the fitting design.
    EmpiricalL2,
    /// `L₂(P_X)` distance of the fitted functions, by Monte Carlo.
    L2P {
        mc_size: usize,
    },
    /// `{R(θ) − R(θ*)}^{1/2}` on fresh draws.
    RiskDiffSqrt {
        mc_size: usize,
    },
    /// `P{θ(Z) ∧ θ*(Z) ≤ X ≤ θ(Z) ∨ θ*(Z)}`.
    McidMeasure {
        mc_size: usize,
    },
}

#[derive(Clone)]
pub enum Divergence {
    Euclid,
    AbsScalar,
    EmpiricalL2 { basis: BasisSpec, xs: Vec<Vec<f64>> },
    L2P { basis: BasisSpec, sampler: Arc<dyn ObservationSampler>, mc_size: usize },
    RiskDiffSqrt { loss: LossSpec, sampler: Arc<dyn ObservationSampler>, mc_size: usize },
    McidMeasure { basis: BasisSpec, sampler: Arc<dyn ObservationSampler>, mc_size: usize },
}

impl std::fmt::Debug for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Divergence::Euclid => "Euclid",
            Divergence::AbsScalar => "AbsScalar",
            Divergence::EmpiricalL2 { .. } => "EmpiricalL2",
            Divergence::L2P { .. } => "L2P",
            Divergence::RiskDiffSqrt { .. } => "RiskDiffSqrt",
            Divergence::McidMeasure { .. } => "McidMeasure",
        };
        f.write_str(name)
    }
}

/// A divergence value with its Monte-Carlo standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceValue {
    pub value: f64,
    pub std_err: f64,
}

/// Covariate used by functional divergences: `z` when present, else `x`.
fn covariate(u: &Observation) -> Result<&[f64]> {
    match u {
        Observation::RegPair { x, .. } => Ok(x),
        Observation::ClassTriple { z: Some(z), .. } => Ok(z),
        Observation::ClassTriple { x, .. } => Ok(x),
        Observation::Score { .. } => Err(shape("score data has no covariate")),
    }
}

fn truth_values(truth: &Reference, design: &DesignMatrix, points: &[&[f64]]) -> Result<Vec<f64>> {
    match truth {
        Reference::Point(beta) => {
            if beta.len() != design.cols {
                return Err(shape(format!("θ* has length {}, basis has {}", beta.len(), design.cols)));
            }
            Ok(design.mul_vec(beta))
        }
        Reference::Function(f) => Ok(points.iter().map(|p| f(p)).collect()),
    }
}

#[derive(Debug, Clone)]
enum Prepared {
    Euclid(Vec<f64>),
    Abs(f64),
    L2 { design: DesignMatrix, truth: Vec<f64> },
    Risk { risk: PreparedRisk, truth_risk: f64, star: Vec<f64> },
    Mcid { design: DesignMatrix, x: Vec<f64>, truth: Vec<f64> },
}

/// A divergence with its Monte-Carlo sample and truth values fixed, so that
/// every draw of a chain is measured against the same sample.
#[derive(Debug, Clone)]
pub struct PreparedDivergence {
    inner: Prepared,
    star: Option<Vec<f64>>,
}

impl Divergence {
    pub fn prepare(&self, truth: &Reference, rng: &mut dyn RngCore) -> Result<PreparedDivergence> {
        let star = truth.as_point().map(<[f64]>::to_vec);
        let need_point = || star.clone().ok_or_else(|| precondition(format!("{self:?} needs a point θ*")));
        let inner = match self {
            Divergence::Euclid => Prepared::Euclid(need_point()?),
            Divergence::AbsScalar => {
                let p = need_point()?;
                if p.len() != 1 {
                    return Err(shape("AbsScalar needs a scalar parameter"));
                }
                Prepared::Abs(p[0])
            }
            Divergence::EmpiricalL2 { basis, xs } => {
                let design = design_matrix(basis, xs)?;
                let pts: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
                let truth = truth_values(truth, &design, &pts)?;
                Prepared::L2 { design, truth }
            }
            Divergence::L2P { basis, sampler, mc_size } => {
                let data = sampler.sample(*mc_size, rng)?;
                let pts = data.observations().iter().map(covariate).collect::<Result<Vec<_>>>()?;
                let design = design_matrix(basis, &pts)?;
                let truth = truth_values(truth, &design, &pts)?;
                Prepared::L2 { design, truth }
            }
            Divergence::RiskDiffSqrt { loss, sampler, mc_size } => {
                let star = need_point()?;
                let data = sampler.sample(*mc_size, rng)?;
                let risk = loss.prepare(&data)?;
                if star.len() != risk.dim() {
                    return Err(shape(format!("θ* has length {}, loss expects {}", star.len(), risk.dim())));
                }
                let truth_risk = risk.risk(&star);
                Prepared::Risk { risk, truth_risk, star }
            }
            Divergence::McidMeasure { basis, sampler, mc_size } => {
                let data = sampler.sample(*mc_size, rng)?;
                let mut pts = Vec::with_capacity(data.len());
                let mut x = Vec::with_capacity(data.len());
                for u in data.observations() {
                    let Observation::ClassTriple { x: xi, z: Some(z), .. } = u else {
                        return Err(shape("MCID divergence needs ClassTriple data with a covariate"));
                    };
                    pts.push(z.as_slice());
                    x.push(xi[0]);
                }
                let design = design_matrix(basis, &pts)?;
                let truth = truth_values(truth, &design, &pts)?;
                Prepared::Mcid { design, x, truth }
            }
        };
        Ok(PreparedDivergence { inner, star })
    }
}

impl PreparedDivergence {
    pub fn dim(&self) -> usize {
        match &self.inner {
            Prepared::Euclid(p) => p.len(),
            Prepared::Abs(_) => 1,
            Prepared::L2 { design, .. } | Prepared::Mcid { design, .. } => design.cols,
            Prepared::Risk { risk, .. } => risk.dim(),
        }
    }

    /// `d(θ, θ*)`; exactly zero when `θ` equals a point truth.
    pub fn eval(&self, theta: &[f64]) -> f64 {
        self.eval_with_se(theta).value
    }

    pub fn eval_with_se(&self, theta: &[f64]) -> DivergenceValue {
        let exact = |value| DivergenceValue { value, std_err: 0.0 };
        if self.star.as_deref() == Some(theta) {
            return exact(0.0);
        }
        match &self.inner {
            Prepared::Euclid(p) => exact(theta.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()),
            Prepared::Abs(p) => exact((theta[0] - p).abs()),
            Prepared::L2 { design, truth } => {
                let sq: Vec<f64> = (0..design.rows)
                    .map(|i| {
                        let d = dot(design.row(i), theta) - truth[i];
                        d * d
                    })
                    .collect();
                let m = mean(&sq);
                let value = m.sqrt();
                let se = if value > 0.0 { (variance(&sq) / sq.len() as f64).sqrt() / (2.0 * value) } else { 0.0 };
                DivergenceValue { value, std_err: se }
            }
            Prepared::Risk { risk, truth_risk, .. } => {
                let diff = risk.risk(theta) - truth_risk;
                DivergenceValue { value: diff.max(0.0).sqrt(), std_err: f64::NAN }
            }
            Prepared::Mcid { design, x, truth } => {
                let hits = (0..design.rows)
                    .filter(|&i| {
                        let th = dot(design.row(i), theta);
                        let (lo, hi) = if th < truth[i] { (th, truth[i]) } else { (truth[i], th) };
                        lo <= x[i] && x[i] <= hi
                    })
                    .count();
                let p = hits as f64 / design.rows as f64;
                DivergenceValue { value: p, std_err: (p * (1.0 - p) / design.rows as f64).sqrt() }
            }
        }
    }

    /// `d` at a sparse classifier parameter, using the sparse risk path when available.
    pub fn eval_sparse(&self, p: &SparseParam) -> f64 {
        match &self.inner {
            Prepared::Risk { risk, truth_risk, star } => {
                if star[0] == p.alpha && p.to_dense(star.len() - 1) == *star {
                    return 0.0;
                }
                (risk.risk_sparse(p.alpha, &p.support, &p.values) - truth_risk).max(0.0).sqrt()
            }
            _ => self.eval(&p.to_dense(self.dim() - 1)),
        }
    }
}

/// `d(θ, θ*)` with a fresh Monte-Carlo sample where the divergence needs one.
pub fn divergence_value(
    div: &Divergence,
    theta: &[f64],
    truth: &Reference,
    rng: &mut dyn RngCore,
) -> Result<DivergenceValue> {
    if let Some(star) = truth.as_point() {
        if star.len() != theta.len() {
            return Err(shape(format!("θ has length {}, θ* has {}", theta.len(), star.len())));
        }
        if star == theta {
            return Ok(DivergenceValue { value: 0.0, std_err: 0.0 });
        }
    }
    let prepared = div.prepare(truth, rng)?;
    if prepared.dim() != theta.len() {
        return Err(shape(format!("θ has length {}, divergence expects {}", theta.len(), prepared.dim())));
    }
    if let (Divergence::RiskDiffSqrt { loss, sampler, mc_size }, Some(star)) = (div, truth.as_point()) {
        // standard error through the per-observation excess losses (delta method)
        let data = sampler.sample(*mc_size, rng)?;
        let ex = excess_losses(loss, theta, star, &data)?;
        let m = mean(&ex);
        let value = m.max(0.0).sqrt();
        let se_m = (variance(&ex) / ex.len() as f64).sqrt();
        let std_err = if value > 0.0 { se_m / (2.0 * value) } else { se_m.sqrt() };
        return Ok(DivergenceValue { value, std_err });
    }
    Ok(prepared.eval_with_se(theta))
}

/// `ℓ_θ(Uᵢ) − ℓ_{θ*}(Uᵢ)` per observation; two-sample data are paired index-wise.
pub fn excess_losses(loss: &LossSpec, theta: &[f64], star: &[f64], data: &Dataset) -> Result<Vec<f64>> {
    if let LossSpec::Auc = loss {
        if theta.len() != 1 || star.len() != 1 {
            return Err(shape("AUC parameters are scalars"));
        }
        let (s0, s1) = data.scores()?;
        return Ok(s0
            .iter()
            .zip(&s1)
            .map(|(&u0, &u1)| auc_pair_loss(theta[0], u0, u1) - auc_pair_loss(star[0], u0, u1))
            .collect());
    }
    data.observations().iter().map(|u| Ok(loss_value(loss, theta, u)? - loss_value(loss, star, u)?)).collect()
}

/// Estimates of `m(θ, θ*) = P(ℓ_θ − ℓ_θ*)` and `v(θ, θ*) = Var(ℓ_θ − ℓ_θ*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MVEstimate {
    pub m_hat: f64,
    pub v_hat: f64,
    pub m_se: f64,
    pub v_se: f64,
    pub mc_size: usize,
}

pub fn mv_estimate(
    loss: &LossSpec,
    theta: &[f64],
    star: &[f64],
    sampler: &dyn ObservationSampler,
    mc_size: usize,
    rng: &mut dyn RngCore,
) -> Result<MVEstimate> {
    if mc_size < MIN_MC_SIZE {
        return Err(precondition(format!("Monte-Carlo size {mc_size} below {MIN_MC_SIZE}")));
    }
    let data = sampler.sample(mc_size, rng)?;
    let ex = excess_losses(loss, theta, star, &data)?;
    let n = ex.len() as f64;
    let m_hat = mean(&ex);
    let v_hat = variance(&ex);
    let m4 = ex.iter().map(|e| (e - m_hat).powi(4)).sum::<f64>() / n;
    Ok(MVEstimate {
        m_hat,
        v_hat,
        m_se: (v_hat / n).sqrt(),
        v_se: ((m4 - v_hat * v_hat).max(0.0) / n).sqrt(),
        mc_size: ex.len(),
    })
}

/// One grid point of the exponential-moment check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfPoint {
    pub theta: Vec<f64>,
    pub distance: f64,
    /// Monte-Carlo mean of `exp{−ω(ℓ_θ − ℓ_θ*)}`.
    pub estimate: f64,
    pub std_err: f64,
    pub log_estimate: f64,
    pub d_r: f64,
    /// `−log(estimate)/(ω·d^r)`.
    pub k_hat: f64,
    pub k_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfReport {
    pub omega: f64,
    pub r: f64,
    pub points: Vec<MgfPoint>,
    pub min_k_hat: f64,
    /// `min(K̂ − 3·se)` over the grid.
    pub min_k_lower: f64,
}

/// Estimates the implied constant `K` in `P e^{−ω(ℓ_θ − ℓ_θ*)} < e^{−Kωd^r}`
/// at each grid point, with a fresh sample per point.
#[allow(clippy::too_many_arguments)]
pub fn mgf_condition_check(
    loss: &LossSpec,
    grid: &[Vec<f64>],
    star: &[f64],
    omega: f64,
    div: &Divergence,
    r: f64,
    sampler: &dyn ObservationSampler,
    mc_size: usize,
    rng: &mut dyn RngCore,
) -> Result<MgfReport> {
    if !(omega > 0.0) {
        return Err(precondition(format!("ω must be positive, got {omega}")));
    }
    if grid.is_empty() {
        return Err(precondition("empty θ grid"));
    }
    if mc_size < MIN_MC_SIZE {
        return Err(precondition(format!("Monte-Carlo size {mc_size} below {MIN_MC_SIZE}")));
    }
    let truth = Reference::Point(star.to_vec());
    let mut points = Vec::with_capacity(grid.len());
    for theta in grid {
        let distance = divergence_value(div, theta, &truth, rng)?.value;
        if !(distance > 0.0) {
            return Err(precondition(format!("grid point {theta:?} has zero divergence from θ*")));
        }
        let data = sampler.sample(mc_size, rng)?;
        let ex = excess_losses(loss, theta, star, &data)?;
        let a: Vec<f64> = ex.iter().map(|x| -omega * x).collect();
        if a.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(GibbsError::Overflow(format!(
                "exp{{−ω(ℓ_θ − ℓ_θ*)}} overflowed at θ = {theta:?}; the loss is unbounded below on these draws"
            )));
        }
        // work on the log scale: far from θ* the plain mean underflows to 0
        let top = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = a.iter().map(|v| (v - top).exp()).collect();
        let scaled_mean = mean(&scaled);
        let log_estimate = top + scaled_mean.ln();
        let estimate = log_estimate.exp();
        let rel_se = (variance(&scaled) / scaled.len() as f64).sqrt() / scaled_mean;
        let std_err = rel_se * estimate;
        let d_r = distance.powf(r);
        let k_hat = -log_estimate / (omega * d_r);
        let k_se = rel_se / (omega * d_r);
        points.push(MgfPoint { theta: theta.clone(), distance, estimate, std_err, log_estimate, d_r, k_hat, k_se });
    }
    let min_k_hat = points.iter().map(|p| p.k_hat).fold(f64::INFINITY, f64::min);
    let min_k_lower = points.iter().map(|p| p.k_hat - 3.0 * p.k_se).fold(f64::INFINITY, f64::min);
    Ok(MgfReport { omega, r, points, min_k_hat, min_k_lower })
}

/// Fraction of divergence values strictly above `radius`.
pub fn posterior_mass_outside(distances: &[f64], radius: f64) -> Result<f64> {
    if distances.is_empty() {
        return Err(precondition("posterior mass of an empty chain"));
    }
    if !(radius > 0.0) {
        return Err(precondition(format!("radius must be positive, got {radius}")));
    }
    Ok(distances.iter().filter(|&&d| d > radius).count() as f64 / distances.len() as f64)
}

/// Least-squares fit of `log radius = intercept + slope · log n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub pairs: Vec<(f64, f64)>,
    pub max_abs_residual: f64,
}

pub fn concentration_slope(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.iter().any(|&(n, r)| !(r > 0.0) || !(n > 0.0)) {
        return Err(precondition("radii and sample sizes must be positive"));
    }
    let mut distinct: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(precondition(format!("rate fit needs at least 3 distinct n, got {}", distinct.len())));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_abs_residual = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).abs()).fold(0.0, f64::max);
    Ok(RateFit { slope, intercept, pairs: pairs.to_vec(), max_abs_residual })
}

/// `β† = (FᵀF)⁻¹Fᵀθ*(x_{1:n})`.
pub fn projection_target<P: AsRef<[f64]>>(basis: &BasisSpec, xs: &[P], values: &[f64]) -> Result<Vec<f64>> {
    least_squares(&design_matrix(basis, xs)?, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, stream_rng};
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_divergences() {
        let mut rng = stream_rng(0, stream::DIVERGENCE);
        let p = Reference::Point(vec![1.0, 2.0]);
        assert_eq!(divergence_value(&Divergence::Euclid, &[1.0, 2.0], &p, &mut rng).unwrap().value, 0.0);
        assert_eq!(divergence_value(&Divergence::Euclid, &[4.0, 6.0], &p, &mut rng).unwrap().value, 5.0);
        let s = Reference::Point(vec![0.2]);
        assert_abs_diff_eq!(divergence_value(&Divergence::AbsScalar, &[0.5], &s, &mut rng).unwrap().value, 0.3);
        assert!(divergence_value(&Divergence::Euclid, &[1.0], &p, &mut rng).is_err());

        let div =
            Divergence::EmpiricalL2 { basis: BasisSpec::dictionary(&["1"]).unwrap(), xs: vec![vec![0.0], vec![1.0]] };
        let v = divergence_value(&div, &[1.7], &Reference::Point(vec![2.0]), &mut rng).unwrap().value;
        assert_abs_diff_eq!(v, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn mass_outside_counts() {
        assert_eq!(posterior_mass_outside(&[0.0; 5], 0.1).unwrap(), 0.0);
        assert_eq!(posterior_mass_outside(&[0.1, 0.3, 0.5], f64::MIN_POSITIVE).unwrap(), 1.0);
        assert_abs_diff_eq!(posterior_mass_outside(&[0.1, 0.3, 0.5], 0.2).unwrap(), 2.0 / 3.0);
        assert!(posterior_mass_outside(&[], 0.2).is_err());
        assert!(posterior_mass_outside(&[0.1], 0.0).is_err());
    }

    #[test]
    fn slope_examples() {
        let fit = concentration_slope(&[(100.0, 0.1), (400.0, 0.05), (1600.0, 0.025)]).unwrap();
        assert_abs_diff_eq!(fit.slope, -0.5, epsilon = 1e-12);
        assert!(fit.max_abs_residual < 1e-10);
        let flat = concentration_slope(&[(10.0, 0.3), (20.0, 0.3), (40.0, 0.3)]).unwrap();
        assert_abs_diff_eq!(flat.slope, 0.0, epsilon = 1e-12);
        assert!(concentration_slope(&[(10.0, 0.3), (20.0, 0.3), (20.0, 0.2)]).is_err());
        assert!(concentration_slope(&[(10.0, 0.3), (20.0, 0.0), (40.0, 0.2)]).is_err());
    }

    #[test]
    fn noisy_power_law_slope() {
        use rand::Rng;
        let mut rng = stream_rng(12, stream::DIAGNOSTIC);
        let pairs: Vec<(f64, f64)> = [100.0, 200.0, 400.0, 800.0, 1600.0, 3200.0]
            .iter()
            .map(|&n: &f64| (n, n.powf(-1.0 / 3.0) * (1.0 + 0.05 * (2.0 * rng.random::<f64>() - 1.0))))
            .collect();
        let fit = concentration_slope(&pairs).unwrap();
        assert!((fit.slope + 1.0 / 3.0).abs() < 0.08);
    }

    #[test]
    fn projections() {
        let basis = BasisSpec::linear(1);
        let xs: Vec<Vec<f64>> = (0..11).map(|i| vec![-1.0 + 0.2 * i as f64]).collect();
        let inspan: Vec<f64> = xs.iter().map(|x| 0.5 - 2.0 * x[0]).collect();
        let b = projection_target(&basis, &xs, &inspan).unwrap();
        assert_abs_diff_eq!(b[0], 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(b[1], -2.0, epsilon = 1e-8);
        let zero = projection_target(&basis, &xs, &[0.0; 11]).unwrap();
        assert!(zero.iter().all(|v| v.abs() < 1e-14));
        // x² on a symmetric grid: slope 0, intercept = mean of x²
        let sq: Vec<f64> = xs.iter().map(|x| x[0] * x[0]).collect();
        let b = projection_target(&basis, &xs, &sq).unwrap();
        let data =
            Dataset::new(xs.iter().zip(&sq).map(|(x, &y)| Observation::RegPair { x: x.clone(), y }).collect()).unwrap();
        let erm = crate::losses::erm_least_squares(&data, &basis).unwrap();
        assert_abs_diff_eq!(b[0], erm[0], epsilon = 1e-12);
        assert_abs_diff_eq!(b[1], erm[1], epsilon = 1e-12);
        assert_abs_diff_eq!(b[1], 0.0, epsilon = 1e-12);
    }
}
