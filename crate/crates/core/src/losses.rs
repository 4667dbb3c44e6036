//! Loss functions `ℓ_θ(u)`, empirical risks `Rₙ(θ)` and closed-form risk
//! minimizers.
//!
//! Ties are resolved with strict inequalities throughout: `sign(0) = −1` for
//! the MCID loss, a linear classifier predicts 1 only when `xᵀθ > 0`, and a
//! pair of tied scores counts as discordant for the AUC.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{precondition, shape, GibbsError, Result};
use crate::model::{design_matrix, dot, eval_basis, BasisSpec, Dataset, DesignMatrix, LabelSet, Observation};

/// Condition-number ceiling for least-squares solves.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    /// Check (pinball) loss for the `tau`-th conditional quantile of `θᵀf(x)`.
    Check {
        tau: f64,
        features: BasisSpec,
    },
    Squared {
        features: BasisSpec,
    },
    /// Squared error truncated at `cap`.
    CappedSquared {
        features: BasisSpec,
        cap: f64,
    },
    /// Misclassification of the rule `1{xᵀθ > 0}`; labels in `{0, 1}`.
    ZeroOneLinear,
    /// `½[1 − y·sign{x − θ(z)}]` with `θ(z) = βᵀf(z)`; labels in `{−1, +1}`.
    Mcid {
        basis: BasisSpec,
    },
    /// `{θ − 1(u₁ > u₀)}²` over all group-0/group-1 score pairs.
    Auc,
}

/// An empirical risk together with the number of loss terms averaged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskValue {
    pub value: f64,
    pub n_used: usize,
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            LossSpec::Check { tau, .. } if !(*tau > 0.0 && *tau < 1.0) => {
                Err(precondition(format!("quantile level {tau} outside (0, 1)")))
            }
            LossSpec::CappedSquared { cap, .. } if !(*cap > 0.0) => {
                Err(precondition(format!("loss cap must be positive, got {cap}")))
            }
            _ => Ok(()),
        }
    }

    /// Losses with values in `[0, 1]`.
    pub fn is_bounded_unit(&self) -> bool {
        matches!(self, LossSpec::ZeroOneLinear | LossSpec::Mcid { .. } | LossSpec::Auc)
    }

    /// Dimension of `θ` implied by the loss and a dataset.
    pub fn param_dim(&self, data: &Dataset) -> Result<usize> {
        Ok(match self {
            LossSpec::Check { features, .. }
            | LossSpec::Squared { features }
            | LossSpec::CappedSquared { features, .. } => features.len(),
            LossSpec::Mcid { basis } => basis.len(),
            LossSpec::Auc => 1,
            LossSpec::ZeroOneLinear => match &data.observations()[0] {
                Observation::ClassTriple { x, .. } => x.len(),
                _ => return Err(shape("linear classifier needs ClassTriple data")),
            },
        })
    }

    /// Precomputes everything about `data` the risk depends on.
    pub fn prepare(&self, data: &Dataset) -> Result<PreparedRisk> {
        self.validate()?;
        PreparedRisk::new(self, data)
    }
}

/// `(y − p)(τ − 1{y < p})`.
#[inline]
pub fn check_loss(tau: f64, y: f64, prediction: f64) -> f64 {
    let r = y - prediction;
    r * (tau - if y < prediction { 1.0 } else { 0.0 })
}

#[inline]
pub fn capped_squared_loss(cap: f64, y: f64, prediction: f64) -> f64 {
    let r = y - prediction;
    (r * r).min(cap)
}

/// `sign` with `sign(0) = −1`.
#[inline]
pub fn strict_sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
pub fn mcid_loss(y: f64, x: f64, threshold: f64) -> f64 {
    0.5 * (1.0 - y * strict_sign(x - threshold))
}

#[inline]
pub fn auc_pair_loss(theta: f64, u0: f64, u1: f64) -> f64 {
    let ind = if u1 > u0 { 1.0 } else { 0.0 };
    (theta - ind) * (theta - ind)
}

fn features_of(loss: &LossSpec) -> Option<&BasisSpec> {
    match loss {
        LossSpec::Check { features, .. }
        | LossSpec::Squared { features }
        | LossSpec::CappedSquared { features, .. } => Some(features),
        _ => None,
    }
}

fn check_len(theta: &[f64], expected: usize) -> Result<()> {
    if theta.len() != expected {
        return Err(shape(format!("θ has length {}, expected {expected}", theta.len())));
    }
    Ok(())
}

/// `ℓ_θ(u)` for a single observation.
pub fn loss_value(loss: &LossSpec, theta: &[f64], u: &Observation) -> Result<f64> {
    loss.validate()?;
    if let Some(features) = features_of(loss) {
        let Observation::RegPair { x, y } = u else {
            return Err(shape(format!("{loss:?} needs a RegPair observation")));
        };
        check_len(theta, features.len())?;
        let pred = dot(&eval_basis(features, x)?, theta);
        return Ok(match loss {
            LossSpec::Check { tau, .. } => check_loss(*tau, *y, pred),
            LossSpec::Squared { .. } => (y - pred) * (y - pred),
            LossSpec::CappedSquared { cap, .. } => capped_squared_loss(*cap, *y, pred),
            _ => unreachable!(),
        });
    }
    match (loss, u) {
        (LossSpec::ZeroOneLinear, Observation::ClassTriple { x, y, .. }) => {
            if !LabelSet::ZeroOne.contains(*y) {
                return Err(shape(format!("linear classifier needs labels in {{0, 1}}, got {y}")));
            }
            check_len(theta, x.len())?;
            let predicted = if dot(x, theta) > 0.0 { 1.0 } else { 0.0 };
            Ok(if predicted == *y { 0.0 } else { 1.0 })
        }
        (LossSpec::Mcid { basis }, Observation::ClassTriple { x, y, z }) => {
            if !LabelSet::PlusMinus.contains(*y) {
                return Err(shape(format!("MCID loss needs labels in {{−1, +1}}, got {y}")));
            }
            let z = z.as_deref().ok_or_else(|| shape("MCID loss needs a covariate z"))?;
            let x0 = *x.first().ok_or_else(|| shape("MCID observation has no diagnostic score"))?;
            check_len(theta, basis.len())?;
            let threshold = dot(&eval_basis(basis, z)?, theta);
            Ok(mcid_loss(*y, x0, threshold))
        }
        (LossSpec::Auc, _) => Err(shape("AUC loss is defined on score pairs; use auc_pair_loss")),
        _ => Err(shape(format!("{loss:?} does not apply to {:?} observations", u.kind()))),
    }
}

/// `Rₙ(θ) = n⁻¹ Σᵢ ℓ_θ(Uᵢ)`, summed left to right.
pub fn empirical_risk(loss: &LossSpec, theta: &[f64], data: &Dataset) -> Result<RiskValue> {
    if data.is_empty() {
        return Err(precondition("empirical risk of an empty dataset"));
    }
    if let LossSpec::Auc = loss {
        check_len(theta, 1)?;
        let (s0, s1) = data.scores()?;
        return Ok(RiskValue { value: auc_empirical_risk(theta[0], &s0, &s1)?, n_used: s0.len() * s1.len() });
    }
    let mut total = 0.0;
    for u in data.observations() {
        total += loss_value(loss, theta, u)?;
    }
    Ok(RiskValue { value: total / data.len() as f64, n_used: data.len() })
}

fn require_groups(scores0: &[f64], scores1: &[f64]) -> Result<()> {
    if scores0.is_empty() || scores1.is_empty() {
        return Err(precondition("both score groups must be nonempty"));
    }
    Ok(())
}

/// Number of concordant pairs `#{(i, j): u₁ⱼ > u₀ᵢ}`, counted by sorting.
pub fn concordant_pairs(scores0: &[f64], scores1: &[f64]) -> u64 {
    let mut sorted0 = scores0.to_vec();
    sorted0.sort_by(f64::total_cmp);
    scores1.iter().map(|&u1| sorted0.partition_point(|&u0| u0 < u1) as u64).sum()
}

/// Per-score concordance counts: for each group-1 score the number of group-0
/// scores below it, and for each group-0 score the number of group-1 scores
/// above it.
pub(crate) fn concordance_counts(scores0: &[f64], scores1: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let mut sorted0 = scores0.to_vec();
    sorted0.sort_by(f64::total_cmp);
    let mut sorted1 = scores1.to_vec();
    sorted1.sort_by(f64::total_cmp);
    let per1 = scores1.iter().map(|&u1| sorted0.partition_point(|&u0| u0 < u1) as u64).collect();
    let per0 = scores0.iter().map(|&u0| (sorted1.len() - sorted1.partition_point(|&u1| u1 <= u0)) as u64).collect();
    (per1, per0)
}

/// Fraction of concordant pairs: the normalized Mann–Whitney statistic, which
/// minimizes the AUC empirical risk.
pub fn auc_point_estimate(scores0: &[f64], scores1: &[f64]) -> Result<f64> {
    require_groups(scores0, scores1)?;
    let pairs = (scores0.len() * scores1.len()) as f64;
    Ok(concordant_pairs(scores0, scores1) as f64 / pairs)
}

/// `(mn)⁻¹ ΣΣ {θ − 1(u₁ > u₀)}²`, evaluated from the concordant-pair count.
pub fn auc_empirical_risk(theta: f64, scores0: &[f64], scores1: &[f64]) -> Result<f64> {
    require_groups(scores0, scores1)?;
    let pairs = (scores0.len() * scores1.len()) as f64;
    let c = concordant_pairs(scores0, scores1) as f64;
    Ok(auc_risk_from_counts(theta, c, pairs))
}

#[inline]
fn auc_risk_from_counts(theta: f64, concordant: f64, pairs: f64) -> f64 {
    (concordant * (theta - 1.0) * (theta - 1.0) + (pairs - concordant) * theta * theta) / pairs
}

/// Least-squares coefficients for `y ≈ F β` via the SVD.
pub fn least_squares(design: &DesignMatrix, y: &[f64]) -> Result<Vec<f64>> {
    if design.rows != y.len() {
        return Err(shape(format!("{} design rows for {} responses", design.rows, y.len())));
    }
    if design.rows < design.cols {
        return Err(GibbsError::Conditioning(f64::INFINITY));
    }
    let f: DMatrix<f64> = design.to_nalgebra();
    let svd = f.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    // cond(FᵀF) = (σmax/σmin)²
    let cond = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
    if !(cond < MAX_CONDITION) {
        return Err(GibbsError::Conditioning(cond));
    }
    let beta = svd.solve(&DVector::from_column_slice(y), 0.0).map_err(|e| precondition(e.to_string()))?;
    Ok(beta.iter().copied().collect())
}

/// Minimizer of `rₙ(β) = n⁻¹ ‖Y − Fₙβ‖²` for regression data.
pub fn erm_least_squares(data: &Dataset, basis: &BasisSpec) -> Result<Vec<f64>> {
    let mut xs = Vec::with_capacity(data.len());
    let mut ys = Vec::with_capacity(data.len());
    for u in data.observations() {
        let Observation::RegPair { x, y } = u else {
            return Err(shape("least squares needs RegPair data"));
        };
        xs.push(x.as_slice());
        ys.push(*y);
    }
    let f = design_matrix(basis, &xs)?;
    least_squares(&f, &ys)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum LinearKind {
    Check(f64),
    Squared,
    Capped(f64),
}

#[derive(Debug, Clone)]
enum Prepared {
    Linear { design: DesignMatrix, y: Vec<f64>, kind: LinearKind },
    Classifier { x: DesignMatrix, y: Vec<bool> },
    Mcid { design: DesignMatrix, x: Vec<f64>, y: Vec<f64> },
    Auc { concordant: f64, pairs: f64 },
}

/// A loss bound to a dataset, with features evaluated once.
///
/// [`PreparedRisk::risk`] agrees with [`empirical_risk`] up to floating-point
/// rounding of the summation.
#[derive(Debug, Clone)]
pub struct PreparedRisk {
    inner: Prepared,
    sample_size: usize,
    dim: usize,
}

impl PreparedRisk {
    fn new(loss: &LossSpec, data: &Dataset) -> Result<Self> {
        let dim = loss.param_dim(data)?;
        if let Some(features) = features_of(loss) {
            let mut xs = Vec::with_capacity(data.len());
            let mut y = Vec::with_capacity(data.len());
            for u in data.observations() {
                let Observation::RegPair { x, y: yi } = u else {
                    return Err(shape(format!("{loss:?} needs RegPair data")));
                };
                xs.push(x.as_slice());
                y.push(*yi);
            }
            let kind = match loss {
                LossSpec::Check { tau, .. } => LinearKind::Check(*tau),
                LossSpec::Squared { .. } => LinearKind::Squared,
                LossSpec::CappedSquared { cap, .. } => LinearKind::Capped(*cap),
                _ => unreachable!(),
            };
            return Ok(Self {
                inner: Prepared::Linear { design: design_matrix(features, &xs)?, y, kind },
                sample_size: data.len(),
                dim,
            });
        }
        let inner = match loss {
            LossSpec::ZeroOneLinear => {
                if data.label_set() != Some(LabelSet::ZeroOne) {
                    return Err(shape("linear classifier needs labels in {0, 1}"));
                }
                let mut rows = Vec::with_capacity(data.len() * dim);
                let mut y = Vec::with_capacity(data.len());
                for u in data.observations() {
                    let Observation::ClassTriple { x, y: yi, .. } = u else { unreachable!() };
                    rows.extend_from_slice(x);
                    y.push(*yi == 1.0);
                }
                Prepared::Classifier { x: DesignMatrix { rows: data.len(), cols: dim, data: rows }, y }
            }
            LossSpec::Mcid { basis } => {
                if data.label_set() != Some(LabelSet::PlusMinus) {
                    return Err(shape("MCID loss needs labels in {−1, +1}"));
                }
                let mut zs = Vec::with_capacity(data.len());
                let mut x = Vec::with_capacity(data.len());
                let mut y = Vec::with_capacity(data.len());
                for u in data.observations() {
                    let Observation::ClassTriple { x: xi, y: yi, z } = u else {
                        return Err(shape("MCID loss needs ClassTriple data"));
                    };
                    zs.push(z.as_deref().ok_or_else(|| shape("MCID loss needs a covariate z"))?);
                    x.push(*xi.first().ok_or_else(|| shape("MCID observation has no diagnostic score"))?);
                    y.push(*yi);
                }
                Prepared::Mcid { design: design_matrix(basis, &zs)?, x, y }
            }
            LossSpec::Auc => {
                let (s0, s1) = data.scores()?;
                require_groups(&s0, &s1)?;
                Prepared::Auc { concordant: concordant_pairs(&s0, &s1) as f64, pairs: (s0.len() * s1.len()) as f64 }
            }
            _ => unreachable!(),
        };
        let sample_size = match &inner {
            Prepared::Auc { pairs, .. } => *pairs as usize,
            _ => data.len(),
        };
        Ok(Self { inner, sample_size, dim })
    }

    /// Number of loss terms averaged in `Rₙ`: `n`, or `m·n` for two-sample AUC data.
    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn risk(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.dim);
        match &self.inner {
            Prepared::Linear { design, y, kind } => {
                let mut total = 0.0;
                for (row, &yi) in design.data.chunks_exact(design.cols).zip(y) {
                    let pred = dot(row, theta);
                    total += match *kind {
                        LinearKind::Check(tau) => check_loss(tau, yi, pred),
                        LinearKind::Squared => (yi - pred) * (yi - pred),
                        LinearKind::Capped(cap) => capped_squared_loss(cap, yi, pred),
                    };
                }
                total / y.len() as f64
            }
            Prepared::Classifier { x, y } => {
                let wrong =
                    x.data.chunks_exact(x.cols).zip(y).filter(|(row, &yi)| (dot(row, theta) > 0.0) != yi).count();
                wrong as f64 / y.len() as f64
            }
            Prepared::Mcid { design, x, y } => {
                let mut total = 0.0;
                for ((row, &xi), &yi) in design.data.chunks_exact(design.cols).zip(x).zip(y) {
                    total += mcid_loss(yi, xi, dot(row, theta));
                }
                total / y.len() as f64
            }
            Prepared::Auc { concordant, pairs } => auc_risk_from_counts(theta[0], *concordant, *pairs),
        }
    }

    /// Risk of the linear classifier `(α, β)` with `β` supported on `support`.
    ///
    /// Falls back to a dense evaluation for losses other than the linear classifier.
    pub fn risk_sparse(&self, alpha: f64, support: &[usize], values: &[f64]) -> f64 {
        match &self.inner {
            Prepared::Classifier { x, y } => {
                let wrong = x
                    .data
                    .chunks_exact(x.cols)
                    .zip(y)
                    .filter(|(row, &yi)| {
                        let mut s = alpha * row[0];
                        for (&k, &b) in support.iter().zip(values) {
                            s += b * row[k + 1];
                        }
                        (s > 0.0) != yi
                    })
                    .count();
                wrong as f64 / y.len() as f64
            }
            _ => {
                let mut dense = vec![0.0; self.dim];
                dense[0] = alpha;
                for (&k, &b) in support.iter().zip(values) {
                    dense[k + 1] = b;
                }
                self.risk(&dense)
            }
        }
    }

    /// Parameter-space restriction implied by the loss (`θ ∈ [0, 1]` for the AUC).
    pub fn in_domain(&self, theta: &[f64]) -> bool {
        match self.inner {
            Prepared::Auc { .. } => (0.0..=1.0).contains(&theta[0]),
            _ => true,
        }
    }

    /// Design and responses for regression losses.
    pub fn regression_parts(&self) -> Option<(&DesignMatrix, &[f64])> {
        match &self.inner {
            Prepared::Linear { design, y, .. } => Some((design, y)),
            _ => None,
        }
    }

    /// A closed-form risk minimizer where one exists: least squares for the
    /// regression losses (exact for the squared loss, a starting point for the
    /// others) and `θ̂` for the AUC.
    pub fn closed_form_minimizer(&self) -> Option<Result<Vec<f64>>> {
        match &self.inner {
            Prepared::Linear { design, y, .. } => Some(least_squares(design, y)),
            Prepared::Auc { concordant, pairs } => Some(Ok(vec![concordant / pairs])),
            _ => None,
        }
    }
}
