//! Priors `Π(dθ)`: log-densities, exact sampling, the sparse complexity prior
//! over configurations and the hierarchical basis-expansion prior.

use rand::seq::index;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{precondition, shape, GibbsError, Result};
use crate::model::{design_matrix, dot, BasisSpec, CubicBSpline, DesignMatrix, Term};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
/// Rejection attempts before a truncated prior is declared degenerate.
pub const MAX_REJECTION_ATTEMPTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    GaussianIid {
        mean: f64,
        sd: f64,
        dim: usize,
    },
    /// Independent Laplace densities `(λ/2)·exp(−λ|θⱼ|)`.
    LaplaceIid {
        rate: f64,
        dim: usize,
    },
    /// Independent uniforms on `[lo, hi]`.
    Uniform {
        lo: f64,
        hi: f64,
        dim: usize,
    },
    /// Complexity prior on configurations `S ⊆ {1..q}` with Laplace(λ) slabs.
    /// `λ` defaults to `√(log q)`.
    SpikeSlab {
        q: usize,
        a: f64,
        c: f64,
        #[serde(default)]
        lambda: Option<f64>,
    },
    /// `π(J)·Π̃_J(β)` with the basis of size `J` built by `family`.
    HierarchicalBasis {
        j_prior: JPrior,
        conditional: GaussianConditional,
        family: BasisFamily,
    },
    /// `inner` restricted to `{θ : sup_grid |θ(x)| ≤ Δ}`, where `θ(x) = βᵀf(x)`
    /// when a basis is given and the coefficient sup-norm otherwise. A missing
    /// bound means `Δₙ = log n`, fixed by [`PriorSpec::resolve`].
    Truncated {
        inner: Box<PriorSpec>,
        #[serde(default)]
        bound: Option<f64>,
        #[serde(default)]
        grid: Vec<Vec<f64>>,
        #[serde(default)]
        basis: Option<BasisSpec>,
    },
}

/// Marginal prior on the number of basis functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JPrior {
    Poisson { mean: f64 },
}

impl JPrior {
    pub fn log_pmf(&self, j: usize) -> f64 {
        match *self {
            JPrior::Poisson { mean } => j as f64 * mean.ln() - mean - ln_factorial(j as u64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianConditional {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisFamily {
    /// `{1, x, …, x^{J−1}}` in one variable.
    Polynomial,
    /// `J` clamped cubic B-splines on `[lo, hi]`; needs `J ≥ 4`.
    CubicBspline { lo: f64, hi: f64 },
}

impl BasisFamily {
    pub fn basis(&self, j: usize) -> Result<BasisSpec> {
        match *self {
            BasisFamily::Polynomial => {
                if j == 0 {
                    return Err(precondition("a basis needs at least one function"));
                }
                let terms = (0..j)
                    .map(|p| if p == 0 { Term::Const } else { Term::Power { coord: 0, power: p as u32 } })
                    .collect();
                Ok(BasisSpec::RawDictionary { terms })
            }
            BasisFamily::CubicBspline { lo, hi } => Ok(BasisSpec::CubicBspline(CubicBSpline::new(lo, hi, j)?)),
        }
    }

    fn min_size(&self) -> usize {
        match self {
            BasisFamily::Polynomial => 1,
            BasisFamily::CubicBspline { .. } => 4,
        }
    }
}

/// Sparse linear-classifier parameter `(α, S, β_S)`; indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseParam {
    pub alpha: f64,
    pub support: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseParam {
    pub fn new(alpha: f64, support: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if alpha != 1.0 && alpha != -1.0 {
            return Err(precondition(format!("α must be ±1, got {alpha}")));
        }
        if support.len() != values.len() {
            return Err(shape(format!("{} indices for {} coefficients", support.len(), values.len())));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(precondition("support must be sorted and unique"));
        }
        Ok(Self { alpha, support, values })
    }

    pub fn empty(alpha: f64) -> Self {
        Self { alpha, support: Vec::new(), values: Vec::new() }
    }

    /// `(α, β₁, …, β_q)`.
    pub fn to_dense(&self, q: usize) -> Vec<f64> {
        let mut theta = vec![0.0; q + 1];
        theta[0] = self.alpha;
        for (&k, &b) in self.support.iter().zip(&self.values) {
            theta[k + 1] = b;
        }
        theta
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn ln_choose(q: usize, s: usize) -> f64 {
    ln_factorial(q as u64) - ln_factorial(s as u64) - ln_factorial((q - s) as u64)
}

/// `log f(s)` for `s = 0..=q`, with `f(s) ∝ (c·q^a)^{−s}` normalized over `0..=q`.
pub fn spike_slab_log_size_masses(q: usize, a: f64, c: f64) -> Vec<f64> {
    let l = c.ln() + a * (q as f64).ln();
    let log_z = log_sum_exp((0..=q).map(|t| -(t as f64) * l));
    (0..=q).map(|s| -(s as f64) * l - log_z).collect()
}

/// Slab rate, defaulting to `√(log q)` (and 1 when `q < 3`, where that is < 1).
pub fn spike_slab_lambda(q: usize, lambda: Option<f64>) -> f64 {
    lambda.unwrap_or_else(|| if q >= 3 { (q as f64).ln().sqrt() } else { 1.0 })
}

/// `log π(S) = log f(|S|) − log C(q, |S|)`.
pub fn spike_slab_log_mass(prior: &PriorSpec, support: &[usize]) -> Result<f64> {
    let PriorSpec::SpikeSlab { q, a, c, .. } = *prior else {
        return Err(precondition("configuration mass needs a SpikeSlab prior"));
    };
    prior.validate()?;
    let mut sorted = support.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != support.len() {
        return Err(precondition("configuration has repeated indices"));
    }
    if let Some(&k) = sorted.iter().find(|&&k| k >= q) {
        return Err(precondition(format!("index {k} outside 0..{q}")));
    }
    let s = support.len();
    Ok(spike_slab_log_size_masses(q, a, c)[s] - ln_choose(q, s))
}

#[inline]
pub(crate) fn laplace_log_density(rate: f64, x: f64) -> f64 {
    (0.5 * rate).ln() - rate * x.abs()
}

pub(crate) fn sample_laplace<R: RngCore + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    let e: f64 = Exp::new(rate).expect("validated rate").sample(rng);
    if rng.random::<bool>() {
        e
    } else {
        -e
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(precondition(format!("{what} must be positive, got {v}")));
        match self {
            PriorSpec::GaussianIid { sd, dim, .. } => {
                if !(*sd > 0.0) {
                    return bad("prior sd", *sd);
                }
                check_dim(*dim)
            }
            PriorSpec::LaplaceIid { rate, dim } => {
                if !(*rate > 0.0) {
                    return bad("Laplace rate", *rate);
                }
                check_dim(*dim)
            }
            PriorSpec::Uniform { lo, hi, dim } => {
                if !(lo < hi) {
                    return Err(precondition(format!("uniform prior needs lo < hi, got [{lo}, {hi}]")));
                }
                check_dim(*dim)
            }
            PriorSpec::SpikeSlab { q, a, c, lambda } => {
                if *q == 0 {
                    return Err(precondition("SpikeSlab needs q ≥ 1"));
                }
                if !(*a > 0.0) {
                    return bad("complexity exponent a", *a);
                }
                if !(*c > 0.0) {
                    return bad("complexity constant c", *c);
                }
                let l = spike_slab_lambda(*q, *lambda);
                if !(l > 0.0) {
                    return bad("slab rate λ", l);
                }
                Ok(())
            }
            PriorSpec::HierarchicalBasis { j_prior, conditional, family } => {
                let JPrior::Poisson { mean } = j_prior;
                if !(*mean > 0.0) {
                    return bad("Poisson mean", *mean);
                }
                if !(conditional.sd > 0.0) {
                    return bad("conditional sd", conditional.sd);
                }
                if let BasisFamily::CubicBspline { lo, hi } = family {
                    if !(lo < hi) {
                        return Err(precondition("B-spline family needs lo < hi"));
                    }
                }
                Ok(())
            }
            PriorSpec::Truncated { inner, bound, grid, basis } => {
                if matches!(**inner, PriorSpec::Truncated { .. }) {
                    return Err(precondition("nested truncation is not supported"));
                }
                inner.validate()?;
                if let Some(b) = bound {
                    if !(*b > 0.0) {
                        return bad("truncation bound Δ", *b);
                    }
                }
                if basis.is_some() && grid.is_empty() {
                    return Err(precondition("functional truncation needs a nonempty grid"));
                }
                Ok(())
            }
        }
    }

    /// Length of `θ`, or `None` when it varies (hierarchical prior).
    pub fn dim(&self) -> Option<usize> {
        match self {
            PriorSpec::GaussianIid { dim, .. } | PriorSpec::LaplaceIid { dim, .. } | PriorSpec::Uniform { dim, .. } => {
                Some(*dim)
            }
            PriorSpec::SpikeSlab { q, .. } => Some(*q),
            PriorSpec::HierarchicalBasis { .. } => None,
            PriorSpec::Truncated { inner, .. } => inner.dim(),
        }
    }

    /// Per-coordinate prior standard deviation, used for default proposal scales.
    pub fn scale(&self) -> f64 {
        match self {
            PriorSpec::GaussianIid { sd, .. } => *sd,
            PriorSpec::LaplaceIid { rate, .. } => std::f64::consts::SQRT_2 / rate,
            PriorSpec::Uniform { lo, hi, .. } => (hi - lo) / 12f64.sqrt(),
            PriorSpec::SpikeSlab { q, lambda, .. } => std::f64::consts::SQRT_2 / spike_slab_lambda(*q, *lambda),
            PriorSpec::HierarchicalBasis { conditional, .. } => conditional.sd,
            PriorSpec::Truncated { inner, .. } => inner.scale(),
        }
    }

    /// Whether [`log_prior`] is a normalized density. Truncation reports the
    /// restricted density without the normalizer `Z_Δ`, which cancels in MH.
    pub fn is_normalized(&self) -> bool {
        !matches!(self, PriorSpec::Truncated { .. })
    }

    /// Fills in the default truncation bound `Δₙ = log n`.
    pub fn resolve(&self, n: usize) -> Result<PriorSpec> {
        match self {
            PriorSpec::Truncated { inner, bound: None, grid, basis } => {
                if n < 2 {
                    return Err(precondition("default truncation bound log n needs n ≥ 2"));
                }
                Ok(PriorSpec::Truncated {
                    inner: inner.clone(),
                    bound: Some((n as f64).ln()),
                    grid: grid.clone(),
                    basis: basis.clone(),
                })
            }
            other => Ok(other.clone()),
        }
    }

    pub fn prepare(&self) -> Result<PreparedPrior> {
        self.validate()?;
        Ok(match self {
            PriorSpec::GaussianIid { mean, sd, dim } => PreparedPrior::Gaussian { mean: *mean, sd: *sd, dim: *dim },
            PriorSpec::LaplaceIid { rate, dim } => PreparedPrior::Laplace { rate: *rate, dim: *dim },
            PriorSpec::Uniform { lo, hi, dim } => PreparedPrior::Uniform { lo: *lo, hi: *hi, dim: *dim },
            PriorSpec::SpikeSlab { q, a, c, lambda } => {
                let sizes = spike_slab_log_size_masses(*q, *a, *c);
                PreparedPrior::SpikeSlab {
                    q: *q,
                    log_config_mass: (0..=*q).map(|s| sizes[s] - ln_choose(*q, s)).collect(),
                    lambda: spike_slab_lambda(*q, *lambda),
                }
            }
            PriorSpec::HierarchicalBasis { j_prior, conditional, family } => {
                PreparedPrior::Hierarchical { j_prior: *j_prior, conditional: *conditional, min_j: family.min_size() }
            }
            PriorSpec::Truncated { inner, bound, grid, basis } => {
                let bound = bound
                    .ok_or_else(|| GibbsError::Config("truncation bound unresolved; call resolve(n) first".into()))?;
                let grid = match basis {
                    Some(b) => Some(design_matrix(b, grid)?),
                    None => None,
                };
                PreparedPrior::Truncated { inner: Box::new(inner.prepare()?), bound, grid }
            }
        })
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(precondition("prior dimension must be at least 1"));
    }
    Ok(())
}

/// A validated prior ready for repeated density evaluation.
#[derive(Debug, Clone)]
pub enum PreparedPrior {
    Gaussian { mean: f64, sd: f64, dim: usize },
    Laplace { rate: f64, dim: usize },
    Uniform { lo: f64, hi: f64, dim: usize },
    SpikeSlab { q: usize, log_config_mass: Vec<f64>, lambda: f64 },
    Hierarchical { j_prior: JPrior, conditional: GaussianConditional, min_j: usize },
    Truncated { inner: Box<PreparedPrior>, bound: f64, grid: Option<DesignMatrix> },
}

impl PreparedPrior {
    pub fn dim(&self) -> Option<usize> {
        match self {
            PreparedPrior::Gaussian { dim, .. }
            | PreparedPrior::Laplace { dim, .. }
            | PreparedPrior::Uniform { dim, .. } => Some(*dim),
            PreparedPrior::SpikeSlab { q, .. } => Some(*q),
            PreparedPrior::Hierarchical { .. } => None,
            PreparedPrior::Truncated { inner, .. } => inner.dim(),
        }
    }

    /// Log-density; the caller guarantees `theta.len()` matches [`Self::dim`].
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        match self {
            PreparedPrior::Gaussian { mean, sd, .. } => {
                let mut acc = 0.0;
                for &t in theta {
                    let z = (t - mean) / sd;
                    acc -= 0.5 * z * z;
                }
                acc - theta.len() as f64 * (sd.ln() + LN_SQRT_2PI)
            }
            PreparedPrior::Laplace { rate, .. } => theta.iter().map(|&t| laplace_log_density(*rate, t)).sum(),
            PreparedPrior::Uniform { lo, hi, .. } => {
                if theta.iter().all(|t| (*lo..=*hi).contains(t)) {
                    -(theta.len() as f64) * (hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            PreparedPrior::SpikeSlab { log_config_mass, lambda, .. } => {
                let mut s = 0;
                let mut acc = 0.0;
                for &b in theta.iter().filter(|&&b| b != 0.0) {
                    s += 1;
                    acc += laplace_log_density(*lambda, b);
                }
                log_config_mass[s] + acc
            }
            PreparedPrior::Hierarchical { j_prior, conditional, min_j } => {
                let j = theta.len();
                if j < (*min_j).max(1) {
                    return f64::NEG_INFINITY;
                }
                let g = PreparedPrior::Gaussian { mean: conditional.mean, sd: conditional.sd, dim: j };
                j_prior.log_pmf(j) + g.log_density(theta)
            }
            PreparedPrior::Truncated { inner, bound, grid } => {
                if self.sup_norm(theta, grid.as_ref()) > *bound {
                    f64::NEG_INFINITY
                } else {
                    inner.log_density(theta)
                }
            }
        }
    }

    /// `log π(S) + Σ_{k∈S} log Laplace(β_k)` for a sparse parameter.
    pub fn log_density_sparse(&self, param: &SparseParam) -> f64 {
        match self {
            PreparedPrior::SpikeSlab { log_config_mass, lambda, .. } => {
                log_config_mass[param.support.len()]
                    + param.values.iter().map(|&b| laplace_log_density(*lambda, b)).sum::<f64>()
            }
            _ => f64::NAN,
        }
    }

    fn sup_norm(&self, theta: &[f64], grid: Option<&DesignMatrix>) -> f64 {
        match grid {
            Some(g) => (0..g.rows).map(|i| dot(g.row(i), theta).abs()).fold(0.0, f64::max),
            None => theta.iter().map(|t| t.abs()).fold(0.0, f64::max),
        }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        Ok(match self {
            PreparedPrior::Gaussian { mean, sd, dim } => {
                let d = Normal::new(*mean, *sd).map_err(|e| precondition(e.to_string()))?;
                (0..*dim).map(|_| d.sample(rng)).collect()
            }
            PreparedPrior::Laplace { rate, dim } => (0..*dim).map(|_| sample_laplace(*rate, rng)).collect(),
            PreparedPrior::Uniform { lo, hi, dim } => (0..*dim).map(|_| rng.random_range(*lo..=*hi)).collect(),
            PreparedPrior::SpikeSlab { q, .. } => {
                let p = self.sample_sparse(rng);
                p.to_dense(*q)[1..].to_vec()
            }
            PreparedPrior::Hierarchical { .. } => self.sample_hierarchical(rng).1,
            PreparedPrior::Truncated { inner, bound, grid } => {
                for _ in 0..MAX_REJECTION_ATTEMPTS {
                    let theta = inner.sample(rng)?;
                    if self.sup_norm(&theta, grid.as_ref()) <= *bound {
                        return Ok(theta);
                    }
                }
                return Err(GibbsError::DegenerateTruncation { attempts: MAX_REJECTION_ATTEMPTS });
            }
        })
    }

    /// Exact draw of `(α, S, β_S)` with `α` uniform on `{−1, +1}`.
    ///
    /// # Panics
    /// If the prior is not a spike-and-slab prior.
    pub fn sample_sparse<R: RngCore + ?Sized>(&self, rng: &mut R) -> SparseParam {
        let PreparedPrior::SpikeSlab { q, log_config_mass, lambda } = self else {
            panic!("sample_sparse on a non-SpikeSlab prior");
        };
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut size = *q;
        for (s, lm) in log_config_mass.iter().enumerate() {
            acc += (lm + ln_choose(*q, s)).exp();
            if u < acc {
                size = s;
                break;
            }
        }
        let mut support = index::sample(rng, *q, size).into_vec();
        support.sort_unstable();
        let values = support.iter().map(|_| sample_laplace(*lambda, rng)).collect();
        let alpha = if rng.random::<bool>() { 1.0 } else { -1.0 };
        SparseParam { alpha, support, values }
    }

    /// Draws `J` from the marginal prior restricted to admissible sizes, then `β | J`.
    ///
    /// # Panics
    /// If the prior is not hierarchical.
    pub fn sample_hierarchical<R: RngCore + ?Sized>(&self, rng: &mut R) -> (usize, Vec<f64>) {
        let PreparedPrior::Hierarchical { j_prior, conditional, min_j } = self else {
            panic!("sample_hierarchical on a non-hierarchical prior");
        };
        let JPrior::Poisson { mean } = *j_prior;
        let pois = Poisson::new(mean).expect("validated mean");
        let j = loop {
            let j = pois.sample(rng) as usize;
            if j >= (*min_j).max(1) {
                break j;
            }
        };
        let beta = (0..j).map(|_| conditional.mean + conditional.sd * rng.sample::<f64, _>(StandardNormal)).collect();
        (j, beta)
    }
}

/// `log Π(θ)`; `−∞` outside the support.
pub fn log_prior(prior: &PriorSpec, theta: &[f64]) -> Result<f64> {
    let prepared = prior.prepare()?;
    if let Some(d) = prepared.dim() {
        if theta.len() != d {
            return Err(shape(format!("θ has length {}, prior expects {d}", theta.len())));
        }
    }
    Ok(prepared.log_density(theta))
}

pub fn sample_prior<R: RngCore + ?Sized>(prior: &PriorSpec, rng: &mut R) -> Result<Vec<f64>> {
    prior.prepare()?.sample(rng)
}

/// `log π(J) + log Π̃_J(β)`; `−∞` for sizes outside the support.
pub fn hierarchical_log_density(prior: &PriorSpec, j: usize, beta: &[f64]) -> Result<f64> {
    if !matches!(prior, PriorSpec::HierarchicalBasis { .. }) {
        return Err(precondition("hierarchical density needs a HierarchicalBasis prior"));
    }
    if beta.len() != j {
        return Err(shape(format!("β has length {}, J = {j}", beta.len())));
    }
    Ok(prior.prepare()?.log_density(beta))
}
