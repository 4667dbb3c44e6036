use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, shape, GibbsError, Result};

/// A single data point `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observation {
    /// Predictor–response pair `(x, y)`.
    RegPair { x: Vec<f64>, y: f64 },
    /// Binary outcome `y` with predictor `x` and optional covariate `z`.
    ClassTriple { x: Vec<f64>, y: f64, z: Option<Vec<f64>> },
    /// Score `u` from group 0 or group 1.
    Score { group: u8, u: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    RegPair,
    ClassTriple,
    Score,
}

/// Two-point label set for binary outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSet {
    /// `{0, 1}`, used by linear classifiers.
    ZeroOne,
    /// `{−1, +1}`, used by the MCID loss.
    PlusMinus,
}

impl LabelSet {
    pub fn contains(self, y: f64) -> bool {
        match self {
            LabelSet::ZeroOne => y == 0.0 || y == 1.0,
            LabelSet::PlusMinus => y == -1.0 || y == 1.0,
        }
    }
}

impl Observation {
    pub fn kind(&self) -> ObservationKind {
        match self {
            Observation::RegPair { .. } => ObservationKind::RegPair,
            Observation::ClassTriple { .. } => ObservationKind::ClassTriple,
            Observation::Score { .. } => ObservationKind::Score,
        }
    }
}

/// A homogeneous, nonempty sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Observation>", into = "Vec<Observation>")]
pub struct Dataset {
    observations: Vec<Observation>,
}

impl TryFrom<Vec<Observation>> for Dataset {
    type Error = GibbsError;

    fn try_from(v: Vec<Observation>) -> Result<Self> {
        Dataset::new(v)
    }
}

impl From<Dataset> for Vec<Observation> {
    fn from(d: Dataset) -> Self {
        d.observations
    }
}

impl Dataset {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        let first =
            observations.first().ok_or_else(|| precondition("dataset must contain at least one observation"))?;
        let kind = first.kind();
        let (xdim, zdim) = match first {
            Observation::RegPair { x, .. } => (x.len(), None),
            Observation::ClassTriple { x, z, .. } => (x.len(), z.as_ref().map(Vec::len)),
            Observation::Score { .. } => (0, None),
        };
        let mut groups = [0usize; 2];
        for (i, obs) in observations.iter().enumerate() {
            if obs.kind() != kind {
                return Err(shape(format!("observation {i} is {:?}, dataset is {kind:?}", obs.kind())));
            }
            match obs {
                Observation::RegPair { x, y } => {
                    if x.len() != xdim {
                        return Err(shape(format!("observation {i} has dimension {}, expected {xdim}", x.len())));
                    }
                    if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
                        return Err(precondition(format!("observation {i} is not finite")));
                    }
                }
                Observation::ClassTriple { x, y, z } => {
                    if x.len() != xdim || z.as_ref().map(Vec::len) != zdim {
                        return Err(shape(format!("observation {i} has inconsistent dimensions")));
                    }
                    if !LabelSet::ZeroOne.contains(*y) && !LabelSet::PlusMinus.contains(*y) {
                        return Err(precondition(format!("observation {i} has label {y}")));
                    }
                }
                Observation::Score { group, u } => {
                    if *group > 1 {
                        return Err(precondition(format!("observation {i} has group {group}")));
                    }
                    if !u.is_finite() {
                        return Err(precondition(format!("observation {i} has a non-finite score")));
                    }
                    groups[*group as usize] += 1;
                }
            }
        }
        if kind == ObservationKind::Score && (groups[0] == 0 || groups[1] == 0) {
            return Err(precondition(format!(
                "two-sample data needs both groups, got {} and {}",
                groups[0], groups[1]
            )));
        }
        Ok(Self { observations })
    }

    /// Builds two-sample data from group-0 scores followed by group-1 scores.
    pub fn two_sample(scores0: &[f64], scores1: &[f64]) -> Result<Self> {
        let obs = scores0
            .iter()
            .map(|&u| Observation::Score { group: 0, u })
            .chain(scores1.iter().map(|&u| Observation::Score { group: 1, u }))
            .collect();
        Dataset::new(obs)
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn kind(&self) -> ObservationKind {
        self.observations[0].kind()
    }

    /// Label set shared by every class label, if the data are binary.
    pub fn label_set(&self) -> Option<LabelSet> {
        let labels = self.observations.iter().filter_map(|o| match o {
            Observation::ClassTriple { y, .. } => Some(*y),
            _ => None,
        });
        let mut zero_one = true;
        let mut plus_minus = true;
        let mut any = false;
        for y in labels {
            any = true;
            zero_one &= LabelSet::ZeroOne.contains(y);
            plus_minus &= LabelSet::PlusMinus.contains(y);
        }
        match (any, zero_one, plus_minus) {
            (false, ..) => None,
            (true, true, _) => Some(LabelSet::ZeroOne),
            (true, false, true) => Some(LabelSet::PlusMinus),
            _ => None,
        }
    }

    /// Group-0 and group-1 scores of two-sample data.
    pub fn scores(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut s0 = Vec::new();
        let mut s1 = Vec::new();
        for obs in &self.observations {
            match obs {
                Observation::Score { group: 0, u } => s0.push(*u),
                Observation::Score { u, .. } => s1.push(*u),
                _ => return Err(shape("dataset is not two-sample score data")),
            }
        }
        Ok((s0, s1))
    }

    /// Concatenation of two datasets of the same kind.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        let mut obs = self.observations.clone();
        obs.extend(other.observations.iter().cloned());
        Dataset::new(obs)
    }
}

/// A parameter vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = GibbsError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ParamVector::new(v)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(p: ParamVector) -> Self {
        p.0
    }
}

impl ParamVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(precondition("parameter vector has non-finite entries"));
        }
        Ok(Self(theta))
    }

    /// `θ = (α, β)` for a linear classifier; `α` must be ±1.
    pub fn classifier(alpha: f64, beta: &[f64]) -> Result<Self> {
        if alpha != 1.0 && alpha != -1.0 {
            return Err(precondition(format!("classifier sign must be ±1, got {alpha}")));
        }
        let mut v = Vec::with_capacity(beta.len() + 1);
        v.push(alpha);
        v.extend_from_slice(beta);
        ParamVector::new(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Real-valued function of a point, used for true parameters that are functions.
pub type RealFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The true parameter `θ*`, either as a vector or as a function.
#[derive(Clone)]
pub enum Reference {
    Point(Vec<f64>),
    Function(RealFn),
}

impl std::fmt::Debug for Reference {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Reference::Point(p) => f.debug_tuple("Point").field(p).finish(),
            Reference::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl Reference {
    pub fn as_point(&self) -> Option<&[f64]> {
        match self {
            Reference::Point(p) => Some(p),
            Reference::Function(_) => None,
        }
    }
}

/// Anything that produces fresh iid samples of a fixed law.
///
/// Two-sample laws return `n` scores per group; pairing the `i`-th group-0
/// score with the `i`-th group-1 score yields `n` iid pairs.
pub trait ObservationSampler: Send + Sync {
    fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Result<Dataset>;
}

/// Column layout for CSV ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CsvLayout {
    /// `x1,…,xk,y` columns; `x` lists the predictor column names.
    Regression { x: Vec<String>, y: String },
    /// Binary outcome with predictors and optional covariates.
    Classification {
        x: Vec<String>,
        y: String,
        #[serde(default)]
        z: Vec<String>,
    },
    /// `group,u` columns.
    TwoSample,
}

pub fn read_dataset_csv<R: Read>(reader: R, layout: &CsvLayout) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| GibbsError::Config(format!("csv has no column '{name}'")))
    };
    let cols = |names: &[String]| names.iter().map(|n| col(n)).collect::<Result<Vec<_>>>();
    let parse = |rec: &csv::StringRecord, idx: usize, line: usize| -> Result<f64> {
        rec.get(idx)
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| GibbsError::Config(format!("csv record {line}: column {} is not a number", &headers[idx])))
    };

    let mut obs = Vec::new();
    match layout {
        CsvLayout::Regression { x, y } => {
            let (xc, yc) = (cols(x)?, col(y)?);
            for (line, rec) in rdr.records().enumerate() {
                let rec = rec?;
                let xs = xc.iter().map(|&c| parse(&rec, c, line + 1)).collect::<Result<_>>()?;
                obs.push(Observation::RegPair { x: xs, y: parse(&rec, yc, line + 1)? });
            }
        }
        CsvLayout::Classification { x, y, z } => {
            let (xc, yc, zc) = (cols(x)?, col(y)?, cols(z)?);
            for (line, rec) in rdr.records().enumerate() {
                let rec = rec?;
                let xs = xc.iter().map(|&c| parse(&rec, c, line + 1)).collect::<Result<_>>()?;
                let zs: Vec<f64> = zc.iter().map(|&c| parse(&rec, c, line + 1)).collect::<Result<_>>()?;
                obs.push(Observation::ClassTriple {
                    x: xs,
                    y: parse(&rec, yc, line + 1)?,
                    z: (!zs.is_empty()).then_some(zs),
                });
            }
        }
        CsvLayout::TwoSample => {
            let (gc, uc) = (col("group")?, col("u")?);
            for (line, rec) in rdr.records().enumerate() {
                let rec = rec?;
                let g = parse(&rec, gc, line + 1)?;
                if g != 0.0 && g != 1.0 {
                    return Err(GibbsError::Config(format!("csv record {}: group must be 0 or 1", line + 1)));
                }
                obs.push(Observation::Score { group: g as u8, u: parse(&rec, uc, line + 1)? });
            }
        }
    }
    Dataset::new(obs)
}

pub fn read_dataset_csv_path(path: &Path, layout: &CsvLayout) -> Result<Dataset> {
    let file =
        std::fs::File::open(path).map_err(|e| GibbsError::Config(format!("cannot open {}: {e}", path.display())))?;
    read_dataset_csv(file, layout)
}
