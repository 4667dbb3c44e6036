//! Basis expansions for function-valued parameters.
//!
//! A function is represented as `θ_β(x) = βᵀ f(x)` for a fixed vector of
//! basis functions `f = (f₁, …, f_J)`. Three families are provided:
//!
//! - clamped cubic B-splines on an interval with uniform interior knots,
//! - tensor products of two cubic B-spline factors (row-major, first factor
//!   index varies slowest: column `j₁ · J₂ + j₂`),
//! - a raw dictionary of monomials in the coordinates of `x`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{precondition, shape, GibbsError, Result};

/// Points closer than this to a B-spline domain are clamped onto it.
pub const DOMAIN_TOLERANCE: f64 = 1e-12;

const DEGREE: usize = 3;

/// Clamped cubic B-spline basis with uniform interior knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CubicBSplineDef", into = "CubicBSplineDef")]
pub struct CubicBSpline {
    lo: f64,
    hi: f64,
    num_basis: usize,
    knots: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CubicBSplineDef {
    lo: f64,
    hi: f64,
    num_basis: usize,
}

impl TryFrom<CubicBSplineDef> for CubicBSpline {
    type Error = GibbsError;

    fn try_from(def: CubicBSplineDef) -> Result<Self> {
        CubicBSpline::new(def.lo, def.hi, def.num_basis)
    }
}

impl From<CubicBSpline> for CubicBSplineDef {
    fn from(b: CubicBSpline) -> Self {
        CubicBSplineDef { lo: b.lo, hi: b.hi, num_basis: b.num_basis }
    }
}

impl CubicBSpline {
    pub fn new(lo: f64, hi: f64, num_basis: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(precondition(format!("B-spline domain [{lo}, {hi}] is empty")));
        }
        if num_basis < DEGREE + 1 {
            return Err(precondition(format!("cubic B-spline needs at least 4 basis functions, got {num_basis}")));
        }
        let interior = num_basis - DEGREE - 1;
        let segments = (interior + 1) as f64;
        let mut knots = Vec::with_capacity(num_basis + DEGREE + 1);
        knots.extend(std::iter::repeat_n(lo, DEGREE + 1));
        knots.extend((1..=interior).map(|k| lo + (hi - lo) * k as f64 / segments));
        knots.extend(std::iter::repeat_n(hi, DEGREE + 1));
        Ok(Self { lo, hi, num_basis, knots })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn clamp(&self, x: f64) -> Result<f64> {
        if x.is_nan() || x < self.lo - DOMAIN_TOLERANCE || x > self.hi + DOMAIN_TOLERANCE {
            return Err(GibbsError::Domain { value: x, lo: self.lo, hi: self.hi });
        }
        Ok(x.clamp(self.lo, self.hi))
    }

    /// Index of the first basis function that may be nonzero at `x`, and the
    /// four values `f_{first}(x), …, f_{first+3}(x)`.
    pub fn eval_local(&self, x: f64) -> Result<(usize, [f64; 4])> {
        let x = self.clamp(x)?;
        let t = &self.knots;
        // knot span: t[span] <= x < t[span + 1], with the right end folded into the last span
        let last = self.num_basis - 1;
        let span = if x >= t[last + 1] {
            last
        } else {
            let mut s = DEGREE;
            while s < last && x >= t[s + 1] {
                s += 1;
            }
            s
        };

        let mut values = [0.0; 4];
        let mut left = [0.0; 4];
        let mut right = [0.0; 4];
        values[0] = 1.0;
        for j in 1..=DEGREE {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        Ok((span - DEGREE, values))
    }

    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_basis];
        let (first, local) = self.eval_local(x)?;
        out[first..first + 4].copy_from_slice(&local);
        Ok(out)
    }
}

/// A monomial `x_i^p`, or the constant term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Const,
    Power { coord: usize, power: u32 },
}

impl Term {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match *self {
            Term::Const => Ok(1.0),
            Term::Power { coord, power } => x
                .get(coord)
                .map(|v| v.powi(power as i32))
                .ok_or_else(|| shape(format!("term {self} needs coordinate {coord}, point has {}", x.len()))),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Term::Const => write!(f, "1"),
            Term::Power { coord, power: 1 } => write!(f, "x{}", coord + 1),
            Term::Power { coord, power } => write!(f, "x{}^{}", coord + 1, power),
        }
    }
}

impl FromStr for Term {
    type Err = GibbsError;

    /// Accepts `1`, `x`, `x2`, `x^3`, `x2^3` (coordinates are 1-based, `x` is `x1`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1" {
            return Ok(Term::Const);
        }
        let bad = || GibbsError::Config(format!("unrecognised dictionary term '{s}'"));
        let rest = s.strip_prefix('x').ok_or_else(bad)?;
        let (idx, pow) = match rest.split_once('^') {
            Some((i, p)) => (i, p.parse::<u32>().map_err(|_| bad())?),
            None => (rest, 1),
        };
        let coord = if idx.is_empty() { 0 } else { idx.parse::<usize>().ok().filter(|&i| i >= 1).ok_or_else(bad)? - 1 };
        Ok(Term::Power { coord, power: pow })
    }
}

impl Serialize for Term {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The feature map `x ↦ f(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisSpec {
    CubicBspline(CubicBSpline),
    TensorBspline { factors: [CubicBSpline; 2] },
    RawDictionary { terms: Vec<Term> },
}

impl BasisSpec {
    pub fn cubic_bspline(lo: f64, hi: f64, num_basis: usize) -> Result<Self> {
        Ok(BasisSpec::CubicBspline(CubicBSpline::new(lo, hi, num_basis)?))
    }

    pub fn tensor(first: CubicBSpline, second: CubicBSpline) -> Self {
        BasisSpec::TensorBspline { factors: [first, second] }
    }

    /// Dictionary from term strings such as `["1", "x"]`.
    pub fn dictionary<S: AsRef<str>>(terms: &[S]) -> Result<Self> {
        let terms = terms.iter().map(|t| t.as_ref().parse()).collect::<Result<Vec<Term>>>()?;
        if terms.is_empty() {
            return Err(precondition("dictionary needs at least one term"));
        }
        Ok(BasisSpec::RawDictionary { terms })
    }

    /// Intercept plus the identity on `dim` coordinates.
    pub fn linear(dim: usize) -> Self {
        let mut terms = vec![Term::Const];
        terms.extend((0..dim).map(|coord| Term::Power { coord, power: 1 }));
        BasisSpec::RawDictionary { terms }
    }

    pub fn len(&self) -> usize {
        match self {
            BasisSpec::CubicBspline(b) => b.num_basis(),
            BasisSpec::TensorBspline { factors } => factors[0].num_basis() * factors[1].num_basis(),
            BasisSpec::RawDictionary { terms } => terms.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of point coordinates the basis reads.
    pub fn input_dim(&self) -> usize {
        match self {
            BasisSpec::CubicBspline(_) => 1,
            BasisSpec::TensorBspline { .. } => 2,
            BasisSpec::RawDictionary { terms } => terms
                .iter()
                .map(|t| match t {
                    Term::Const => 0,
                    Term::Power { coord, .. } => coord + 1,
                })
                .max()
                .unwrap_or(0),
        }
    }

    /// Writes `f(x)` into `out`, which must have length [`BasisSpec::len`].
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if out.len() != self.len() {
            return Err(shape(format!("output buffer {} != basis size {}", out.len(), self.len())));
        }
        match self {
            BasisSpec::CubicBspline(b) => {
                let x0 = first_coord(x)?;
                out.fill(0.0);
                let (first, local) = b.eval_local(x0)?;
                out[first..first + 4].copy_from_slice(&local);
            }
            BasisSpec::TensorBspline { factors } => {
                if x.len() < 2 {
                    return Err(shape(format!("tensor basis needs a 2-d point, got {}", x.len())));
                }
                out.fill(0.0);
                let (f1, v1) = factors[0].eval_local(x[0])?;
                let (f2, v2) = factors[1].eval_local(x[1])?;
                let cols = factors[1].num_basis();
                for (a, va) in v1.iter().enumerate() {
                    for (b, vb) in v2.iter().enumerate() {
                        out[(f1 + a) * cols + f2 + b] = va * vb;
                    }
                }
            }
            BasisSpec::RawDictionary { terms } => {
                for (slot, term) in out.iter_mut().zip(terms) {
                    *slot = term.eval(x)?;
                }
            }
        }
        Ok(())
    }
}

fn first_coord(x: &[f64]) -> Result<f64> {
    x.first().copied().ok_or_else(|| shape("basis evaluated at a zero-dimensional point"))
}

/// `f(x)` as a fresh vector.
pub fn eval_basis(basis: &BasisSpec, x: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; basis.len()];
    basis.eval_into(x, &mut out)?;
    Ok(out)
}

/// Row-major `n × J` matrix with row `i` equal to `f(xᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DesignMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `F β`.
    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        self.data.chunks_exact(self.cols).map(|row| dot(row, beta)).collect()
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

pub fn design_matrix<P: AsRef<[f64]>>(basis: &BasisSpec, xs: &[P]) -> Result<DesignMatrix> {
    let cols = basis.len();
    let mut data = vec![0.0; xs.len() * cols];
    for (x, row) in xs.iter().zip(data.chunks_exact_mut(cols.max(1))) {
        basis.eval_into(x.as_ref(), row)?;
    }
    Ok(DesignMatrix { rows: xs.len(), cols, data })
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// A function `x ↦ βᵀ f(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionParam {
    pub basis: BasisSpec,
    pub beta: Vec<f64>,
}

impl FunctionParam {
    pub fn new(basis: BasisSpec, beta: Vec<f64>) -> Result<Self> {
        if beta.len() != basis.len() {
            return Err(shape(format!("{} coefficients for a basis of size {}", beta.len(), basis.len())));
        }
        Ok(Self { basis, beta })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        eval_function(self, x)
    }
}

pub fn eval_function(fp: &FunctionParam, x: &[f64]) -> Result<f64> {
    if fp.beta.len() != fp.basis.len() {
        return Err(shape(format!("{} coefficients for a basis of size {}", fp.beta.len(), fp.basis.len())));
    }
    let f = eval_basis(&fp.basis, x)?;
    Ok(dot(&f, &fp.beta))
}
