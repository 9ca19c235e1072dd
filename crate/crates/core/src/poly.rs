//! Degree-≤2 polynomials, the threshold classifiers built on them, and
//! labeled point sets.
//!
//! A [`QuadPoly`] is `g(x) = xᵀAx + bᵀx + c` with `A` stored symmetric. The
//! sign convention used everywhere is `sgn(t) = +1` iff `t ≥ 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::boxmax::{self, BruteMode, MaximizeConfig};
use crate::error::{Error, Result};

/// A binary label in `{-1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i64")]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        match l {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }
}

impl TryFrom<i64> for Label {
    type Error = Error;
    fn try_from(v: i64) -> Result<Self> {
        match v {
            1 => Ok(Label::Pos),
            -1 => Ok(Label::Neg),
            other => Err(Error::Parse(format!("label must be -1 or 1, got {other}"))),
        }
    }
}

/// `+1` for `t ≥ 0`, `-1` otherwise.
pub fn sgn(t: f64) -> Label {
    if t >= 0.0 {
        Label::Pos
    } else {
        Label::Neg
    }
}

/// `g(x) = xᵀAx + bᵀx + c` in `n` variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuadPolyJson", into = "QuadPolyJson")]
pub struct QuadPoly {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
}

impl QuadPoly {
    /// Builds the polynomial, replacing `A` by `(A + Aᵀ)/2`.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: f64) -> Result<Self> {
        let n = b.len();
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::invalid(format!(
                "quadratic part is {}x{}, linear part has length {n}",
                a.nrows(),
                a.ncols()
            )));
        }
        let mut a = a;
        for i in 0..n {
            for j in (i + 1)..n {
                let s = 0.5 * (a[(i, j)] + a[(j, i)]);
                a[(i, j)] = s;
                a[(j, i)] = s;
            }
        }
        Ok(QuadPoly { a, b, c })
    }

    pub fn from_rows(a: &[Vec<f64>], b: &[f64], c: f64) -> Result<Self> {
        let n = b.len();
        if a.len() != n || a.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("quadratic part must be n x n"));
        }
        let a = DMatrix::from_fn(n, n, |i, j| a[i][j]);
        Self::new(a, DVector::from_column_slice(b), c)
    }

    pub fn linear(b: &[f64], c: f64) -> Self {
        let n = b.len();
        QuadPoly {
            a: DMatrix::zeros(n, n),
            b: DVector::from_column_slice(b),
            c,
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        QuadPoly {
            a: DMatrix::zeros(n, n),
            b: DVector::zeros(n),
            c,
        }
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// 2 if any quadratic coefficient is nonzero, 1 if only linear terms are,
    /// 0 for a constant.
    pub fn degree(&self) -> usize {
        if self.a.iter().any(|&v| v != 0.0) {
            2
        } else if self.b.iter().any(|&v| v != 0.0) {
            1
        } else {
            0
        }
    }

    pub fn has_zero_diagonal(&self) -> bool {
        (0..self.n()).all(|i| self.a[(i, i)] == 0.0)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Error::check_dim(self.n(), x.len())?;
        Ok(self.eval(x))
    }

    /// Unchecked evaluation; `x.len()` must equal `n`.
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        let n = self.n();
        let mut quad = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.a[(i, j)] * x[j];
            }
            quad += x[i] * row;
        }
        let lin: f64 = (0..n).map(|i| self.b[i] * x[i]).sum();
        quad + lin + self.c
    }

    /// Gradient `2Ax + b`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.n(), x.len())?;
        let n = self.n();
        Ok((0..n)
            .map(|i| 2.0 * (0..n).map(|j| self.a[(i, j)] * x[j]).sum::<f64>() + self.b[i])
            .collect())
    }

    /// `h(z) = g(x0 + z)`, i.e. `(A, 2A·x0 + b, g(x0))`.
    pub fn shift(&self, x0: &[f64]) -> Result<QuadPoly> {
        Error::check_dim(self.n(), x0.len())?;
        let x0v = DVector::from_column_slice(x0);
        let b = &self.a * &x0v * 2.0 + &self.b;
        Ok(QuadPoly {
            a: self.a.clone(),
            b,
            c: self.eval(x0),
        })
    }

    pub fn scaled(&self, s: f64) -> QuadPoly {
        QuadPoly {
            a: &self.a * s,
            b: &self.b * s,
            c: self.c * s,
        }
    }

    /// `-y · g`: the polynomial whose positivity means the label `y` flipped.
    pub fn negate_for_label(&self, y: Label) -> QuadPoly {
        self.scaled(-y.sign())
    }

    pub fn add_constant(&self, dc: f64) -> QuadPoly {
        QuadPoly {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c + dc,
        }
    }

    /// Magnitude reference for solver tolerances over the δ-box:
    /// `max(1, ‖A‖max·n·δ², ‖b‖max·n·δ, |c|)`.
    pub fn scale(&self, delta: f64) -> f64 {
        let n = self.n() as f64;
        let amax = self.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bmax = self.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        1.0f64
            .max(amax * n * delta * delta)
            .max(bmax * n * delta)
            .max(self.c.abs())
    }
}

#[derive(Serialize, Deserialize)]
struct QuadPolyJson {
    n: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: f64,
}

impl TryFrom<QuadPolyJson> for QuadPoly {
    type Error = Error;
    fn try_from(j: QuadPolyJson) -> Result<Self> {
        if j.b.len() != j.n {
            return Err(Error::DimensionMismatch {
                expected: j.n,
                got: j.b.len(),
            });
        }
        QuadPoly::from_rows(&j.a, &j.b, j.c)
    }
}

impl From<QuadPoly> for QuadPolyJson {
    fn from(p: QuadPoly) -> Self {
        let n = p.n();
        QuadPolyJson {
            n,
            a: (0..n).map(|i| (0..n).map(|j| p.a[(i, j)]).collect()).collect(),
            b: p.b.iter().copied().collect(),
            c: p.c,
        }
    }
}

/// `sgn(g(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PtfClassifier {
    pub g: QuadPoly,
}

impl PtfClassifier {
    pub fn new(g: QuadPoly) -> Self {
        PtfClassifier { g }
    }

    pub fn n(&self) -> usize {
        self.g.n()
    }

    pub fn degree(&self) -> usize {
        self.g.degree()
    }

    pub fn classify(&self, x: &[f64]) -> Result<Label> {
        Ok(sgn(self.g.evaluate(x)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: Vec<f64>,
    pub y: Label,
}

/// Points with ±1 labels, all in the same dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    dim: usize,
    points: Vec<LabeledPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
}

impl LabeledSet {
    pub fn new(dim: usize, points: Vec<LabeledPoint>) -> Result<Self> {
        for p in &points {
            Error::check_dim(dim, p.x.len())?;
            if p.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite coordinate"));
            }
        }
        Ok(LabeledSet {
            dim,
            points,
            delta: None,
        })
    }

    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (Vec<f64>, Label)>) -> Result<Self> {
        Self::new(
            dim,
            pairs.into_iter().map(|(x, y)| LabeledPoint { x, y }).collect(),
        )
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::invalid("δ must be nonnegative"));
        }
        self.delta = Some(delta);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[LabeledPoint] {
        &self.points
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn iter(&self) -> impl Iterator<Item = &LabeledPoint> {
        self.points.iter()
    }
}

/// Which reference the flip test compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlipMode {
    /// Adversarial iff `sgn(g(x+z)) ≠ sgn(g(x))`.
    Model,
    /// Adversarial iff `sgn(g(x+z)) ≠ y` for the given label.
    Label,
}

/// Does a flip-polynomial maximum certify a sign change for reference `y`?
/// For `y = +1` the flip needs `g < 0` (strictly positive flip value); for
/// `y = -1` it needs `g ≥ 0`, so a zero flip value already counts.
pub fn is_flip_value(value: f64, y: Label) -> bool {
    match y {
        Label::Pos => value > 0.0,
        Label::Neg => value >= 0.0,
    }
}

/// How [`robust_empirical_error`] maximizes the flip polynomial.
#[derive(Debug, Clone)]
pub enum BoxOracle {
    /// Brute force: exact for degree ≤ 1, vertex enumeration for zero-diagonal
    /// quadratics, face enumeration otherwise (small `n` only).
    Exact,
    /// Uniform grid with the given points per axis (`n ≤ 6`).
    Grid(usize),
    /// SDP relaxation + rounding. Over-estimates the δ-robust error, since
    /// perturbations of size up to γδ may be reported.
    Sdp { eta: f64, seed: u64, config: MaximizeConfig },
}

/// Fraction `flagged / total` of points with a label flip inside the δ-ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobustError {
    pub flagged: usize,
    pub total: usize,
}

impl RobustError {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.flagged as f64 / self.total as f64
        }
    }
}

/// Is there `z` with `‖z‖∞ ≤ δ` and `sgn(g(x+z)) ≠ y`?
pub fn has_flip(g: &QuadPoly, x: &[f64], y: Label, delta: f64, oracle: &BoxOracle) -> Result<bool> {
    Error::check_dim(g.n(), x.len())?;
    if !(delta >= 0.0) {
        return Err(Error::invalid("δ must be nonnegative"));
    }
    let h = g.shift(x)?.negate_for_label(y);
    if delta == 0.0 {
        return Ok(is_flip_value(h.c(), y));
    }
    let value = match oracle {
        BoxOracle::Exact => boxmax::exact_boxmax(&h, delta)?.value,
        BoxOracle::Grid(points) => {
            boxmax::brute_force_boxmax(&h, delta, BruteMode::Grid { points: *points })?.value
        }
        BoxOracle::Sdp { eta, seed, config } => {
            boxmax::maximize_quadratic_with(&h, delta, *eta, *seed, config)?.value
        }
    };
    Ok(is_flip_value(value, y))
}

/// Empirical δ-robust error of `f` on `s` in label mode.
pub fn robust_empirical_error(
    f: &PtfClassifier,
    s: &LabeledSet,
    delta: f64,
    oracle: &BoxOracle,
) -> Result<RobustError> {
    Error::check_dim(f.n(), s.dim())?;
    let mut flagged = 0;
    for (i, p) in s.iter().enumerate() {
        let oracle_i = match oracle {
            BoxOracle::Sdp { eta, seed, config } => BoxOracle::Sdp {
                eta: *eta,
                seed: crate::rng::derive_seed(*seed, i as u64),
                config: config.clone(),
            },
            other => other.clone(),
        };
        if has_flip(&f.g, &p.x, p.y, delta, &oracle_i)? {
            flagged += 1;
        }
    }
    Ok(RobustError {
        flagged,
        total: s.len(),
    })
}
