//! Valuation families and sampling-based property checks.
//!
//! Every family is normalized (`v(0) = 0`) and monotone nondecreasing
//! componentwise. Subadditivity holds for all shipped families except
//! `GeometricMean`, which is the standard counterexample of a concave
//! multivariate function that is not subadditive.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance slack allowed when evaluating coordinates nominally in [0, 1];
/// covers rounding dust from allocation arithmetic.
const COORD_SLACK: f64 = 1e-9;

/// A concave nondecreasing piecewise-linear curve on [0, 1] with v(0) = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConcave {
    /// Breakpoints (x, value), starting at (0, 0) and ending at x = 1.
    points: Vec<(f64, f64)>,
}

impl PiecewiseConcave {
    pub fn from_breakpoints(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidValuation(
                "piecewise curve needs at least two breakpoints".into(),
            ));
        }
        if points[0] != (0.0, 0.0) {
            return Err(Error::InvalidValuation(
                "piecewise curve must start at (0, 0)".into(),
            ));
        }
        if points[points.len() - 1].0 != 1.0 {
            return Err(Error::InvalidValuation(
                "piecewise curve must end at x = 1".into(),
            ));
        }
        let mut prev_slope = f64::INFINITY;
        for w in points.windows(2) {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            if !(x1.is_finite() && y1.is_finite()) || x1 <= x0 {
                return Err(Error::InvalidValuation(
                    "breakpoint abscissae must be finite and strictly increasing".into(),
                ));
            }
            let slope = (y1 - y0) / (x1 - x0);
            if slope < 0.0 {
                return Err(Error::InvalidValuation(
                    "piecewise curve must be nondecreasing".into(),
                ));
            }
            if slope > prev_slope + 1e-9 {
                return Err(Error::InvalidValuation(
                    "piecewise curve must be concave (nonincreasing slopes)".into(),
                ));
            }
            prev_slope = slope;
        }
        Ok(Self { points })
    }

    /// Concave curve with the given nonincreasing nonnegative slopes on equal
    /// segments of [0, 1].
    pub fn from_slopes(slopes: &[f64]) -> Result<Self> {
        if slopes.is_empty() {
            return Err(Error::InvalidValuation("need at least one slope".into()));
        }
        let k = slopes.len() as f64;
        let mut points = vec![(0.0, 0.0)];
        let mut y = 0.0;
        for (s, slope) in slopes.iter().enumerate() {
            y += slope / k;
            points.push(((s as f64 + 1.0) / k, y));
        }
        points.last_mut().unwrap().0 = 1.0;
        Self::from_breakpoints(points)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let idx = self
            .points
            .partition_point(|(bx, _)| *bx <= x)
            .min(self.points.len() - 1);
        let (x1, y1) = self.points[idx];
        let (x0, y0) = self.points[idx - 1];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// The valuation families used across the experiments.
///
/// Serialized as a family tag plus a parameter object, which is the schema
/// the harness config files use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Valuation {
    /// `v(x) = sum_j w_j x_j` with `w_j >= 0`.
    Linear { weights: Vec<f64> },
    /// `v(x) = sum_j curve_j(x_j)` with each curve concave.
    AdditiveConcavePiecewise { curves: Vec<PiecewiseConcave> },
    /// `v(x) = scale * min_j x_j`.
    MinCoordinate { scale: f64 },
    /// `v(x) = scale * x_resource`.
    ScaledCoordinate { resource: usize, scale: f64 },
    /// 0 at the origin, `low` while every coordinate is below `threshold`,
    /// `2 * low` once any coordinate reaches it.
    ThresholdLow { threshold: f64, low: f64 },
    /// 0 at the origin, `high` while any coordinate is below `threshold`,
    /// `2 * high` once all coordinates reach it.
    ThresholdHigh { threshold: f64, high: f64 },
    /// Single variable: 0 at 0, `1 + epsilon * x` on (0, 1), jumps to 2 at 1.
    PolyJump { epsilon: f64 },
    /// `v(x) = sqrt(x_1 * x_2)`; concave but not subadditive.
    GeometricMean,
    /// `min(inner(x), cap)`.
    BudgetTruncated { inner: Box<Valuation>, cap: f64 },
}

impl Valuation {
    /// Required input dimension, when the family pins one down.
    pub fn arity(&self) -> Option<usize> {
        match self {
            Valuation::Linear { weights } => Some(weights.len()),
            Valuation::AdditiveConcavePiecewise { curves } => Some(curves.len()),
            Valuation::PolyJump { .. } => Some(1),
            Valuation::GeometricMean => Some(2),
            Valuation::BudgetTruncated { inner, .. } => inner.arity(),
            Valuation::MinCoordinate { .. }
            | Valuation::ScaledCoordinate { .. }
            | Valuation::ThresholdLow { .. }
            | Valuation::ThresholdHigh { .. } => None,
        }
    }

    /// True when the valuation decomposes as a sum of per-resource terms, so
    /// per-resource optimization is exact.
    pub fn is_additive(&self) -> bool {
        match self {
            Valuation::Linear { .. }
            | Valuation::AdditiveConcavePiecewise { .. }
            | Valuation::ScaledCoordinate { .. }
            | Valuation::PolyJump { .. } => true,
            Valuation::BudgetTruncated { .. }
            | Valuation::MinCoordinate { .. }
            | Valuation::ThresholdLow { .. }
            | Valuation::ThresholdHigh { .. }
            | Valuation::GeometricMean => false,
        }
    }

    /// Contribution of resource `j` at level `x` for additive families.
    pub fn eval_single(&self, j: usize, x: f64) -> Option<f64> {
        match self {
            Valuation::Linear { weights } => weights.get(j).map(|w| w * x),
            Valuation::AdditiveConcavePiecewise { curves } => curves.get(j).map(|c| c.eval(x)),
            Valuation::ScaledCoordinate { resource, scale } => {
                Some(if j == *resource { scale * x } else { 0.0 })
            }
            Valuation::PolyJump { .. } if j == 0 => {
                Some(self.eval(&[x]).expect("single coordinate in range"))
            }
            _ => None,
        }
    }

    /// Evaluates the valuation on an allocation vector in [0, 1]^m.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.is_empty() {
            return Err(Error::DimensionMismatch("empty allocation vector".into()));
        }
        if let Some(arity) = self.arity() {
            if x.len() != arity {
                return Err(Error::DimensionMismatch(format!(
                    "valuation expects {arity} coordinates, got {}",
                    x.len()
                )));
            }
        }
        for (index, v) in x.iter().enumerate() {
            if !v.is_finite() || *v < -COORD_SLACK || *v > 1.0 + COORD_SLACK {
                return Err(Error::CoordinateOutOfRange { index, value: *v });
            }
        }
        let clamped = |v: f64| v.clamp(0.0, 1.0);
        let value = match self {
            Valuation::Linear { weights } => {
                x.iter().zip(weights).map(|(v, w)| w * clamped(*v)).sum()
            }
            Valuation::AdditiveConcavePiecewise { curves } => {
                x.iter().zip(curves).map(|(v, c)| c.eval(*v)).sum()
            }
            Valuation::MinCoordinate { scale } => {
                scale * x.iter().copied().fold(f64::INFINITY, f64::min).clamp(0.0, 1.0)
            }
            Valuation::ScaledCoordinate { resource, scale } => {
                let v = x.get(*resource).ok_or_else(|| {
                    Error::DimensionMismatch(format!(
                        "scaled-coordinate resource {resource} out of range for {} coordinates",
                        x.len()
                    ))
                })?;
                scale * clamped(*v)
            }
            Valuation::ThresholdLow { threshold, low } => {
                let any_positive = x.iter().any(|v| *v > 0.0);
                let any_at_threshold = x.iter().any(|v| *v >= *threshold);
                if !any_positive {
                    0.0
                } else if any_at_threshold {
                    2.0 * low
                } else {
                    *low
                }
            }
            Valuation::ThresholdHigh { threshold, high } => {
                let any_positive = x.iter().any(|v| *v > 0.0);
                let all_at_threshold = x.iter().all(|v| *v >= *threshold);
                if !any_positive {
                    0.0
                } else if all_at_threshold {
                    2.0 * high
                } else {
                    *high
                }
            }
            Valuation::PolyJump { epsilon } => {
                let v = clamped(x[0]);
                if v == 0.0 {
                    0.0
                } else if v == 1.0 {
                    2.0
                } else {
                    1.0 + epsilon * v
                }
            }
            Valuation::GeometricMean => (clamped(x[0]) * clamped(x[1])).sqrt(),
            Valuation::BudgetTruncated { inner, cap } => inner.eval(x)?.min(*cap),
        };
        Ok(value)
    }
}

/// Wraps `v` with a budget cap: the result evaluates `min(v(x), cap)`.
/// Truncation preserves subadditivity and monotonicity.
pub fn truncate(v: &Valuation, cap: f64) -> Result<Valuation> {
    if cap.is_nan() || cap < 0.0 {
        return Err(Error::InvalidValuation(format!(
            "truncation cap must be nonnegative, got {cap}"
        )));
    }
    Ok(Valuation::BudgetTruncated {
        inner: Box::new(v.clone()),
        cap,
    })
}

/// Which structural property a report speaks about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Subadditive,
    Monotone,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    HoldsOnSamples,
    Violated,
}

/// A violating pair: for subadditivity `(x, y)` with `v(x+y) > v(x) + v(y)`,
/// for monotonicity `(x, x')` with `x <= x'` and `v(x) > v(x')`.
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Outcome of a sampling-based property check.
#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub property: Property,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub samples: usize,
    pub tolerance: f64,
}

impl PropertyReport {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::HoldsOnSamples
    }
}

fn unit(dims: usize, j: usize, v: f64) -> Vec<f64> {
    let mut x = vec![0.0; dims];
    x[j] = v;
    x
}

/// Deterministic probe pairs tested before random sampling: axis pairs and
/// half-half splits catch the textbook violations (for instance the
/// geometric mean at x = (1,0), y = (0,1)) that random draws on a continuum
/// would miss.
fn subadditive_probes(dims: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut probes = vec![(vec![0.0; dims], vec![0.0; dims])];
    for j in 0..dims {
        for k in 0..dims {
            if j != k {
                probes.push((unit(dims, j, 1.0), unit(dims, k, 1.0)));
            }
        }
        probes.push((unit(dims, j, 0.5), unit(dims, j, 0.5)));
    }
    probes.push((vec![0.5; dims], vec![0.5; dims]));
    probes
}

fn monotone_probes(dims: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut probes = vec![(vec![0.0; dims], vec![1.0; dims])];
    for j in 0..dims {
        probes.push((vec![0.0; dims], unit(dims, j, 1.0)));
        probes.push((unit(dims, j, 0.5), unit(dims, j, 1.0)));
        let mut upper = vec![1.0; dims];
        upper[j] = 0.5;
        probes.push((unit(dims, j, 0.5), upper));
    }
    probes.push((vec![0.5; dims], vec![1.0; dims]));
    probes
}

/// Generic subadditivity check over any evaluator; see [`check_subadditive`].
pub fn check_subadditive_fn<F>(
    eval: F,
    dims: usize,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<PropertyReport>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if samples == 0 {
        return Err(Error::InvalidConfig("sample count must be >= 1".into()));
    }
    if dims == 0 {
        return Err(Error::InvalidConfig("dims must be >= 1".into()));
    }
    let mut tested = 0usize;
    let mut check = |x: &[f64], y: &[f64]| -> Result<Option<Witness>> {
        tested += 1;
        let sum: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
        let lhs = eval(&sum)?;
        let rhs = eval(x)? + eval(y)?;
        if lhs > rhs + tol {
            return Ok(Some(Witness {
                x: x.to_vec(),
                y: y.to_vec(),
            }));
        }
        Ok(None)
    };

    for (x, y) in subadditive_probes(dims) {
        if let Some(w) = check(&x, &y)? {
            return Ok(PropertyReport {
                property: Property::Subadditive,
                verdict: Verdict::Violated,
                witness: Some(w),
                samples: tested,
                tolerance: tol,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let x: Vec<f64> = (0..dims).map(|_| rng.gen::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|xi| rng.gen::<f64>() * (1.0 - xi)).collect();
        if let Some(w) = check(&x, &y)? {
            return Ok(PropertyReport {
                property: Property::Subadditive,
                verdict: Verdict::Violated,
                witness: Some(w),
                samples: tested,
                tolerance: tol,
            });
        }
    }
    Ok(PropertyReport {
        property: Property::Subadditive,
        verdict: Verdict::HoldsOnSamples,
        witness: None,
        samples: tested,
        tolerance: tol,
    })
}

/// Draws pairs `x, y` with `x + y` inside the unit box (after a deterministic
/// battery of corner probes) and reports the first violation of
/// `v(x+y) <= v(x) + v(y) + tol`, with the witness pair.
pub fn check_subadditive(
    v: &Valuation,
    dims: usize,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<PropertyReport> {
    check_subadditive_fn(|x| v.eval(x), dims, samples, seed, tol)
}

/// Generic monotonicity check over any evaluator; see [`check_monotone`].
pub fn check_monotone_fn<F>(
    eval: F,
    dims: usize,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<PropertyReport>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if samples == 0 {
        return Err(Error::InvalidConfig("sample count must be >= 1".into()));
    }
    if dims == 0 {
        return Err(Error::InvalidConfig("dims must be >= 1".into()));
    }
    let mut tested = 0usize;
    let mut check = |lo: &[f64], hi: &[f64]| -> Result<Option<Witness>> {
        tested += 1;
        if eval(lo)? > eval(hi)? + tol {
            return Ok(Some(Witness {
                x: lo.to_vec(),
                y: hi.to_vec(),
            }));
        }
        Ok(None)
    };

    for (lo, hi) in monotone_probes(dims) {
        let ordered = lo.iter().zip(&hi).all(|(a, b)| a <= b);
        if ordered {
            if let Some(w) = check(&lo, &hi)? {
                return Ok(PropertyReport {
                    property: Property::Monotone,
                    verdict: Verdict::Violated,
                    witness: Some(w),
                    samples: tested,
                    tolerance: tol,
                });
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let lo: Vec<f64> = (0..dims).map(|_| rng.gen::<f64>()).collect();
        let hi: Vec<f64> = lo
            .iter()
            .map(|xi| xi + rng.gen::<f64>() * (1.0 - xi))
            .collect();
        if let Some(w) = check(&lo, &hi)? {
            return Ok(PropertyReport {
                property: Property::Monotone,
                verdict: Verdict::Violated,
                witness: Some(w),
                samples: tested,
                tolerance: tol,
            });
        }
    }
    Ok(PropertyReport {
        property: Property::Monotone,
        verdict: Verdict::HoldsOnSamples,
        witness: None,
        samples: tested,
        tolerance: tol,
    })
}

/// Samples ordered pairs `x <= x'` and reports the first violation of
/// `v(x) <= v(x') + tol`.
pub fn check_monotone(
    v: &Valuation,
    dims: usize,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<PropertyReport> {
    check_monotone_fn(|x| v.eval(x), dims, samples, seed, tol)
}
