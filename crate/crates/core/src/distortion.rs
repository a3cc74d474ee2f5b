//! Concave distortion functions `ψ: [0,1] → [0,1]` with `ψ(0) = 0`, `ψ(1) = 1`.
//!
//! A distortion turns a probability `P` into the capacity `c(A) = ψ(P(A))`.
//! Concavity makes that capacity submodular, which is what the Choquet
//! estimator and its error bounds rely on.
//!
//! Textual syntax (used by the CLI):
//!
//! | text                    | distortion                         |
//! |-------------------------|------------------------------------|
//! | `avar:0.05`             | `min(t, 0.05) / 0.05`              |
//! | `power:0.5`             | `t^0.5`                            |
//! | `identity`              | `t`                                |
//! | `pwl:0.1,0.5;0.5,0.9`   | linear through (0,0),(0.1,0.5),(0.5,0.9),(1,1) |

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

/// Tolerance used when checking slope monotonicity of piecewise-linear knots.
const SLOPE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistortionError {
    #[error("argument {0} is outside the domain {1}")]
    Domain(f64, &'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid piecewise-linear knots: {0}")]
    InvalidKnots(String),
    #[error("cannot parse distortion {text:?}: {reason} (expected avar:<l>, power:<a>, identity or pwl:t1,y1;t2,y2;...)")]
    Parse { text: String, reason: String },
}

/// A real number or `+∞`.
///
/// Right derivatives of concave distortions may diverge at zero
/// (e.g. `√t`); bound selection branches on that exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    /// The finite value, if any.
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PosInfinity => None,
        }
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering;
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a.partial_cmp(b),
            (ExtendedReal::Finite(_), ExtendedReal::PosInfinity) => Some(Ordering::Less),
            (ExtendedReal::PosInfinity, ExtendedReal::Finite(_)) => Some(Ordering::Greater),
            (ExtendedReal::PosInfinity, ExtendedReal::PosInfinity) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::PosInfinity => f.write_str("inf"),
        }
    }
}

/// Serialized as a JSON number, or the string `"inf"`.
impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(v) => serializer.serialize_f64(*v),
            ExtendedReal::PosInfinity => serializer.serialize_str("inf"),
        }
    }
}

/// Validated knots of a piecewise-linear concave distortion.
///
/// Always starts at `(0, 0)` and ends at `(1, 1)`, with strictly increasing
/// abscissae and nonincreasing, nonnegative slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct Knots {
    points: Vec<(f64, f64)>,
    slopes: Vec<f64>,
}

impl Knots {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, DistortionError> {
        let bad = |msg: String| Err(DistortionError::InvalidKnots(msg));
        if points.len() < 2 {
            return bad("at least the anchors (0,0) and (1,1) are required".into());
        }
        if points.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
            return bad("knots must be finite".into());
        }
        if points[0] != (0.0, 0.0) {
            return bad(format!("first knot must be (0,0), got {:?}", points[0]));
        }
        if points[points.len() - 1] != (1.0, 1.0) {
            return bad(format!(
                "last knot must be (1,1), got {:?}",
                points[points.len() - 1]
            ));
        }
        let mut slopes = Vec::with_capacity(points.len() - 1);
        for w in points.windows(2) {
            let ((t0, y0), (t1, y1)) = (w[0], w[1]);
            if t1 <= t0 {
                return bad(format!("abscissae must increase strictly ({t0} then {t1})"));
            }
            slopes.push((y1 - y0) / (t1 - t0));
        }
        if let Some(s) = slopes.iter().find(|s| **s < 0.0) {
            return bad(format!("decreasing segment with slope {s}"));
        }
        for (i, w) in slopes.windows(2).enumerate() {
            if w[1] > w[0] + SLOPE_TOLERANCE {
                return bad(format!(
                    "not concave: slope increases from {} to {} at t = {}",
                    w[0],
                    w[1],
                    points[i + 1].0
                ));
            }
        }
        Ok(Knots { points, slopes })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Index of the segment `[t_k, t_{k+1})` containing `t` (last segment for `t = 1`).
    fn segment(&self, t: f64) -> usize {
        let k = self.points.partition_point(|(tk, _)| *tk <= t);
        k.saturating_sub(1).min(self.slopes.len() - 1)
    }

    fn eval(&self, t: f64) -> f64 {
        let k = self.segment(t);
        let (t0, y0) = self.points[k];
        let (t1, y1) = self.points[k + 1];
        if t == t1 {
            return y1;
        }
        (y0 + self.slopes[k] * (t - t0)).clamp(y0, y1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DistortionKind {
    /// `min(t, λ) / λ`: the average value-at-risk at level `λ`.
    AVaR {
        lambda: f64,
    },
    /// `t^a` for `0 < a ≤ 1`.
    Power {
        exponent: f64,
    },
    Identity,
    PiecewiseLinear(Knots),
}

/// A concave distortion function. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Distortion {
    kind: DistortionKind,
}

impl Distortion {
    pub fn avar(lambda: f64) -> Result<Self, DistortionError> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(DistortionError::InvalidParameter(format!(
                "AVaR level must lie in (0, 1], got {lambda}"
            )));
        }
        Ok(Distortion {
            kind: DistortionKind::AVaR { lambda },
        })
    }

    pub fn power(exponent: f64) -> Result<Self, DistortionError> {
        if !(exponent > 0.0 && exponent <= 1.0) {
            return Err(DistortionError::InvalidParameter(format!(
                "power exponent must lie in (0, 1], got {exponent}"
            )));
        }
        Ok(Distortion {
            kind: DistortionKind::Power { exponent },
        })
    }

    pub fn identity() -> Self {
        Distortion {
            kind: DistortionKind::Identity,
        }
    }

    /// Builds a piecewise-linear distortion from its full knot list,
    /// anchors included.
    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self, DistortionError> {
        Ok(Distortion {
            kind: DistortionKind::PiecewiseLinear(Knots::new(knots)?),
        })
    }

    pub fn kind(&self) -> &DistortionKind {
        &self.kind
    }

    /// `ψ(t)` for `t ∈ [0, 1]`.
    pub fn eval(&self, t: f64) -> Result<f64, DistortionError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(DistortionError::Domain(t, "[0, 1]"));
        }
        Ok(self.eval_unchecked(t))
    }

    /// `ψ(t)` without the domain check; callers guarantee `t ∈ [0, 1]`.
    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        match &self.kind {
            DistortionKind::AVaR { lambda } => t.min(*lambda) / lambda,
            DistortionKind::Power { exponent } => {
                if t == 0.0 {
                    0.0
                } else {
                    t.powf(*exponent)
                }
            }
            DistortionKind::Identity => t,
            DistortionKind::PiecewiseLinear(knots) => knots.eval(t),
        }
    }

    /// Right derivative `ψ'₊(t)` for `t ∈ [0, 1)`.
    pub fn right_derivative(&self, t: f64) -> Result<ExtendedReal, DistortionError> {
        if !(0.0..1.0).contains(&t) {
            return Err(DistortionError::Domain(t, "[0, 1)"));
        }
        let slope = match &self.kind {
            DistortionKind::AVaR { lambda } => {
                if t < *lambda {
                    1.0 / lambda
                } else {
                    0.0
                }
            }
            DistortionKind::Power { exponent } => {
                if t == 0.0 {
                    if *exponent < 1.0 {
                        return Ok(ExtendedReal::PosInfinity);
                    }
                    1.0
                } else {
                    exponent * t.powf(exponent - 1.0)
                }
            }
            DistortionKind::Identity => 1.0,
            DistortionKind::PiecewiseLinear(knots) => knots.slopes[knots.segment(t)],
        };
        Ok(ExtendedReal::Finite(slope))
    }

    /// `ψ'₊(0)`.
    pub fn zero_derivative(&self) -> ExtendedReal {
        self.right_derivative(0.0)
            .expect("0 is always in the derivative domain")
    }

    pub fn has_finite_zero_derivative(&self) -> bool {
        self.zero_derivative().is_finite()
    }
}

impl fmt::Display for Distortion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DistortionKind::AVaR { lambda } => write!(f, "avar:{lambda}"),
            DistortionKind::Power { exponent } => write!(f, "power:{exponent}"),
            DistortionKind::Identity => f.write_str("identity"),
            DistortionKind::PiecewiseLinear(knots) => {
                f.write_str("pwl:")?;
                let inner = &knots.points[1..knots.points.len() - 1];
                for (i, (t, y)) in inner.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{t},{y}")?;
                }
                Ok(())
            }
        }
    }
}

impl Serialize for Distortion {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl FromStr for Distortion {
    type Err = DistortionError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let fail = |reason: String| DistortionError::Parse {
            text: text.to_string(),
            reason,
        };
        let number = |s: &str| -> Result<f64, DistortionError> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| fail(format!("{s:?}: {e}")))
        };
        let trimmed = text.trim();
        if trimmed == "identity" {
            return Ok(Distortion::identity());
        }
        let (name, arg) = trimmed
            .split_once(':')
            .ok_or_else(|| fail("missing ':'".into()))?;
        match name {
            "avar" => Distortion::avar(number(arg)?).map_err(|e| fail(e.to_string())),
            "power" => Distortion::power(number(arg)?).map_err(|e| fail(e.to_string())),
            "pwl" => {
                let mut knots = vec![(0.0, 0.0)];
                for pair in arg.split(';').filter(|s| !s.trim().is_empty()) {
                    let (t, y) = pair
                        .split_once(',')
                        .ok_or_else(|| fail(format!("knot {pair:?} is not 't,y'")))?;
                    let knot = (number(t)?, number(y)?);
                    // Anchors are implied; tolerate them when spelled out.
                    if knot != (0.0, 0.0) && knot != (1.0, 1.0) {
                        knots.push(knot);
                    }
                }
                knots.push((1.0, 1.0));
                Distortion::piecewise_linear(knots).map_err(|e| fail(e.to_string()))
            }
            other => Err(fail(format!("unknown distortion family {other:?}"))),
        }
    }
}
