//! Integrands `f: [0,1]^d → ℝ` with optional regularity metadata.
//!
//! The metadata feeds the error certificates: a Lipschitz constant `L`
//! (with respect to the max norm) bounds the modulus of continuity by
//! `L·t`, and a sup-norm bound `M ≥ max |f|` caps it at `2M`.
//!
//! Built-ins:
//!
//! * `paper-example` (d = 5): `exp(-(u1·u2·u3 + sin(u3·u4·u5)))`. The exponent
//!   `g` lies in `[0, 1 + sin 1]` on the cube, so `f ∈ [e^{-1.85}, 1]` and
//!   `M = 1`. Since `0 < f ≤ 1`, `|∂_k f| ≤ |∂_k g|`, and the partials of `g`
//!   are bounded by 1, 1, 2, 1, 1. Summing gives `L = 6` in the max norm.
//! * `linear-1d` (d = 1): `f(u) = u1`, with `L = 1`, `M = 1`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{parse_expression, EvalError, Expr, ExprError, Program};

/// Names accepted by [`Integrand::builtin`].
pub const BUILTINS: [&str; 2] = ["paper-example", "linear-1d"];

type EvalFn = dyn Fn(&[f64]) -> Result<f64, EvalError> + Send + Sync;
type ModulusFn = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrandError {
    #[error("unknown built-in {0:?}; available: {list}", list = BUILTINS.join(", "))]
    UnknownBuiltin(String),
    #[error(transparent)]
    Expression(#[from] ExprError),
    #[error("built-in {name} has dimension {builtin}, but dimension {requested} was requested")]
    DimensionMismatch {
        name: String,
        builtin: usize,
        requested: usize,
    },
    #[error("invalid function spec {0:?}: expected expr:<text> or builtin:<name>")]
    Spec(String),
}

/// A function on the unit cube plus whatever is known about its regularity.
///
/// Evaluation is reentrant; an `Integrand` can be shared across threads.
#[derive(Clone)]
pub struct Integrand {
    dim: usize,
    label: String,
    evaluator: Arc<EvalFn>,
    lipschitz: Option<f64>,
    sup_norm: Option<f64>,
    modulus: Option<Arc<ModulusFn>>,
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Integrand")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("lipschitz", &self.lipschitz)
            .field("sup_norm", &self.sup_norm)
            .field("modulus", &self.modulus.is_some())
            .finish()
    }
}

impl Integrand {
    pub fn from_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::from_fallible_fn(dim, move |u| Ok(f(u)))
    }

    pub fn from_fallible_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<f64, EvalError> + Send + Sync + 'static,
    {
        assert!(dim >= 1, "integrand dimension must be >= 1");
        Integrand {
            dim,
            label: "closure".to_string(),
            evaluator: Arc::new(f),
            lipschitz: None,
            sup_norm: None,
            modulus: None,
        }
    }

    /// Compiles `expr` into a stack program. No metadata is attached.
    pub fn from_expression(expr: &Expr, dim: usize) -> Self {
        let program: Program = expr.compile();
        let mut f = Self::from_fallible_fn(dim, move |u| program.eval(u));
        f.label = format!("expr:{expr}");
        f
    }

    pub fn builtin(name: &str) -> Result<Self, IntegrandError> {
        let f = match name {
            "paper-example" => Self::from_fn(5, |u| {
                (-(u[0] * u[1] * u[2] + (u[2] * u[3] * u[4]).sin())).exp()
            })
            .with_lipschitz(6.0)
            .with_sup_norm(1.0),
            "linear-1d" => Self::from_fn(1, |u| u[0])
                .with_lipschitz(1.0)
                .with_sup_norm(1.0),
            other => return Err(IntegrandError::UnknownBuiltin(other.to_string())),
        };
        Ok(f.with_label(format!("builtin:{name}")))
    }

    /// Parses the CLI form `expr:<text>` or `builtin:<name>` for dimension `dim`.
    pub fn from_spec(spec: &str, dim: usize) -> Result<Self, IntegrandError> {
        if let Some(text) = spec.strip_prefix("expr:") {
            let expr = parse_expression(text, dim)?;
            Ok(Self::from_expression(&expr, dim))
        } else if let Some(name) = spec.strip_prefix("builtin:") {
            let f = Self::builtin(name)?;
            if f.dim != dim {
                return Err(IntegrandError::DimensionMismatch {
                    name: name.to_string(),
                    builtin: f.dim,
                    requested: dim,
                });
            }
            Ok(f)
        } else {
            Err(IntegrandError::Spec(spec.to_string()))
        }
    }

    /// Panics on a negative or non-finite constant.
    pub fn with_lipschitz(mut self, l: f64) -> Self {
        assert!(l.is_finite() && l >= 0.0, "Lipschitz constant must be >= 0");
        self.lipschitz = Some(l);
        self
    }

    /// Panics on a negative or non-finite bound.
    pub fn with_sup_norm(mut self, m: f64) -> Self {
        assert!(m.is_finite() && m >= 0.0, "sup-norm bound must be >= 0");
        self.sup_norm = Some(m);
        self
    }

    /// Attaches a user-supplied upper bound `t ↦ ρ(f; t)` on the modulus of continuity.
    pub fn with_modulus<F>(mut self, modulus: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.modulus = Some(Arc::new(modulus));
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn lipschitz_constant(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn sup_norm_bound(&self) -> Option<f64> {
        self.sup_norm
    }

    pub(crate) fn user_modulus(&self) -> Option<&ModulusFn> {
        self.modulus.as_deref()
    }

    pub fn eval(&self, u: &[f64]) -> Result<f64, EvalError> {
        if u.len() != self.dim {
            return Err(EvalError::WrongDimension {
                expected: self.dim,
                got: u.len(),
            });
        }
        (self.evaluator)(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::PointSet;

    #[test]
    fn builtin_examples() {
        let lin = Integrand::builtin("linear-1d").unwrap();
        assert_eq!(lin.eval(&[0.3]).unwrap(), 0.3);
        assert_eq!(lin.lipschitz_constant(), Some(1.0));
        assert_eq!(lin.sup_norm_bound(), Some(1.0));

        let ex = Integrand::builtin("paper-example").unwrap();
        assert_eq!(ex.dim(), 5);
        assert_eq!(ex.eval(&[0.0; 5]).unwrap(), 1.0);
        let at_one = ex.eval(&[1.0; 5]).unwrap();
        assert_eq!(at_one, (-1.0 - 1f64.sin()).exp());
        assert!((at_one - 0.158_58).abs() < 1e-5);
    }

    #[test]
    fn unknown_builtin_lists_names() {
        let err = Integrand::builtin("nope").unwrap_err();
        assert!(err.to_string().contains("paper-example"));
        assert!(err.to_string().contains("linear-1d"));
    }

    #[test]
    fn specs() {
        let f = Integrand::from_spec("expr:u1 * u2", 2).unwrap();
        assert_eq!(f.eval(&[0.5, 0.25]).unwrap(), 0.125);
        assert_eq!(f.lipschitz_constant(), None);
        assert!(matches!(
            Integrand::from_spec("builtin:paper-example", 3),
            Err(IntegrandError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            Integrand::from_spec("expr:u3", 2),
            Err(IntegrandError::Expression(
                ExprError::VariableOutOfRange { .. }
            ))
        ));
        assert!(matches!(
            Integrand::from_spec("u1", 1),
            Err(IntegrandError::Spec(_))
        ));
    }

    #[test]
    fn wrong_dimension_is_an_error() {
        let f = Integrand::builtin("linear-1d").unwrap();
        assert_eq!(
            f.eval(&[0.1, 0.2]),
            Err(EvalError::WrongDimension {
                expected: 1,
                got: 2
            })
        );
    }

    #[test]
    fn paper_example_range() {
        let f = Integrand::builtin("paper-example").unwrap();
        let lo = (-2.0f64).exp();
        let pts = PointSet::pseudo_random(5, 100_000, 5).unwrap();
        for u in pts.iter() {
            let v = f.eval(u).unwrap();
            assert!(v > lo && v <= 1.0, "{v}");
        }
    }

    #[test]
    fn metadata_holds_on_samples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for name in BUILTINS {
            let f = Integrand::builtin(name).unwrap();
            let l = f.lipschitz_constant().unwrap();
            let m = f.sup_norm_bound().unwrap();
            for _ in 0..20_000 {
                let x: Vec<f64> = (0..f.dim()).map(|_| rng.gen()).collect();
                let y: Vec<f64> = (0..f.dim()).map(|_| rng.gen()).collect();
                let dist = x
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let (fx, fy) = (f.eval(&x).unwrap(), f.eval(&y).unwrap());
                assert!(fx.abs() <= m);
                assert!((fx - fy).abs() <= l * dist + 1e-15);
            }
        }
    }

    #[test]
    fn expression_integrand_surfaces_domain_errors() {
        let f = Integrand::from_spec("expr:log(u1)", 1).unwrap();
        assert_eq!(f.eval(&[0.0]), Err(EvalError::LogDomain(0.0)));
        assert!(f.eval(&[0.5]).is_ok());
    }
}
