//! Error certificates for the quasi-Monte Carlo Choquet estimator.
//!
//! With `ρ = ρ(f; D*^{1/d})` the modulus of continuity of `f` (max norm)
//! at the `d`-th root of the star discrepancy:
//!
//! * if `ψ'₊(0) < ∞`: `|error| ≤ C · ψ'₊(0) · ρ`;
//! * otherwise, if `ρ < 1`: `|error| ≤ (2M + C) · ψ(ρ)` with `M ≥ max |f|`;
//!
//! where `C = 4`, or `C = 1` in one dimension. A certificate is only issued
//! when every input is a sound over-estimate: an exact discrepancy, a
//! modulus derived from a known Lipschitz constant (or a user-supplied
//! modulus), and a declared sup-norm bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::discrepancy::{
    lower_bound_within, star_discrepancy, DiscrepancyMode, DiscrepancyResult,
};
use crate::distortion::{Distortion, ExtendedReal};
use crate::expr::EvalError;
use crate::integrand::Integrand;
use crate::pointset::PointSet;

/// Finest grid used by [`certify`] when exact discrepancy is over budget;
/// coarser in high dimension.
pub const FALLBACK_GRID: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("integrand failed: {0}")]
    Evaluation(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Branch {
    GeneralPsi,
    FiniteDerivative,
    NoCertificate(String),
}

impl Branch {
    pub fn name(&self) -> &'static str {
        match self {
            Branch::GeneralPsi => "GeneralPsi",
            Branch::FiniteDerivative => "FiniteDerivative",
            Branch::NoCertificate(_) => "NoCertificate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBound {
    /// Certified bound on `|∫ f dc_ψ − estimate|`; `None` without a certificate.
    pub value: Option<f64>,
    pub branch: Branch,
    /// `ρ(f; D*^{1/d})` as modelled from the integrand metadata.
    pub rho: Option<f64>,
    pub discrepancy: DiscrepancyResult,
    /// 4, or 1 in one dimension.
    pub constant: f64,
    pub psi_zero_derivative: ExtendedReal,
    pub sup_norm_bound: Option<f64>,
}

impl Serialize for ErrorBound {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("ErrorBound", 8)?;
        s.serialize_field("value", &self.value)?;
        s.serialize_field("branch", self.branch.name())?;
        let reason = match &self.branch {
            Branch::NoCertificate(r) => Some(r.as_str()),
            _ => None,
        };
        s.serialize_field("reason", &reason)?;
        s.serialize_field("rho", &self.rho)?;
        s.serialize_field("discrepancy", &self.discrepancy)?;
        s.serialize_field("constant", &self.constant)?;
        s.serialize_field("psi_zero_derivative", &self.psi_zero_derivative)?;
        s.serialize_field("sup_norm_bound", &self.sup_norm_bound)?;
        s.end()
    }
}

/// Upper bound on the modulus of continuity `ρ(f; t)`.
///
/// Uses a user-supplied modulus if present, else `L·t`; either is capped at
/// `2M` when a sup-norm bound is known. `None` when nothing is known about
/// `f` (and `t > 0`).
pub fn modulus(f: &Integrand, t: f64) -> Option<f64> {
    if t == 0.0 {
        return Some(0.0);
    }
    let raw = match (f.user_modulus(), f.lipschitz_constant()) {
        (Some(m), _) => m(t),
        (None, Some(l)) => l * t,
        (None, None) => return None,
    };
    Some(match f.sup_norm_bound() {
        Some(m) => raw.min(2.0 * m),
        None => raw,
    })
}

/// Largest `|f(x) − f(y)|` over `samples` random pairs with `|x − y|_∞ ≤ t`.
///
/// A lower bound on `ρ(f; t)`; exceeding `L·t` proves a declared Lipschitz
/// constant too small.
pub fn empirical_modulus_lower(
    f: &Integrand,
    t: f64,
    samples: usize,
    seed: u64,
) -> Result<f64, BoundsError> {
    if t.is_nan() || t <= 0.0 {
        return Err(BoundsError::Domain(format!("t must be > 0, got {t}")));
    }
    if samples == 0 {
        return Err(BoundsError::Domain("samples must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; f.dim()];
    let mut y = vec![0.0; f.dim()];
    let mut best = 0.0f64;
    for _ in 0..samples {
        for k in 0..f.dim() {
            x[k] = rng.gen::<f64>();
            y[k] = (x[k] + t * rng.gen_range(-1.0..=1.0)).clamp(0.0, 1.0);
        }
        best = best.max((f.eval(&x)? - f.eval(&y)?).abs());
    }
    Ok(best)
}

/// `C = 1` in one dimension, 4 otherwise.
pub fn bound_constant(dim: usize) -> f64 {
    if dim == 1 {
        1.0
    } else {
        4.0
    }
}

/// Applies the branch selection to already computed inputs; returns the
/// bound value and branch.
pub fn select_bound(
    dim: usize,
    psi: &Distortion,
    rho: f64,
    sup_norm: Option<f64>,
) -> (Option<f64>, Branch) {
    let c = bound_constant(dim);
    match psi.zero_derivative() {
        ExtendedReal::Finite(slope) => (Some(c * slope * rho), Branch::FiniteDerivative),
        ExtendedReal::PosInfinity => {
            if rho >= 1.0 {
                return (
                    None,
                    Branch::NoCertificate(format!("rho = {rho} is not below 1")),
                );
            }
            match sup_norm {
                Some(m) => (
                    Some((2.0 * m + c) * psi.eval_unchecked(rho)),
                    Branch::GeneralPsi,
                ),
                None => (
                    None,
                    Branch::NoCertificate("integrand has no sup-norm bound".into()),
                ),
            }
        }
    }
}

/// Error certificate for the estimate of `f` over `points`, given the
/// discrepancy of that same point set.
pub fn theorem1_bound(
    f: &Integrand,
    points: &PointSet,
    psi: &Distortion,
    discrepancy: DiscrepancyResult,
) -> ErrorBound {
    let dim = points.dim();
    let mut bound = ErrorBound {
        value: None,
        branch: Branch::NoCertificate(String::new()),
        rho: None,
        discrepancy,
        constant: bound_constant(dim),
        psi_zero_derivative: psi.zero_derivative(),
        sup_norm_bound: f.sup_norm_bound(),
    };
    let refuse = |mut b: ErrorBound, reason: String| {
        b.branch = Branch::NoCertificate(reason);
        b
    };
    if discrepancy.n != points.len() || discrepancy.dim != dim || f.dim() != dim {
        return refuse(
            bound,
            format!(
                "discrepancy (n={}, d={}), points (n={}, d={dim}) and integrand (d={}) disagree",
                discrepancy.n,
                discrepancy.dim,
                points.len(),
                f.dim()
            ),
        );
    }
    if discrepancy.mode == DiscrepancyMode::LowerBound {
        return refuse(
            bound,
            "star discrepancy is only a lower bound; an exact value is required".into(),
        );
    }
    let t = discrepancy.value.powf(1.0 / dim as f64);
    let Some(rho) = modulus(f, t) else {
        return refuse(
            bound,
            "integrand has no Lipschitz constant or modulus of continuity".into(),
        );
    };
    bound.rho = Some(rho);
    let (value, branch) = select_bound(dim, psi, rho, f.sup_norm_bound());
    bound.value = value;
    bound.branch = branch;
    bound
}

/// Computes the discrepancy (exact when within `budget`, otherwise a grid
/// lower bound, which yields no certificate) and then [`theorem1_bound`].
pub fn certify(f: &Integrand, points: &PointSet, psi: &Distortion, budget: u64) -> ErrorBound {
    let discrepancy = star_discrepancy(points, budget)
        .unwrap_or_else(|_| lower_bound_within(points, FALLBACK_GRID));
    theorem1_bound(f, points, psi, discrepancy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrepancy::{star_discrepancy_1d, DEFAULT_WORK_BUDGET};

    fn exact(value: f64, n: usize, dim: usize) -> DiscrepancyResult {
        DiscrepancyResult {
            value,
            mode: DiscrepancyMode::Exact,
            n,
            dim,
        }
    }

    #[test]
    fn modulus_examples() {
        let lin = Integrand::builtin("linear-1d").unwrap();
        assert_eq!(modulus(&lin, 0.05), Some(0.05));
        let bare = Integrand::from_fn(1, |u| u[0]);
        assert_eq!(modulus(&bare, 0.0), Some(0.0));
        assert_eq!(modulus(&bare, 0.1), None);
        let capped = Integrand::from_fn(1, |u| u[0])
            .with_lipschitz(3.0)
            .with_sup_norm(1.0);
        assert_eq!(modulus(&capped, 10.0), Some(2.0));
        let user = Integrand::from_fn(1, |u| u[0].sqrt()).with_modulus(f64::sqrt);
        assert_eq!(modulus(&user, 0.25), Some(0.5));
    }

    #[test]
    fn empirical_modulus_examples() {
        let lin = Integrand::builtin("linear-1d").unwrap();
        let v = empirical_modulus_lower(&lin, 0.1, 1000, 1).unwrap();
        assert!(v > 0.0 && v <= 0.1, "{v}");

        let c = Integrand::from_fn(3, |_| 4.0);
        assert_eq!(empirical_modulus_lower(&c, 0.3, 100, 1).unwrap(), 0.0);

        let ex = Integrand::builtin("paper-example").unwrap();
        let v = empirical_modulus_lower(&ex, 0.01, 10_000, 2).unwrap();
        assert!(
            v > 0.0 && v <= ex.lipschitz_constant().unwrap() * 0.01,
            "{v}"
        );

        assert!(empirical_modulus_lower(&lin, 0.0, 10, 1).is_err());
        assert!(empirical_modulus_lower(&lin, 0.1, 0, 1).is_err());
        let bad = Integrand::from_spec("expr:log(u1 - 0.5)", 1).unwrap();
        assert!(matches!(
            empirical_modulus_lower(&bad, 0.1, 100, 1),
            Err(BoundsError::Evaluation(EvalError::LogDomain(_)))
        ));
    }

    #[test]
    fn finite_derivative_example() {
        let psi = Distortion::avar(0.05).unwrap();
        let (v, branch) = select_bound(5, &psi, 0.01, Some(1.0));
        assert!((v.unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(branch, Branch::FiniteDerivative);

        // the same through theorem1_bound with a constant modulus model
        let f = Integrand::from_fn(5, |u| u[0])
            .with_sup_norm(1.0)
            .with_modulus(|_| 0.01);
        let pts = PointSet::halton(5, 10, 1).unwrap();
        let b = theorem1_bound(&f, &pts, &psi, exact(0.3, 10, 5));
        assert!((b.value.unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(b.constant, 4.0);
    }

    #[test]
    fn one_dimensional_constant() {
        let psi = Distortion::avar(0.05).unwrap();
        let f = Integrand::builtin("linear-1d").unwrap();
        let pts = PointSet::halton(1, 10, 1).unwrap();
        let b = theorem1_bound(&f, &pts, &psi, exact(1e-4, 10, 1));
        assert_eq!(b.constant, 1.0);
        assert_eq!(b.branch, Branch::FiniteDerivative);
        assert!((b.value.unwrap() - 0.002).abs() < 1e-15);
    }

    #[test]
    fn general_branch_example() {
        let psi = Distortion::power(0.5).unwrap();
        let (v, branch) = select_bound(5, &psi, 0.04, Some(1.0));
        assert!((v.unwrap() - 1.2).abs() < 1e-15);
        assert_eq!(branch, Branch::GeneralPsi);

        let (v, branch) = select_bound(5, &psi, 1.0, Some(1.0));
        assert_eq!(v, None);
        assert!(matches!(branch, Branch::NoCertificate(_)));
        let (v, branch) = select_bound(5, &psi, 0.04, None);
        assert_eq!(v, None);
        assert!(matches!(branch, Branch::NoCertificate(_)));
    }

    #[test]
    fn refuses_unsound_inputs() {
        let psi = Distortion::avar(0.1).unwrap();
        let f = Integrand::builtin("linear-1d").unwrap();
        let pts = PointSet::halton(1, 16, 1).unwrap();
        let mut lb = exact(0.05, 16, 1);
        lb.mode = DiscrepancyMode::LowerBound;
        let b = theorem1_bound(&f, &pts, &psi, lb);
        assert!(matches!(b.branch, Branch::NoCertificate(_)));
        assert_eq!(b.value, None);

        let b = theorem1_bound(&f, &pts, &psi, exact(0.05, 15, 1));
        assert!(matches!(b.branch, Branch::NoCertificate(_)));

        let bare = Integrand::from_fn(1, |u| u[0]);
        let b = theorem1_bound(&bare, &pts, &psi, exact(0.05, 16, 1));
        assert!(matches!(b.branch, Branch::NoCertificate(_)));
        assert_eq!(b.rho, None);
    }

    #[test]
    fn finite_derivative_preferred_for_avar() {
        // Whenever both branches are computable, the selection prescribes the
        // finite-derivative bound, which is also the smaller one for AVaR.
        for lambda in [0.01, 0.05, 0.25, 0.5, 1.0] {
            let psi = Distortion::avar(lambda).unwrap();
            for dim in [1, 2, 5] {
                for rho in [1e-6, 1e-3, 0.01, 0.2, 0.9] {
                    for m in [0.0, 1.0, 3.0] {
                        let (v, branch) = select_bound(dim, &psi, rho, Some(m));
                        assert_eq!(branch, Branch::FiniteDerivative);
                        let c = bound_constant(dim);
                        let general = (2.0 * m + c) * psi.eval(rho).unwrap();
                        assert!(v.unwrap() >= 0.0);
                        assert!(v.unwrap() <= general + 1e-12 || rho > lambda);
                    }
                }
            }
        }
    }

    #[test]
    fn certify_uses_exact_or_refuses() {
        let psi = Distortion::avar(0.05).unwrap();
        let f = Integrand::builtin("linear-1d").unwrap();
        let pts = PointSet::halton(1, 64, 1).unwrap();
        let b = certify(&f, &pts, &psi, DEFAULT_WORK_BUDGET);
        assert_eq!(b.discrepancy, star_discrepancy_1d(&pts).unwrap());
        assert_eq!(b.branch, Branch::FiniteDerivative);

        let ex = Integrand::builtin("paper-example").unwrap();
        let pts = PointSet::halton(5, 500, 1).unwrap();
        let b = certify(&ex, &pts, &psi, DEFAULT_WORK_BUDGET);
        assert_eq!(b.discrepancy.mode, DiscrepancyMode::LowerBound);
        assert!(matches!(b.branch, Branch::NoCertificate(_)));

        let wide = Integrand::from_fn(12, |u| u.iter().sum::<f64>() / 12.0).with_lipschitz(1.0);
        let pts = PointSet::halton(12, 300, 1).unwrap();
        let b = certify(&wide, &pts, &psi, DEFAULT_WORK_BUDGET);
        assert_eq!(b.discrepancy.mode, DiscrepancyMode::LowerBound);
        assert!(matches!(b.branch, Branch::NoCertificate(_)));
    }
}
