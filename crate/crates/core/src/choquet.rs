//! Choquet integrals against distortion capacities `c(A) = ψ(P(A))`.
//!
//! For a simple random variable taking values `v_(1) ≤ … ≤ v_(n)` on events
//! of probability `p_(1), …, p_(n)`, comonotone additivity of the Choquet
//! integral gives the telescoping form
//!
//! ```text
//! ∫ X dc = v_(1) + Σ_{i≥2} (v_(i) − v_(i−1)) · ψ(p_(i) + … + p_(n))
//! ```
//!
//! With `p = 1/n` at the values `f(u_i)` of an integrand on a point set this
//! is the quasi-Monte Carlo estimator [`qmc_estimate`]; over pseudo-random
//! points it is the Monte Carlo comparator [`mc_estimate`].
//!
//! Two independent routes serve as oracles:
//! [`choquet_by_survival`] integrates `ψ(P(X > x))` directly, and
//! [`avar_dual`] evaluates the average value-at-risk as
//! `min_y { E(X − y)_+ + λy } / λ`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::distortion::Distortion;
use crate::expr::EvalError;
use crate::integrand::Integrand;
use crate::pointset::{PointSet, PointSetError};

/// Allowed deviation of a distribution's total mass from 1.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Default node count per segment for [`choquet_by_survival`].
pub const DEFAULT_SURVIVAL_NODES: usize = 100_000;

#[derive(Debug, Error)]
pub enum ChoquetError {
    #[error("point set has dimension {points} but the integrand expects {integrand}")]
    DimensionMismatch { points: usize, integrand: usize },
    #[error("integrand failed at point {index}: {source}")]
    Evaluation { index: usize, source: EvalError },
    #[error("integrand returned NaN at point {index}")]
    NotANumber { index: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    PointSet(#[from] PointSetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Qmc,
    Mc { seed: u64 },
    DiscreteExact,
    SurvivalQuadrature,
    AVaRDual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChoquetEstimate {
    pub value: f64,
    pub n: usize,
    pub method: Method,
    /// Smallest sampled value.
    pub min_value: f64,
    /// Largest sampled value.
    pub max_value: f64,
}

/// `f(u_i)` for every point, in point order. Evaluation runs in parallel;
/// the result does not depend on scheduling.
pub fn evaluate(f: &Integrand, points: &PointSet) -> Result<Vec<f64>, ChoquetError> {
    if points.dim() != f.dim() {
        return Err(ChoquetError::DimensionMismatch {
            points: points.dim(),
            integrand: f.dim(),
        });
    }
    let results: Vec<Result<f64, ChoquetError>> = (0..points.len())
        .into_par_iter()
        .map(|index| {
            let v = f
                .eval(points.point(index))
                .map_err(|source| ChoquetError::Evaluation { index, source })?;
            if v.is_nan() {
                return Err(ChoquetError::NotANumber { index });
            }
            Ok(v)
        })
        .collect();
    // Sequential pass so the reported failure is the lowest index.
    results.into_iter().collect()
}

/// The equal-weight estimator over already computed values.
pub fn estimate_from_values(
    values: &[f64],
    psi: &Distortion,
    method: Method,
) -> Result<ChoquetEstimate, ChoquetError> {
    if values.is_empty() {
        return Err(ChoquetError::Domain(
            "at least one value is required".into(),
        ));
    }
    if let Some(index) = values.iter().position(|v| v.is_nan()) {
        return Err(ChoquetError::NotANumber { index });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let value = telescope(&sorted, |j| psi.eval_unchecked((n - j) as f64 / n as f64));
    Ok(ChoquetEstimate {
        value,
        n,
        method,
        min_value: sorted[0],
        max_value: sorted[n - 1],
    })
}

/// `s_0 + Σ_{j≥1} (s_j − s_{j−1}) · weight(j)` over ascending `sorted`,
/// where `weight(j)` is the distorted probability of the upper tail
/// starting at `j`. Clamped to `[s_0, s_{n−1}]`, which holds exactly since
/// the weights lie in `[0, 1]`.
fn telescope(sorted: &[f64], weight: impl Fn(usize) -> f64) -> f64 {
    let mut acc = sorted[0];
    for j in 1..sorted.len() {
        let step = sorted[j] - sorted[j - 1];
        if step != 0.0 {
            acc += step * weight(j);
        }
    }
    acc.clamp(sorted[0], sorted[sorted.len() - 1])
}

/// Quasi-Monte Carlo estimate of `∫ f(U) dc_ψ` over `points`.
pub fn qmc_estimate(
    f: &Integrand,
    points: &PointSet,
    psi: &Distortion,
) -> Result<ChoquetEstimate, ChoquetError> {
    let values = evaluate(f, points)?;
    estimate_from_values(&values, psi, Method::Qmc)
}

/// The same estimator over `n` seeded pseudo-random points.
pub fn mc_estimate(
    f: &Integrand,
    dim: usize,
    n: usize,
    seed: u64,
    psi: &Distortion,
) -> Result<ChoquetEstimate, ChoquetError> {
    let points = PointSet::pseudo_random(dim, n, seed)?;
    let values = evaluate(f, &points)?;
    estimate_from_values(&values, psi, Method::Mc { seed })
}

/// Finitely many `(value, probability)` atoms with positive probabilities
/// summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<(f64, f64)>,
    uniform: bool,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, ChoquetError> {
        let invalid = |m: String| Err(ChoquetError::InvalidDistribution(m));
        if atoms.is_empty() {
            return invalid("no atoms".into());
        }
        if let Some((v, p)) = atoms
            .iter()
            .find(|(v, p)| !v.is_finite() || !p.is_finite() || *p <= 0.0)
        {
            return invalid(format!("bad atom ({v}, {p})"));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return invalid(format!("probabilities sum to {total}"));
        }
        let uniform = atoms.iter().all(|a| a.1 == atoms[0].1);
        Ok(DiscreteDistribution { atoms, uniform })
    }

    /// Each value with probability `1/n`.
    pub fn uniform(values: &[f64]) -> Result<Self, ChoquetError> {
        let p = 1.0 / values.len() as f64;
        Self::new(values.iter().map(|&v| (v, p)).collect())
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(v, p)| v * p).sum()
    }

    /// `P(X > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        let s: f64 = self.atoms.iter().filter(|a| a.0 > x).map(|a| a.1).sum();
        s.min(1.0)
    }
}

/// Exact Choquet integral of a discrete random variable.
///
/// Equal weights take the same path as [`qmc_estimate`], with tail
/// probabilities `(n − i + 1)/n`; otherwise tails are suffix sums of the
/// sorted probabilities.
pub fn choquet_discrete(
    dist: &DiscreteDistribution,
    psi: &Distortion,
) -> Result<ChoquetEstimate, ChoquetError> {
    if dist.uniform {
        let values: Vec<f64> = dist.atoms.iter().map(|a| a.0).collect();
        return estimate_from_values(&values, psi, Method::DiscreteExact);
    }
    let mut atoms = dist.atoms.clone();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = atoms.len();
    let mut tails = vec![0.0; n];
    let mut acc = 0.0;
    for j in (0..n).rev() {
        acc += atoms[j].1;
        tails[j] = acc.min(1.0);
    }
    let sorted: Vec<f64> = atoms.iter().map(|a| a.0).collect();
    let value = telescope(&sorted, |j| psi.eval_unchecked(tails[j]));
    Ok(ChoquetEstimate {
        value,
        n,
        method: Method::DiscreteExact,
        min_value: sorted[0],
        max_value: sorted[n - 1],
    })
}

/// Choquet integral by direct quadrature of the layer-cake formula
///
/// ```text
/// ∫_0^∞ ψ(S(x)) dx + ∫_{−∞}^0 (ψ(S(x)) − 1) dx,   S(x) = P(X > x),
/// ```
///
/// using the composite midpoint rule with `n_nodes` nodes on each of the
/// negative and positive parts of `[lo, hi]`. `[lo, hi]` must contain the
/// support; outside it `S` is 1 (below) or 0 (above), and those stretches
/// between the range and 0 are added in closed form.
pub fn choquet_by_survival(
    survival: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    psi: &Distortion,
    n_nodes: usize,
) -> Result<f64, ChoquetError> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(ChoquetError::Domain(format!("invalid range [{lo}, {hi}]")));
    }
    if n_nodes < 2 {
        return Err(ChoquetError::Domain(format!(
            "need at least 2 nodes, got {n_nodes}"
        )));
    }
    let distorted = |x: f64| -> Result<f64, ChoquetError> {
        let s = survival(x);
        if !(0.0..=1.0).contains(&s) {
            return Err(ChoquetError::Domain(format!(
                "survival({x}) = {s} outside [0, 1]"
            )));
        }
        Ok(psi.eval_unchecked(s))
    };
    let midpoint = |a: f64, b: f64, shift: f64| -> Result<f64, ChoquetError> {
        let h = (b - a) / n_nodes as f64;
        let mut sum = 0.0;
        for k in 0..n_nodes {
            sum += distorted(a + (k as f64 + 0.5) * h)? - shift;
        }
        Ok(sum * h)
    };

    let mut total = 0.0;
    if lo < 0.0 {
        total += midpoint(lo, hi.min(0.0), 1.0)?;
    }
    if hi > 0.0 {
        total += midpoint(lo.max(0.0), hi, 0.0)?;
    }
    // S ≡ 1 on [0, lo) and S ≡ 0 on [hi, 0).
    if lo > 0.0 {
        total += lo;
    }
    if hi < 0.0 {
        total += hi;
    }
    Ok(total)
}

/// Average value-at-risk at level `λ` through its dual form
/// `min_y { E(X − y)_+ + λy } / λ`.
///
/// The minimum is attained at the upper quantile
/// `inf{x : P(X > x) ≤ λ}`, an atom, so scanning the atom values is exact.
pub fn avar_dual(dist: &DiscreteDistribution, lambda: f64) -> Result<f64, ChoquetError> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(ChoquetError::Domain(format!(
            "level must lie in (0, 1], got {lambda}"
        )));
    }
    let objective = |y: f64| {
        let excess: f64 = dist.atoms.iter().map(|(v, p)| p * (v - y).max(0.0)).sum();
        (excess + lambda * y) / lambda
    };
    Ok(dist
        .atoms
        .iter()
        .map(|a| objective(a.0))
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn explicit_values(values: &[f64]) -> (Integrand, PointSet) {
        // f(u) = value of the point whose coordinate is u, via a lookup
        let n = values.len();
        let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64]).collect();
        let table = values.to_vec();
        let f = Integrand::from_fn(1, move |u| table[(u[0] * n as f64).round() as usize]);
        (f, PointSet::explicit(1, pts).unwrap())
    }

    #[test]
    fn constant_integrand() {
        let f = Integrand::from_fn(2, |_| 3.25);
        let pts = PointSet::halton(2, 37, 1).unwrap();
        for psi in [
            Distortion::avar(0.1).unwrap(),
            Distortion::power(0.3).unwrap(),
        ] {
            assert_eq!(qmc_estimate(&f, &pts, &psi).unwrap().value, 3.25);
        }
    }

    #[test]
    fn identity_gives_mean() {
        let pts = PointSet::halton(1, 1000, 1).unwrap();
        let f = Integrand::from_fn(1, |u| (7.0 * u[0]).sin());
        let est = qmc_estimate(&f, &pts, &Distortion::identity()).unwrap();
        let mean = pts.iter().map(|u| (7.0 * u[0]).sin()).sum::<f64>() / 1000.0;
        assert!((est.value - mean).abs() < 1e-12);
        assert_eq!(est.method, Method::Qmc);
    }

    #[test]
    fn three_value_examples() {
        let (f, pts) = explicit_values(&[0.5, 0.2, 0.9]);
        let third = qmc_estimate(&f, &pts, &Distortion::avar(1.0 / 3.0).unwrap()).unwrap();
        assert!((third.value - 0.9).abs() < 1e-15);
        assert_eq!((third.min_value, third.max_value), (0.2, 0.9));
        let two_thirds = qmc_estimate(&f, &pts, &Distortion::avar(2.0 / 3.0).unwrap()).unwrap();
        assert!((two_thirds.value - 0.7).abs() < 1e-15);
    }

    #[test]
    fn negative_values_need_no_special_casing() {
        let (f, pts) = explicit_values(&[-3.0, -1.0, -2.0, -4.0]);
        let est = qmc_estimate(&f, &pts, &Distortion::avar(0.5).unwrap()).unwrap();
        assert!((est.value - -1.5).abs() < 1e-15);
    }

    #[test]
    fn estimator_errors() {
        let pts = PointSet::halton(1, 4, 1).unwrap();
        let nan = Integrand::from_fn(1, |u| if u[0] > 0.6 { f64::NAN } else { u[0] });
        match qmc_estimate(&nan, &pts, &Distortion::identity()) {
            Err(ChoquetError::NotANumber { index }) => assert_eq!(index, 2),
            other => panic!("{other:?}"),
        }
        let log = Integrand::from_spec("expr:log(u1 - 0.3)", 1).unwrap();
        match qmc_estimate(&log, &pts, &Distortion::identity()) {
            Err(ChoquetError::Evaluation { index, source }) => {
                assert_eq!(index, 1);
                assert!(matches!(source, EvalError::LogDomain(_)));
            }
            other => panic!("{other:?}"),
        }
        let two_d = Integrand::from_fn(2, |u| u[0]);
        assert!(matches!(
            qmc_estimate(&two_d, &pts, &Distortion::identity()),
            Err(ChoquetError::DimensionMismatch {
                points: 1,
                integrand: 2
            })
        ));
    }

    #[test]
    fn mc_examples() {
        let f = Integrand::builtin("linear-1d").unwrap();
        let psi = Distortion::identity();
        let a = mc_estimate(&f, 1, 100_000, 17, &psi).unwrap();
        let b = mc_estimate(&f, 1, 100_000, 17, &psi).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.method, Method::Mc { seed: 17 });
        assert!((a.value - 0.5).abs() < 0.01);

        let c = Integrand::from_fn(3, |_| -2.0);
        let est = mc_estimate(&c, 3, 50, 1, &Distortion::avar(0.05).unwrap()).unwrap();
        assert_eq!(est.value, -2.0);
    }

    #[test]
    fn discrete_examples() {
        let one = DiscreteDistribution::new(vec![(1.0, 1.0)]).unwrap();
        assert_eq!(
            choquet_discrete(&one, &Distortion::avar(0.3).unwrap())
                .unwrap()
                .value,
            1.0
        );

        let coin = DiscreteDistribution::new(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap();
        assert_eq!(
            choquet_discrete(&coin, &Distortion::identity())
                .unwrap()
                .value,
            0.5
        );
        assert_eq!(
            choquet_discrete(&coin, &Distortion::avar(0.5).unwrap())
                .unwrap()
                .value,
            1.0
        );
        assert_eq!(avar_dual(&coin, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn discrete_unequal_weights() {
        // P(X=0)=0.7, P(X=1)=0.2, P(X=3)=0.1; AVaR(0.25): 0.1·3 + 0.15·1 = 0.45 → 1.8
        let d = DiscreteDistribution::new(vec![(3.0, 0.1), (0.0, 0.7), (1.0, 0.2)]).unwrap();
        let est = choquet_discrete(&d, &Distortion::avar(0.25).unwrap()).unwrap();
        assert!((est.value - 1.8).abs() < 1e-12);
        assert!((avar_dual(&d, 0.25).unwrap() - 1.8).abs() < 1e-12);
        let mean = choquet_discrete(&d, &Distortion::identity()).unwrap().value;
        assert!((mean - d.mean()).abs() < 1e-15);
    }

    #[test]
    fn equal_weights_reproduce_the_estimator() {
        let values = [0.4, -1.25, 3.5, 0.4, 2.0, 0.1, 7.0];
        let (f, pts) = explicit_values(&values);
        let dist = DiscreteDistribution::uniform(&values).unwrap();
        for psi in ["avar:0.3", "power:0.4", "identity", "pwl:0.2,0.6;0.6,0.95"] {
            let psi: Distortion = psi.parse().unwrap();
            assert_eq!(
                choquet_discrete(&dist, &psi).unwrap().value,
                qmc_estimate(&f, &pts, &psi).unwrap().value
            );
        }
    }

    #[test]
    fn invalid_distributions() {
        assert!(DiscreteDistribution::new(vec![]).is_err());
        assert!(DiscreteDistribution::new(vec![(1.0, 0.5)]).is_err());
        assert!(DiscreteDistribution::new(vec![(1.0, 1.5), (2.0, -0.5)]).is_err());
        assert!(DiscreteDistribution::new(vec![(f64::NAN, 1.0)]).is_err());
        assert!(DiscreteDistribution::new(vec![(1.0, 0.5), (2.0, 0.5 + 1e-10)]).is_err());
        assert!(DiscreteDistribution::new(vec![(1.0, 0.5), (2.0, 0.5 + 1e-14)]).is_ok());
    }

    #[test]
    fn avar_dual_examples() {
        let d = DiscreteDistribution::uniform(&[0.2, 0.5, 0.9]).unwrap();
        assert!((avar_dual(&d, 1.0 / 3.0).unwrap() - 0.9).abs() < 1e-15);
        assert!((avar_dual(&d, 1.0).unwrap() - 1.6 / 3.0).abs() < 1e-15);
        assert!(avar_dual(&d, 0.0).is_err());
        assert!(avar_dual(&d, 1.1).is_err());
    }

    #[test]
    fn survival_quadrature_examples() {
        let lambda = 0.05;
        let psi = Distortion::avar(lambda).unwrap();
        let v = choquet_by_survival(|x| 1.0 - x, 0.0, 1.0, &psi, 1_000_000).unwrap();
        assert!((v - 0.975).abs() < 1e-6, "{v}");

        let v =
            choquet_by_survival(|x| 1.0 - x, 0.0, 1.0, &Distortion::identity(), 10_000).unwrap();
        assert!((v - 0.5).abs() < 1e-9);

        let c = 0.7;
        let step = |x: f64| if x < c { 1.0 } else { 0.0 };
        let v = choquet_by_survival(step, 0.0, 2.0 * c, &psi, DEFAULT_SURVIVAL_NODES).unwrap();
        assert!((v - c).abs() < 1e-4);
        let v = choquet_by_survival(step, 0.5, 1.0, &psi, DEFAULT_SURVIVAL_NODES).unwrap();
        assert!((v - c).abs() < 1e-4);
    }

    #[test]
    fn survival_quadrature_negative_support() {
        // X uniform on [-2, -1]: mean -1.5; AVaR(0.5) is the mean of the top half, -1.25.
        let s = |x: f64| (-1.0 - x).clamp(0.0, 1.0);
        let v = choquet_by_survival(s, -2.0, -1.0, &Distortion::identity(), 10_000).unwrap();
        assert!((v + 1.5).abs() < 1e-9);
        let v =
            choquet_by_survival(s, -2.0, -1.0, &Distortion::avar(0.5).unwrap(), 10_000).unwrap();
        assert!((v + 1.25).abs() < 1e-9);
        // straddling zero: uniform on [-1, 1]
        let s = |x: f64| ((1.0 - x) / 2.0).clamp(0.0, 1.0);
        let v = choquet_by_survival(s, -1.0, 1.0, &Distortion::avar(0.5).unwrap(), 10_000).unwrap();
        assert!((v - 0.5).abs() < 1e-9);
    }

    #[test]
    fn survival_quadrature_errors() {
        let psi = Distortion::identity();
        assert!(choquet_by_survival(|_| 1.5, 0.0, 1.0, &psi, 10).is_err());
        assert!(choquet_by_survival(|_| 0.5, 1.0, 0.0, &psi, 10).is_err());
        assert!(choquet_by_survival(|_| 0.5, 0.0, 1.0, &psi, 1).is_err());
    }
}
