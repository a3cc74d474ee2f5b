//! Quasi-Monte Carlo estimation of Choquet integrals `∫ f(U) dc_ψ` for
//! distortion capacities `c_ψ(A) = ψ(P(A))`, with discrepancy-based error
//! certificates and independent oracles.
//!
//! ```
//! use choquet_qmc::{qmc_estimate, Distortion, Integrand, PointSet};
//!
//! let f = Integrand::builtin("linear-1d").unwrap();
//! let points = PointSet::halton(1, 4096, 1).unwrap();
//! let psi = Distortion::avar(0.05).unwrap();
//! let est = qmc_estimate(&f, &points, &psi).unwrap();
//! assert!((est.value - 0.975).abs() < 1e-3);
//! ```

pub mod bounds;
pub mod choquet;
pub mod compare;
pub mod discrepancy;
pub mod distortion;
pub mod expr;
mod format;
pub mod integrand;
pub mod pointset;

pub use bounds::{certify, modulus, theorem1_bound, Branch, ErrorBound};
pub use choquet::{
    avar_dual, choquet_by_survival, choquet_discrete, mc_estimate, qmc_estimate, ChoquetError,
    ChoquetEstimate, DiscreteDistribution, Method,
};
pub use compare::{compare_sweep, CompareRow, Sweep};
pub use discrepancy::{
    star_discrepancy, star_discrepancy_1d, star_discrepancy_exact, star_discrepancy_lower_bound,
    DiscrepancyMode, DiscrepancyResult,
};
pub use distortion::{Distortion, ExtendedReal};
pub use expr::{parse_expression, Expr};
pub use format::format_f64;
pub use integrand::Integrand;
pub use pointset::{radical_inverse, PointSet, Provenance};
