//! Taxation and market-clearing analysis for input-output economies.
//!
//! Every numerical routine is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the bottom fix the common choices.

// `!(x > 0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod clearing;
pub mod equilibrium;
pub mod error;
pub mod linalg;
pub mod matcheck;
pub mod model;
pub mod report;
pub mod scalar;
pub mod taxation;

pub use clearing::{
    alpha_from_solution, equilibrium_from_solution, min_excess_equilibrium, min_excess_solution, ray_bounds,
    scale_function, solution_from_alpha, verify_partial_clearing, ClearingConfig, ClearingEquilibrium,
    ClearingProblem, ExcessAnalysis, MinExcessSolution, PartialClearingVerdict, QpConfig, SimplexPoint,
    SolutionFamily, SupportChoice,
};
pub use equilibrium::{
    clearing_rows, fixed_point_residual, markup_condition, solve_price_balance, verify_clearing, ClearingReportRow,
    ClearingStatus, MarkupCheck, Normalization, PriceVector, SolveDiagnostics, SolveMethod, SolverConfig,
};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use matcheck::{analyze_matrix, cone_membership, is_irreducible, spectral_radius, ConeMembership, MatrixProfile};
pub use model::{load_economy, DemandRegime, EconomyModel, RegimeIssue, ScenarioDocument};
pub use scalar::Scalar;
pub use taxation::{
    check_tax_sustainable, classify_industries, perfect_tax, subsidy_requirements, sustainable_tax,
    tax_from_value_shares, value_accounts, value_accounts_at, value_balance_check, IndustryClassification, NotSustainableReason,
    Sustainability, TaxProvenance, TaxVector, ValueAccounts,
};

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type EconomyModel64 = EconomyModel<f64>;
pub type EconomyModel32 = EconomyModel<f32>;
pub type PriceVector64 = PriceVector<f64>;
pub type PriceVector32 = PriceVector<f32>;
pub type TaxVector64 = TaxVector<f64>;
pub type TaxVector32 = TaxVector<f32>;
pub type ClearingProblem64 = ClearingProblem<f64>;
pub type ClearingProblem32 = ClearingProblem<f32>;
pub type ClearingEquilibrium64 = ClearingEquilibrium<f64>;
pub type ClearingEquilibrium32 = ClearingEquilibrium<f32>;
