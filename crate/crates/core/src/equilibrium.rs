//! Equilibrium prices for the cost-share demand system.
//!
//! Given a nonnegative cost matrix `A` and an activity vector `z`, the price
//! vector `p` is a fixed point of `p ↦ Vᵀp` where `V = A·diag(y)` and
//! `y_k = z_k / (Az)_k`. Any nonnegative eigenvector of `Vᵀ` has eigenvalue
//! exactly one, so the solver returns the Perron vector together with the
//! observed `|λ − 1|` as a diagnostic.

use crate::error::{Error, Result};
use crate::linalg::{lstsq, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Normalization {
    #[default]
    SumToOne,
    FirstToOne,
    /// Caller-supplied prices kept exactly as given.
    AsGiven,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    DampedIteration,
    NullSpace,
}

#[derive(Clone, Debug)]
pub struct SolverConfig<T> {
    /// Bound on `‖Vᵀp − p‖∞` for a `p` on the unit simplex.
    pub tol: T,
    pub max_iter: usize,
    /// Weight `θ` of the new iterate in `p ← (1−θ)p + θ·Vᵀp/‖Vᵀp‖₁`.
    pub damping: T,
    pub normalization: Normalization,
    /// Fail unless every price is strictly positive. Only meaningful for an
    /// irreducible matrix and a strictly positive `z`.
    pub require_positive: bool,
    /// Starting point; uniform when absent.
    pub start: Option<Vec<T>>,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::attainable(1e-14, 256.0),
            max_iter: 100_000,
            damping: T::lit(0.5),
            normalization: Normalization::SumToOne,
            require_positive: false,
            start: None,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn strict() -> Self {
        Self { require_positive: true, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveDiagnostics<T> {
    /// `‖Vᵀp‖₁` at the returned point (with `‖p‖₁ = 1`).
    pub lambda: T,
    /// `‖Vᵀp − p‖∞` at the returned point (with `‖p‖₁ = 1`).
    pub residual: T,
    pub iterations: usize,
    pub method: SolveMethod,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriceVector<T> {
    p: Vec<T>,
    normalization: Normalization,
    diagnostics: Option<SolveDiagnostics<T>>,
}

impl<T: Scalar> PriceVector<T> {
    /// Wraps caller-supplied prices. They must be finite, nonnegative and not all zero.
    pub fn from_values(p: Vec<T>) -> Result<Self> {
        if p.iter().any(|&v| !v.is_finite() || v < T::zero()) {
            return Err(Error::Domain("prices must be finite and nonnegative".into()));
        }
        if p.iter().all(|&v| v == T::zero()) {
            return Err(Error::Domain("price vector is zero".into()));
        }
        Ok(Self { p, normalization: Normalization::AsGiven, diagnostics: None })
    }

    pub(crate) fn from_parts(p: Vec<T>, normalization: Normalization, diagnostics: Option<SolveDiagnostics<T>>) -> Self {
        Self { p, normalization, diagnostics }
    }

    pub fn values(&self) -> &[T] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn diagnostics(&self) -> Option<&SolveDiagnostics<T>> {
        self.diagnostics.as_ref()
    }

    /// `|λ − 1|` of the solve; zero for caller-supplied prices.
    pub fn lambda_residual(&self) -> T {
        self.diagnostics.as_ref().map_or(T::zero(), |d| (d.lambda - T::one()).abs())
    }

    /// Copy rescaled to the requested normalization.
    pub fn normalized(&self, normalization: Normalization) -> Result<Self> {
        let p = normalize(&self.p, normalization)?;
        Ok(Self { p, normalization, diagnostics: self.diagnostics.clone() })
    }
}

fn normalize<T: Scalar>(p: &[T], normalization: Normalization) -> Result<Vec<T>> {
    let scale = match normalization {
        Normalization::SumToOne => p.iter().copied().sum::<T>(),
        Normalization::FirstToOne => p.first().copied().unwrap_or_else(T::zero),
        Normalization::AsGiven => return Ok(p.to_vec()),
    };
    if !(scale > T::zero()) {
        return Err(Error::DegenerateInput(format!("cannot normalize prices {normalization:?}: scale is zero")));
    }
    Ok(p.iter().map(|&v| v / scale).collect())
}

/// `y_k = z_k / (Az)_k`, with `y_k = 0` where both vanish.
fn output_ratios<T: Scalar>(a: &Matrix<T>, z: &[T]) -> Result<Vec<T>> {
    let az = a.mul_vec(z);
    az.iter()
        .zip(z)
        .enumerate()
        .map(|(k, (&azk, &zk))| {
            if azk > T::zero() {
                Ok(zk / azk)
            } else if zk == T::zero() {
                Ok(T::zero())
            } else {
                Err(Error::DegenerateInput(format!("(Az)_{} = 0 while z_{} > 0", k + 1, k + 1)))
            }
        })
        .collect()
}

/// `Vᵀp = y ∘ (Aᵀp)`
fn apply_vt<T: Scalar>(a: &Matrix<T>, y: &[T], p: &[T]) -> Vec<T> {
    a.tr_mul_vec(p).into_iter().zip(y).map(|(s, &yk)| s * yk).collect()
}

fn simplex_residual<T: Scalar>(a: &Matrix<T>, y: &[T], p: &[T]) -> (T, T) {
    let q = apply_vt(a, y, p);
    let lambda = q.iter().copied().sum();
    let res = q.iter().zip(p).fold(T::zero(), |m, (&qk, &pk)| m.max((qk - pk).abs()));
    (lambda, res)
}

/// Solves `y_k (Aᵀp)_k = p_k` for `p ≥ 0`, `p ≠ 0`.
///
/// Runs the damped normalized iteration first and falls back to the
/// least-squares null vector of `Vᵀ − E` (with a normalization row) when the
/// iteration cap is hit.
pub fn solve_price_balance<T: Scalar>(a: &Matrix<T>, z: &[T], cfg: &SolverConfig<T>) -> Result<PriceVector<T>> {
    let n = a.rows();
    if !a.is_square() || z.len() != n {
        return Err(Error::Dimension(format!("A is {}x{}, z has length {}", a.rows(), a.cols(), z.len())));
    }
    if a.min_entry().is_some_and(|m| m < T::zero()) || a.is_zero() {
        return Err(Error::DegenerateInput("cost matrix must be nonnegative and nonzero".into()));
    }
    if z.iter().any(|&v| !(v >= T::zero())) || z.iter().all(|&v| v == T::zero()) {
        return Err(Error::DegenerateInput("activity vector must be nonnegative and nonzero".into()));
    }
    if !(cfg.damping > T::zero() && cfg.damping <= T::one()) {
        return Err(Error::Domain(format!("damping {} outside (0, 1]", cfg.damping)));
    }
    let y = output_ratios(a, z)?;

    let mut p = match &cfg.start {
        Some(s) if s.len() == n && s.iter().all(|&v| v >= T::zero()) => normalize(s, Normalization::SumToOne)?,
        Some(_) => return Err(Error::Domain("invalid starting prices".into())),
        None => vec![T::one() / T::from_usize_lossy(n); n],
    };

    let theta = cfg.damping;
    let mut converged = None;
    for it in 0..cfg.max_iter {
        let q = apply_vt(a, &y, &p);
        let s: T = q.iter().copied().sum();
        if !(s > T::zero()) {
            return Err(Error::DegenerateInput("Vᵀp vanished; prices cannot be propagated".into()));
        }
        let res = q.iter().zip(&p).fold(T::zero(), |m, (&qk, &pk)| m.max((qk - pk).abs()));
        if res <= cfg.tol {
            converged = Some(SolveDiagnostics { lambda: s, residual: res, iterations: it, method: SolveMethod::DampedIteration });
            break;
        }
        for (pk, qk) in p.iter_mut().zip(q) {
            *pk = (T::one() - theta) * *pk + theta * qk / s;
        }
    }

    let diagnostics = match converged {
        Some(d) => d,
        None => {
            let (fallback, d) = null_vector(a, &y, cfg)?;
            p = fallback;
            d
        }
    };

    if cfg.require_positive {
        if let Some(k) = p.iter().position(|&v| !(v > T::zero())) {
            return Err(Error::DegenerateInput(format!("price of industry {} is not strictly positive", k + 1)));
        }
    }
    let p = normalize(&p, cfg.normalization)?;
    Ok(PriceVector { p, normalization: cfg.normalization, diagnostics: Some(diagnostics) })
}

fn null_vector<T: Scalar>(a: &Matrix<T>, y: &[T], cfg: &SolverConfig<T>) -> Result<(Vec<T>, SolveDiagnostics<T>)> {
    let n = a.rows();
    let m = Matrix::from_fn(n + 1, n, |k, s| {
        if k == n {
            T::one()
        } else {
            let e = if k == s { T::one() } else { T::zero() };
            y[k] * a[(s, k)] - e
        }
    });
    let mut rhs = vec![T::zero(); n + 1];
    rhs[n] = T::one();
    let p = lstsq(&m, &rhs);
    let fail = || Error::Convergence { what: "price balance fixed point", iterations: cfg.max_iter };
    if p.iter().any(|&v| v < -cfg.tol || !v.is_finite()) {
        return Err(fail());
    }
    let p = normalize(&p.into_iter().map(|v| v.max(T::zero())).collect::<Vec<_>>(), Normalization::SumToOne)
        .map_err(|_| fail())?;
    let (lambda, residual) = simplex_residual(a, y, &p);
    if residual > cfg.tol {
        return Err(fail());
    }
    Ok((p, SolveDiagnostics { lambda, residual, iterations: cfg.max_iter, method: SolveMethod::NullSpace }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClearingStatus {
    Cleared,
    Excess,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClearingReportRow<T> {
    pub industry: usize,
    /// `Σ_i a_ki b_i p_i / (Aᵀp)_i`
    pub demand_side: T,
    /// `b_k = (1 − π_k) x_k`
    pub supply_side: T,
    pub status: ClearingStatus,
}

/// Demand `Σ_i a_ki b_i p_i / (Aᵀp)_i` for every industry; terms with
/// `b_i p_i = 0` contribute nothing.
pub fn cost_share_demand<T: Scalar>(a: &Matrix<T>, supply: &[T], p: &[T]) -> Result<Vec<T>> {
    let n = a.rows();
    if !a.is_square() || supply.len() != n || p.len() != n {
        return Err(Error::Dimension("matrix, supply and prices must agree in size".into()));
    }
    let cost = a.tr_mul_vec(p);
    let mut shares = vec![T::zero(); n];
    for i in 0..n {
        let num = supply[i] * p[i];
        if num == T::zero() {
            continue;
        }
        if !(cost[i] > T::zero()) {
            return Err(Error::DegenerateInput(format!("zero unit cost (Aᵀp)_{} with positive revenue", i + 1)));
        }
        shares[i] = num / cost[i];
    }
    Ok(a.mul_vec(&shares))
}

/// Compares both sides of the market balance for a given supply vector.
/// A row is `Cleared` when the sides agree within `tol·max(1, supply)` and
/// `Excess` when demand falls short by more than that. Demand exceeding
/// supply means `p` is not an equilibrium.
pub fn clearing_rows<T: Scalar>(a: &Matrix<T>, supply: &[T], p: &PriceVector<T>, tol: T) -> Result<Vec<ClearingReportRow<T>>> {
    let demand = cost_share_demand(a, supply, p.values())?;
    demand
        .into_iter()
        .zip(supply)
        .enumerate()
        .map(|(k, (d, &s))| {
            let band = tol * s.max(T::one());
            if d > s + band {
                return Err(Error::NotEquilibrium { industry: k + 1, demand: d.to_f64_lossy(), supply: s.to_f64_lossy() });
            }
            let status = if (d - s).abs() <= band { ClearingStatus::Cleared } else { ClearingStatus::Excess };
            Ok(ClearingReportRow { industry: k, demand_side: d, supply_side: s, status })
        })
        .collect()
}

/// Market balance under tax rates `pi`: supply is `(1 − π) ∘ x`.
pub fn verify_clearing<T: Scalar>(a: &Matrix<T>, x: &[T], pi: &[T], p: &PriceVector<T>, tol: T) -> Result<Vec<ClearingReportRow<T>>> {
    if x.len() != pi.len() {
        return Err(Error::Dimension("x and π differ in length".into()));
    }
    let supply: Vec<T> = x.iter().zip(pi).map(|(&xk, &pk)| (T::one() - pk) * xk).collect();
    clearing_rows(a, &supply, p, tol)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarkupCheck<T> {
    pub holds: bool,
    /// `p_k − (Aᵀp)_k`
    pub margins: Vec<T>,
}

pub fn markup_condition<T: Scalar>(a: &Matrix<T>, p: &PriceVector<T>, tol: T) -> MarkupCheck<T> {
    let cost = a.tr_mul_vec(p.values());
    let margins: Vec<T> = p.values().iter().zip(cost).map(|(&pk, ck)| pk - ck).collect();
    let holds = margins.iter().all(|&m| m > tol);
    MarkupCheck { holds, margins }
}

/// `‖y ∘ (Aᵀp) − p‖∞` for prices rescaled to the unit simplex.
pub fn fixed_point_residual<T: Scalar>(a: &Matrix<T>, z: &[T], p: &[T]) -> Result<T> {
    let y = output_ratios(a, z)?;
    let p = normalize(p, Normalization::SumToOne)?;
    Ok(simplex_residual(a, &y, &p).1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn anti() -> Matrix<f64> {
        Matrix::from_rows(&[[0.0, 0.5], [0.5, 0.0]]).unwrap()
    }

    fn e2() -> Matrix<f64> {
        Matrix::from_rows(&[[0.2, 0.3], [0.4, 0.1]]).unwrap()
    }

    #[test]
    fn symmetric_prices_on_anti_diagonal() {
        let p = solve_price_balance(&anti(), &[2.0, 2.0], &SolverConfig::strict()).unwrap();
        assert_abs_diff_eq!(p.values()[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.values()[1], 0.5, epsilon = 1e-12);
        assert!(p.lambda_residual() <= 1e-12);
    }

    #[test]
    fn e2_prices() {
        let p = solve_price_balance(&e2(), &[10.0, 10.0], &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(p.values()[0], 4.0 / 7.0, epsilon = 1e-11);
        assert_abs_diff_eq!(p.values()[1], 3.0 / 7.0, epsilon = 1e-11);
    }

    #[test]
    fn asymmetric_activity() {
        let p = solve_price_balance(&anti(), &[4.0, 2.0], &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(p.values()[0], 2.0 / 3.0, epsilon = 1e-11);
        assert_abs_diff_eq!(p.values()[1], 1.0 / 3.0, epsilon = 1e-11);
    }

    #[test]
    fn first_to_one_normalization() {
        let cfg = SolverConfig { normalization: Normalization::FirstToOne, ..SolverConfig::default() };
        let p = solve_price_balance(&anti(), &[4.0, 2.0], &cfg).unwrap();
        assert_abs_diff_eq!(p.values()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.values()[1], 0.5, epsilon = 1e-11);
    }

    #[test]
    fn fallback_finds_null_vector() {
        let cfg = SolverConfig { max_iter: 1, ..SolverConfig::default() };
        let p = solve_price_balance(&e2(), &[10.0, 10.0], &cfg).unwrap();
        assert_eq!(p.diagnostics().unwrap().method, SolveMethod::NullSpace);
        assert_abs_diff_eq!(p.values()[0], 4.0 / 7.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_activity() {
        // Column 2 of A is zero, so (Az)_1 = 0 while z_1 > 0 when z = [1, 0].
        let a = Matrix::from_rows(&[[0.0, 0.0], [0.5, 0.0]]).unwrap();
        assert!(matches!(
            solve_price_balance(&a, &[1.0, 0.0], &SolverConfig::default()),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            solve_price_balance(&anti(), &[0.0, 0.0], &SolverConfig::default()),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn clearing_rows_examples() {
        let p = PriceVector::from_values(vec![0.5, 0.5]).unwrap();
        let rows = verify_clearing(&anti(), &[2.0, 2.0], &[0.5, 0.5], &p, 1e-10).unwrap();
        assert!(rows.iter().all(|r| r.status == ClearingStatus::Cleared));
        assert_abs_diff_eq!(rows[0].demand_side, 1.0, epsilon = 1e-14);

        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        let p = PriceVector::from_values(vec![0.0, 1.0]).unwrap();
        let rows = clearing_rows(&a, &[1.0, 1.0], &p, 1e-10).unwrap();
        assert_eq!(rows[0].status, ClearingStatus::Excess);
        assert_eq!(rows[1].status, ClearingStatus::Cleared);

        let scaled = PriceVector::from_values(vec![0.0, 7.0]).unwrap();
        let again = clearing_rows(&a, &[1.0, 1.0], &scaled, 1e-10).unwrap();
        assert_eq!(
            rows.iter().map(|r| r.status).collect::<Vec<_>>(),
            again.iter().map(|r| r.status).collect::<Vec<_>>()
        );
    }

    #[test]
    fn over_demand_is_not_an_equilibrium() {
        let p = PriceVector::from_values(vec![0.9, 0.1]).unwrap();
        let r = verify_clearing(&anti(), &[2.0, 2.0], &[0.5, 0.5], &p, 1e-10);
        assert!(matches!(r, Err(Error::NotEquilibrium { .. })));
    }

    #[test]
    fn markup_examples() {
        let m = markup_condition(&anti(), &PriceVector::from_values(vec![0.5, 0.5]).unwrap(), 1e-12);
        assert!(m.holds);
        assert_abs_diff_eq!(m.margins[0], 0.25, epsilon = 1e-15);

        let m = markup_condition(&anti(), &PriceVector::from_values(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap(), 1e-12);
        assert!(!m.holds);
        assert_abs_diff_eq!(m.margins[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.margins[1], 0.0, epsilon = 1e-15);

        let m = markup_condition(&Matrix::zeros(2, 2), &PriceVector::from_values(vec![0.3, 0.7]).unwrap(), 1e-12);
        assert!(m.holds);
        assert_eq!(m.margins, vec![0.3, 0.7]);
    }

    #[test]
    fn single_precision_solve() {
        let a: Matrix<f32> = e2().cast();
        let p = solve_price_balance(&a, &[10.0f32, 10.0], &SolverConfig::default()).unwrap();
        assert!((p.values()[0] - 4.0 / 7.0).abs() < 1e-3);
    }
}
