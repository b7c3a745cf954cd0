//! Tax systems under which every market clears with positive margins, the
//! perfect special case, value accounting at equilibrium prices, and the
//! subsidies owed to industries whose margins turn negative.

use crate::equilibrium::{solve_price_balance, PriceVector, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::{nnls, Lu, Matrix};
use crate::matcheck::{analyze_matrix, DEFAULT_MATRIX_TOL};
use crate::model::EconomyModel;
use crate::scalar::{norm_inf, Scalar};

/// How a tax vector was obtained.
#[derive(Clone, Debug, PartialEq)]
pub enum TaxProvenance<T> {
    /// `1 − π = b·Az / x` for the stored activity vector `z`.
    SustainableFromZ(Vec<T>),
    /// `1 − π = b·Ax / x`.
    Perfect,
    External,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaxVector<T> {
    pi: Vec<T>,
    scale_b: T,
    provenance: TaxProvenance<T>,
}

impl<T: Scalar> TaxVector<T> {
    /// Externally supplied rates; every rate must lie in `(0, 1)`.
    pub fn external(pi: Vec<T>) -> Result<Self> {
        check_rates(&pi)?;
        Ok(Self { pi, scale_b: T::one(), provenance: TaxProvenance::External })
    }

    pub fn rates(&self) -> &[T] {
        &self.pi
    }

    /// The scale constant `b`; one for external rates.
    pub fn scale_b(&self) -> T {
        self.scale_b
    }

    pub fn provenance(&self) -> &TaxProvenance<T> {
        &self.provenance
    }

    /// After-tax supply `(1 − π_k) x_k`.
    pub fn supply(&self, x: &[T]) -> Vec<T> {
        self.pi.iter().zip(x).map(|(&p, &xk)| (T::one() - p) * xk).collect()
    }

    /// The activity vector whose equilibrium this tax supports, if known.
    pub fn activity<'a>(&'a self, model: &'a EconomyModel<T>) -> Option<&'a [T]> {
        match &self.provenance {
            TaxProvenance::SustainableFromZ(z) => Some(z),
            TaxProvenance::Perfect => Some(model.x()),
            TaxProvenance::External => None,
        }
    }
}

fn check_rates<T: Scalar>(pi: &[T]) -> Result<()> {
    if let Some(k) = pi.iter().position(|&p| !(p > T::zero() && p < T::one())) {
        return Err(Error::Domain(format!("tax rate π_{} = {} outside (0, 1)", k + 1, pi[k])));
    }
    Ok(())
}

fn require_irreducible_productive<T: Scalar>(a: &Matrix<T>) -> Result<()> {
    let profile = analyze_matrix(a, T::attainable(DEFAULT_MATRIX_TOL, 64.0))?;
    if !profile.irreducible {
        return Err(Error::NotIrreducible);
    }
    profile.require_productive()?;
    Ok(())
}

/// Upper end of the admissible scale interval `(0, min_i x_i / (Az)_i)`.
pub fn scale_upper_bound<T: Scalar>(model: &EconomyModel<T>, z: &[T]) -> Result<T> {
    let az = model.a().mul_vec(z);
    if let Some(k) = az.iter().position(|&v| !(v > T::zero())) {
        return Err(Error::DegenerateInput(format!("(Az)_{} is not positive", k + 1)));
    }
    Ok(model.x().iter().zip(&az).map(|(&x, &a)| x / a).fold(T::infinity(), T::min))
}

fn build_tax<T: Scalar>(model: &EconomyModel<T>, z: &[T], scale_b: Option<T>, provenance: TaxProvenance<T>) -> Result<TaxVector<T>> {
    let upper = scale_upper_bound(model, z)?;
    let b = scale_b.unwrap_or(upper / T::lit(2.0));
    if !(b > T::zero() && b < upper) {
        return Err(Error::ScaleOutOfRange { scale: b.to_f64_lossy(), upper: upper.to_f64_lossy() });
    }
    let az = model.a().mul_vec(z);
    let pi: Vec<T> = model.x().iter().zip(&az).map(|(&x, &a)| T::one() - b * a / x).collect();
    check_rates(&pi)?;
    Ok(TaxVector { pi, scale_b: b, provenance })
}

fn check_activity<T: Scalar>(model: &EconomyModel<T>, z: &[T]) -> Result<()> {
    if z.len() != model.n() {
        return Err(Error::Dimension(format!("z has length {}, expected {}", z.len(), model.n())));
    }
    if let Some(k) = z.iter().position(|&v| !(v > T::zero())) {
        return Err(Error::Domain(format!("z_{} = {} must be positive", k + 1, z[k])));
    }
    Ok(())
}

/// `π_i = 1 − b·(Az)_i / x_i` for an activity vector with `z > Az`.
/// The scale defaults to the midpoint of its admissible interval.
pub fn sustainable_tax<T: Scalar>(model: &EconomyModel<T>, z: &[T], scale_b: Option<T>) -> Result<TaxVector<T>> {
    check_activity(model, z)?;
    require_irreducible_productive(model.a())?;
    let az = model.a().mul_vec(z);
    let violations: Vec<usize> = (0..model.n()).filter(|&i| !(z[i] > az[i])).collect();
    if !violations.is_empty() {
        return Err(Error::ConditionViolation { indices: violations });
    }
    build_tax(model, z, scale_b, TaxProvenance::SustainableFromZ(z.to_vec()))
}

/// `π_i = 1 − b·(Ax)_i / x_i`. Margins are positive everywhere only when all
/// final demand is positive; otherwise see [`subsidy_requirements`].
pub fn perfect_tax<T: Scalar>(model: &EconomyModel<T>, scale_b: Option<T>) -> Result<TaxVector<T>> {
    require_irreducible_productive(model.a())?;
    build_tax(model, model.x(), scale_b, TaxProvenance::Perfect)
}

#[derive(Clone, Debug, PartialEq)]
pub enum NotSustainableReason {
    /// `A z = (1 − π) ∘ x` has no nonnegative solution.
    NoNonnegativeSolution { negative: Vec<usize>, residual: f64 },
    /// The recovered `z` fails `z_i > (Az)_i` at these industries.
    Markup { industries: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Sustainability<T> {
    Sustainable { z: Vec<T>, p: PriceVector<T> },
    NotSustainable(NotSustainableReason),
}

impl<T> Sustainability<T> {
    pub fn is_sustainable(&self) -> bool {
        matches!(self, Sustainability::Sustainable { .. })
    }
}

/// Recovers the activity vector behind a tax system and checks it.
///
/// The scale constant is absorbed into `z`, so `A z = (1 − π) ∘ x` exactly.
/// The system is solved by LU when `A` is nonsingular and by nonnegative
/// least squares with residual gate `1e-8·‖(1−π)x‖∞` otherwise.
pub fn check_tax_sustainable<T: Scalar>(model: &EconomyModel<T>, tax: &TaxVector<T>, tol: T) -> Result<Sustainability<T>> {
    if tax.rates().len() != model.n() {
        return Err(Error::Dimension("tax vector and economy differ in size".into()));
    }
    check_rates(tax.rates())?;
    let a = model.a();
    let target = tax.supply(model.x());
    let gate = T::lit(1e-8) * norm_inf(&target);

    let mut z = match Lu::factor(a) {
        Some(lu) => lu.solve(&target),
        None => {
            let sol = nnls(a, &target)?;
            if sol.residual > gate {
                return Ok(Sustainability::NotSustainable(NotSustainableReason::NoNonnegativeSolution {
                    negative: Vec::new(),
                    residual: sol.residual.to_f64_lossy(),
                }));
            }
            sol.x
        }
    };
    let zscale = norm_inf(&z);
    let negative: Vec<usize> = (0..z.len()).filter(|&i| z[i] < -tol * zscale).collect();
    if !negative.is_empty() {
        return Ok(Sustainability::NotSustainable(NotSustainableReason::NoNonnegativeSolution { negative, residual: 0.0 }));
    }
    z.iter_mut().for_each(|v| *v = v.max(T::zero()));

    let az = a.mul_vec(&z);
    let failing: Vec<usize> = (0..z.len()).filter(|&i| !(z[i] - az[i] > tol * zscale)).collect();
    if !failing.is_empty() {
        return Ok(Sustainability::NotSustainable(NotSustainableReason::Markup { industries: failing }));
    }
    let cfg = SolverConfig { require_positive: crate::matcheck::is_irreducible(a), ..SolverConfig::default() };
    let p = solve_price_balance(a, &z, &cfg)?;
    Ok(Sustainability::Sustainable { z, p })
}

/// Value-indicator accounts at a price vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueAccounts<T> {
    pub prices: Vec<T>,
    /// `X_k = p_k x_k`
    pub gross_output: Vec<T>,
    /// `C_k = p_k c_k`
    pub consumption: Vec<T>,
    /// `E_k = p_k e_k`
    pub exports: Vec<T>,
    /// `I_k = p_k m_k`
    pub imports: Vec<T>,
    /// `δ_k = p_k − (Aᵀp)_k`
    pub unit_value_added: Vec<T>,
    /// `Δ_k = x_k δ_k`
    pub value_added: Vec<T>,
    /// `ā_ki = p_k a_ki / p_i`; columns with `p_i = 0` are zero and flagged in `zero_price`.
    pub abar: Matrix<T>,
    pub zero_price: Vec<bool>,
    a: Matrix<T>,
    x: Vec<T>,
}

impl<T: Scalar> ValueAccounts<T> {
    /// `C + E − I`
    pub fn final_value(&self) -> Vec<T> {
        (0..self.prices.len())
            .map(|k| self.consumption[k] + self.exports[k] - self.imports[k])
            .collect()
    }

    /// `Σ_s ā_sk`, i.e. `(Aᵀp)_k / p_k`; `None` where `p_k = 0`.
    pub fn cost_share(&self, k: usize) -> Option<T> {
        (!self.zero_price[k]).then(|| (0..self.prices.len()).map(|s| self.abar[(s, k)]).sum())
    }
}

pub fn value_accounts<T: Scalar>(model: &EconomyModel<T>, p: &PriceVector<T>) -> Result<ValueAccounts<T>> {
    value_accounts_at(model, p.values())
}

/// [`value_accounts`] for raw nonnegative prices, the zero vector included.
pub fn value_accounts_at<T: Scalar>(model: &EconomyModel<T>, pv: &[T]) -> Result<ValueAccounts<T>> {
    let n = model.n();
    if pv.len() != n {
        return Err(Error::Dimension(format!("price vector has length {}, expected {n}", pv.len())));
    }
    if pv.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
        return Err(Error::Domain("prices must be finite and nonnegative".into()));
    }
    let scale = |v: &[T]| v.iter().zip(pv).map(|(&a, &b)| a * b).collect::<Vec<T>>();
    let cost = model.a().tr_mul_vec(pv);
    let delta: Vec<T> = pv.iter().zip(&cost).map(|(&pk, &ck)| pk - ck).collect();
    let value_added = model.x().iter().zip(&delta).map(|(&x, &d)| x * d).collect();
    let zero_price: Vec<bool> = pv.iter().map(|&v| v == T::zero()).collect();
    let abar = Matrix::from_fn(n, n, |k, i| if zero_price[i] { T::zero() } else { pv[k] * model.a()[(k, i)] / pv[i] });
    Ok(ValueAccounts {
        prices: pv.to_vec(),
        gross_output: scale(model.x()),
        consumption: scale(model.c()),
        exports: scale(model.e()),
        imports: scale(model.m()),
        unit_value_added: delta,
        value_added,
        abar,
        zero_price,
        a: model.a().clone(),
        x: model.x().to_vec(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
    /// Gaps within the tolerance band; these belong to the nonnegative side.
    pub zero: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndustryClassification<T> {
    /// `(C + E − I)_k − Δ_k ≥ −tol`
    pub i_set: Vec<usize>,
    /// `(C + E − I)_k − Δ_k < −tol`
    pub j_set: Vec<usize>,
    pub gaps: Vec<T>,
    pub signature: Signature,
}

pub fn classify_industries<T: Scalar>(accounts: &ValueAccounts<T>, tol: T) -> IndustryClassification<T> {
    let gaps: Vec<T> = accounts
        .final_value()
        .into_iter()
        .zip(&accounts.value_added)
        .map(|(f, &d)| f - d)
        .collect();
    let (i_set, j_set): (Vec<usize>, Vec<usize>) = (0..gaps.len()).partition(|&k| gaps[k] >= -tol);
    let mut signature = Signature::default();
    for &g in &gaps {
        if g > tol {
            signature.positive += 1;
        } else if g < -tol {
            signature.negative += 1;
        } else {
            signature.zero += 1;
        }
    }
    IndustryClassification { i_set, j_set, gaps, signature }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubsidyRow<T> {
    pub industry: usize,
    pub needs_subsidy: bool,
    /// `x_k p_k ((Az)_k / z_k − 1)` on subsidised industries, zero elsewhere.
    pub minimum_subsidy: T,
}

/// Minimum subsidies for industries with `z_k < (Az)_k`.
pub fn subsidy_requirements<T: Scalar>(model: &EconomyModel<T>, z: &[T], p: &PriceVector<T>) -> Result<Vec<SubsidyRow<T>>> {
    check_activity(model, z)?;
    if p.len() != model.n() {
        return Err(Error::Dimension("price vector and economy differ in size".into()));
    }
    let az = model.a().mul_vec(z);
    let needs: Vec<bool> = z.iter().zip(&az).map(|(&zk, &ak)| zk < ak).collect();
    if needs.iter().all(|&b| !b) {
        return Err(Error::EmptyJ);
    }
    if needs.iter().all(|&b| b) {
        return Err(Error::AllIndustriesSubsidized);
    }
    Ok((0..model.n())
        .map(|k| SubsidyRow {
            industry: k,
            needs_subsidy: needs[k],
            minimum_subsidy: if needs[k] {
                model.x()[k] * p.values()[k] * (az[k] / z[k] - T::one())
            } else {
                T::zero()
            },
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueBalance<T> {
    pub holds: bool,
    /// `Σ_i ā_ki X_i − (Σ_s ā_sk) X_k`
    pub residuals: Vec<T>,
    /// `(C + E − I)_k − (1 − Σ_s ā_sk) X_k`
    pub identity_residuals: Vec<T>,
}

/// Checks the homogeneous value system `Σ_i ā_ki X_i = (Σ_s ā_sk) X_k` and the
/// final-value identity. Zero-price columns use the limits
/// `ā_ki X_i → p_k a_ki x_i` and `(Σ_s ā_sk) X_k → (Aᵀp)_k x_k`.
pub fn value_balance_check<T: Scalar>(accounts: &ValueAccounts<T>, tol: T) -> ValueBalance<T> {
    let n = accounts.prices.len();
    let p = &accounts.prices;
    let cost = accounts.a.tr_mul_vec(p);
    let inflow = |k: usize| -> T {
        (0..n)
            .map(|i| {
                if accounts.zero_price[i] {
                    p[k] * accounts.a[(k, i)] * accounts.x[i]
                } else {
                    accounts.abar[(k, i)] * accounts.gross_output[i]
                }
            })
            .sum()
    };
    let outflow = |k: usize| -> T {
        match accounts.cost_share(k) {
            Some(share) => share * accounts.gross_output[k],
            None => cost[k] * accounts.x[k],
        }
    };
    let final_value = accounts.final_value();
    let residuals: Vec<T> = (0..n).map(|k| inflow(k) - outflow(k)).collect();
    let identity_residuals: Vec<T> = (0..n)
        .map(|k| final_value[k] - (accounts.gross_output[k] - outflow(k)))
        .collect();
    let limit = tol * norm_inf(&accounts.gross_output);
    let holds = norm_inf(&residuals) <= limit && norm_inf(&identity_residuals) <= limit;
    ValueBalance { holds, residuals, identity_residuals }
}

/// `π_k = 1 − b·(1 − Δ_k / X_k)` with `b ∈ (0, min_k 1 / Σ_s ā_sk)`.
pub fn tax_from_value_shares<T: Scalar>(accounts: &ValueAccounts<T>, scale_b: T) -> Result<TaxVector<T>> {
    if let Some(k) = accounts.gross_output.iter().position(|&v| !(v > T::zero())) {
        return Err(Error::Domain(format!("value gross output X_{} must be positive", k + 1)));
    }
    let shares: Vec<T> = accounts
        .value_added
        .iter()
        .zip(&accounts.gross_output)
        .map(|(&d, &x)| T::one() - d / x)
        .collect();
    let upper = shares
        .iter()
        .filter(|&&s| s > T::zero())
        .map(|&s| T::one() / s)
        .fold(T::infinity(), T::min);
    if !(scale_b > T::zero() && scale_b < upper) {
        return Err(Error::ScaleOutOfRange { scale: scale_b.to_f64_lossy(), upper: upper.to_f64_lossy() });
    }
    let pi: Vec<T> = shares.iter().map(|&s| T::one() - scale_b * s).collect();
    check_rates(&pi)?;
    Ok(TaxVector { pi, scale_b, provenance: TaxProvenance::External })
}

/// Equilibrium prices supporting a constructed tax; external taxes go
/// through [`check_tax_sustainable`].
pub fn tax_equilibrium<T: Scalar>(model: &EconomyModel<T>, tax: &TaxVector<T>, cfg: &SolverConfig<T>) -> Result<Option<(Vec<T>, PriceVector<T>)>> {
    match tax.activity(model) {
        Some(z) => Ok(Some((z.to_vec(), solve_price_balance(model.a(), z, cfg)?))),
        None => match check_tax_sustainable(model, tax, cfg.tol.max(T::attainable(1e-12, 64.0)))? {
            Sustainability::Sustainable { z, p } => Ok(Some((z, p))),
            Sustainability::NotSustainable(_) => Ok(None),
        },
    }
}
