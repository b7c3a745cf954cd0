//! Report documents for the command-line front end.
//!
//! Numbers are rounded to 12 significant digits before they reach either
//! output form, so tables and JSON documents are byte-for-byte reproducible.

use std::fmt::Write as _;

use serde::Serialize;

use crate::clearing::{ClearingEquilibrium, ExcessAnalysis, PartialClearingVerdict, SupportChoice};
use crate::equilibrium::{cost_share_demand, fixed_point_residual, markup_condition, ClearingStatus, PriceVector};
use crate::error::Result;
use crate::matcheck::MatrixProfile;
use crate::model::{DemandRegime, EconomyModel, RegimeIssue};
use crate::scalar::{dot, norm_inf, Scalar};
use crate::taxation::{
    classify_industries, value_accounts, value_balance_check, Signature, SubsidyRow, TaxProvenance, TaxVector,
};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits; `-0` becomes `0`.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    let r: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x);
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Plain decimal rendering (no exponent) of `round_sig(x)`.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{}", round_sig(x))
}

fn sig<T: Scalar>(v: T) -> f64 {
    round_sig(v.to_f64_lossy())
}

fn sigs<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|&x| sig(x)).collect()
}

fn one_based(idx: &[usize]) -> Vec<usize> {
    idx.iter().map(|&k| k + 1).collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_sig(x)).collect::<Vec<_>>().join(", ")
}

fn join_idx(v: &[usize]) -> String {
    if v.is_empty() {
        return "-".into();
    }
    v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Clone, Debug, Serialize)]
pub struct RegimeSummary {
    pub kind: &'static str,
    pub i_set: Vec<usize>,
    pub j_set: Vec<usize>,
}

impl From<&DemandRegime> for RegimeSummary {
    fn from(r: &DemandRegime) -> Self {
        let (kind, i_set, j_set) = match r {
            DemandRegime::AllPositive => ("all-positive", Vec::new(), Vec::new()),
            DemandRegime::Mixed { i_set, j_set } => ("mixed", one_based(i_set), one_based(j_set)),
            DemandRegime::Invalid(RegimeIssue::Unbalanced) => ("unbalanced", Vec::new(), Vec::new()),
            DemandRegime::Invalid(RegimeIssue::ZeroFinalDemand) => ("zero-final-demand", Vec::new(), Vec::new()),
            DemandRegime::Invalid(RegimeIssue::AllNegative) => ("all-negative", Vec::new(), Vec::new()),
        };
        Self { kind, i_set, j_set }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub name: Option<String>,
    pub n: usize,
    pub max_balance_residual: f64,
    pub balanced: bool,
    pub regime: RegimeSummary,
    pub irreducible: bool,
    pub spectral_radius: f64,
    pub productive: bool,
}

impl ValidationReport {
    pub fn build<T: Scalar>(name: Option<String>, model: &EconomyModel<T>, profile: &MatrixProfile<T>, tol: T) -> Self {
        let residual = norm_inf(&model.balance_residual());
        Self {
            name,
            n: model.n(),
            max_balance_residual: sig(residual),
            balanced: model.require_balanced(tol).is_ok(),
            regime: RegimeSummary::from(&model.demand_regime(tol)),
            irreducible: profile.irreducible,
            spectral_radius: sig(profile.spectral_radius),
            productive: profile.productive,
        }
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        if let Some(name) = &self.name {
            let _ = writeln!(s, "scenario\t{name}");
        }
        let _ = writeln!(s, "industries\t{}", self.n);
        let _ = writeln!(s, "balance_residual\t{}", fmt_sig(self.max_balance_residual));
        let _ = writeln!(s, "balanced\t{}", self.balanced);
        let _ = writeln!(s, "demand_regime\t{}", self.regime.kind);
        if self.regime.kind == "mixed" {
            let _ = writeln!(s, "nonnegative_demand\t{}", join_idx(&self.regime.i_set));
            let _ = writeln!(s, "negative_demand\t{}", join_idx(&self.regime.j_set));
        }
        let _ = writeln!(s, "irreducible\t{}", self.irreducible);
        let _ = writeln!(s, "spectral_radius\t{}", fmt_sig(self.spectral_radius));
        let _ = writeln!(s, "productive\t{}", self.productive);
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IndustryLine {
    pub industry: usize,
    pub tax_rate: f64,
    pub price: f64,
    /// `δ`
    pub unit_value_added: f64,
    /// `Δ`
    pub value_added: f64,
    /// `C + E − I`
    pub final_value: f64,
    pub gap: f64,
    pub class: &'static str,
    pub subsidy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SignatureSummary {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl From<Signature> for SignatureSummary {
    fn from(s: Signature) -> Self {
        Self { positive: s.positive, negative: s.negative, zero: s.zero }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TaxReport {
    pub name: Option<String>,
    pub tax: &'static str,
    pub scale_b: f64,
    pub activity: Vec<f64>,
    pub regime: RegimeSummary,
    pub lambda_residual: f64,
    pub fixed_point_residual: f64,
    pub markup_holds: bool,
    pub value_balance_holds: bool,
    pub signature: SignatureSummary,
    pub i_set: Vec<usize>,
    pub j_set: Vec<usize>,
    /// Share of unsold supply value at the equilibrium prices.
    pub excess_supply: f64,
    pub total_subsidy: Option<f64>,
    pub industries: Vec<IndustryLine>,
}

/// Everything the per-industry report needs about one taxed equilibrium.
pub struct TaxedEquilibrium<'a, T> {
    pub model: &'a EconomyModel<T>,
    pub tax: &'a TaxVector<T>,
    pub z: &'a [T],
    pub p: &'a PriceVector<T>,
    pub subsidies: Option<&'a [SubsidyRow<T>]>,
}

impl TaxReport {
    pub fn build<T: Scalar>(name: Option<String>, eq: &TaxedEquilibrium<'_, T>, tol: T) -> Result<Self> {
        let model = eq.model;
        let accounts = value_accounts(model, eq.p)?;
        let classes = classify_industries(&accounts, tol * norm_inf(&accounts.gross_output).max(T::one()));
        let balance = value_balance_check(&accounts, tol);
        let markup = markup_condition(model.a(), eq.p, T::zero());
        let supply = eq.tax.supply(model.x());
        let demand = cost_share_demand(model.a(), &supply, eq.p.values())?;
        let unsold: Vec<T> = supply.iter().zip(&demand).map(|(&s, &d)| s - d).collect();
        let excess_supply = dot(&unsold, eq.p.values()) / dot(&supply, eq.p.values());
        let final_value = accounts.final_value();
        let tax = match eq.tax.provenance() {
            TaxProvenance::SustainableFromZ(_) => "sustainable",
            TaxProvenance::Perfect => "perfect",
            TaxProvenance::External => "external",
        };
        let industries = (0..model.n())
            .map(|k| IndustryLine {
                industry: k + 1,
                tax_rate: sig(eq.tax.rates()[k]),
                price: sig(eq.p.values()[k]),
                unit_value_added: sig(accounts.unit_value_added[k]),
                value_added: sig(accounts.value_added[k]),
                final_value: sig(final_value[k]),
                gap: sig(classes.gaps[k]),
                class: if classes.j_set.contains(&k) { "J" } else { "I" },
                subsidy: eq.subsidies.map_or(0.0, |s| sig(s[k].minimum_subsidy)),
            })
            .collect();
        Ok(Self {
            name,
            tax,
            scale_b: sig(eq.tax.scale_b()),
            activity: sigs(eq.z),
            regime: RegimeSummary::from(&model.demand_regime(T::attainable(1e-9, 64.0))),
            lambda_residual: sig(eq.p.lambda_residual()),
            fixed_point_residual: sig(fixed_point_residual(model.a(), eq.z, eq.p.values())?),
            markup_holds: markup.holds,
            value_balance_holds: balance.holds,
            signature: classes.signature.into(),
            i_set: one_based(&classes.i_set),
            j_set: one_based(&classes.j_set),
            excess_supply: sig(excess_supply),
            total_subsidy: eq.subsidies.map(|s| sig(s.iter().map(|r| r.minimum_subsidy).sum::<T>())),
            industries,
        })
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        if let Some(name) = &self.name {
            let _ = writeln!(s, "# scenario {name}");
        }
        let _ = writeln!(s, "# tax {} scale_b {}", self.tax, fmt_sig(self.scale_b));
        let _ = writeln!(s, "# demand regime {}", self.regime.kind);
        let _ = writeln!(
            s,
            "# lambda residual {} fixed-point residual {}",
            fmt_sig(self.lambda_residual),
            fmt_sig(self.fixed_point_residual)
        );
        let _ = writeln!(s, "# markup holds {} value balance holds {}", self.markup_holds, self.value_balance_holds);
        let _ = writeln!(
            s,
            "# signature positive {} negative {} zero {}  I {}  J {}",
            self.signature.positive,
            self.signature.negative,
            self.signature.zero,
            join_idx(&self.i_set),
            join_idx(&self.j_set)
        );
        let _ = writeln!(s, "# excess supply {}", fmt_sig(self.excess_supply));
        if let Some(t) = self.total_subsidy {
            let _ = writeln!(s, "# total subsidy {}", fmt_sig(t));
        }
        s.push_str("industry\tpi\tp\tdelta\tDelta\tC+E-I\tgap\tclass\tsubsidy\n");
        for r in &self.industries {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.industry,
                fmt_sig(r.tax_rate),
                fmt_sig(r.price),
                fmt_sig(r.unit_value_added),
                fmt_sig(r.value_added),
                fmt_sig(r.final_value),
                fmt_sig(r.gap),
                r.class,
                fmt_sig(r.subsidy)
            );
        }
        s
    }

    /// Comma-separated per-industry table.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| crate::error::Error::Parse(e.to_string());
        w.write_record(["industry", "pi", "p", "delta", "Delta", "C+E-I", "gap", "class", "subsidy"]).map_err(io)?;
        for r in &self.industries {
            w.write_record([
                r.industry.to_string(),
                fmt_sig(r.tax_rate),
                fmt_sig(r.price),
                fmt_sig(r.unit_value_added),
                fmt_sig(r.value_added),
                fmt_sig(r.final_value),
                fmt_sig(r.gap),
                r.class.to_string(),
                fmt_sig(r.subsidy),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::error::Error::Parse(e.to_string()))?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClearingLine {
    pub industry: usize,
    pub demand: f64,
    pub supply: f64,
    pub expected: &'static str,
    pub observed: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClearingReport {
    pub name: Option<String>,
    pub full_clearing: bool,
    pub support: &'static str,
    pub objective: f64,
    pub family_objective: f64,
    pub kkt_residual: f64,
    pub alpha: Vec<f64>,
    pub c_alpha: f64,
    pub z: Vec<f64>,
    pub i_set: Vec<usize>,
    pub j_set: Vec<usize>,
    pub b: Vec<f64>,
    pub b_bar: Vec<f64>,
    pub p: Vec<f64>,
    pub p_u: Vec<f64>,
    pub excess_supply: f64,
    pub verified: bool,
    pub rows: Vec<ClearingLine>,
}

fn status_name(s: Option<ClearingStatus>) -> &'static str {
    match s {
        Some(ClearingStatus::Cleared) => "cleared",
        Some(ClearingStatus::Excess) => "excess",
        None => "over-demand",
    }
}

impl ClearingReport {
    pub fn build<T: Scalar>(name: Option<String>, b: &[T], analysis: &ExcessAnalysis<T>, verdict: &PartialClearingVerdict<T>) -> Self {
        let eq: &ClearingEquilibrium<T> = &analysis.equilibrium;
        let sol = &analysis.solution;
        Self {
            name,
            full_clearing: sol.full_clearing,
            support: match analysis.support {
                SupportChoice::Optimum => "optimum",
                SupportChoice::EquivalentOptimum => "equivalent-optimum",
                SupportChoice::RestrictedSolve => "restricted-solve",
            },
            objective: sig(sol.objective),
            family_objective: sig(sol.family_objective),
            kkt_residual: sig(sol.kkt_residual),
            alpha: sigs(sol.family.alpha.values()),
            c_alpha: sig(sol.family.c_alpha),
            z: sigs(&eq.z),
            i_set: one_based(&eq.i_set),
            j_set: one_based(&eq.j_set),
            b: sigs(b),
            b_bar: sigs(&eq.b_bar),
            p: sigs(eq.p.values()),
            p_u: sigs(&eq.p_u),
            excess_supply: sig(eq.excess_supply),
            verified: verdict.holds,
            rows: verdict
                .rows
                .iter()
                .map(|r| ClearingLine {
                    industry: r.industry + 1,
                    demand: sig(r.demand),
                    supply: sig(r.supply),
                    expected: status_name(Some(r.expected)),
                    observed: status_name(r.observed),
                })
                .collect(),
        }
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        if let Some(name) = &self.name {
            let _ = writeln!(s, "# scenario {name}");
        }
        let _ = writeln!(s, "# full clearing {} support {}", self.full_clearing, self.support);
        let _ = writeln!(
            s,
            "# objective {} family objective {} kkt residual {}",
            fmt_sig(self.objective),
            fmt_sig(self.family_objective),
            fmt_sig(self.kkt_residual)
        );
        let _ = writeln!(s, "# alpha [{}] c(alpha) {}", join(&self.alpha), fmt_sig(self.c_alpha));
        let _ = writeln!(s, "# I {}  J {}", join_idx(&self.i_set), join_idx(&self.j_set));
        let _ = writeln!(s, "# excess supply R {}", fmt_sig(self.excess_supply));
        let _ = writeln!(s, "# verified {}", self.verified);
        s.push_str("industry\tz\tb\tb_bar\tp\tp_u\tdemand\tstatus\n");
        for (k, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.industry,
                fmt_sig(self.z[k]),
                fmt_sig(self.b[k]),
                fmt_sig(self.b_bar[k]),
                fmt_sig(self.p[k]),
                fmt_sig(self.p_u[k]),
                fmt_sig(r.demand),
                r.observed
            );
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SubsidyLine {
    pub industry: usize,
    pub activity: f64,
    /// `(Az)_k`
    pub intermediate: f64,
    pub price: f64,
    pub needs_subsidy: bool,
    pub subsidy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubsidyReport {
    pub name: Option<String>,
    pub j_set: Vec<usize>,
    pub total_subsidy: f64,
    pub industries: Vec<SubsidyLine>,
}

impl SubsidyReport {
    pub fn build<T: Scalar>(name: Option<String>, model: &EconomyModel<T>, z: &[T], p: &PriceVector<T>, rows: &[SubsidyRow<T>]) -> Self {
        let az = model.a().mul_vec(z);
        let j: Vec<usize> = rows.iter().filter(|r| r.needs_subsidy).map(|r| r.industry).collect();
        Self {
            name,
            j_set: one_based(&j),
            total_subsidy: sig(rows.iter().map(|r| r.minimum_subsidy).sum::<T>()),
            industries: rows
                .iter()
                .map(|r| SubsidyLine {
                    industry: r.industry + 1,
                    activity: sig(z[r.industry]),
                    intermediate: sig(az[r.industry]),
                    price: sig(p.values()[r.industry]),
                    needs_subsidy: r.needs_subsidy,
                    subsidy: sig(r.minimum_subsidy),
                })
                .collect(),
        }
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        if let Some(name) = &self.name {
            let _ = writeln!(s, "# scenario {name}");
        }
        let _ = writeln!(s, "# subsidized {}  total {}", join_idx(&self.j_set), fmt_sig(self.total_subsidy));
        s.push_str("industry\tz\tAz\tp\tsubsidized\tsubsidy\n");
        for r in &self.industries {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.industry,
                fmt_sig(r.activity),
                fmt_sig(r.intermediate),
                fmt_sig(r.price),
                if r.needs_subsidy { "yes" } else { "no" },
                fmt_sig(r.subsidy)
            );
        }
        s
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<S: Serialize>(doc: &S) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc).map_err(|e| crate::error::Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_rounding() {
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(2.0 / 3.0), "0.666666666667");
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(-0.0), "0");
        assert_eq!(fmt_sig(123456789012345.0), "123456789012000");
        assert_eq!(fmt_sig(1.25e-7), "0.000000125");
        assert_eq!(fmt_sig(f64::NAN), "nan");
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
    }
}
