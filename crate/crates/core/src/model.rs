//! The input-output economy: cost matrix, gross output and final demand
//! components, plus the balance identity `x = A x + c + e − m`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{norm_inf, Scalar};

/// Default balance tolerance, relative to `‖x‖∞`.
pub const DEFAULT_BALANCE_TOL: f64 = 1e-9;

/// A validated input-output economy with `n` industries.
///
/// `a[(k, i)]` is the amount of good `k` used to make one unit of good `i`.
/// Imports are stored as `m`; scenario documents use the key `"i"`.
#[derive(Clone, Debug, PartialEq)]
pub struct EconomyModel<T> {
    a: Matrix<T>,
    x: Vec<T>,
    c: Vec<T>,
    e: Vec<T>,
    m: Vec<T>,
}

impl<T: Scalar> EconomyModel<T> {
    pub fn new(a: Matrix<T>, x: Vec<T>, c: Vec<T>, e: Vec<T>, m: Vec<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!("A is {}x{}, expected square", a.rows(), a.cols())));
        }
        let n = a.rows();
        if n == 0 {
            return Err(Error::Dimension("economy has no industries".into()));
        }
        for (name, v) in [("x", &x), ("c", &c), ("e", &e), ("i", &m)] {
            if v.len() != n {
                return Err(Error::Dimension(format!("{name} has length {}, expected {n}", v.len())));
            }
            if v.iter().any(|t| !t.is_finite()) {
                return Err(Error::Domain(format!("{name} contains a non-finite value")));
            }
        }
        for k in 0..n {
            for i in 0..n {
                let v = a[(k, i)];
                if !v.is_finite() || v < T::zero() {
                    return Err(Error::Domain(format!("a[{},{}] = {v} must be finite and nonnegative", k + 1, i + 1)));
                }
            }
        }
        if let Some(k) = x.iter().position(|&v| v <= T::zero()) {
            return Err(Error::Domain(format!("gross output x[{}] = {} must be positive", k + 1, x[k])));
        }
        Ok(Self { a, x, c, e, m })
    }

    /// Economy with zero export and import.
    pub fn closed(a: Matrix<T>, x: Vec<T>, c: Vec<T>) -> Result<Self> {
        let n = x.len();
        Self::new(a, x, c, vec![T::zero(); n], vec![T::zero(); n])
    }

    /// Economy whose final consumption is chosen so that the balance holds exactly.
    pub fn balanced(a: Matrix<T>, x: Vec<T>) -> Result<Self> {
        let ax = if a.cols() == x.len() { a.mul_vec(&x) } else { x.clone() };
        let c = x.iter().zip(&ax).map(|(&xk, &axk)| xk - axk).collect();
        Self::closed(a, x, c)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn c(&self) -> &[T] {
        &self.c
    }

    pub fn e(&self) -> &[T] {
        &self.e
    }

    /// Imports.
    pub fn m(&self) -> &[T] {
        &self.m
    }

    /// `c + e − m` per industry.
    pub fn final_demand(&self) -> Vec<T> {
        (0..self.n()).map(|k| self.c[k] + self.e[k] - self.m[k]).collect()
    }

    /// `r_k = x_k − (Ax)_k − c_k − e_k + m_k`.
    pub fn balance_residual(&self) -> Vec<T> {
        let ax = self.a.mul_vec(&self.x);
        (0..self.n())
            .map(|k| self.x[k] - ax[k] - self.c[k] - self.e[k] + self.m[k])
            .collect()
    }

    /// Errors with [`Error::Balance`] if any residual exceeds `tol·‖x‖∞`.
    pub fn require_balanced(&self, tol: T) -> Result<()> {
        let limit = tol * norm_inf(&self.x);
        let worst = norm_inf(&self.balance_residual());
        if worst > limit {
            return Err(Error::Balance { max_residual: worst.to_f64_lossy(), limit: limit.to_f64_lossy() });
        }
        Ok(())
    }

    /// Sign pattern of final demand. `tol` is relative to `‖x‖∞` and is used
    /// both for the balance gate and for the sign band around zero.
    pub fn demand_regime(&self, tol: T) -> DemandRegime {
        if self.require_balanced(tol).is_err() {
            return DemandRegime::Invalid(RegimeIssue::Unbalanced);
        }
        let band = tol * norm_inf(&self.x);
        let fd = self.final_demand();
        if fd.iter().all(|&v| v > band) {
            return DemandRegime::AllPositive;
        }
        let (j_set, i_set): (Vec<usize>, Vec<usize>) = (0..self.n()).partition(|&k| fd[k] < -band);
        match (i_set.is_empty(), j_set.is_empty()) {
            (false, false) => DemandRegime::Mixed { i_set, j_set },
            (true, _) => DemandRegime::Invalid(RegimeIssue::AllNegative),
            (false, true) => DemandRegime::Invalid(RegimeIssue::ZeroFinalDemand),
        }
    }

    pub fn cast<U: Scalar>(&self) -> EconomyModel<U> {
        let cv = |v: &[T]| v.iter().map(|&t| U::lit(t.to_f64_lossy())).collect::<Vec<U>>();
        EconomyModel { a: self.a.cast(), x: cv(&self.x), c: cv(&self.c), e: cv(&self.e), m: cv(&self.m) }
    }
}

/// Sign partition of `c + e − m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DemandRegime {
    /// Every industry has strictly positive final demand.
    AllPositive,
    /// `i_set` has final demand `≥ 0` (within the band), `j_set` is strictly negative.
    Mixed { i_set: Vec<usize>, j_set: Vec<usize> },
    Invalid(RegimeIssue),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegimeIssue {
    /// The balance identity does not hold.
    Unbalanced,
    /// No industry has positive final demand but none is negative either.
    ZeroFinalDemand,
    /// Every industry has negative final demand.
    AllNegative,
}

/// Scenario document. Keys follow the conventional symbols: `"A"`, `"x"`,
/// `"c"`, `"e"`, `"i"`. Missing `c`, `e`, `i` default to zero vectors.
/// Optional `"b"` carries an explicit supply vector for market clearing.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(default)]
    pub x: Option<Vec<f64>>,
    #[serde(default)]
    pub c: Option<Vec<f64>>,
    #[serde(default)]
    pub e: Option<Vec<f64>>,
    #[serde(default)]
    pub i: Option<Vec<f64>>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub name: Option<String>,
}

impl ScenarioDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn economy<T: Scalar>(&self) -> Result<EconomyModel<T>> {
        let x = self.x.as_deref().ok_or_else(|| Error::Parse("scenario has no gross output \"x\"".into()))?;
        let n = x.len();
        let conv = |v: &[f64]| v.iter().map(|&t| T::lit(t)).collect::<Vec<T>>();
        let or_zero = |v: &Option<Vec<f64>>| v.as_deref().map_or_else(|| vec![T::zero(); n], conv);
        EconomyModel::new(self.matrix()?, conv(x), or_zero(&self.c), or_zero(&self.e), or_zero(&self.i))
    }

    /// The cost matrix alone, for analyses that need no gross output.
    pub fn matrix<T: Scalar>(&self) -> Result<Matrix<T>> {
        let rows: Vec<Vec<T>> = self.a.iter().map(|r| r.iter().map(|&t| T::lit(t)).collect()).collect();
        Matrix::from_rows(&rows)
    }

    pub fn supply<T: Scalar>(&self) -> Option<Vec<T>> {
        self.b.as_ref().map(|b| b.iter().map(|&t| T::lit(t)).collect())
    }
}

/// Parses a scenario document and validates it into an [`EconomyModel`].
pub fn load_economy<T: Scalar>(json: &str) -> Result<EconomyModel<T>> {
    ScenarioDocument::from_json(json)?.economy()
}

pub fn read_scenario(path: &Path) -> Result<ScenarioDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    ScenarioDocument::from_json(&text)
}

/// Parses a headerless CSV matrix.
pub fn parse_csv_matrix<T: Scalar>(text: &str) -> Result<Matrix<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|e| Error::Parse(format!("row {}, column {}: {field:?}: {e}", r + 1, c + 1)))
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

/// Sidecar document for CSV-imported matrices: the vectors `x`, `c`, `e`, `i`
/// (and optionally `b`) keyed as in [`ScenarioDocument`].
pub fn load_economy_csv<T: Scalar>(matrix_csv: &str, vectors_json: &str) -> Result<(EconomyModel<T>, Option<Vec<T>>)> {
    let a = parse_csv_matrix::<f64>(matrix_csv)?;
    let mut vectors: BTreeMap<String, serde_json::Value> =
        serde_json::from_str(vectors_json).map_err(|e| Error::Parse(e.to_string()))?;
    vectors.insert("A".into(), serde_json::to_value(a.to_rows()).map_err(|e| Error::Parse(e.to_string()))?);
    let doc: ScenarioDocument = serde_json::from_value(serde_json::to_value(vectors).map_err(|e| Error::Parse(e.to_string()))?)
        .map_err(|e| Error::Parse(e.to_string()))?;
    Ok((doc.economy()?, doc.supply()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const E1: &str = r#"{"A": [[0, 0.5], [0.5, 0]], "x": [2, 2], "c": [1, 1], "e": [0, 0], "i": [0, 0]}"#;

    fn e1() -> EconomyModel<f64> {
        load_economy(E1).unwrap()
    }

    #[test]
    fn loads_e1() {
        let m = e1();
        assert_eq!(m.n(), 2);
        assert_eq!(m.a()[(0, 1)], 0.5);
        assert_eq!(m.x(), &[2.0, 2.0]);
    }

    #[test]
    fn non_square_matrix_is_a_dimension_error() {
        let doc = r#"{"A": [[0, 0.5, 0], [0.5, 0, 0]], "x": [2, 2], "c": [1, 1], "e": [0, 0], "i": [0, 0]}"#;
        assert!(matches!(load_economy::<f64>(doc), Err(Error::Dimension(_))));
    }

    #[test]
    fn zero_output_is_a_domain_error() {
        let doc = r#"{"A": [[0, 0.5], [0.5, 0]], "x": [2, 0], "c": [1, 1], "e": [0, 0], "i": [0, 0]}"#;
        assert!(matches!(load_economy::<f64>(doc), Err(Error::Domain(_))));
    }

    #[test]
    fn negative_coefficient_is_a_domain_error() {
        let doc = r#"{"A": [[0, -0.5], [0.5, 0]], "x": [2, 2]}"#;
        assert!(matches!(load_economy::<f64>(doc), Err(Error::Domain(_))));
    }

    #[test]
    fn malformed_document_is_a_parse_error() {
        assert!(matches!(load_economy::<f64>("{\"A\": [[0]"), Err(Error::Parse(_))));
        assert!(matches!(load_economy::<f64>(r#"{"A": [[0]], "x": [1], "bogus": 1}"#), Err(Error::Parse(_))));
    }

    #[test]
    fn vector_length_mismatch() {
        let doc = r#"{"A": [[0, 0.5], [0.5, 0]], "x": [2, 2], "c": [1]}"#;
        assert!(matches!(load_economy::<f64>(doc), Err(Error::Dimension(_))));
    }

    #[test]
    fn balance_residuals() {
        assert_eq!(e1().balance_residual(), vec![0.0, 0.0]);

        let id = EconomyModel::closed(Matrix::zeros(2, 2), vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(id.balance_residual(), vec![0.0, 0.0]);

        let a = e1().a().clone();
        let off = EconomyModel::closed(a, vec![2.0, 2.0], vec![2.0, 2.0]).unwrap();
        assert_eq!(off.balance_residual(), vec![-1.0, -1.0]);
    }

    #[test]
    fn demand_regimes() {
        assert_eq!(e1().demand_regime(1e-9), DemandRegime::AllPositive);

        let a = e1().a().clone();
        let mixed = EconomyModel::balanced(a.clone(), vec![1.0, 3.0]).unwrap();
        assert_eq!(mixed.final_demand(), vec![-0.5, 2.5]);
        assert_eq!(mixed.demand_regime(1e-9), DemandRegime::Mixed { i_set: vec![1], j_set: vec![0] });

        let off = EconomyModel::closed(a, vec![2.0, 2.0], vec![2.0, 2.0]).unwrap();
        assert_eq!(off.demand_regime(1e-9), DemandRegime::Invalid(RegimeIssue::Unbalanced));
        assert!(matches!(off.require_balanced(1e-9), Err(Error::Balance { .. })));
    }

    #[test]
    fn zero_demand_counts_on_nonnegative_side() {
        // x = [1, 2]: Ax = [1, 0.5], so c = [0, 1.5].
        let a = e1().a().clone();
        let m = EconomyModel::balanced(a, vec![1.0, 2.0]).unwrap();
        assert_eq!(m.demand_regime(1e-9), DemandRegime::Invalid(RegimeIssue::ZeroFinalDemand));
    }

    #[test]
    fn csv_with_sidecar() {
        let (m, b) = load_economy_csv::<f64>("0, 0.5\n0.5, 0\n", r#"{"x": [2, 2], "c": [1, 1], "b": [1, 1]}"#).unwrap();
        assert_eq!(m, e1());
        assert_eq!(b, Some(vec![1.0, 1.0]));
        assert!(matches!(parse_csv_matrix::<f64>("1, x\n"), Err(Error::Parse(_))));
    }
}
