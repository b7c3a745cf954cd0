use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("gross output balance violated: max |residual| = {max_residual:.3e} exceeds {limit:.3e}")]
    Balance { max_residual: f64, limit: f64 },

    #[error("{what} did not converge within {iterations} iterations")]
    Convergence { what: &'static str, iterations: usize },

    #[error("matrix is not productive (spectral radius {spectral_radius:.6})")]
    NotProductive { spectral_radius: f64 },

    #[error("matrix is not irreducible")]
    NotIrreducible,

    #[error("linear system has no nonnegative solution within the residual gate (residual {residual:.3e})")]
    SingularSystem { residual: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("not an equilibrium: demand exceeds supply at industry {industry} ({demand:.6e} > {supply:.6e})")]
    NotEquilibrium { industry: usize, demand: f64, supply: f64 },

    #[error("markup condition z_k > (Az)_k violated at industries {}", one_based(.indices))]
    ConditionViolation { indices: Vec<usize> },

    #[error("scale constant {scale} outside admissible interval (0, {upper})")]
    ScaleOutOfRange { scale: f64, upper: f64 },

    #[error("every industry would need subsidies; z is incompatible with a productive matrix")]
    AllIndustriesSubsidized,

    #[error("no industry needs subsidies")]
    EmptyJ,

    #[error("column {column} of the clearing matrix is zero")]
    ZeroColumn { column: usize },

    #[error("not a solution of the clearing system: {0}")]
    NotASolution(String),

    #[error("no partial-clearing equilibrium: {0}")]
    NoEquilibrium(String),

    #[error("equality set of the clearing solution is empty")]
    DegenerateSupport,
}

impl Error {
    /// Rejections that are legitimate answers about the economy rather than bad input.
    pub fn is_domain_rejection(&self) -> bool {
        matches!(
            self,
            Error::NoEquilibrium(_)
                | Error::NotEquilibrium { .. }
                | Error::ConditionViolation { .. }
                | Error::AllIndustriesSubsidized
                | Error::NotProductive { .. }
                | Error::NotIrreducible
        )
    }
}

fn one_based(indices: &[usize]) -> String {
    indices
        .iter()
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
