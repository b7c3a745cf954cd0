//! Structural checks on the direct-cost matrix.

use crate::error::{Error, Result};
use crate::linalg::{nnls, Lu, Matrix};
use crate::scalar::{norm_inf, Scalar};

pub const DEFAULT_MATRIX_TOL: f64 = 1e-10;
pub const SPECTRAL_MAX_ITER: usize = 10_000;

#[derive(Clone, Debug)]
pub struct MatrixProfile<T> {
    pub irreducible: bool,
    /// Estimate of the Perron root `ρ(A)`.
    pub spectral_radius: T,
    pub productive: bool,
    /// `(E − A)⁻¹`, present iff the matrix is productive.
    pub leontief_inverse: Option<Matrix<T>>,
    matrix: Matrix<T>,
}

impl<T: Scalar> MatrixProfile<T> {
    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn require_productive(&self) -> Result<&Matrix<T>> {
        self.leontief_inverse
            .as_ref()
            .ok_or(Error::NotProductive { spectral_radius: self.spectral_radius.to_f64_lossy() })
    }
}

/// Strong connectivity of the digraph with an edge `i → j` whenever `a_ij > 0`,
/// via one DFS on the graph and one on its transpose.
pub fn is_irreducible<T: Scalar>(a: &Matrix<T>) -> bool {
    let n = a.rows();
    if n == 0 {
        return false;
    }
    let reaches_all = |edge: &dyn Fn(usize, usize) -> bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if !seen[v] && edge(u, v) {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reaches_all(&|u, v| a[(u, v)] > T::zero()) && reaches_all(&|u, v| a[(v, u)] > T::zero())
}

/// Perron root of a nonnegative matrix by power iteration.
///
/// Iterates on `|A| + E`, which has the same Perron vector, spectral radius
/// shifted by exactly one, and no other eigenvalue of the same modulus, so
/// periodic matrices converge too. Starts from the all-ones vector. Stops when
/// the Collatz–Wielandt bracket `[min (Bv)_i/v_i, max (Bv)_i/v_i]` closes to
/// `tol` relative. For reducible matrices the bracket need not close, so
/// there the geometric tail of the estimate's increments is used instead.
pub fn spectral_radius<T: Scalar>(a: &Matrix<T>, tol: T) -> Result<T> {
    let n = a.rows();
    if n == 0 {
        return Ok(T::zero());
    }
    let abs = a.map(T::abs);
    let nf = T::from_usize_lossy(n);
    let mut v = vec![T::one() / nf; n];
    let mut prev = T::nan();
    let mut prev_step = T::nan();
    let bracket_closes = is_irreducible(&abs);
    for _ in 0..SPECTRAL_MAX_ITER {
        let mut w = abs.mul_vec(&v);
        for (wi, &vi) in w.iter_mut().zip(&v) {
            *wi = *wi + vi;
        }
        let est: T = w.iter().copied().sum();
        let (lo, hi) = w.iter().zip(&v).fold((T::infinity(), T::zero()), |(lo, hi), (&wi, &vi)| {
            let r = wi / vi;
            (lo.min(r), hi.max(r))
        });
        if hi - lo <= tol * est {
            return Ok((est - T::one()).max(T::zero()));
        }
        let step = (est - prev).abs();
        let q = step / prev_step;
        if !bracket_closes && (step == T::zero() || (q < T::one() && step * q / (T::one() - q) <= tol * est)) {
            return Ok((est - T::one()).max(T::zero()));
        }
        prev = est;
        prev_step = step;
        v = w.into_iter().map(|wi| wi / est).collect();
    }
    Err(Error::Convergence { what: "spectral radius power iteration", iterations: SPECTRAL_MAX_ITER })
}

/// Irreducibility, Perron root, productivity (`ρ < 1 − tol`) and the
/// Leontief inverse of a square nonnegative matrix.
pub fn analyze_matrix<T: Scalar>(a: &Matrix<T>, tol: T) -> Result<MatrixProfile<T>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("A is {}x{}, expected square", a.rows(), a.cols())));
    }
    if a.min_entry().is_some_and(|m| m < T::zero()) {
        return Err(Error::Domain("cost matrix has a negative entry".into()));
    }
    let irreducible = is_irreducible(a);
    let rho = spectral_radius(a, tol)?;
    let productive = rho < T::one() - tol;
    let leontief_inverse = if productive {
        Some(
            Lu::factor(&a.identity_minus())
                .ok_or(Error::NotProductive { spectral_radius: rho.to_f64_lossy() })?
                .inverse(),
        )
    } else {
        None
    };
    Ok(MatrixProfile { irreducible, spectral_radius: rho, productive, leontief_inverse, matrix: a.clone() })
}

/// Where a positive vector `v` sits relative to the cone spanned by the
/// columns of `A(E − A)⁻¹`. `z` solves `A z = v` and `alpha = (E − A) z`
/// are the cone coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum ConeMembership<T> {
    Interior { z: Vec<T>, alpha: Vec<T> },
    Boundary { z: Vec<T>, alpha: Vec<T> },
    Outside { z: Vec<T>, alpha: Vec<T> },
}

impl<T> ConeMembership<T> {
    pub fn is_interior(&self) -> bool {
        matches!(self, ConeMembership::Interior { .. })
    }

    pub fn alpha(&self) -> &[T] {
        match self {
            ConeMembership::Interior { alpha, .. }
            | ConeMembership::Boundary { alpha, .. }
            | ConeMembership::Outside { alpha, .. } => alpha,
        }
    }
}

/// Locates `v` relative to the cone of columns of `A(E − A)⁻¹`.
///
/// `A z = v` is solved by LU when `A` is nonsingular and by nonnegative least
/// squares (residual gate `1e-8·‖v‖∞`) otherwise. The sign band for `alpha`
/// is `tol·max(1, ‖z‖∞)`.
pub fn cone_membership<T: Scalar>(profile: &MatrixProfile<T>, v: &[T], tol: T) -> Result<ConeMembership<T>> {
    profile.require_productive()?;
    let a = profile.matrix();
    if v.len() != a.rows() {
        return Err(Error::Dimension(format!("vector has length {}, expected {}", v.len(), a.rows())));
    }
    if v.iter().any(|&t| t <= T::zero()) {
        return Err(Error::Domain("cone membership requires a strictly positive vector".into()));
    }
    let z = match Lu::factor(a) {
        Some(lu) => lu.solve(v),
        None => {
            let sol = nnls(a, v)?;
            let gate = T::lit(1e-8) * norm_inf(v);
            if sol.residual > gate {
                return Err(Error::SingularSystem { residual: sol.residual.to_f64_lossy() });
            }
            sol.x
        }
    };
    let az = a.mul_vec(&z);
    let alpha: Vec<T> = z.iter().zip(&az).map(|(&zi, &ai)| zi - ai).collect();
    let band = tol * norm_inf(&z).max(T::one());
    let min = alpha.iter().copied().fold(T::infinity(), T::min);
    Ok(if min > band {
        ConeMembership::Interior { z, alpha }
    } else if min >= -band {
        ConeMembership::Boundary { z, alpha }
    } else {
        ConeMembership::Outside { z, alpha }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn anti() -> Matrix<f64> {
        Matrix::from_rows(&[[0.0, 0.5], [0.5, 0.0]]).unwrap()
    }

    #[test]
    fn anti_diagonal_profile() {
        let p = analyze_matrix(&anti(), 1e-10).unwrap();
        assert!(p.irreducible);
        assert!(p.productive);
        assert_abs_diff_eq!(p.spectral_radius, 0.5, epsilon = 1e-9);
        let inv = p.leontief_inverse.unwrap();
        assert_abs_diff_eq!(inv[(0, 0)], 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(inv[(0, 1)], 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_is_reducible() {
        let a = Matrix::from_rows(&[[0.5, 0.0], [0.0, 0.5]]).unwrap();
        assert!(!analyze_matrix(&a, 1e-10).unwrap().irreducible);
    }

    #[test]
    fn one_way_chain_is_reducible() {
        let a = Matrix::from_rows(&[[0.0, 0.5], [0.0, 0.0]]).unwrap();
        assert!(!is_irreducible(&a));
    }

    #[test]
    fn non_productive_diagonal() {
        let a = Matrix::from_rows(&[[1.1, 0.0], [0.0, 0.5]]).unwrap();
        let p = analyze_matrix(&a, 1e-10).unwrap();
        assert!(!p.productive);
        assert!(p.leontief_inverse.is_none());
        assert_abs_diff_eq!(p.spectral_radius, 1.1, epsilon = 1e-8);
    }

    #[test]
    fn periodic_three_cycle_converges() {
        let a = Matrix::from_rows(&[[0.0, 0.8, 0.0], [0.0, 0.0, 0.8], [0.8, 0.0, 0.0]]).unwrap();
        let rho = spectral_radius(&a, 1e-12).unwrap();
        assert_abs_diff_eq!(rho, 0.8, epsilon = 1e-9);
    }

    #[test]
    fn cone_positions() {
        let p = analyze_matrix(&anti(), 1e-10).unwrap();

        let c = cone_membership(&p, &[1.0, 1.0], 1e-10).unwrap();
        let ConeMembership::Interior { z, alpha } = c else { panic!("expected interior, got {c:?}") };
        assert_abs_diff_eq!(z[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(alpha[1], 1.0, epsilon = 1e-12);

        let c = cone_membership(&p, &[1.0, 3.0], 1e-10).unwrap();
        let ConeMembership::Outside { z, alpha } = c else { panic!("expected outside, got {c:?}") };
        assert_abs_diff_eq!(z[0], 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(alpha[0], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(alpha[1], -1.0, epsilon = 1e-12);

        let c = cone_membership(&p, &[1.0, 2.0], 1e-10).unwrap();
        let ConeMembership::Boundary { z, alpha } = c else { panic!("expected boundary, got {c:?}") };
        assert_abs_diff_eq!(z[0], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(alpha[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(alpha[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cone_requires_productive_matrix() {
        let a = Matrix::from_rows(&[[1.1, 0.0], [0.0, 0.5]]).unwrap();
        let p = analyze_matrix(&a, 1e-10).unwrap();
        assert!(matches!(cone_membership(&p, &[1.0, 1.0], 1e-10), Err(Error::NotProductive { .. })));
    }

    #[test]
    fn singular_matrix_uses_nonnegative_fit() {
        let a = Matrix::from_rows(&[[0.2, 0.2], [0.3, 0.3]]).unwrap();
        let p = analyze_matrix(&a, 1e-10).unwrap();
        // v in the range of A: A [1, 1] = [0.4, 0.6].
        let c = cone_membership(&p, &[0.4, 0.6], 1e-10).unwrap();
        let az = a.mul_vec(match &c {
            ConeMembership::Interior { z, .. } | ConeMembership::Boundary { z, .. } | ConeMembership::Outside { z, .. } => z,
        });
        assert_abs_diff_eq!(az[0], 0.4, epsilon = 1e-10);
        // v outside the range.
        assert!(matches!(cone_membership(&p, &[1.0, 0.1], 1e-10), Err(Error::SingularSystem { .. })));
    }
}
