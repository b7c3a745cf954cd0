//! Partial market clearing.
//!
//! Every nonnegative `z` with `Cz ≤ b` and at least one equality row is
//! `z = c(α)·(α ∘ d)` for a point `α` of the unit simplex. The solution with
//! the least excess `‖b − Cz‖²` comes from a small active-set QP; it then
//! yields equilibrium prices that vanish on the industries in excess supply.

use crate::equilibrium::{cost_share_demand, solve_price_balance, ClearingStatus, Normalization, PriceVector, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::{lstsq, nnls, Matrix, Svd};
use crate::matcheck::is_irreducible;
use crate::scalar::{dot, norm_inf, Scalar};

/// Relative band for calling a row an equality row.
pub const DEFAULT_EQUALITY_TOL: f64 = 1e-9;

/// `min ‖b − Cz‖²` over `z ≥ 0, Cz ≤ b`, with `C ≥ 0` having no zero row or
/// column and `b > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClearingProblem<T> {
    c: Matrix<T>,
    b: Vec<T>,
}

impl<T: Scalar> ClearingProblem<T> {
    pub fn new(c: Matrix<T>, b: Vec<T>) -> Result<Self> {
        let (n, l) = (c.rows(), c.cols());
        if n == 0 || l == 0 {
            return Err(Error::Dimension("empty clearing problem".into()));
        }
        if b.len() != n {
            return Err(Error::Dimension(format!("b has length {}, expected {n}", b.len())));
        }
        if c.as_slice().iter().any(|&v| !v.is_finite() || v < T::zero()) {
            return Err(Error::Domain("C must be finite and nonnegative".into()));
        }
        if let Some(k) = b.iter().position(|&v| !(v > T::zero() && v.is_finite())) {
            return Err(Error::Domain(format!("b_{} = {} must be positive", k + 1, b[k])));
        }
        if let Some(k) = (0..n).find(|&k| c.row(k).iter().all(|&v| v == T::zero())) {
            return Err(Error::Domain(format!("row {} of C is zero", k + 1)));
        }
        if let Some(i) = (0..l).find(|&i| (0..n).all(|k| c[(k, i)] == T::zero())) {
            return Err(Error::ZeroColumn { column: i + 1 });
        }
        Ok(Self { c, b })
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.c
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    /// `‖b − Cz‖²`
    pub fn excess(&self, z: &[T]) -> T {
        self.c.mul_vec(z).iter().zip(&self.b).map(|(&u, &b)| (b - u) * (b - u)).sum()
    }

    fn eq_band(&self, k: usize, tol: T) -> T {
        tol * self.b[k].max(T::one())
    }

    /// Rows with `b_k − (Cz)_k ≤ tol·max(1, b_k)`.
    pub fn equality_rows(&self, z: &[T], tol: T) -> Vec<usize> {
        let u = self.c.mul_vec(z);
        (0..self.b.len()).filter(|&k| self.b[k] - u[k] <= self.eq_band(k, tol)).collect()
    }
}

/// A point of the unit simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexPoint<T>(Vec<T>);

impl<T: Scalar> SimplexPoint<T> {
    /// Accepts nonnegative weights summing to one within `1e-9`, then rescales
    /// them to sum to one exactly.
    pub fn new(alpha: Vec<T>) -> Result<Self> {
        if alpha.is_empty() || alpha.iter().any(|&a| !(a >= T::zero()) || !a.is_finite()) {
            return Err(Error::Domain("simplex weights must be finite and nonnegative".into()));
        }
        let s: T = alpha.iter().copied().sum();
        if (s - T::one()).abs() > T::attainable(1e-9, 64.0) {
            return Err(Error::Domain(format!("simplex weights sum to {s}")));
        }
        Ok(Self(alpha.into_iter().map(|a| a / s).collect()))
    }

    /// Nonnegative weights rescaled onto the simplex.
    pub fn from_weights(w: &[T]) -> Result<Self> {
        let s: T = w.iter().copied().sum();
        if !(s > T::zero()) {
            return Err(Error::Domain("weights vanish".into()));
        }
        Self::new(w.iter().map(|&v| v / s).collect())
    }

    pub fn vertex(l: usize, j: usize) -> Self {
        Self((0..l).map(|i| if i == j { T::one() } else { T::zero() }).collect())
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionFamily<T> {
    pub d: Vec<T>,
    pub alpha: SimplexPoint<T>,
    /// `c(α) ≥ 1`
    pub c_alpha: T,
    /// `c(α)·(α ∘ d)`
    pub z: Vec<T>,
}

/// `d_i = min_{k: c_ki > 0} b_k / c_ki`
pub fn ray_bounds<T: Scalar>(problem: &ClearingProblem<T>) -> Result<Vec<T>> {
    let c = problem.matrix();
    (0..c.cols())
        .map(|i| {
            (0..c.rows())
                .filter(|&k| c[(k, i)] > T::zero())
                .map(|k| problem.b[k] / c[(k, i)])
                .reduce(T::min)
                .ok_or(Error::ZeroColumn { column: i + 1 })
        })
        .collect()
}

/// `c(α) = min_k b_k / [Σ_i α_i d_i c_i]_k` over rows whose denominator
/// exceeds `1e-12·max_k b_k`.
pub fn scale_function<T: Scalar>(problem: &ClearingProblem<T>, alpha: &SimplexPoint<T>) -> Result<T> {
    let d = ray_bounds(problem)?;
    scale_with_bounds(problem, &d, alpha)
}

fn scale_with_bounds<T: Scalar>(problem: &ClearingProblem<T>, d: &[T], alpha: &SimplexPoint<T>) -> Result<T> {
    if alpha.values().len() != d.len() {
        return Err(Error::Dimension(format!("α has length {}, expected {}", alpha.values().len(), d.len())));
    }
    let ray: Vec<T> = alpha.values().iter().zip(d).map(|(&a, &di)| a * di).collect();
    let denom = problem.c.mul_vec(&ray);
    let eps = T::lit(1e-12) * norm_inf(&problem.b);
    Ok(denom
        .iter()
        .zip(&problem.b)
        .filter(|(&q, _)| q > eps)
        .map(|(&q, &b)| b / q)
        .fold(T::infinity(), T::min))
}

/// The solution on the ray through `α ∘ d`.
pub fn solution_from_alpha<T: Scalar>(problem: &ClearingProblem<T>, alpha: &SimplexPoint<T>) -> Result<SolutionFamily<T>> {
    let d = ray_bounds(problem)?;
    let c_alpha = scale_with_bounds(problem, &d, alpha)?;
    let z = alpha.values().iter().zip(&d).map(|(&a, &di)| c_alpha * a * di).collect();
    Ok(SolutionFamily { d, alpha: alpha.clone(), c_alpha, z })
}

/// Inverts [`solution_from_alpha`]: `α_i ∝ z_i / d_i` and `c(α) = Σ z_j / d_j`.
pub fn alpha_from_solution<T: Scalar>(problem: &ClearingProblem<T>, z: &[T], tol: T) -> Result<SolutionFamily<T>> {
    let d = ray_bounds(problem)?;
    if z.len() != d.len() {
        return Err(Error::Dimension(format!("z has length {}, expected {}", z.len(), d.len())));
    }
    if z.iter().any(|&v| !(v >= T::zero())) || z.iter().all(|&v| v == T::zero()) {
        return Err(Error::NotASolution("z must be nonnegative and nonzero".into()));
    }
    let u = problem.c.mul_vec(z);
    if let Some(k) = (0..u.len()).find(|&k| u[k] - problem.b[k] > problem.eq_band(k, tol)) {
        return Err(Error::NotASolution(format!("row {} exceeds its bound", k + 1)));
    }
    if problem.equality_rows(z, tol).is_empty() {
        return Err(Error::NotASolution("no row holds with equality".into()));
    }
    let w: Vec<T> = z.iter().zip(&d).map(|(&zi, &di)| zi / di).collect();
    let c_alpha: T = w.iter().copied().sum();
    let alpha = SimplexPoint(w.into_iter().map(|v| v / c_alpha).collect());
    Ok(SolutionFamily { d, alpha, c_alpha, z: z.to_vec() })
}

#[derive(Clone, Debug)]
pub struct QpConfig<T> {
    /// Bound on the scaled KKT residual of the returned point.
    pub tol: T,
    /// Relative weight of the `½ε‖z‖²` term that selects the minimum-norm optimum.
    pub ridge: T,
    /// Active-set iteration cap; `None` uses `50·(n + l) + 100`.
    pub max_iter: Option<usize>,
    pub equality_tol: T,
}

impl<T: Scalar> Default for QpConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::attainable(1e-10, 4096.0),
            ridge: T::lit(1e-12),
            max_iter: None,
            equality_tol: T::attainable(DEFAULT_EQUALITY_TOL, 4096.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinExcessSolution<T> {
    pub z: Vec<T>,
    /// `‖b − Cz‖²`
    pub objective: T,
    /// The family point through `z`.
    pub family: SolutionFamily<T>,
    /// `‖b − C z(α)‖²` at that family point; equals `objective` whenever the
    /// optimum touches a bound row.
    pub family_objective: T,
    pub kkt_residual: T,
    /// `b` lies in the cone of the columns of `C`, so `Cz = b`.
    pub full_clearing: bool,
    pub iterations: usize,
}

/// Working set of the active-set method: `z_i = 0` for `bound[i]`,
/// `(Cz)_k = b_k` for `upper[k]`.
struct WorkingSet {
    bound: Vec<bool>,
    upper: Vec<bool>,
}

impl WorkingSet {
    fn free(&self) -> Vec<usize> {
        (0..self.bound.len()).filter(|&i| !self.bound[i]).collect()
    }

    fn active_rows(&self) -> Vec<usize> {
        (0..self.upper.len()).filter(|&k| self.upper[k]).collect()
    }
}

/// Minimizer of `½‖Cz − b‖² + ½ε‖z‖²` subject to the working set held as
/// equalities, by the null-space method.
fn subproblem<T: Scalar>(c: &Matrix<T>, b: &[T], ws: &WorkingSet, ridge: T) -> Vec<T> {
    let (n, l) = (c.rows(), c.cols());
    let free = ws.free();
    let rows = ws.active_rows();
    let mut z = vec![T::zero(); l];
    if free.is_empty() {
        return z;
    }
    let all: Vec<usize> = (0..n).collect();
    let cf = c.select(&all, &free);
    let f = free.len();

    let (z0, basis) = if rows.is_empty() {
        (vec![T::zero(); f], Matrix::identity(f))
    } else {
        let ckf = c.select(&rows, &free);
        let svd = Svd::new(&ckf);
        let bk: Vec<T> = rows.iter().map(|&k| b[k]).collect();
        let z0 = svd.solve(&bk, None);
        let null = svd.null_space(None);
        let basis = Matrix::from_fn(f, null.len(), |i, j| null[j][i]);
        (z0, basis)
    };
    let r = basis.cols();
    let mut zf = z0.clone();
    if r > 0 {
        let cn = cf.matmul(&basis);
        let sq = ridge.sqrt();
        let extra = if ridge > T::zero() { r } else { 0 };
        let m = Matrix::from_fn(n + extra, r, |i, j| {
            if i < n {
                cn[(i, j)]
            } else if i - n == j {
                sq
            } else {
                T::zero()
            }
        });
        let cz0 = cf.mul_vec(&z0);
        let mut rhs: Vec<T> = (0..n).map(|k| b[k] - cz0[k]).collect();
        rhs.resize(n + extra, T::zero());
        let t = lstsq(&m, &rhs);
        let nt = basis.mul_vec(&t);
        for (v, d) in zf.iter_mut().zip(nt) {
            *v = *v + d;
        }
    }
    for (&i, v) in free.iter().zip(zf) {
        z[i] = v;
    }
    z
}

struct Multipliers<T> {
    /// Row multipliers, aligned with `active_rows()`.
    rows: Vec<T>,
    /// Bound multipliers, aligned with the bound indices.
    bounds: Vec<(usize, T)>,
    stationarity: T,
}

fn multipliers<T: Scalar>(c: &Matrix<T>, b: &[T], z: &[T], ws: &WorkingSet, ridge: T) -> Multipliers<T> {
    let n = c.rows();
    let u = c.mul_vec(z);
    let r: Vec<T> = (0..n).map(|k| u[k] - b[k]).collect();
    let grad: Vec<T> = c.tr_mul_vec(&r).into_iter().zip(z).map(|(g, &zi)| g + ridge * zi).collect();
    let free = ws.free();
    let rows = ws.active_rows();
    let mu = if rows.is_empty() || free.is_empty() {
        vec![T::zero(); rows.len()]
    } else {
        // C_KFᵀ μ = −∇f_F
        let m = Matrix::from_fn(free.len(), rows.len(), |i, j| c[(rows[j], free[i])]);
        let rhs: Vec<T> = free.iter().map(|&i| -grad[i]).collect();
        lstsq(&m, &rhs)
    };
    let through = |i: usize| -> T { grad[i] + rows.iter().zip(&mu).map(|(&k, &m)| m * c[(k, i)]).sum::<T>() };
    let stationarity = free.iter().fold(T::zero(), |acc, &i| acc.max(through(i).abs()));
    let bounds = (0..z.len()).filter(|&i| ws.bound[i]).map(|i| (i, through(i))).collect();
    Multipliers { rows: mu, bounds, stationarity }
}

enum Blocking {
    Bound(usize),
    Row(usize),
}

fn active_set<T: Scalar>(problem: &ClearingProblem<T>, cfg: &QpConfig<T>, ridge: T, dual_tol: T) -> Result<(Vec<T>, WorkingSet, usize)> {
    let c = &problem.c;
    let b = &problem.b;
    let (n, l) = (c.rows(), c.cols());
    let max_iter = cfg.max_iter.unwrap_or(50 * (n + l) + 100);
    let tiny = T::epsilon() * T::lit(16.0);
    let mut z = vec![T::zero(); l];
    let mut ws = WorkingSet { bound: vec![true; l], upper: vec![false; n] };

    for iter in 0..max_iter {
        let target = subproblem(c, b, &ws, ridge);
        let s: Vec<T> = target.iter().zip(&z).map(|(&t, &zi)| t - zi).collect();
        if norm_inf(&s) <= tiny * (T::one() + norm_inf(&z)) {
            let mult = multipliers(c, b, &z, &ws, ridge);
            let rows = ws.active_rows();
            let worst_row = rows.iter().zip(&mult.rows).map(|(&k, &m)| (Blocking::Row(k), m));
            let worst_bound = mult.bounds.iter().map(|&(i, m)| (Blocking::Bound(i), m));
            let worst = worst_bound.chain(worst_row).filter(|(_, m)| *m < -dual_tol).fold(None, |acc: Option<(Blocking, T)>, cand| match acc {
                Some(ref a) if a.1 <= cand.1 => acc,
                _ => Some(cand),
            });
            match worst {
                None => return Ok((z, ws, iter)),
                Some((Blocking::Bound(i), _)) => ws.bound[i] = false,
                Some((Blocking::Row(k), _)) => ws.upper[k] = false,
            }
            continue;
        }

        let mut step = T::one();
        let mut block = None;
        for i in 0..l {
            if !ws.bound[i] && s[i] < T::zero() {
                let r = z[i].max(T::zero()) / -s[i];
                if r < step {
                    step = r;
                    block = Some(Blocking::Bound(i));
                }
            }
        }
        let cs = c.mul_vec(&s);
        let cz = c.mul_vec(&z);
        for k in 0..n {
            if !ws.upper[k] && cs[k] > T::zero() {
                let r = (b[k] - cz[k]).max(T::zero()) / cs[k];
                if r < step {
                    step = r;
                    block = Some(Blocking::Row(k));
                }
            }
        }
        match block {
            None => z = target,
            Some(blk) => {
                for (zi, &si) in z.iter_mut().zip(&s) {
                    *zi = *zi + step * si;
                }
                match blk {
                    Blocking::Bound(i) => {
                        ws.bound[i] = true;
                        z[i] = T::zero();
                    }
                    Blocking::Row(k) => ws.upper[k] = true,
                }
            }
        }
    }
    Err(Error::Convergence { what: "minimal excess active set", iterations: max_iter })
}

fn kkt_residual<T: Scalar>(problem: &ClearingProblem<T>, z: &[T], ws: &WorkingSet) -> T {
    let c = &problem.c;
    let b = &problem.b;
    let mult = multipliers(c, b, z, ws, T::zero());
    let gscale = norm_inf(&c.tr_mul_vec(b)).max(T::one());
    let bscale = norm_inf(b).max(T::one());
    let u = c.mul_vec(z);
    let mut res = mult.stationarity / gscale;
    for (&k, &m) in ws.active_rows().iter().zip(&mult.rows) {
        res = res.max((-m).max(T::zero()) / gscale);
        res = res.max((m * (b[k] - u[k])).abs() / (gscale * bscale));
    }
    for &(_, m) in &mult.bounds {
        res = res.max((-m).max(T::zero()) / gscale);
    }
    for &zi in z {
        res = res.max((-zi).max(T::zero()) / bscale);
    }
    for k in 0..b.len() {
        res = res.max((u[k] - b[k]).max(T::zero()) / bscale);
    }
    res
}

/// Least-excess solution of `Cz ≤ b, z ≥ 0`.
///
/// An exact nonnegative solve of `Cz = b` is tried first; when it succeeds
/// the result is flagged as full clearing. Otherwise a primal active-set
/// method minimizes `½‖Cz − b‖² + ½ε‖z‖²` from `z = 0`, and the result is
/// re-solved on the final working set without the ridge term, which picks
/// the minimum-norm point among tied optima.
pub fn min_excess_solution<T: Scalar>(problem: &ClearingProblem<T>, cfg: &QpConfig<T>) -> Result<MinExcessSolution<T>> {
    let c = &problem.c;
    let b = &problem.b;
    let bnorm = norm_inf(b);

    let exact = nnls(c, b)?;
    if exact.residual <= cfg.tol * bnorm.max(T::one()) {
        let family = alpha_from_solution(problem, &exact.x, cfg.equality_tol)?;
        let objective = problem.excess(&exact.x);
        return Ok(MinExcessSolution {
            family_objective: problem.excess(&family.z),
            family,
            objective,
            kkt_residual: T::zero(),
            full_clearing: true,
            iterations: 0,
            z: exact.x,
        });
    }

    let col_scale = (0..c.cols())
        .map(|i| (0..c.rows()).map(|k| c[(k, i)] * c[(k, i)]).sum::<T>())
        .fold(T::one(), T::max);
    let ridge = cfg.ridge * col_scale;
    // Well below the ridge's pull on tied optima, well above rounding noise.
    let dual_tol = T::epsilon() * T::lit(16.0) * norm_inf(&c.tr_mul_vec(b)).max(T::one());
    let (mut z, ws, iterations) = active_set(problem, cfg, ridge, dual_tol)?;

    let polished = subproblem(c, b, &ws, T::zero());
    let feas = cfg.tol * bnorm.max(T::one());
    let u = c.mul_vec(&polished);
    let feasible = polished.iter().all(|&v| v >= -feas) && u.iter().zip(b).all(|(&uk, &bk)| uk <= bk + feas);
    if feasible && problem.excess(&polished) <= problem.excess(&z) + feas * feas {
        z = polished.into_iter().map(|v| v.max(T::zero())).collect();
    }
    let kkt = kkt_residual(problem, &z, &ws);
    if !(kkt <= cfg.tol) {
        return Err(Error::Convergence { what: "minimal excess optimality certificate", iterations });
    }

    let objective = problem.excess(&z);
    let family = match alpha_from_solution(problem, &z, cfg.equality_tol) {
        Ok(f) => f,
        Err(_) => solution_from_alpha(problem, &SimplexPoint::from_weights(&ray_weights(problem, &z)?)?)?,
    };
    Ok(MinExcessSolution {
        family_objective: problem.excess(&family.z),
        family,
        objective,
        kkt_residual: kkt,
        full_clearing: false,
        iterations,
        z,
    })
}

fn ray_weights<T: Scalar>(problem: &ClearingProblem<T>, z: &[T]) -> Result<Vec<T>> {
    Ok(z.iter().zip(ray_bounds(problem)?).map(|(&zi, di)| zi / di).collect())
}

#[derive(Clone, Debug)]
pub struct ClearingConfig<T> {
    pub equality_tol: T,
    pub solver: SolverConfig<T>,
}

impl<T: Scalar> Default for ClearingConfig<T> {
    fn default() -> Self {
        Self { equality_tol: T::attainable(DEFAULT_EQUALITY_TOL, 4096.0), solver: SolverConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClearingEquilibrium<T> {
    pub z: Vec<T>,
    /// Industries whose market clears (0-based).
    pub i_set: Vec<usize>,
    /// Industries left with unsold output (0-based); their prices are zero.
    pub j_set: Vec<usize>,
    /// Real consumption `Az`.
    pub b_bar: Vec<T>,
    pub p: PriceVector<T>,
    /// `p` on the clearing industries, cost price `Σ_{s∈I} a_si p_s` elsewhere.
    pub p_u: Vec<T>,
    /// `⟨b − b̄, p_u⟩ / ⟨b, p_u⟩`
    pub excess_supply: T,
}

fn check_square_problem<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<()> {
    if !a.is_square() || b.len() != a.rows() || a.rows() == 0 {
        return Err(Error::Dimension(format!("A is {}x{}, b has length {}", a.rows(), a.cols(), b.len())));
    }
    if a.as_slice().iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
        return Err(Error::Domain("A must be finite and nonnegative".into()));
    }
    if let Some(k) = b.iter().position(|&v| !(v > T::zero() && v.is_finite())) {
        return Err(Error::Domain(format!("b_{} = {} must be positive", k + 1, b[k])));
    }
    Ok(())
}

/// Equilibrium prices for a solution `z` of `Az ≤ b`.
///
/// Rows within `equality_tol·max(1, b_k)` of their bound form `I`. Prices on
/// `I` solve the price balance for `A[I,I]` and `z_I`; prices on `J` are zero.
/// The assembled vector is checked against the full system with the original
/// `b`; a mismatch means `z` is not a clearing solution.
pub fn equilibrium_from_solution<T: Scalar>(a: &Matrix<T>, b: &[T], z: &[T], cfg: &ClearingConfig<T>) -> Result<ClearingEquilibrium<T>> {
    check_square_problem(a, b)?;
    let n = a.rows();
    if z.len() != n {
        return Err(Error::Dimension(format!("z has length {}, expected {n}", z.len())));
    }
    if z.iter().any(|&v| !(v >= T::zero())) {
        return Err(Error::Domain("z must be nonnegative".into()));
    }
    let tol = cfg.equality_tol;
    let b_bar = a.mul_vec(z);
    if let Some(k) = (0..n).find(|&k| b_bar[k] - b[k] > tol * b[k].max(T::one())) {
        return Err(Error::NoEquilibrium(format!("(Az)_{} exceeds b_{}", k + 1, k + 1)));
    }
    let (i_set, j_set): (Vec<usize>, Vec<usize>) = (0..n).partition(|&k| b[k] - b_bar[k] <= tol * b[k].max(T::one()));
    if i_set.is_empty() {
        return Err(Error::DegenerateSupport);
    }
    if let Some(&j) = j_set.iter().find(|&&j| z[j] > T::zero()) {
        return Err(Error::NoEquilibrium(format!(
            "z_{} > 0 but row {} is strict; z must vanish off the equality rows",
            j + 1,
            j + 1
        )));
    }

    let a_ii = a.select(&i_set, &i_set);
    let z_i: Vec<T> = i_set.iter().map(|&k| z[k]).collect();
    let solver = SolverConfig {
        require_positive: is_irreducible(&a_ii) && z_i.iter().all(|&v| v > T::zero()),
        normalization: Normalization::SumToOne,
        ..cfg.solver.clone()
    };
    let restricted = solve_price_balance(&a_ii, &z_i, &solver)
        .map_err(|e| Error::NoEquilibrium(format!("restricted price balance failed: {e}")))?;
    let mut full = vec![T::zero(); n];
    for (&k, &v) in i_set.iter().zip(restricted.values()) {
        full[k] = v;
    }
    let p = PriceVector::from_parts(full, Normalization::SumToOne, restricted.diagnostics().cloned());
    let p = p.normalized(cfg.solver.normalization).unwrap_or(p);

    let candidate = assemble(a, b, z.to_vec(), i_set, j_set, b_bar, p);
    let verdict = verify_partial_clearing(a, b, &candidate, tol)?;
    if !verdict.holds {
        let k = verdict.rows.iter().find(|r| r.observed != Some(r.expected)).map_or(0, |r| r.industry + 1);
        return Err(Error::NoEquilibrium(format!("assembled prices fail the clearing system at industry {k}")));
    }
    Ok(candidate)
}

fn assemble<T: Scalar>(
    a: &Matrix<T>,
    b: &[T],
    z: Vec<T>,
    i_set: Vec<usize>,
    j_set: Vec<usize>,
    b_bar: Vec<T>,
    p: PriceVector<T>,
) -> ClearingEquilibrium<T> {
    let pv = p.values();
    let mut p_u = pv.to_vec();
    for &j in &j_set {
        p_u[j] = i_set.iter().map(|&s| a[(s, j)] * pv[s]).sum();
    }
    // Rows in I clear by construction; only J contributes unsold output.
    let mut unsold = vec![T::zero(); b.len()];
    for &j in &j_set {
        unsold[j] = b[j] - b_bar[j];
    }
    let excess_supply = dot(&unsold, &p_u) / dot(b, &p_u);
    ClearingEquilibrium { z, i_set, j_set, b_bar, p, p_u, excess_supply }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartialClearingRow<T> {
    pub industry: usize,
    /// `Σ_j a_kj b_j p_j / (Aᵀp)_j`
    pub demand: T,
    pub supply: T,
    /// `Cleared` on `I`, `Excess` on `J`.
    pub expected: ClearingStatus,
    /// `None` when demand exceeds supply.
    pub observed: Option<ClearingStatus>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartialClearingVerdict<T> {
    pub holds: bool,
    /// Every price on `J` is zero.
    pub zero_price_on_j: bool,
    pub rows: Vec<PartialClearingRow<T>>,
}

/// Re-evaluates the cost-share demand with the original `b` and checks that
/// equality rows are exactly `I`, strict rows exactly `J`, and prices vanish
/// on `J`.
pub fn verify_partial_clearing<T: Scalar>(a: &Matrix<T>, b: &[T], eq: &ClearingEquilibrium<T>, tol: T) -> Result<PartialClearingVerdict<T>> {
    check_square_problem(a, b)?;
    let n = a.rows();
    let p = eq.p.values();
    if p.len() != n {
        return Err(Error::Dimension("price vector and matrix differ in size".into()));
    }
    let zero_price_on_j = eq.j_set.iter().all(|&j| p[j] == T::zero());
    let demand = match cost_share_demand(a, b, p) {
        Ok(d) => d,
        Err(Error::DegenerateInput(_)) => {
            return Ok(PartialClearingVerdict { holds: false, zero_price_on_j, rows: Vec::new() });
        }
        Err(e) => return Err(e),
    };
    let mut expected = vec![ClearingStatus::Excess; n];
    for &i in &eq.i_set {
        expected[i] = ClearingStatus::Cleared;
    }
    let rows: Vec<PartialClearingRow<T>> = (0..n)
        .map(|k| {
            let band = tol * b[k].max(T::one());
            let observed = if demand[k] > b[k] + band {
                None
            } else if (demand[k] - b[k]).abs() <= band {
                Some(ClearingStatus::Cleared)
            } else {
                Some(ClearingStatus::Excess)
            };
            PartialClearingRow { industry: k, demand: demand[k], supply: b[k], expected: expected[k], observed }
        })
        .collect();
    let holds = zero_price_on_j && rows.iter().all(|r| r.observed == Some(r.expected));
    Ok(PartialClearingVerdict { holds, zero_price_on_j, rows })
}

/// How the clearing solution was chosen from the least-excess optimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupportChoice {
    /// The optimum itself is supported on its equality rows.
    Optimum,
    /// Another optimum with the same `Cz`, supported on the equality rows.
    EquivalentOptimum,
    /// The solution of `A[I,I] w = b_I` that is strict on the other rows; not
    /// an optimum of the excess.
    RestrictedSolve,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExcessAnalysis<T> {
    pub solution: MinExcessSolution<T>,
    pub support: SupportChoice,
    pub equilibrium: ClearingEquilibrium<T>,
}

/// Least-excess solution and its partial-clearing equilibrium.
///
/// Prices can only be built from a `z` that vanishes off its equality rows,
/// so a tied optimum with wider support is replaced by one that does.
pub fn min_excess_equilibrium<T: Scalar>(a: &Matrix<T>, b: &[T], qp: &QpConfig<T>, cfg: &ClearingConfig<T>) -> Result<ExcessAnalysis<T>> {
    check_square_problem(a, b)?;
    let problem = ClearingProblem::new(a.clone(), b.to_vec())?;
    let solution = min_excess_solution(&problem, qp)?;
    let n = a.rows();
    let i_set = problem.equality_rows(&solution.z, cfg.equality_tol);
    if i_set.is_empty() {
        return Err(Error::DegenerateSupport);
    }
    let inside = |z: &[T]| (0..n).all(|k| z[k] == T::zero() || i_set.contains(&k));

    let (z, support) = if inside(&solution.z) {
        (solution.z.clone(), SupportChoice::Optimum)
    } else {
        let gate = qp.tol * norm_inf(b).max(T::one());
        let all: Vec<usize> = (0..n).collect();
        let u = a.mul_vec(&solution.z);
        let same = nnls(&a.select(&all, &i_set), &u)?;
        if same.residual <= gate {
            (embed(n, &i_set, &same.x), SupportChoice::EquivalentOptimum)
        } else {
            let b_i: Vec<T> = i_set.iter().map(|&k| b[k]).collect();
            let w = nnls(&a.select(&i_set, &i_set), &b_i)?;
            let z = embed(n, &i_set, &w.x);
            let ok = w.residual <= gate && problem.equality_rows(&z, cfg.equality_tol) == i_set;
            if !ok {
                return Err(Error::NoEquilibrium("no clearing solution is supported on the equality rows".into()));
            }
            (z, SupportChoice::RestrictedSolve)
        }
    };
    let equilibrium = equilibrium_from_solution(a, b, &z, cfg)?;
    Ok(ExcessAnalysis { solution, support, equilibrium })
}

fn embed<T: Scalar>(n: usize, idx: &[usize], v: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    for (&k, &x) in idx.iter().zip(v) {
        out[k] = x;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn problem(rows: &[&[f64]], b: &[f64]) -> ClearingProblem<f64> {
        ClearingProblem::new(Matrix::from_rows(rows).unwrap(), b.to_vec()).unwrap()
    }

    fn collinear() -> ClearingProblem<f64> {
        problem(&[&[1.0, 2.0], &[2.0, 4.0]], &[1.0, 1.0])
    }

    fn column() -> ClearingProblem<f64> {
        problem(&[&[1.0], &[2.0]], &[1.0, 1.0])
    }

    fn simplex(v: &[f64]) -> SimplexPoint<f64> {
        SimplexPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn problem_validation() {
        let zero_col = ClearingProblem::new(Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0]]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(zero_col, Err(Error::ZeroColumn { column: 2 }));
        let zero_row = ClearingProblem::new(Matrix::from_rows(&[[1.0, 1.0], [0.0, 0.0]]).unwrap(), vec![1.0, 1.0]);
        assert!(matches!(zero_row, Err(Error::Domain(_))));
        let bad_b = ClearingProblem::new(Matrix::<f64>::identity(2), vec![1.0, 0.0]);
        assert!(matches!(bad_b, Err(Error::Domain(_))));
    }

    #[test]
    fn ray_bound_examples() {
        assert_eq!(ray_bounds(&column()).unwrap(), vec![0.5]);
        assert_eq!(ray_bounds(&collinear()).unwrap(), vec![0.5, 0.25]);
        let p = ClearingProblem::new(Matrix::identity(2), vec![3.0, 7.0]).unwrap();
        assert_eq!(ray_bounds(&p).unwrap(), vec![3.0, 7.0]);
    }

    #[test]
    fn scale_function_examples() {
        assert_eq!(scale_function(&column(), &simplex(&[1.0])).unwrap(), 1.0);
        assert_eq!(scale_function(&collinear(), &simplex(&[0.5, 0.5])).unwrap(), 1.0);
        let id = ClearingProblem::new(Matrix::identity(2), vec![1.0, 1.0]).unwrap();
        assert_eq!(scale_function(&id, &SimplexPoint::vertex(2, 0)).unwrap(), 1.0);
        assert_eq!(scale_function(&id, &simplex(&[0.5, 0.5])).unwrap(), 2.0);
    }

    #[test]
    fn solution_from_alpha_examples() {
        let f = solution_from_alpha(&collinear(), &simplex(&[0.5, 0.5])).unwrap();
        assert_eq!(f.z, vec![0.25, 0.125]);
        assert_eq!(collinear().matrix().mul_vec(&f.z), vec![0.5, 1.0]);
        assert_eq!(collinear().equality_rows(&f.z, 1e-9), vec![1]);

        let f = solution_from_alpha(&column(), &simplex(&[1.0])).unwrap();
        assert_eq!(f.z, vec![0.5]);

        let f = solution_from_alpha(&collinear(), &SimplexPoint::vertex(2, 1)).unwrap();
        assert_eq!(f.z, vec![0.0, 0.25]);
    }

    #[test]
    fn alpha_from_solution_examples() {
        let f = alpha_from_solution(&collinear(), &[0.25, 0.125], 1e-9).unwrap();
        assert_eq!(f.alpha.values(), &[0.5, 0.5]);
        assert_eq!(f.c_alpha, 1.0);
        let f = alpha_from_solution(&column(), &[0.5], 1e-9).unwrap();
        assert_eq!(f.alpha.values(), &[1.0]);
        assert!(matches!(alpha_from_solution(&collinear(), &[0.1, 0.1], 1e-9), Err(Error::NotASolution(_))));
        assert!(matches!(alpha_from_solution(&collinear(), &[1.0, 1.0], 1e-9), Err(Error::NotASolution(_))));
        assert!(matches!(alpha_from_solution(&collinear(), &[0.0, 0.0], 1e-9), Err(Error::NotASolution(_))));
    }

    #[test]
    fn simplex_validation() {
        assert!(SimplexPoint::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexPoint::new(vec![-0.5, 1.5]).is_err());
        assert!(SimplexPoint::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn qp_single_column() {
        let s = min_excess_solution(&column(), &QpConfig::default()).unwrap();
        assert!(!s.full_clearing);
        assert_abs_diff_eq!(s.z[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(s.family_objective, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn qp_collinear_min_norm() {
        let s = min_excess_solution(&collinear(), &QpConfig::default()).unwrap();
        assert_abs_diff_eq!(s.objective, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(s.z[0], 0.1, epsilon = 1e-10);
        assert_abs_diff_eq!(s.z[1], 0.2, epsilon = 1e-10);
    }

    #[test]
    fn qp_full_clearing() {
        let p = ClearingProblem::new(Matrix::identity(2), vec![1.0, 1.0]).unwrap();
        let s = min_excess_solution(&p, &QpConfig::default()).unwrap();
        assert!(s.full_clearing);
        assert_abs_diff_eq!(s.z[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.objective, 0.0, epsilon = 1e-20);
    }

    fn fixture() -> (Matrix<f64>, Vec<f64>) {
        (Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap(), vec![1.0, 1.0])
    }

    #[test]
    fn partial_clearing_fixture() {
        let (a, b) = fixture();
        let eq = equilibrium_from_solution(&a, &b, &[0.0, 0.25], &ClearingConfig::default()).unwrap();
        assert_eq!(eq.i_set, vec![1]);
        assert_eq!(eq.j_set, vec![0]);
        assert_eq!(eq.b_bar, vec![0.5, 1.0]);
        assert_eq!(eq.p.values(), &[0.0, 1.0]);
        assert_eq!(eq.p_u, vec![2.0, 1.0]);
        assert_abs_diff_eq!(eq.excess_supply, 1.0 / 3.0, epsilon = 1e-12);
        let v = verify_partial_clearing(&a, &b, &eq, 1e-9).unwrap();
        assert!(v.holds && v.zero_price_on_j);
    }

    #[test]
    fn perturbed_price_fails_verification() {
        let (a, b) = fixture();
        let mut eq = equilibrium_from_solution(&a, &b, &[0.0, 0.25], &ClearingConfig::default()).unwrap();
        eq.p = PriceVector::from_values(vec![0.1, 1.0]).unwrap();
        let v = verify_partial_clearing(&a, &b, &eq, 1e-9).unwrap();
        assert!(!v.holds);
        assert!(!v.zero_price_on_j);
    }

    #[test]
    fn scaled_prices_keep_the_verdict() {
        let (a, b) = fixture();
        let mut eq = equilibrium_from_solution(&a, &b, &[0.0, 0.25], &ClearingConfig::default()).unwrap();
        eq.p = PriceVector::from_values(vec![0.0, 7.5]).unwrap();
        assert!(verify_partial_clearing(&a, &b, &eq, 1e-9).unwrap().holds);
    }

    #[test]
    fn full_clearing_equilibrium() {
        let a = Matrix::from_rows(&[[0.0, 0.5], [0.5, 0.0]]).unwrap();
        let b = vec![1.0, 1.0];
        let eq = equilibrium_from_solution(&a, &b, &[2.0, 2.0], &ClearingConfig::default()).unwrap();
        assert_eq!(eq.i_set, vec![0, 1]);
        assert!(eq.j_set.is_empty());
        assert_eq!(eq.excess_supply, 0.0);
        assert_abs_diff_eq!(eq.p.values()[0], 0.5, epsilon = 1e-12);
        assert!(verify_partial_clearing(&a, &b, &eq, 1e-9).unwrap().holds);
    }

    #[test]
    fn empty_support() {
        let (a, b) = fixture();
        assert_eq!(equilibrium_from_solution(&a, &b, &[0.0, 0.0], &ClearingConfig::default()), Err(Error::DegenerateSupport));
    }

    #[test]
    fn support_off_the_equality_rows_is_rejected() {
        let (a, b) = fixture();
        let r = equilibrium_from_solution(&a, &b, &[0.1, 0.2], &ClearingConfig::default());
        assert!(matches!(r, Err(Error::NoEquilibrium(_))), "{r:?}");
    }

    #[test]
    fn infeasible_solution_is_rejected() {
        let (a, b) = fixture();
        let r = equilibrium_from_solution(&a, &b, &[0.0, 0.5], &ClearingConfig::default());
        assert!(matches!(r, Err(Error::NoEquilibrium(_))));
    }

    #[test]
    fn pipeline_moves_to_supported_optimum() {
        let (a, b) = fixture();
        let r = min_excess_equilibrium(&a, &b, &QpConfig::default(), &ClearingConfig::default()).unwrap();
        assert_eq!(r.support, SupportChoice::EquivalentOptimum);
        assert_abs_diff_eq!(r.equilibrium.z[1], 0.25, epsilon = 1e-10);
        assert_abs_diff_eq!(r.equilibrium.excess_supply, 1.0 / 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.solution.objective, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn f32_parametrization() {
        let p = ClearingProblem::new(Matrix::<f32>::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap(), vec![1.0, 1.0]).unwrap();
        let f = solution_from_alpha(&p, &SimplexPoint::new(vec![0.5, 0.5]).unwrap()).unwrap();
        assert_eq!(f.z, vec![0.25f32, 0.125]);
    }
}
