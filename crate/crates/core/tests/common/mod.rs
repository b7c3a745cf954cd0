//! Generators and independent reference computations shared by the
//! integration tests. Nothing here calls into the library's solvers.

#![allow(dead_code)]

use iotax::Matrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn to_matrix(a: &Dense) -> Matrix<f64> {
    Matrix::from_rows(a).unwrap()
}

pub fn mat_vec(a: &Dense, v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn tr_vec(a: &Dense, v: &[f64]) -> Vec<f64> {
    let n = a[0].len();
    (0..n).map(|j| a.iter().zip(v).map(|(row, vi)| row[j] * vi).sum()).collect()
}

pub fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Gauss–Jordan elimination with full row pivoting; `None` when singular.
pub fn gauss_solve(a: &Dense, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Dense = a.iter().zip(b).map(|(r, &bi)| r.iter().copied().chain([bi]).collect()).collect();
    let scale = a.iter().flatten().fold(0.0f64, |s, x| s.max(x.abs())).max(1e-300);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        m.swap(col, piv);
        let d = m[col][col];
        for x in m[col].iter_mut() {
            *x /= d;
        }
        for r in 0..n {
            if r != col && m[r][col] != 0.0 {
                let f = m[r][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some(m.iter().map(|r| r[n]).collect())
}

pub fn inverse(a: &Dense) -> Option<Dense> {
    let n = a.len();
    let cols: Option<Vec<Vec<f64>>> = (0..n)
        .map(|j| gauss_solve(a, &(0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect::<Vec<_>>()))
        .collect();
    let cols = cols?;
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect())
}

pub fn identity_minus(a: &Dense) -> Dense {
    a.iter()
        .enumerate()
        .map(|(i, r)| r.iter().enumerate().map(|(j, &v)| if i == j { 1.0 - v } else { -v }).collect())
        .collect()
}

/// Perron root by plain power iteration on `A + E` with a fixed large budget.
pub fn perron_root(a: &Dense) -> f64 {
    let n = a.len();
    let mut v = vec![1.0; n];
    let mut est = 0.0;
    for _ in 0..20_000 {
        let mut w = mat_vec(a, &v);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi += vi;
        }
        let s: f64 = w.iter().sum();
        let next = s / v.iter().sum::<f64>();
        v = w.iter().map(|x| x / s).collect();
        if (next - est).abs() < 1e-15 {
            est = next;
            break;
        }
        est = next;
    }
    est - 1.0
}

/// Strong connectivity by repeated boolean squaring of `E + A`.
pub fn strongly_connected(a: &Dense) -> bool {
    let n = a.len();
    let mut r: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j || a[i][j] > 0.0).collect()).collect();
    let mut len = 1;
    while len < n {
        r = (0..n).map(|i| (0..n).map(|j| (0..n).any(|k| r[i][k] && r[k][j])).collect()).collect();
        len *= 2;
    }
    r.iter().all(|row| row.iter().all(|&x| x))
}

/// Prices solving `y ∘ (Aᵀp) = p`, `Σp = 1` with `y = z / Az`, by replacing one
/// equation of the singular system with the normalization.
pub fn reference_prices(a: &Dense, z: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let az = mat_vec(a, z);
    let y: Vec<f64> = z.iter().zip(&az).map(|(zi, ai)| zi / ai).collect();
    let mut m: Dense = (0..n)
        .map(|k| (0..n).map(|s| y[k] * a[s][k] - if s == k { 1.0 } else { 0.0 }).collect())
        .collect();
    m[n - 1] = vec![1.0; n];
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    gauss_solve(&m, &rhs)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

/// Random nonnegative matrix with a Hamiltonian cycle (so irreducible),
/// scaled to the requested Perron root.
pub fn random_irreducible(rng: &mut ChaCha8Rng, n: usize, density: f64, rho: f64) -> Dense {
    let mut a: Dense = (0..n)
        .map(|_| (0..n).map(|_| if rng.gen_bool(density) { rng.gen_range(0.0..1.0) } else { 0.0 }).collect())
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    for k in 0..n {
        let (i, j) = (perm[k], perm[(k + 1) % n]);
        a[i][j] += rng.gen_range(0.1..1.0);
    }
    let r = perron_root(&a);
    for row in a.iter_mut() {
        for v in row.iter_mut() {
            *v *= rho / r;
        }
    }
    a
}

pub fn random_positive(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Uniform draw from the simplex, optionally forced onto a random face.
pub fn random_simplex(rng: &mut ChaCha8Rng, l: usize, face: bool) -> Vec<f64> {
    let mut w: Vec<f64> = (0..l).map(|_| -rng.gen_range(f64::EPSILON..1.0f64).ln()).collect();
    if face && l > 1 {
        let keep = rng.gen_range(0..l);
        for (i, wi) in w.iter_mut().enumerate() {
            if i != keep && rng.gen_bool(0.5) {
                *wi = 0.0;
            }
        }
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// `d_i = min_{k: c_ki > 0} b_k / c_ki`
pub fn reference_d(c: &Dense, b: &[f64]) -> Vec<f64> {
    let l = c[0].len();
    (0..l)
        .map(|i| {
            (0..c.len())
                .filter(|&k| c[k][i] > 0.0)
                .map(|k| b[k] / c[k][i])
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// `c(α)` straight from its defining minimum.
pub fn reference_scale(c: &Dense, b: &[f64], d: &[f64], alpha: &[f64]) -> f64 {
    let ray: Vec<f64> = alpha.iter().zip(d).map(|(a, d)| a * d).collect();
    let q = mat_vec(c, &ray);
    let eps = 1e-12 * sup(b);
    q.iter().zip(b).filter(|(q, _)| **q > eps).map(|(q, b)| b / q).fold(f64::INFINITY, f64::min)
}

pub fn excess(c: &Dense, b: &[f64], z: &[f64]) -> f64 {
    mat_vec(c, z).iter().zip(b).map(|(u, b)| (b - u) * (b - u)).sum()
}

/// `W(α) = ‖b − C z(α)‖²` on the solution family.
pub fn family_excess(c: &Dense, b: &[f64], d: &[f64], alpha: &[f64]) -> f64 {
    let s = reference_scale(c, b, d, alpha);
    let z: Vec<f64> = alpha.iter().zip(d).map(|(a, d)| s * a * d).collect();
    excess(c, b, &z)
}

/// Grid points of the simplex in `l ≤ 3` dimensions with the given step,
/// restricted to the box `center ± radius` (whole simplex when `radius ≥ 1`).
fn simplex_grid(l: usize, step: f64, center: &[f64], radius: f64, mut f: impl FnMut(&[f64])) {
    let lo = |i: usize| (center[i] - radius).max(0.0);
    let hi = |i: usize| (center[i] + radius).min(1.0);
    let count = |i: usize| ((hi(i) - lo(i)) / step).round() as usize;
    match l {
        1 => f(&[1.0]),
        2 => {
            for k in 0..=count(0) {
                let a = (lo(0) + k as f64 * step).min(1.0);
                f(&[a, 1.0 - a]);
            }
        }
        3 => {
            for i in 0..=count(0) {
                let a = (lo(0) + i as f64 * step).min(1.0);
                for j in 0..=count(1) {
                    let b = lo(1) + j as f64 * step;
                    let c = 1.0 - a - b;
                    if c >= -1e-15 && b <= 1.0 {
                        f(&[a, b, c.max(0.0)]);
                    }
                }
            }
        }
        _ => panic!("grid search supports l ≤ 3"),
    }
}

/// Minimum of `W(α)` over the simplex: a full grid at `step`, then grids
/// ten times finer around the best few points, repeated.
pub fn grid_family_minimum(c: &Dense, b: &[f64], step: f64) -> f64 {
    let l = c[0].len();
    let d = reference_d(c, b);
    let mut pts: Vec<(f64, Vec<f64>)> = Vec::new();
    simplex_grid(l, step, &vec![0.5; l], 2.0, |a| pts.push((family_excess(c, b, &d, a), a.to_vec())));
    let mut best = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let mut h = step;
    for _ in 0..4 {
        pts.sort_by(|x, y| x.0.total_cmp(&y.0));
        pts.truncate(8);
        let seeds: Vec<Vec<f64>> = pts.iter().map(|p| p.1.clone()).collect();
        let mut next = Vec::new();
        for s in &seeds {
            simplex_grid(l, h / 10.0, s, 2.0 * h, |a| next.push((family_excess(c, b, &d, a), a.to_vec())));
        }
        best = next.iter().map(|p| p.0).fold(best, f64::min);
        pts = next;
        h /= 10.0;
    }
    best
}

/// Minimum of the excess over a regular grid of the feasible box
/// `0 ≤ z_i ≤ d_i`, keeping only points with `Cz ≤ b`.
pub fn grid_box_minimum(c: &Dense, b: &[f64], per_axis: usize) -> f64 {
    let l = c[0].len();
    let d = reference_d(c, b);
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; l];
    loop {
        let z: Vec<f64> = idx.iter().zip(&d).map(|(&k, &di)| di * k as f64 / per_axis as f64).collect();
        if mat_vec(c, &z).iter().zip(b).all(|(u, b)| *u <= *b) {
            best = best.min(excess(c, b, &z));
        }
        let mut pos = 0;
        loop {
            if pos == l {
                return best;
            }
            idx[pos] += 1;
            if idx[pos] <= per_axis {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Random `C` (`n × l`, every row and column with a positive entry) and `b`
/// outside the cone of its columns, certified by a Farkas vector `y` with
/// `Cᵀy ≤ 0 < ⟨y, b⟩`.
pub fn outside_cone(r: &mut ChaCha8Rng, n: usize, l: usize) -> (Dense, Vec<f64>) {
    let pos = r.gen_range(0..n);
    let y: Vec<f64> = (0..n).map(|k| if k == pos { 1.0 } else { -r.gen_range(0.1..1.0) }).collect();
    let mut c: Dense = (0..n)
        .map(|_| (0..l).map(|_| if r.gen_bool(0.7) { r.gen_range(0.05..1.0) } else { 0.0 }).collect())
        .collect();
    for i in 0..l {
        if n > 1 {
            let k = (pos + 1 + r.gen_range(0..n - 1)) % n;
            c[k][i] = c[k][i].max(0.1);
        } else {
            c[0][i] = c[0][i].max(0.1);
        }
    }
    for row in c.iter_mut() {
        if row.iter().all(|&v| v == 0.0) {
            let i = r.gen_range(0..l);
            row[i] = 0.5;
        }
    }
    if n > 1 {
        for i in 0..l {
            let dot: f64 = (0..n).map(|k| y[k] * c[k][i]).sum();
            if dot > 0.0 {
                let neg: f64 = (0..n).filter(|&k| k != pos).map(|k| -y[k] * c[k][i]).sum();
                let f = (c[pos][i] * 1.1) / neg;
                for k in 0..n {
                    if k != pos {
                        c[k][i] *= f;
                    }
                }
            }
        }
    }
    let mut b = random_positive(r, n, 0.2, 2.0);
    let yb: f64 = y.iter().zip(&b).map(|(y, b)| y * b).sum();
    if yb <= 0.0 {
        b[pos] += 0.1 - yb;
    }
    (c, b)
}
