//! Dense and matrix-free symmetric linear algebra: tridiagonal QL, Householder
//! reduction, Lanczos with full reorthogonalization, and conjugate gradients.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    // Pairwise blocks keep the rounding error of long sums small and the order fixed.
    const BLOCK: usize = 256;
    let mut total = T::zero();
    for (ca, cb) in a.chunks(BLOCK).zip(b.chunks(BLOCK)) {
        let mut s = T::zero();
        for (&x, &y) in ca.iter().zip(cb) {
            s += x * y;
        }
        total += s;
    }
    total
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale<T: Scalar>(alpha: T, x: &mut [T]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// Normalizes in place and returns the original norm.
pub fn normalize<T: Scalar>(x: &mut [T]) -> T {
    let nrm = norm(x);
    if nrm > T::zero() {
        scale(T::one() / nrm, x);
    }
    nrm
}

/// An eigenvalue with its unit eigenvector.
#[derive(Debug, Clone)]
pub struct EigenPair<T> {
    pub value: T,
    pub vector: Vec<T>,
}

/// Eigen-decomposition of a dense symmetric matrix stored row-major.
///
/// Returns eigenvalues in ascending order and the eigenvectors as columns of a
/// row-major `n x n` matrix (`vectors[row * n + col]`).
pub fn symmetric_eigen<T: Scalar>(matrix: &[T], n: usize) -> Result<(Vec<T>, Vec<T>)> {
    if matrix.len() != n * n {
        return Err(Error::input("matrix size does not match dimension"));
    }
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut a = matrix.to_vec();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    householder_tridiagonalize(&mut a, n, &mut d, &mut e);
    // e[i] couples i-1 and i; the QL routine wants e[i] coupling i and i+1.
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    tridiagonal_ql(&mut d, &mut e, Some(&mut a), n)?;
    sort_eigen(&mut d, Some(&mut a), n);
    Ok((d, a))
}

/// Eigenvalues only of a dense symmetric matrix, ascending.
pub fn symmetric_eigenvalues<T: Scalar>(matrix: &[T], n: usize) -> Result<Vec<T>> {
    symmetric_eigen(matrix, n).map(|(d, _)| d)
}

/// Eigen-decomposition of a symmetric tridiagonal matrix given its diagonal
/// and off-diagonal (`off[i]` couples `i` and `i + 1`).
pub fn tridiagonal_eigen<T: Scalar>(diag: &[T], off: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let n = diag.len();
    if off.len() + 1 != n && !(n == 0 && off.is_empty()) {
        return Err(Error::input("off-diagonal length must be n - 1"));
    }
    let mut d = diag.to_vec();
    let mut e = vec![T::zero(); n];
    e[..off.len()].copy_from_slice(off);
    let mut z = vec![T::zero(); n * n];
    for i in 0..n {
        z[i * n + i] = T::one();
    }
    tridiagonal_ql(&mut d, &mut e, Some(&mut z), n)?;
    sort_eigen(&mut d, Some(&mut z), n);
    Ok((d, z))
}

fn sort_eigen<T: Scalar>(d: &mut [T], z: Option<&mut Vec<T>>, n: usize) {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap_or(std::cmp::Ordering::Equal));
    let sorted: Vec<T> = order.iter().map(|&i| d[i]).collect();
    d.copy_from_slice(&sorted);
    if let Some(z) = z {
        let old = z.clone();
        for (new_col, &old_col) in order.iter().enumerate() {
            for row in 0..n {
                z[row * n + new_col] = old[row * n + old_col];
            }
        }
    }
}

/// Householder reduction of a symmetric matrix to tridiagonal form.
/// On exit `a` holds the orthogonal transformation, `d` the diagonal and
/// `e[i]` the sub-diagonal element between `i - 1` and `i` (`e[0] = 0`).
fn householder_tridiagonalize<T: Scalar>(a: &mut [T], n: usize, d: &mut [T], e: &mut [T]) {
    let idx = |r: usize, c: usize| r * n + c;
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = T::zero();
        if l > 0 {
            let mut scale_sum = T::zero();
            for k in 0..=l {
                scale_sum += a[idx(i, k)].abs();
            }
            if scale_sum == T::zero() {
                e[i] = a[idx(i, l)];
            } else {
                for k in 0..=l {
                    a[idx(i, k)] /= scale_sum;
                    h += a[idx(i, k)] * a[idx(i, k)];
                }
                let f = a[idx(i, l)];
                let g = if f >= T::zero() { -h.sqrt() } else { h.sqrt() };
                e[i] = scale_sum * g;
                h -= f * g;
                a[idx(i, l)] = f - g;
                let mut f_acc = T::zero();
                for j in 0..=l {
                    a[idx(j, i)] = a[idx(i, j)] / h;
                    let mut g_acc = T::zero();
                    for k in 0..=j {
                        g_acc += a[idx(j, k)] * a[idx(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g_acc += a[idx(k, j)] * a[idx(i, k)];
                    }
                    e[j] = g_acc / h;
                    f_acc += e[j] * a[idx(i, j)];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = a[idx(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let upd = f * e[k] + g * a[idx(i, k)];
                        a[idx(j, k)] -= upd;
                    }
                }
            }
        } else {
            e[i] = a[idx(i, l)];
        }
        d[i] = h;
    }
    d[0] = T::zero();
    e[0] = T::zero();
    for i in 0..n {
        if d[i] != T::zero() {
            for j in 0..i {
                let mut g = T::zero();
                for k in 0..i {
                    g += a[idx(i, k)] * a[idx(k, j)];
                }
                for k in 0..i {
                    let upd = g * a[idx(k, i)];
                    a[idx(k, j)] -= upd;
                }
            }
        }
        d[i] = a[idx(i, i)];
        a[idx(i, i)] = T::one();
        for j in 0..i {
            a[idx(j, i)] = T::zero();
            a[idx(i, j)] = T::zero();
        }
    }
}

/// Implicit QL iteration on a symmetric tridiagonal matrix. `e[i]` couples
/// `i` and `i + 1`; `e[n - 1]` is ignored. When `z` is given, the rotations are
/// accumulated into it (row-major, eigenvectors as columns).
fn tridiagonal_ql<T: Scalar>(
    d: &mut [T],
    e: &mut [T],
    mut z: Option<&mut Vec<T>>,
    n: usize,
) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = T::zero();
    let eps = T::epsilon();
    let two = T::lit(2.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::numerical(
                    "tridiagonal QL iteration did not converge",
                    e[l].as_f64(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            let signed_r = if g >= T::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + signed_r);
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        let f = z[k * n + i + 1];
                        z[k * n + i + 1] = s * z[k * n + i] + c * f;
                        z[k * n + i] = c * z[k * n + i] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

/// Settings for [`lanczos_lowest`].
#[derive(Debug, Clone)]
pub struct LanczosConfig<T> {
    /// Absolute residual target `||A v - lambda v||`.
    pub tol: T,
    /// Largest Krylov basis built before an explicit restart.
    pub max_krylov: usize,
    pub max_restarts: usize,
}

impl<T: Scalar> Default for LanczosConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::eigen_tol(),
            max_krylov: 300,
            max_restarts: 30,
        }
    }
}

/// Lowest `count` eigenpairs of the symmetric operator `apply` (acting on
/// vectors of length `start.len()`), by Lanczos with full reorthogonalization
/// and explicit restarts.
///
/// Eigenvalues are resolved as distinct values: a single Krylov sequence cannot
/// see multiplicities, so a degenerate level is returned once unless the
/// sequence exhausts an invariant subspace, in which case the iteration is
/// continued from a fresh vector orthogonal to everything built so far.
pub fn lanczos_lowest<T, F>(
    apply: F,
    start: &[T],
    count: usize,
    cfg: &LanczosConfig<T>,
) -> Result<Vec<EigenPair<T>>>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]),
{
    let dim = start.len();
    if dim == 0 || count == 0 {
        return Ok(Vec::new());
    }
    let count = count.min(dim);
    let mut v0 = start.to_vec();
    if normalize(&mut v0) == T::zero() {
        return Err(Error::input("Lanczos start vector is zero"));
    }
    let mut last_residual = f64::INFINITY;
    for _restart in 0..=cfg.max_restarts {
        let (pairs, converged, worst) = lanczos_cycle(&apply, &v0, count, cfg)?;
        last_residual = worst;
        if converged {
            return Ok(pairs);
        }
        // Restart from a combination of the current Ritz vectors, weighted
        // towards the ground state.
        let mut next = vec![T::zero(); dim];
        for (k, p) in pairs.iter().enumerate() {
            let w = T::one() / T::from_usize_lossy(k + 1);
            axpy(w, &p.vector, &mut next);
        }
        if normalize(&mut next) == T::zero() {
            break;
        }
        v0 = next;
    }
    Err(Error::numerical(
        "Lanczos did not converge within the restart budget",
        last_residual,
    ))
}

type CycleOutcome<T> = (Vec<EigenPair<T>>, bool, f64);

fn lanczos_cycle<T, F>(apply: &F, v0: &[T], count: usize, cfg: &LanczosConfig<T>) -> Result<CycleOutcome<T>>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]),
{
    let dim = v0.len();
    let kmax = cfg.max_krylov.max(count + 2).min(dim);
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(kmax);
    let mut alpha: Vec<T> = Vec::with_capacity(kmax);
    let mut beta: Vec<T> = Vec::with_capacity(kmax);
    basis.push(v0.to_vec());
    let mut w = vec![T::zero(); dim];
    let breakdown = T::epsilon().sqrt() * T::lit(1e-4);
    let mut fresh_seed = 0usize;

    loop {
        let j = basis.len() - 1;
        apply(&basis[j], &mut w);
        let a = dot(&basis[j], &w);
        alpha.push(a);
        // Full reorthogonalization, applied twice.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let b = norm(&w);
        let size = alpha.len();

        let exhausted = size >= dim;
        // On breakdown the Krylov space is invariant; keep going from a fresh
        // direction so that degenerate copies are not silently dropped.
        let check = exhausted || size >= kmax || (size >= count && b > breakdown && size.is_multiple_of(4));
        if check {
            let (theta, s) = tridiagonal_eigen(&alpha, &beta)?;
            let est_ok = (0..count.min(size)).all(|i| (b * s[(size - 1) * size + i]).abs() <= cfg.tol * T::lit(0.1));
            if (est_ok && size >= count) || size >= kmax || exhausted {
                let pairs = ritz_pairs(&basis, &theta, &s, count.min(size));
                let mut worst = 0.0f64;
                let mut res = vec![T::zero(); dim];
                for p in &pairs {
                    apply(&p.vector, &mut res);
                    axpy(-p.value, &p.vector, &mut res);
                    worst = worst.max(norm(&res).as_f64());
                }
                let converged = worst <= cfg.tol.as_f64() && pairs.len() == count;
                if converged || size >= kmax || exhausted {
                    return Ok((pairs, converged, worst));
                }
            }
        }
        if exhausted {
            unreachable!("exhausted Krylov space handled above");
        }

        if b <= breakdown {
            // Invariant subspace: continue from a fresh orthogonal direction so
            // that further (possibly degenerate) eigenvalues remain reachable.
            let mut fresh = vec![T::zero(); dim];
            let mut found = false;
            for _ in 0..dim {
                for (i, x) in fresh.iter_mut().enumerate() {
                    let t = ((i + 1 + fresh_seed * 7919) as f64 * 0.618_033_988_749_895).fract() - 0.5;
                    *x = T::lit(t);
                }
                fresh_seed += 1;
                for _ in 0..2 {
                    for q in &basis {
                        let c = dot(q, &fresh);
                        axpy(-c, q, &mut fresh);
                    }
                }
                if normalize(&mut fresh) > breakdown {
                    found = true;
                    break;
                }
            }
            if !found {
                let (theta, s) = tridiagonal_eigen(&alpha, &beta)?;
                let pairs = ritz_pairs(&basis, &theta, &s, count.min(size));
                return Ok((pairs, true, 0.0));
            }
            beta.push(T::zero());
            basis.push(fresh);
        } else {
            beta.push(b);
            let mut next = w.clone();
            scale(T::one() / b, &mut next);
            basis.push(next);
        }
        // Subtract the three-term recurrence for the next step lazily: the
        // full reorthogonalization above already removes all components.
    }
}

fn ritz_pairs<T: Scalar>(basis: &[Vec<T>], theta: &[T], s: &[T], count: usize) -> Vec<EigenPair<T>> {
    let size = theta.len();
    let dim = basis[0].len();
    (0..count)
        .map(|i| {
            let mut v = vec![T::zero(); dim];
            for (k, q) in basis.iter().take(size).enumerate() {
                axpy(s[k * size + i], q, &mut v);
            }
            normalize(&mut v);
            EigenPair { value: theta[i], vector: v }
        })
        .collect()
}

/// Conjugate gradients for a symmetric positive-definite operator.
///
/// Fails with a precondition error when non-positive curvature is met, which
/// is how callers detect that a shifted operator has become indefinite.
pub fn conjugate_gradient<T, F>(apply: F, rhs: &[T], tol: T, max_iter: usize) -> Result<Vec<T>>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]),
{
    let dim = rhs.len();
    let mut x = vec![T::zero(); dim];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![T::zero(); dim];
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= tol {
        return Ok(x);
    }
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= T::zero() {
            return Err(Error::precondition(
                "operator is not positive definite on the solve subspace",
            ));
        }
        let step = rr / pap;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol {
            // Confirm against the true residual.
            apply(&x, &mut ap);
            let mut true_r = rhs.to_vec();
            axpy(-T::one(), &ap, &mut true_r);
            if norm(&true_r) <= tol {
                return Ok(x);
            }
            r = true_r;
            let rr_true = dot(&r, &r);
            p = r.clone();
            rr = rr_true;
            continue;
        }
        let ratio = rr_new / rr;
        for (pi, &ri) in p.iter_mut().zip(&r) {
            *pi = ri + ratio * *pi;
        }
        rr = rr_new;
    }
    Err(Error::numerical(
        "conjugate gradients did not converge",
        rr.sqrt().as_f64(),
    ))
}
