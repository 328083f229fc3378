//! Float helpers for a `no_std` build plus a small dense linear solver.

use alloc::vec;
use alloc::vec::Vec;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// `x ln x` with the convention `0 ln 0 = 0`.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * ln(x)
    }
}

/// `ln(Σ exp(v))`, `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + ln(values.iter().map(|v| exp(v - max)).sum::<f64>())
}

/// `ln(exp(a) + exp(b))`.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + libm::log1p(exp(lo - hi))
}

/// Solves `a x = b` for a square row-major `a` by Gaussian elimination with
/// partial pivoting. Returns `None` when the matrix is numerically singular.
pub fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i * n + col]
                .abs()
                .partial_cmp(&a[j * n + col].abs())
                .unwrap_or(core::cmp::Ordering::Equal)
        })?;
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            b.swap(pivot, col);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Some(x)
}

/// Stationary vector of a row-stochastic matrix, if it is unique.
pub fn stationary_vector(p: &[f64], n: usize) -> Option<Vec<f64>> {
    // (Pᵀ - I) π = 0 with the last equation replaced by Σ π = 1.
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = p[j * n + i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1) * n + j] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let pi = solve(a, b)?;
    if pi.iter().any(|&v| v < -1e-9) {
        return None;
    }
    Some(pi.into_iter().map(|v| v.max(0.0)).collect())
}

/// Dominant eigenpair of a nonnegative primitive matrix by power iteration on
/// `B + cI`, `c` the running estimate of the root. Returns `(λ, v)` with `v` positive and summing to one, or the best
/// residual when `max_iter` is exhausted.
pub fn perron_vector(
    b: &[f64],
    n: usize,
    transpose: bool,
    max_iter: usize,
) -> core::result::Result<(f64, Vec<f64>), f64> {
    let at = |i: usize, j: usize| {
        if transpose {
            b[j * n + i]
        } else {
            b[i * n + j]
        }
    };
    let mut v = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iter in 0..max_iter {
        // Iterate with B + cI, c the current root estimate: this keeps the
        // spectral gap when B is nearly periodic and its root is small.
        let mut total = 0.0;
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += at(i, j) * v[j];
            }
            next[i] = acc;
            total += acc;
        }
        let c = total / v.iter().sum::<f64>();
        for i in 0..n {
            next[i] += c * v[i];
        }
        let norm: f64 = next.iter().sum();
        for x in next.iter_mut() {
            *x /= norm;
        }
        let change = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        core::mem::swap(&mut v, &mut next);
        if change < 1e-16 || (iter > 50 && change < 1e-15) {
            let (lambda, res) = rayleigh(&at, &v, n);
            residual = res;
            if res <= 1e-12 * lambda.max(1.0) {
                return Ok((lambda, v));
            }
        }
    }
    let (lambda, res) = rayleigh(&at, &v, n);
    if res <= 1e-10 * lambda.max(1.0) {
        return Ok((lambda, v));
    }
    Err(residual.min(res))
}

fn rayleigh(at: &impl Fn(usize, usize) -> f64, v: &[f64], n: usize) -> (f64, f64) {
    let mut bv = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            bv[i] += at(i, j) * v[j];
        }
    }
    let lambda = bv.iter().sum::<f64>() / v.iter().sum::<f64>();
    let res = bv
        .iter()
        .zip(v)
        .map(|(x, y)| (x - lambda * y).abs() / y.max(1e-300))
        .fold(0.0, f64::max);
    (lambda, res * v.iter().copied().fold(0.0, f64::max))
}

/// Bisection for a sign change of `f` on `[lo, hi]`, where `f(lo)` and
/// `f(hi)` have opposite signs (`f(lo) > 0` is assumed, as for decreasing
/// functions). Returns the final bracket.
pub fn bisect(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    for _ in 0..max_iter {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let x = solve(vec![2.0, 1.0, 1.0, 3.0], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        assert!(solve(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn perron_of_golden_mean_matrix() {
        let (lambda, v) = perron_vector(&[1.0, 1.0, 1.0, 0.0], 2, false, 10_000).unwrap();
        let phi = (1.0 + sqrt(5.0)) / 2.0;
        assert!((lambda - phi).abs() < 1e-12);
        assert!((v[0] / v[1] - phi).abs() < 1e-10);
    }

    #[test]
    fn bisect_brackets_root() {
        let (lo, hi) = bisect(|x| 2.0 - x * x, 0.0, 2.0, 1e-12, 200);
        assert!(lo <= sqrt(2.0) && sqrt(2.0) <= hi && hi - lo <= 1e-12);
    }

    #[test]
    fn log_add_matches_direct() {
        assert!((log_add(ln(2.0), ln(3.0)) - ln(5.0)).abs() < 1e-15);
        assert_eq!(log_add(f64::NEG_INFINITY, 1.5), 1.5);
        assert!((log_sum_exp(&[0.0, 0.0, 0.0]) - ln(3.0)).abs() < 1e-15);
    }
}
