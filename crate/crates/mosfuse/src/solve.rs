//! Dense symmetric positive-definite solves for the normal-equation fits.
//! Systems here are tiny (K+1 or D unknowns), so a plain Cholesky
//! factorization is enough and keeps results deterministic.

/// Solves `A x = b` for symmetric positive-definite `A` (row-major, n x n)
/// via Cholesky. Returns `None` when a pivot is not strictly positive.
pub(crate) fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    // lower-triangular factor L with A = L L^T
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    // forward substitution L y = b
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    // back substitution L^T x = y
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Some(x)
}

/// Solves `A x = b`, retrying once with `ridge` added to the diagonal when
/// the plain factorization fails.
pub(crate) fn solve_spd_with_ridge_fallback(
    a: &[f64],
    b: &[f64],
    n: usize,
    ridge: f64,
) -> Option<Vec<f64>> {
    if let Some(x) = solve_spd(a, b, n) {
        return Some(x);
    }
    let mut regularized = a.to_vec();
    for i in 0..n {
        regularized[i * n + i] += ridge;
    }
    solve_spd(&regularized, b, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_known_system() {
        // A = [[4,2],[2,3]], b = [10, 8] -> x = [1.75, 1.5]
        let a = [4.0, 2.0, 2.0, 3.0];
        let b = [10.0, 8.0];
        let x = solve_spd(&a, &b, 2).unwrap();
        assert!((x[0] - 1.75).abs() < 1e-12);
        assert!((x[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn residual_is_tiny_on_random_spd() {
        let mut rng = crate::rng::Rng::seed_from_u64(4);
        let n = 6;
        // A = M M^T + I is SPD
        let m: Vec<f64> = (0..n * n).map(|_| rng.range(-1.0, 1.0)).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    s += m[i * n + k] * m[j * n + k];
                }
                a[i * n + j] = s;
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.range(-2.0, 2.0)).collect();
        let x = solve_spd(&a, &b, n).unwrap();
        for i in 0..n {
            let mut r = -b[i];
            for j in 0..n {
                r += a[i * n + j] * x[j];
            }
            assert!(r.abs() < 1e-10, "row {i} residual {r}");
        }
    }

    #[test]
    fn singular_matrix_needs_ridge() {
        // rank-1 matrix
        let a = [1.0, 1.0, 1.0, 1.0];
        let b = [2.0, 2.0];
        assert!(solve_spd(&a, &b, 2).is_none());
        assert!(solve_spd_with_ridge_fallback(&a, &b, 2, 1e-8).is_some());
    }
}
