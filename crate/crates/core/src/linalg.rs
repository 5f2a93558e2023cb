//! Small dense complex routines for `k × k` systems, `k` = allowlist size.
//!
//! Matrices are row-major `Vec<Complex64>`.

use num_complex::Complex64;

/// Gram–Schmidt in the inner product defined by the Hermitian Gram matrix
/// `gram` (`k × k`). Returns `C` (`k × r`, row-major) with `Cᴴ·G·C = I_r`;
/// columns whose residual energy falls below `rel_tol` of their own energy
/// are dropped.
pub(crate) fn gram_orthonormal_coefficients(
    gram: &[Complex64],
    k: usize,
    rel_tol: f64,
) -> (Vec<Complex64>, usize) {
    let g = |i: usize, j: usize| gram[i * k + j];
    let g_apply = |v: &[Complex64]| -> Vec<Complex64> {
        (0..k)
            .map(|i| (0..k).map(|j| g(i, j) * v[j]).sum())
            .collect()
    };
    let inner = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        // aᴴ G b
        let gb = g_apply(b);
        a.iter().zip(&gb).map(|(x, y)| x.conj() * y).sum()
    };
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for j in 0..k {
        let own = g(j, j).re;
        if !(own > 0.0) {
            continue;
        }
        let mut v = vec![Complex64::default(); k];
        v[j] = Complex64::new(1.0, 0.0);
        // two passes keep the basis orthogonal to rounding
        for _ in 0..2 {
            for c in &basis {
                let proj = inner(c, &v);
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= proj * ci;
                }
            }
        }
        let n2 = inner(&v, &v).re;
        if n2 > rel_tol * own {
            let inv = 1.0 / n2.sqrt();
            basis.push(v.into_iter().map(|x| x * inv).collect());
        }
    }
    let r = basis.len();
    let mut c = vec![Complex64::default(); k * r];
    for (col, b) in basis.iter().enumerate() {
        for (row, v) in b.iter().enumerate() {
            c[row * r + col] = *v;
        }
    }
    (c, r)
}

/// Cholesky factor `L` (lower, row-major) of a Hermitian positive-definite
/// `n × n` matrix, or `None` if a pivot falls below `min_pivot`.
pub(crate) fn cholesky(a: &[Complex64], n: usize, min_pivot: f64) -> Option<Vec<Complex64>> {
    let mut l = vec![Complex64::default(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for p in 0..j {
                sum -= l[i * n + p] * l[j * n + p].conj();
            }
            if i == j {
                if !(sum.re > min_pivot) {
                    return None;
                }
                l[i * n + i] = Complex64::new(sum.re.sqrt(), 0.0);
            } else {
                l[i * n + j] = sum / l[j * n + j].re;
            }
        }
    }
    Some(l)
}

/// Cholesky factor of a Hermitian positive-semidefinite matrix. Pivots at or
/// below `rel_tol` times the largest diagonal entry zero their column, so
/// `L·z` with `z ~ CN(0, I)` has covariance `A` up to that tolerance.
pub(crate) fn psd_cholesky(a: &[Complex64], n: usize, rel_tol: f64) -> Vec<Complex64> {
    let scale = (0..n).map(|i| a[i * n + i].re).fold(0.0, f64::max);
    let floor = rel_tol * scale;
    let mut l = vec![Complex64::default(); n * n];
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for p in 0..j {
            d -= l[j * n + p].norm_sqr();
        }
        if !(d > floor) {
            continue;
        }
        let djj = d.sqrt();
        l[j * n + j] = Complex64::new(djj, 0.0);
        for i in j + 1..n {
            let mut sum = a[i * n + j];
            for p in 0..j {
                sum -= l[i * n + p] * l[j * n + p].conj();
            }
            l[i * n + j] = sum / djj;
        }
    }
    l
}

/// `bᴴ A⁻¹ b` given the Cholesky factor of `A`.
pub(crate) fn inverse_quadratic_form(l: &[Complex64], n: usize, b: &[Complex64]) -> f64 {
    // A = L Lᴴ, so bᴴA⁻¹b = ‖L⁻¹b‖²
    let mut y = vec![Complex64::default(); n];
    for i in 0..n {
        let mut s = b[i];
        for p in 0..i {
            s -= l[i * n + p] * y[p];
        }
        y[i] = s / l[i * n + i].re;
    }
    y.iter().map(|v| v.norm_sqr()).sum()
}
