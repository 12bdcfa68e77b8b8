//! Dense factorizations backing the differentiable `qr_reduced` and
//! `spd_solve` primitives. Everything operates on row-major [`Tensor`]s.

use super::Tensor;
use crate::error::{Error, Result};

/// Relative threshold on `|r_jj|` below which a column counts as dependent.
pub const RANK_TOL: f64 = 1e-10;

/// Jitter ladder tried when the plain Cholesky factorization fails.
pub const JITTER_LADDER: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// Reduced QR of an `n×k` matrix (`n ≥ k`) by Householder reflections.
///
/// Returns `(q, r)` with `q` of shape `n×k` having orthonormal columns and
/// `r` upper triangular with a strictly positive diagonal.
pub fn householder_qr(a: &Tensor) -> Result<(Tensor, Tensor)> {
    let (n, k) = a.expect_matrix("qr_reduced")?;
    if n < k {
        return Err(Error::dim("qr_reduced", format!("need rows >= cols, got {n}x{k}")));
    }
    // Work column-major so each reflector touches contiguous memory.
    let mut w: Vec<f64> = vec![0.0; n * k];
    for i in 0..n {
        for j in 0..k {
            w[j * n + i] = a.get(i, j);
        }
    }
    let scale = (0..k)
        .map(|j| w[j * n..(j + 1) * n].iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::DegenerateBasis { column: 0 });
    }

    let mut betas = vec![0.0; k];
    let mut diag = vec![0.0; k];
    for j in 0..k {
        let tail = &mut w[j * n..];
        let col = &mut tail[..n];
        let norm = col[j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= RANK_TOL * scale {
            return Err(Error::DegenerateBasis { column: j });
        }
        let alpha = if col[j] > 0.0 { -norm } else { norm };
        // v = x - alpha e_j, stored in place of the column below the diagonal.
        col[j] -= alpha;
        let vnorm2: f64 = col[j..].iter().map(|v| v * v).sum();
        betas[j] = if vnorm2 > 0.0 { 2.0 / vnorm2 } else { 0.0 };
        diag[j] = alpha;
        // Apply the reflector to the remaining columns.
        let v: Vec<f64> = col[j..].to_vec();
        for c in (j + 1)..k {
            let other = &mut tail[(c - j) * n..(c - j) * n + n];
            let dot: f64 = v.iter().zip(&other[j..]).map(|(a, b)| a * b).sum();
            let s = betas[j] * dot;
            for (o, vi) in other[j..].iter_mut().zip(&v) {
                *o -= s * vi;
            }
        }
    }

    // R: diagonal from `diag`, strict upper part from the transformed columns.
    let mut r = Tensor::zeros(&[k, k]);
    for j in 0..k {
        r.set(j, j, diag[j]);
        for i in 0..j {
            r.set(i, j, w[j * n + i]);
        }
    }

    // Q = H_0 H_1 ... H_{k-1} [I_k; 0], accumulated backwards.
    let mut qcols: Vec<f64> = vec![0.0; n * k];
    for j in 0..k {
        qcols[j * n + j] = 1.0;
    }
    for j in (0..k).rev() {
        let v = &w[j * n + j..(j + 1) * n];
        for c in j..k {
            let col = &mut qcols[c * n..(c + 1) * n];
            let dot: f64 = v.iter().zip(&col[j..]).map(|(a, b)| a * b).sum();
            let s = betas[j] * dot;
            for (o, vi) in col[j..].iter_mut().zip(v) {
                *o -= s * vi;
            }
        }
    }

    // Sign convention: positive diag(r), flipping the matching q column.
    let mut q = Tensor::zeros(&[n, k]);
    for j in 0..k {
        let s = if r.get(j, j) < 0.0 { -1.0 } else { 1.0 };
        for c in j..k {
            let v = r.get(j, c);
            r.set(j, c, s * v);
        }
        for i in 0..n {
            q.set(i, j, s * qcols[j * n + i]);
        }
    }
    Ok((q, r))
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
/// Returns `None` when a pivot is not strictly positive.
pub fn cholesky(g: &Tensor) -> Option<Tensor> {
    let n = g.rows();
    let mut l = Tensor::zeros(&[n, n]);
    for j in 0..n {
        let mut d = g.get(j, j);
        for p in 0..j {
            d -= l.get(j, p) * l.get(j, p);
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l.set(j, j, djj);
        for i in (j + 1)..n {
            let mut s = g.get(i, j);
            for p in 0..j {
                s -= l.get(i, p) * l.get(j, p);
            }
            l.set(i, j, s / djj);
        }
    }
    Some(l)
}

/// Cholesky with the fixed jitter ladder. Returns the factor and the jitter
/// that was needed (0 when none).
pub fn cholesky_jittered(g: &Tensor) -> Result<(Tensor, f64)> {
    if let Some(l) = cholesky(g) {
        return Ok((l, 0.0));
    }
    let n = g.rows();
    for &eps in &JITTER_LADDER {
        let mut gj = g.clone();
        for i in 0..n {
            let v = gj.get(i, i);
            gj.set(i, i, v + eps);
        }
        if let Some(l) = cholesky(&gj) {
            return Ok((l, eps));
        }
    }
    Err(Error::SingularGram {
        max_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
    })
}

/// Solves `L Lᵀ X = B` for `X` given the lower Cholesky factor `L`.
/// Only the leading `k×k` block of `l` is used, so a factor of a larger
/// matrix solves every leading principal subsystem.
pub fn cholesky_solve_prefix(l: &Tensor, k: usize, b: &Tensor) -> Tensor {
    let m = b.cols();
    let mut x = b.clone();
    // Forward: L y = b.
    for i in 0..k {
        for p in 0..i {
            let lip = l.get(i, p);
            if lip != 0.0 {
                for c in 0..m {
                    let v = x.get(i, c) - lip * x.get(p, c);
                    x.set(i, c, v);
                }
            }
        }
        let d = l.get(i, i);
        for c in 0..m {
            let v = x.get(i, c) / d;
            x.set(i, c, v);
        }
    }
    // Backward: Lᵀ x = y.
    for i in (0..k).rev() {
        for p in (i + 1)..k {
            let lpi = l.get(p, i);
            if lpi != 0.0 {
                for c in 0..m {
                    let v = x.get(i, c) - lpi * x.get(p, c);
                    x.set(i, c, v);
                }
            }
        }
        let d = l.get(i, i);
        for c in 0..m {
            let v = x.get(i, c) / d;
            x.set(i, c, v);
        }
    }
    x
}

pub fn cholesky_solve(l: &Tensor, b: &Tensor) -> Tensor {
    cholesky_solve_prefix(l, l.rows(), b)
}

/// Solves `X Rᵀ = B` for `X` with `R` upper triangular (`X = B R⁻ᵀ`).
pub fn solve_right_upper_transposed(r: &Tensor, b: &Tensor) -> Tensor {
    // X Rᵀ = B  <=>  R Xᵀ = Bᵀ: back substitution on each row of B.
    let k = r.rows();
    let n = b.rows();
    let mut x = b.clone();
    for row in 0..n {
        for i in (0..k).rev() {
            let mut s = x.get(row, i);
            for p in (i + 1)..k {
                s -= r.get(i, p) * x.get(row, p);
            }
            x.set(row, i, s / r.get(i, i));
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_random(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        Tensor::from_fn(rows, cols, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn qr_of_identity_is_identity() {
        let (q, r) = householder_qr(&Tensor::identity(3)).unwrap();
        assert!(q.max_abs_diff(&Tensor::identity(3)) < 1e-15);
        assert!(r.max_abs_diff(&Tensor::identity(3)) < 1e-15);
    }

    #[test]
    fn qr_hand_gram_schmidt_case() {
        let a = Tensor::from_rows(&[&[3.0, 1.0], &[4.0, 2.0]]).unwrap();
        let (q, r) = householder_qr(&a).unwrap();
        assert!((q.get(0, 0) - 0.6).abs() < 1e-14);
        assert!((q.get(1, 0) - 0.8).abs() < 1e-14);
        assert!((r.get(0, 0) - 5.0).abs() < 1e-14);
        assert!(r.get(1, 1) > 0.0);
    }

    #[test]
    fn qr_reconstructs_and_is_orthonormal() {
        let a = pseudo_random(8, 4, 3);
        let (q, r) = householder_qr(&a).unwrap();
        assert!(q.matmul(&r).unwrap().max_abs_diff(&a) < 1e-10);
        assert!(q.tmatmul(&q).unwrap().max_abs_diff(&Tensor::identity(4)) < 1e-10);
        for i in 0..4 {
            assert!(r.get(i, i) > 0.0);
            for j in 0..i {
                assert_eq!(r.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn qr_reports_dependent_column() {
        let a = Tensor::from_fn(5, 3, |i, j| if j == 2 { 2.0 * i as f64 } else { (i * (j + 1)) as f64 + j as f64 });
        // column 2 = 2 * column 0 (column 0 is i, column 1 is 2i + 1)
        match householder_qr(&a) {
            Err(Error::DegenerateBasis { column }) => assert_eq!(column, 2),
            other => panic!("expected degenerate basis, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_prefix_solves_leading_blocks() {
        let a = pseudo_random(6, 6, 11);
        let mut g = a.tmatmul(&a).unwrap();
        for i in 0..6 {
            let v = g.get(i, i);
            g.set(i, i, v + 1.0);
        }
        let l = cholesky(&g).unwrap();
        let b = pseudo_random(6, 3, 5);
        for k in 1..=6 {
            let gk = g.slice_cols(0, k);
            let gk = Tensor::from_fn(k, k, |i, j| gk.get(i, j));
            let bk = Tensor::from_fn(k, 3, |i, j| b.get(i, j));
            let x = cholesky_solve_prefix(&l, k, &bk);
            let resid = gk.matmul(&x).unwrap();
            assert!(resid.max_abs_diff(&bk) < 1e-12);
        }
    }

    #[test]
    fn jitter_rescues_semidefinite_gram() {
        // Rank-one PSD matrix.
        let g = Tensor::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap();
        let (_, eps) = cholesky_jittered(&g).unwrap();
        assert!(eps > 0.0);
        let neg = Tensor::from_rows(&[&[-1.0, 0.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(cholesky_jittered(&neg), Err(Error::SingularGram { .. })));
    }
}
