use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use super::DiscreteOperator;
use crate::error::{Error, Result};
use crate::ndiff::Tensor;

/// Largest matrix the dense eigensolver accepts.
pub const MAX_DENSE_N: usize = 3000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orthonormality {
    /// `VᵀV = I`.
    Euclidean,
    /// `VᵀMV = I` for the operator's mass.
    Mass,
    /// Analytic samples normalized per column; orthogonal only up to
    /// quadrature error.
    Sampled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// `n × count`, one eigenvector per column.
    pub vectors: Tensor,
    pub orthonormality: Orthonormality,
}

impl EigenPairs {
    pub fn count(&self) -> usize {
        self.values.len()
    }
}

/// Both views of a generalized problem `S v = λ M v`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedEigens {
    /// Eigenvectors `q` of `M^{-1/2} S M^{-1/2}`.
    pub normalized: EigenPairs,
    /// `v = M^{-1/2} q`.
    pub unnormalized: EigenPairs,
}

pub(crate) fn to_dmatrix(t: &Tensor) -> DMatrix<f64> {
    DMatrix::from_row_slice(t.rows(), t.cols(), t.data())
}

pub(crate) fn from_dmatrix(m: &DMatrix<f64>) -> Tensor {
    Tensor::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Grid `x_i = i/(n−1)` with `φ_k = cos((k−1)πx)` and `λ_k = ((k−1)π)²`;
/// columns scaled to unit norm under the uniform mass `1/n`.
pub fn segment_analytic_eigens(n: usize, count: usize) -> Result<EigenPairs> {
    if n < 2 || count == 0 || count > n {
        return Err(Error::InvalidParam(format!("need 1 ≤ count ≤ n and n ≥ 2, got n={n}, count={count}")));
    }
    let mut v = Tensor::from_fn(n, count, |i, k| (k as f64 * PI * i as f64 / (n - 1) as f64).cos());
    for k in 0..count {
        let norm = ((0..n).map(|i| v.get(i, k).powi(2)).sum::<f64>() / n as f64).sqrt();
        for i in 0..n {
            v.set(i, k, v.get(i, k) / norm);
        }
    }
    Ok(EigenPairs {
        values: (0..count).map(|k| (k as f64 * PI).powi(2)).collect(),
        vectors: v,
        orthonormality: Orthonormality::Sampled,
    })
}

/// Flips each column so its largest-magnitude entry (first on ties) is
/// positive.
fn canonical_signs(v: &mut DMatrix<f64>) {
    for j in 0..v.ncols() {
        let mut best = 0;
        for i in 1..v.nrows() {
            if v[(i, j)].abs() > v[(best, j)].abs() {
                best = i;
            }
        }
        if v[(best, j)] < 0.0 {
            v.column_mut(j).neg_mut();
        }
    }
}

/// Smallest `count` eigenpairs of a dense symmetric matrix, ascending, with
/// each pair's residual checked against `1e-8·‖A‖₂`.
pub fn sym_eigendecomposition(a: &Tensor, count: usize) -> Result<EigenPairs> {
    let (n, m) = a.expect_matrix("sym_eigendecomposition")?;
    if n != m {
        return Err(Error::dim("sym_eigendecomposition", format!("{n}×{m} is not square")));
    }
    if n == 0 || count == 0 || count > n {
        return Err(Error::InvalidParam(format!("count {count} must be in 1..={n}")));
    }
    if n > MAX_DENSE_N {
        return Err(Error::InvalidParam(format!("n = {n} exceeds the dense limit {MAX_DENSE_N}")));
    }
    if !a.all_finite() {
        return Err(Error::NonFinite {
            context: "sym_eigendecomposition input".into(),
        });
    }
    let tol = 1e-8 * a.max_abs().max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (a.get(i, j) - a.get(j, i)).abs() > tol {
                return Err(Error::Contract(format!("matrix not symmetric at ({i}, {j})")));
            }
        }
    }
    let am = to_dmatrix(a);
    let eig = SymmetricEigen::try_new(am.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Convergence("symmetric eigensolver hit its iteration cap".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let norm = eig.eigenvalues.iter().fold(0.0f64, |acc, l| acc.max(l.abs())).max(f64::MIN_POSITIVE);
    let mut vectors = DMatrix::zeros(n, count);
    let mut values = Vec::with_capacity(count);
    for (c, &i) in order.iter().take(count).enumerate() {
        let lambda = eig.eigenvalues[i];
        let v = eig.eigenvectors.column(i);
        let residual = (&am * v - v * lambda).norm();
        if residual > 1e-8 * norm {
            return Err(Error::Convergence(format!(
                "eigenpair {c} residual {residual:.3e} above 1e-8·‖A‖ = {:.3e}",
                1e-8 * norm
            )));
        }
        vectors.set_column(c, &v);
        values.push(lambda);
    }
    canonical_signs(&mut vectors);
    Ok(EigenPairs {
        values,
        vectors: from_dmatrix(&vectors),
        orthonormality: Orthonormality::Euclidean,
    })
}

/// Solves `S v = λ M v` through the symmetric `M^{-1/2} S M^{-1/2}`.
pub fn generalized_eigens(op: &DiscreteOperator, count: usize) -> Result<GeneralizedEigens> {
    let n = op.n();
    if let Some(i) = op.mass.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::Contract(format!("mass[{i}] is not positive")));
    }
    let r: Vec<f64> = op.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut a = Tensor::from_fn(n, n, |i, j| r[i] * op.stiffness.get(i, j) * r[j]);
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, v);
            a.set(j, i, v);
        }
    }
    let normalized = sym_eigendecomposition(&a, count)?;
    let q = &normalized.vectors;
    let v = Tensor::from_fn(n, count, |i, j| q.get(i, j) * r[i]);
    Ok(GeneralizedEigens {
        unnormalized: EigenPairs {
            values: normalized.values.clone(),
            vectors: v,
            orthonormality: Orthonormality::Mass,
        },
        normalized,
    })
}
