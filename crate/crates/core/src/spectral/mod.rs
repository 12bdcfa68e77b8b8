//! Learned spectral bases: orthonormalization, mass, progressive projection,
//! eigenvalue estimates and post-processing.

mod io;
mod project;

pub use io::{read_basis_bundle, write_basis_bundle, BundleManifest};
pub use project::{
    loss_from_errors, progressive_project, progressive_project_prefix, reconstruction_loss, Projections,
};

use crate::error::{Error, Result};
use crate::ndiff::{Tape, Tensor, Var};

/// Floor applied to `q₁²` when it is used as the mass diagonal.
pub const EPS_MASS: f64 = 1e-8;

/// Orthonormal basis `Q` (`n×K`), mass diagonal and eigenvalue estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralBasis {
    pub q: Tensor,
    pub mass: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl SpectralBasis {
    /// Basis with mass taken from `q`'s first column and no eigenvalues yet
    /// (all zero).
    pub fn from_q(q: Tensor) -> Result<Self> {
        let (mass, _) = extract_mass(&q)?;
        let k = q.cols();
        Ok(SpectralBasis {
            q,
            mass,
            lambdas: vec![0.0; k],
        })
    }

    pub fn n(&self) -> usize {
        self.q.rows()
    }

    pub fn k(&self) -> usize {
        self.q.cols()
    }
}

/// Per-`k` statistics of the reconstruction errors over a probe batch.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionReport {
    pub mean: Vec<f64>,
    pub max: Vec<f64>,
    pub argmax: Vec<usize>,
}

impl ReconstructionReport {
    /// From `errors[k][i]`; reductions run in index order.
    pub fn from_errors(errors: &[Vec<f64>]) -> Self {
        let mut mean = Vec::with_capacity(errors.len());
        let mut max = Vec::with_capacity(errors.len());
        let mut argmax = Vec::with_capacity(errors.len());
        for row in errors {
            mean.push(row.iter().sum::<f64>() / row.len().max(1) as f64);
            let (i, v) = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
            max.push(v.max(0.0));
            argmax.push(i);
        }
        ReconstructionReport { mean, max, argmax }
    }
}

/// QR of the raw features with positive `diag(R)`; column order is kept.
pub fn orthonormalize(tape: &mut Tape, features: Var) -> Result<(Var, Var)> {
    let (n, k) = tape.value(features).expect_matrix("orthonormalize")?;
    if n <= k {
        return Err(Error::dim("orthonormalize", format!("need n > K, got {n}x{k}")));
    }
    tape.qr_reduced(features)
}

/// `mass_i = max(Q[i,0]², ε)` and the number of clamped entries.
pub fn extract_mass(q: &Tensor) -> Result<(Vec<f64>, usize)> {
    let (n, k) = q.expect_matrix("extract_mass")?;
    if k == 0 {
        return Err(Error::dim("extract_mass", "basis has no columns"));
    }
    let mut clamped = 0;
    let mass = (0..n)
        .map(|i| {
            let v = q.get(i, 0) * q.get(i, 0);
            if v < EPS_MASS {
                clamped += 1;
                EPS_MASS
            } else {
                v
            }
        })
        .collect();
    Ok((mass, clamped))
}

/// Tape version of [`extract_mass`]: an `n×1` column differentiable
/// through `q₁` wherever the clamp is inactive.
pub fn extract_mass_var(tape: &mut Tape, q: Var) -> Result<Var> {
    let q1 = tape.slice_cols(q, 0, 1)?;
    let sq = tape.mul(q1, q1)?;
    tape.clamp_min(sq, EPS_MASS)
}

/// `λ₁ = 0`, `λ_{k+1} = 1/e_max[k]`. A zero worst-case error gives an
/// infinite estimate. With `monotonic`, the sequence is replaced by its
/// non-decreasing least-squares fit (pool adjacent violators).
pub fn estimate_eigenvalues(report: &ReconstructionReport, monotonic: bool) -> Vec<f64> {
    let kk = report.max.len();
    let mut lambdas = Vec::with_capacity(kk);
    if kk == 0 {
        return lambdas;
    }
    lambdas.push(0.0);
    for k in 0..kk - 1 {
        let e = report.max[k];
        lambdas.push(if e > 0.0 { 1.0 / e } else { f64::INFINITY });
    }
    if monotonic {
        isotonic_non_decreasing(&mut lambdas);
    }
    lambdas
}

/// Pool-adjacent-violators fit with unit weights, in place.
pub fn isotonic_non_decreasing(values: &mut [f64]) {
    // Blocks of (sum, count).
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values.iter() {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            let (m0, m1) = (s0 / c0 as f64, s1 / c1 as f64);
            if m0 > m1 {
                blocks.pop();
                let last = blocks.last_mut().expect("two blocks");
                *last = (s0 + s1, c0 + c1);
            } else {
                break;
            }
        }
    }
    let mut i = 0;
    for (s, c) in blocks {
        let mean = s / c as f64;
        for v in &mut values[i..i + c] {
            *v = mean;
        }
        i += c;
    }
}

/// `V[:, i] = Q[:, i] / √mass`; the columns are `M`-orthonormal.
pub fn unnormalized_basis(basis: &SpectralBasis) -> Result<Tensor> {
    if basis.mass.len() != basis.n() {
        return Err(Error::dim("unnormalized_basis", "mass length differs from basis rows"));
    }
    if let Some(i) = basis.mass.iter().position(|&w| !(w > 0.0)) {
        return Err(Error::Contract(format!("mass[{i}] is not positive")));
    }
    let s: Vec<f64> = basis.mass.iter().map(|w| w.sqrt()).collect();
    Ok(Tensor::from_fn(basis.n(), basis.k(), |i, j| basis.q.get(i, j) / s[i]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorView {
    /// `Q Λ Qᵀ`.
    Normalized,
    /// `M^{-1/2} Q Λ Qᵀ M^{1/2}`.
    Unnormalized,
}

pub fn reconstruct_operator(basis: &SpectralBasis, which: OperatorView) -> Result<Tensor> {
    let (n, k) = (basis.n(), basis.k());
    if basis.lambdas.len() != k {
        return Err(Error::dim("reconstruct_operator", "one eigenvalue per column needed"));
    }
    if basis.lambdas.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite {
            context: "eigenvalue estimate".into(),
        });
    }
    let ql = Tensor::from_fn(n, k, |i, j| basis.q.get(i, j) * basis.lambdas[j]);
    let mut op = ql.matmul_t(&basis.q)?;
    // Exact symmetry: average with the transpose.
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (op.get(i, j) + op.get(j, i));
            op.set(i, j, v);
            op.set(j, i, v);
        }
    }
    if which == OperatorView::Unnormalized {
        let s: Vec<f64> = basis.mass.iter().map(|w| w.sqrt()).collect();
        for i in 0..n {
            for j in 0..n {
                let v = op.get(i, j) * s[j] / s[i];
                op.set(i, j, v);
            }
        }
    }
    Ok(op)
}

/// `M`-orthogonal projection of each column of `signal` (`n×c`) onto
/// `span(Q_k)`.
pub fn spectral_filter(basis: &SpectralBasis, signal: &Tensor, k: usize) -> Result<Tensor> {
    if k == 0 || k > basis.k() {
        return Err(Error::InvalidParam(format!("k = {k} outside 1..={}", basis.k())));
    }
    let qk = basis.q.slice_cols(0, k);
    let (proj, _) = progressive_project_prefix(&qk, &basis.mass, signal)?;
    Ok(proj.projection(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_eigenvalues() {
        let r = ReconstructionReport {
            mean: vec![0.5, 0.2, 0.1, 0.05],
            max: vec![1.0, 0.5, 0.25, 0.125],
            argmax: vec![0; 4],
        };
        assert_eq!(estimate_eigenvalues(&r, false), vec![0.0, 1.0, 2.0, 4.0]);
        let zero = ReconstructionReport {
            mean: vec![0.0; 2],
            max: vec![1.0, 0.0],
            argmax: vec![0; 2],
        };
        assert_eq!(estimate_eigenvalues(&zero, false), vec![0.0, 1.0]);
        let zero = ReconstructionReport {
            mean: vec![0.0; 2],
            max: vec![0.0, 0.0],
            argmax: vec![0; 2],
        };
        assert_eq!(estimate_eigenvalues(&zero, false)[1], f64::INFINITY);
    }

    #[test]
    fn pav_pools_violators() {
        let mut v = vec![0.0, 3.0, 1.0, 2.0, 5.0];
        isotonic_non_decreasing(&mut v);
        assert_eq!(v, vec![0.0, 2.0, 2.0, 2.0, 5.0]);
        let mut sorted = vec![1.0, 2.0, 3.0];
        isotonic_non_decreasing(&mut sorted);
        assert_eq!(sorted, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn mass_clamp_path() {
        let q = Tensor::from_fn(4, 1, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let (mass, clamped) = extract_mass(&q).unwrap();
        assert_eq!(mass, vec![1.0, EPS_MASS, EPS_MASS, EPS_MASS]);
        assert_eq!(clamped, 3);
    }

    #[test]
    fn uniform_mass_scales_basis() {
        let n = 9;
        let q = Tensor::from_fn(n, 1, |_, _| 1.0 / (n as f64).sqrt());
        let b = SpectralBasis::from_q(q.clone()).unwrap();
        for &w in &b.mass {
            assert!((w - 1.0 / n as f64).abs() < 1e-15);
        }
        let v = unnormalized_basis(&b).unwrap();
        assert!(v.max_abs_diff(&q.scale((n as f64).sqrt())) < 1e-12);
    }

    #[test]
    fn zero_lambdas_give_zero_operator() {
        let q = Tensor::from_fn(5, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        let b = SpectralBasis {
            q,
            mass: vec![0.2; 5],
            lambdas: vec![0.0, 0.0],
        };
        let op = reconstruct_operator(&b, OperatorView::Normalized).unwrap();
        assert_eq!(op.max_abs(), 0.0);
    }

    #[test]
    fn hand_case_two_points() {
        // n = 2, K = 1, q₁ = (1, 0), mass = (1, ε), f = (a, b): loss b².
        let q = Tensor::from_rows(&[&[1.0], &[0.0]]).unwrap();
        let (mass, _) = extract_mass(&q).unwrap();
        let (a, b) = (0.7, -0.4);
        let f = Tensor::from_rows(&[&[a], &[b]]).unwrap();
        let (p, report) = progressive_project(&q, &mass, &f).unwrap();
        assert!((p.projection(1).get(0, 0) - a).abs() < 1e-15);
        assert_eq!(p.projection(1).get(1, 0), 0.0);
        assert!((report.mean[0] - b * b).abs() < 1e-15);
        assert!((loss_from_errors(&p.errors) - b * b).abs() < 1e-15);
    }
}
