//! Numerical checks of the optimal-approximation results the method rests
//! on: min-max optimality of the eigenbasis, its PCA characterization, and
//! the normalized/unnormalized eigenvector relation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::eigen::{from_dmatrix, sym_eigendecomposition, to_dmatrix};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn close(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            target,
            tolerance,
            passed: (value - target).abs() <= tolerance,
        }
    }

    fn at_least(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            target,
            tolerance,
            passed: value >= target - tolerance,
        }
    }

    fn at_most(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            target,
            tolerance,
            passed: value <= target + tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremReport {
    pub theorem: String,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub passed: bool,
}

impl TheoremReport {
    fn new(theorem: &str, n: usize, k: usize, seed: u64, checks: Vec<Check>, notes: Vec<String>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        TheoremReport {
            theorem: theorem.into(),
            n,
            k,
            seed,
            checks,
            notes,
            passed,
        }
    }
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_orthonormal(n: usize, k: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    gaussian_matrix(n, k, rng).qr().q()
}

/// `U diag(λ) Uᵀ` with distinct eigenvalues drawn from `[0.5, 10]`.
fn random_spd(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let u = random_orthonormal(n, n, rng);
    let lambdas = DVector::from_fn(n, |_, _| rng.random_range(0.5..10.0));
    let l = &u * DMatrix::from_diagonal(&lambdas) * u.transpose();
    (&l + l.transpose()) * 0.5
}

struct Eig {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

fn eig(a: &DMatrix<f64>) -> Result<Eig> {
    let e = sym_eigendecomposition(&from_dmatrix(a), a.nrows())?;
    Ok(Eig {
        values: e.values,
        vectors: to_dmatrix(&e.vectors),
    })
}

/// `L^{-1/2}` of an SPD matrix.
fn inv_sqrt(e: &Eig) -> DMatrix<f64> {
    let d = DVector::from_iterator(e.values.len(), e.values.iter().map(|l| 1.0 / l.sqrt()));
    &e.vectors * DMatrix::from_diagonal(&d) * e.vectors.transpose()
}

/// Worst case of `‖f − BBᵀf‖²` over `fᵀLf ≤ 1`: the top eigenvalue of
/// `L^{-1/2}(I − BBᵀ)L^{-1/2}`.
fn analytic_worst_case(l_inv_sqrt: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let n = b.nrows();
    let p = DMatrix::identity(n, n) - b * b.transpose();
    let a = l_inv_sqrt * p * l_inv_sqrt;
    let a = (&a + a.transpose()) * 0.5;
    Ok(*eig(&a)?.values.last().expect("non-empty"))
}

fn residual_sq(f: &DVector<f64>, b: &DMatrix<f64>) -> f64 {
    (f - b * (b.transpose() * f)).norm_squared()
}

fn symmetric_input(l: &DMatrix<f64>) -> Result<()> {
    if !l.is_square() || (l - l.transpose()).amax() > 1e-12 * l.amax().max(1.0) {
        return Err(Error::Contract("operator must be square and symmetric".into()));
    }
    Ok(())
}

/// Min-max check on a random SPD `L` (`2 ≤ k < n ≤ 12`).
pub fn verify_minmax_theorem(n: usize, k: usize, seed: u64) -> Result<TheoremReport> {
    if !(2..=12).contains(&n) || k < 1 || k >= n {
        return Err(Error::InvalidParam(format!("need 1 ≤ k < n ≤ 12, got n={n}, k={k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = random_spd(n, &mut rng);
    verify_minmax_for(&l, k, seed, &mut rng)
}

/// Min-max check on a given SPD `L`:
/// (a) the eigenbasis worst case, from 10⁴ boundary samples plus the analytic
///     worst probe `e_{k+1}/√λ_{k+1}`, equals `1/λ_{k+1}`;
/// (b) no random orthonormal basis (100 draws) beats it.
pub fn verify_minmax_for(l: &DMatrix<f64>, k: usize, seed: u64, rng: &mut impl Rng) -> Result<TheoremReport> {
    symmetric_input(l)?;
    let n = l.nrows();
    let e = eig(l)?;
    if !(e.values[0] > 0.0) {
        return Err(Error::Contract("operator must be positive definite".into()));
    }
    let target = 1.0 / e.values[k];
    let basis = e.vectors.columns(0, k).into_owned();
    let mut sampled = 0.0f64;
    for _ in 0..10_000 {
        let g = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let f = &g / (g.dot(&(l * &g))).sqrt();
        sampled = sampled.max(residual_sq(&f, &basis));
    }
    let probe = e.vectors.column(k) / e.values[k].sqrt();
    let worst = sampled.max(residual_sq(&probe.into_owned(), &basis));
    let l_is = inv_sqrt(&e);
    let analytic = analytic_worst_case(&l_is, &basis)?;
    let mut best_random = f64::INFINITY;
    for _ in 0..100 {
        let b = random_orthonormal(n, k, rng);
        best_random = best_random.min(analytic_worst_case(&l_is, &b)?);
    }
    let mut notes = Vec::new();
    let gap = e.values[k] - e.values[k - 1];
    if gap <= 1e-9 * e.values[k] {
        notes.push(format!(
            "degenerate spectrum: λ_k = λ_(k+1) = {:.6}; optimal bases are not unique",
            e.values[k]
        ));
    }
    let checks = vec![
        Check::at_most("sampled worst case ≤ 1/λ_(k+1)", sampled, target, 1e-9),
        Check::close("worst case equals 1/λ_(k+1)", worst, target, 1e-9),
        Check::close("analytic worst case equals 1/λ_(k+1)", analytic, target, 1e-9),
        Check::at_least("random bases do no better", best_random, target, 1e-9),
    ];
    Ok(TheoremReport::new("minmax", n, k, seed, checks, notes))
}

/// PCA characterization on a random SPD `L` (`n ≤ 10`). Signals are uniform
/// in `{fᵀLf ≤ 1}`, whose covariance is `C = L⁻¹/(n+2)`.
pub fn verify_pca_equivalence(n: usize, k: usize, samples: usize, seed: u64) -> Result<TheoremReport> {
    if !(2..=10).contains(&n) || k < 1 || k >= n || samples < 2 {
        return Err(Error::InvalidParam(format!("need 1 ≤ k < n ≤ 10 and samples ≥ 2, got n={n}, k={k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = random_spd(n, &mut rng);
    verify_pca_for(&l, k, samples, seed, &mut rng)
}

pub fn verify_pca_for(
    l: &DMatrix<f64>,
    k: usize,
    samples: usize,
    seed: u64,
    rng: &mut impl Rng,
) -> Result<TheoremReport> {
    symmetric_input(l)?;
    let n = l.nrows();
    let e = eig(l)?;
    let l_is = inv_sqrt(&e);
    let c = (&l_is * &l_is) / (n + 2) as f64;
    let expected = |b: &DMatrix<f64>| c.trace() - (b.transpose() * &c * b).trace();

    let eigen_basis = e.vectors.columns(0, k).into_owned();
    let random_basis = random_orthonormal(n, k, rng);
    let mut stats = [(0.0f64, 0.0f64); 2];
    for _ in 0..samples {
        let g = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let radius = rng.random::<f64>().powf(1.0 / n as f64);
        let f = &l_is * (&g * (radius / g.norm()));
        for (s, b) in stats.iter_mut().zip([&eigen_basis, &random_basis]) {
            let r = residual_sq(&f, b);
            s.0 += r;
            s.1 += r * r;
        }
    }
    let m = samples as f64;
    let mut checks = Vec::new();
    for ((sum, sq), (label, b)) in stats.iter().zip([("eigenbasis", &eigen_basis), ("random basis", &random_basis)]) {
        let mean = sum / m;
        let var = (sq / m - mean * mean).max(0.0) * m / (m - 1.0);
        let se = (var / m).sqrt();
        checks.push(Check::close(
            &format!("Monte-Carlo error of {label} within 3 SE of tr(C) − Σ bᵀCb"),
            mean,
            expected(b),
            3.0 * se,
        ));
    }
    let optimum = expected(&eigen_basis);
    let best_random = (0..100)
        .map(|_| expected(&random_orthonormal(n, k, rng)))
        .fold(f64::INFINITY, f64::min);
    checks.push(Check::at_least("random bases do no better", best_random, optimum, 1e-12));
    checks.push(Check::close(
        "optimum equals the tail sum of C's spectrum",
        optimum,
        e.values[k..].iter().map(|v| 1.0 / (v * (n + 2) as f64)).sum(),
        1e-12,
    ));
    Ok(TheoremReport::new("pca", n, k, seed, checks, Vec::new()))
}

/// Normalized relation on a random positive diagonal `N` and a random
/// weighted graph Laplacian `Σ` (`n ≤ 50`).
pub fn verify_normalized_relation(n: usize, seed: u64) -> Result<TheoremReport> {
    if !(2..=50).contains(&n) {
        return Err(Error::InvalidParam(format!("need 2 ≤ n ≤ 50, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diag: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let mut w = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..1.0));
    w = (&w + w.transpose()) * 0.5;
    w.fill_diagonal(0.0);
    let degree = DVector::from_iterator(n, w.row_iter().map(|r| r.sum()));
    let sigma = DMatrix::from_diagonal(&degree) - w;
    verify_normalized_for(&diag, &sigma, seed)
}

/// Eigenpairs `(λ, e_norm)` of `N⁻¹ΣN⁻¹` map to eigenpairs `(λ, N⁻¹e_norm)`
/// of `N⁻²Σ`; the spectrum of the non-symmetric `N⁻²Σ` is computed
/// independently, and `N·1` spans the nullspace image.
pub fn verify_normalized_for(diag: &[f64], sigma: &DMatrix<f64>, seed: u64) -> Result<TheoremReport> {
    symmetric_input(sigma)?;
    let n = diag.len();
    if sigma.nrows() != n || diag.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Contract("N must be positive and match Σ".into()));
    }
    let ninv = DMatrix::from_diagonal(&DVector::from_iterator(n, diag.iter().map(|d| 1.0 / d)));
    let a_norm = &ninv * sigma * &ninv;
    let a_norm = (&a_norm + a_norm.transpose()) * 0.5;
    let a = &ninv * &ninv * sigma;
    let e = eig(&a_norm)?;
    let scale = e.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));

    let vectors = &ninv * &e.vectors;
    let mut worst_residual = 0.0f64;
    for j in 0..n {
        let v = vectors.column(j);
        let r = (&a * v - v * e.values[j]).norm() / v.norm();
        worst_residual = worst_residual.max(r);
    }
    let mut independent: Vec<f64> = a.complex_eigenvalues().iter().map(|z| z.re).collect();
    independent.sort_by(f64::total_cmp);
    let value_gap = independent
        .iter()
        .zip(&e.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let n2 = DMatrix::from_diagonal(&DVector::from_iterator(n, diag.iter().map(|d| d * d)));
    let gram = vectors.transpose() * n2 * &vectors;
    let ortho = (gram - DMatrix::identity(n, n)).amax();
    let n_one = DVector::from_column_slice(diag).normalize();
    let null_cos = n_one.dot(&e.vectors.column(0)).abs();
    let checks = vec![
        Check::at_most("mapped eigenpair residual", worst_residual, 0.0, 1e-8 * scale),
        Check::at_most("eigenvalues match the direct solve", value_gap, 0.0, 1e-8 * scale),
        Check::at_most("mapped vectors are N²-orthonormal", ortho, 0.0, 1e-8),
        Check::close("first normalized eigenvector ∝ N·1", null_cos, 1.0, 1e-8),
        Check::close("smallest eigenvalue is zero", e.values[0], 0.0, 1e-8 * scale),
    ];
    Ok(TheoremReport::new("normalized", n, n, seed, checks, Vec::new()))
}

/// The full suite: min-max on 20 seeds with `n` cycling through 3..=12,
/// PCA on `n = 6, k = 2` with 10⁵ samples, and the normalized relation on
/// `n = 20`.
pub fn run_theorem_suite(seed: u64) -> Result<Vec<TheoremReport>> {
    let mut out = Vec::new();
    for s in 0..20u64 {
        let n = 3 + (s % 10) as usize;
        let k = 1 + (s as usize * 7) % (n - 1);
        out.push(verify_minmax_theorem(n, k, seed.wrapping_add(s))?);
    }
    out.push(verify_pca_equivalence(6, 2, 100_000, seed)?);
    out.push(verify_normalized_relation(20, seed)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_minmax_closed_form() {
        let l = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let r = verify_minmax_for(&l, 1, 0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(r.passed, "{r:?}");
        assert!((r.checks[1].value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identity_is_degenerate_not_failed() {
        let l = DMatrix::identity(4, 4);
        let r = verify_minmax_for(&l, 2, 0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(!r.notes.is_empty());
    }

    #[test]
    fn random_minmax_n8_k3() {
        let r = verify_minmax_theorem(8, 3, 5).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn pca_identity_ties_and_diagonal_tail() {
        let l = DMatrix::identity(4, 4);
        let r = verify_pca_for(&l, 2, 2000, 0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(r.passed, "{r:?}");
        let l = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 4.0]));
        let r = verify_pca_for(&l, 1, 2000, 0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let tail = (0.5 + 0.25) / 5.0;
        assert!((r.checks[3].target - tail).abs() < 1e-12);
    }

    #[test]
    fn normalized_scalar_n() {
        let sigma = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        for d in [1.0, 2.0] {
            let r = verify_normalized_for(&[d; 3], &sigma, 0).unwrap();
            assert!(r.passed, "{r:?}");
        }
        let plain = eig(&sigma).unwrap();
        let halved = eig(&(&sigma * 0.25)).unwrap();
        for (a, b) in plain.values.iter().zip(&halved.values) {
            assert!((a / 4.0 - b).abs() < 1e-12);
        }
        assert!((plain.vectors.clone() - halved.vectors).amax() < 1e-12);
    }

    #[test]
    fn invalid_sizes() {
        assert!(verify_minmax_theorem(13, 2, 0).is_err());
        assert!(verify_pca_equivalence(11, 2, 10, 0).is_err());
        assert!(verify_normalized_relation(51, 0).is_err());
    }
}
