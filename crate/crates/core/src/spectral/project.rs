use super::ReconstructionReport;
use crate::error::{Error, Result};
use crate::ndiff::{linalg, Reduce, Tape, Tensor, Var};

/// Coefficients of every progressive projection; `f_proj` for a given `k` is
/// formed on demand by [`Projections::projection`].
#[derive(Clone, Debug)]
pub struct Projections {
    q: Tensor,
    /// `coeffs[k-1]` is `k×m`.
    coeffs: Vec<Tensor>,
    /// `errors[k-1][i] = ‖f_i − Q_k c‖²`.
    pub errors: Vec<Vec<f64>>,
}

impl Projections {
    pub fn k_max(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coefficients(&self, k: usize) -> &Tensor {
        &self.coeffs[k - 1]
    }

    /// `Q_k c_k`, `n×m` (one projected probe per column).
    pub fn projection(&self, k: usize) -> Tensor {
        self.q
            .slice_cols(0, k)
            .matmul(&self.coeffs[k - 1])
            .expect("consistent shapes")
    }
}

fn check_inputs(q: &Tensor, mass: &[f64], f: &Tensor) -> Result<(usize, usize, usize)> {
    let (n, kk) = q.expect_matrix("progressive_project")?;
    let (nf, m) = f.expect_matrix("progressive_project")?;
    if nf != n || mass.len() != n {
        return Err(Error::dim(
            "progressive_project",
            format!("basis has {n} rows, probes {nf}, mass {}", mass.len()),
        ));
    }
    if let Some(i) = mass.iter().position(|&w| !(w > 0.0)) {
        return Err(Error::Contract(format!("mass[{i}] = {} is not positive", mass[i])));
    }
    Ok((n, kk, m))
}

/// `Mq` (rows scaled by mass) and `G_K = Qᵀ M Q`, `B_K = Qᵀ M F`.
fn gram_system(q: &Tensor, mass: &[f64], f: &Tensor) -> Result<(Tensor, Tensor)> {
    let (n, kk) = (q.rows(), q.cols());
    let mq = Tensor::from_fn(n, kk, |i, j| q.get(i, j) * mass[i]);
    Ok((q.tmatmul(&mq)?, mq.tmatmul(f)?))
}

fn leading(t: &Tensor, rows: usize, cols: usize) -> Tensor {
    Tensor::from_fn(rows, cols, |i, j| t.get(i, j))
}

fn residual_errors(q: &Tensor, k: usize, c: &Tensor, f: &Tensor) -> Result<Vec<f64>> {
    let fp = q.slice_cols(0, k).matmul(c)?;
    let m = f.cols();
    let mut e = vec![0.0; m];
    for i in 0..f.rows() {
        for ((ej, &a), &b) in e.iter_mut().zip(f.row(i)).zip(fp.row(i)) {
            *ej += (a - b) * (a - b);
        }
    }
    Ok(e)
}

fn finish(q: &Tensor, coeffs: Vec<Tensor>, f: &Tensor) -> Result<(Projections, ReconstructionReport)> {
    let errors = coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| residual_errors(q, i + 1, c, f))
        .collect::<Result<Vec<_>>>()?;
    let report = ReconstructionReport::from_errors(&errors);
    Ok((
        Projections {
            q: q.clone(),
            coeffs,
            errors,
        },
        report,
    ))
}

/// Progressive M-orthogonal projection of the probe columns of `f` (`n×m`)
/// onto `span(Q_k)` for every `k = 1..K`, one Cholesky solve per `k`.
pub fn progressive_project(q: &Tensor, mass: &[f64], f: &Tensor) -> Result<(Projections, ReconstructionReport)> {
    let (_, kk, _) = check_inputs(q, mass, f)?;
    let (g, b) = gram_system(q, mass, f)?;
    let mut coeffs = Vec::with_capacity(kk);
    for k in 1..=kk {
        let (l, _) = linalg::cholesky_jittered(&leading(&g, k, k))?;
        coeffs.push(linalg::cholesky_solve(&l, &leading(&b, k, b.cols())));
    }
    finish(q, coeffs, f)
}

/// Same result as [`progressive_project`] from a single factorization: the
/// Cholesky factor of `G_K` restricted to its leading `k×k` block factors
/// `G_k`.
pub fn progressive_project_prefix(
    q: &Tensor,
    mass: &[f64],
    f: &Tensor,
) -> Result<(Projections, ReconstructionReport)> {
    let (_, kk, _) = check_inputs(q, mass, f)?;
    let (g, b) = gram_system(q, mass, f)?;
    let (l, _) = linalg::cholesky_jittered(&g)?;
    let coeffs = (1..=kk)
        .map(|k| linalg::cholesky_solve_prefix(&l, k, &leading(&b, k, b.cols())))
        .collect();
    finish(q, coeffs, f)
}

/// Differentiable progressive reconstruction.
///
/// `q` is the `n×K` orthonormal basis, `mass` the `n×1` mass column and
/// `f` the `n×m` probe matrix. Returns the loss
/// `(1/(mK)) Σ_i Σ_k ‖f_i − Q_k c_k‖²` and the per-`k` error rows
/// (`1×m` each).
pub fn reconstruction_loss(tape: &mut Tape, q: Var, mass: Var, f: Var) -> Result<(Var, Vec<Var>)> {
    let (n, kk) = tape.value(q).expect_matrix("reconstruction_loss")?;
    let (nf, m) = tape.value(f).expect_matrix("reconstruction_loss")?;
    if nf != n {
        return Err(Error::dim("reconstruction_loss", format!("basis {n} rows, probes {nf}")));
    }
    let mq = tape.scale_rows(q, mass)?;
    let qt = tape.transpose(q)?;
    let g_full = tape.matmul(qt, mq)?;
    let ft = tape.transpose(f)?;
    // Bᵀ = Fᵀ M Q, m×K.
    let bt_full = tape.matmul(ft, mq)?;

    let mut errors = Vec::with_capacity(kk);
    let mut total: Option<Var> = None;
    for k in 1..=kk {
        let (qk, gk, bk) = if k == kk {
            let b = tape.transpose(bt_full)?;
            (q, g_full, b)
        } else {
            let qk = tape.slice_cols(q, 0, k)?;
            let g_cols = tape.slice_cols(g_full, 0, k)?;
            let g_t = tape.transpose(g_cols)?;
            let gk = tape.slice_cols(g_t, 0, k)?;
            let b_cols = tape.slice_cols(bt_full, 0, k)?;
            let bk = tape.transpose(b_cols)?;
            (qk, gk, bk)
        };
        let c = tape.spd_solve(gk, bk)?;
        let fp = tape.matmul(qk, c)?;
        let r = tape.sub(f, fp)?;
        let e = tape.reduce(Reduce::SqNorm, r, Some(0))?;
        let s = tape.sum(e)?;
        total = Some(match total {
            Some(t) => tape.add(t, s)?,
            None => s,
        });
        errors.push(e);
    }
    let total = total.ok_or_else(|| Error::Contract("basis has no columns".into()))?;
    let loss = tape.scale(total, 1.0 / (m * kk) as f64)?;
    Ok((loss, errors))
}

/// `L_rec` from a precomputed error table (`errors[k][i]`).
pub fn loss_from_errors(errors: &[Vec<f64>]) -> f64 {
    let kk = errors.len();
    let m = errors.first().map_or(0, Vec::len);
    if kk == 0 || m == 0 {
        return 0.0;
    }
    errors.iter().flatten().sum::<f64>() / (kk * m) as f64
}
