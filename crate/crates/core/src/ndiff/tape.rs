use super::linalg;
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Gelu,
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Mean,
    SqNorm,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Act(Activation, Var),
    ClampMin(Var, f64),
    Reduce(Reduce, Var, Option<usize>),
    Transpose(Var),
    SliceCols(Var, usize),
    ScaleRows(Var, Var),
    /// Q factor; the R factor lives in the node `r`, recorded right after.
    QrQ { a: Var, r: Var },
    QrR,
    /// Saved lower Cholesky factor of the (possibly jittered) system matrix.
    SpdSolve { g: Var, b: Var, chol: Tensor },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Act(Activation::Relu, _) => "relu",
            Op::Act(Activation::Gelu, _) => "gelu",
            Op::Act(Activation::Tanh, _) => "tanh",
            Op::ClampMin(..) => "clamp_min",
            Op::Reduce(..) => "reduce",
            Op::Transpose(..) => "transpose",
            Op::SliceCols(..) => "slice_cols",
            Op::ScaleRows(..) => "scale_rows",
            Op::QrQ { .. } | Op::QrR => "qr_reduced",
            Op::SpdSolve { .. } => "spd_solve",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Linear record of a computation, replayed in reverse by [`Tape::backward`].
///
/// Nodes are appended in evaluation order, so every input precedes its
/// output. Gradients persist across calls to `backward` and accumulate until
/// [`Tape::zero_grad`].
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044_715;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_CUBIC * x * x)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::NonFinite {
                context: format!("forward {}", op.name()),
            });
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.grads.push(None);
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Records an input tensor. Non-finite inputs are rejected.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Result<Var> {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn param(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// Accumulated gradient of the last `backward` target(s) w.r.t. `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::MatMul(a, b), rg)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::dim(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Sub(a, b), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Mul(a, b), rg)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.value(a).scale(s);
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, s), rg)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.value(a).map(|x| x + s);
        let rg = self.rg(a);
        self.push(out, Op::AddScalar(a), rg)
    }

    pub fn activation(&mut self, act: Activation, a: Var) -> Result<Var> {
        let x = self.value(a);
        let out = match act {
            Activation::Relu => x.map(|v| v.max(0.0)),
            Activation::Gelu => x.map(gelu),
            Activation::Tanh => x.map(f64::tanh),
        };
        let rg = self.rg(a);
        self.push(out, Op::Act(act, a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.activation(Activation::Relu, a)
    }

    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        self.activation(Activation::Gelu, a)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.activation(Activation::Tanh, a)
    }

    /// `max(a, lo)` elementwise; the gradient is zero where the floor is active.
    pub fn clamp_min(&mut self, a: Var, lo: f64) -> Result<Var> {
        let out = self.value(a).map(|v| v.max(lo));
        let rg = self.rg(a);
        self.push(out, Op::ClampMin(a, lo), rg)
    }

    /// Full reduction (`axis = None`, scalar result) or reduction of a matrix
    /// along `axis` 0 (result `1×c`) or 1 (result `r×1`).
    pub fn reduce(&mut self, op: Reduce, a: Var, axis: Option<usize>) -> Result<Var> {
        let x = self.value(a);
        let f = |v: f64| if op == Reduce::SqNorm { v * v } else { v };
        let out = match axis {
            None => {
                let mut s: f64 = x.data().iter().map(|&v| f(v)).sum();
                if op == Reduce::Mean {
                    s /= x.len() as f64;
                }
                Tensor::scalar(s)
            }
            Some(ax) => {
                let (r, c) = x.expect_matrix("reduce")?;
                match ax {
                    0 => {
                        let mut out = vec![0.0; c];
                        for i in 0..r {
                            for (o, &v) in out.iter_mut().zip(x.row(i)) {
                                *o += f(v);
                            }
                        }
                        if op == Reduce::Mean {
                            out.iter_mut().for_each(|o| *o /= r as f64);
                        }
                        Tensor::matrix(1, c, out)?
                    }
                    1 => {
                        let mut out: Vec<f64> =
                            (0..r).map(|i| x.row(i).iter().map(|&v| f(v)).sum()).collect();
                        if op == Reduce::Mean {
                            out.iter_mut().for_each(|o| *o /= c as f64);
                        }
                        Tensor::matrix(r, 1, out)?
                    }
                    _ => return Err(Error::dim("reduce", format!("invalid axis {ax} for a matrix"))),
                }
            }
        };
        let rg = self.rg(a);
        self.push(out, Op::Reduce(op, a, axis), rg)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.reduce(Reduce::Sum, a, None)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.reduce(Reduce::Mean, a, None)
    }

    pub fn sq_norm(&mut self, a: Var) -> Result<Var> {
        self.reduce(Reduce::SqNorm, a, None)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.value(a).expect_matrix("transpose")?;
        let out = self.value(a).transpose();
        let rg = self.rg(a);
        self.push(out, Op::Transpose(a), rg)
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (_, c) = self.value(a).expect_matrix("slice_cols")?;
        if start >= end || end > c {
            return Err(Error::dim("slice_cols", format!("range {start}..{end} of {c} columns")));
        }
        let out = self.value(a).slice_cols(start, end);
        let rg = self.rg(a);
        self.push(out, Op::SliceCols(a, start), rg)
    }

    /// Multiplies row `i` of `a` (`n×c`) by `w[i]` (`w` is `n×1`), i.e. `diag(w)·a`.
    pub fn scale_rows(&mut self, a: Var, w: Var) -> Result<Var> {
        let (n, c) = self.value(a).expect_matrix("scale_rows")?;
        if self.value(w).shape() != [n, 1] {
            return Err(Error::dim(
                "scale_rows",
                format!("weights {:?} for {n} rows", self.value(w).shape()),
            ));
        }
        let x = self.value(a);
        let ws = self.value(w).data();
        let out = Tensor::from_fn(n, c, |i, j| x.get(i, j) * ws[i]);
        let rg = self.rg(a) || self.rg(w);
        self.push(out, Op::ScaleRows(a, w), rg)
    }

    /// Reduced QR with positive `diag(r)`. Rank deficiency is reported as
    /// [`Error::DegenerateBasis`] carrying the offending column.
    pub fn qr_reduced(&mut self, a: Var) -> Result<(Var, Var)> {
        let (q, r) = linalg::householder_qr(self.value(a))?;
        let rg = self.rg(a);
        // Placeholder index for r; it is pushed immediately after q.
        let r_var = Var(self.nodes.len() + 1);
        let q_var = self.push(q, Op::QrQ { a, r: r_var }, rg)?;
        let r_var2 = self.push(r, Op::QrR, rg)?;
        debug_assert_eq!(r_var, r_var2);
        Ok((q_var, r_var2))
    }

    /// Solves `g·x = b` for symmetric positive definite `g` by Cholesky,
    /// with the jitter ladder from [`linalg::JITTER_LADDER`] as fallback.
    pub fn spd_solve(&mut self, g: Var, b: Var) -> Result<Var> {
        let (k, k2) = self.value(g).expect_matrix("spd_solve")?;
        let (kb, _) = self.value(b).expect_matrix("spd_solve")?;
        if k != k2 || kb != k {
            return Err(Error::dim(
                "spd_solve",
                format!("system {k}x{k2} with right-hand side of {kb} rows"),
            ));
        }
        let gv = self.value(g);
        let asym = (0..k)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .fold(0.0f64, |m, (i, j)| m.max((gv.get(i, j) - gv.get(j, i)).abs()));
        let gscale = gv.max_abs().max(1.0);
        if asym > 1e-10 * gscale {
            return Err(Error::Contract(format!(
                "spd_solve needs a symmetric matrix (asymmetry {asym:e})"
            )));
        }
        let (chol, _) = linalg::cholesky_jittered(gv)?;
        let x = linalg::cholesky_solve(&chol, self.value(b));
        let rg = self.rg(g) || self.rg(b);
        self.push(x, Op::SpdSolve { g, b, chol }, rg)
    }

    /// Reverse pass from a scalar `loss`. Gradients are added onto whatever
    /// earlier calls left behind.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut adj: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            // QrR adjoints are consumed by the matching QrQ record.
            if matches!(self.nodes[idx].op, Op::Leaf | Op::QrR) {
                continue;
            }
            let upstream = match (&self.nodes[idx].op, adj[idx].take()) {
                (Op::QrQ { .. }, g) => g,
                (_, None) => continue,
                (_, Some(g)) => Some(g),
            };
            let contribs = self.local_backward(idx, upstream, &adj)?;
            for (var, g) in contribs {
                if !g.all_finite() {
                    return Err(Error::NonFinite {
                        context: format!("backward {}", self.nodes[idx].op.name()),
                    });
                }
                match &mut adj[var.0] {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        for (idx, g) in adj.into_iter().enumerate() {
            if let Some(g) = g {
                if self.nodes[idx].requires_grad && matches!(self.nodes[idx].op, Op::Leaf) {
                    match &mut self.grads[idx] {
                        Some(acc) => acc.add_assign(&g),
                        slot @ None => *slot = Some(g),
                    }
                }
            }
        }
        Ok(())
    }

    /// Vector-Jacobian products of node `idx` for its gradient-tracking inputs.
    fn local_backward(
        &self,
        idx: usize,
        upstream: Option<Tensor>,
        adj: &[Option<Tensor>],
    ) -> Result<Vec<(Var, Tensor)>> {
        let node = &self.nodes[idx];
        let mut out = Vec::with_capacity(2);
        let want = |v: Var| self.rg(v);
        let val = |v: Var| self.value(v);

        if let Op::QrQ { a, r } = &node.op {
            let r_adj = adj[r.0].clone();
            if upstream.is_none() && r_adj.is_none() {
                return Ok(out);
            }
            if want(*a) {
                out.push((*a, self.qr_backward(idx, *r, upstream, r_adj)?));
            }
            return Ok(out);
        }
        let g = upstream.expect("non-QR nodes are only visited with an adjoint");

        match &node.op {
            Op::Leaf | Op::QrR | Op::QrQ { .. } => {}
            Op::MatMul(a, b) => {
                if want(*a) {
                    out.push((*a, g.matmul_t(val(*b))?));
                }
                if want(*b) {
                    out.push((*b, val(*a).tmatmul(&g)?));
                }
            }
            Op::Add(a, b) => {
                if want(*a) {
                    out.push((*a, g.clone()));
                }
                if want(*b) {
                    out.push((*b, g));
                }
            }
            Op::Sub(a, b) => {
                if want(*a) {
                    out.push((*a, g.clone()));
                }
                if want(*b) {
                    out.push((*b, g.scale(-1.0)));
                }
            }
            Op::Mul(a, b) => {
                if want(*a) {
                    out.push((*a, g.zip_map(val(*b), |x, y| x * y)));
                }
                if want(*b) {
                    out.push((*b, g.zip_map(val(*a), |x, y| x * y)));
                }
            }
            Op::Scale(a, s) => out.push((*a, g.scale(*s))),
            Op::AddScalar(a) => out.push((*a, g)),
            Op::Act(act, a) => {
                let x = val(*a);
                let d = match act {
                    Activation::Relu => g.zip_map(x, |gv, xv| if xv > 0.0 { gv } else { 0.0 }),
                    Activation::Gelu => g.zip_map(x, |gv, xv| gv * gelu_grad(xv)),
                    Activation::Tanh => g.zip_map(&node.value, |gv, yv| gv * (1.0 - yv * yv)),
                };
                out.push((*a, d));
            }
            Op::ClampMin(a, lo) => {
                let lo = *lo;
                out.push((*a, g.zip_map(val(*a), |gv, xv| if xv > lo { gv } else { 0.0 })));
            }
            Op::Reduce(op, a, axis) => {
                let x = val(*a);
                let expanded = match axis {
                    None => Tensor::full(x.shape(), g.item()),
                    Some(0) => Tensor::from_fn(x.rows(), x.cols(), |_, j| g.data()[j]),
                    Some(_) => Tensor::from_fn(x.rows(), x.cols(), |i, _| g.data()[i]),
                };
                let d = match op {
                    Reduce::Sum => expanded,
                    Reduce::Mean => {
                        let count = match axis {
                            None => x.len(),
                            Some(0) => x.rows(),
                            Some(_) => x.cols(),
                        };
                        expanded.scale(1.0 / count as f64)
                    }
                    Reduce::SqNorm => expanded.zip_map(x, |gv, xv| 2.0 * xv * gv),
                };
                out.push((*a, d));
            }
            Op::Transpose(a) => out.push((*a, g.transpose())),
            Op::SliceCols(a, start) => {
                let x = val(*a);
                let w = g.cols();
                let mut d = Tensor::zeros(x.shape());
                for i in 0..x.rows() {
                    for j in 0..w {
                        d.set(i, start + j, g.get(i, j));
                    }
                }
                out.push((*a, d));
            }
            Op::ScaleRows(a, w) => {
                let x = val(*a);
                let ws = val(*w);
                if want(*a) {
                    let wd = ws.data();
                    out.push((*a, Tensor::from_fn(x.rows(), x.cols(), |i, j| g.get(i, j) * wd[i])));
                }
                if want(*w) {
                    let d: Vec<f64> = (0..x.rows())
                        .map(|i| x.row(i).iter().zip(g.row(i)).map(|(a, b)| a * b).sum())
                        .collect();
                    out.push((*w, Tensor::matrix(x.rows(), 1, d)?));
                }
            }
            Op::SpdSolve { g: gm, b, chol } => {
                // s = G⁻¹ x̄;  b̄ = s;  Ḡ = -sym(s xᵀ).
                let s = linalg::cholesky_solve(chol, &g);
                if want(*gm) {
                    let sx = s.matmul_t(&node.value)?;
                    let k = sx.rows();
                    let d = Tensor::from_fn(k, k, |i, j| -0.5 * (sx.get(i, j) + sx.get(j, i)));
                    out.push((*gm, d));
                }
                if want(*b) {
                    out.push((*b, s));
                }
            }
        }
        Ok(out)
    }

    /// Reduced-QR adjoint for `a = q r` (`n ≥ k`, full rank):
    /// `ā = (q̄ + q·copyltu(M))·r⁻ᵀ` with `M = r·r̄ᵀ − q̄ᵀ·q`, where `copyltu`
    /// mirrors the lower triangle of `M` onto the upper one.
    fn qr_backward(
        &self,
        q_idx: usize,
        r_var: Var,
        q_adj: Option<Tensor>,
        r_adj: Option<Tensor>,
    ) -> Result<Tensor> {
        let q = &self.nodes[q_idx].value;
        let r = self.value(r_var);
        let (n, k) = (q.rows(), q.cols());
        let q_bar = q_adj.unwrap_or_else(|| Tensor::zeros(&[n, k]));
        let mut m = Tensor::zeros(&[k, k]);
        if let Some(rb) = &r_adj {
            m = r.matmul_t(rb)?;
        }
        let qtq = q_bar.tmatmul(q)?;
        for (mv, v) in m.data_mut().iter_mut().zip(qtq.data()) {
            *mv -= v;
        }
        let sym = Tensor::from_fn(k, k, |i, j| if i >= j { m.get(i, j) } else { m.get(j, i) });
        let mut lhs = q.matmul(&sym)?;
        lhs.add_assign(&q_bar);
        Ok(linalg::solve_right_upper_transposed(r, &lhs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity_and_projector() {
        let mut t = Tape::new();
        let i2 = t.constant(Tensor::identity(2)).unwrap();
        let m = t.constant(Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap()).unwrap();
        let p = t.matmul(i2, m).unwrap();
        assert_eq!(t.value(p).data(), &[1.0, 2.0, 3.0, 4.0]);

        let proj = t.constant(Tensor::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap()).unwrap();
        let v = t.constant(Tensor::from_rows(&[&[5.0], &[7.0]]).unwrap()).unwrap();
        let pv = t.matmul(proj, v).unwrap();
        assert_eq!(t.value(pv).data(), &[5.0, 0.0]);
    }

    #[test]
    fn elementwise_examples() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap()).unwrap();
        let r = t.relu(x).unwrap();
        assert_eq!(t.value(r).data(), &[0.0, 0.0, 2.0]);
        let z = t.constant(Tensor::scalar(0.0)).unwrap();
        let gz = t.gelu(z).unwrap();
        assert_eq!(t.value(gz).item(), 0.0);
    }

    #[test]
    fn reductions() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::new(vec![2], vec![3.0, 4.0]).unwrap()).unwrap();
        let n = t.sq_norm(a).unwrap();
        assert_eq!(t.value(n).item(), 25.0);
        let b = t.constant(Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        let m = t.mean(b).unwrap();
        assert_eq!(t.value(m).item(), 2.0);
        let w = t.param(Tensor::new(vec![2], vec![1.0, -2.0]).unwrap()).unwrap();
        let l = t.sq_norm(w).unwrap();
        t.backward(l).unwrap();
        assert_eq!(t.grad(w).unwrap().data(), &[2.0, -4.0]);
    }

    #[test]
    fn invalid_axis_is_rejected() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(&[2, 2])).unwrap();
        assert!(matches!(t.reduce(Reduce::Sum, a, Some(2)), Err(Error::Dimension { .. })));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut t = Tape::new();
        let a = t.param(Tensor::zeros(&[2, 2])).unwrap();
        assert!(matches!(t.backward(a), Err(Error::Contract(_))));
    }

    #[test]
    fn gradients_accumulate_until_zeroed() {
        let mut t = Tape::new();
        let w = t.param(Tensor::new(vec![2], vec![1.0, 2.0]).unwrap()).unwrap();
        let l = t.sq_norm(w).unwrap();
        t.backward(l).unwrap();
        assert_eq!(t.grad(w).unwrap().data(), &[2.0, 4.0]);
        t.backward(l).unwrap();
        assert_eq!(t.grad(w).unwrap().data(), &[4.0, 8.0]);
        t.zero_grad();
        assert!(t.grad(w).is_none());
    }

    #[test]
    fn matmul_sum_gradient_is_ones_times_xt() {
        let mut t = Tape::new();
        let w = t.param(Tensor::from_fn(2, 3, |i, j| (i + j) as f64)).unwrap();
        let xv = Tensor::from_fn(3, 4, |i, j| i as f64 - j as f64 * 0.5);
        let x = t.constant(xv.clone()).unwrap();
        let y = t.matmul(w, x).unwrap();
        let l = t.sum(y).unwrap();
        t.backward(l).unwrap();
        let expect = Tensor::full(&[2, 4], 1.0).matmul_t(&xv).unwrap();
        assert_eq!(t.grad(w).unwrap(), &expect);
    }

    #[test]
    fn spd_solve_diagonal() {
        let mut t = Tape::new();
        let g = t.constant(Tensor::from_rows(&[&[4.0, 0.0], &[0.0, 9.0]]).unwrap()).unwrap();
        let b = t.constant(Tensor::from_rows(&[&[8.0], &[27.0]]).unwrap()).unwrap();
        let x = t.spd_solve(g, b).unwrap();
        assert!((t.value(x).get(0, 0) - 2.0).abs() < 1e-15);
        assert!((t.value(x).get(1, 0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn non_finite_input_is_an_error() {
        let mut t = Tape::new();
        assert!(matches!(
            t.constant(Tensor::scalar(f64::NAN)),
            Err(Error::NonFinite { .. })
        ));
    }
}
