//! Reverse-mode differentiation over dense `f64` tensors.

pub mod linalg;
mod tape;
mod tensor;

pub use tape::{gelu, Activation, Reduce, Tape, Var};
pub use tensor::Tensor;

use crate::error::Result;

/// Relative error used by the gradient checks:
/// `|a - n| / (|n| + 1e-8)`, maximized over entries.
pub fn max_rel_error(autodiff: &[f64], numeric: &[f64]) -> f64 {
    autodiff
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (n.abs() + 1e-8))
        .fold(0.0, f64::max)
}

/// Central-difference gradient of a scalar function of several tensors,
/// with respect to `inputs[which]`.
pub fn numeric_gradient(
    f: &mut dyn FnMut(&[Tensor]) -> Result<f64>,
    inputs: &[Tensor],
    which: usize,
    h: f64,
) -> Result<Tensor> {
    let mut work = inputs.to_vec();
    let mut grad = Tensor::zeros(inputs[which].shape());
    for idx in 0..inputs[which].len() {
        let orig = work[which].data()[idx];
        work[which].data_mut()[idx] = orig + h;
        let up = f(&work)?;
        work[which].data_mut()[idx] = orig - h;
        let down = f(&work)?;
        work[which].data_mut()[idx] = orig;
        grad.data_mut()[idx] = (up - down) / (2.0 * h);
    }
    Ok(grad)
}

/// Compares tape gradients of `build` against central differences for every
/// input. `build` records the inputs as parameters (in order) and returns the
/// scalar loss. Returns the worst relative error over all inputs.
pub fn gradient_check(
    build: &dyn Fn(&mut Tape, &[Var]) -> Result<Var>,
    inputs: &[Tensor],
    h: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = inputs
        .iter()
        .map(|t| tape.param(t.clone()))
        .collect::<Result<Vec<_>>>()?;
    let loss = build(&mut tape, &vars)?;
    tape.backward(loss)?;

    let mut eval = |xs: &[Tensor]| -> Result<f64> {
        let mut t = Tape::new();
        let vs = xs
            .iter()
            .map(|x| t.constant(x.clone()))
            .collect::<Result<Vec<_>>>()?;
        let l = build(&mut t, &vs)?;
        Ok(t.value(l).item())
    };
    let mut worst = 0.0f64;
    for (i, v) in vars.iter().enumerate() {
        let numeric = numeric_gradient(&mut eval, inputs, i, h)?;
        let auto = tape
            .grad(*v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[i].shape()));
        worst = worst.max(max_rel_error(auto.data(), numeric.data()));
    }
    Ok(worst)
}
