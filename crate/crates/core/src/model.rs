//! Pointwise MLP feature extractor `Φ_θ: R^{n×d} → R^{n×K}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::ndiff::{Activation, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct MlpExtractor {
    pub widths: Vec<usize>,
    pub activation: Activation,
    /// `weights[l]` is `widths[l] × widths[l+1]`.
    pub weights: Vec<Tensor>,
    /// `biases[l]` is `1 × widths[l+1]`.
    pub biases: Vec<Tensor>,
}

/// Glorot-uniform weights; biases uniform on `±1/√fan_in`.
///
/// Zero biases make a ReLU network on one-dimensional inputs of one sign
/// exactly rank one, which the QR layer rejects, so the biases are drawn
/// as well.
pub fn init_extractor(widths: &[usize], activation: Activation, seed: u64) -> Result<MlpExtractor> {
    init_extractor_with(widths, activation, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn init_extractor_with(widths: &[usize], activation: Activation, rng: &mut impl Rng) -> Result<MlpExtractor> {
    if widths.len() < 3 {
        return Err(Error::InvalidParam(format!(
            "need input, at least one hidden layer and output widths, got {widths:?}"
        )));
    }
    if widths.contains(&0) {
        return Err(Error::InvalidParam(format!("zero width in {widths:?}")));
    }
    let mut weights = Vec::with_capacity(widths.len() - 1);
    let mut biases = Vec::with_capacity(widths.len() - 1);
    for w in widths.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        weights.push(Tensor::from_fn(fan_in, fan_out, |_, _| rng.random_range(-a..a)));
        let b = 1.0 / (fan_in as f64).sqrt();
        biases.push(Tensor::from_fn(1, fan_out, |_, _| rng.random_range(-b..b)));
    }
    Ok(MlpExtractor {
        widths: widths.to_vec(),
        activation,
        weights,
        biases,
    })
}

impl MlpExtractor {
    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("validated widths")
    }

    /// Parameters in declaration order: `W₀, b₀, W₁, b₁, …`.
    pub fn params(&self) -> Vec<&Tensor> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Records the parameters on `tape`, tracked for gradients when `train`.
    pub fn register(&self, tape: &mut Tape, train: bool) -> Result<Vec<Var>> {
        self.params()
            .into_iter()
            .map(|t| tape.leaf(t.clone(), train))
            .collect()
    }

    /// Applies the network row by row to `x` (`n×d`) using parameters
    /// previously returned by [`MlpExtractor::register`].
    pub fn forward(&self, tape: &mut Tape, params: &[Var], x: Var) -> Result<Var> {
        let (n, d) = tape.value(x).expect_matrix("extractor_forward")?;
        if d != self.input_dim() {
            return Err(Error::dim(
                "extractor_forward",
                format!("input has {d} columns, network expects {}", self.input_dim()),
            ));
        }
        if params.len() != 2 * self.weights.len() {
            return Err(Error::Contract("parameter list does not match the network".into()));
        }
        let ones = tape.constant(Tensor::full(&[n, 1], 1.0))?;
        let layers = self.weights.len();
        let mut h = x;
        for l in 0..layers {
            let z = tape.matmul(h, params[2 * l])?;
            let bias = tape.matmul(ones, params[2 * l + 1])?;
            let z = tape.add(z, bias)?;
            h = if l + 1 < layers { tape.activation(self.activation, z)? } else { z };
        }
        Ok(h)
    }

    /// Plain evaluation without gradient tracking.
    pub fn evaluate(&self, pc: &PointCloud) -> Result<Tensor> {
        let mut tape = Tape::new();
        let (out, _) = extractor_forward(self, &mut tape, pc, false)?;
        Ok(tape.value(out).clone())
    }
}

/// Records the network applied to `pc` on `tape`. Returns the `n×K` output
/// and the parameter handles.
pub fn extractor_forward(
    model: &MlpExtractor,
    tape: &mut Tape,
    pc: &PointCloud,
    train: bool,
) -> Result<(Var, Vec<Var>)> {
    if pc.dim() != model.input_dim() {
        return Err(Error::dim(
            "extractor_forward",
            format!("cloud dimension {} vs network input {}", pc.dim(), model.input_dim()),
        ));
    }
    let params = model.register(tape, train)?;
    let x = tape.constant(pc.to_tensor())?;
    let out = model.forward(tape, &params, x)?;
    Ok((out, params))
}
