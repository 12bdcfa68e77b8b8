use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::ndiff::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    /// Decoupled weight decay.
    AdamW,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }

    pub fn adamw(lr: f64, weight_decay: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::AdamW,
            weight_decay,
            ..Self::adam(lr)
        }
    }
}

/// First and second moments per parameter, plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &[&Tensor]) -> Self {
        OptimizerState {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update at learning rate `lr` (which overrides
/// `cfg.lr` so schedules can drive it).
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut OptimizerState,
    cfg: &OptimizerConfig,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::dim("adam_step", "parameter, gradient and state counts differ"));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || state.m[i].shape() != g.shape() {
            return Err(Error::dim("adam_step", format!("parameter {i} shape mismatch")));
        }
        if !g.all_finite() {
            return Err(Error::NonFinite {
                context: format!("gradient of parameter {i}; step aborted"),
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let decay = cfg.kind == OptimizerKind::AdamW && cfg.weight_decay != 0.0;
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (j, (theta, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            if decay {
                *theta -= lr * cfg.weight_decay * *theta;
            }
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
            let mhat = m[j] / bc1;
            let vhat = v[j] / bc2;
            *theta -= lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

pub fn global_norm(grads: &[Tensor]) -> f64 {
    grads.iter().map(|g| g.sq_norm()).sum::<f64>().sqrt()
}

/// Rescales all gradients by `min(1, max_norm/‖g‖)` using the global L2
/// norm. Returns the norm before clipping.
pub fn clip_gradients(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}

#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Constant,
    /// Multiply by `gamma` once the step reaches each milestone fraction
    /// of the run.
    Step { gamma: f64, milestones: Vec<f64> },
    /// Cosine annealing from the base rate to `lr_min`.
    Cosine { lr_min: f64 },
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            Schedule::Step { gamma, milestones } => {
                if !(0.0..=1.0).contains(gamma) {
                    return Err(Error::InvalidParam(format!("gamma {gamma} outside [0, 1]")));
                }
                if milestones.iter().any(|m| !(*m > 0.0 && *m < 1.0))
                    || milestones.windows(2).any(|w| w[0] >= w[1])
                {
                    return Err(Error::InvalidParam("milestones must be increasing in (0, 1)".into()));
                }
                Ok(())
            }
            Schedule::Cosine { lr_min } if !(*lr_min >= 0.0) => {
                Err(Error::InvalidParam(format!("lr_min {lr_min} must be >= 0")))
            }
            _ => Ok(()),
        }
    }
}

/// Learning rate for 0-based `step` of a `total`-step run.
pub fn lr_schedule(lr0: f64, schedule: &Schedule, step: usize, total: usize) -> f64 {
    match schedule {
        Schedule::Constant => lr0,
        Schedule::Step { gamma, milestones } => {
            let passed = milestones
                .iter()
                .filter(|&&f| step >= (f * total as f64).floor() as usize)
                .count();
            lr0 * gamma.powi(passed as i32)
        }
        Schedule::Cosine { lr_min } => {
            let frac = if total == 0 { 1.0 } else { step as f64 / total as f64 };
            lr_min + 0.5 * (lr0 - lr_min) * (1.0 + (PI * frac).cos())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_adam_step_by_hand() {
        let mut p = Tensor::scalar(0.0);
        let g = [Tensor::scalar(1.0)];
        let mut st = OptimizerState::new(&[&p]);
        adam_step(&mut [&mut p], &g, &mut st, &OptimizerConfig::adam(0.1), 0.1).unwrap();
        assert!((p.item() + 0.1).abs() < 1e-8);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        let orig = p.clone();
        let g = [Tensor::zeros(&[3])];
        let mut st = OptimizerState::new(&[&p]);
        for _ in 0..3 {
            adam_step(&mut [&mut p], &g, &mut st, &OptimizerConfig::adam(0.1), 0.1).unwrap();
        }
        assert_eq!(p, orig);
    }

    #[test]
    fn adamw_without_decay_is_adam() {
        let g = [Tensor::new(vec![2], vec![0.3, -0.7]).unwrap()];
        let mut a = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let mut b = a.clone();
        let mut sa = OptimizerState::new(&[&a]);
        let mut sb = sa.clone();
        for _ in 0..5 {
            adam_step(&mut [&mut a], &g, &mut sa, &OptimizerConfig::adam(0.01), 0.01).unwrap();
            adam_step(&mut [&mut b], &g, &mut sb, &OptimizerConfig::adamw(0.01, 0.0), 0.01).unwrap();
        }
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = Tensor::scalar(0.0);
        let mut st = OptimizerState::new(&[&p]);
        let g = [Tensor::scalar(f64::NAN)];
        assert!(adam_step(&mut [&mut p], &g, &mut st, &OptimizerConfig::adam(0.1), 0.1).is_err());
        assert_eq!(st.step, 0);
    }

    #[test]
    fn clipping_cases() {
        let mut small = vec![Tensor::new(vec![2], vec![0.003, 0.004]).unwrap()];
        clip_gradients(&mut small, 0.01);
        assert_eq!(small[0].data(), &[0.003, 0.004]);
        let mut big = vec![Tensor::new(vec![2], vec![0.6, 0.8]).unwrap()];
        clip_gradients(&mut big, 0.01);
        assert!((big[0].data()[0] - 0.006).abs() < 1e-15);
        assert!((global_norm(&big) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn schedules() {
        let s = Schedule::Step { gamma: 0.1, milestones: vec![0.3, 0.7] };
        assert_eq!(lr_schedule(1e-2, &s, 0, 100), 1e-2);
        assert!((lr_schedule(1e-2, &s, 80, 100) - 1e-4).abs() < 1e-18);
        let c = Schedule::Cosine { lr_min: 1e-5 };
        assert_eq!(lr_schedule(1e-3, &c, 0, 10), 1e-3);
        assert!((lr_schedule(1e-3, &c, 10, 10) - 1e-5).abs() < 1e-18);
        assert!((lr_schedule(1e-3, &c, 5, 10) - (1e-3 + 1e-5) / 2.0).abs() < 1e-15);
        assert!(Schedule::Step { gamma: 0.1, milestones: vec![0.7, 0.3] }.validate().is_err());
    }
}
