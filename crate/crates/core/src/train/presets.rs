//! Experiment presets.

use super::{ModelConfig, OptimizerConfig, Schedule, TrainConfig};
use crate::geometry::{Metric, SynthKind};
use crate::ndiff::Activation;
use crate::probes::{ProbeConfig, Sigma};

/// Fixed inference probes for eigenvalue estimates: k = 70, 48 iterations,
/// σ = 0.101, m = 2048.
pub fn eigen_inference_probes() -> ProbeConfig {
    ProbeConfig {
        m: 2048,
        smoothing_iterations: 48,
        sigma: Sigma::Fixed(0.101),
        knn_k: 70,
        metric: Metric::Euclidean,
        self_loops: true,
        seed: 0,
    }
}

/// 100-point grid on `[0, 1]`.
pub fn seg1d_data() -> SynthKind {
    SynthKind::Segment { n: 100, jitter: 0.0 }
}

pub fn seg1d_model() -> ModelConfig {
    ModelConfig {
        hidden: vec![64, 64, 64],
        activation: Activation::Relu,
    }
}

/// Segment toy: K = 5, Adam 1e-2, ×0.1 at 30% and 70%, probes smoothed a
/// few times on the 16-NN graph.
pub fn seg1d_train(seed: u64) -> TrainConfig {
    TrainConfig {
        steps: 1500,
        k: 5,
        probes: ProbeConfig {
            m: 256,
            smoothing_iterations: 5,
            sigma: Sigma::Fixed(0.05),
            knn_k: 16,
            metric: Metric::Euclidean,
            self_loops: true,
            seed,
        },
        eval_probes: eigen_inference_probes(),
        optimizer: OptimizerConfig::adam(1e-2),
        schedule: Schedule::Step {
            gamma: 0.1,
            milestones: vec![0.3, 0.7],
        },
        grad_clip: None,
        seed,
        eval_every: 0,
        monotonic_eigenvalues: false,
    }
}

/// Level-3 icosphere, 642 points.
pub fn sphere3d_data() -> SynthKind {
    SynthKind::Sphere { level: 3, radius: 1.0 }
}

pub fn sphere3d_model() -> ModelConfig {
    ModelConfig {
        hidden: vec![128, 128, 128],
        activation: Activation::Gelu,
    }
}

/// Single-shape overfit: AdamW 1e-3, cosine to 1e-5, clip 0.01, 40
/// smoothing iterations on a 10-NN graph without self loops, σ ∈ [0.01, 0.2].
pub fn sphere3d_train(seed: u64) -> TrainConfig {
    TrainConfig {
        steps: 600,
        k: 16,
        probes: ProbeConfig {
            m: 256,
            smoothing_iterations: 40,
            sigma: Sigma::Range(0.01, 0.2),
            knn_k: 10,
            metric: Metric::Euclidean,
            self_loops: false,
            seed,
        },
        eval_probes: eigen_inference_probes(),
        optimizer: OptimizerConfig::adamw(1e-3, 0.0),
        schedule: Schedule::Cosine { lr_min: 1e-5 },
        grad_clip: Some(0.01),
        seed,
        eval_every: 0,
        monotonic_eigenvalues: false,
    }
}

/// Three separated Gaussian blobs in `R^20`.
pub fn blobs_data() -> SynthKind {
    SynthKind::Blobs {
        clusters: 3,
        n: 600,
        dim: 20,
        sigma: 0.05,
        separation: 1.0,
    }
}

pub fn blobs_model() -> ModelConfig {
    ModelConfig {
        hidden: vec![64, 64],
        activation: Activation::Gelu,
    }
}

/// Feature-space setting: cosine kNN with self loops.
pub fn blobs_train(seed: u64) -> TrainConfig {
    TrainConfig {
        steps: 200,
        k: 4,
        probes: ProbeConfig {
            m: 128,
            smoothing_iterations: 20,
            sigma: Sigma::Fixed(0.1),
            knn_k: 10,
            metric: Metric::Cosine,
            self_loops: true,
            seed,
        },
        eval_probes: ProbeConfig {
            m: 256,
            ..eigen_inference_probes()
        },
        optimizer: OptimizerConfig::adamw(1e-3, 0.0),
        schedule: Schedule::Cosine { lr_min: 1e-5 },
        grad_clip: Some(0.01),
        seed,
        eval_every: 0,
        monotonic_eigenvalues: false,
    }
}
