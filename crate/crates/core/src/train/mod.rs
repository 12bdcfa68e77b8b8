//! Optimization loop: probes → extractor → QR → mass → progressive
//! reconstruction loss → backward → clip → optimizer.

mod checkpoint;
mod optim;
pub mod presets;

pub use checkpoint::{Checkpoint, MAGIC};
pub use optim::{
    adam_step, clip_gradients, global_norm, lr_schedule, OptimizerConfig, OptimizerKind, OptimizerState, Schedule,
};

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::model::{extractor_forward, init_extractor_with, MlpExtractor};
use crate::ndiff::{linalg, Activation, Tape, Tensor};
use crate::probes::{ProbeConfig, ProbeGenerator};
use crate::seeds::{stream_rng, Stream};
use crate::spectral::{
    estimate_eigenvalues, extract_mass, extract_mass_var, orthonormalize, progressive_project_prefix,
    reconstruction_loss, ReconstructionReport, SpectralBasis,
};

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    /// Basis size `K` (network output width).
    pub k: usize,
    /// Per-step probes; the `seed` field is ignored in favor of the
    /// master seed's probe stream.
    pub probes: ProbeConfig,
    /// Inference probes for eigenvalue estimates and periodic evaluation.
    pub eval_probes: ProbeConfig,
    pub optimizer: OptimizerConfig,
    pub schedule: Schedule,
    pub grad_clip: Option<f64>,
    pub seed: u64,
    /// Evaluate worst-case errors every this many steps; 0 disables.
    pub eval_every: usize,
    pub monotonic_eigenvalues: bool,
}

impl TrainConfig {
    pub fn validate(&self, pc: &PointCloud) -> Result<()> {
        if self.k < 1 || self.k >= pc.n() {
            return Err(Error::InvalidParam(format!("K = {} must be in 1..{}", self.k, pc.n())));
        }
        if !(self.optimizer.lr > 0.0) {
            return Err(Error::InvalidParam("learning rate must be > 0".into()));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(Error::InvalidParam("grad_clip must be > 0 when set".into()));
            }
        }
        self.schedule.validate()?;
        self.probes.validate()?;
        self.eval_probes.validate()
    }
}

/// Default config digest when the caller has no canonical document.
pub fn config_digest(model: &ModelConfig, cfg: &TrainConfig) -> [u8; 32] {
    Sha256::digest(format!("{model:?}\n{cfg:?}").as_bytes()).into()
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub e_max: Option<Vec<f64>>,
}

pub fn write_history_csv(rows: &[HistoryRow], k: usize, path: &Path) -> Result<()> {
    let mut out = String::from("step,lr,loss");
    for j in 1..=k {
        let _ = write!(out, ",e_max_{j}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{:.16e},{:.16e}", r.step, r.lr, r.loss);
        for j in 0..k {
            match &r.e_max {
                Some(e) => {
                    let _ = write!(out, ",{:.16e}", e[j]);
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Resumable training state for one point cloud.
pub struct Trainer {
    cloud: PointCloud,
    cfg: TrainConfig,
    model: MlpExtractor,
    state: OptimizerState,
    step: usize,
    probes: ProbeGenerator,
    eval: ProbeGenerator,
    history: Vec<HistoryRow>,
    config_hash: [u8; 32],
}

fn at(step: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::AtStep {
        step,
        source: Box::new(e),
    }
}

impl Trainer {
    pub fn new(cloud: PointCloud, model_cfg: &ModelConfig, cfg: TrainConfig) -> Result<Self> {
        let hash = config_digest(model_cfg, &cfg);
        Self::with_hash(cloud, model_cfg, cfg, hash)
    }

    pub fn with_hash(cloud: PointCloud, model_cfg: &ModelConfig, cfg: TrainConfig, config_hash: [u8; 32]) -> Result<Self> {
        cfg.validate(&cloud)?;
        let mut widths = vec![cloud.dim()];
        widths.extend_from_slice(&model_cfg.hidden);
        widths.push(cfg.k);
        let model = init_extractor_with(&widths, model_cfg.activation, &mut stream_rng(cfg.seed, Stream::Init, 0))?;
        let state = OptimizerState::new(&model.params());
        let probes = ProbeGenerator::new(&cloud, cfg.probes.clone())?;
        let eval = ProbeGenerator::new(&cloud, cfg.eval_probes.clone())?;
        Ok(Trainer {
            cloud,
            cfg,
            model,
            state,
            step: 0,
            probes,
            eval,
            history: Vec::new(),
            config_hash,
        })
    }

    /// Restores parameters, optimizer moments and the step counter.
    pub fn resume(cloud: PointCloud, model_cfg: &ModelConfig, cfg: TrainConfig, ckpt: &Checkpoint) -> Result<Self> {
        let mut t = Self::with_hash(cloud, model_cfg, cfg, ckpt.config_hash)?;
        let shapes = t.model.params();
        let params = Checkpoint::shaped(&ckpt.params, &shapes)?;
        let m = Checkpoint::shaped(&ckpt.adam_m, &shapes)?;
        let v = Checkpoint::shaped(&ckpt.adam_v, &shapes)?;
        for (dst, src) in t.model.params_mut().into_iter().zip(params) {
            *dst = src;
        }
        t.state = OptimizerState {
            m,
            v,
            step: ckpt.optimizer_step,
        };
        t.step = ckpt.step as usize;
        if t.step > t.cfg.steps {
            return Err(Error::Contract(format!(
                "checkpoint step {} beyond configured {} steps",
                t.step, t.cfg.steps
            )));
        }
        Ok(t)
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn model(&self) -> &MlpExtractor {
        &self.model
    }

    pub fn history(&self) -> &[HistoryRow] {
        &self.history
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.cfg.steps
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let flat = |ts: &[Tensor]| ts.iter().map(|t| t.data().to_vec()).collect();
        Checkpoint {
            config_hash: self.config_hash,
            step: self.step as u64,
            params: self.model.params().iter().map(|t| t.data().to_vec()).collect(),
            adam_m: flat(&self.state.m),
            adam_v: flat(&self.state.v),
            optimizer_step: self.state.step,
            rng_positions: vec![(Stream::Probes as u64, self.step as u64)],
        }
    }

    /// One optimizer step; returns the loss before the update.
    pub fn step_once(&mut self) -> Result<f64> {
        let t = self.step;
        let lr = lr_schedule(self.cfg.optimizer.lr, &self.cfg.schedule, t, self.cfg.steps);
        let batch = self
            .probes
            .generate(&mut stream_rng(self.cfg.seed, Stream::Probes, t as u64))
            .map_err(at(t))?;

        let mut tape = Tape::new();
        let (loss, params) = (|| {
            let (feats, params) = extractor_forward(&self.model, &mut tape, &self.cloud, true)?;
            let (q, _) = orthonormalize(&mut tape, feats)?;
            let mass = extract_mass_var(&mut tape, q)?;
            let f = tape.constant(batch.columns())?;
            let (loss, _) = reconstruction_loss(&mut tape, q, mass, f)?;
            tape.backward(loss)?;
            Ok((loss, params))
        })()
        .map_err(at(t))?;
        let loss_value = tape.value(loss).item();
        if !loss_value.is_finite() {
            return Err(at(t)(Error::NonFinite { context: "loss".into() }));
        }
        let mut grads: Vec<Tensor> = params
            .iter()
            .map(|&p| tape.grad(p).cloned().unwrap_or_else(|| Tensor::zeros(tape.value(p).shape())))
            .collect();
        drop(tape);
        if let Some(c) = self.cfg.grad_clip {
            clip_gradients(&mut grads, c);
        }
        adam_step(&mut self.model.params_mut(), &grads, &mut self.state, &self.cfg.optimizer, lr).map_err(at(t))?;

        let e_max = if self.cfg.eval_every > 0 && (t + 1) % self.cfg.eval_every == 0 {
            Some(self.evaluate(t as u64 + 1).map_err(at(t))?.max)
        } else {
            None
        };
        self.history.push(HistoryRow {
            step: t,
            lr,
            loss: loss_value,
            e_max,
        });
        self.step += 1;
        Ok(loss_value)
    }

    pub fn run_until(&mut self, step: usize) -> Result<()> {
        while self.step < step.min(self.cfg.steps) {
            self.step_once()?;
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_until(self.cfg.steps)
    }

    /// Orthonormal basis and mass from the current parameters, without
    /// gradient tracking.
    pub fn current_basis(&self) -> Result<SpectralBasis> {
        basis_from_model(&self.model, &self.cloud)
    }

    /// Worst-case and mean errors of the current basis on an inference batch
    /// drawn from the eval stream at `index`.
    pub fn evaluate(&self, index: u64) -> Result<ReconstructionReport> {
        let basis = self.current_basis()?;
        let batch = self.eval.generate(&mut stream_rng(self.cfg.seed, Stream::Eval, index))?;
        let (_, report) = progressive_project_prefix(&basis.q, &basis.mass, &batch.columns())?;
        Ok(report)
    }

    /// Final basis with eigenvalue estimates from the inference probes.
    pub fn finalize(&self) -> Result<SpectralBasis> {
        let mut basis = self.current_basis()?;
        let report = self.evaluate(self.cfg.steps as u64 + 1)?;
        basis.lambdas = estimate_eigenvalues(&report, self.cfg.monotonic_eigenvalues);
        Ok(basis)
    }
}

/// QR of the network output and mass from its first column.
pub fn basis_from_model(model: &MlpExtractor, pc: &PointCloud) -> Result<SpectralBasis> {
    let feats = model.evaluate(pc)?;
    let (q, _) = linalg::householder_qr(&feats)?;
    let (mass, _) = extract_mass(&q)?;
    let k = q.cols();
    Ok(SpectralBasis {
        q,
        mass,
        lambdas: vec![0.0; k],
    })
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub basis: SpectralBasis,
    pub history: Vec<HistoryRow>,
    pub model: MlpExtractor,
}

pub fn train(pc: &PointCloud, model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut t = Trainer::new(pc.clone(), model_cfg, cfg.clone())?;
    t.run()?;
    Ok(TrainOutcome {
        basis: t.finalize()?,
        history: t.history,
        model: t.model,
    })
}
