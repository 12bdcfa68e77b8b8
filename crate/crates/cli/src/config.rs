//! Run configuration: a TOML document layered over a preset.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use oae_core::geometry::{Metric, SynthKind};
use oae_core::ndiff::Activation;
use oae_core::probes::{ProbeConfig, Sigma};
use oae_core::train::{presets, ModelConfig, OptimizerConfig, OptimizerKind, Schedule, TrainConfig};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub probes: ProbeSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub embed: EmbedSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Synthetic kind, or `file` together with `path`.
    pub kind: Option<String>,
    pub path: Option<PathBuf>,
    pub n: Option<usize>,
    pub jitter: Option<f64>,
    pub radius: Option<f64>,
    pub level: Option<u32>,
    pub major: Option<f64>,
    pub minor: Option<f64>,
    pub n_major: Option<usize>,
    pub n_minor: Option<usize>,
    pub noise: Option<f64>,
    pub clusters: Option<usize>,
    pub dim: Option<usize>,
    pub sigma: Option<f64>,
    pub separation: Option<f64>,
    /// Center and scale into the unit ball.
    pub normalize: Option<bool>,
    /// Farthest-point subsample size.
    pub fps: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub m: Option<usize>,
    pub smoothing_iterations: Option<usize>,
    pub sigma: Option<f64>,
    pub sigma_range: Option<[f64; 2]>,
    pub knn_k: Option<usize>,
    pub metric: Option<String>,
    pub self_loops: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: Option<Vec<usize>>,
    pub activation: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub steps: Option<usize>,
    pub k: Option<usize>,
    pub optimizer: Option<String>,
    pub lr: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
    pub weight_decay: Option<f64>,
    pub schedule: Option<String>,
    pub gamma: Option<f64>,
    pub milestones: Option<Vec<f64>>,
    pub lr_min: Option<f64>,
    /// 0 disables clipping.
    pub grad_clip: Option<f64>,
    pub eval_every: Option<usize>,
    pub monotonic_eigenvalues: Option<bool>,
    /// Write a checkpoint every this many steps; 0 only at the end.
    pub checkpoint_every: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub m: Option<usize>,
    pub smoothing_iterations: Option<usize>,
    pub sigma: Option<f64>,
    pub knn_k: Option<usize>,
    pub metric: Option<String>,
    pub self_loops: Option<bool>,
    /// `segment`, `cotangent`, `graph` or `none`.
    pub oracle: Option<String>,
    /// Number of basis columns compared.
    pub upto: Option<usize>,
    /// Relative gap below which oracle eigenvalues share a cluster.
    pub cluster_tol: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedSection {
    pub method: Option<String>,
    pub k: Option<usize>,
    pub runs: Option<usize>,
    pub clusters: Option<usize>,
    pub restarts: Option<usize>,
    pub baseline_knn: Option<usize>,
    pub baseline_metric: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Seg1d,
    Sphere3d,
    Blobs,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "seg1d" => Ok(Preset::Seg1d),
            "sphere3d" => Ok(Preset::Sphere3d),
            "blobs" => Ok(Preset::Blobs),
            _ => Err(CliError::config(format!("unknown preset `{s}` (seg1d, sphere3d, blobs)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Seg1d => "seg1d",
            Preset::Sphere3d => "sphere3d",
            Preset::Blobs => "blobs",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSpec {
    Synthetic(SynthKind),
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleKind {
    /// Closed-form cosines on a uniform segment grid.
    Segment,
    /// Cotangent Laplacian of the synthetic mesh.
    Cotangent,
    /// Binary kNN graph Laplacian on the evaluation graph.
    Graph,
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSpec {
    pub oracle: OracleKind,
    pub upto: Option<usize>,
    pub cluster_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedSpec {
    pub methods: Vec<oae_core::embed::EmbedMethod>,
    pub k: usize,
    pub runs: usize,
    pub clusters: Option<usize>,
    pub restarts: usize,
    pub baseline_knn: usize,
    pub baseline_metric: Metric,
}

/// A config with every default filled in.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub preset: Preset,
    pub seed: u64,
    pub data: DataSpec,
    pub normalize: bool,
    pub fps: Option<usize>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub checkpoint_every: usize,
    pub eval: EvalSpec,
    pub embed: EmbedSpec,
    /// Hex sha256 of the canonical document.
    pub hash: String,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(1, |s| line_of(text, s.start));
            CliError::config(format!("{}:{line}: {}", path.display(), e.message()))
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    /// Sorted-key TOML; identical for documents that differ only in key
    /// order or formatting.
    pub fn canonical(&self) -> String {
        let value = toml::Value::try_from(self).expect("config serializes");
        toml::to_string(&value).expect("toml value serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let preset = Preset::parse(self.preset.as_deref().unwrap_or("seg1d"))?;
        let seed = self.seed.unwrap_or(0);
        let (data, normalize, fps) = self.data.resolve(preset)?;
        let model = self.model.resolve(preset)?;
        let (train, checkpoint_every) = self.train.resolve(preset, seed, &self.probes, &self.eval)?;
        let eval = self.eval.resolve(preset)?;
        let embed = self.embed.resolve(preset, &train)?;
        Ok(Resolved {
            preset,
            seed,
            data,
            normalize,
            fps,
            model,
            train,
            checkpoint_every,
            eval,
            embed,
            hash: self.hash(),
        })
    }
}

fn metric(s: &str) -> Result<Metric, CliError> {
    match s {
        "euclidean" => Ok(Metric::Euclidean),
        "cosine" => Ok(Metric::Cosine),
        _ => Err(CliError::config(format!("unknown metric `{s}` (euclidean, cosine)"))),
    }
}

fn activation(s: &str) -> Result<Activation, CliError> {
    match s {
        "relu" => Ok(Activation::Relu),
        "gelu" => Ok(Activation::Gelu),
        "tanh" => Ok(Activation::Tanh),
        _ => Err(CliError::config(format!("unknown activation `{s}` (relu, gelu, tanh)"))),
    }
}

fn preset_data(p: Preset) -> SynthKind {
    match p {
        Preset::Seg1d => presets::seg1d_data(),
        Preset::Sphere3d => presets::sphere3d_data(),
        Preset::Blobs => presets::blobs_data(),
    }
}

pub fn default_kind(name: &str) -> Result<SynthKind, CliError> {
    Ok(match name {
        "segment" => SynthKind::Segment { n: 100, jitter: 0.0 },
        "circle" => SynthKind::Circle { n: 100, radius: 1.0, jitter: 0.0 },
        "sphere" => SynthKind::Sphere { level: 3, radius: 1.0 },
        "torus" => SynthKind::Torus { major: 1.0, minor: 0.4, n_major: 32, n_minor: 16 },
        "swiss_roll" => SynthKind::SwissRoll { n: 800, noise: 0.0 },
        "blobs" => presets::blobs_data(),
        _ => {
            return Err(CliError::config(format!(
                "unknown data kind `{name}` (segment, circle, sphere, torus, swiss_roll, blobs, file)"
            )))
        }
    })
}

impl DataSection {
    /// Applies the explicitly set fields to `kind`; fields that do not
    /// belong to the kind are rejected.
    pub fn apply(&self, mut kind: SynthKind) -> Result<SynthKind, CliError> {
        let mut used = Vec::new();
        macro_rules! set {
            ($field:ident, $target:expr) => {
                if let Some(v) = self.$field {
                    *$target = v;
                    used.push(stringify!($field));
                }
            };
        }
        match &mut kind {
            SynthKind::Segment { n, jitter } => {
                set!(n, n);
                set!(jitter, jitter);
            }
            SynthKind::Circle { n, radius, jitter } => {
                set!(n, n);
                set!(radius, radius);
                set!(jitter, jitter);
            }
            SynthKind::Sphere { level, radius } => {
                set!(level, level);
                set!(radius, radius);
            }
            SynthKind::Torus { major, minor, n_major, n_minor } => {
                set!(major, major);
                set!(minor, minor);
                set!(n_major, n_major);
                set!(n_minor, n_minor);
            }
            SynthKind::SwissRoll { n, noise } => {
                set!(n, n);
                set!(noise, noise);
            }
            SynthKind::Blobs { clusters, n, dim, sigma, separation } => {
                set!(clusters, clusters);
                set!(n, n);
                set!(dim, dim);
                set!(sigma, sigma);
                set!(separation, separation);
            }
        }
        let given = [
            ("n", self.n.is_some()),
            ("jitter", self.jitter.is_some()),
            ("radius", self.radius.is_some()),
            ("level", self.level.is_some()),
            ("major", self.major.is_some()),
            ("minor", self.minor.is_some()),
            ("n_major", self.n_major.is_some()),
            ("n_minor", self.n_minor.is_some()),
            ("noise", self.noise.is_some()),
            ("clusters", self.clusters.is_some()),
            ("dim", self.dim.is_some()),
            ("sigma", self.sigma.is_some()),
            ("separation", self.separation.is_some()),
        ];
        if let Some((name, _)) = given.iter().find(|(name, set)| *set && !used.contains(name)) {
            return Err(CliError::config(format!("[data] {name} does not apply to {}", kind.name())));
        }
        Ok(kind)
    }

    fn resolve(&self, preset: Preset) -> Result<(DataSpec, bool, Option<usize>), CliError> {
        let spec = match self.kind.as_deref() {
            Some("file") => {
                let path = self.path.clone().ok_or_else(|| CliError::config("[data] kind = \"file\" needs path"))?;
                DataSpec::File(path)
            }
            Some(name) => {
                if self.path.is_some() {
                    return Err(CliError::config("[data] path only applies to kind = \"file\""));
                }
                DataSpec::Synthetic(self.apply(default_kind(name)?)?)
            }
            None if self.path.is_some() => DataSpec::File(self.path.clone().expect("checked")),
            None => DataSpec::Synthetic(self.apply(preset_data(preset))?),
        };
        Ok((spec, self.normalize.unwrap_or(false), self.fps))
    }
}

impl ModelSection {
    fn resolve(&self, preset: Preset) -> Result<ModelConfig, CliError> {
        let mut m = match preset {
            Preset::Seg1d => presets::seg1d_model(),
            Preset::Sphere3d => presets::sphere3d_model(),
            Preset::Blobs => presets::blobs_model(),
        };
        if let Some(h) = &self.hidden {
            m.hidden = h.clone();
        }
        if let Some(a) = &self.activation {
            m.activation = activation(a)?;
        }
        Ok(m)
    }
}

fn apply_probe_fields(
    cfg: &mut ProbeConfig,
    m: Option<usize>,
    iters: Option<usize>,
    sigma: Option<f64>,
    knn_k: Option<usize>,
    metric_name: Option<&str>,
    self_loops: Option<bool>,
) -> Result<(), CliError> {
    if let Some(v) = m {
        cfg.m = v;
    }
    if let Some(v) = iters {
        cfg.smoothing_iterations = v;
    }
    if let Some(v) = sigma {
        cfg.sigma = Sigma::Fixed(v);
    }
    if let Some(v) = knn_k {
        cfg.knn_k = v;
    }
    if let Some(v) = metric_name {
        cfg.metric = metric(v)?;
    }
    if let Some(v) = self_loops {
        cfg.self_loops = v;
    }
    Ok(())
}

impl TrainSection {
    fn resolve(
        &self,
        preset: Preset,
        seed: u64,
        probes: &ProbeSection,
        eval: &EvalSection,
    ) -> Result<(TrainConfig, usize), CliError> {
        let mut t = match preset {
            Preset::Seg1d => presets::seg1d_train(seed),
            Preset::Sphere3d => presets::sphere3d_train(seed),
            Preset::Blobs => presets::blobs_train(seed),
        };
        if probes.sigma.is_some() && probes.sigma_range.is_some() {
            return Err(CliError::config("[probes] set either sigma or sigma_range, not both"));
        }
        apply_probe_fields(
            &mut t.probes,
            probes.m,
            probes.smoothing_iterations,
            probes.sigma,
            probes.knn_k,
            probes.metric.as_deref(),
            probes.self_loops,
        )?;
        if let Some([lo, hi]) = probes.sigma_range {
            t.probes.sigma = Sigma::Range(lo, hi);
        }
        apply_probe_fields(
            &mut t.eval_probes,
            eval.m,
            eval.smoothing_iterations,
            eval.sigma,
            eval.knn_k,
            eval.metric.as_deref(),
            eval.self_loops,
        )?;
        if let Some(v) = self.steps {
            t.steps = v;
        }
        if let Some(v) = self.k {
            t.k = v;
        }
        if let Some(name) = &self.optimizer {
            t.optimizer.kind = match name.as_str() {
                "adam" => OptimizerKind::Adam,
                "adamw" => OptimizerKind::AdamW,
                _ => return Err(CliError::config(format!("unknown optimizer `{name}` (adam, adamw)"))),
            };
        }
        let o: &mut OptimizerConfig = &mut t.optimizer;
        for (src, dst) in [
            (self.lr, &mut o.lr),
            (self.beta1, &mut o.beta1),
            (self.beta2, &mut o.beta2),
            (self.eps, &mut o.eps),
            (self.weight_decay, &mut o.weight_decay),
        ] {
            if let Some(v) = src {
                *dst = v;
            }
        }
        if let Some(name) = &self.schedule {
            t.schedule = match name.as_str() {
                "constant" => Schedule::Constant,
                "step" => Schedule::Step { gamma: 0.1, milestones: vec![0.3, 0.7] },
                "cosine" => Schedule::Cosine { lr_min: 1e-5 },
                _ => return Err(CliError::config(format!("unknown schedule `{name}` (constant, step, cosine)"))),
            };
        }
        match &mut t.schedule {
            Schedule::Step { gamma, milestones } => {
                if let Some(g) = self.gamma {
                    *gamma = g;
                }
                if let Some(m) = &self.milestones {
                    *milestones = m.clone();
                }
                if self.lr_min.is_some() {
                    return Err(CliError::config("[train] lr_min applies to the cosine schedule"));
                }
            }
            Schedule::Cosine { lr_min } => {
                if let Some(v) = self.lr_min {
                    *lr_min = v;
                }
                if self.gamma.is_some() || self.milestones.is_some() {
                    return Err(CliError::config("[train] gamma and milestones apply to the step schedule"));
                }
            }
            Schedule::Constant => {
                if self.gamma.is_some() || self.milestones.is_some() || self.lr_min.is_some() {
                    return Err(CliError::config("[train] the constant schedule takes no parameters"));
                }
            }
        }
        if let Some(c) = self.grad_clip {
            t.grad_clip = (c > 0.0).then_some(c);
        }
        if let Some(v) = self.eval_every {
            t.eval_every = v;
        }
        if let Some(v) = self.monotonic_eigenvalues {
            t.monotonic_eigenvalues = v;
        }
        Ok((t, self.checkpoint_every.unwrap_or(0)))
    }
}

impl EvalSection {
    fn resolve(&self, preset: Preset) -> Result<EvalSpec, CliError> {
        let oracle = match self.oracle.as_deref() {
            None => match preset {
                Preset::Seg1d => OracleKind::Segment,
                Preset::Sphere3d => OracleKind::Cotangent,
                Preset::Blobs => OracleKind::Graph,
            },
            Some(name) => parse_oracle(name)?,
        };
        Ok(EvalSpec {
            oracle,
            upto: self.upto,
            cluster_tol: self.cluster_tol.unwrap_or(0.05),
        })
    }
}

pub fn parse_oracle(name: &str) -> Result<OracleKind, CliError> {
    match name {
        "segment" => Ok(OracleKind::Segment),
        "cotangent" => Ok(OracleKind::Cotangent),
        "graph" => Ok(OracleKind::Graph),
        "none" => Ok(OracleKind::None),
        _ => Err(CliError::config(format!("unknown oracle `{name}` (segment, cotangent, graph, none)"))),
    }
}

pub fn parse_methods(s: &str) -> Result<Vec<oae_core::embed::EmbedMethod>, CliError> {
    use oae_core::embed::EmbedMethod;
    if s == "all" {
        return Ok(vec![EmbedMethod::OaEigenmaps, EmbedMethod::LaplacianEigenmaps, EmbedMethod::Pca]);
    }
    s.split(',')
        .map(|m| {
            EmbedMethod::parse(m.trim()).ok_or_else(|| {
                CliError::config(format!("unknown method `{m}` (oa-eigenmaps, laplacian-eigenmaps, pca, all)"))
            })
        })
        .collect()
}

impl EmbedSection {
    fn resolve(&self, preset: Preset, train: &TrainConfig) -> Result<EmbedSpec, CliError> {
        let methods = parse_methods(self.method.as_deref().unwrap_or("all"))?;
        let k = self.k.unwrap_or(match preset {
            Preset::Seg1d => 1,
            _ => 2,
        });
        Ok(EmbedSpec {
            methods,
            k,
            runs: self.runs.unwrap_or(1),
            clusters: self.clusters,
            restarts: self.restarts.unwrap_or(oae_core::embed::DEFAULT_RESTARTS),
            baseline_knn: self.baseline_knn.unwrap_or(train.probes.knn_k),
            baseline_metric: match &self.baseline_metric {
                Some(m) => metric(m)?,
                None => train.probes.metric,
            },
        })
    }
}
