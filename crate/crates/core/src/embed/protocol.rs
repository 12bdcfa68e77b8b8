//! Multi-run manifold-learning evaluation: embed, cluster with k-means,
//! score against the construction labels, aggregate mean ± std.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::{
    clustering_metrics, kmeans, laplacian_eigenmaps, oa_eigenmaps, pca_embed, ClusterReport, EmbedMethod, Embedding,
    DEFAULT_RESTARTS,
};
use crate::error::{Error, Result};
use crate::geometry::{synth_manifold, Metric, PointCloud, SynthKind};
use crate::train::{train, ModelConfig, TrainConfig};

/// Clusters `emb` into `c` groups and scores the result.
pub fn evaluate_embedding(emb: &Embedding, truth: &[usize], c: usize, restarts: usize, seed: u64) -> Result<ClusterReport> {
    let km = kmeans(&emb.coords, c, restarts, seed)?;
    clustering_metrics(&km.labels, truth)
}

/// Imbalanced subsample: class weights are drawn from a symmetric
/// Dirichlet whose concentration is uniform in `concentration`, then
/// `total` indices are drawn without replacement, class by class, from
/// classes that still have unused points.
pub fn class_weighted_sample(
    labels: &[usize],
    total: usize,
    concentration: (f64, f64),
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    if total > labels.len() {
        return Err(Error::InvalidParam(format!("cannot draw {total} of {} points", labels.len())));
    }
    let (lo, hi) = concentration;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidParam(format!("concentration range ({lo}, {hi}) must be positive")));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        pools[l].push(i);
    }
    let alpha = if hi > lo { rng.random_range(lo..hi) } else { lo };
    // Dirichlet draw as normalized Gamma(α, 1) variates; the scale does not
    // matter for the weighted choice below.
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::InvalidParam(format!("gamma: {e}")))?;
    let weights: Vec<f64> = (0..classes).map(|_| gamma.sample(rng)).collect();
    let mut out = Vec::with_capacity(total);
    while out.len() < total {
        let live: f64 = (0..classes).filter(|&c| !pools[c].is_empty()).map(|c| weights[c]).sum();
        let class = if live > 0.0 {
            let mut u = rng.random::<f64>() * live;
            let mut pick = None;
            for c in (0..classes).filter(|&c| !pools[c].is_empty()) {
                pick = Some(c);
                if u < weights[c] {
                    break;
                }
                u -= weights[c];
            }
            pick.expect("a live class")
        } else {
            // Every remaining class has underflowed to zero weight.
            (0..classes).find(|&c| !pools[c].is_empty()).expect("points remain")
        };
        let pool = &mut pools[class];
        let j = rng.random_range(0..pool.len());
        out.push(pool.swap_remove(j));
    }
    out.sort_unstable();
    Ok(out)
}

/// Where each run's points come from.
#[derive(Clone, Debug)]
pub enum ProtocolData {
    /// Fresh draw per run, seeded with the run seed.
    Synthetic(SynthKind),
    /// The same labeled cloud for every run; only training varies.
    Fixed(PointCloud),
}

#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    pub data: ProtocolData,
    pub methods: Vec<EmbedMethod>,
    pub runs: usize,
    /// Embedding dimension.
    pub k: usize,
    /// Cluster count; the number of construction classes when `None`.
    pub clusters: Option<usize>,
    pub restarts: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Graph for the Laplacian-eigenmaps baseline.
    pub baseline_knn: usize,
    pub baseline_metric: Metric,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodRuns {
    pub method: EmbedMethod,
    pub reports: Vec<ClusterReport>,
}

impl MethodRuns {
    /// Mean and population standard deviation of each metric, in
    /// [`ClusterReport::METRICS`] order.
    pub fn summary(&self) -> Vec<(f64, f64)> {
        let m = self.reports.len() as f64;
        (0..ClusterReport::METRICS.len())
            .map(|i| {
                let vals: Vec<f64> = self.reports.iter().map(|r| r.values()[i]).collect();
                let mean = vals.iter().sum::<f64>() / m;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
                (mean, var.sqrt())
            })
            .collect()
    }

    pub fn mean_of(&self, metric: &str) -> Option<f64> {
        let i = ClusterReport::METRICS.iter().position(|m| *m == metric)?;
        Some(self.summary()[i].0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReports {
    pub methods: Vec<MethodRuns>,
    pub warnings: Vec<String>,
}

impl RunReports {
    pub fn get(&self, method: EmbedMethod) -> Option<&MethodRuns> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Everything one protocol run produced, in `cfg.methods` order.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub run: usize,
    pub seed: u64,
    pub truth: Vec<usize>,
    pub embeddings: Vec<Embedding>,
    pub reports: Vec<ClusterReport>,
}

impl ProtocolConfig {
    pub fn with_defaults(data: SynthKind, model: ModelConfig, train: TrainConfig, k: usize, runs: usize, seed: u64) -> Self {
        ProtocolConfig {
            data: ProtocolData::Synthetic(data),
            methods: vec![EmbedMethod::OaEigenmaps, EmbedMethod::LaplacianEigenmaps, EmbedMethod::Pca],
            runs,
            k,
            clusters: None,
            restarts: DEFAULT_RESTARTS,
            baseline_knn: train.probes.knn_k,
            baseline_metric: train.probes.metric,
            model,
            train,
            seed,
        }
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }
}

/// Run `run` uses seed `cfg.seed + run` for the data draw, the extractor
/// and k-means.
pub fn protocol_run(cfg: &ProtocolConfig, run: usize) -> Result<RunOutput> {
    if cfg.methods.is_empty() {
        return Err(Error::InvalidParam("no embedding methods selected".into()));
    }
    let seed = cfg.run_seed(run);
    let pc = match &cfg.data {
        ProtocolData::Synthetic(kind) => synth_manifold(kind, seed, false)?.cloud,
        ProtocolData::Fixed(pc) => pc.clone(),
    };
    let truth = pc.labels().ok_or_else(|| Error::Contract("protocol data must carry labels".into()))?.to_vec();
    let c = cfg.clusters.unwrap_or_else(|| truth.iter().max().map_or(1, |m| m + 1));
    let mut embeddings = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        embeddings.push(embed_cloud(&pc, cfg, method, seed)?);
    }
    let reports = embeddings
        .iter()
        .map(|e| evaluate_embedding(e, &truth, c, cfg.restarts, seed))
        .collect::<Result<_>>()?;
    Ok(RunOutput { run, seed, truth, embeddings, reports })
}

/// One method's embedding of `pc` under the protocol settings; the
/// extractor is trained with `seed`.
pub fn embed_cloud(pc: &PointCloud, cfg: &ProtocolConfig, method: EmbedMethod, seed: u64) -> Result<Embedding> {
    match method {
        EmbedMethod::OaEigenmaps => {
            let mut tc = cfg.train.clone();
            tc.seed = seed;
            let outcome = train(pc, &cfg.model, &tc)?;
            oa_eigenmaps(&outcome.basis, cfg.k)
        }
        EmbedMethod::LaplacianEigenmaps => laplacian_eigenmaps(pc, cfg.baseline_knn, cfg.k, cfg.baseline_metric),
        EmbedMethod::Pca => pca_embed(pc, cfg.k.min(pc.dim())),
    }
}

/// Merges run outputs by run id, whatever order they arrive in.
pub fn merge_runs(cfg: &ProtocolConfig, mut outputs: Vec<RunOutput>) -> RunReports {
    outputs.sort_by_key(|o| o.run);
    let mut methods: Vec<MethodRuns> =
        cfg.methods.iter().map(|&method| MethodRuns { method, reports: Vec::new() }).collect();
    let mut warnings = Vec::new();
    for o in outputs {
        for ((slot, emb), rep) in methods.iter_mut().zip(o.embeddings).zip(o.reports) {
            warnings.extend(emb.warnings.iter().map(|w| format!("run {} {}: {w}", o.run, emb.method.name())));
            slot.reports.push(rep);
        }
    }
    RunReports { methods, warnings }
}

/// All runs, sequentially.
pub fn run_blob_protocol(cfg: &ProtocolConfig) -> Result<RunReports> {
    if cfg.runs == 0 {
        return Err(Error::InvalidParam("at least one run".into()));
    }
    let outputs = (0..cfg.runs).map(|r| protocol_run(cfg, r)).collect::<Result<Vec<_>>>()?;
    Ok(merge_runs(cfg, outputs))
}

/// Text table: one row per method, `mean ± std` per metric.
pub fn aggregate_table(reports: &RunReports) -> String {
    let mut out = String::from("method");
    for m in ClusterReport::METRICS {
        let _ = write!(out, " | {m}");
    }
    out.push('\n');
    for runs in &reports.methods {
        out.push_str(runs.method.name());
        for (mean, std) in runs.summary() {
            let _ = write!(out, " | {mean:.3} ± {std:.3}");
        }
        out.push('\n');
    }
    out
}

pub fn write_aggregate_csv(reports: &RunReports, path: &Path) -> Result<()> {
    let mut out = String::from("method,metric,mean,std,runs\n");
    for runs in &reports.methods {
        for (name, (mean, std)) in ClusterReport::METRICS.iter().zip(runs.summary()) {
            let _ = writeln!(out, "{},{name},{mean:.16e},{std:.16e},{}", runs.method.name(), runs.reports.len());
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
