//! Random probe functions: uniform noise smoothed by a Gaussian kNN kernel.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{build_knn, KnnGraph, Metric, PointCloud};
use crate::ndiff::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sigma {
    Fixed(f64),
    /// Drawn uniformly per probe from `[lo, hi]`.
    Range(f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    pub m: usize,
    pub smoothing_iterations: usize,
    pub sigma: Sigma,
    pub knn_k: usize,
    pub metric: Metric,
    pub self_loops: bool,
    pub seed: u64,
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidParam("probe count m must be >= 1".into()));
        }
        match self.sigma {
            Sigma::Fixed(s) if !(s > 0.0) => Err(Error::InvalidParam(format!("sigma {s} must be > 0"))),
            Sigma::Range(lo, hi) if !(lo > 0.0 && lo <= hi) => Err(Error::InvalidParam(format!(
                "sigma range [{lo}, {hi}] must satisfy 0 < lo <= hi"
            ))),
            _ => Ok(()),
        }
    }
}

/// `m` probe signals on `n` points, stored `m×n` (one probe per row).
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeBatch {
    pub signals: Tensor,
    pub config: ProbeConfig,
}

impl ProbeBatch {
    pub fn m(&self) -> usize {
        self.signals.rows()
    }

    /// Signals as an `n×m` matrix (one probe per column).
    pub fn columns(&self) -> Tensor {
        self.signals.transpose()
    }
}

/// i.i.d. uniform values on `[−1, 1]`, `m×n`.
pub fn sample_raw_signals(n: usize, m: usize, rng: &mut impl Rng) -> Tensor {
    let data = (0..n * m).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Tensor::matrix(m, n, data).expect("consistent shape")
}

/// Row-stochastic smoothing operator stored on the graph's neighbor lists.
#[derive(Clone, Debug, PartialEq)]
pub struct Smoother {
    n: usize,
    width: usize,
    ids: Vec<usize>,
    weights: Vec<f64>,
}

impl Smoother {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let w = self.width;
        (&self.ids[i * w..(i + 1) * w], &self.weights[i * w..(i + 1) * w])
    }

    /// Dense `n×n` form, for tests and small problems.
    pub fn to_dense(&self) -> Tensor {
        let mut d = Tensor::zeros(&[self.n, self.n]);
        for i in 0..self.n {
            let (ids, ws) = self.row(i);
            for (&j, &w) in ids.iter().zip(ws) {
                let v = d.get(i, j) + w;
                d.set(i, j, v);
            }
        }
        d
    }

    /// `S·f` for a signal of length `n`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (ids, ws) = self.row(i);
                ids.iter().zip(ws).map(|(&j, &w)| w * f[j]).sum()
            })
            .collect()
    }
}

fn kernel_weights(graph: &KnnGraph, sigma: f64, out: &mut Vec<f64>) -> Result<()> {
    out.clear();
    let denom = 2.0 * sigma * sigma;
    for i in 0..graph.n() {
        let start = out.len();
        out.extend(graph.distances(i).iter().map(|d| (-(d * d) / denom).exp()));
        let z: f64 = out[start..].iter().sum();
        if !(z > 0.0) {
            return Err(Error::InvalidParam(format!(
                "all kernel weights of point {i} underflow at sigma {sigma}; increase sigma"
            )));
        }
        out[start..].iter_mut().for_each(|w| *w /= z);
    }
    Ok(())
}

/// `w_ij = exp(−d_ij²/2σ²)` over the neighbor lists (self included when the
/// graph has self loops), rows normalized to sum 1.
pub fn build_smoother(graph: &KnnGraph, sigma: f64) -> Result<Smoother> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParam(format!("sigma {sigma} must be > 0")));
    }
    let n = graph.n();
    let width = graph.width();
    let mut ids = Vec::with_capacity(n * width);
    for i in 0..n {
        ids.extend_from_slice(graph.neighbors(i));
    }
    let mut weights = Vec::with_capacity(n * width);
    kernel_weights(graph, sigma, &mut weights)?;
    Ok(Smoother { n, width, ids, weights })
}

/// Reusable probe source for one point cloud: the kNN graph is built once,
/// each call to [`ProbeGenerator::generate`] draws a fresh batch.
#[derive(Clone, Debug)]
pub struct ProbeGenerator {
    config: ProbeConfig,
    graph: KnnGraph,
    fixed: Option<Smoother>,
}

impl ProbeGenerator {
    pub fn new(pc: &PointCloud, config: ProbeConfig) -> Result<Self> {
        config.validate()?;
        if config.knn_k >= pc.n() {
            return Err(Error::InvalidParam(format!(
                "probe graph k = {} must be below n = {}",
                config.knn_k,
                pc.n()
            )));
        }
        let graph = build_knn(pc, config.knn_k, config.metric, config.self_loops)?;
        Self::from_graph(graph, config)
    }

    pub fn from_graph(graph: KnnGraph, config: ProbeConfig) -> Result<Self> {
        config.validate()?;
        let fixed = match config.sigma {
            Sigma::Fixed(s) => Some(build_smoother(&graph, s)?),
            Sigma::Range(..) => None,
        };
        Ok(ProbeGenerator { config, graph, fixed })
    }

    pub fn config(&self) -> &ProbeConfig {
        &self.config
    }

    pub fn graph(&self) -> &KnnGraph {
        &self.graph
    }

    /// One batch from `rng`: raw signals are drawn first, then the per-probe
    /// σ values when σ is a range.
    pub fn generate(&self, rng: &mut impl Rng) -> Result<ProbeBatch> {
        self.generate_m(self.config.m, rng)
    }

    pub fn generate_m(&self, m: usize, rng: &mut impl Rng) -> Result<ProbeBatch> {
        let n = self.graph.n();
        let raw = sample_raw_signals(n, m, rng);
        let t = self.config.smoothing_iterations;
        let mut config = self.config.clone();
        config.m = m;
        if t == 0 {
            return Ok(ProbeBatch { signals: raw, config });
        }
        // Point-major working copy: f[i*m + p].
        let mut f = raw.transpose().into_data();
        let mut next = vec![0.0; n * m];
        let width = self.graph.width();

        match (&self.fixed, self.config.sigma) {
            (Some(s), _) => {
                for _ in 0..t {
                    for i in 0..n {
                        let out = &mut next[i * m..(i + 1) * m];
                        out.iter_mut().for_each(|v| *v = 0.0);
                        let (ids, ws) = s.row(i);
                        for (&j, &w) in ids.iter().zip(ws) {
                            for (o, &x) in out.iter_mut().zip(&f[j * m..(j + 1) * m]) {
                                *o += w * x;
                            }
                        }
                    }
                    std::mem::swap(&mut f, &mut next);
                }
            }
            (None, Sigma::Range(lo, hi)) => {
                let sigmas: Vec<f64> = (0..m).map(|_| rng.random_range(lo..=hi)).collect();
                // Per-probe kernels, laid out [i][slot][p].
                let mut w = vec![0.0; n * width * m];
                let mut buf = Vec::with_capacity(n * width);
                for (p, &s) in sigmas.iter().enumerate() {
                    kernel_weights(&self.graph, s, &mut buf)?;
                    for (idx, &v) in buf.iter().enumerate() {
                        w[idx * m + p] = v;
                    }
                }
                for _ in 0..t {
                    for i in 0..n {
                        let out = &mut next[i * m..(i + 1) * m];
                        out.iter_mut().for_each(|v| *v = 0.0);
                        for (slot, &j) in self.graph.neighbors(i).iter().enumerate() {
                            let wrow = &w[(i * width + slot) * m..(i * width + slot + 1) * m];
                            for ((o, &x), &wv) in out.iter_mut().zip(&f[j * m..(j + 1) * m]).zip(wrow) {
                                *o += wv * x;
                            }
                        }
                    }
                    std::mem::swap(&mut f, &mut next);
                }
            }
            (None, Sigma::Fixed(_)) => unreachable!("fixed sigma always has a smoother"),
        }
        let signals = Tensor::matrix(n, m, f)?.transpose();
        Ok(ProbeBatch { signals, config })
    }
}

/// One batch for `pc` seeded by `cfg.seed`.
pub fn generate_probes(pc: &PointCloud, cfg: &ProbeConfig) -> Result<ProbeBatch> {
    let gen = ProbeGenerator::new(pc, cfg.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    gen.generate(&mut rng)
}

/// Writes probes as CSV, one probe per row, 17 significant digits.
pub fn write_probes_csv(batch: &ProbeBatch, path: &Path) -> Result<()> {
    let mut out = String::new();
    for p in 0..batch.m() {
        let row: Vec<String> = batch.signals.row(p).iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    std::fs::write(path, out)?;
    Ok(())
}
