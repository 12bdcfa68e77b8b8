//! Low-dimensional embeddings from learned bases and the classical
//! baselines, k-means, and clustering agreement metrics.

mod kmeans;
mod metrics;
mod protocol;

pub use kmeans::{kmeans, KMeansResult, DEFAULT_RESTARTS};
pub use metrics::{clustering_metrics, ClusterReport};
pub use protocol::{
    aggregate_table, class_weighted_sample, embed_cloud, evaluate_embedding, merge_runs, protocol_run, run_blob_protocol,
    write_aggregate_csv, MethodRuns, ProtocolConfig, ProtocolData, RunOutput, RunReports,
};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{build_knn, Metric, PointCloud};
use crate::ndiff::Tensor;
use crate::oracle::{generalized_eigens, graph_laplacian, EdgeWeights, Normalization};
use crate::spectral::{unnormalized_basis, SpectralBasis};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmbedMethod {
    OaEigenmaps,
    LaplacianEigenmaps,
    Pca,
}

impl EmbedMethod {
    pub fn name(self) -> &'static str {
        match self {
            EmbedMethod::OaEigenmaps => "oa_eigenmaps",
            EmbedMethod::LaplacianEigenmaps => "laplacian_eigenmaps",
            EmbedMethod::Pca => "pca",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.replace('-', "_").as_str() {
            "oa_eigenmaps" | "oa" => Some(EmbedMethod::OaEigenmaps),
            "laplacian_eigenmaps" | "le" => Some(EmbedMethod::LaplacianEigenmaps),
            "pca" => Some(EmbedMethod::Pca),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    /// `n × k`.
    pub coords: Tensor,
    pub method: EmbedMethod,
    /// Hash of the basis or configuration the embedding came from.
    pub source: Option<String>,
    pub warnings: Vec<String>,
}

impl Embedding {
    pub fn k(&self) -> usize {
        self.coords.cols()
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut out = (0..self.k()).map(|j| format!("e{j}")).collect::<Vec<_>>().join(",");
        out.push('\n');
        for i in 0..self.coords.rows() {
            let row: Vec<String> = self.coords.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Columns `2..=k+1` of the unnormalized basis `V = M^{-1/2}Q`; the
/// constant first column is dropped.
pub fn oa_eigenmaps(basis: &SpectralBasis, k: usize) -> Result<Embedding> {
    if basis.k() < 2 {
        return Err(Error::InvalidParam("basis has no non-constant columns".into()));
    }
    if k == 0 || k > basis.k() - 1 {
        return Err(Error::InvalidParam(format!("k = {k} must be in 1..={}", basis.k() - 1)));
    }
    let v = unnormalized_basis(basis)?;
    Ok(Embedding {
        coords: v.slice_cols(1, k + 1),
        method: EmbedMethod::OaEigenmaps,
        source: None,
        warnings: Vec::new(),
    })
}

/// Bottom non-trivial generalized eigenvectors of the binary kNN graph
/// Laplacian (`S = D − W`, `M = D`).
///
/// On a disconnected graph the zero eigenvalue repeats once per component
/// and the leading coordinates are component indicators; the embedding is
/// still returned with a warning. More than `k + 1` components leave some
/// components indistinguishable and are an error.
pub fn laplacian_eigenmaps(pc: &PointCloud, knn_k: usize, k: usize, metric: Metric) -> Result<Embedding> {
    if k == 0 || k + 1 >= pc.n() {
        return Err(Error::InvalidParam(format!("k = {k} must be in 1..{}", pc.n() - 1)));
    }
    let graph = build_knn(pc, knn_k, metric, false)?;
    let op = graph_laplacian(&graph, EdgeWeights::Binary, Normalization::None)?;
    let mut warnings = Vec::new();
    if op.is_disconnected() {
        if op.components > k + 1 {
            return Err(Error::Degenerate(format!(
                "kNN graph has {} components, more than k + 1 = {}",
                op.components,
                k + 1
            )));
        }
        warnings.push(format!("kNN graph has {} connected components", op.components));
    }
    let count = (k + 2).min(pc.n());
    let eig = generalized_eigens(&op, count)?;
    let vals = &eig.unnormalized.values;
    if count > k + 1 && (vals[k + 1] - vals[k]).abs() <= 1e-8 * vals[k + 1].abs().max(1.0) {
        warnings.push(format!("degenerate spectrum: λ_{} = λ_{}", k + 1, k + 2));
    }
    Ok(Embedding {
        coords: eig.unnormalized.vectors.slice_cols(1, k + 1),
        method: EmbedMethod::LaplacianEigenmaps,
        source: None,
        warnings,
    })
}

/// Scores on the top-`k` principal axes of the centered coordinates.
pub fn pca_embed(pc: &PointCloud, k: usize) -> Result<Embedding> {
    let (n, d) = (pc.n(), pc.dim());
    if k == 0 || k > d {
        return Err(Error::InvalidParam(format!("k = {k} must be in 1..={d}")));
    }
    let mean = pc.centroid();
    let x = DMatrix::from_fn(n, d, |i, j| pc.point(i)[j] - mean[j]);
    let cov = x.transpose() * &x / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut axes = DMatrix::zeros(d, k);
    for (c, &i) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        axes.set_column(c, &v);
    }
    let scores = x * axes;
    Ok(Embedding {
        coords: Tensor::from_fn(n, k, |i, j| scores[(i, j)]),
        method: EmbedMethod::Pca,
        source: None,
        warnings: Vec::new(),
    })
}
