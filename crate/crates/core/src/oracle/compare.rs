use std::ops::Range;

use nalgebra::DMatrix;
use serde::Serialize;

use super::eigen::to_dmatrix;
use crate::error::{Error, Result};
use crate::ndiff::{linalg, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlignedSimilarity {
    /// `|cos|` per index after sign alignment.
    pub per_index: Vec<f64>,
    pub mean: f64,
}

fn column_norm(t: &Tensor, j: usize) -> f64 {
    (0..t.rows()).map(|i| t.get(i, j).powi(2)).sum::<f64>().sqrt()
}

/// Index-by-index cosine similarity of the first `upto` columns, each
/// predicted column flipped to agree in sign with its reference.
pub fn aligned_cosine_similarity(predicted: &Tensor, reference: &Tensor, upto: usize) -> Result<AlignedSimilarity> {
    let (n, kp) = predicted.expect_matrix("aligned_cosine_similarity")?;
    let (nr, kr) = reference.expect_matrix("aligned_cosine_similarity")?;
    if n != nr {
        return Err(Error::dim("aligned_cosine_similarity", format!("{n} vs {nr} rows")));
    }
    if upto == 0 || upto > kp || upto > kr {
        return Err(Error::InvalidParam(format!("upto = {upto} must be in 1..={}", kp.min(kr))));
    }
    let mut per_index = Vec::with_capacity(upto);
    for j in 0..upto {
        let (np, nr) = (column_norm(predicted, j), column_norm(reference, j));
        if np == 0.0 || nr == 0.0 {
            return Err(Error::Degenerate(format!("column {j} has zero norm")));
        }
        let dot: f64 = (0..n).map(|i| predicted.get(i, j) * reference.get(i, j)).sum();
        let sign = if dot < 0.0 { -1.0 } else { 1.0 };
        per_index.push(sign * dot / (np * nr));
    }
    let mean = per_index.iter().sum::<f64>() / upto as f64;
    Ok(AlignedSimilarity { per_index, mean })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterSimilarity {
    /// Predicted indices compared (within the requested range).
    pub indices: Range<usize>,
    /// Dimension of the reference eigenspace.
    pub reference_dim: usize,
    /// Cosines of the principal angles between the predicted columns and
    /// the reference eigenspace.
    pub cosines: Vec<f64>,
    pub mean: f64,
}

/// Groups reference indices into clusters of near-equal eigenvalues:
/// neighbors join when `λ_{i+1} − λ_i ≤ rel_tol·λ_{i+1}`.
pub fn eigen_clusters(values: &[f64], rel_tol: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > rel_tol * values[i].abs() {
            out.push(start..i);
            start = i;
        }
    }
    out
}

fn orthonormal_columns(t: &Tensor, cols: Range<usize>) -> Result<DMatrix<f64>> {
    let (q, _) = linalg::householder_qr(&t.slice_cols(cols.start, cols.end))?;
    Ok(to_dmatrix(&q))
}

/// Per-cluster principal-angle diagnostic for degenerate spectra. For each
/// cluster of the reference spectrum that meets `0..upto`, the predicted
/// columns inside the range are compared with the full reference cluster.
pub fn cluster_subspace_similarity(
    predicted: &Tensor,
    reference: &Tensor,
    reference_values: &[f64],
    upto: usize,
    rel_tol: f64,
) -> Result<Vec<ClusterSimilarity>> {
    if predicted.rows() != reference.rows() || reference.cols() != reference_values.len() {
        return Err(Error::dim("cluster_subspace_similarity", "basis shapes disagree"));
    }
    if upto == 0 || upto > predicted.cols() || upto > reference.cols() {
        return Err(Error::InvalidParam(format!("upto = {upto} out of range")));
    }
    let mut out = Vec::new();
    for cluster in eigen_clusters(reference_values, rel_tol) {
        if cluster.start >= upto {
            break;
        }
        let pred_range = cluster.start..cluster.end.min(upto);
        let p = orthonormal_columns(predicted, pred_range.clone())?;
        let r = orthonormal_columns(reference, cluster.clone())?;
        let cosines: Vec<f64> = (r.transpose() * p)
            .singular_values()
            .iter()
            .map(|s| s.min(1.0))
            .collect();
        let mean = cosines.iter().sum::<f64>() / cosines.len() as f64;
        out.push(ClusterSimilarity {
            indices: pred_range,
            reference_dim: cluster.len(),
            cosines,
            mean,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Discrepancy {
    pub per_index: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// `|λ̂ − λ|/λ` over `range`, index 0 (the zero eigenvalue) skipped.
/// `std` is the population standard deviation.
pub fn eigenvalue_discrepancy(predicted: &[f64], reference: &[f64], range: Range<usize>) -> Result<Discrepancy> {
    if range.end > predicted.len() || range.end > reference.len() {
        return Err(Error::dim("eigenvalue_discrepancy", "range exceeds the spectra"));
    }
    let idx: Vec<usize> = range.filter(|&i| i > 0).collect();
    if idx.is_empty() {
        return Err(Error::InvalidParam("no indices beyond the first".into()));
    }
    if let Some(&i) = idx.iter().find(|&&i| reference[i] == 0.0) {
        return Err(Error::Contract(format!("reference eigenvalue {i} is zero")));
    }
    let per_index: Vec<f64> = idx
        .iter()
        .map(|&i| (predicted[i] - reference[i]).abs() / reference[i].abs())
        .collect();
    let m = per_index.len() as f64;
    let mean = per_index.iter().sum::<f64>() / m;
    let std = (per_index.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / m).sqrt();
    Ok(Discrepancy { per_index, mean, std })
}

/// Scale `s` minimizing `Σ (s·λ̂_i/λ_i − 1)²` over `range` (index 0
/// skipped): a single global calibration of estimated eigenvalues.
pub fn calibration_scale(predicted: &[f64], reference: &[f64], range: Range<usize>) -> Result<f64> {
    if range.end > predicted.len() || range.end > reference.len() {
        return Err(Error::dim("calibration_scale", "range exceeds the spectra"));
    }
    let ratios: Vec<f64> = range.filter(|&i| i > 0).map(|i| predicted[i] / reference[i]).collect();
    let den: f64 = ratios.iter().map(|r| r * r).sum();
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::Degenerate("cannot calibrate zero or infinite estimates".into()));
    }
    Ok(ratios.iter().sum::<f64>() / den)
}
