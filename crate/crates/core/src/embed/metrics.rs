use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Agreement between a predicted and a reference labeling.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterReport {
    pub labels: Vec<usize>,
    pub nmi: f64,
    pub ari: f64,
    pub homogeneity: f64,
    pub completeness: f64,
    pub v_measure: f64,
    pub fmi: f64,
}

impl ClusterReport {
    pub const METRICS: [&'static str; 6] = ["nmi", "ari", "homogeneity", "completeness", "v_measure", "fmi"];

    pub fn values(&self) -> [f64; 6] {
        [self.nmi, self.ari, self.homogeneity, self.completeness, self.v_measure, self.fmi]
    }
}

struct Contingency {
    n: f64,
    cells: Vec<f64>,
    rows: Vec<f64>,
    cols: Vec<f64>,
}

fn relabel(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(*l).or_insert(next)
        })
        .collect();
    (out, ids.len())
}

fn contingency(truth: &[usize], pred: &[usize]) -> Contingency {
    let (t, r) = relabel(truth);
    let (p, c) = relabel(pred);
    let mut cells = vec![0.0; r * c];
    for (&a, &b) in t.iter().zip(&p) {
        cells[a * c + b] += 1.0;
    }
    let rows = (0..r).map(|i| cells[i * c..(i + 1) * c].iter().sum()).collect();
    let cols = (0..c).map(|j| (0..r).map(|i| cells[i * c + j]).sum()).collect();
    Contingency {
        n: truth.len() as f64,
        cells,
        rows,
        cols,
    }
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| -(c / n) * (c / n).ln())
        .sum()
}

fn pairs(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// NMI (arithmetic normalization), ARI, homogeneity, completeness,
/// V-measure and Fowlkes–Mallows. Degenerate labelings follow the usual
/// conventions: two single-cluster labelings score 1 on NMI, ARI,
/// homogeneity and completeness.
pub fn clustering_metrics(pred: &[usize], truth: &[usize]) -> Result<ClusterReport> {
    if pred.len() != truth.len() {
        return Err(Error::dim(
            "clustering_metrics",
            format!("{} predicted vs {} true labels", pred.len(), truth.len()),
        ));
    }
    if pred.is_empty() {
        return Err(Error::InvalidParam("no labels".into()));
    }
    let ct = contingency(truth, pred);
    let n = ct.n;
    let (h_true, h_pred) = (entropy(&ct.rows, n), entropy(&ct.cols, n));
    let c = ct.cols.len();
    let mut mi = 0.0;
    for (idx, &nij) in ct.cells.iter().enumerate() {
        if nij > 0.0 {
            let (i, j) = (idx / c, idx % c);
            mi += nij / n * (n * nij / (ct.rows[i] * ct.cols[j])).ln();
        }
    }
    let mi = mi.max(0.0);
    let nmi = if h_true == 0.0 && h_pred == 0.0 {
        1.0
    } else {
        (mi / (0.5 * (h_true + h_pred))).min(1.0)
    };
    let homogeneity = if h_true == 0.0 { 1.0 } else { (mi / h_true).min(1.0) };
    let completeness = if h_pred == 0.0 { 1.0 } else { (mi / h_pred).min(1.0) };
    let v_measure = if homogeneity + completeness == 0.0 {
        0.0
    } else {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    };

    let index: f64 = ct.cells.iter().map(|&x| pairs(x)).sum();
    let sum_rows: f64 = ct.rows.iter().map(|&x| pairs(x)).sum();
    let sum_cols: f64 = ct.cols.iter().map(|&x| pairs(x)).sum();
    let total = pairs(n);
    let expected = if total > 0.0 { sum_rows * sum_cols / total } else { 0.0 };
    let max_index = 0.5 * (sum_rows + sum_cols);
    let ari = if max_index == expected { 1.0 } else { (index - expected) / (max_index - expected) };
    let fmi = if sum_rows > 0.0 && sum_cols > 0.0 {
        index / (sum_rows * sum_cols).sqrt()
    } else {
        0.0
    };
    Ok(ClusterReport {
        labels: pred.to_vec(),
        nmi,
        ari,
        homogeneity,
        completeness,
        v_measure,
        fmi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_labelings() {
        let l = [0, 0, 1, 1, 2, 2, 2];
        let r = clustering_metrics(&l, &l).unwrap();
        for v in r.values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn renaming_is_invisible() {
        let truth = [0, 0, 1, 1, 1, 2, 2, 0];
        let pred = [1, 1, 0, 2, 0, 2, 2, 1];
        let renamed: Vec<usize> = pred.iter().map(|p| [7, 3, 9][*p]).collect();
        let a = clustering_metrics(&pred, &truth).unwrap();
        let b = clustering_metrics(&renamed, &truth).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn single_cluster_against_two_classes() {
        let truth = [0, 0, 0, 0, 1, 1, 1, 1];
        let r = clustering_metrics(&[0; 8], &truth).unwrap();
        assert_eq!(r.ari, 0.0);
        assert_eq!(r.nmi, 0.0);
        assert_eq!(r.homogeneity, 0.0);
        assert_eq!(r.completeness, 1.0);
    }

    #[test]
    fn hand_contingency() {
        // truth {0,0,0,1,1,1}, pred {0,0,1,1,2,2}
        let r = clustering_metrics(&[0, 0, 1, 1, 2, 2], &[0, 0, 0, 1, 1, 1]).unwrap();
        // pair counts: index 2, rows 6, cols 3, total 15
        let expected = 6.0 * 3.0 / 15.0;
        assert!((r.ari - (2.0 - expected) / (4.5 - expected)).abs() < 1e-12);
        assert!((r.fmi - 2.0 / 18f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        assert!(clustering_metrics(&[0, 1], &[0]).is_err());
    }
}
