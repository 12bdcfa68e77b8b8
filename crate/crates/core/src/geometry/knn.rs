use super::{sq_dist, PointCloud};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    Euclidean,
    /// `1 − cos(x, y)`.
    Cosine,
}

/// Exact k-nearest-neighbor lists.
///
/// `k` counts neighbors other than the point itself. With `self_loops` each
/// list has `k + 1` entries and starts with the point at distance 0, so
/// [`KnnGraph::width`] is the stored row length.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnGraph {
    pub k: usize,
    pub metric: Metric,
    pub self_loops: bool,
    n: usize,
    ids: Vec<usize>,
    dists: Vec<f64>,
}

impl KnnGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.k + usize::from(self.self_loops)
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        let w = self.width();
        &self.ids[i * w..(i + 1) * w]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.dists[i * w..(i + 1) * w]
    }

    /// Builds a graph from explicit rows; used by tests and hand-made fixtures.
    pub fn from_lists(
        neighbors: Vec<Vec<usize>>,
        distances: Vec<Vec<f64>>,
        metric: Metric,
        self_loops: bool,
    ) -> Result<Self> {
        let n = neighbors.len();
        let w = neighbors.first().map_or(0, Vec::len);
        if w == 0 || neighbors.iter().any(|r| r.len() != w) || distances.len() != n
            || distances.iter().any(|r| r.len() != w)
        {
            return Err(Error::InvalidParam("neighbor rows must share one non-zero width".into()));
        }
        if neighbors.iter().flatten().any(|&j| j >= n) {
            return Err(Error::InvalidParam("neighbor index out of range".into()));
        }
        Ok(KnnGraph {
            k: w - usize::from(self_loops),
            metric,
            self_loops,
            n,
            ids: neighbors.concat(),
            dists: distances.concat(),
        })
    }
}

fn distance(metric: Metric, a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    match metric {
        Metric::Euclidean => sq_dist(a, b).sqrt(),
        Metric::Cosine => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            (1.0 - dot / (na * nb)).max(0.0)
        }
    }
}

/// Brute-force kNN. Ties are broken by the smaller index so results are
/// reproducible.
pub fn build_knn(pc: &PointCloud, k: usize, metric: Metric, self_loops: bool) -> Result<KnnGraph> {
    let n = pc.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidParam(format!("k = {k} must be in 1..{n}")));
    }
    let norms: Vec<f64> = (0..n)
        .map(|i| pc.point(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if metric == Metric::Cosine {
        if let Some(i) = norms.iter().position(|&v| v == 0.0) {
            return Err(Error::InvalidParam(format!(
                "point {i} is the zero vector, cosine distance undefined"
            )));
        }
    }
    let w = k + usize::from(self_loops);
    let mut ids = Vec::with_capacity(n * w);
    let mut dists = Vec::with_capacity(n * w);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        cand.clear();
        let pi = pc.point(i);
        for j in 0..n {
            if j != i {
                cand.push((distance(metric, pi, pc.point(j), norms[i], norms[j]), j));
            }
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        cand.select_nth_unstable_by(k - 1, cmp);
        cand[..k].sort_unstable_by(cmp);
        if self_loops {
            ids.push(i);
            dists.push(0.0);
        }
        for &(d, j) in &cand[..k] {
            ids.push(j);
            dists.push(d);
        }
    }
    Ok(KnnGraph {
        k,
        metric,
        self_loops,
        n,
        ids,
        dists,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_pairs_are_mutual() {
        let pc = PointCloud::new(vec![0.0, 1.0, 3.0], 1, "line").unwrap();
        let g = build_knn(&pc, 1, Metric::Euclidean, false).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.neighbors(2), &[1]);
    }

    #[test]
    fn self_loop_comes_first() {
        let pc = PointCloud::new((0..10).map(|i| i as f64).collect(), 1, "grid").unwrap();
        let g = build_knn(&pc, 3, Metric::Euclidean, true).unwrap();
        for i in 0..10 {
            assert_eq!(g.neighbors(i)[0], i);
            assert_eq!(g.distances(i)[0], 0.0);
            assert_eq!(g.neighbors(i).len(), 4);
            assert!(g.distances(i).windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn cosine_distance_and_zero_vector() {
        let pc = PointCloud::new(vec![1.0, 0.0, 0.0, 2.0, 1.0, 1.0], 2, "c").unwrap();
        let g = build_knn(&pc, 1, Metric::Cosine, false).unwrap();
        assert_eq!(g.neighbors(0), &[2]);
        assert!((g.distances(0)[0] - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-12);
        let z = PointCloud::new(vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0], 2, "z").unwrap();
        assert!(build_knn(&z, 1, Metric::Cosine, false).is_err());
    }

    #[test]
    fn k_must_be_below_n() {
        let pc = PointCloud::new(vec![0.0, 1.0], 1, "two").unwrap();
        assert!(build_knn(&pc, 2, Metric::Euclidean, false).is_err());
    }
}
