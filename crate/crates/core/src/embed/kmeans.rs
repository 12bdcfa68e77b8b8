use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::sq_dist;
use crate::ndiff::Tensor;

pub const DEFAULT_RESTARTS: usize = 10;
const MAX_ITER: usize = 300;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// `c × d`.
    pub centers: Tensor,
    pub inertia: f64,
    /// Inertia after each Lloyd iteration of the winning restart.
    pub trace: Vec<f64>,
}

fn plus_plus(x: &Tensor, c: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = x.rows();
    let mut centers = vec![x.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), &centers[0])).collect();
    while centers.len() < c {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(x.row(next).to_vec());
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), centers.last().expect("pushed")));
        }
    }
    centers
}

fn assign(x: &Tensor, centers: &[Vec<f64>], labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (i, l) in labels.iter_mut().enumerate() {
        let (best, d) = centers
            .iter()
            .enumerate()
            .map(|(j, c)| (j, sq_dist(x.row(i), c)))
            .fold((0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
        *l = best;
        inertia += d;
    }
    inertia
}

/// One Lloyd run from k-means++ seeds. An empty cluster has its center
/// moved to the point currently farthest from its own center.
fn lloyd(x: &Tensor, c: usize, rng: &mut impl Rng) -> Result<KMeansResult> {
    let (n, d) = (x.rows(), x.cols());
    let mut centers = plus_plus(x, c, rng);
    let mut labels = vec![0; n];
    let mut inertia = assign(x, &centers, &mut labels);
    let mut trace = vec![inertia];
    let scale = x.sq_norm();
    for _ in 0..MAX_ITER {
        let mut sums = vec![vec![0.0; d]; c];
        let mut counts = vec![0usize; c];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for j in 0..c {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        for j in (0..c).filter(|&j| counts[j] == 0) {
            let far = (0..n)
                .max_by(|&a, &b| {
                    let da = sq_dist(x.row(a), &centers[labels[a]]);
                    let db = sq_dist(x.row(b), &centers[labels[b]]);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("n > 0");
            centers[j] = x.row(far).to_vec();
            labels[far] = j;
        }
        let previous = labels.clone();
        let next = assign(x, &centers, &mut labels);
        // Rounding slack relative to the data scale.
        if next > inertia + 1e-12 * (inertia + scale) {
            return Err(Error::Convergence(format!(
                "k-means inertia rose from {inertia} to {next}"
            )));
        }
        inertia = next;
        trace.push(inertia);
        if labels == previous {
            break;
        }
    }
    Ok(KMeansResult {
        labels,
        centers: Tensor::from_fn(c, d, |i, j| centers[i][j]),
        inertia,
        trace,
    })
}

/// Lloyd's algorithm with k-means++ seeding; the restart with the lowest
/// inertia wins. Restart `r` draws from its own stream of `seed`.
pub fn kmeans(x: &Tensor, c: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    let (n, _) = x.expect_matrix("kmeans")?;
    if c == 0 || c > n {
        return Err(Error::InvalidParam(format!("cluster count {c} must be in 1..={n}")));
    }
    if restarts == 0 {
        return Err(Error::InvalidParam("at least one restart".into()));
    }
    if !x.all_finite() {
        return Err(Error::NonFinite { context: "kmeans input".into() });
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let run = lloyd(x, c, &mut rng)?;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts ≥ 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::clustering_metrics;
    use crate::geometry::{synth_manifold, SynthKind};

    #[test]
    fn separated_blobs_are_recovered() {
        let s = synth_manifold(
            &SynthKind::Blobs { clusters: 3, n: 90, dim: 4, sigma: 0.05, separation: 1.0 },
            1,
            false,
        )
        .unwrap();
        let r = kmeans(&s.cloud.to_tensor(), 3, DEFAULT_RESTARTS, 0).unwrap();
        let m = clustering_metrics(&r.labels, s.cloud.labels().unwrap()).unwrap();
        assert_eq!(m.ari, 1.0);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn trivial_counts() {
        let x = Tensor::from_fn(5, 2, |i, j| (i * 3 + j) as f64);
        let one = kmeans(&x, 1, 2, 0).unwrap();
        assert!(one.labels.iter().all(|&l| l == 0));
        let all = kmeans(&x, 5, 2, 0).unwrap();
        assert_eq!(all.inertia, 0.0);
        assert!(kmeans(&x, 6, 1, 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let x = Tensor::from_fn(40, 3, |i, j| ((i * 7 + j * 3) % 11) as f64);
        assert_eq!(kmeans(&x, 4, 3, 9).unwrap(), kmeans(&x, 4, 3, 9).unwrap());
    }
}
