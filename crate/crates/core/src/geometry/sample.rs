use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sq_dist, PointCloud};
use crate::error::{Error, Result};

/// Centers the cloud at its centroid and scales the farthest point to radius 1.
pub fn normalize_unit_sphere(pc: &PointCloud) -> Result<PointCloud> {
    let c = pc.centroid();
    let mut pts = pc.coords().to_vec();
    for row in pts.chunks_mut(pc.dim()) {
        for (v, cj) in row.iter_mut().zip(&c) {
            *v -= cj;
        }
    }
    let r = pts
        .chunks(pc.dim())
        .map(|row| row.iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max)
        .sqrt();
    if !(r > f64::MIN_POSITIVE) {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    pts.iter_mut().for_each(|v| *v /= r);
    let out = PointCloud::new(pts, pc.dim(), pc.name.clone())?;
    match pc.labels() {
        Some(l) => out.with_labels(l.to_vec()),
        None => Ok(out),
    }
}

/// Greedy farthest-point order of `target_n` indices; the first is drawn
/// from `seed`.
pub fn fps_indices(pc: &PointCloud, target_n: usize, seed: u64) -> Result<Vec<usize>> {
    let n = pc.n();
    if target_n > n || target_n == 0 {
        return Err(Error::InvalidParam(format!(
            "cannot sample {target_n} of {n} points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..n);
    let mut chosen = vec![first];
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(pc.point(i), pc.point(first))).collect();
    while chosen.len() < target_n {
        // Largest distance to the chosen set, lowest index on ties.
        let (next, _) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
        chosen.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(pc.point(i), pc.point(next)));
        }
    }
    Ok(chosen)
}

pub fn fps_sample(pc: &PointCloud, target_n: usize, seed: u64) -> Result<PointCloud> {
    pc.subset(&fps_indices(pc, target_n, seed)?)
}
