use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{PointCloud, TriangleMesh};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum SynthKind {
    /// Grid on `[0, 1]`: `x_i = i/(n−1)`, each interior point moved by up to
    /// `jitter/2` grid steps.
    Segment { n: usize, jitter: f64 },
    /// Grid on a circle of `radius`, with angular jitter in grid steps.
    Circle { n: usize, radius: f64, jitter: f64 },
    /// Icosphere vertices after `level` subdivisions.
    Sphere { level: u32, radius: f64 },
    /// Regular `n_major × n_minor` grid on a torus.
    Torus { major: f64, minor: f64, n_major: usize, n_minor: usize },
    SwissRoll { n: usize, noise: f64 },
    /// `clusters` isotropic Gaussians in `R^dim` with per-coordinate std
    /// `sigma`, centers pairwise `separation` apart.
    Blobs { clusters: usize, n: usize, dim: usize, sigma: f64, separation: f64 },
}

impl SynthKind {
    pub fn name(&self) -> &'static str {
        match self {
            SynthKind::Segment { .. } => "segment",
            SynthKind::Circle { .. } => "circle",
            SynthKind::Sphere { .. } => "sphere",
            SynthKind::Torus { .. } => "torus",
            SynthKind::SwissRoll { .. } => "swiss_roll",
            SynthKind::Blobs { .. } => "blobs",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Synthetic {
    pub cloud: PointCloud,
    pub mesh: Option<TriangleMesh>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidParam(msg.into())
}

pub fn synth_manifold(kind: &SynthKind, seed: u64, meshed: bool) -> Result<Synthetic> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = kind.name();
    match *kind {
        SynthKind::Segment { n, jitter } => {
            if n < 4 || !(0.0..1.0).contains(&jitter) {
                return Err(bad("segment needs n >= 4 and jitter in [0, 1)"));
            }
            let h = 1.0 / (n - 1) as f64;
            let pts = (0..n)
                .map(|i| {
                    let x = i as f64 / (n - 1) as f64;
                    if jitter > 0.0 && i > 0 && i + 1 < n {
                        x + jitter * h * (rng.random::<f64>() - 0.5)
                    } else {
                        x
                    }
                })
                .collect();
            Ok(Synthetic {
                cloud: PointCloud::new(pts, 1, name)?,
                mesh: None,
            })
        }
        SynthKind::Circle { n, radius, jitter } => {
            if n < 4 || !(radius > 0.0) || !(0.0..1.0).contains(&jitter) {
                return Err(bad("circle needs n >= 4, radius > 0 and jitter in [0, 1)"));
            }
            let step = 2.0 * PI / n as f64;
            let mut pts = Vec::with_capacity(2 * n);
            for i in 0..n {
                let t = i as f64 * step + jitter * step * (rng.random::<f64>() - 0.5);
                pts.push(radius * t.cos());
                pts.push(radius * t.sin());
            }
            Ok(Synthetic {
                cloud: PointCloud::new(pts, 2, name)?,
                mesh: None,
            })
        }
        SynthKind::Sphere { level, radius } => {
            if !(radius > 0.0) || level > 7 {
                return Err(bad("sphere needs radius > 0 and level <= 7"));
            }
            let mut mesh = icosphere(level);
            for v in &mut mesh.vertices {
                v.iter_mut().for_each(|c| *c *= radius);
            }
            Ok(Synthetic {
                cloud: mesh.to_pointcloud(name)?,
                mesh: meshed.then_some(mesh),
            })
        }
        SynthKind::Torus { major, minor, n_major, n_minor } => {
            if n_major < 4 || n_minor < 4 || !(minor > 0.0) || !(major > minor) {
                return Err(bad("torus needs grid counts >= 4 and major > minor > 0"));
            }
            let mut verts = Vec::with_capacity(n_major * n_minor);
            for i in 0..n_major {
                let u = 2.0 * PI * i as f64 / n_major as f64;
                for j in 0..n_minor {
                    let v = 2.0 * PI * j as f64 / n_minor as f64;
                    let rr = major + minor * v.cos();
                    verts.push([rr * u.cos(), rr * u.sin(), minor * v.sin()]);
                }
            }
            let id = |i: usize, j: usize| (i % n_major) * n_minor + (j % n_minor);
            let mut faces = Vec::with_capacity(2 * n_major * n_minor);
            for i in 0..n_major {
                for j in 0..n_minor {
                    faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                    faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
                }
            }
            let mesh = TriangleMesh::new(verts, faces)?;
            Ok(Synthetic {
                cloud: mesh.to_pointcloud(name)?,
                mesh: meshed.then_some(mesh),
            })
        }
        SynthKind::SwissRoll { n, noise } => {
            if n < 4 || !(noise >= 0.0) {
                return Err(bad("swiss roll needs n >= 4 and noise >= 0"));
            }
            let normal = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("valid std");
            let mut pts = Vec::with_capacity(3 * n);
            for _ in 0..n {
                let t = 1.5 * PI * (1.0 + 2.0 * rng.random::<f64>());
                let h = 21.0 * rng.random::<f64>();
                for c in [t * t.cos(), h, t * t.sin()] {
                    let e = if noise > 0.0 { normal.sample(&mut rng) } else { 0.0 };
                    pts.push(c + e);
                }
            }
            Ok(Synthetic {
                cloud: PointCloud::new(pts, 3, name)?,
                mesh: None,
            })
        }
        SynthKind::Blobs { clusters, n, dim, sigma, separation } => {
            if clusters < 1 || n < clusters.max(2) || dim < 1 || !(sigma > 0.0) || !(separation > 0.0) {
                return Err(bad("blobs need clusters >= 1, n >= clusters, dim >= 1, sigma > 0, separation > 0"));
            }
            let centers = blob_centers(clusters, dim, separation, &mut rng)?;
            let normal = Normal::new(0.0, sigma).expect("valid std");
            let mut pts = Vec::with_capacity(n * dim);
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let c = i * clusters / n;
                labels.push(c);
                for &cj in &centers[c] {
                    pts.push(cj + normal.sample(&mut rng));
                }
            }
            let cloud = PointCloud::new(pts, dim, name)?.with_labels(labels)?;
            Ok(Synthetic { cloud, mesh: None })
        }
    }
}

/// Scaled coordinate axes when they fit (pairwise distance exactly
/// `separation`); otherwise rejection sampling in a growing box.
fn blob_centers(c: usize, dim: usize, separation: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    if c <= dim {
        let s = separation / 2f64.sqrt();
        return Ok((0..c)
            .map(|i| (0..dim).map(|j| if i == j { s } else { 0.0 }).collect())
            .collect());
    }
    let mut half = separation * (c as f64).powf(1.0 / dim as f64);
    for _ in 0..64 {
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(c);
        for _ in 0..10_000 {
            if centers.len() == c {
                break;
            }
            let cand: Vec<f64> = (0..dim).map(|_| rng.random_range(-half..=half)).collect();
            if centers
                .iter()
                .all(|o| super::sq_dist(o, &cand) >= separation * separation)
            {
                centers.push(cand);
            }
        }
        if centers.len() == c {
            return Ok(centers);
        }
        half *= 1.5;
    }
    Err(Error::InvalidParam("could not place blob centers".into()))
}

/// Unit icosphere: the icosahedron with `level` rounds of 4-to-1 midpoint
/// subdivision, vertices projected to the sphere. `10·4^level + 2` vertices.
pub fn icosphere(level: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let base = [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ];
    let unit = |v: [f64; 3]| {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / r, v[1] / r, v[2] / r]
    };
    let mut verts: Vec<[f64; 3]> = base.iter().map(|&v| unit(v)).collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(unit([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh { vertices: verts, faces }
}
