//! Point clouds, triangle meshes, neighborhood graphs and synthetic shapes.

mod io;
mod knn;
mod sample;
mod synth;

pub use io::{load_off_mesh, load_pointcloud, write_off_mesh, write_pointcloud, CloudFormat};
pub use knn::{build_knn, KnnGraph, Metric};
pub use sample::{fps_indices, fps_sample, normalize_unit_sphere};
pub use synth::{icosphere, synth_manifold, SynthKind, Synthetic};

use crate::error::{Error, Result};
use crate::ndiff::Tensor;

/// `n` points in `R^d`, stored row-major, with optional integer class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<f64>,
    dim: usize,
    labels: Option<Vec<usize>>,
    pub name: String,
}

impl PointCloud {
    pub fn new(points: Vec<f64>, dim: usize, name: impl Into<String>) -> Result<Self> {
        if dim == 0 || points.len() % dim != 0 {
            return Err(Error::InvalidParam(format!(
                "{} coordinates do not split into points of dimension {dim}",
                points.len()
            )));
        }
        if points.len() / dim < 2 {
            return Err(Error::InvalidParam("a point cloud needs at least 2 points".into()));
        }
        if let Some(bad) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("coordinate of point {}", bad / dim),
            });
        }
        Ok(PointCloud {
            points,
            dim,
            labels: None,
            name: name.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], name: impl Into<String>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidParam("rows of unequal width".into()));
        }
        PointCloud::new(rows.concat(), dim, name)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::dim(
                "labels",
                format!("{} labels for {} points", labels.len(), self.n()),
            ));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Coordinates as an `n×d` tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::matrix(self.n(), self.dim, self.points.clone()).expect("consistent shape")
    }

    /// Points at `indices`, in that order, carrying labels along.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut pts = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.n() {
                return Err(Error::InvalidParam(format!("index {i} out of range")));
            }
            pts.extend_from_slice(self.point(i));
        }
        let mut pc = PointCloud::new(pts, self.dim, self.name.clone())?;
        if let Some(l) = &self.labels {
            pc.labels = Some(indices.iter().map(|&i| l[i]).collect());
        }
        Ok(pc)
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for i in 0..self.n() {
            for (cj, &p) in c.iter_mut().zip(self.point(i)) {
                *cj += p;
            }
        }
        let n = self.n() as f64;
        c.iter_mut().for_each(|v| *v /= n);
        c
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Triangle mesh; only the oracles consume connectivity.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= n) {
                return Err(Error::InvalidParam(format!("face {fi} references a missing vertex")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Degenerate(format!("face {fi} repeats a vertex")));
            }
        }
        Ok(TriangleMesh { vertices, faces })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| (0..3).map(move |i| (f[i].min(f[(i + 1) % 3]), f[i].max(f[(i + 1) % 3]))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    /// `V − E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.faces.len() as i64
    }

    pub fn to_pointcloud(&self, name: &str) -> Result<PointCloud> {
        PointCloud::new(self.vertices.iter().flatten().copied().collect(), 3, name)
    }
}
