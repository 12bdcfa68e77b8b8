//! Reference operators, dense eigensolvers, basis comparison metrics and the
//! theorem checks.

mod compare;
mod eigen;
mod theorems;

pub use compare::{
    aligned_cosine_similarity, calibration_scale, cluster_subspace_similarity, eigen_clusters, eigenvalue_discrepancy,
    AlignedSimilarity,
    ClusterSimilarity, Discrepancy,
};
pub use eigen::{
    generalized_eigens, segment_analytic_eigens, sym_eigendecomposition, EigenPairs, GeneralizedEigens,
    Orthonormality, MAX_DENSE_N,
};
pub use theorems::{
    run_theorem_suite, verify_minmax_for, verify_minmax_theorem, verify_normalized_for, verify_normalized_relation,
    verify_pca_equivalence, verify_pca_for, Check,
    TheoremReport,
};

use crate::error::{Error, Result};
use crate::geometry::{KnnGraph, TriangleMesh};
use crate::ndiff::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Cotangent,
    Graph,
    Path1d,
}

/// Stiffness `S` (dense, symmetric) with a positive diagonal mass.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteOperator {
    pub stiffness: Tensor,
    pub mass: Vec<f64>,
    pub kind: OperatorKind,
    /// Connected components of the adjacency; more than one means the
    /// nullspace has dimension above one.
    pub components: usize,
}

impl DiscreteOperator {
    pub fn n(&self) -> usize {
        self.mass.len()
    }

    pub fn is_disconnected(&self) -> bool {
        self.components > 1
    }

    /// `max |S − Sᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        let s = &self.stiffness;
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((s.get(i, j) - s.get(j, i)).abs());
            }
        }
        worst
    }

    /// `max |S·1|`.
    pub fn constant_residual(&self) -> f64 {
        (0..self.n())
            .map(|i| self.stiffness.row(i).iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}

fn count_components(n: usize, adjacent: impl Fn(usize) -> Vec<usize>) -> usize {
    let mut seen = vec![false; n];
    let mut count = 0;
    let mut stack = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        stack.push(s);
        while let Some(i) = stack.pop() {
            for j in adjacent(i) {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

fn components_of(s: &Tensor) -> usize {
    let n = s.rows();
    count_components(n, |i| (0..n).filter(|&j| j != i && s.get(i, j) != 0.0).collect())
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Cotangent stiffness with barycentric (lumped) vertex areas.
pub fn cotan_laplacian(mesh: &TriangleMesh) -> Result<DiscreteOperator> {
    let n = mesh.n_vertices();
    if n > MAX_DENSE_N {
        return Err(Error::InvalidParam(format!("{n} vertices exceed the dense limit {MAX_DENSE_N}")));
    }
    let mut s = Tensor::zeros(&[n, n]);
    let mut mass = vec![0.0; n];
    for (f, tri) in mesh.faces.iter().enumerate() {
        let p = tri.map(|v| mesh.vertices[v]);
        let twice_area = {
            let c = cross3(sub3(p[1], p[0]), sub3(p[2], p[0]));
            dot3(c, c).sqrt()
        };
        let scale = [p[0], p[1], p[2]]
            .iter()
            .flat_map(|v| v.iter().map(|c| c.abs()))
            .fold(1.0f64, f64::max);
        if !(twice_area > 1e-14 * scale * scale) {
            return Err(Error::Degenerate(format!("face {f} has zero area")));
        }
        // Angle at corner c is opposite the edge (a, b).
        for c in 0..3 {
            let (a, b) = ((c + 1) % 3, (c + 2) % 3);
            let u = sub3(p[a], p[c]);
            let v = sub3(p[b], p[c]);
            let cot = dot3(u, v) / twice_area;
            let w = 0.5 * cot;
            let (ia, ib) = (tri[a], tri[b]);
            s.set(ia, ib, s.get(ia, ib) - w);
            s.set(ib, ia, s.get(ib, ia) - w);
            s.set(ia, ia, s.get(ia, ia) + w);
            s.set(ib, ib, s.get(ib, ib) + w);
        }
        for &v in tri {
            mass[v] += twice_area / 6.0;
        }
    }
    if let Some(v) = mass.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::Degenerate(format!("vertex {v} belongs to no face")));
    }
    let components = components_of(&s);
    Ok(DiscreteOperator {
        stiffness: s,
        mass,
        kind: OperatorKind::Cotangent,
        components,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EdgeWeights {
    Binary,
    /// `exp(−d²/2σ²)` on the graph distances.
    Gaussian(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// `S = D − W`, `M = D`.
    None,
    /// `S = D^{-1/2}(D − W)D^{-1/2}`, `M = I`.
    Symmetric,
}

/// Graph Laplacian of a kNN graph, symmetrized by union. Self loops are
/// ignored.
pub fn graph_laplacian(graph: &KnnGraph, weights: EdgeWeights, norm: Normalization) -> Result<DiscreteOperator> {
    let n = graph.n();
    if n > MAX_DENSE_N {
        return Err(Error::InvalidParam(format!("{n} nodes exceed the dense limit {MAX_DENSE_N}")));
    }
    if let EdgeWeights::Gaussian(sigma) = weights {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParam(format!("sigma {sigma} must be > 0")));
        }
    }
    let mut w = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for (&j, &d) in graph.neighbors(i).iter().zip(graph.distances(i)) {
            if j == i {
                continue;
            }
            let v = match weights {
                EdgeWeights::Binary => 1.0,
                EdgeWeights::Gaussian(sigma) => (-(d * d) / (2.0 * sigma * sigma)).exp(),
            };
            // Union: an edge listed in either direction gets the larger weight
            // (the two directions carry the same distance).
            let v = v.max(w.get(i, j));
            w.set(i, j, v);
            w.set(j, i, v);
        }
    }
    let degree: Vec<f64> = (0..n).map(|i| w.row(i).iter().sum()).collect();
    if let Some(i) = degree.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Degenerate(format!("node {i} has zero degree")));
    }
    let components = count_components(n, |i| (0..n).filter(|&j| w.get(i, j) > 0.0).collect());
    let mut s = w.map(|v| -v);
    for (i, &d) in degree.iter().enumerate() {
        s.set(i, i, d);
    }
    let (stiffness, mass) = match norm {
        Normalization::None => (s, degree),
        Normalization::Symmetric => {
            let r: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
            (Tensor::from_fn(n, n, |i, j| r[i] * s.get(i, j) * r[j]), vec![1.0; n])
        }
    };
    Ok(DiscreteOperator {
        stiffness,
        mass,
        kind: OperatorKind::Graph,
        components,
    })
}

/// Path graph on `n` nodes with unit weights and unit mass.
pub fn path_laplacian(n: usize) -> Result<DiscreteOperator> {
    if n < 2 {
        return Err(Error::InvalidParam("path needs at least two nodes".into()));
    }
    let s = Tensor::from_fn(n, n, |i, j| {
        if i == j {
            if i == 0 || i == n - 1 {
                1.0
            } else {
                2.0
            }
        } else if i.abs_diff(j) == 1 {
            -1.0
        } else {
            0.0
        }
    });
    Ok(DiscreteOperator {
        stiffness: s,
        mass: vec![1.0; n],
        kind: OperatorKind::Path1d,
        components: 1,
    })
}
