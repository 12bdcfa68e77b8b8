// `!(x > 0.0)` is used on purpose: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod embed;
pub mod error;
pub mod geometry;
pub mod model;
pub mod ndiff;
pub mod oracle;
pub mod probes;
pub mod seeds;
pub mod spectral;
pub mod train;

pub use error::{Error, Result};
pub use geometry::{KnnGraph, PointCloud, TriangleMesh};
pub use model::MlpExtractor;
pub use ndiff::{Tape, Tensor, Var};
pub use probes::{ProbeBatch, ProbeConfig, Sigma};
pub use spectral::{ReconstructionReport, SpectralBasis};
