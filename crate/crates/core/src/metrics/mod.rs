//! Evaluation: exact optimal transport, feature-distribution EMD and
//! kernel MMD over structural descriptors.

pub mod descriptors;
pub mod distance;
pub mod feature_emd;
pub mod mmd;
pub mod ot;
pub mod report;

pub use descriptors::{
    clustering_coefficients, normalized_laplacian_spectrum, type_degree_vectors,
};
pub use distance::{euclidean_distance, ground_distance, jaccard_distance};
pub use feature_emd::{feature_dist_emd, feature_emd_cost_matrix, graph_set_emd, point_set_emd};
pub use mmd::{clustering_mmd, degree_mmd, gaussian_kernel, mmd, spectral_mmd, type_degree_mmd, MmdConfig};
pub use ot::{solve_ot, OtSolution, TransportProblem};
pub use report::{evaluate, EvalConfig, Metric, MetricReport};
