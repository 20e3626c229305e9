//! Numerical certificates and cluster validation.

mod certificates;
mod clustering;
mod metrics;
mod rff;
mod validate;

pub use certificates::{check_kernel, corollary1_check, theorem1_certificate, CorollaryCheck, SeparationCertificate};
pub use clustering::{kmeans, kmeans_fits, kmeans_single, KMeansFit, KMEANS_MAX_ITER, KMEANS_REL_TOL};
pub use metrics::{ami, nmi};
pub use rff::{rff_bound, rff_residual, RffResidualReport};
pub use validate::{
    compare_with_labels, spec_labels, validate_clusters, CentroidRanking, ClusterValidation, LabelAgreement,
};
