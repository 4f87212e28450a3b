//! Evaluation backend: LDA, two-covariance PLDA, EER, k-means with NMI
//! probing, and oracle-boundary diarization scoring.

mod assignment;
mod diar;
mod eer;
mod kmeans;
mod lda;
mod nmi;
mod plda;
mod verify;

pub use assignment::max_weight_matching;
pub use diar::{der, diarize_oracle, make_sessions, DiarSession, Segment};
pub use eer::{det_points, eer, OperatingPoint};
pub use kmeans::{kmeans, ClusterAssignment, KMeansResult};
pub use lda::{lda_fit, LdaProjection};
pub use nmi::{entropy, mutual_information, nmi};
pub use plda::{length_normalize, plda_fit, PldaFit, PldaModel, PldaScorer, PldaStats};
pub use verify::{make_trials, verify_pipeline, Trial, TrialList, VerifyConfig, VerifyResult};
