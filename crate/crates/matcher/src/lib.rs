//! Learned satellite-task matcher.
//!
//! Builds per-timestep feature matrices from the live simulator, scores
//! every satellite against every task with an encoder-decoder network and a
//! pairwise constraint network, and picks one task (or none) per satellite.
//! Training imitates annotated trajectories and then adds the model's own
//! rollouts that clear a score threshold.

pub mod checkpoint;
pub mod error;
pub mod features;
pub mod labels;
pub mod loss;
pub mod model;
pub mod optim;
pub mod scheduler;
pub mod tape;
pub mod train;

pub use error::MatcherError;
pub use features::{build_features, time_embedding, FeatureLayout, FeatureMatrices, NormStats};
pub use labels::{derive_approx_labels, ApproxLabels};
pub use model::{infer_assignment, Matcher, ModelConfig};
pub use scheduler::MatcherScheduler;
pub use train::{iterative_learning, train_supervised, Dataset, TrainConfig, Trainer};
