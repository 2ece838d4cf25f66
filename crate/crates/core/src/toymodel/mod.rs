//! A small joint intent/slot model for end-to-end checks of augmentation.

pub mod experiment;
pub mod features;
pub mod io;
pub mod model;
pub mod synthetic;

pub use experiment::{run_zero_shot, TargetScores, ZeroShotConfig, ZeroShotReport};
pub use features::{FeatureExtractor, SparseVec, UtteranceFeatures};
pub use io::{load_model, save_model};
pub use model::{EncodedUtterance, JointLoss, JointTrainingConfig, Param, Prediction, ToyJointModel};
pub use synthetic::{SyntheticCorpus, SyntheticCorpusSpec};
