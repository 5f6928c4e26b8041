//! Online skeleton gesture detection: gesturelet descriptors, a k-means
//! codebook with soft binning, one-vs-rest linear classifiers and streaming
//! max-subarray triggering, plus multi-person tracking and segment metrics.

pub mod classifier;
pub mod codebook;
pub mod config;
pub mod detector;
pub mod digest;
pub mod error;
pub mod features;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod skeleton;
pub mod tracker;

pub use classifier::{GestureModel, TrainConfig};
pub use codebook::{Codebook, KMeansConfig, SoftAssignment};
pub use detector::{DetectionEvent, DetectorBundle, DetectorVariant, OnlineDetector, StreamDetector};
pub use error::{Error, Result};
pub use features::{Gesturelet, GestureletConfig, GestureletStream};
pub use metrics::{ClassRates, MetricsReport};
pub use pipeline::{train_bundle, EvalSettings, TrainSettings};
pub use skeleton::{LabeledTimeline, Segment, SkeletonFrame, SkeletonLayout, SkeletonSequence};
pub use tracker::{Tracker, TrackerConfig};
