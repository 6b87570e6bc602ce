//! Brute-force matching of 256-bit binary image descriptors under constant
//! Hamming thresholds or a two-rule fuzzy decision, with ground-truth
//! homography evaluation of the resulting matches.
//!
//! The pipeline is: [`imageio`] loads Netpbm images, [`features`] detects
//! FAST-9 corners and computes BRIEF-style descriptors, [`matcher`] pairs
//! descriptor sets using a [`matcher::Rule`], [`fuzzy`] supplies the fuzzy
//! rule, and [`geometry`] / [`harness`] turn matches into M / CM counts.

pub mod features;
pub mod fuzzy;
pub mod geometry;
pub mod harness;
pub mod imageio;
pub mod matcher;
pub mod rng;

pub use features::{hamming_bits, agreement_ratio, BinaryDescriptor, Keypoint, SamplingPattern};
pub use fuzzy::{FuzzyMatcherConfig, TrapezoidMF};
pub use geometry::Homography;
pub use imageio::GrayImage;
pub use matcher::MatchCandidate;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Image(#[from] imageio::ImageError),
    #[error(transparent)]
    Feature(#[from] features::FeatureError),
    #[error(transparent)]
    Fuzzy(#[from] fuzzy::FuzzyError),
    #[error(transparent)]
    Match(#[from] matcher::MatchError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Harness(#[from] harness::HarnessError),
}
