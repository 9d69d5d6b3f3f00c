//! Demographic inference from movie-rating histories.
//!
//! The pipeline turns MovieLens-1M style rating logs into fixed-length
//! per-user feature vectors (genre, MPAA and parental-guide averages),
//! trains one of five classifier families on them and scores the
//! predictions of age band and gender.
//!
//! Numeric code is generic over the scalar type (see [`scalar`]); the
//! aliases below pin the types used by the command-line front end.

pub mod classifiers;
pub mod dataset;
pub mod enrichment;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod features;
pub mod fixtures;
pub mod popularity;
pub mod scalar;

pub use error::{Error, ErrorKind, Result};

/// Exact rational scalar, used to check metric identities without rounding.
pub type Exact = num_rational::Ratio<i64>;

pub type FeatureVectorF64 = features::FeatureVector<f64>;
pub type FeatureVectorF32 = features::FeatureVector<f32>;
pub type TrainedModelF64 = classifiers::TrainedModel<f64>;
pub type TrainedModelF32 = classifiers::TrainedModel<f32>;
pub type EvalReportF64 = evaluation::EvalReport<f64>;
pub type EvalReportExact = evaluation::EvalReport<Exact>;
