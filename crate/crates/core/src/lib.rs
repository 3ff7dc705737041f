//! Corporate website feature extraction and digital-divide analytics.
//!
//! The crate is organised as the stages of a batch pipeline:
//!
//! - [`registry`]: firm registry ingestion, size classes and wide-band joins.
//! - [`crawler`]: polite homepage fetching with timing capture, plus an
//!   offline replay corpus.
//! - [`extractor`]: the ten website features computed from one fetch.
//! - [`wayback`]: website age from the earliest archived snapshot.
//! - [`index`]: MinMax normalisation and the weighted composite index.
//! - [`spatial`]: aggregation of firm rows to territorial units.
//! - [`stats`]: k-means with elbow selection, OLS and Logit fits.

pub mod crawler;
pub mod extractor;
pub mod features;
pub mod index;
pub mod registry;
pub mod spatial;
pub mod stats;
pub mod wayback;

pub use features::{Feature, RawFeatures};
