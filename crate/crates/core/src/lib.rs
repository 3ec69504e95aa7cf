//! Graph-based multi-object tracking whose training is guided by frozen
//! text embeddings of instance and scene descriptions.
//!
//! Detections are linked through a hierarchy of frame windows. In every
//! window a message-passing network classifies candidate edges between
//! tracklets, and accepted edges merge tracklets for the next level. During
//! training, node and edge embeddings are additionally pulled towards the
//! text embeddings of their descriptions; tracking itself never reads text.

pub mod config;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod guidance;
pub mod inference;
pub mod io;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use langtrack_numeric as numeric;
