//! Semantic trails from location-based social network check-ins.

pub mod analytics;
pub mod emit;
pub mod enrich;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod synthgen;
pub mod trailbuild;
pub mod validate;
