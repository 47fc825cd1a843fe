//! Modeling and verification engine for stratified sourcing scenarios.

pub mod douts;
pub mod dsl;
pub mod error;
pub mod model;
pub mod patterns;
pub mod relations;
pub mod runner;
pub mod transformations;
pub mod transitions;

pub use error::{Error, Result};
