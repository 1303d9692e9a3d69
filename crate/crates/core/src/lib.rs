//! Span-level data programming by demonstration.
//!
//! An annotator highlights spans; [`rules::synthesize`] turns each
//! demonstration into candidate labeling functions; selected functions are
//! aggregated by a [`labelmodel`] into per-token posteriors; and the
//! [`sampler`] picks the next document to show. [`session::Project`] ties the
//! loop together and persists it.

pub mod corpus;
pub mod error;
pub mod labelmodel;
pub mod rules;
pub mod sampler;
pub mod session;
pub mod simulate;
pub mod synthetic;

pub use error::{Error, Result};
