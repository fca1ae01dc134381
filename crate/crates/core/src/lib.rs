//! Consensus-based compression of genomic read sets.
//!
//! Reads are matched against a consensus sequence; what is stored per read
//! is its matching position, strand, and the mismatches against the
//! consensus, spread over several bit-packed streams whose value widths are
//! tuned per dataset. Decoding is a single forward pass over every stream.

pub mod align;
pub mod bits;
pub mod codec;
pub mod container;
pub mod decode;
pub mod encode;
pub mod report;
pub mod error;
pub mod seqio;
pub mod tune;

pub use error::{Error, Result, StreamId};
