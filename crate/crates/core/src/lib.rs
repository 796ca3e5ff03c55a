//! Sequential global-null testing: martingale combination tests, p-value
//! masking, interactive ordering and anytime-valid p-values.

pub mod anytime;
pub mod boundaries;
pub mod engine;
mod error;
pub mod masking;
pub mod roots;
pub mod stats;
pub mod structure;

pub use boundaries::{BoundaryFamily, BoundarySpec, CompiledBoundary};
pub use error::{Error, Result};

pub use masking::{MaskPair, MaskScheme};
