//! Embeddable property-graph engine with per-segment vector indexes.

pub mod bench;
pub mod bitmap;
pub mod dist;
pub mod error;
pub mod fixtures;
pub mod gvql;
pub mod index;
pub mod loader;
pub mod predicate;
pub mod query;
pub mod schema;
pub mod storage;
pub mod vacuum;

pub use error::{Error, Result};
