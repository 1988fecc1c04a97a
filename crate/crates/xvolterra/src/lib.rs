//! File formats, run configuration, parallel pipeline drivers and
//! validation reports on top of `xvolterra-core`.

pub mod commands;
pub mod config;
pub mod enumerate;
pub mod error;
pub mod format;
pub mod pipeline;
pub mod validate;

pub use error::{Error, Result};
