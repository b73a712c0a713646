//! File formats, reports and the command-line front end for `lfsynth-core`.

pub mod cli;
pub mod config;
pub mod d2gm;
pub mod error;
pub mod images;
pub mod lfbs;
pub mod plot;
pub mod report;

pub use error::{Error, Result};
