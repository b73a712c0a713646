use std::io;
use std::path::{Path, PathBuf};

use lfsynth_core::codec::CodecError;
use lfsynth_core::lf::LfError;
use lfsynth_core::metrics::MetricsError;
use lfsynth_core::rdo::RdoError;
use lfsynth_core::synth::SynthError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    FormatError(String),
    #[error("model file: {0}")]
    ModelFormatError(String),
    #[error("model shape: {0}")]
    ModelShapeError(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Lf(#[from] LfError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Rdo(#[from] RdoError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("plot: {0}")]
    Plot(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) trait IoContext<T> {
    fn at(self, path: &Path) -> Result<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }
}
