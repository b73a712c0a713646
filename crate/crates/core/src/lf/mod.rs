//! Light-field container, pseudo-sequence ordering and GOP layout.

mod gop;
mod scan;
mod synthetic;
mod view;

pub use gop::{coding_order, references, temporal_level, GopLayout, MAX_TEMPORAL_LEVEL};
pub use scan::{spiral_scan, PseudoSequence, ScanEntry};
pub use synthetic::{generate_synthetic_lf, DisparityMap, LayerSpec, SyntheticParams};
pub use view::{rgb_to_ycbcr, ycbcr_to_rgb, LightField, View};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LfError {
    #[error("missing view ({0}, {1})")]
    MissingView(usize, usize),
    #[error("views have inconsistent dimensions")]
    InconsistentDimensions,
    #[error("unsupported image format: {0}")]
    FormatError(alloc::string::String),
    #[error("invalid grid {0}x{1}")]
    InvalidGrid(usize, usize),
    #[error("gop size {0} is not a power of two")]
    InvalidGop(usize),
    #[error("disparity {0} px/view exceeds the allowed range")]
    DisparityOutOfRange(f64),
    #[error("view dimensions {0}x{1} are too small")]
    TooSmall(usize, usize),
}
