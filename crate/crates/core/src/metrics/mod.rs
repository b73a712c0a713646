//! Image quality and coding-efficiency metrics.

mod bjontegaard;
mod quality;

pub use bjontegaard::{bd_quality, bd_rate, RdCurve};
pub use quality::{mse_luma, psnr, psnr_from_mse, ssim, Psnr, SSIM_WINDOW};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("image dimensions differ or are below the window size")]
    ShapeError,
    #[error("curves do not overlap")]
    NoOverlap,
    #[error("polynomial fit is degenerate")]
    DegenerateFit,
    #[error("invalid curve: {0}")]
    InvalidCurve(&'static str),
}
