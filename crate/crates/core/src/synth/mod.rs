//! Dual-discriminator GAN view synthesis.
//!
//! The generator estimates per-pixel disparity from plane-sweep statistics of
//! the reference views, backward-warps every reference to the target position
//! and refines their average with a colour network. Two critics with positive
//! scores drive the adversarial part of training.

mod adam;
mod discriminator;
mod generator;
mod layers;
mod loss;
mod tensor;
mod train;
mod warp;

use alloc::vec::Vec;

use thiserror::Error;

use crate::codec::{CodecError, DROPPABLE_LEVELS};
use crate::lf::{GopLayout, LfError, PseudoSequence};

pub use adam::{AdamConfig, AdamState};
pub use discriminator::{score, DiscriminatorModel, DiscriminatorSpec, DiscriminatorTrace};
pub use generator::{GeneratorModel, GeneratorSpec, GeneratorTrace};
pub use layers::{sigmoid, softplus, Activation, Conv2d, ConvStack, Dense, StackTrace};
pub use loss::{d2gan_value, l1_term, loss_d1, loss_d2, loss_g, objective_d1, objective_d2, objective_g, Example, GeneratorLoss, ScoreGrad};
pub use tensor::Tensor;
pub use train::{patch_origins, reconstruct_lightfield, train, train_step, StepStats, TrainConfig, TrainState, TrainingScene, MIXED_QPS};
pub use warp::{delta, extract_features, sample, sample_grad, sweep_levels, warp_view, Image, Position};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("tensor or view shapes do not match")]
    ShapeError,
    #[error("no reference views")]
    NoReferences,
    #[error("model layers do not match the expected channel layout")]
    ModelShapeError,
    #[error("score {0} outside the positive reals")]
    DomainError(f64),
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch holds {got} samples, expected {expected}")]
    BatchSize { expected: usize, got: usize },
    #[error("non-finite gradient; step aborted")]
    NumericalDivergence,
    #[error("patch {patch} does not fit a {width}x{height} view")]
    PatchTooLarge { patch: usize, width: usize, height: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("no decoded views for QP {0}")]
    MissingDecoded(u8),
    #[error("empty training set")]
    EmptyDataset,
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Layout(#[from] LfError),
}

/// Which references a generator was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    /// Pristine references.
    Original,
    /// Decoded references from several QPs plus pristine ones.
    MixedReconstructed,
    /// Decoded references from a single QP.
    PerQp,
}

impl Regime {
    pub fn code(self) -> u8 {
        match self {
            Regime::Original => 0,
            Regime::MixedReconstructed => 1,
            Regime::PerQp => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Regime::Original),
            1 => Some(Regime::MixedReconstructed),
            2 => Some(Regime::PerQp),
            _ => None,
        }
    }
}

/// Grid position of the view coded at `poc`.
pub fn view_position(scan: &PseudoSequence, poc: usize) -> Position {
    let (s, t) = scan.cell(poc);
    (s as f64, t as f64)
}

/// The `n_refs` always-coded views nearest to `poc` on the grid, ties by POC.
///
/// When fewer candidates exist the list is filled by repeating them in order.
pub fn select_references(scan: &PseudoSequence, layout: &GopLayout, poc: usize, n_refs: usize) -> Vec<usize> {
    let (s, t) = scan.cell(poc);
    let mut cands: Vec<(usize, usize)> = (0..layout.n_frames)
        .filter(|&p| p != poc && layout.level(p) < DROPPABLE_LEVELS[0])
        .map(|p| {
            let (a, b) = scan.cell(p);
            (a.abs_diff(s).pow(2) + b.abs_diff(t).pow(2), p)
        })
        .collect();
    cands.sort_unstable();
    if cands.is_empty() {
        return Vec::new();
    }
    (0..n_refs).map(|i| cands[i % cands.len().min(n_refs)].1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lf::spiral_scan;

    #[test]
    fn references_are_nearest_coded_views() {
        let scan = spiral_scan(8, 8).unwrap();
        let layout = GopLayout::new(16, 64).unwrap();
        for poc in 0..64 {
            let refs = select_references(&scan, &layout, poc, 4);
            assert_eq!(refs.len(), 4);
            assert!(refs.iter().all(|&r| r != poc && layout.level(r) <= 2));
        }
        assert_eq!(select_references(&scan, &layout, 1, 4)[0], 0);
    }

    #[test]
    fn small_grids_repeat_references() {
        let scan = spiral_scan(3, 3).unwrap();
        let layout = GopLayout::new(16, 9).unwrap();
        // Only POCs 0, 4 and 8 sit below level 3.
        let refs = select_references(&scan, &layout, 2, 4);
        assert_eq!(refs.len(), 4);
        assert_eq!(refs[3], refs[0]);
    }

    #[test]
    fn regime_codes_round_trip() {
        for r in [Regime::Original, Regime::MixedReconstructed, Regime::PerQp] {
            assert_eq!(Regime::from_code(r.code()), Some(r));
        }
        assert_eq!(Regime::from_code(3), None);
    }
}
