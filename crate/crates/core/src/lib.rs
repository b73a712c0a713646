//! Light-field image coding by selective view dropping.
//!
//! Sub-aperture views are linearised into a pseudo-video sequence, coded with a
//! hierarchical temporally-scalable codec, and the upper temporal levels are
//! either coded or dropped per a Lagrangian decision. Dropped views are
//! regenerated at the decoder by a dual-discriminator GAN generator.
//!
//! The crate is `no_std` (with `alloc`); file formats, IO and the command-line
//! front end live in the `lfsynth` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod codec;
pub mod lf;
pub mod metrics;
pub mod rdo;
pub mod synth;

pub use codec::{Bitstream, CodecConfig, CodecError, RateReport, Unit};
pub use lf::{LfError, LightField, PseudoSequence, View};
pub use metrics::{MetricsError, RdCurve};
pub use rdo::{Branch, LagrangianConfig, RdoError, ViewDecision};
pub use synth::{DiscriminatorModel, GeneratorModel, Regime, SynthError, TrainConfig};
