//! Compact hierarchical-B pseudo-video codec with temporal scalability.
//!
//! Level-0 frames are intra coded with DC prediction; a frame at level `k`
//! predicts from its nearest preceding and following frames of lower level,
//! so any set of upper levels can be stripped or flagged as dropped without
//! touching the decoding of the levels below. Residuals go through an integer
//! 8×8 DCT, a dead-zone quantiser and zig-zag run/level Exp-Golomb coding; the
//! reconstruction path is integer-only.

mod bits;
mod frame;
mod picture;
mod transform;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::lf::{GopLayout, LfError, View};
use frame::{FrameParams, Refs};
use picture::Picture;

pub use bits::{BitReader, BitWriter};
pub use transform::{dequantize, qstep_q6, quantize};

/// Current bitstream syntax version.
pub const BITSTREAM_VERSION: u8 = 1;

/// Bits charged per unit for its in-band syntax (coded flag, temporal id
/// and POC); a dropped unit costs exactly this.
pub const UNIT_SYNTAX_BITS: u64 = 16;

/// Temporal levels whose frames may be dropped.
pub const DROPPABLE_LEVELS: [u8; 2] = [3, 4];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("qp {0} outside 0..=51")]
    InvalidQp(i32),
    #[error("poc {0} is at temporal level {1} and cannot be dropped")]
    IllegalDrop(usize, u8),
    #[error("poc {poc} references dropped or missing poc {reference}")]
    BrokenReference { poc: usize, reference: usize },
    #[error("corrupt stream at poc {0}")]
    CorruptStream(usize),
    #[error("unsupported bitstream version {0}")]
    VersionError(u8),
    #[error("invalid stream header: {0}")]
    InvalidHeader(&'static str),
    #[error("sequence has {got} frames, header expects {expected}")]
    FrameCount { expected: usize, got: usize },
    #[error(transparent)]
    Layout(#[from] LfError),
}

/// Quantiser step size `2^((qp-4)/6)`.
pub fn quantizer_step(qp: i32) -> Result<f64, CodecError> {
    if !(0..=51).contains(&qp) {
        return Err(CodecError::InvalidQp(qp));
    }
    Ok(libm::pow(2.0, (qp as f64 - 4.0) / 6.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecConfig {
    /// Fixed at 8.
    pub block_size: usize,
    /// Integer-pel full-search range.
    pub search_range: i32,
    pub qp: u8,
    /// Added to `qp` for each temporal level, result clamped to 0..=51.
    pub qp_offset_per_level: Vec<i32>,
    pub gop_size: usize,
    pub lossless_bypass: bool,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            block_size: 8,
            search_range: 8,
            qp: 28,
            qp_offset_per_level: vec![0, 1, 2, 3, 4],
            gop_size: 16,
            lossless_bypass: false,
        }
    }
}

impl CodecConfig {
    pub fn with_qp(qp: u8) -> Self {
        Self { qp, ..Self::default() }
    }

    pub fn qp_for_level(&self, level: u8) -> u8 {
        let offset = self.qp_offset_per_level.get(level as usize).copied().unwrap_or(0);
        (self.qp as i32 + offset).clamp(0, 51) as u8
    }

    fn validate(&self) -> Result<(), CodecError> {
        if self.qp > 51 {
            return Err(CodecError::InvalidQp(self.qp as i32));
        }
        if self.block_size != picture::BLOCK {
            return Err(CodecError::InvalidHeader("block size must be 8"));
        }
        crate::lf::temporal_level(0, self.gop_size)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitstreamHeader {
    pub version: u8,
    pub width: u16,
    pub height: u16,
    pub grid_s: u8,
    pub grid_t: u8,
    pub gop_size: u8,
    pub base_qp: u8,
    /// Pseudo-sequence scan; 0 = spiral.
    pub scan: u8,
}

impl BitstreamHeader {
    pub fn n_frames(&self) -> usize {
        self.grid_s as usize * self.grid_t as usize
    }

    pub fn layout(&self) -> Result<GopLayout, CodecError> {
        Ok(GopLayout::new(self.gop_size as usize, self.n_frames())?)
    }

    fn validate(&self) -> Result<GopLayout, CodecError> {
        if self.version != BITSTREAM_VERSION {
            return Err(CodecError::VersionError(self.version));
        }
        if self.width == 0 || self.height == 0 || self.grid_s == 0 || self.grid_t == 0 {
            return Err(CodecError::InvalidHeader("zero dimension"));
        }
        if self.base_qp > 51 {
            return Err(CodecError::InvalidQp(self.base_qp as i32));
        }
        self.layout()
    }
}

/// One coded or dropped frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub poc: u16,
    pub temporal_id: u8,
    /// `false` marks a dropped view with an empty payload.
    pub coded: bool,
    pub qp: u8,
    pub payload: Vec<u8>,
}

impl Unit {
    pub fn dropped(poc: usize, temporal_id: u8, qp: u8) -> Self {
        Self { poc: poc as u16, temporal_id, coded: false, qp, payload: Vec::new() }
    }

    /// Bits attributed to this unit: in-band syntax plus payload.
    pub fn bits(&self) -> u64 {
        UNIT_SYNTAX_BITS + 8 * self.payload.len() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitstream {
    pub header: BitstreamHeader,
    /// In coding order.
    pub units: Vec<Unit>,
}

impl Bitstream {
    pub fn dropped_pocs(&self) -> BTreeSet<usize> {
        self.units.iter().filter(|u| !u.coded).map(|u| u.poc as usize).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Bits per POC present in the measured range.
    pub per_poc_bits: BTreeMap<usize, u64>,
    /// Bits per temporal level, index = level.
    pub per_level_bits: Vec<u64>,
    pub total_bits: u64,
    /// Total bits over `width × height × views`.
    pub bpp: f64,
}

impl RateReport {
    /// Fraction of the total spent on each temporal level.
    pub fn level_shares(&self) -> Vec<f64> {
        self.per_level_bits
            .iter()
            .map(|&b| if self.total_bits == 0 { 0.0 } else { b as f64 / self.total_bits as f64 })
            .collect()
    }
}

/// Bit accounting for the units whose POC falls in `pocs`.
pub fn measure_rate(bitstream: &Bitstream, pocs: core::ops::Range<usize>) -> RateReport {
    let h = &bitstream.header;
    let levels = h.gop_size.max(1).trailing_zeros() as usize + 1;
    let mut per_level_bits = vec![0u64; levels];
    let mut per_poc_bits = BTreeMap::new();
    for unit in &bitstream.units {
        let poc = unit.poc as usize;
        if !pocs.contains(&poc) {
            continue;
        }
        let bits = unit.bits();
        *per_poc_bits.entry(poc).or_insert(0) += bits;
        if let Some(slot) = per_level_bits.get_mut(unit.temporal_id as usize) {
            *slot += bits;
        }
    }
    let total_bits = per_poc_bits.values().sum();
    let views = pocs.end.min(h.n_frames()).saturating_sub(pocs.start);
    let pixels = h.width as f64 * h.height as f64 * views as f64;
    RateReport { per_poc_bits, per_level_bits, total_bits, bpp: if pixels > 0.0 { total_bits as f64 / pixels } else { 0.0 } }
}

/// Keeps only the units with `temporal_id <= max_temporal_id`.
pub fn extract_layers(bitstream: &Bitstream, max_temporal_id: u8) -> Bitstream {
    Bitstream {
        header: bitstream.header,
        units: bitstream.units.iter().filter(|u| u.temporal_id <= max_temporal_id).cloned().collect(),
    }
}

/// Checks a drop set against the level rule and the reference structure.
pub fn validate_drop_set(layout: &GopLayout, drop_set: &BTreeSet<usize>) -> Result<(), CodecError> {
    for &poc in drop_set {
        let level = layout.level(poc);
        if !DROPPABLE_LEVELS.contains(&level) || poc >= layout.n_frames {
            return Err(CodecError::IllegalDrop(poc, level));
        }
    }
    for poc in 0..layout.n_frames {
        if drop_set.contains(&poc) {
            continue;
        }
        let (a, b) = layout.references(poc);
        if let Some(reference) = [a, b].into_iter().flatten().find(|r| drop_set.contains(r)) {
            return Err(CodecError::BrokenReference { poc, reference });
        }
    }
    Ok(())
}

/// Stateless frame encoder for one sequence geometry.
#[derive(Debug, Clone)]
pub struct Encoder {
    config: CodecConfig,
    header: BitstreamHeader,
    layout: GopLayout,
}

/// Encoder-side reconstruction, padded as the decoder holds it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reconstruction(Picture);

impl Reconstruction {
    pub fn to_view(&self, width: usize, height: usize) -> View {
        self.0.to_view(width, height)
    }
}

impl Encoder {
    pub fn new(config: CodecConfig, width: usize, height: usize, grid_s: usize, grid_t: usize) -> Result<Self, CodecError> {
        config.validate()?;
        if width == 0 || height == 0 || width > u16::MAX as usize || height > u16::MAX as usize {
            return Err(CodecError::InvalidHeader("frame dimensions"));
        }
        if grid_s == 0 || grid_t == 0 || grid_s > 255 || grid_t > 255 || config.gop_size > 128 {
            return Err(CodecError::InvalidHeader("grid or gop size"));
        }
        let header = BitstreamHeader {
            version: BITSTREAM_VERSION,
            width: width as u16,
            height: height as u16,
            grid_s: grid_s as u8,
            grid_t: grid_t as u8,
            gop_size: config.gop_size as u8,
            base_qp: config.qp,
            scan: 0,
        };
        let layout = header.layout()?;
        Ok(Self { config, header, layout })
    }

    pub fn header(&self) -> BitstreamHeader {
        self.header
    }

    pub fn layout(&self) -> GopLayout {
        self.layout
    }

    pub fn config(&self) -> &CodecConfig {
        &self.config
    }

    /// Codes `poc` from the reconstructions of its references, which the caller
    /// supplies in `(past, future)` order as given by the GOP layout.
    pub fn encode_frame(
        &self,
        poc: usize,
        frame: &View,
        refs: (Option<&Reconstruction>, Option<&Reconstruction>),
    ) -> Result<(Unit, Reconstruction), CodecError> {
        if frame.width() != self.header.width as usize || frame.height() != self.header.height as usize {
            return Err(CodecError::InvalidHeader("frame dimensions"));
        }
        let level = self.layout.level(poc);
        let qp = self.config.qp_for_level(level);
        let src = Picture::from_view(frame);
        let frame_refs = match self.layout.references(poc) {
            (None, _) => Refs::Intra,
            (Some(p), f) => {
                let past = refs.0.ok_or(CodecError::BrokenReference { poc, reference: p })?;
                let future = match f {
                    Some(fp) => Some(&refs.1.ok_or(CodecError::BrokenReference { poc, reference: fp })?.0),
                    None => None,
                };
                Refs::Inter { past: &past.0, future }
            }
        };
        let params = FrameParams { qp, bypass: self.config.lossless_bypass, search_range: self.config.search_range };
        let (payload, recon) = frame::encode_frame(&src, frame_refs, params);
        Ok((Unit { poc: poc as u16, temporal_id: level, coded: true, qp, payload }, Reconstruction(recon)))
    }

    pub fn dropped_unit(&self, poc: usize) -> Unit {
        let level = self.layout.level(poc);
        Unit::dropped(poc, level, self.config.qp_for_level(level))
    }
}

/// Result of [`encode_sequence`].
#[derive(Debug, Clone)]
pub struct EncodedSequence {
    pub bitstream: Bitstream,
    pub rate: RateReport,
    /// Decoder-identical reconstructions, `None` for dropped POCs.
    pub reconstructions: Vec<Option<View>>,
}

/// Codes a pseudo-sequence; `drop_set` POCs become flag-only units.
pub fn encode_sequence(
    frames: &[View],
    grid: (usize, usize),
    config: &CodecConfig,
    drop_set: &BTreeSet<usize>,
) -> Result<EncodedSequence, CodecError> {
    if frames.is_empty() || frames.len() != grid.0 * grid.1 {
        return Err(CodecError::FrameCount { expected: grid.0 * grid.1, got: frames.len() });
    }
    let (w, h) = (frames[0].width(), frames[0].height());
    let encoder = Encoder::new(config.clone(), w, h, grid.0, grid.1)?;
    let layout = encoder.layout();
    validate_drop_set(&layout, drop_set)?;

    let mut recon: Vec<Option<Reconstruction>> = vec![None; frames.len()];
    let mut units = Vec::with_capacity(frames.len());
    for poc in layout.coding_order() {
        if drop_set.contains(&poc) {
            units.push(encoder.dropped_unit(poc));
            continue;
        }
        let (a, b) = layout.references(poc);
        let refs = (a.and_then(|p| recon[p].as_ref()), b.and_then(|p| recon[p].as_ref()));
        let (unit, rec) = encoder.encode_frame(poc, &frames[poc], refs)?;
        units.push(unit);
        recon[poc] = Some(rec);
    }
    let bitstream = Bitstream { header: encoder.header(), units };
    let rate = measure_rate(&bitstream, 0..frames.len());
    let reconstructions = recon.iter().map(|r| r.as_ref().map(|r| r.to_view(w, h))).collect();
    Ok(EncodedSequence { bitstream, rate, reconstructions })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSequence {
    pub frames: BTreeMap<usize, View>,
    pub dropped: BTreeSet<usize>,
}

/// Decodes every coded unit and reports which POCs were dropped.
pub fn decode_sequence(bitstream: &Bitstream) -> Result<DecodedSequence, CodecError> {
    let header = bitstream.header;
    let layout = header.validate()?;
    let (w, h) = (header.width as usize, header.height as usize);
    let (pw, ph) = (w.div_ceil(picture::BLOCK) * picture::BLOCK, h.div_ceil(picture::BLOCK) * picture::BLOCK);

    let mut pictures: BTreeMap<usize, Picture> = BTreeMap::new();
    let mut dropped = BTreeSet::new();
    for unit in &bitstream.units {
        let poc = unit.poc as usize;
        if poc >= layout.n_frames || unit.temporal_id != layout.level(poc) || unit.qp > 51 {
            return Err(CodecError::CorruptStream(poc));
        }
        if pictures.contains_key(&poc) || dropped.contains(&poc) {
            return Err(CodecError::CorruptStream(poc));
        }
        if !unit.coded {
            if !unit.payload.is_empty() || !DROPPABLE_LEVELS.contains(&unit.temporal_id) {
                return Err(CodecError::CorruptStream(poc));
            }
            dropped.insert(poc);
            continue;
        }
        let (a, b) = layout.references(poc);
        let fetch = |r: usize| pictures.get(&r).ok_or(CodecError::BrokenReference { poc, reference: r });
        let refs = match (a, b) {
            (None, _) => Refs::Intra,
            (Some(p), f) => Refs::Inter { past: fetch(p)?, future: f.map(fetch).transpose()? },
        };
        let pic = frame::decode_frame(&unit.payload, refs, unit.qp, pw, ph).map_err(|_| CodecError::CorruptStream(poc))?;
        pictures.insert(poc, pic);
    }
    let frames = pictures.into_iter().map(|(poc, p)| (poc, p.to_view(w, h))).collect();
    Ok(DecodedSequence { frames, dropped })
}

#[cfg(test)]
mod tests;
