//! Per-view choice between coding an upper-level view and dropping it for
//! decoder-side synthesis, by Lagrangian cost `J = D + λR`.
//!
//! Level-4 views are decided first by plain argmin. A level-3 view may only be
//! dropped when both level-4 neighbours that reference it were dropped too;
//! otherwise it is coded and marked as forced.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::codec::{measure_rate, Bitstream, CodecConfig, CodecError, Encoder, RateReport, Reconstruction, Unit, UNIT_SYNTAX_BITS};
use crate::lf::{spiral_scan, GopLayout, LfError, PseudoSequence, View};
use crate::metrics::mse_luma;
use crate::synth::{select_references, view_position, GeneratorModel, Position, SynthError};

/// Levels subject to a decision, lowest first.
const DECIDED: (u8, u8) = (3, 4);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RdoError {
    #[error("negative or non-finite cost input {0}")]
    DomainError(f64),
    #[error("lambda must be positive, got {0}")]
    InvalidLambda(f64),
    #[error("no generator model for QP {0}")]
    NoModelForQp(u8),
    #[error("reference POC {0} not reconstructed")]
    MissingReference(usize),
    #[error("no costs for POC {0}")]
    MissingCosts(usize),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Layout(#[from] LfError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangianConfig {
    pub lambda: f64,
}

impl Default for LagrangianConfig {
    fn default() -> Self {
        Self { lambda: 0.1 }
    }
}

/// `distortion + λ·rate`, distortion as luma MSE and rate in bits per pixel.
pub fn lagrangian_cost(distortion: f64, rate: f64, lambda: f64) -> Result<f64, RdoError> {
    for v in [distortion, rate, lambda] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(RdoError::DomainError(v));
        }
    }
    Ok(distortion + lambda * rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Coded,
    Dropped,
}

/// Distortion and rate of both branches for one view; NaN marks an unmeasured branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub d_codec: f64,
    pub r_codec: f64,
    pub d_gan: f64,
    pub r_gan: f64,
}

impl Measurement {
    pub fn j_codec(&self, lambda: f64) -> f64 {
        self.d_codec + lambda * self.r_codec
    }

    pub fn j_gan(&self, lambda: f64) -> f64 {
        self.d_gan + lambda * self.r_gan
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewDecision {
    pub poc: usize,
    pub level: u8,
    pub branch: Branch,
    pub j_codec: f64,
    pub j_gan: f64,
    pub d_codec: f64,
    pub r_codec: f64,
    pub d_gan: f64,
    pub r_gan: f64,
    /// Coded only to keep a coded level-4 neighbour decodable.
    pub forced: bool,
}

impl ViewDecision {
    fn new(poc: usize, level: u8, m: &Measurement, lambda: f64, branch: Branch, forced: bool) -> Self {
        Self {
            poc,
            level,
            branch,
            j_codec: m.j_codec(lambda),
            j_gan: m.j_gan(lambda),
            d_codec: m.d_codec,
            r_codec: m.r_codec,
            d_gan: m.d_gan,
            r_gan: m.r_gan,
            forced,
        }
    }

    /// Lagrangian cost of the chosen branch.
    pub fn cost(&self) -> f64 {
        match self.branch {
            Branch::Coded => self.j_codec,
            Branch::Dropped => self.j_gan,
        }
    }
}

/// The level-4 views that reference level-3 `poc`.
fn dependants(layout: &GopLayout, poc: usize) -> impl Iterator<Item = usize> + '_ {
    [poc.checked_sub(1), Some(poc + 1)]
        .into_iter()
        .flatten()
        .filter(move |&p| p < layout.n_frames && layout.level(p) == DECIDED.1)
}

/// Two-pass decision for GOP `g` from precomputed measurements.
pub fn decide_gop(layout: &GopLayout, g: usize, costs: &BTreeMap<usize, Measurement>, lambda: f64) -> Result<Vec<ViewDecision>, RdoError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(RdoError::InvalidLambda(lambda));
    }
    let get = |p: usize| costs.get(&p).ok_or(RdoError::MissingCosts(p));
    let mut flags = BTreeMap::new();
    let mut out = Vec::new();
    for poc in layout.pocs_at_level(g, DECIDED.1) {
        let m = get(poc)?;
        let branch = if m.j_gan(lambda) < m.j_codec(lambda) { Branch::Dropped } else { Branch::Coded };
        flags.insert(poc, branch == Branch::Dropped);
        out.push(ViewDecision::new(poc, DECIDED.1, m, lambda, branch, false));
    }
    for poc in layout.pocs_at_level(g, DECIDED.0) {
        let m = get(poc)?;
        let d = if m.j_gan(lambda) < m.j_codec(lambda) {
            if dependants(layout, poc).all(|p| flags.get(&p).copied().unwrap_or(false)) {
                ViewDecision::new(poc, DECIDED.0, m, lambda, Branch::Dropped, false)
            } else {
                ViewDecision::new(poc, DECIDED.0, m, lambda, Branch::Coded, true)
            }
        } else {
            ViewDecision::new(poc, DECIDED.0, m, lambda, Branch::Coded, false)
        };
        out.push(d);
    }
    out.sort_by_key(|d| d.poc);
    Ok(out)
}

/// How upper-level views are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodeMode {
    AllCoded,
    Rdo,
    AllDropped,
}

#[derive(Debug, Clone)]
pub struct RdoOutcome {
    pub bitstream: Bitstream,
    pub rate: RateReport,
    /// One entry per level-3/4 view in POC order.
    pub decisions: Vec<ViewDecision>,
    /// Encoder-side reconstruction per POC, synthesized for dropped views when a model is given.
    pub reconstructions: Vec<Option<View>>,
}

/// Encoder with embedded decoder and generator copies.
pub struct RdoSession<'a> {
    encoder: Encoder,
    frames: &'a [View],
    scan: PseudoSequence,
    layout: GopLayout,
    model: Option<&'a GeneratorModel>,
    lambda: f64,
    recon: Vec<Option<Reconstruction>>,
    units: Vec<Option<Unit>>,
}

impl<'a> RdoSession<'a> {
    /// `frames` are in POC order of the spiral scan of a `grid` light field.
    pub fn new(frames: &'a [View], grid: (usize, usize), config: &CodecConfig, model: Option<&'a GeneratorModel>, lambda: f64) -> Result<Self, RdoError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(RdoError::InvalidLambda(lambda));
        }
        if frames.is_empty() || frames.len() != grid.0 * grid.1 {
            return Err(CodecError::FrameCount { expected: grid.0 * grid.1, got: frames.len() }.into());
        }
        let encoder = Encoder::new(config.clone(), frames[0].width(), frames[0].height(), grid.0, grid.1)?;
        let layout = encoder.layout();
        let scan = spiral_scan(grid.0, grid.1)?;
        Ok(Self { encoder, frames, scan, layout, model, lambda, recon: vec![None; frames.len()], units: vec![None; frames.len()] })
    }

    fn pixels(&self) -> f64 {
        (self.frames[0].width() * self.frames[0].height()) as f64
    }

    fn dims(&self) -> (usize, usize) {
        (self.frames[0].width(), self.frames[0].height())
    }

    fn code(&self, poc: usize) -> Result<(Unit, Reconstruction), RdoError> {
        let (a, b) = self.layout.references(poc);
        let fetch = |r: Option<usize>| -> Result<Option<&Reconstruction>, RdoError> {
            match r {
                None => Ok(None),
                Some(p) => self.recon[p].as_ref().map(Some).ok_or(RdoError::MissingReference(p)),
            }
        };
        let refs = (fetch(a)?, fetch(b)?);
        Ok(self.encoder.encode_frame(poc, &self.frames[poc], refs)?)
    }

    fn commit(&mut self, poc: usize, unit: Unit, rec: Reconstruction) {
        self.units[poc] = Some(unit);
        self.recon[poc] = Some(rec);
    }

    /// Synthesizes `poc` from the decoded always-coded views, as the decoder will.
    pub fn synthesize(&self, poc: usize) -> Result<View, RdoError> {
        let qp = self.encoder.config().qp;
        let model = self.model.ok_or(RdoError::NoModelForQp(qp))?;
        let (w, h) = self.dims();
        let refs = select_references(&self.scan, &self.layout, poc, model.n_refs());
        let views = refs
            .iter()
            .map(|&r| self.recon[r].as_ref().map(|rec| rec.to_view(w, h)).ok_or(RdoError::MissingReference(r)))
            .collect::<Result<Vec<View>, _>>()?;
        let pairs: Vec<(&View, Position)> = views.iter().zip(&refs).map(|(v, &r)| (v, view_position(&self.scan, r))).collect();
        Ok(model.generate_view(&pairs, view_position(&self.scan, poc))?)
    }

    /// Measures both branches for `poc` and returns the coded candidate.
    pub fn evaluate_view(&self, poc: usize) -> Result<(Measurement, Unit, Reconstruction), RdoError> {
        let (unit, rec) = self.code(poc)?;
        let (w, h) = self.dims();
        let original = &self.frames[poc];
        let d_codec = mse_luma(&rec.to_view(w, h), original).expect("same dimensions");
        let synth = self.synthesize(poc)?;
        let d_gan = mse_luma(&synth, original).expect("same dimensions");
        let m = Measurement { d_codec, r_codec: unit.bits() as f64 / self.pixels(), d_gan, r_gan: UNIT_SYNTAX_BITS as f64 / self.pixels() };
        Ok((m, unit, rec))
    }

    fn code_lower_levels(&mut self) -> Result<(), RdoError> {
        for poc in self.layout.coding_order() {
            if self.layout.level(poc) < DECIDED.0 {
                let (unit, rec) = self.code(poc)?;
                self.commit(poc, unit, rec);
            }
        }
        Ok(())
    }

    fn run_rdo(&mut self) -> Result<Vec<ViewDecision>, RdoError> {
        let mut decisions = Vec::new();
        for g in 0..self.layout.gop_count() {
            let mut costs = BTreeMap::new();
            let mut candidates = BTreeMap::new();
            // Level 3 is coded tentatively so level-4 candidates have their references.
            for poc in self.layout.pocs_at_level(g, DECIDED.0) {
                let (m, unit, rec) = self.evaluate_view(poc)?;
                costs.insert(poc, m);
                self.recon[poc] = Some(rec.clone());
                candidates.insert(poc, (unit, rec));
            }
            for poc in self.layout.pocs_at_level(g, DECIDED.1) {
                let (m, unit, rec) = self.evaluate_view(poc)?;
                costs.insert(poc, m);
                candidates.insert(poc, (unit, rec));
            }
            for d in decide_gop(&self.layout, g, &costs, self.lambda)? {
                let (unit, rec) = candidates.remove(&d.poc).expect("candidate per decided view");
                match d.branch {
                    Branch::Coded => self.commit(d.poc, unit, rec),
                    Branch::Dropped => {
                        self.recon[d.poc] = None;
                        self.units[d.poc] = Some(self.encoder.dropped_unit(d.poc));
                    }
                }
                decisions.push(d);
            }
        }
        Ok(decisions)
    }

    fn run_forced(&mut self, drop: bool) -> Result<Vec<ViewDecision>, RdoError> {
        let nan = f64::NAN;
        let px = self.pixels();
        let (w, h) = self.dims();
        let mut decisions = Vec::new();
        for poc in self.layout.coding_order() {
            let level = self.layout.level(poc);
            if level < DECIDED.0 {
                continue;
            }
            let mut m = Measurement { d_codec: nan, r_codec: nan, d_gan: nan, r_gan: UNIT_SYNTAX_BITS as f64 / px };
            if drop {
                self.units[poc] = Some(self.encoder.dropped_unit(poc));
            } else {
                let (unit, rec) = self.code(poc)?;
                m.d_codec = mse_luma(&rec.to_view(w, h), &self.frames[poc]).expect("same dimensions");
                m.r_codec = unit.bits() as f64 / px;
                self.commit(poc, unit, rec);
            }
            decisions.push((poc, level, m));
        }
        // Synthesis only needs the always-coded views, which are all present now.
        let mut out = Vec::with_capacity(decisions.len());
        for (poc, level, mut m) in decisions {
            if self.model.is_some() {
                m.d_gan = mse_luma(&self.synthesize(poc)?, &self.frames[poc]).expect("same dimensions");
            }
            let branch = if drop { Branch::Dropped } else { Branch::Coded };
            out.push(ViewDecision::new(poc, level, &m, self.lambda, branch, false));
        }
        out.sort_by_key(|d| d.poc);
        Ok(out)
    }

    /// Encodes the whole sequence under `mode`.
    pub fn run(mut self, mode: EncodeMode) -> Result<RdoOutcome, RdoError> {
        if mode == EncodeMode::Rdo && self.model.is_none() {
            return Err(RdoError::NoModelForQp(self.encoder.config().qp));
        }
        self.code_lower_levels()?;
        let mut decisions = match mode {
            EncodeMode::Rdo => self.run_rdo()?,
            EncodeMode::AllCoded => self.run_forced(false)?,
            EncodeMode::AllDropped => self.run_forced(true)?,
        };
        decisions.sort_by_key(|d| d.poc);
        let order = self.layout.coding_order();
        let units: Vec<Unit> = order.iter().map(|&p| self.units[p].clone().expect("every POC emitted")).collect();
        let bitstream = Bitstream { header: self.encoder.header(), units };
        let rate = measure_rate(&bitstream, 0..self.frames.len());
        let (w, h) = self.dims();
        let mut reconstructions: Vec<Option<View>> = self.recon.iter().map(|r| r.as_ref().map(|r| r.to_view(w, h))).collect();
        if self.model.is_some() {
            for d in decisions.iter().filter(|d| d.branch == Branch::Dropped) {
                reconstructions[d.poc] = Some(self.synthesize(d.poc)?);
            }
        }
        Ok(RdoOutcome { bitstream, rate, decisions, reconstructions })
    }
}

/// Fills every dropped POC of a decoded sequence by synthesis.
pub fn synthesize_dropped(
    frames: &mut BTreeMap<usize, View>,
    dropped: &BTreeSet<usize>,
    grid: (usize, usize),
    gop_size: usize,
    model: Option<&GeneratorModel>,
    qp: u8,
) -> Result<(), RdoError> {
    if dropped.is_empty() {
        return Ok(());
    }
    let model = model.ok_or(RdoError::NoModelForQp(qp))?;
    let scan = spiral_scan(grid.0, grid.1)?;
    let layout = GopLayout::new(gop_size, scan.len())?;
    let mut made = Vec::new();
    for &poc in dropped {
        let refs = select_references(&scan, &layout, poc, model.n_refs());
        let pairs = refs
            .iter()
            .map(|&r| frames.get(&r).map(|v| (v, view_position(&scan, r))).ok_or(RdoError::MissingReference(r)))
            .collect::<Result<Vec<_>, _>>()?;
        made.push((poc, model.generate_view(&pairs, view_position(&scan, poc))?));
    }
    frames.extend(made);
    Ok(())
}
