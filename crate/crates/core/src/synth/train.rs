//! Alternating optimisation of the two critics and the generator.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{encode_sequence, CodecConfig, DROPPABLE_LEVELS};
use crate::lf::{spiral_scan, GopLayout, LightField};

use super::adam::{AdamConfig, AdamState};
use super::discriminator::{DiscriminatorModel, DiscriminatorSpec};
use super::generator::{GeneratorModel, GeneratorSpec};
use super::loss::{generator_traces, loss_d1, loss_d2, loss_g_traced, Example};
use super::tensor::Tensor;
use super::warp::{Image, Position};
use super::{select_references, view_position, Regime, SynthError};

/// QPs whose decoded references enter the mixed regime.
pub const MIXED_QPS: [u8; 4] = [18, 24, 28, 32];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta: f64,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch: usize,
    pub patch_in: usize,
    pub stride: usize,
    pub patch_out: usize,
    /// Weight of the L1 term added to the generator cost; 0 keeps it purely adversarial.
    pub recon_weight: f64,
    pub regime: Regime,
    pub steps: usize,
    pub seed: u64,
    pub gop_size: usize,
    pub generator: GeneratorSpec,
    pub discriminator: DiscriminatorSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            beta: 0.2,
            learning_rate: 2e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch: 10,
            patch_in: 60,
            stride: 16,
            patch_out: 36,
            recon_weight: 10.0,
            regime: Regime::PerQp,
            steps: 2000,
            seed: 0,
            gop_size: 16,
            generator: GeneratorSpec::default(),
            discriminator: DiscriminatorSpec::default(),
        }
    }
}

impl TrainConfig {
    /// Small nets and patches for CPU runs of a few minutes.
    pub fn desk() -> Self {
        Self {
            batch: 4,
            patch_in: 32,
            patch_out: 16,
            generator: GeneratorSpec::desk(),
            discriminator: DiscriminatorSpec::desk(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(SynthError::InvalidConfig("alpha must lie in (0, 1]"));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(SynthError::InvalidConfig("beta must lie in (0, 1]"));
        }
        if self.patch_out == 0 || self.patch_out >= self.patch_in || (self.patch_in - self.patch_out) % 2 != 0 {
            return Err(SynthError::InvalidConfig("patch_out must be smaller than patch_in with an even difference"));
        }
        if self.batch == 0 || self.stride == 0 {
            return Err(SynthError::InvalidConfig("batch and stride must be positive"));
        }
        if !(self.learning_rate > 0.0) || !(self.recon_weight >= 0.0) {
            return Err(SynthError::InvalidConfig("learning rate must be positive and recon weight non-negative"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.adam_beta1, beta2: self.adam_beta2, eps: self.adam_eps }
    }
}

/// Networks and optimiser state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub generator: GeneratorModel,
    pub d1: DiscriminatorModel,
    pub d2: DiscriminatorModel,
    pub adam_g: AdamState,
    pub adam_d1: AdamState,
    pub adam_d2: AdamState,
}

impl TrainState {
    pub fn new(config: &TrainConfig) -> Result<Self, SynthError> {
        config.validate()?;
        let generator = GeneratorModel::new(&config.generator, config.seed)?;
        let size = (config.patch_out, config.patch_out);
        let d1 = DiscriminatorModel::new(&config.discriminator, size, config.seed.wrapping_add(1))?;
        let d2 = DiscriminatorModel::new(&config.discriminator, size, config.seed.wrapping_add(2))?;
        Ok(Self {
            adam_g: AdamState::new(generator.params()),
            adam_d1: AdamState::new(d1.params()),
            adam_d2: AdamState::new(d2.params()),
            generator,
            d1,
            d2,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub step: u64,
    pub d1: f64,
    pub d2: f64,
    pub adversarial: f64,
    pub reconstruction: f64,
}

fn finite(grads: &[Tensor]) -> Result<(), SynthError> {
    grads.iter().all(Tensor::is_finite).then_some(()).ok_or(SynthError::NumericalDivergence)
}

/// Ascent on the first critic, ascent on the second, then descent on the generator.
///
/// On any non-finite gradient the state is left untouched.
pub fn train_step(state: &mut TrainState, batch: &[Example], config: &TrainConfig) -> Result<StepStats, SynthError> {
    if batch.len() != config.batch {
        return Err(SynthError::BatchSize { expected: config.batch, got: batch.len() });
    }
    let size = (config.patch_out, config.patch_out);
    if batch.iter().any(|e| e.size() != size || e.refs.len() != state.generator.n_refs()) {
        return Err(SynthError::ShapeError);
    }
    let adam = config.adam();
    let mut next = state.clone();
    let traces = generator_traces(&state.generator, batch);
    let fakes: Vec<Tensor> = traces.iter().map(|t| t.output.clone()).collect();
    let reals: Vec<Tensor> = batch.iter().map(|e| e.target.clone()).collect();

    let (d1, g1) = loss_d1(&next.d1, &reals, &fakes, config.alpha)?;
    finite(&g1)?;
    next.adam_d1.update(next.d1.params_mut(), &g1, &adam, true);

    let (d2, g2) = loss_d2(&next.d2, &reals, &fakes, config.beta)?;
    finite(&g2)?;
    next.adam_d2.update(next.d2.params_mut(), &g2, &adam, true);

    let gl = loss_g_traced(&next.generator, &next.d1, &next.d2, batch, &traces, config.beta, config.recon_weight)?;
    finite(&gl.grads)?;
    next.adam_g.update(next.generator.params_mut(), &gl.grads, &adam, false);

    if !next.generator.params().iter().chain(next.d1.params().iter()).chain(next.d2.params().iter()).all(|p| p.is_finite()) {
        return Err(SynthError::NumericalDivergence);
    }
    *state = next;
    Ok(StepStats { step: state.adam_g.step, d1, d2, adversarial: gl.adversarial, reconstruction: gl.reconstruction })
}

/// A light field with optional decoded versions keyed by QP.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingScene {
    pub original: LightField,
    pub decoded: Vec<(u8, LightField)>,
}

/// Codes every view of `lf` at `qp` and returns the reconstructions in grid order.
pub fn reconstruct_lightfield(lf: &LightField, qp: u8, gop_size: usize) -> Result<LightField, SynthError> {
    let scan = spiral_scan(lf.grid_s(), lf.grid_t())?;
    let frames: Vec<_> = (0..scan.len()).map(|p| {
        let (s, t) = scan.cell(p);
        lf.view(s, t).clone()
    }).collect();
    let config = CodecConfig { qp, gop_size, ..CodecConfig::default() };
    let enc = encode_sequence(&frames, (lf.grid_s(), lf.grid_t()), &config, &BTreeSet::new())?;
    let mut views = Vec::with_capacity(lf.len());
    for s in 0..lf.grid_s() {
        for t in 0..lf.grid_t() {
            views.push(enc.reconstructions[scan.poc_of(s, t)].clone().expect("all views coded"));
        }
    }
    let mut out = LightField::new(lf.grid_s(), lf.grid_t(), views)?;
    out.view_pitch = lf.view_pitch;
    Ok(out)
}

/// Top-left corners of `patch`-sized windows at `stride` spacing.
pub fn patch_origins(width: usize, height: usize, patch: usize, stride: usize) -> Result<Vec<(usize, usize)>, SynthError> {
    if patch > width || patch > height {
        return Err(SynthError::PatchTooLarge { patch, width, height });
    }
    let nx = (width - patch) / stride + 1;
    let ny = (height - patch) / stride + 1;
    Ok((0..ny).flat_map(|y| (0..nx).map(move |x| (x * stride, y * stride))).collect())
}

struct Target {
    scene: usize,
    poc: usize,
    pos: Position,
    refs: Vec<(usize, Position)>,
}

/// Trains one generator on the upper-level views of `scenes`.
///
/// `qp` selects the decoded references for [`Regime::PerQp`] and tags the model.
pub fn train(
    scenes: &[TrainingScene],
    qp: Option<u8>,
    config: &TrainConfig,
    progress: &mut dyn FnMut(&StepStats),
) -> Result<GeneratorModel, SynthError> {
    config.validate()?;
    if scenes.is_empty() {
        return Err(SynthError::EmptyDataset);
    }
    // variants[scene][v][poc]: v = 0 is pristine, then one per usable QP.
    let mut variants: Vec<Vec<Vec<Image>>> = Vec::with_capacity(scenes.len());
    let mut targets = Vec::new();
    let mut origins = None;
    for (si, scene) in scenes.iter().enumerate() {
        let lf = &scene.original;
        let scan = spiral_scan(lf.grid_s(), lf.grid_t())?;
        let layout = GopLayout::new(config.gop_size, scan.len())?;
        let by_poc = |field: &LightField| -> Vec<Image> {
            (0..scan.len()).map(|p| {
                let (s, t) = scan.cell(p);
                Image::from_view(field.view(s, t))
            }).collect()
        };
        let pick = |q: u8| scene.decoded.iter().find(|(dq, _)| *dq == q).map(|(_, f)| f).ok_or(SynthError::MissingDecoded(q));
        let mut v = Vec::new();
        match config.regime {
            Regime::Original => v.push(by_poc(lf)),
            Regime::PerQp => v.push(by_poc(pick(qp.ok_or(SynthError::InvalidConfig("per-QP training needs a QP"))?)?)),
            Regime::MixedReconstructed => {
                v.push(by_poc(lf));
                for q in MIXED_QPS {
                    v.push(by_poc(pick(q)?));
                }
            }
        }
        if v[0].len() != lf.len() || v.iter().any(|x| x.len() != lf.len()) {
            return Err(SynthError::ShapeError);
        }
        let o = patch_origins(lf.width(), lf.height(), config.patch_in, config.stride)?;
        match &origins {
            None => origins = Some(o),
            Some(prev) if *prev != o => return Err(SynthError::ShapeError),
            Some(_) => {}
        }
        for poc in 0..scan.len() {
            if layout.level(poc) < DROPPABLE_LEVELS[0] {
                continue;
            }
            let refs = select_references(&scan, &layout, poc, config.generator.n_refs)
                .into_iter()
                .map(|r| (r, view_position(&scan, r)))
                .collect::<Vec<_>>();
            if refs.is_empty() {
                continue;
            }
            targets.push(Target { scene: si, poc, pos: view_position(&scan, poc), refs });
        }
        variants.push(v);
    }
    let originals: Vec<Vec<Image>> = scenes
        .iter()
        .map(|sc| {
            let scan = spiral_scan(sc.original.grid_s(), sc.original.grid_t()).expect("validated above");
            (0..scan.len()).map(|p| {
                let (s, t) = scan.cell(p);
                Image::from_view(sc.original.view(s, t))
            }).collect()
        })
        .collect();
    let origins = origins.unwrap_or_default();
    if targets.is_empty() || origins.is_empty() {
        return Err(SynthError::EmptyDataset);
    }

    let mut state = TrainState::new(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eed);
    let offset = (config.patch_in - config.patch_out) / 2;
    let size = (config.patch_out, config.patch_out);
    for _ in 0..config.steps {
        let batch: Vec<Example> = (0..config.batch)
            .map(|_| {
                let t = &targets[rng.random_range(0..targets.len())];
                let o = origins[rng.random_range(0..origins.len())];
                let vs = &variants[t.scene];
                let v = &vs[rng.random_range(0..vs.len())];
                let origin = (o.0 + offset, o.1 + offset);
                Example {
                    refs: t.refs.iter().map(|&(p, pos)| (&v[p], pos)).collect(),
                    target_pos: t.pos,
                    origin,
                    target: originals[t.scene][t.poc].crop(origin, size),
                }
            })
            .collect();
        let stats = train_step(&mut state, &batch, config)?;
        progress(&stats);
    }
    let mut model = state.generator;
    model.round_to_f32();
    model.regime = config.regime;
    model.train_qp = match config.regime {
        Regime::PerQp => qp.unwrap_or(0),
        _ => 0,
    };
    Ok(model)
}
