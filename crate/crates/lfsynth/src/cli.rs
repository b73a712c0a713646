//! Command-line front end.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lfsynth_core::codec::{decode_sequence, CodecConfig};
use lfsynth_core::lf::{generate_synthetic_lf, spiral_scan, LayerSpec, LightField, PseudoSequence, SyntheticParams, View};
use lfsynth_core::metrics::{bd_quality, bd_rate, psnr, ssim, MetricsError, RdCurve};
use lfsynth_core::rdo::{synthesize_dropped, Branch, EncodeMode, RdoError, RdoSession};
use lfsynth_core::synth::{reconstruct_lightfield, train, GeneratorModel, Regime, TrainConfig, TrainingScene};
use log::info;

use crate::config::{parse_list, ConfigFile};
use crate::error::{Error, IoContext, Result};
use crate::report::{self, BdRecord, CurveJson, RateJson, RdPoint, TrainRow, ViewQuality};
use crate::{d2gm, images, lfbs, plot};

pub const DEFAULT_QPS: [u8; 4] = [18, 24, 28, 32];

#[derive(Debug, Parser)]
#[command(name = "lfsynth", version, about = "Light-field coding with generative view dropping")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic light-field corpus.
    SynthData(SynthDataArgs),
    /// Train view-synthesis generators.
    Train(TrainArgs),
    /// Code a light field into an LFBS stream.
    Encode(EncodeArgs),
    /// Decode a stream, synthesizing dropped views.
    Decode(DecodeArgs),
    /// Measure one rate/quality point.
    Eval(EvalArgs),
    /// Compare RD curves with Bjøntegaard deltas.
    Bd(BdArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    AllCoded,
    Rdo,
    AllDropped,
}

impl Mode {
    fn encode_mode(self) -> EncodeMode {
        match self {
            Mode::AllCoded => EncodeMode::AllCoded,
            Mode::Rdo => EncodeMode::Rdo,
            Mode::AllDropped => EncodeMode::AllDropped,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Mode::AllCoded => "all-coded",
            Mode::Rdo => "rdo",
            Mode::AllDropped => "all-dropped",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <Mode as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Original,
    Mixed,
    PerQp,
}

impl std::str::FromStr for RegimeArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <RegimeArg as ValueEnum>::from_str(s, true)
    }
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Original => Regime::Original,
            RegimeArg::Mixed => Regime::MixedReconstructed,
            RegimeArg::PerQp => Regime::PerQp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    Desk,
    Paper,
}

impl std::str::FromStr for Scale {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <Scale as ValueEnum>::from_str(s, true)
    }
}

/// Flags shared by every subcommand; each may also come from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// QP, or comma-separated QP list where several are accepted.
    #[arg(long)]
    pub qp: Option<String>,
    /// Lagrange multiplier [default: 0.1]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// GOP size [default: 16]
    #[arg(long)]
    pub gop: Option<usize>,
    /// Upper-level view handling [default: rdo]
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Model file, or directory of model files.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Flat key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

const COMMON_KEYS: [&str; 6] = ["qp", "lambda", "gop", "mode", "model", "seed"];

/// Common flags merged with the config file.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub file: ConfigFile,
    pub qps: Vec<u8>,
    pub lambda: f64,
    pub gop: usize,
    pub mode: Mode,
    pub model: Option<PathBuf>,
    pub seed: u64,
}

impl Common {
    pub fn resolve(&self, extra_keys: &[&str]) -> Result<Resolved> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let allowed: Vec<&str> = COMMON_KEYS.iter().chain(extra_keys).copied().collect();
        file.check_keys(&allowed)?;
        let qp_text = match &self.qp {
            Some(q) => Some(q.clone()),
            None => file.get::<String>("qp")?,
        };
        let qps = match qp_text {
            Some(q) => parse_list::<u8>(&q)?,
            None => DEFAULT_QPS.to_vec(),
        };
        if qps.is_empty() {
            return Err(Error::Config("empty QP list".into()));
        }
        if let Some(&bad) = qps.iter().find(|&&q| q > 51) {
            return Err(Error::Config(format!("QP {bad} outside 0..=51")));
        }
        Ok(Resolved {
            lambda: file.pick(self.lambda, "lambda", 0.1)?,
            gop: file.pick(self.gop, "gop", 16)?,
            mode: file.pick(self.mode, "mode", Mode::Rdo)?,
            model: match &self.model {
                Some(m) => Some(m.clone()),
                None => file.get::<PathBuf>("model")?,
            },
            seed: file.pick(self.seed, "seed", 0)?,
            qps,
            file,
        })
    }
}

impl Resolved {
    fn single_qp(&self, explicit: bool) -> Result<u8> {
        match (explicit, self.qps.as_slice()) {
            (true, [q]) => Ok(*q),
            (true, _) => Err(Error::Config("exactly one --qp expected".into())),
            (false, _) => Err(Error::Config("--qp is required".into())),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthDataArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output directory; one sub-directory per scene.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub scenes: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Views per grid side.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Layer disparities, back to front.
    #[arg(long)]
    pub disparity: Option<String>,
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Light-field directory, or a directory of them.
    #[arg(long)]
    pub data: PathBuf,
    /// Directory receiving model files and loss logs.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Light-field directory.
    #[arg(long)]
    pub input: PathBuf,
    /// Stream path; the decision log and rate report are written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DecodeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub input: PathBuf,
    /// Output light-field directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub original: PathBuf,
    #[arg(long)]
    pub decoded: PathBuf,
    /// Rate report written by `encode`.
    #[arg(long)]
    pub rate: PathBuf,
    /// RD point JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-view quality CSV.
    #[arg(long)]
    pub views: Option<PathBuf>,
    /// Curve CSV the point is appended to.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long, default_value = "y-psnr")]
    pub quality: QualityArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QualityArg {
    YPsnr,
    YuvPsnr,
    Ssim,
}

#[derive(Debug, Clone, Args)]
pub struct BdArgs {
    #[command(flatten)]
    pub common: Common,
    /// Anchor curve CSV.
    #[arg(long)]
    pub anchor: PathBuf,
    /// Test curve CSVs.
    #[arg(long, required = true, num_args = 1..)]
    pub test: Vec<PathBuf>,
    /// BD records JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Curves JSON.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthData(a) => cmd_synth_data(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Encode(a) => cmd_encode(&a),
        Command::Decode(a) => cmd_decode(&a).map(|_| ()),
        Command::Eval(a) => cmd_eval(&a).map(|_| ()),
        Command::Bd(a) => cmd_bd(&a).map(|_| ()),
    }
}

/// Views of `lf` in spiral-scan order.
pub fn to_frames(lf: &LightField) -> Result<(Vec<View>, PseudoSequence)> {
    let scan = spiral_scan(lf.grid_s(), lf.grid_t())?;
    let frames = scan.entries().iter().map(|e| lf.view(e.s, e.t).clone()).collect();
    Ok((frames, scan))
}

/// Inverse of [`to_frames`].
pub fn from_frames(scan: &PseudoSequence, frames: Vec<View>) -> Result<LightField> {
    let (gs, gt) = scan.grid();
    let mut slots: Vec<Option<View>> = vec![None; gs * gt];
    for (poc, v) in frames.into_iter().enumerate() {
        let (s, t) = scan.cell(poc);
        slots[s * gt + t] = Some(v);
    }
    let views = slots.into_iter().collect::<Option<Vec<_>>>().ok_or_else(|| Error::FormatError("missing view".into()))?;
    Ok(LightField::new(gs, gt, views)?)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).at(dir)
}

pub fn cmd_synth_data(a: &SynthDataArgs) -> Result<()> {
    let r = a.common.resolve(&["scenes", "width", "height", "grid", "disparity", "noise"])?;
    let f = &r.file;
    let scenes = f.pick(a.scenes, "scenes", 1)?;
    let width = f.pick(a.width, "width", 64)?;
    let height = f.pick(a.height, "height", 64)?;
    let grid = f.pick(a.grid, "grid", 5)?;
    let noise = f.pick(a.noise, "noise", 1.0)?;
    let disparities: Vec<f64> = parse_list(&f.pick(a.disparity.clone(), "disparity", "0".to_string())?)?;
    if disparities.is_empty() {
        return Err(Error::Config("at least one layer disparity is required".into()));
    }
    ensure_dir(&a.out)?;
    for k in 0..scenes {
        let base = r.seed.wrapping_mul(1000).wrapping_add(k as u64 * 10);
        let layers = disparities.iter().enumerate().map(|(i, &d)| LayerSpec { seed: base + i as u64, disparity: d }).collect();
        let params = SyntheticParams { width, height, grid_s: grid, grid_t: grid, layers, noise, noise_seed: base + 7 };
        let (lf, disp) = generate_synthetic_lf(&params)?;
        let dir = a.out.join(format!("scene_{k:02}"));
        images::save_lightfield(&dir, &lf)?;
        images::write_disparity(&images::disparity_path(&dir), &disp)?;
        info!("wrote {}", dir.display());
    }
    Ok(())
}

/// A light-field directory itself, or its light-field sub-directories in name order.
pub fn scene_dirs(data: &Path) -> Result<Vec<PathBuf>> {
    if data.join(images::view_file_name(0, 0)).is_file() {
        return Ok(vec![data.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(data)
        .at(data)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(images::view_file_name(0, 0)).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::FormatError(format!("{}: no light fields found", data.display())));
    }
    Ok(dirs)
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let r = a.common.resolve(&["regime", "steps", "scale", "learning-rate"])?;
    let f = &r.file;
    let regime: Regime = f.pick(a.regime, "regime", RegimeArg::PerQp)?.into();
    let scale = f.pick(a.scale, "scale", Scale::Desk)?;
    let base = match scale {
        Scale::Desk => TrainConfig::desk(),
        Scale::Paper => TrainConfig::default(),
    };
    let config = TrainConfig {
        steps: f.pick(a.steps, "steps", base.steps)?,
        learning_rate: f.pick(a.learning_rate, "learning-rate", base.learning_rate)?,
        seed: r.seed,
        gop_size: r.gop,
        regime,
        ..base
    };
    config.validate()?;
    let originals = scene_dirs(&a.data)?.iter().map(|d| images::load_lightfield(d)).collect::<Result<Vec<_>>>()?;
    let needed: Vec<u8> = match regime {
        Regime::Original => vec![],
        Regime::PerQp => r.qps.clone(),
        Regime::MixedReconstructed => lfsynth_core::synth::MIXED_QPS.to_vec(),
    };
    let scenes = originals
        .into_iter()
        .map(|lf| {
            let decoded = needed.iter().map(|&q| Ok((q, reconstruct_lightfield(&lf, q, r.gop)?))).collect::<Result<Vec<_>>>()?;
            Ok(TrainingScene { original: lf, decoded })
        })
        .collect::<Result<Vec<_>>>()?;
    ensure_dir(&a.out)?;
    let runs: Vec<Option<u8>> = match regime {
        Regime::PerQp => r.qps.iter().map(|&q| Some(q)).collect(),
        _ => vec![None],
    };
    for qp in runs {
        let name = d2gm::model_file_name(regime, qp.unwrap_or(0));
        let log_path = a.out.join(name.replace("model_", "train_").replace(".d2gm", ".csv"));
        let mut log = csv::Writer::from_path(&log_path)?;
        let mut failed = None;
        let model = train(&scenes, qp, &config, &mut |s| {
            if failed.is_none() {
                failed = log.serialize(TrainRow::from(s)).err();
            }
            if s.step % 500 == 0 {
                info!("{name} step {} rec {:.4} adv {:.4}", s.step, s.reconstruction, s.adversarial);
            }
        })?;
        if let Some(e) = failed {
            return Err(e.into());
        }
        log.flush().at(&log_path)?;
        d2gm::save_model(&a.out.join(&name), &model)?;
        info!("wrote {}", a.out.join(&name).display());
    }
    Ok(())
}

/// Loads the model for `qp`, rejecting per-QP models trained at another QP.
pub fn load_model_for(path: &Path, qp: u8) -> Result<GeneratorModel> {
    let file = d2gm::resolve_model(path, qp).ok_or(Error::Rdo(RdoError::NoModelForQp(qp)))?;
    let model = d2gm::load_model(&file)?;
    if model.regime == Regime::PerQp && model.train_qp != qp {
        return Err(Error::Rdo(RdoError::NoModelForQp(qp)));
    }
    Ok(model)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("stream");
    path.with_file_name(format!("{stem}{suffix}"))
}

pub fn decisions_path(stream: &Path) -> PathBuf {
    sibling(stream, ".decisions.csv")
}

pub fn rate_path(stream: &Path) -> PathBuf {
    sibling(stream, ".rate.json")
}

pub fn cmd_encode(a: &EncodeArgs) -> Result<()> {
    let r = a.common.resolve(&[])?;
    let qp = r.single_qp(a.common.qp.is_some() || r.file.get::<String>("qp")?.is_some())?;
    let lf = images::load_lightfield(&a.input)?;
    let (frames, _) = to_frames(&lf)?;
    let model = match (&r.model, r.mode) {
        (Some(p), _) => Some(load_model_for(p, qp)?),
        (None, Mode::Rdo) => return Err(Error::Rdo(RdoError::NoModelForQp(qp))),
        (None, _) => None,
    };
    let config = CodecConfig { qp, gop_size: r.gop, ..CodecConfig::default() };
    let session = RdoSession::new(&frames, (lf.grid_s(), lf.grid_t()), &config, model.as_ref(), r.lambda)?;
    let outcome = session.run(r.mode.encode_mode())?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    lfbs::write(&a.out, &outcome.bitstream)?;
    report::write_decisions(&decisions_path(&a.out), &outcome.decisions)?;
    let dropped: Vec<usize> = outcome.decisions.iter().filter(|d| d.branch == Branch::Dropped).map(|d| d.poc).collect();
    info!("qp {qp}: {} of {} upper-level views dropped, {:.4} bpp", dropped.len(), outcome.decisions.len(), outcome.rate.bpp);
    let rate = RateJson::new(&outcome.rate, qp, r.mode.name(), (lf.width(), lf.height(), lf.len()), dropped);
    report::write_json(&rate_path(&a.out), &rate)
}

pub fn cmd_decode(a: &DecodeArgs) -> Result<LightField> {
    let r = a.common.resolve(&[])?;
    let stream = lfbs::read(&a.input)?;
    let h = stream.header;
    let decoded = decode_sequence(&stream)?;
    let mut frames = decoded.frames;
    let model = match (&r.model, decoded.dropped.is_empty()) {
        (_, true) => None,
        (Some(p), false) => Some(load_model_for(p, h.base_qp)?),
        (None, false) => return Err(Error::Rdo(RdoError::NoModelForQp(h.base_qp))),
    };
    let grid = (h.grid_s as usize, h.grid_t as usize);
    synthesize_dropped(&mut frames, &decoded.dropped, grid, h.gop_size as usize, model.as_ref(), h.base_qp)?;
    let scan = spiral_scan(grid.0, grid.1)?;
    let lf = from_frames(&scan, frames.into_values().collect())?;
    images::save_lightfield(&a.out, &lf)?;
    Ok(lf)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

pub fn cmd_eval(a: &EvalArgs) -> Result<RdPoint> {
    a.common.resolve(&[])?;
    let original = images::load_lightfield(&a.original)?;
    let decoded = images::load_lightfield(&a.decoded)?;
    if original.grid_s() != decoded.grid_s() || original.grid_t() != decoded.grid_t() {
        return Err(Error::Metrics(MetricsError::ShapeError));
    }
    let rate: RateJson = report::read_json(&a.rate)?;
    let scan = spiral_scan(original.grid_s(), original.grid_t())?;
    let dropped: BTreeSet<usize> = rate.dropped.iter().copied().collect();
    let mut rows = Vec::with_capacity(original.len());
    let mut yuv = Vec::with_capacity(original.len());
    for e in scan.entries() {
        let (o, d) = (original.view(e.s, e.t), decoded.view(e.s, e.t));
        let p = psnr(o, d)?;
        let poc = scan.poc_of(e.s, e.t);
        rows.push(ViewQuality { s: e.s, t: e.t, poc, dropped: dropped.contains(&poc), psnr_y: p.y, psnr_cb: p.cb, psnr_cr: p.cr, ssim: ssim(o, d)? });
        yuv.push(p.all);
    }
    rows.sort_by_key(|v| (v.s, v.t));
    let point = RdPoint {
        label: rate.mode.clone(),
        qp: rate.qp,
        rate_bpp: rate.bpp,
        psnr_y: mean(rows.iter().map(|v| v.psnr_y)),
        psnr_yuv: mean(yuv.into_iter()),
        ssim: mean(rows.iter().map(|v| v.ssim)),
        views: rows.len(),
        dropped: dropped.len(),
    };
    report::write_json(&a.out, &point)?;
    if let Some(p) = &a.views {
        report::write_rows(p, &rows)?;
    }
    if let Some(c) = &a.curve {
        let q = match a.quality {
            QualityArg::YPsnr => point.psnr_y,
            QualityArg::YuvPsnr => point.psnr_yuv,
            QualityArg::Ssim => point.ssim,
        };
        report::append_curve_point(c, point.rate_bpp, q)?;
    }
    Ok(point)
}

pub fn cmd_bd(a: &BdArgs) -> Result<Vec<BdRecord>> {
    a.common.resolve(&[])?;
    let anchor = report::read_curve(&a.anchor)?;
    let tests = a.test.iter().map(|p| report::read_curve(p)).collect::<Result<Vec<_>>>()?;
    let records = tests
        .iter()
        .map(|t| {
            Ok(BdRecord {
                anchor: anchor.label.clone(),
                test: t.label.clone(),
                bd_rate_pct: bd_rate(&anchor, t)?,
                bd_quality: bd_quality(&anchor, t)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for rec in &records {
        info!("{} vs {}: BD-rate {:+.2}%, BD-quality {:+.4}", rec.test, rec.anchor, rec.bd_rate_pct, rec.bd_quality);
    }
    report::write_json(&a.out, &records)?;
    let all: Vec<RdCurve> = std::iter::once(anchor).chain(tests).collect();
    if let Some(p) = &a.curves {
        report::write_json(p, &all.iter().map(CurveJson::from).collect::<Vec<_>>())?;
    }
    if let Some(p) = &a.svg {
        plot::write_rd_svg(p, &all, "quality")?;
    }
    Ok(records)
}
