//! CSV and JSON reports.

use std::fs;
use std::path::Path;

use lfsynth_core::codec::RateReport;
use lfsynth_core::metrics::RdCurve;
use lfsynth_core::rdo::{Branch, ViewDecision};
use lfsynth_core::synth::StepStats;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{IoContext, Result};

/// Writes non-finite values as strings so JSON stays valid.
pub fn ser_real<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub poc: usize,
    pub level: u8,
    pub j_codec: f64,
    pub j_gan: f64,
    pub d_codec: f64,
    pub r_codec: f64,
    pub d_gan: f64,
    pub r_gan: f64,
    pub branch: String,
    pub forced: bool,
}

impl From<&ViewDecision> for DecisionRow {
    fn from(d: &ViewDecision) -> Self {
        Self {
            poc: d.poc,
            level: d.level,
            j_codec: d.j_codec,
            j_gan: d.j_gan,
            d_codec: d.d_codec,
            r_codec: d.r_codec,
            d_gan: d.d_gan,
            r_gan: d.r_gan,
            branch: match d.branch {
                Branch::Coded => "coded".into(),
                Branch::Dropped => "dropped".into(),
            },
            forced: d.forced,
        }
    }
}

pub fn write_decisions(path: &Path, decisions: &[ViewDecision]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for d in decisions {
        w.serialize(DecisionRow::from(d))?;
    }
    w.flush().at(path)
}

pub fn read_decisions(path: &Path) -> Result<Vec<DecisionRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateJson {
    pub qp: u8,
    pub mode: String,
    pub width: usize,
    pub height: usize,
    pub views: usize,
    pub total_bits: u64,
    pub bpp: f64,
    pub per_level_bits: Vec<u64>,
    pub level_shares: Vec<f64>,
    pub per_poc_bits: Vec<(usize, u64)>,
    pub dropped: Vec<usize>,
}

impl RateJson {
    pub fn new(rate: &RateReport, qp: u8, mode: &str, dims: (usize, usize, usize), dropped: Vec<usize>) -> Self {
        Self {
            qp,
            mode: mode.into(),
            width: dims.0,
            height: dims.1,
            views: dims.2,
            total_bits: rate.total_bits,
            bpp: rate.bpp,
            per_level_bits: rate.per_level_bits.clone(),
            level_shares: rate.level_shares(),
            per_poc_bits: rate.per_poc_bits.iter().map(|(&p, &b)| (p, b)).collect(),
            dropped,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).at(path)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).at(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// One rate/quality operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdPoint {
    pub label: String,
    pub qp: u8,
    pub rate_bpp: f64,
    #[serde(serialize_with = "ser_real")]
    pub psnr_y: f64,
    #[serde(serialize_with = "ser_real")]
    pub psnr_yuv: f64,
    pub ssim: f64,
    pub views: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewQuality {
    pub s: usize,
    pub t: usize,
    pub poc: usize,
    pub dropped: bool,
    #[serde(serialize_with = "ser_real")]
    pub psnr_y: f64,
    #[serde(serialize_with = "ser_real")]
    pub psnr_cb: f64,
    #[serde(serialize_with = "ser_real")]
    pub psnr_cr: f64,
    pub ssim: f64,
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().at(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub rate_bpp: f64,
    pub quality: f64,
}

/// Appends one point to a curve CSV, creating it with a header when absent.
pub fn append_curve_point(path: &Path, rate_bpp: f64, quality: f64) -> Result<()> {
    let fresh = !path.exists();
    let file = fs::OpenOptions::new().create(true).append(true).open(path).at(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    w.serialize(CurveRow { rate_bpp, quality })?;
    w.flush().at(path)
}

/// Reads a curve CSV; the label is the file stem.
pub fn read_curve(path: &Path) -> Result<RdCurve> {
    let mut r = csv::Reader::from_path(path)?;
    let rows: Vec<CurveRow> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("curve").to_string();
    Ok(RdCurve::new(label, rows.iter().map(|r| (r.rate_bpp, r.quality)).collect())?)
}

pub fn write_curve(path: &Path, curve: &RdCurve) -> Result<()> {
    let rows: Vec<CurveRow> = curve.points().iter().map(|&(rate_bpp, quality)| CurveRow { rate_bpp, quality }).collect();
    write_rows(path, &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveJson {
    pub label: String,
    pub points: Vec<CurveRow>,
}

impl From<&RdCurve> for CurveJson {
    fn from(c: &RdCurve) -> Self {
        Self { label: c.label.clone(), points: c.points().iter().map(|&(rate_bpp, quality)| CurveRow { rate_bpp, quality }).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BdRecord {
    pub anchor: String,
    pub test: String,
    pub bd_rate_pct: f64,
    pub bd_quality: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainRow {
    pub step: u64,
    pub d1: f64,
    pub d2: f64,
    pub adversarial: f64,
    pub reconstruction: f64,
}

impl From<&StepStats> for TrainRow {
    fn from(s: &StepStats) -> Self {
        Self { step: s.step, d1: s.d1, d2: s.d2, adversarial: s.adversarial, reconstruction: s.reconstruction }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_reals_serialise_as_strings() {
        let p = RdPoint { label: "x".into(), qp: 0, rate_bpp: 1.0, psnr_y: f64::INFINITY, psnr_yuv: f64::NAN, ssim: 1.0, views: 1, dropped: 0 };
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"psnr_y\":\"inf\""));
        assert!(s.contains("\"psnr_yuv\":\"nan\""));
    }

    #[test]
    fn curve_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("anchor.csv");
        for (r, q) in [(0.4, 30.0), (0.1, 25.0), (0.2, 27.5), (0.8, 33.0)] {
            append_curve_point(&path, r, q).unwrap();
        }
        let c = read_curve(&path).unwrap();
        assert_eq!(c.label, "anchor");
        assert_eq!(c.points(), &[(0.1, 25.0), (0.2, 27.5), (0.4, 30.0), (0.8, 33.0)]);
    }
}
