//! Light fields as directories of binary PPM views.

use std::fs;
use std::io::{BufWriter, Cursor};
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};
use lfsynth_core::lf::{DisparityMap, LfError, LightField, View};

use crate::error::{Error, IoContext, Result};

pub fn view_file_name(s: usize, t: usize) -> String {
    format!("view_{s:02}_{t:02}.ppm")
}

fn parse_view_name(name: &str) -> Option<(usize, usize)> {
    let core = name.strip_prefix("view_")?.strip_suffix(".ppm")?;
    let (s, t) = core.split_once('_')?;
    Some((s.parse().ok()?, t.parse().ok()?))
}

pub fn read_ppm(path: &Path) -> Result<View> {
    let bytes = fs::read(path).at(path)?;
    decode_ppm(&bytes).map_err(|e| Error::FormatError(format!("{}: {e}", path.display())))
}

pub fn decode_ppm(bytes: &[u8]) -> std::result::Result<View, String> {
    let img = image::load(Cursor::new(bytes), ImageFormat::Pnm).map_err(|e| e.to_string())?;
    let rgb = img.to_rgb8();
    View::from_rgb(rgb.width() as usize, rgb.height() as usize, rgb.as_raw()).map_err(|e| e.to_string())
}

pub fn write_ppm(path: &Path, view: &View) -> Result<()> {
    let file = fs::File::create(path).at(path)?;
    let enc = PnmEncoder::new(BufWriter::new(file)).with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary));
    enc.write_image(&view.to_rgb(), view.width() as u32, view.height() as u32, ExtendedColorType::Rgb8)
        .map_err(|e| Error::FormatError(format!("{}: {e}", path.display())))
}

/// Loads every `view_SS_TT.ppm` in `dir`; the grid extent comes from the largest indices.
pub fn load_lightfield(dir: &Path) -> Result<LightField> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir).at(dir)? {
        let entry = entry.at(dir)?;
        if let Some(st) = entry.file_name().to_str().and_then(parse_view_name) {
            found.push(st);
        }
    }
    if found.is_empty() {
        return Err(LfError::MissingView(0, 0).into());
    }
    let grid_s = found.iter().map(|f| f.0).max().unwrap_or(0) + 1;
    let grid_t = found.iter().map(|f| f.1).max().unwrap_or(0) + 1;
    let mut views = Vec::with_capacity(grid_s * grid_t);
    for s in 0..grid_s {
        for t in 0..grid_t {
            let path = dir.join(view_file_name(s, t));
            if !path.exists() {
                return Err(LfError::MissingView(s, t).into());
            }
            views.push(read_ppm(&path)?);
        }
    }
    Ok(LightField::new(grid_s, grid_t, views)?)
}

pub fn save_lightfield(dir: &Path, lf: &LightField) -> Result<()> {
    fs::create_dir_all(dir).at(dir)?;
    for s in 0..lf.grid_s() {
        for t in 0..lf.grid_t() {
            write_ppm(&dir.join(view_file_name(s, t)), lf.view(s, t))?;
        }
    }
    Ok(())
}

/// Magic of the disparity-map file, padded to eight bytes.
pub const LFDM_MAGIC: &[u8; 8] = b"LFDM\0\0\0\0";

pub fn encode_disparity(map: &DisparityMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * map.data.len());
    out.extend_from_slice(LFDM_MAGIC);
    out.extend_from_slice(&(map.width as u32).to_le_bytes());
    out.extend_from_slice(&(map.height as u32).to_le_bytes());
    for v in &map.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_disparity(bytes: &[u8]) -> std::result::Result<DisparityMap, String> {
    if bytes.len() < 16 || &bytes[..8] != LFDM_MAGIC {
        return Err("not a disparity map".into());
    }
    let width = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let height = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let body = &bytes[16..];
    if width.checked_mul(height).and_then(|n| n.checked_mul(4)) != Some(body.len()) {
        return Err("disparity map size does not match its header".into());
    }
    let data = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    Ok(DisparityMap { width, height, data })
}

pub fn write_disparity(path: &Path, map: &DisparityMap) -> Result<()> {
    fs::write(path, encode_disparity(map)).at(path)
}

pub fn read_disparity(path: &Path) -> Result<DisparityMap> {
    let bytes = fs::read(path).at(path)?;
    decode_disparity(&bytes).map_err(|e| Error::FormatError(format!("{}: {e}", path.display())))
}

pub fn disparity_path(dir: &Path) -> PathBuf {
    dir.join("disparity.lfdm")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn view_names() {
        assert_eq!(view_file_name(3, 12), "view_03_12.ppm");
        assert_eq!(parse_view_name("view_03_12.ppm"), Some((3, 12)));
        assert_eq!(parse_view_name("view_03.ppm"), None);
        assert_eq!(parse_view_name("other.ppm"), None);
    }

    #[test]
    fn disparity_round_trip_and_errors() {
        let map = DisparityMap { width: 3, height: 2, data: vec![0.0, -1.5, 2.25, 1e-3, 7.0, -0.0] };
        let bytes = encode_disparity(&map);
        assert_eq!(decode_disparity(&bytes).unwrap(), map);
        assert!(decode_disparity(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_disparity(b"LFDX\0\0\0\0").is_err());
    }
}
