//! Container for coded light-field bitstreams.

use std::fs;
use std::path::Path;

use lfsynth_core::codec::{Bitstream, BitstreamHeader, CodecError, Unit, BITSTREAM_VERSION};

use crate::error::{IoContext, Result};

pub const MAGIC: &[u8; 4] = b"LFBS";
const HEADER_LEN: usize = 4 + 1 + 2 + 2 + 5;
const UNIT_HEADER_LEN: usize = 2 + 1 + 1 + 1 + 4;

pub fn encode(b: &Bitstream) -> Vec<u8> {
    let h = &b.header;
    let mut out = Vec::with_capacity(HEADER_LEN + b.units.iter().map(|u| UNIT_HEADER_LEN + u.payload.len()).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.push(h.version);
    out.extend_from_slice(&h.width.to_le_bytes());
    out.extend_from_slice(&h.height.to_le_bytes());
    out.extend_from_slice(&[h.grid_s, h.grid_t, h.gop_size, h.base_qp, h.scan]);
    for u in &b.units {
        out.extend_from_slice(&u.poc.to_le_bytes());
        out.extend_from_slice(&[u.temporal_id, u.coded as u8, u.qp]);
        out.extend_from_slice(&(u.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&u.payload);
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parses a container; a truncated unit reports the last POC that was read.
pub fn decode(bytes: &[u8]) -> std::result::Result<Bitstream, CodecError> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4) != Some(MAGIC.as_slice()) {
        return Err(CodecError::InvalidHeader("bad magic"));
    }
    let version = c.u8().ok_or(CodecError::InvalidHeader("truncated header"))?;
    if version != BITSTREAM_VERSION {
        return Err(CodecError::VersionError(version));
    }
    let header = (|| {
        Some(BitstreamHeader {
            version,
            width: c.u16()?,
            height: c.u16()?,
            grid_s: c.u8()?,
            grid_t: c.u8()?,
            gop_size: c.u8()?,
            base_qp: c.u8()?,
            scan: c.u8()?,
        })
    })()
    .ok_or(CodecError::InvalidHeader("truncated header"))?;
    let mut units = Vec::new();
    let mut last_poc = 0usize;
    while c.pos < bytes.len() {
        let poc = c.u16().ok_or(CodecError::CorruptStream(last_poc))?;
        last_poc = poc as usize;
        let corrupt = CodecError::CorruptStream(poc as usize);
        let temporal_id = c.u8().ok_or(corrupt.clone())?;
        let coded = match c.u8().ok_or(corrupt.clone())? {
            0 => false,
            1 => true,
            _ => return Err(corrupt),
        };
        let qp = c.u8().ok_or(corrupt.clone())?;
        let len = c.u32().ok_or(corrupt.clone())? as usize;
        let payload = c.take(len).ok_or(corrupt)?.to_vec();
        units.push(Unit { poc, temporal_id, coded, qp, payload });
    }
    Ok(Bitstream { header, units })
}

pub fn write(path: &Path, b: &Bitstream) -> Result<()> {
    fs::write(path, encode(b)).at(path)
}

pub fn read(path: &Path) -> Result<Bitstream> {
    let bytes = fs::read(path).at(path)?;
    Ok(decode(&bytes)?)
}
