//! Per-frame block coding shared by the encoder and decoder.

use alloc::vec::Vec;

use super::bits::{se_len, ue_len, BitReader, BitWriter, Exhausted};
use super::picture::{Picture, BLOCK};
use super::transform::{dequantize, forward, inverse, qstep_q6, quantize, ZIGZAG};

const MAX_MV: i32 = 1024;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Refs<'a> {
    Intra,
    Inter { past: &'a Picture, future: Option<&'a Picture> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Bi,
    Past,
    Future,
    Dc,
}

const MODES_BI: [Mode; 4] = [Mode::Bi, Mode::Past, Mode::Future, Mode::Dc];
const MODES_UNI: [Mode; 2] = [Mode::Past, Mode::Dc];

#[derive(Debug, Clone, Copy)]
pub(crate) struct FrameParams {
    pub qp: u8,
    pub bypass: bool,
    pub search_range: i32,
}

/// Malformed or truncated payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Corrupt;

impl From<Exhausted> for Corrupt {
    fn from(_: Exhausted) -> Self {
        Corrupt
    }
}

type Block = [i32; 64];

fn dc_prediction(recon: &Picture, c: usize, bx: usize, by: usize) -> Block {
    let plane = &recon.planes[c];
    let mut sum = 0u32;
    let mut n = 0u32;
    if by > 0 {
        let row = (by - 1) * recon.w;
        sum += plane[row + bx..row + bx + BLOCK].iter().map(|&v| v as u32).sum::<u32>();
        n += BLOCK as u32;
    }
    if bx > 0 {
        sum += (0..BLOCK).map(|y| plane[(by + y) * recon.w + bx - 1] as u32).sum::<u32>();
        n += BLOCK as u32;
    }
    let dc = if n == 0 { 128 } else { (sum + n / 2) / n };
    [dc as i32; 64]
}

fn motion_prediction(reference: &Picture, c: usize, bx: usize, by: usize, mv: (i32, i32)) -> Block {
    let mut out = [0i32; 64];
    let x0 = bx as isize + mv.0 as isize;
    let y0 = by as isize + mv.1 as isize;
    let inside = x0 >= 0 && y0 >= 0 && x0 as usize + BLOCK <= reference.w && y0 as usize + BLOCK <= reference.h;
    if inside {
        let plane = &reference.planes[c];
        for y in 0..BLOCK {
            let row = (y0 as usize + y) * reference.w + x0 as usize;
            for x in 0..BLOCK {
                out[y * BLOCK + x] = plane[row + x] as i32;
            }
        }
    } else {
        for y in 0..BLOCK {
            for x in 0..BLOCK {
                out[y * BLOCK + x] = reference.at(c, x0 + x as isize, y0 + y as isize) as i32;
            }
        }
    }
    out
}

fn average(a: &Block, b: &Block) -> Block {
    let mut out = [0i32; 64];
    for i in 0..64 {
        out[i] = (a[i] + b[i] + 1) >> 1;
    }
    out
}

fn source_block(src: &Picture, c: usize, bx: usize, by: usize) -> Block {
    let mut out = [0i32; 64];
    for y in 0..BLOCK {
        let row = (by + y) * src.w + bx;
        for x in 0..BLOCK {
            out[y * BLOCK + x] = src.planes[c][row + x] as i32;
        }
    }
    out
}

fn sad(a: &Block, b: &Block) -> u32 {
    a.iter().zip(b.iter()).map(|(x, y)| x.abs_diff(*y)).sum()
}

fn mvd_bits(mv: (i32, i32), pred: (i32, i32)) -> u32 {
    se_len(mv.0 - pred.0) + se_len(mv.1 - pred.1)
}

/// Full-search integer motion estimation on luma.
fn search(src: &Block, reference: &Picture, bx: usize, by: usize, range: i32, pred: (i32, i32), lambda: u32) -> ((i32, i32), u32) {
    let mut best = ((0, 0), u32::MAX);
    for dy in -range..=range {
        for dx in -range..=range {
            let p = motion_prediction(reference, 0, bx, by, (dx, dy));
            let cost = sad(src, &p) + lambda * mvd_bits((dx, dy), pred);
            if cost < best.1 {
                best = ((dx, dy), cost);
            }
        }
    }
    best
}

fn write_residual(w: &mut BitWriter, levels: &Block) {
    let nonzero = ZIGZAG.iter().filter(|&&i| levels[i] != 0).count();
    w.put_bit(nonzero > 0);
    if nonzero == 0 {
        return;
    }
    w.put_ue(nonzero as u32 - 1);
    let mut run = 0;
    for &i in ZIGZAG.iter() {
        if levels[i] == 0 {
            run += 1;
        } else {
            w.put_ue(run);
            w.put_se(levels[i]);
            run = 0;
        }
    }
}

fn read_residual(r: &mut BitReader<'_>) -> Result<Block, Corrupt> {
    let mut levels = [0i32; 64];
    if !r.bit()? {
        return Ok(levels);
    }
    let nonzero = r.ue()? as usize + 1;
    if nonzero > 64 {
        return Err(Corrupt);
    }
    let mut pos = 0usize;
    for _ in 0..nonzero {
        pos += r.ue()? as usize;
        if pos >= 64 {
            return Err(Corrupt);
        }
        let level = r.se()?;
        if level == 0 || level.unsigned_abs() > 1 << 16 {
            return Err(Corrupt);
        }
        levels[ZIGZAG[pos]] = level;
        pos += 1;
    }
    Ok(levels)
}

/// Reconstructs one plane of a block from its prediction and coded levels.
fn reconstruct(pred: &Block, levels: &Block, qp: u8, bypass: bool, recon: &mut Picture, c: usize, bx: usize, by: usize) {
    let residual = if bypass {
        *levels
    } else {
        let mut coeffs = [0i32; 64];
        for i in 0..64 {
            coeffs[i] = dequantize(levels[i], qp);
        }
        inverse(&coeffs)
    };
    for y in 0..BLOCK {
        let row = (by + y) * recon.w + bx;
        for x in 0..BLOCK {
            let v = (pred[y * BLOCK + x] + residual[y * BLOCK + x]).clamp(0, 255);
            recon.planes[c][row + x] = v as u8;
        }
    }
}

fn predict(mode: Mode, refs: Refs<'_>, recon: &Picture, c: usize, bx: usize, by: usize, mvs: [(i32, i32); 2]) -> Block {
    match (mode, refs) {
        (Mode::Dc, _) | (_, Refs::Intra) => dc_prediction(recon, c, bx, by),
        (Mode::Past, Refs::Inter { past, .. }) => motion_prediction(past, c, bx, by, mvs[0]),
        (Mode::Future, Refs::Inter { future, past }) => motion_prediction(future.unwrap_or(past), c, bx, by, mvs[1]),
        (Mode::Bi, Refs::Inter { past, future }) => {
            let a = motion_prediction(past, c, bx, by, mvs[0]);
            let b = motion_prediction(future.unwrap_or(past), c, bx, by, mvs[1]);
            average(&a, &b)
        }
    }
}

/// Codes one frame; returns the payload and the decoder-identical reconstruction.
pub(crate) fn encode_frame(src: &Picture, refs: Refs<'_>, params: FrameParams) -> (Vec<u8>, Picture) {
    let mut w = BitWriter::new();
    w.put_bit(params.bypass);
    let mut recon = Picture::blank(src.w, src.h);
    let lambda = ((qstep_q6(params.qp) + 32) >> 6).max(1) as u32;
    let intra = matches!(refs, Refs::Intra);
    let mut mv_pred = [(0, 0); 2];

    for by in (0..src.h).step_by(BLOCK) {
        for bx in (0..src.w).step_by(BLOCK) {
            let luma = source_block(src, 0, bx, by);
            let mut mvs = [(0, 0); 2];
            let mut mode = Mode::Dc;
            if let Refs::Inter { past, future } = refs {
                let modes: &[Mode] = if future.is_some() { &MODES_BI } else { &MODES_UNI };
                let idx_bits = |m: Mode| ue_len(modes.iter().position(|&x| x == m).unwrap_or(0) as u32);
                let (mv0, _) = search(&luma, past, bx, by, params.search_range, mv_pred[0], lambda);
                mvs[0] = mv0;
                let mut best = (Mode::Past, u32::MAX);
                let mut consider = |m: Mode, pred: Block, side_bits: u32| {
                    let cost = sad(&luma, &pred) + lambda * (side_bits + idx_bits(m));
                    if cost < best.1 {
                        best = (m, cost);
                    }
                };
                let p0 = motion_prediction(past, 0, bx, by, mv0);
                consider(Mode::Past, p0, mvd_bits(mv0, mv_pred[0]));
                if let Some(fut) = future {
                    let (mv1, _) = search(&luma, fut, bx, by, params.search_range, mv_pred[1], lambda);
                    mvs[1] = mv1;
                    let p1 = motion_prediction(fut, 0, bx, by, mv1);
                    consider(Mode::Future, p1, mvd_bits(mv1, mv_pred[1]));
                    consider(Mode::Bi, average(&p0, &p1), mvd_bits(mv0, mv_pred[0]) + mvd_bits(mv1, mv_pred[1]));
                }
                consider(Mode::Dc, dc_prediction(&recon, 0, bx, by), 0);
                mode = best.0;

                let idx = modes.iter().position(|&x| x == mode).unwrap_or(0);
                w.put_ue(idx as u32);
                if matches!(mode, Mode::Past | Mode::Bi) {
                    w.put_se(mvs[0].0 - mv_pred[0].0);
                    w.put_se(mvs[0].1 - mv_pred[0].1);
                    mv_pred[0] = mvs[0];
                }
                if matches!(mode, Mode::Future | Mode::Bi) {
                    w.put_se(mvs[1].0 - mv_pred[1].0);
                    w.put_se(mvs[1].1 - mv_pred[1].1);
                    mv_pred[1] = mvs[1];
                }
            }

            for c in 0..3 {
                let pred = predict(mode, refs, &recon, c, bx, by, mvs);
                let orig = if c == 0 { luma } else { source_block(src, c, bx, by) };
                let mut levels = [0i32; 64];
                if params.bypass {
                    for i in 0..64 {
                        levels[i] = orig[i] - pred[i];
                    }
                } else {
                    let mut res = [0i32; 64];
                    for i in 0..64 {
                        res[i] = orig[i] - pred[i];
                    }
                    let coeffs = forward(&res);
                    for i in 0..64 {
                        levels[i] = quantize(coeffs[i], params.qp, intra || mode == Mode::Dc);
                    }
                }
                write_residual(&mut w, &levels);
                reconstruct(&pred, &levels, params.qp, params.bypass, &mut recon, c, bx, by);
            }
        }
    }
    (w.finish(), recon)
}

/// Inverse of [`encode_frame`] for a picture of padded size `w`×`h`.
pub(crate) fn decode_frame(payload: &[u8], refs: Refs<'_>, qp: u8, w: usize, h: usize) -> Result<Picture, Corrupt> {
    let mut r = BitReader::new(payload);
    let bypass = r.bit()?;
    let mut recon = Picture::blank(w, h);
    let mut mv_pred = [(0, 0); 2];

    for by in (0..recon.h).step_by(BLOCK) {
        for bx in (0..recon.w).step_by(BLOCK) {
            let mut mvs = [(0, 0); 2];
            let mut mode = Mode::Dc;
            if let Refs::Inter { future, .. } = refs {
                let modes: &[Mode] = if future.is_some() { &MODES_BI } else { &MODES_UNI };
                mode = *modes.get(r.ue()? as usize).ok_or(Corrupt)?;
                if matches!(mode, Mode::Past | Mode::Bi) {
                    mvs[0] = (mv_pred[0].0 + r.se()?, mv_pred[0].1 + r.se()?);
                    mv_pred[0] = mvs[0];
                }
                if matches!(mode, Mode::Future | Mode::Bi) {
                    mvs[1] = (mv_pred[1].0 + r.se()?, mv_pred[1].1 + r.se()?);
                    mv_pred[1] = mvs[1];
                }
                if mvs.iter().any(|m| m.0.abs() > MAX_MV || m.1.abs() > MAX_MV) {
                    return Err(Corrupt);
                }
            }
            for c in 0..3 {
                let pred = predict(mode, refs, &recon, c, bx, by, mvs);
                let levels = read_residual(&mut r)?;
                reconstruct(&pred, &levels, qp, bypass, &mut recon, c, bx, by);
            }
        }
    }
    Ok(recon)
}
