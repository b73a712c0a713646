use crate::lf::View;

use super::MetricsError;

pub const SSIM_WINDOW: usize = 8;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// Per-plane PSNR in dB; identical planes give `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Psnr {
    pub y: f64,
    pub cb: f64,
    pub cr: f64,
    /// Over all three planes jointly.
    pub all: f64,
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * libm::log10(255.0 * 255.0 / mse)
    }
}

fn plane_sse(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).map(|(&x, &y)| (x as i64 - y as i64).pow(2) as u64).sum()
}

pub fn mse_luma(a: &View, b: &View) -> Result<f64, MetricsError> {
    if !a.same_dims(b) {
        return Err(MetricsError::ShapeError);
    }
    Ok(plane_sse(a.plane(0), b.plane(0)) as f64 / (a.width() * a.height()) as f64)
}

pub fn psnr(a: &View, b: &View) -> Result<Psnr, MetricsError> {
    if !a.same_dims(b) {
        return Err(MetricsError::ShapeError);
    }
    let n = (a.width() * a.height()) as f64;
    let sse: [u64; 3] = core::array::from_fn(|c| plane_sse(a.plane(c), b.plane(c)));
    Ok(Psnr {
        y: psnr_from_mse(sse[0] as f64 / n),
        cb: psnr_from_mse(sse[1] as f64 / n),
        cr: psnr_from_mse(sse[2] as f64 / n),
        all: psnr_from_mse(sse.iter().sum::<u64>() as f64 / (3.0 * n)),
    })
}

/// Mean luma SSIM over every 8×8 window position (stride 1, uniform weights).
pub fn ssim(a: &View, b: &View) -> Result<f64, MetricsError> {
    if !a.same_dims(b) || a.width() < SSIM_WINDOW || a.height() < SSIM_WINDOW {
        return Err(MetricsError::ShapeError);
    }
    let (w, h) = (a.width(), a.height());
    let (pa, pb) = (a.plane(0), b.plane(0));
    // integral images of x, y, x², y², xy
    let stride = w + 1;
    let mut sums = alloc::vec![[0i64; 5]; stride * (h + 1)];
    for y in 0..h {
        let mut row = [0i64; 5];
        for x in 0..w {
            let p = pa[y * w + x] as i64;
            let q = pb[y * w + x] as i64;
            row[0] += p;
            row[1] += q;
            row[2] += p * p;
            row[3] += q * q;
            row[4] += p * q;
            let above = sums[y * stride + x + 1];
            sums[(y + 1) * stride + x + 1] = core::array::from_fn(|k| above[k] + row[k]);
        }
    }
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..=h - SSIM_WINDOW {
        for x in 0..=w - SSIM_WINDOW {
            let (x1, y1) = (x + SSIM_WINDOW, y + SSIM_WINDOW);
            let s: [f64; 5] = core::array::from_fn(|k| {
                (sums[y1 * stride + x1][k] - sums[y * stride + x1][k] - sums[y1 * stride + x][k] + sums[y * stride + x][k])
                    as f64
            });
            let (ma, mb) = (s[0] / n, s[1] / n);
            let va = s[2] / n - ma * ma;
            let vb = s[3] / n - mb * mb;
            let cov = s[4] / n - ma * mb;
            total += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}
