//! Bilinear backward warping and plane-sweep features.

use alloc::vec::Vec;

use crate::lf::{DisparityMap, View};

use super::tensor::Tensor;
use super::SynthError;

/// View position on the angular grid as `(s, t)`; `t` runs along x, `s` along y.
pub type Position = (f64, f64);

/// Three-plane image with samples normalised to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub planes: [Vec<f64>; 3],
}

impl Image {
    pub fn from_view(view: &View) -> Self {
        let conv = |c: usize| view.plane(c).iter().map(|&v| v as f64 / 255.0).collect();
        Self { width: view.width(), height: view.height(), planes: [conv(0), conv(1), conv(2)] }
    }

    /// Denormalises, rounds and clamps to 8 bits.
    pub fn to_view(&self) -> View {
        let conv = |c: usize| self.planes[c].iter().map(|&v| to_u8(v * 255.0)).collect();
        View::from_planes(self.width, self.height, [conv(0), conv(1), conv(2)]).expect("plane sizes match")
    }

    /// Crop `[3, h, w]` at `origin`; the region must lie inside the image.
    pub fn crop(&self, origin: (usize, usize), size: (usize, usize)) -> Tensor {
        let (w, h) = size;
        let mut out = Tensor::zeros(&[3, h, w]);
        for c in 0..3 {
            for y in 0..h {
                let src = &self.planes[c][(origin.1 + y) * self.width + origin.0..][..w];
                out.data[(c * h + y) * w..][..w].copy_from_slice(src);
            }
        }
        out
    }
}

#[inline]
pub(crate) fn to_u8(v: f64) -> u8 {
    libm::round(v.clamp(0.0, 255.0)) as u8
}

#[inline]
fn axis(v: f64, n: usize) -> (usize, f64, bool) {
    if n < 2 {
        return (0, 0.0, false);
    }
    let max = (n - 1) as f64;
    let inside = v > 0.0 && v < max;
    let c = v.clamp(0.0, max);
    let i = (libm::floor(c) as usize).min(n - 2);
    (i, c - i as f64, inside)
}

/// Bilinear sample with edge clamping.
#[inline]
pub fn sample(plane: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    sample_grad(plane, w, h, x, y).0
}

/// Bilinear sample and its partial derivatives in x and y.
#[inline]
pub fn sample_grad(plane: &[f64], w: usize, h: usize, x: f64, y: f64) -> (f64, f64, f64) {
    let (x0, fx, in_x) = axis(x, w);
    let (y0, fy, in_y) = axis(y, h);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let a = plane[y0 * w + x0];
    let b = plane[y0 * w + x1];
    let c = plane[y1 * w + x0];
    let d = plane[y1 * w + x1];
    let top = a + fx * (b - a);
    let bottom = c + fx * (d - c);
    let v = top + fy * (bottom - top);
    let dx = if in_x { (1.0 - fy) * (b - a) + fy * (d - c) } else { 0.0 };
    let dy = if in_y { bottom - top } else { 0.0 };
    (v, dx, dy)
}

/// Offset of a reference as seen from the target, `(Δs, Δt)`.
#[inline]
pub fn delta(reference: Position, target: Position) -> (f64, f64) {
    (reference.0 - target.0, reference.1 - target.1)
}

/// Backward-warps `view` by `disparity · (Δt, Δs)` with bilinear sampling.
pub fn warp_view(view: &View, disparity: &DisparityMap, delta: (f64, f64)) -> Result<View, SynthError> {
    let (w, h) = (view.width(), view.height());
    if disparity.width != w || disparity.height != h || disparity.data.len() != w * h {
        return Err(SynthError::ShapeError);
    }
    let planes: [Vec<f64>; 3] = core::array::from_fn(|c| view.plane(c).iter().map(|&v| v as f64).collect());
    let mut out = View::new(w, h);
    for c in 0..3 {
        let dst = out.plane_mut(c);
        for y in 0..h {
            for x in 0..w {
                let d = disparity.data[y * w + x] as f64;
                let v = sample(&planes[c], w, h, x as f64 + d * delta.1, y as f64 + d * delta.0);
                dst[y * w + x] = to_u8(v);
            }
        }
    }
    Ok(out)
}

/// Plane-sweep mean and standard deviation of reference luma over a window.
///
/// Channel `2k` is the mean and `2k + 1` the standard deviation at sweep level `k`.
pub(crate) fn sweep_window(
    refs: &[(&Image, Position)],
    target: Position,
    sweep: &[f64],
    origin: (isize, isize),
    size: (usize, usize),
) -> Tensor {
    let (ww, wh) = size;
    let plane = ww * wh;
    let n = refs.len() as f64;
    let mut out = Tensor::zeros(&[2 * sweep.len(), wh, ww]);
    let mut warped = alloc::vec![0.0; refs.len() * plane];
    for (k, &d) in sweep.iter().enumerate() {
        for (r, &(img, pos)) in refs.iter().enumerate() {
            let (ds, dt) = delta(pos, target);
            let dst = &mut warped[r * plane..(r + 1) * plane];
            for y in 0..wh {
                let sy = (origin.1 + y as isize) as f64 + d * ds;
                for x in 0..ww {
                    let sx = (origin.0 + x as isize) as f64 + d * dt;
                    dst[y * ww + x] = sample(&img.planes[0], img.width, img.height, sx, sy);
                }
            }
        }
        for i in 0..plane {
            // Shifted by the first reference so identical samples give exact zeros.
            let v0 = warped[i];
            let shift = (1..refs.len()).map(|r| warped[r * plane + i] - v0).sum::<f64>() / n;
            let var = (0..refs.len()).map(|r| (warped[r * plane + i] - v0 - shift).powi(2)).sum::<f64>() / n;
            out.data[2 * k * plane + i] = v0 + shift;
            out.data[(2 * k + 1) * plane + i] = libm::sqrt(var);
        }
    }
    out
}

/// Plane-sweep features over whole views, `[2·N_sweep, H, W]`, on normalised luma.
pub fn extract_features(refs: &[(&View, Position)], target: Position, sweep: &[f64]) -> Result<Tensor, SynthError> {
    let first = refs.first().ok_or(SynthError::NoReferences)?.0;
    if refs.iter().any(|(v, _)| !v.same_dims(first)) {
        return Err(SynthError::ShapeError);
    }
    let images: Vec<Image> = refs.iter().map(|(v, _)| Image::from_view(v)).collect();
    let pairs: Vec<(&Image, Position)> = images.iter().zip(refs).map(|(i, r)| (i, r.1)).collect();
    Ok(sweep_window(&pairs, target, sweep, (0, 0), (first.width(), first.height())))
}

/// Evenly spaced disparity levels over `[-d_max, d_max]`.
pub fn sweep_levels(n: usize, d_max: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![0.0],
        _ => (0..n).map(|k| -d_max + 2.0 * d_max * k as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lf::{generate_synthetic_lf, LayerSpec, SyntheticParams};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_view(w: usize, h: usize, seed: u64) -> View {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = View::new(w, h);
        for c in 0..3 {
            for p in v.plane_mut(c) {
                *p = rng.random();
            }
        }
        v
    }

    fn flat(w: usize, h: usize, d: f32) -> DisparityMap {
        DisparityMap { width: w, height: h, data: vec![d; w * h] }
    }

    #[test]
    fn zero_disparity_is_identity() {
        let v = random_view(19, 13, 1);
        assert_eq!(warp_view(&v, &flat(19, 13, 0.0), (1.5, -2.0)).unwrap(), v);
    }

    #[test]
    fn unit_disparity_shifts_one_pixel() {
        let v = random_view(16, 16, 2);
        let out = warp_view(&v, &flat(16, 16, 1.0), (0.0, 1.0)).unwrap();
        for c in 0..3 {
            for y in 0..16 {
                for x in 0..15 {
                    assert_eq!(out.get(c, x, y), v.get(c, x + 1, y));
                }
                assert_eq!(out.get(c, 15, y), v.get(c, 15, y));
            }
        }
    }

    #[test]
    fn integer_shift_inverts_on_interior() {
        let v = random_view(24, 24, 3);
        let fwd = warp_view(&v, &flat(24, 24, 2.0), (1.0, -1.0)).unwrap();
        let back = warp_view(&fwd, &flat(24, 24, -2.0), (1.0, -1.0)).unwrap();
        for c in 0..3 {
            for y in 2..22 {
                for x in 2..22 {
                    assert_eq!(back.get(c, x, y), v.get(c, x, y));
                }
            }
        }
    }

    /// Scalar reference written directly from the bilinear formula.
    fn warp_oracle(view: &View, disp: &DisparityMap, delta: (f64, f64)) -> View {
        let (w, h) = (view.width(), view.height());
        let mut out = View::new(w, h);
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    let d = disp.get(x, y) as f64;
                    let sx = (x as f64 + d * delta.1).clamp(0.0, (w - 1) as f64);
                    let sy = (y as f64 + d * delta.0).clamp(0.0, (h - 1) as f64);
                    let x0 = sx.floor() as usize;
                    let y0 = sy.floor() as usize;
                    let x1 = (x0 + 1).min(w - 1);
                    let y1 = (y0 + 1).min(h - 1);
                    let fx = sx - x0 as f64;
                    let fy = sy - y0 as f64;
                    let g = |xx, yy| view.get(c, xx, yy) as f64;
                    let v = (1.0 - fy) * ((1.0 - fx) * g(x0, y0) + fx * g(x1, y0))
                        + fy * ((1.0 - fx) * g(x0, y1) + fx * g(x1, y1));
                    out.set(c, x, y, v.clamp(0.0, 255.0).round() as u8);
                }
            }
        }
        out
    }

    #[test]
    fn random_warp_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..5 {
            let v = random_view(17, 12, 100 + trial);
            let disp = DisparityMap {
                width: 17,
                height: 12,
                data: (0..17 * 12).map(|_| rng.random_range(-3.0f32..3.0)).collect(),
            };
            let delta = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let a = warp_view(&v, &disp, delta).unwrap();
            let b = warp_oracle(&v, &disp, delta);
            let worst = (0..3)
                .flat_map(|c| a.plane(c).iter().zip(b.plane(c)).map(|(p, q)| (*p as i32 - *q as i32).abs()).collect::<Vec<_>>())
                .max()
                .unwrap();
            // Rounding of exact .5 ties may differ by one code value.
            assert!(worst <= 1);
        }
    }

    #[test]
    fn mismatched_disparity_is_rejected() {
        let v = random_view(16, 16, 4);
        assert_eq!(warp_view(&v, &flat(15, 16, 0.0), (0.0, 1.0)), Err(SynthError::ShapeError));
    }

    #[test]
    fn sample_gradient_matches_finite_difference() {
        let v = random_view(10, 10, 5);
        let img = Image::from_view(&v);
        let h = 1e-6;
        for &(x, y) in &[(3.3, 4.7), (0.5, 8.2), (6.9, 1.1)] {
            let (_, dx, dy) = sample_grad(&img.planes[0], 10, 10, x, y);
            let nx = (sample(&img.planes[0], 10, 10, x + h, y) - sample(&img.planes[0], 10, 10, x - h, y)) / (2.0 * h);
            let ny = (sample(&img.planes[0], 10, 10, x, y + h) - sample(&img.planes[0], 10, 10, x, y - h)) / (2.0 * h);
            assert!((dx - nx).abs() < 1e-6 && (dy - ny).abs() < 1e-6);
        }
    }

    #[test]
    fn identical_refs_have_zero_std_at_zero_plane() {
        let v = random_view(20, 20, 6);
        let refs = [(&v, (0.0, 0.0)), (&v, (0.0, 1.0)), (&v, (1.0, 0.0))];
        let f = extract_features(&refs, (0.0, 0.0), &[0.0]).unwrap();
        assert_eq!(f.shape, vec![2, 20, 20]);
        assert!(f.channel(1).iter().all(|&s| s == 0.0));
        for (m, &p) in f.channel(0).iter().zip(v.plane(0)) {
            assert!((m * 255.0 - p as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn feature_shape_law() {
        let a = random_view(60, 60, 7);
        let b = random_view(60, 60, 8);
        let f = extract_features(&[(&a, (0.0, 0.0)), (&b, (0.0, 1.0))], (1.0, 1.0), &sweep_levels(9, 2.0)).unwrap();
        assert_eq!(f.shape, vec![18, 60, 60]);
        assert_eq!(extract_features(&[], (0.0, 0.0), &[0.0]), Err(SynthError::NoReferences));
    }

    #[test]
    fn std_is_minimised_at_true_disparity() {
        let sweep = sweep_levels(9, 2.0);
        for &d_true in &[-1.5, 0.0, 1.0, 1.9] {
            let (lf, _) = generate_synthetic_lf(&SyntheticParams {
                width: 48,
                height: 48,
                grid_s: 5,
                grid_t: 5,
                layers: vec![LayerSpec { seed: 21, disparity: d_true }],
                noise: 0.0,
                noise_seed: 0,
            })
            .unwrap();
            let refs = [(lf.view(0, 0), (0.0, 0.0)), (lf.view(0, 4), (0.0, 4.0)), (lf.view(4, 0), (4.0, 0.0)), (lf.view(4, 4), (4.0, 4.0))];
            let f = extract_features(&refs, (2.0, 1.0), &sweep).unwrap();
            let mean_std: Vec<f64> = (0..sweep.len()).map(|k| f.channel(2 * k + 1).iter().sum::<f64>()).collect();
            let best = (0..sweep.len()).min_by(|&a, &b| mean_std[a].total_cmp(&mean_std[b])).unwrap();
            let nearest = (0..sweep.len()).min_by(|&a, &b| (sweep[a] - d_true).abs().total_cmp(&(sweep[b] - d_true).abs())).unwrap();
            assert_eq!(best, nearest, "d* = {d_true}");
        }
    }
}
