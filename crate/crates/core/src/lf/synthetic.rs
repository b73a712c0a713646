//! Layered fronto-parallel scenes with known disparity.
//!
//! Each layer is a procedural texture on an unbounded plane, so translated
//! views have genuine content at their borders.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::view::{LightField, View};
use super::LfError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub seed: u64,
    /// Pixels of shift per unit of view offset.
    pub disparity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    pub width: usize,
    pub height: usize,
    pub grid_s: usize,
    pub grid_t: usize,
    /// Back to front; layer 0 covers the whole frame.
    pub layers: Vec<LayerSpec>,
    /// Standard deviation of additive Gaussian noise, in 8-bit code values.
    pub noise: f64,
    pub noise_seed: u64,
}

/// Per-pixel disparity of the centre view, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl DisparityMap {
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

/// Centre of the grid, matching the spiral scan's start cell.
pub(crate) fn centre(grid_s: usize, grid_t: usize) -> (usize, usize) {
    (grid_s.div_ceil(2) - 1, grid_t.div_ceil(2) - 1)
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let h = splitmix(seed ^ splitmix((ix as u64).wrapping_mul(0x1f1f_1f1f) ^ splitmix(iy as u64)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn value_noise(seed: u64, u: f64, v: f64, cell: f64) -> f64 {
    let x = u / cell;
    let y = v / cell;
    let x0 = libm::floor(x);
    let y0 = libm::floor(y);
    let fx = x - x0;
    let fy = y - y0;
    let sx = fx * fx * (3.0 - 2.0 * fx);
    let sy = fy * fy * (3.0 - 2.0 * fy);
    let (ix, iy) = (x0 as i64, y0 as i64);
    let a = lattice(seed, ix, iy);
    let b = lattice(seed, ix + 1, iy);
    let c = lattice(seed, ix, iy + 1);
    let d = lattice(seed, ix + 1, iy + 1);
    let top = a + (b - a) * sx;
    let bottom = c + (d - c) * sx;
    top + (bottom - top) * sy
}

const OCTAVES: [(f64, f64); 4] = [(16.0, 0.45), (8.0, 0.25), (4.0, 0.18), (2.0, 0.12)];

/// Continuous texture value of a layer at surface coordinates (u, v), in 8-bit units.
fn texture(seed: u64, channel: usize, u: f64, v: f64) -> f64 {
    let cseed = splitmix(seed.wrapping_add(channel as u64 * 0x5151));
    let n: f64 = OCTAVES
        .iter()
        .enumerate()
        .map(|(i, &(cell, amp))| amp * value_noise(cseed.wrapping_add(i as u64), u, v, cell))
        .sum();
    match channel {
        0 => 24.0 + 208.0 * n,
        _ => 128.0 + 90.0 * (n - 0.5),
    }
}

/// Rectangle covered by a foreground layer, in its own surface coordinates.
#[derive(Debug, Clone, Copy)]
struct Footprint {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Footprint {
    fn for_layer(index: usize, seed: u64, width: usize, height: usize) -> Option<Self> {
        if index == 0 {
            return None;
        }
        let r = |k: u64| (splitmix(seed ^ splitmix(k)) >> 11) as f64 / (1u64 << 53) as f64;
        let (w, h) = (width as f64, height as f64);
        let hw = w * (0.15 + 0.15 * r(1));
        let hh = h * (0.15 + 0.15 * r(2));
        let cx = w / 2.0 + w * 0.25 * (r(3) - 0.5);
        let cy = h / 2.0 + h * 0.25 * (r(4) - 0.5);
        Some(Self { x0: cx - hw, y0: cy - hh, x1: cx + hw, y1: cy + hh })
    }

    #[inline]
    fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.x0 && u < self.x1 && v >= self.y0 && v < self.y1
    }
}

struct Scene {
    layers: Vec<(LayerSpec, Option<Footprint>)>,
    centre: (usize, usize),
}

impl Scene {
    fn new(params: &SyntheticParams) -> Self {
        let layers = params
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| (*l, Footprint::for_layer(i, l.seed, params.width, params.height)))
            .collect();
        Self { layers, centre: centre(params.grid_s, params.grid_t) }
    }

    #[inline]
    fn surface(&self, layer: &LayerSpec, s: usize, t: usize, x: f64, y: f64) -> (f64, f64) {
        let dt = t as f64 - self.centre.1 as f64;
        let ds = s as f64 - self.centre.0 as f64;
        (x - layer.disparity * dt, y - layer.disparity * ds)
    }
}

/// Renders every view of a layered scene and the centre view's disparity.
pub fn generate_synthetic_lf(params: &SyntheticParams) -> Result<(LightField, DisparityMap), LfError> {
    let SyntheticParams { width, height, grid_s, grid_t, .. } = *params;
    if width < 16 || height < 16 {
        return Err(LfError::TooSmall(width, height));
    }
    if grid_s == 0 || grid_t == 0 || params.layers.is_empty() {
        return Err(LfError::InvalidGrid(grid_s, grid_t));
    }
    let limit = width as f64 / 4.0;
    if let Some(bad) = params.layers.iter().find(|l| !(libm::fabs(l.disparity) <= limit)) {
        return Err(LfError::DisparityOutOfRange(bad.disparity));
    }
    let scene = Scene::new(params);
    let normal = Normal::new(0.0, params.noise.max(0.0)).map_err(|_| LfError::InvalidGrid(grid_s, grid_t))?;

    let mut views = Vec::with_capacity(grid_s * grid_t);
    let mut values = vec![0.0f64; width * height];
    for s in 0..grid_s {
        for t in 0..grid_t {
            let mut view = View::new(width, height);
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix(params.noise_seed ^ ((s * grid_t + t) as u64)));
            for c in 0..3 {
                // painter's algorithm, back to front
                for (layer, footprint) in &scene.layers {
                    for y in 0..height {
                        for x in 0..width {
                            let (u, v) = scene.surface(layer, s, t, x as f64, y as f64);
                            if footprint.is_none_or(|f| f.contains(u, v)) {
                                values[y * width + x] = texture(layer.seed, c, u, v);
                            }
                        }
                    }
                }
                let plane = view.plane_mut(c);
                for (dst, &v) in plane.iter_mut().zip(values.iter()) {
                    let noisy = if params.noise > 0.0 { v + normal.sample(&mut rng) } else { v };
                    *dst = libm::floor(noisy + 0.5).clamp(0.0, 255.0) as u8;
                }
            }
            views.push(view);
        }
    }

    let (cs, ct) = scene.centre;
    let mut disparity = DisparityMap { width, height, data: vec![0.0; width * height] };
    for y in 0..height {
        for x in 0..width {
            for (layer, footprint) in &scene.layers {
                let (u, v) = scene.surface(layer, cs, ct, x as f64, y as f64);
                if footprint.is_none_or(|f| f.contains(u, v)) {
                    disparity.data[y * width + x] = layer.disparity as f32;
                }
            }
        }
    }

    Ok((LightField::new(grid_s, grid_t, views)?, disparity))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(layers: Vec<LayerSpec>, noise: f64) -> SyntheticParams {
        SyntheticParams { width: 48, height: 40, grid_s: 8, grid_t: 8, layers, noise, noise_seed: 7 }
    }

    #[test]
    fn zero_disparity_views_identical() {
        let (lf, disp) = generate_synthetic_lf(&params(vec![LayerSpec { seed: 3, disparity: 0.0 }], 0.0)).unwrap();
        assert_eq!(lf.len(), 64);
        assert!(lf.views().iter().all(|v| v == &lf.views()[0]));
        assert!(disp.data.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn unit_disparity_is_one_pixel_shift() {
        let (lf, _) = generate_synthetic_lf(&params(vec![LayerSpec { seed: 11, disparity: 1.0 }], 0.0)).unwrap();
        let a = lf.view(2, 3);
        let b = lf.view(2, 4);
        // view (s, t+1) at x equals view (s, t) at x - 1
        for c in 0..3 {
            for y in 0..a.height() {
                for x in 1..a.width() {
                    assert_eq!(b.get(c, x, y), a.get(c, x - 1, y));
                }
            }
        }
    }

    #[test]
    fn deterministic_with_noise() {
        let p = params(vec![LayerSpec { seed: 1, disparity: 0.5 }, LayerSpec { seed: 2, disparity: 2.0 }], 3.0);
        let a = generate_synthetic_lf(&p).unwrap();
        let b = generate_synthetic_lf(&p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn disparity_out_of_range() {
        let p = params(vec![LayerSpec { seed: 1, disparity: 13.0 }], 0.0);
        assert_eq!(generate_synthetic_lf(&p).unwrap_err(), LfError::DisparityOutOfRange(13.0));
    }

    #[test]
    fn too_small() {
        let mut p = params(vec![LayerSpec { seed: 1, disparity: 0.0 }], 0.0);
        p.width = 8;
        assert!(matches!(generate_synthetic_lf(&p), Err(LfError::TooSmall(8, 40))));
    }
}
