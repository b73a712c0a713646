use alloc::vec;
use alloc::vec::Vec;

use super::LfError;

/// One sub-aperture view: three full-resolution 8-bit planes (Y, Cb, Cr).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct View {
    width: usize,
    height: usize,
    planes: [Vec<u8>; 3],
}

impl View {
    /// A mid-grey view.
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, [128, 128, 128])
    }

    pub fn filled(width: usize, height: usize, value: [u8; 3]) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            planes: [vec![value[0]; n], vec![value[1]; n], vec![value[2]; n]],
        }
    }

    pub fn from_planes(width: usize, height: usize, planes: [Vec<u8>; 3]) -> Result<Self, LfError> {
        if planes.iter().any(|p| p.len() != width * height) {
            return Err(LfError::InconsistentDimensions);
        }
        Ok(Self { width, height, planes })
    }

    /// Builds a view from interleaved 8-bit RGB using full-range BT.601.
    pub fn from_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Self, LfError> {
        if rgb.len() != width * height * 3 {
            return Err(LfError::InconsistentDimensions);
        }
        let mut view = Self::new(width, height);
        for (i, px) in rgb.chunks_exact(3).enumerate() {
            let [y, cb, cr] = rgb_to_ycbcr([px[0], px[1], px[2]]);
            view.planes[0][i] = y;
            view.planes[1][i] = cb;
            view.planes[2][i] = cr;
        }
        Ok(view)
    }

    /// Interleaved 8-bit RGB, full-range BT.601.
    pub fn to_rgb(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.width * self.height * 3);
        for i in 0..self.width * self.height {
            let rgb = ycbcr_to_rgb([self.planes[0][i], self.planes[1][i], self.planes[2][i]]);
            out.extend_from_slice(&rgb);
        }
        out
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[u8] {
        &self.planes[c]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [u8] {
        &mut self.planes[c]
    }

    pub fn planes(&self) -> &[Vec<u8>; 3] {
        &self.planes
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> u8 {
        self.planes[c][y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, v: u8) {
        self.planes[c][y * self.width + x] = v;
    }

    pub fn same_dims(&self, other: &View) -> bool {
        self.width == other.width && self.height == other.height
    }
}

#[inline]
fn clamp_round(v: f64) -> u8 {
    let r = libm::floor(v + 0.5);
    if r <= 0.0 {
        0
    } else if r >= 255.0 {
        255
    } else {
        r as u8
    }
}

pub fn rgb_to_ycbcr(rgb: [u8; 3]) -> [u8; 3] {
    let (r, g, b) = (rgb[0] as f64, rgb[1] as f64, rgb[2] as f64);
    [
        clamp_round(0.299 * r + 0.587 * g + 0.114 * b),
        clamp_round(128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b),
        clamp_round(128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b),
    ]
}

pub fn ycbcr_to_rgb(ycc: [u8; 3]) -> [u8; 3] {
    let y = ycc[0] as f64;
    let cb = ycc[1] as f64 - 128.0;
    let cr = ycc[2] as f64 - 128.0;
    [
        clamp_round(y + 1.402 * cr),
        clamp_round(y - 0.344136 * cb - 0.714136 * cr),
        clamp_round(y + 1.772 * cb),
    ]
}

/// An S×T grid of equally sized views, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LightField {
    grid_s: usize,
    grid_t: usize,
    views: Vec<View>,
    /// Baseline between adjacent views, in abstract units.
    pub view_pitch: f64,
}

impl LightField {
    pub fn new(grid_s: usize, grid_t: usize, views: Vec<View>) -> Result<Self, LfError> {
        if grid_s == 0 || grid_t == 0 {
            return Err(LfError::InvalidGrid(grid_s, grid_t));
        }
        if views.len() != grid_s * grid_t {
            return Err(LfError::InvalidGrid(grid_s, grid_t));
        }
        if views.windows(2).any(|w| !w[0].same_dims(&w[1])) {
            return Err(LfError::InconsistentDimensions);
        }
        Ok(Self { grid_s, grid_t, views, view_pitch: 1.0 })
    }

    pub fn grid_s(&self) -> usize {
        self.grid_s
    }

    pub fn grid_t(&self) -> usize {
        self.grid_t
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn width(&self) -> usize {
        self.views[0].width()
    }

    pub fn height(&self) -> usize {
        self.views[0].height()
    }

    pub fn view(&self, s: usize, t: usize) -> &View {
        &self.views[s * self.grid_t + t]
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn into_views(self) -> Vec<View> {
        self.views
    }
}
