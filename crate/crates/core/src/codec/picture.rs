use alloc::vec::Vec;

use crate::lf::View;

pub(crate) const BLOCK: usize = 8;

/// Frame buffer padded to a multiple of the block size by edge replication.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Picture {
    pub w: usize,
    pub h: usize,
    pub planes: [Vec<u8>; 3],
}

impl Picture {
    pub fn blank(w: usize, h: usize) -> Self {
        let pw = w.div_ceil(BLOCK) * BLOCK;
        let ph = h.div_ceil(BLOCK) * BLOCK;
        let n = pw * ph;
        Self { w: pw, h: ph, planes: [alloc::vec![0; n], alloc::vec![0; n], alloc::vec![0; n]] }
    }

    pub fn from_view(view: &View) -> Self {
        let mut pic = Self::blank(view.width(), view.height());
        for c in 0..3 {
            let src = view.plane(c);
            for y in 0..pic.h {
                let sy = y.min(view.height() - 1);
                for x in 0..pic.w {
                    let sx = x.min(view.width() - 1);
                    pic.planes[c][y * pic.w + x] = src[sy * view.width() + sx];
                }
            }
        }
        pic
    }

    pub fn to_view(&self, width: usize, height: usize) -> View {
        let mut planes: [Vec<u8>; 3] = Default::default();
        for (c, plane) in planes.iter_mut().enumerate() {
            plane.reserve_exact(width * height);
            for y in 0..height {
                plane.extend_from_slice(&self.planes[c][y * self.w..y * self.w + width]);
            }
        }
        View::from_planes(width, height, planes).expect("cropped planes match")
    }

    /// Sample with coordinates clamped to the picture.
    #[inline]
    pub fn at(&self, c: usize, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.planes[c][y * self.w + x]
    }
}
