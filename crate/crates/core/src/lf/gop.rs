use alloc::vec::Vec;

use super::LfError;

/// Highest temporal level produced by a GOP of 16.
pub const MAX_TEMPORAL_LEVEL: u8 = 4;

/// Temporal level of `poc` in a dyadic hierarchical GOP.
///
/// GOP boundaries are level 0; otherwise the level is
/// `log2(gop_size) - v2(poc mod gop_size)`.
pub fn temporal_level(poc: usize, gop_size: usize) -> Result<u8, LfError> {
    if gop_size == 0 || !gop_size.is_power_of_two() {
        return Err(LfError::InvalidGop(gop_size));
    }
    let r = poc % gop_size;
    if r == 0 {
        return Ok(0);
    }
    Ok((gop_size.trailing_zeros() - r.trailing_zeros()) as u8)
}

/// Lower-level neighbours a frame predicts from: the nearest preceding and
/// following frames whose temporal level is strictly lower. The following
/// reference is absent past the end of the sequence.
pub fn references(poc: usize, gop_size: usize, n_frames: usize) -> Result<(Option<usize>, Option<usize>), LfError> {
    let level = temporal_level(poc, gop_size)?;
    if level == 0 {
        return Ok((None, None));
    }
    let step = 1usize << (poc % gop_size).trailing_zeros();
    let next = poc + step;
    Ok((Some(poc - step), (next < n_frames).then_some(next)))
}

/// Coding order: POC 0, then per GOP the frames of each level in turn.
pub fn coding_order(n_frames: usize, gop_size: usize) -> Result<Vec<usize>, LfError> {
    if gop_size == 0 || !gop_size.is_power_of_two() {
        return Err(LfError::InvalidGop(gop_size));
    }
    let mut order = Vec::with_capacity(n_frames);
    if n_frames == 0 {
        return Ok(order);
    }
    order.push(0);
    let mut start = 0;
    while start + 1 < n_frames {
        let end = (start + gop_size).min(n_frames - 1);
        let mut gop: Vec<(u8, usize)> = (start + 1..=end)
            .map(|p| (temporal_level(p, gop_size).unwrap_or(0), p))
            .collect();
        gop.sort_unstable();
        order.extend(gop.into_iter().map(|(_, p)| p));
        start += gop_size;
    }
    Ok(order)
}

/// Temporal-level layout of a pseudo-sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GopLayout {
    pub gop_size: usize,
    pub n_frames: usize,
}

impl GopLayout {
    pub fn new(gop_size: usize, n_frames: usize) -> Result<Self, LfError> {
        temporal_level(0, gop_size)?;
        Ok(Self { gop_size, n_frames })
    }

    pub fn level(&self, poc: usize) -> u8 {
        temporal_level(poc, self.gop_size).unwrap_or(0)
    }

    pub fn max_level(&self) -> u8 {
        self.gop_size.trailing_zeros() as u8
    }

    pub fn references(&self, poc: usize) -> (Option<usize>, Option<usize>) {
        references(poc, self.gop_size, self.n_frames).unwrap_or((None, None))
    }

    pub fn coding_order(&self) -> Vec<usize> {
        coding_order(self.n_frames, self.gop_size).unwrap_or_default()
    }

    /// Index of the GOP a frame belongs to; GOP `g` spans `(g·G, (g+1)·G]`,
    /// with POC 0 assigned to GOP 0.
    pub fn gop_index(&self, poc: usize) -> usize {
        if poc == 0 {
            0
        } else {
            (poc - 1) / self.gop_size
        }
    }

    pub fn gop_count(&self) -> usize {
        if self.n_frames <= 1 {
            1
        } else {
            (self.n_frames - 2) / self.gop_size + 1
        }
    }

    /// POCs of GOP `g` at temporal level `level`, ascending.
    pub fn pocs_at_level(&self, g: usize, level: u8) -> Vec<usize> {
        let start = g * self.gop_size;
        let end = (start + self.gop_size).min(self.n_frames.saturating_sub(1));
        let first = if g == 0 { 0 } else { start + 1 };
        (first..=end).filter(|&p| p < self.n_frames && self.level(p) == level).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn levels_of_gop16() {
        assert_eq!(temporal_level(0, 16), Ok(0));
        assert_eq!(temporal_level(8, 16), Ok(1));
        assert_eq!(temporal_level(6, 16), Ok(3));
        assert_eq!(temporal_level(4, 16), Ok(2));
        assert_eq!(temporal_level(16, 16), Ok(0));
        for odd in (1..16).step_by(2) {
            assert_eq!(temporal_level(odd, 16), Ok(4));
        }
    }

    #[test]
    fn non_power_of_two() {
        assert_eq!(temporal_level(3, 12), Err(LfError::InvalidGop(12)));
        assert_eq!(temporal_level(3, 0), Err(LfError::InvalidGop(0)));
    }

    #[test]
    fn reference_arrows() {
        assert_eq!(references(8, 16, 64), Ok((Some(0), Some(16))));
        assert_eq!(references(6, 16, 64), Ok((Some(4), Some(8))));
        assert_eq!(references(5, 16, 64), Ok((Some(4), Some(6))));
        assert_eq!(references(16, 16, 64), Ok((None, None)));
        // last, incomplete GOP
        assert_eq!(references(56, 16, 64), Ok((Some(48), None)));
        assert_eq!(references(63, 16, 64), Ok((Some(62), None)));
    }

    #[test]
    fn coding_order_gop16() {
        let order = coding_order(17, 16).unwrap();
        assert_eq!(order, vec![0, 16, 8, 4, 12, 2, 6, 10, 14, 1, 3, 5, 7, 9, 11, 13, 15]);
    }

    #[test]
    fn references_precede_in_coding_order() {
        for n in [1, 2, 5, 17, 33, 64] {
            let order = coding_order(n, 16).unwrap();
            assert_eq!(order.len(), n);
            let mut pos = vec![0; n];
            for (i, &p) in order.iter().enumerate() {
                pos[p] = i;
            }
            for p in 0..n {
                let level = temporal_level(p, 16).unwrap();
                let (a, b) = references(p, 16, n).unwrap();
                for r in [a, b].into_iter().flatten() {
                    assert!(pos[r] < pos[p]);
                    assert!(temporal_level(r, 16).unwrap() < level);
                }
            }
        }
    }

    #[test]
    fn layout_groups() {
        let layout = GopLayout::new(16, 64).unwrap();
        assert_eq!(layout.gop_count(), 4);
        assert_eq!(layout.pocs_at_level(0, 4), vec![1, 3, 5, 7, 9, 11, 13, 15]);
        assert_eq!(layout.pocs_at_level(0, 0), vec![0, 16]);
        assert_eq!(layout.pocs_at_level(3, 3), vec![50, 54, 58, 62]);
        assert_eq!(layout.pocs_at_level(3, 0), Vec::<usize>::new());
    }
}
