//! Integer 8×8 DCT approximation and the QP quantiser.

/// Scaled DCT-II basis; rows have squared norm close to 2^15 / 8 · 8.
const T8: [[i64; 8]; 8] = [
    [64, 64, 64, 64, 64, 64, 64, 64],
    [89, 75, 50, 18, -18, -50, -75, -89],
    [83, 36, -36, -83, -83, -36, 36, 83],
    [75, -18, -89, -50, 50, 89, 18, -75],
    [64, -64, -64, 64, 64, -64, -64, 64],
    [50, -89, 18, 75, -75, -18, 89, -50],
    [36, -83, 83, -36, -36, 83, -83, 36],
    [18, -50, 75, -89, 89, -75, 50, -18],
];

const SHIFT: u32 = 15;
const ROUND: i64 = 1 << (SHIFT - 1);

/// Coefficients at orthonormal scale: `(T·X·Tᵀ + 2^14) >> 15`.
pub fn forward(block: &[i32; 64]) -> [i32; 64] {
    let mut tmp = [0i64; 64];
    for u in 0..8 {
        for x in 0..8 {
            let mut acc = 0;
            for y in 0..8 {
                acc += T8[u][y] * block[y * 8 + x] as i64;
            }
            tmp[u * 8 + x] = acc;
        }
    }
    let mut out = [0i32; 64];
    for u in 0..8 {
        for v in 0..8 {
            let mut acc = 0;
            for x in 0..8 {
                acc += tmp[u * 8 + x] * T8[v][x];
            }
            out[u * 8 + v] = ((acc + ROUND) >> SHIFT) as i32;
        }
    }
    out
}

/// `(Tᵀ·C·T + 2^14) >> 15`.
pub fn inverse(coeffs: &[i32; 64]) -> [i32; 64] {
    let mut tmp = [0i64; 64];
    for y in 0..8 {
        for v in 0..8 {
            let mut acc = 0;
            for u in 0..8 {
                acc += T8[u][y] * coeffs[u * 8 + v] as i64;
            }
            tmp[y * 8 + v] = acc;
        }
    }
    let mut out = [0i32; 64];
    for y in 0..8 {
        for x in 0..8 {
            let mut acc = 0;
            for v in 0..8 {
                acc += tmp[y * 8 + v] * T8[v][x];
            }
            out[y * 8 + x] = ((acc + ROUND) >> SHIFT) as i32;
        }
    }
    out
}

pub const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6, 7, 14, 21,
    28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61,
    54, 47, 55, 62, 63,
];

const LEVEL_SCALE: [i64; 6] = [40, 45, 51, 57, 64, 72];

/// Quantiser step in 1/64 units: `64 · 2^((qp-4)/6)`, rounded to the
/// HEVC level-scale table.
#[inline]
pub fn qstep_q6(qp: u8) -> i64 {
    LEVEL_SCALE[qp as usize % 6] << (qp / 6)
}

/// Dead-zone uniform quantiser; `intra` selects a rounding offset of 1/3,
/// otherwise 1/6.
#[inline]
pub fn quantize(c: i32, qp: u8, intra: bool) -> i32 {
    let qs = qstep_q6(qp);
    let offset = if intra { qs / 3 } else { qs / 6 };
    let level = ((c.unsigned_abs() as i64) * 64 + offset) / qs;
    if c < 0 {
        -(level as i32)
    } else {
        level as i32
    }
}

#[inline]
pub fn dequantize(level: i32, qp: u8) -> i32 {
    let mag = (level.unsigned_abs() as i64 * qstep_q6(qp) + 32) >> 6;
    if level < 0 {
        -(mag as i32)
    } else {
        mag as i32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zigzag_is_permutation() {
        let mut seen = [false; 64];
        for &i in &ZIGZAG {
            assert!(!seen[i]);
            seen[i] = true;
        }
    }

    #[test]
    fn dc_of_flat_block() {
        let block = [10i32; 64];
        let c = forward(&block);
        assert_eq!(c[0], 80);
        assert!(c[1..].iter().all(|&v| v == 0));
        assert_eq!(inverse(&c), block);
    }

    #[test]
    fn qstep_table_matches_law() {
        assert_eq!(qstep_q6(4), 64);
        assert_eq!(qstep_q6(10), 128);
        assert_eq!(qstep_q6(28), 1024);
        for qp in 0..=51u8 {
            let exact = 64.0 * libm::pow(2.0, (qp as f64 - 4.0) / 6.0);
            assert!((qstep_q6(qp) as f64 - exact).abs() / exact < 0.01, "qp {qp}");
        }
    }

    proptest! {
        #[test]
        fn transform_round_trip_near_exact(vals in proptest::collection::vec(-255i32..=255, 64)) {
            let mut block = [0i32; 64];
            block.copy_from_slice(&vals);
            let back = inverse(&forward(&block));
            for (a, b) in back.iter().zip(block.iter()) {
                prop_assert!((a - b).abs() <= 2);
            }
        }

        #[test]
        fn quantizer_error_bounded(c in -4000i32..4000, qp in 0u8..=51) {
            let r = dequantize(quantize(c, qp, false), qp);
            let step = qstep_q6(qp) as f64 / 64.0;
            prop_assert!(((r - c) as f64).abs() <= step + 1.0);
        }
    }
}
