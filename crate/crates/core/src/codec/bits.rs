//! MSB-first bit packing with Exp-Golomb codes.

use alloc::vec::Vec;

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    cur: u8,
    used: u8,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn put_bit(&mut self, bit: bool) {
        self.cur = (self.cur << 1) | bit as u8;
        self.used += 1;
        if self.used == 8 {
            self.bytes.push(self.cur);
            self.cur = 0;
            self.used = 0;
        }
    }

    pub fn put_bits(&mut self, value: u32, n: u32) {
        for i in (0..n).rev() {
            self.put_bit((value >> i) & 1 == 1);
        }
    }

    pub fn put_ue(&mut self, v: u32) {
        let x = v as u64 + 1;
        let len = 64 - x.leading_zeros();
        for _ in 0..len - 1 {
            self.put_bit(false);
        }
        for i in (0..len).rev() {
            self.put_bit((x >> i) & 1 == 1);
        }
    }

    pub fn put_se(&mut self, v: i32) {
        self.put_ue(se_to_ue(v));
    }

    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8 + self.used as usize
    }

    /// Pads the final byte with zeros.
    pub fn finish(mut self) -> Vec<u8> {
        if self.used > 0 {
            self.bytes.push(self.cur << (8 - self.used));
        }
        self.bytes
    }
}

#[inline]
fn se_to_ue(v: i32) -> u32 {
    if v > 0 {
        (2 * v as i64 - 1) as u32
    } else {
        (-2 * v as i64) as u32
    }
}

/// Length in bits of `ue(v)`.
#[inline]
pub fn ue_len(v: u32) -> u32 {
    let x = v as u64 + 1;
    2 * (63 - x.leading_zeros()) + 1
}

#[inline]
pub fn se_len(v: i32) -> u32 {
    ue_len(se_to_ue(v))
}

/// Reading past the end of the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exhausted;

pub struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    #[inline]
    pub fn bit(&mut self) -> Result<bool, Exhausted> {
        let byte = *self.data.get(self.pos / 8).ok_or(Exhausted)?;
        let b = (byte >> (7 - self.pos % 8)) & 1 == 1;
        self.pos += 1;
        Ok(b)
    }

    pub fn bits(&mut self, n: u32) -> Result<u32, Exhausted> {
        let mut v = 0;
        for _ in 0..n {
            v = (v << 1) | self.bit()? as u32;
        }
        Ok(v)
    }

    pub fn ue(&mut self) -> Result<u32, Exhausted> {
        let mut zeros = 0;
        while !self.bit()? {
            zeros += 1;
            if zeros > 31 {
                return Err(Exhausted);
            }
        }
        let rest = self.bits(zeros)? as u64;
        Ok(((1u64 << zeros) + rest - 1) as u32)
    }

    pub fn se(&mut self) -> Result<i32, Exhausted> {
        let k = self.ue()? as i64;
        Ok(if k % 2 == 1 { ((k + 1) / 2) as i32 } else { (-(k / 2)) as i32 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ue_codewords() {
        let mut w = BitWriter::new();
        for v in 0..4 {
            w.put_ue(v);
        }
        // 1 010 011 00100
        assert_eq!(w.bit_len(), 1 + 3 + 3 + 5);
        assert_eq!(w.finish(), [0b1010_0110, 0b0100_0000]);
    }

    #[test]
    fn exhausted_reader() {
        let mut r = BitReader::new(&[0x00]);
        assert_eq!(r.ue(), Err(Exhausted));
    }

    proptest! {
        #[test]
        fn exp_golomb_round_trip(values in proptest::collection::vec(-5000i32..5000, 1..64)) {
            let mut w = BitWriter::new();
            let mut expect = 0;
            for &v in &values {
                w.put_se(v);
                w.put_ue(v.unsigned_abs());
                expect += se_len(v) + ue_len(v.unsigned_abs());
            }
            prop_assert_eq!(w.bit_len(), expect as usize);
            let bytes = w.finish();
            let mut r = BitReader::new(&bytes);
            for &v in &values {
                prop_assert_eq!(r.se().unwrap(), v);
                prop_assert_eq!(r.ue().unwrap(), v.unsigned_abs());
            }
        }
    }
}
