//! Big-endian bit packing.

pub(crate) struct BitWriter {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl BitWriter {
    pub(crate) fn with_capacity(bits: usize) -> Self {
        Self { bytes: Vec::with_capacity(bits.div_ceil(8)), bit_len: 0 }
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub(crate) fn put(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        debug_assert!(width == 64 || value >> width == 0);
        for i in (0..width).rev() {
            let bit = (value >> i) & 1;
            if self.bit_len.is_multiple_of(8) {
                self.bytes.push(0);
            }
            if bit == 1 {
                let last = self.bytes.last_mut().expect("pushed above");
                *last |= 0x80 >> (self.bit_len % 8);
            }
            self.bit_len += 1;
        }
    }

    pub(crate) fn put_bytes(&mut self, bytes: &[u8]) {
        if self.bit_len.is_multiple_of(8) {
            self.bytes.extend_from_slice(bytes);
            self.bit_len += bytes.len() * 8;
        } else {
            for &b in bytes {
                self.put(u64::from(b), 8);
            }
        }
    }

    pub(crate) fn bit_len(&self) -> usize {
        self.bit_len
    }

    /// Trailing bits of the last byte stay zero.
    pub(crate) fn finish(self) -> Vec<u8> {
        self.bytes
    }
}

pub(crate) struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() * 8 - self.pos
    }

    /// Returns `None` if fewer than `width` bits remain.
    pub(crate) fn take(&mut self, width: u32) -> Option<u64> {
        if self.remaining() < width as usize {
            return None;
        }
        let mut v = 0u64;
        for _ in 0..width {
            let byte = self.bytes[self.pos / 8];
            let bit = (byte >> (7 - self.pos % 8)) & 1;
            v = (v << 1) | u64::from(bit);
            self.pos += 1;
        }
        Some(v)
    }

    pub(crate) fn take_block(&mut self) -> Option<[u8; 32]> {
        if self.remaining() < 256 {
            return None;
        }
        let mut out = [0u8; 32];
        if self.pos.is_multiple_of(8) {
            let start = self.pos / 8;
            out.copy_from_slice(&self.bytes[start..start + 32]);
            self.pos += 256;
        } else {
            for b in &mut out {
                *b = self.take(8)? as u8;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nibbles_pack_msb_first() {
        let mut w = BitWriter::with_capacity(12);
        w.put(0x1, 4);
        w.put(0xab, 8);
        assert_eq!(w.bit_len(), 12);
        assert_eq!(w.finish(), vec![0x1a, 0xb0]);
    }

    #[test]
    fn unaligned_block_round_trip() {
        let block: [u8; 32] = std::array::from_fn(|i| i as u8 * 7);
        let mut w = BitWriter::with_capacity(260);
        w.put(0x9, 4);
        w.put_bytes(&block);
        let bytes = w.finish();
        assert_eq!(bytes.len(), 33);
        let mut r = BitReader::new(&bytes);
        assert_eq!(r.take(4), Some(0x9));
        assert_eq!(r.take_block(), Some(block));
        assert_eq!(r.remaining(), 4);
        assert_eq!(r.take(8), None);
    }
}
