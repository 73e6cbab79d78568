//! MSB-first bit packing.

/// Appends bits most-significant first.
#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u8,
    filled: u8,
    bit_len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes the low `n` bits of `value`, high bit first.
    pub fn write(&mut self, value: u32, n: u8) {
        debug_assert!(n <= 32);
        for i in (0..n).rev() {
            self.acc = (self.acc << 1) | ((value >> i) & 1) as u8;
            self.filled += 1;
            if self.filled == 8 {
                self.bytes.push(self.acc);
                self.acc = 0;
                self.filled = 0;
            }
        }
        self.bit_len += n as u64;
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    /// Pads the final byte with zero bits.
    pub fn finish(mut self) -> (Vec<u8>, u64) {
        if self.filled > 0 {
            self.bytes.push(self.acc << (8 - self.filled));
        }
        (self.bytes, self.bit_len)
    }
}

/// Reads bits most-significant first, stopping at a fixed bit count.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    data: &'a [u8],
    pos: u64,
    limit: u64,
}

impl<'a> BitReader<'a> {
    /// `limit` is the number of meaningful bits in `data`.
    pub fn new(data: &'a [u8], limit: u64) -> Self {
        debug_assert!(limit <= data.len() as u64 * 8);
        BitReader {
            data,
            pos: 0,
            limit,
        }
    }

    #[inline]
    pub fn read_bit(&mut self) -> Option<bool> {
        if self.pos >= self.limit {
            return None;
        }
        let byte = self.data[(self.pos / 8) as usize];
        let bit = (byte >> (7 - (self.pos % 8))) & 1;
        self.pos += 1;
        Some(bit == 1)
    }

    pub fn read(&mut self, n: u8) -> Option<u32> {
        let mut v = 0u32;
        for _ in 0..n {
            v = (v << 1) | self.read_bit()? as u32;
        }
        Some(v)
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.limit - self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msb_first_layout() {
        let mut w = BitWriter::new();
        w.write(0b1, 1);
        w.write(0b01, 2);
        w.write(0b1_1110_0001, 9);
        let (bytes, bits) = w.finish();
        assert_eq!(bits, 12);
        assert_eq!(bytes, vec![0b1011_1110, 0b0001_0000]);

        let mut r = BitReader::new(&bytes, bits);
        assert_eq!(r.read(1), Some(1));
        assert_eq!(r.read(2), Some(1));
        assert_eq!(r.read(9), Some(0b1_1110_0001));
        assert_eq!(r.read_bit(), None);
        assert_eq!(r.remaining(), 0);
    }
}
