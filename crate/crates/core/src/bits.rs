//! Fixed-length bit strings.
//!
//! Bits are packed MSB-first within each byte and trailing pad bits are kept
//! at zero, so equality and hashing work on the packed form directly. The
//! same packing is what gets hashed and hex-encoded, which keeps file formats
//! and oracle inputs byte-identical across implementations.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            bytes: vec![0; len.div_ceil(8)],
            len,
        }
    }

    /// Build from a slice of 0/1 values, most significant first.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut out = BitString::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            debug_assert!(b <= 1);
            if b == 1 {
                out.set_bit(i);
            }
        }
        out
    }

    /// The `len` low-order bits of `value`, most significant first, so that
    /// numeric order on `value` equals lexicographic order on the string.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64, "bit length {len} exceeds 64");
        assert!(
            len == 64 || value >> len == 0,
            "value {value} does not fit in {len} bits"
        );
        let mut out = BitString::zeros(len);
        for i in 0..len {
            if (value >> (len - 1 - i)) & 1 == 1 {
                out.set_bit(i);
            }
        }
        out
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Self {
        let mut bytes = vec![0u8; len.div_ceil(8)];
        rng.fill_bytes(&mut bytes);
        let mut out = BitString { bytes, len };
        out.mask_tail();
        out
    }

    /// The first `len` bits of a byte slice (e.g. a hash digest).
    pub fn from_byte_prefix(bytes: &[u8], len: usize) -> Self {
        assert!(len <= bytes.len() * 8, "not enough bytes for {len} bits");
        let mut out = BitString {
            bytes: bytes[..len.div_ceil(8)].to_vec(),
            len,
        };
        out.mask_tail();
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bit at position `idx` (0-based from the most significant end).
    pub fn bit(&self, idx: usize) -> u8 {
        assert!(idx < self.len, "bit index {idx} out of range {}", self.len);
        (self.bytes[idx / 8] >> (7 - idx % 8)) & 1
    }

    pub fn last_bit(&self) -> u8 {
        self.bit(self.len - 1)
    }

    pub fn prefix(&self, n: usize) -> BitString {
        assert!(n <= self.len);
        let mut out = BitString {
            bytes: self.bytes[..n.div_ceil(8)].to_vec(),
            len: n,
        };
        out.mask_tail();
        out
    }

    /// Whether this string starts with `target` (compared bit-for-bit).
    pub fn starts_with(&self, target: &BitString) -> bool {
        if target.len > self.len {
            return false;
        }
        let full = target.len / 8;
        if self.bytes[..full] != target.bytes[..full] {
            return false;
        }
        let rem = target.len % 8;
        if rem == 0 {
            return true;
        }
        let mask = 0xffu8 << (8 - rem);
        (self.bytes[full] ^ target.bytes[full]) & mask == 0
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        for i in 0..other.len {
            out.push_bit(other.bit(i));
        }
        out
    }

    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64);
        let mut v = 0u64;
        for i in 0..self.len {
            v = (v << 1) | u64::from(self.bit(i));
        }
        v
    }

    /// Packed bytes, MSB-first bit order, zero-padded to whole bytes.
    pub fn packed_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    pub fn from_hex(s: &str, len: usize) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::Encoding(format!("bad hex: {e}")))?;
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Encoding(format!(
                "hex encodes {} bytes but {len} bits need {}",
                bytes.len(),
                len.div_ceil(8)
            )));
        }
        let out = BitString { bytes, len };
        let mut masked = out.clone();
        masked.mask_tail();
        if masked.bytes != out.bytes {
            return Err(Error::Encoding("nonzero padding bits".into()));
        }
        Ok(out)
    }

    fn push_bit(&mut self, b: u8) {
        if self.len % 8 == 0 {
            self.bytes.push(0);
        }
        self.len += 1;
        if b == 1 {
            self.set_bit(self.len - 1);
        }
    }

    fn set_bit(&mut self, idx: usize) {
        self.bytes[idx / 8] |= 1 << (7 - idx % 8);
    }

    fn mask_tail(&mut self) {
        let rem = self.len % 8;
        if rem != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= 0xffu8 << (8 - rem);
            }
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            write!(f, "{}", self.bit(i))?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn msb_first_numeric_order() {
        let b = BitString::from_u64(0b1011, 4);
        assert_eq!(b.to_string(), "1011");
        assert_eq!(b.bit(0), 1);
        assert_eq!(b.last_bit(), 1);
        assert_eq!(b.to_u64(), 0b1011);
        assert_eq!(b.packed_bytes(), &[0b1011_0000]);
    }

    #[test]
    fn concat_lengths_add() {
        let a = BitString::from_u64(0b101, 3);
        let b = BitString::from_u64(0b11001, 5);
        let c = a.concat(&b);
        assert_eq!(c.len(), 8);
        assert_eq!(c.to_string(), "10111001");
    }

    #[test]
    fn prefix_and_starts_with() {
        let d = BitString::from_u64(0b1100_1010_1, 9);
        let p = d.prefix(5);
        assert_eq!(p.to_string(), "11001");
        assert!(d.starts_with(&p));
        assert!(!d.starts_with(&BitString::from_u64(0b11000, 5)));
    }

    #[test]
    fn hex_rejects_bad_padding() {
        // 4 bits packed as 0x1f would leave nonzero pad bits.
        assert!(BitString::from_hex("1f", 4).is_err());
        assert!(BitString::from_hex("10", 4).is_ok());
    }

    #[test]
    fn random_is_reproducible() {
        let mut r1 = ChaCha12Rng::seed_from_u64(7);
        let mut r2 = ChaCha12Rng::seed_from_u64(7);
        assert_eq!(BitString::random(&mut r1, 13), BitString::random(&mut r2, 13));
    }

    proptest! {
        #[test]
        fn hex_round_trip(v in any::<u64>(), len in 1usize..=64) {
            let v = if len == 64 { v } else { v & ((1u64 << len) - 1) };
            let b = BitString::from_u64(v, len);
            let back = BitString::from_hex(&b.to_hex(), len).unwrap();
            prop_assert_eq!(&back, &b);
            prop_assert_eq!(back.to_u64(), v);
        }

        #[test]
        fn concat_matches_bits(a in any::<u32>(), la in 1usize..=32, b in any::<u32>(), lb in 1usize..=32) {
            let a = u64::from(a) & ((1u64 << la) - 1);
            let b = u64::from(b) & ((1u64 << lb) - 1);
            let joined = BitString::from_u64(a, la).concat(&BitString::from_u64(b, lb));
            prop_assert_eq!(joined.len(), la + lb);
            prop_assert_eq!(joined.to_u64(), (a << lb) | b);
        }
    }
}
