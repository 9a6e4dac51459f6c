//! Packed binary codes in the Hamming space {-1,+1}^n.
//!
//! Bit `i` holds +1 as `1` and -1 as `0`. Bits are packed most significant
//! first: bit 0 is the top bit of the first word (and of the first byte and
//! hex digit in serialized forms).

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Bitcode {
    len: usize,
    words: Vec<u64>,
}

impl Bitcode {
    /// All bits -1.
    pub fn zeros(len: usize) -> Self {
        Bitcode {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut c = Bitcode::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            c.set(i, b);
        }
        c
    }

    /// From a sequence over {-1,+1}; any non-negative entry counts as +1.
    pub fn from_signs(signs: &[i8]) -> Self {
        let bits: Vec<bool> = signs.iter().map(|&s| s >= 0).collect();
        Bitcode::from_bools(&bits)
    }

    /// A code of at most 64 bits given as an integer whose most significant
    /// `len` bits (of the low `len`) hold bits 0..len.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64 && len > 0);
        let v = if len == 64 {
            value
        } else {
            value << (64 - len)
        };
        Bitcode {
            len,
            words: vec![v],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len);
        (self.words[i / 64] >> (63 - i % 64)) & 1 == 1
    }

    pub fn sign(&self, i: usize) -> i8 {
        if self.get(i) {
            1
        } else {
            -1
        }
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len);
        let mask = 1u64 << (63 - i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    /// Bitwise complement within the code length.
    pub fn complement(&self) -> Self {
        let mut c = self.clone();
        for w in &mut c.words {
            *w = !*w;
        }
        c.clear_tail();
        c
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= !0u64 << (64 - rem);
        }
    }

    /// Number of differing positions, computed as popcount of the XOR.
    pub fn hamming(&self, other: &Bitcode) -> Result<u32> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                left: self.len,
                right: other.len,
            });
        }
        Ok(self.hamming_unchecked(other))
    }

    #[inline]
    pub(crate) fn hamming_unchecked(&self, other: &Bitcode) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// Bits `[start, start + width)` as an unsigned integer, bit `start` most
    /// significant. `width` must not exceed 64.
    pub fn bit_range(&self, start: usize, width: usize) -> u64 {
        assert!(width <= 64 && start + width <= self.len);
        let mut v = 0u64;
        let mut i = start;
        let end = start + width;
        while i < end {
            let word = self.words[i / 64];
            let off = i % 64;
            let take = (64 - off).min(end - i);
            let chunk = (word << off) >> (64 - take);
            v = if take == 64 {
                chunk
            } else {
                (v << take) | chunk
            };
            i += take;
        }
        v
    }

    /// Big-endian byte serialization, `ceil(len / 8)` bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8);
        self.words
            .iter()
            .flat_map(|w| w.to_be_bytes())
            .take(nbytes)
            .collect()
    }

    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::LengthMismatch {
                left: bytes.len() * 8,
                right: len,
            });
        }
        let mut words = vec![0u64; len.div_ceil(64)];
        for (i, &b) in bytes.iter().enumerate() {
            words[i / 8] |= (b as u64) << (56 - 8 * (i % 8));
        }
        let mut c = Bitcode { len, words };
        c.clear_tail();
        Ok(c)
    }

    /// Uppercase hexadecimal, one digit per four bits, bit 0 first.
    pub fn to_hex(&self) -> String {
        let digits = self.len.div_ceil(4);
        let mut s = String::with_capacity(digits);
        for d in 0..digits {
            let start = 4 * d;
            let width = 4.min(self.len - start);
            let nib = (self.bit_range(start, width) << (4 - width)) as u32;
            s.push(char::from_digit(nib, 16).unwrap().to_ascii_uppercase());
        }
        s
    }

    pub fn from_hex(hex: &str, len: usize) -> Result<Self> {
        if hex.len() != len.div_ceil(4) {
            return Err(Error::InvalidParameter(format!(
                "hex code of {} digits cannot hold {len} bits",
                hex.len()
            )));
        }
        let mut c = Bitcode::zeros(len);
        for (d, ch) in hex.chars().enumerate() {
            let nib = ch
                .to_digit(16)
                .ok_or_else(|| Error::InvalidParameter(format!("bad hex digit {ch:?}")))?;
            for b in 0..4 {
                let i = 4 * d + b;
                if i < len {
                    c.set(i, (nib >> (3 - b)) & 1 == 1);
                }
            }
        }
        Ok(c)
    }
}

impl fmt::Debug for Bitcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bitcode({}:{})", self.len, self.to_hex())
    }
}

impl fmt::Display for Bitcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Hamming distance written in its algebraic form
/// `n/2 - 1/2 * sum_i sign(xi_i * xi'_i)`.
pub fn hamming_from_signs(u: &[i8], v: &[i8]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let agree: f64 = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| {
            if (a as i32) * (b as i32) >= 0 {
                1.0
            } else {
                -1.0
            }
        })
        .sum();
    Ok(u.len() as f64 / 2.0 - agree / 2.0)
}

/// Distance between two codes.
pub fn hamming(u: &Bitcode, v: &Bitcode) -> Result<u32> {
    u.hamming(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let u = Bitcode::from_signs(&[1, -1, 1, -1]);
        let v = Bitcode::from_signs(&[-1, -1, 1, 1]);
        assert_eq!(hamming(&u, &v).unwrap(), 2);
        let c = Bitcode::from_u64(0x223E_9DF0_1ADB_3E00, 64);
        assert_eq!(hamming(&c, &c).unwrap(), 0);
        assert_eq!(hamming(&c, &c.complement()).unwrap(), 64);
        assert_eq!(c.to_hex(), "223E9DF01ADB3E00");
        assert!(matches!(
            hamming(&Bitcode::zeros(8), &Bitcode::zeros(9)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn msb_first_layout() {
        let mut c = Bitcode::zeros(12);
        c.set(0, true);
        c.set(11, true);
        assert_eq!(c.to_hex(), "801");
        assert_eq!(c.to_bytes(), vec![0x80, 0x10]);
        assert_eq!(c.bit_range(0, 4), 0b1000);
        assert_eq!(c.bit_range(8, 4), 0b0001);
    }

    #[test]
    fn bands_of_64_bit_code() {
        let c = Bitcode::from_u64(0x1111_2222_3333_4444, 64);
        assert_eq!(c.bit_range(0, 16), 0x1111);
        assert_eq!(c.bit_range(48, 16), 0x4444);
        assert_eq!(c.bit_range(0, 64), 0x1111_2222_3333_4444);
    }

    proptest! {
        #[test]
        fn bytes_and_hex_roundtrip(bits in proptest::collection::vec(any::<bool>(), 1..200)) {
            let c = Bitcode::from_bools(&bits);
            prop_assert_eq!(Bitcode::from_bytes(&c.to_bytes(), bits.len()).unwrap(), c.clone());
            prop_assert_eq!(Bitcode::from_hex(&c.to_hex(), bits.len()).unwrap(), c.clone());
        }

        #[test]
        fn bit_range_matches_gets(bits in proptest::collection::vec(any::<bool>(), 64..160), start in 0usize..60, width in 1usize..=64) {
            prop_assume!(start + width <= bits.len());
            let c = Bitcode::from_bools(&bits);
            let expect = bits[start..start + width].iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
            prop_assert_eq!(c.bit_range(start, width), expect);
        }

        #[test]
        fn algebraic_form_agrees(a in any::<u64>(), b in any::<u64>()) {
            let u = Bitcode::from_u64(a, 64);
            let v = Bitcode::from_u64(b, 64);
            let su: Vec<i8> = (0..64).map(|i| u.sign(i)).collect();
            let sv: Vec<i8> = (0..64).map(|i| v.sign(i)).collect();
            prop_assert_eq!(hamming_from_signs(&su, &sv).unwrap(), hamming(&u, &v).unwrap() as f64);
            prop_assert_eq!(hamming(&u, &v).unwrap(), (a ^ b).count_ones());
        }
    }
}
