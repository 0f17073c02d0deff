//! Concrete bitvector values of arbitrary width, little-endian 64-bit limbs.

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BvVal {
    pub width: u32,
    words: Vec<u64>,
}

impl BvVal {
    pub fn zero(width: u32) -> Self {
        BvVal {
            width,
            words: vec![0; Self::limbs(width)],
        }
    }

    pub fn from_u64(width: u32, v: u64) -> Self {
        let mut out = Self::zero(width);
        if !out.words.is_empty() {
            out.words[0] = v;
        }
        out.mask();
        out
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let width = bits.len() as u32;
        let mut out = Self::zero(width);
        for (i, &b) in bits.iter().enumerate() {
            if b {
                out.words[i / 64] |= 1u64 << (i % 64);
            }
        }
        out
    }

    /// Parses a decimal digit string into a value of the given width.
    pub fn from_decimal(width: u32, digits: &str) -> Option<Self> {
        let mut out = Self::zero(width);
        for c in digits.chars() {
            let d = c.to_digit(10)? as u64;
            // out = out * 10 + d, modulo 2^width
            let mut carry = d;
            for w in out.words.iter_mut() {
                let prod = (*w as u128) * 10 + carry as u128;
                *w = prod as u64;
                carry = (prod >> 64) as u64;
            }
            out.mask();
        }
        Some(out)
    }

    /// Parses `#x...` / `#b...` content (without the prefix).
    pub fn from_hex(hex: &str) -> Option<Self> {
        let width = (hex.len() * 4) as u32;
        let mut out = Self::zero(width);
        for (i, c) in hex.chars().rev().enumerate() {
            let d = c.to_digit(16)? as u64;
            out.words[i / 16] |= d << ((i % 16) * 4);
        }
        Some(out)
    }

    pub fn from_bin(bin: &str) -> Option<Self> {
        let width = bin.len() as u32;
        let mut out = Self::zero(width);
        for (i, c) in bin.chars().rev().enumerate() {
            match c {
                '0' => {}
                '1' => out.words[i / 64] |= 1u64 << (i % 64),
                _ => return None,
            }
        }
        Some(out)
    }

    pub fn bit(&self, i: u32) -> bool {
        debug_assert!(i < self.width);
        (self.words[(i / 64) as usize] >> (i % 64)) & 1 == 1
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.width).map(|i| self.bit(i)).collect()
    }

    pub fn to_hex(&self) -> String {
        let digits = self.width.div_ceil(4) as usize;
        let mut s = String::with_capacity(digits);
        for i in (0..digits).rev() {
            let word = self.words.get(i / 16).copied().unwrap_or(0);
            let nibble = (word >> ((i % 16) * 4)) & 0xf;
            s.push(char::from_digit(nibble as u32, 16).unwrap());
        }
        s
    }

    fn limbs(width: u32) -> usize {
        (width as usize).div_ceil(64).max(1)
    }

    fn mask(&mut self) {
        let rem = self.width % 64;
        if rem != 0 {
            let last = Self::limbs(self.width) - 1;
            self.words[last] &= (1u64 << rem) - 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_roundtrip() {
        let v = BvVal::from_hex("deadbeef").unwrap();
        assert_eq!(v.width, 32);
        assert_eq!(v.to_hex(), "deadbeef");
        assert!(v.bit(0));
        assert!(!v.bit(4));
    }

    #[test]
    fn decimal_parse() {
        let v = BvVal::from_decimal(64, "18446744073709551615").unwrap();
        assert_eq!(v, BvVal::from_u64(64, u64::MAX));
    }
}
