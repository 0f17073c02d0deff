//! 256-bit word arithmetic with EVM semantics: wrapping everywhere,
//! division/modulo by zero yield zero, signed ops are two's complement.

use primitive_types::{H160, H256, U256, U512};
use tiny_keccak::{Hasher, Keccak};

pub type Word = U256;
pub type Address = H160;

pub const WORD_ZERO: U256 = U256::zero();

pub fn bool_word(b: bool) -> U256 {
    if b {
        U256::one()
    } else {
        U256::zero()
    }
}

pub fn is_truthy(w: U256) -> bool {
    !w.is_zero()
}

pub fn add(a: U256, b: U256) -> U256 {
    a.overflowing_add(b).0
}

pub fn sub(a: U256, b: U256) -> U256 {
    a.overflowing_sub(b).0
}

pub fn mul(a: U256, b: U256) -> U256 {
    a.overflowing_mul(b).0
}

pub fn div(a: U256, b: U256) -> U256 {
    if b.is_zero() {
        U256::zero()
    } else {
        a / b
    }
}

pub fn rem(a: U256, b: U256) -> U256 {
    if b.is_zero() {
        U256::zero()
    } else {
        a % b
    }
}

fn is_neg(a: U256) -> bool {
    a.bit(255)
}

pub fn neg(a: U256) -> U256 {
    (!a).overflowing_add(U256::one()).0
}

fn abs(a: U256) -> U256 {
    if is_neg(a) {
        neg(a)
    } else {
        a
    }
}

pub fn sdiv(a: U256, b: U256) -> U256 {
    if b.is_zero() {
        return U256::zero();
    }
    let q = abs(a) / abs(b);
    if is_neg(a) != is_neg(b) {
        neg(q)
    } else {
        q
    }
}

pub fn smod(a: U256, b: U256) -> U256 {
    if b.is_zero() {
        return U256::zero();
    }
    let r = abs(a) % abs(b);
    if is_neg(a) {
        neg(r)
    } else {
        r
    }
}

pub fn addmod(a: U256, b: U256, n: U256) -> U256 {
    if n.is_zero() {
        return U256::zero();
    }
    let wide = U512::from(a) + U512::from(b);
    u512_low(wide % U512::from(n))
}

pub fn mulmod(a: U256, b: U256, n: U256) -> U256 {
    if n.is_zero() {
        return U256::zero();
    }
    let wide = U512::from(a) * U512::from(b);
    u512_low(wide % U512::from(n))
}

fn u512_low(w: U512) -> U256 {
    let bytes = w.to_big_endian();
    U256::from_big_endian(&bytes[32..])
}

pub fn exp(base: U256, exponent: U256) -> U256 {
    base.overflowing_pow(exponent).0
}

pub fn lt(a: U256, b: U256) -> U256 {
    bool_word(a < b)
}

pub fn gt(a: U256, b: U256) -> U256 {
    bool_word(a > b)
}

pub fn slt(a: U256, b: U256) -> U256 {
    bool_word(match (is_neg(a), is_neg(b)) {
        (true, false) => true,
        (false, true) => false,
        _ => a < b,
    })
}

pub fn sgt(a: U256, b: U256) -> U256 {
    slt(b, a)
}

pub fn eq(a: U256, b: U256) -> U256 {
    bool_word(a == b)
}

pub fn iszero(a: U256) -> U256 {
    bool_word(a.is_zero())
}

/// BYTE opcode: byte `i` of `x`, counting from the most significant.
pub fn byte(i: U256, x: U256) -> U256 {
    if i >= U256::from(32) {
        return U256::zero();
    }
    let i = i.as_u64() as usize;
    let bytes = x.to_big_endian();
    U256::from(bytes[i])
}

/// SIGNEXTEND opcode: extend the sign of the (k+1)-byte value in `x`.
pub fn signextend(k: U256, x: U256) -> U256 {
    if k >= U256::from(31) {
        return x;
    }
    let bit_index = k.as_u64() as usize * 8 + 7;
    let mask = (U256::one() << (bit_index + 1)) - U256::one();
    if x.bit(bit_index) {
        x | !mask
    } else {
        x & mask
    }
}

pub fn shl(shift: U256, x: U256) -> U256 {
    if shift >= U256::from(256) {
        U256::zero()
    } else {
        x << shift.as_u64() as usize
    }
}

pub fn shr(shift: U256, x: U256) -> U256 {
    if shift >= U256::from(256) {
        U256::zero()
    } else {
        x >> shift.as_u64() as usize
    }
}

pub fn keccak(data: &[u8]) -> H256 {
    let mut hasher = Keccak::v256();
    hasher.update(data);
    let mut out = [0u8; 32];
    hasher.finalize(&mut out);
    H256(out)
}

pub fn keccak_word(data: &[u8]) -> U256 {
    U256::from_big_endian(keccak(data).as_bytes())
}

/// Masks a word down to the low 160 bits used for addresses.
pub fn to_address(w: U256) -> Address {
    let bytes = w.to_big_endian();
    Address::from_slice(&bytes[12..])
}

pub fn address_word(a: Address) -> U256 {
    U256::from_big_endian(a.as_bytes())
}

/// True iff the word fits in 160 bits, i.e. survives an address round-trip.
pub fn fits_address(w: U256) -> bool {
    address_word(to_address(w)) == w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: i64) -> U256 {
        if v < 0 {
            neg(U256::from(-v as u64))
        } else {
            U256::from(v as u64)
        }
    }

    #[test]
    fn signed_division_truncates() {
        assert_eq!(sdiv(w(7), w(-2)), w(-3));
        assert_eq!(sdiv(w(-7), w(2)), w(-3));
        assert_eq!(sdiv(w(-7), w(-2)), w(3));
        assert_eq!(sdiv(w(7), w(0)), w(0));
        // MIN / -1 wraps back to MIN.
        let min = U256::one() << 255;
        assert_eq!(sdiv(min, w(-1)), min);
    }

    #[test]
    fn signed_modulo_follows_dividend() {
        assert_eq!(smod(w(7), w(3)), w(1));
        assert_eq!(smod(w(-7), w(3)), w(-1));
        assert_eq!(smod(w(7), w(-3)), w(1));
        assert_eq!(smod(w(-7), w(0)), w(0));
    }

    #[test]
    fn modular_wide_ops() {
        let max = U256::MAX;
        assert_eq!(addmod(max, max, U256::from(10)), U256::from(0));
        assert_eq!(mulmod(max, max, U256::from(7)), (max % 7) * (max % 7) % 7);
        assert_eq!(addmod(w(5), w(4), w(0)), w(0));
    }

    #[test]
    fn byte_and_signextend() {
        let x = U256::from_big_endian(&{
            let mut b = [0u8; 32];
            b[0] = 0xaa;
            b[31] = 0xbb;
            b
        });
        assert_eq!(byte(U256::zero(), x), U256::from(0xaa));
        assert_eq!(byte(U256::from(31), x), U256::from(0xbb));
        assert_eq!(byte(U256::from(32), x), U256::zero());

        assert_eq!(signextend(U256::zero(), U256::from(0x80)), neg(U256::from(0x80)));
        assert_eq!(signextend(U256::zero(), U256::from(0x7f)), U256::from(0x7f));
        assert_eq!(signextend(U256::from(31), U256::MAX), U256::MAX);
    }

    #[test]
    fn comparisons() {
        assert_eq!(slt(w(-1), w(1)), U256::one());
        assert_eq!(slt(w(1), w(-1)), U256::zero());
        assert_eq!(sgt(w(-1), w(-2)), U256::one());
        assert_eq!(lt(w(1), w(2)), U256::one());
        assert_eq!(gt(w(1), w(2)), U256::zero());
    }

    #[test]
    fn address_masking() {
        let w = U256::MAX;
        let a = to_address(w);
        assert_eq!(a, Address::from_slice(&[0xff; 20]));
        assert!(!fits_address(w));
        assert!(fits_address(address_word(a)));
    }

    #[test]
    fn keccak_known_vector() {
        // keccak256 of empty input.
        assert_eq!(
            hex::encode(keccak(b"")),
            "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
        );
    }
}
