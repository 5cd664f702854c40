//! Software IEEE-754 binary128.
//!
//! All arithmetic is correctly rounded (round-to-nearest-even) with full
//! support for signed zeros, subnormals and infinities. NaN results are
//! always the canonical quiet NaN.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::softfloat::{self, normalize, round_pack, shift_right_jam, unpack, Format, Unpacked};

const FMT: Format = Format::F128;
/// Extra low-order bits carried through addition.
const GUARD: u32 = 10;

/// A binary128 value stored as its raw bit pattern.
///
/// `PartialEq`/`PartialOrd` follow IEEE semantics (`-0 == +0`, NaN is
/// unordered). Compare [`F128::to_bits`] for bitwise identity.
#[derive(Clone, Copy, Default)]
pub struct F128(u128);

/// The extended-precision shadow domain for binary64 values.
pub type ExtendedReal = F128;

impl F128 {
    pub const ZERO: F128 = F128(0);
    pub const ONE: F128 = F128(0x3fff_u128 << 112);
    pub const INFINITY: F128 = F128(FMT.infinity(false));
    pub const NEG_INFINITY: F128 = F128(FMT.infinity(true));
    pub const NAN: F128 = F128(FMT.canonical_nan());

    pub const fn from_bits(bits: u128) -> F128 {
        F128(bits)
    }

    pub const fn to_bits(self) -> u128 {
        self.0
    }

    pub fn is_nan(self) -> bool {
        matches!(unpack(FMT, self.0), Unpacked::Nan)
    }

    pub fn is_infinite(self) -> bool {
        matches!(unpack(FMT, self.0), Unpacked::Infinite { .. })
    }

    pub fn is_finite(self) -> bool {
        !self.is_nan() && !self.is_infinite()
    }

    pub fn is_zero(self) -> bool {
        self.0 & !FMT.sign_mask() == 0
    }

    pub fn is_sign_negative(self) -> bool {
        self.0 & FMT.sign_mask() != 0
    }

    pub fn abs(self) -> F128 {
        F128(self.0 & !FMT.sign_mask())
    }

    pub fn from_f64(x: f64) -> F128 {
        F128(softfloat::convert(Format::F64, FMT, x.to_bits() as u128))
    }

    pub fn from_f32(x: f32) -> F128 {
        F128(softfloat::convert(Format::F32, FMT, x.to_bits() as u128))
    }

    pub fn from_i64(x: i64) -> F128 {
        F128(round_pack(FMT, x < 0, x.unsigned_abs() as u128, 0, false))
    }

    /// Rounds to the nearest binary64 (ties to even).
    pub fn to_f64(self) -> f64 {
        f64::from_bits(softfloat::convert(FMT, Format::F64, self.0) as u64)
    }

    /// Rounds directly to the nearest binary32, without a binary64 detour.
    pub fn to_f32(self) -> f32 {
        f32::from_bits(softfloat::convert(FMT, Format::F32, self.0) as u32)
    }

    /// Truncates toward zero, saturating at the `i64` range; NaN maps to 0.
    pub fn to_i64(self) -> i64 {
        match unpack(FMT, self.0) {
            Unpacked::Nan | Unpacked::Zero { .. } => 0,
            Unpacked::Infinite { negative } => {
                if negative {
                    i64::MIN
                } else {
                    i64::MAX
                }
            }
            Unpacked::Finite { negative, significand, exp } => {
                let magnitude = if exp >= 0 {
                    if 128 - significand.leading_zeros() as i32 + exp > 64 {
                        u128::MAX
                    } else {
                        significand << exp
                    }
                } else if exp <= -128 {
                    0
                } else {
                    significand >> (-exp)
                };
                if negative {
                    if magnitude >= 1u128 << 63 {
                        i64::MIN
                    } else {
                        -(magnitude as i64)
                    }
                } else if magnitude >= 1u128 << 63 {
                    i64::MAX
                } else {
                    magnitude as i64
                }
            }
        }
    }

    /// Multiplies by `2^n` with a single rounding.
    pub fn scale_by_pow2(self, n: i32) -> F128 {
        match unpack(FMT, self.0) {
            Unpacked::Finite { negative, significand, exp } => {
                F128(round_pack(FMT, negative, significand, exp.saturating_add(n), false))
            }
            _ => self,
        }
    }

    /// Exponent of the leading significand bit, for finite nonzero values.
    pub fn exponent(self) -> Option<i32> {
        match unpack(FMT, self.0) {
            Unpacked::Finite { significand, exp, .. } => Some(exp + 127 - significand.leading_zeros() as i32),
            _ => None,
        }
    }

    pub fn parse_hex(text: &str) -> Option<F128> {
        softfloat::parse_hex(FMT, text).map(F128)
    }

    pub fn parse_decimal(text: &str) -> Option<F128> {
        softfloat::parse_decimal(FMT, text).map(F128)
    }

    pub fn to_hex(self) -> String {
        softfloat::format_hex(FMT, self.0)
    }

    pub fn to_fixed(self, decimals: u32) -> String {
        softfloat::format_fixed(FMT, self.0, decimals)
    }

    fn add_impl(self, rhs: F128, negate_rhs: bool) -> F128 {
        let a = unpack(FMT, self.0);
        let mut b = unpack(FMT, rhs.0);
        if negate_rhs {
            b = match b {
                Unpacked::Zero { negative } => Unpacked::Zero { negative: !negative },
                Unpacked::Infinite { negative } => Unpacked::Infinite { negative: !negative },
                Unpacked::Finite { negative, significand, exp } => Unpacked::Finite { negative: !negative, significand, exp },
                Unpacked::Nan => Unpacked::Nan,
            };
        }
        match (a, b) {
            (Unpacked::Nan, _) | (_, Unpacked::Nan) => F128::NAN,
            (Unpacked::Infinite { negative: x }, Unpacked::Infinite { negative: y }) => {
                if x == y {
                    F128(FMT.infinity(x))
                } else {
                    F128::NAN
                }
            }
            (Unpacked::Infinite { negative }, _) | (_, Unpacked::Infinite { negative }) => F128(FMT.infinity(negative)),
            (Unpacked::Zero { negative: x }, Unpacked::Zero { negative: y }) => F128(FMT.zero(x && y)),
            (Unpacked::Zero { .. }, Unpacked::Finite { negative, significand, exp })
            | (Unpacked::Finite { negative, significand, exp }, Unpacked::Zero { .. }) => {
                F128(round_pack(FMT, negative, significand, exp, false))
            }
            (
                Unpacked::Finite { negative: na, significand: ma, exp: ea },
                Unpacked::Finite { negative: nb, significand: mb, exp: eb },
            ) => {
                let (ma, ea) = normalize(ma, ea, 112);
                let (mb, eb) = normalize(mb, eb, 112);
                let ((na, ma, ea), (nb, mb, eb)) =
                    if ea >= eb { ((na, ma, ea), (nb, mb, eb)) } else { ((nb, mb, eb), (na, ma, ea)) };
                let big = ma << GUARD;
                let small = shift_right_jam(mb << GUARD, (ea - eb).min(200) as u32);
                let exp = ea - GUARD as i32;
                if na == nb {
                    F128(round_pack(FMT, na, big + small, exp, false))
                } else {
                    match big.cmp(&small) {
                        Ordering::Equal => F128::ZERO,
                        Ordering::Greater => F128(round_pack(FMT, na, big - small, exp, false)),
                        Ordering::Less => F128(round_pack(FMT, nb, small - big, exp, false)),
                    }
                }
            }
        }
    }

    fn mul_impl(self, rhs: F128) -> F128 {
        let a = unpack(FMT, self.0);
        let b = unpack(FMT, rhs.0);
        let negative = self.is_sign_negative() != rhs.is_sign_negative();
        match (a, b) {
            (Unpacked::Nan, _) | (_, Unpacked::Nan) => F128::NAN,
            (Unpacked::Infinite { .. }, Unpacked::Zero { .. }) | (Unpacked::Zero { .. }, Unpacked::Infinite { .. }) => {
                F128::NAN
            }
            (Unpacked::Infinite { .. }, _) | (_, Unpacked::Infinite { .. }) => F128(FMT.infinity(negative)),
            (Unpacked::Zero { .. }, _) | (_, Unpacked::Zero { .. }) => F128(FMT.zero(negative)),
            (
                Unpacked::Finite { significand: ma, exp: ea, .. },
                Unpacked::Finite { significand: mb, exp: eb, .. },
            ) => {
                let (hi, lo) = widening_mul(ma, mb);
                let (m, shift, sticky) = if hi == 0 {
                    (lo, 0, false)
                } else {
                    let s = 128 - hi.leading_zeros();
                    if s == 128 {
                        (hi, 128, lo != 0)
                    } else {
                        let dropped = lo & ((1u128 << s) - 1);
                        ((hi << (128 - s)) | (lo >> s), s as i32, dropped != 0)
                    }
                };
                F128(round_pack(FMT, negative, m, ea + eb + shift, sticky))
            }
        }
    }

    fn div_impl(self, rhs: F128) -> F128 {
        let a = unpack(FMT, self.0);
        let b = unpack(FMT, rhs.0);
        let negative = self.is_sign_negative() != rhs.is_sign_negative();
        match (a, b) {
            (Unpacked::Nan, _) | (_, Unpacked::Nan) => F128::NAN,
            (Unpacked::Infinite { .. }, Unpacked::Infinite { .. }) | (Unpacked::Zero { .. }, Unpacked::Zero { .. }) => {
                F128::NAN
            }
            (Unpacked::Infinite { .. }, _) | (_, Unpacked::Zero { .. }) => F128(FMT.infinity(negative)),
            (Unpacked::Zero { .. }, _) | (_, Unpacked::Infinite { .. }) => F128(FMT.zero(negative)),
            (
                Unpacked::Finite { significand: ma, exp: ea, .. },
                Unpacked::Finite { significand: mb, exp: eb, .. },
            ) => {
                const STEPS: u32 = 116;
                let (ma, ea) = normalize(ma, ea, 112);
                let (mb, eb) = normalize(mb, eb, 112);
                let mut rem = ma;
                let mut q: u128 = 0;
                for _ in 0..STEPS {
                    q <<= 1;
                    if rem >= mb {
                        rem -= mb;
                        q |= 1;
                    }
                    rem <<= 1;
                }
                F128(round_pack(FMT, negative, q, ea - eb - (STEPS as i32 - 1), rem != 0))
            }
        }
    }
}

/// Full 256-bit product of two 128-bit integers as `(high, low)`.
fn widening_mul(a: u128, b: u128) -> (u128, u128) {
    const LO: u128 = u64::MAX as u128;
    let (a1, a0) = (a >> 64, a & LO);
    let (b1, b0) = (b >> 64, b & LO);
    let p00 = a0 * b0;
    let p01 = a0 * b1;
    let p10 = a1 * b0;
    let p11 = a1 * b1;
    let (mid, mid_carry) = p01.overflowing_add(p10);
    let (lo, c) = p00.overflowing_add(mid << 64);
    let hi = p11 + (mid >> 64) + ((mid_carry as u128) << 64) + c as u128;
    (hi, lo)
}

impl Add for F128 {
    type Output = F128;
    fn add(self, rhs: F128) -> F128 {
        self.add_impl(rhs, false)
    }
}

impl Sub for F128 {
    type Output = F128;
    fn sub(self, rhs: F128) -> F128 {
        self.add_impl(rhs, true)
    }
}

impl Mul for F128 {
    type Output = F128;
    fn mul(self, rhs: F128) -> F128 {
        self.mul_impl(rhs)
    }
}

impl Div for F128 {
    type Output = F128;
    fn div(self, rhs: F128) -> F128 {
        self.div_impl(rhs)
    }
}

impl Neg for F128 {
    type Output = F128;
    fn neg(self) -> F128 {
        F128(self.0 ^ FMT.sign_mask())
    }
}

impl PartialEq for F128 {
    fn eq(&self, other: &F128) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for F128 {
    fn partial_cmp(&self, other: &F128) -> Option<Ordering> {
        if self.is_nan() || other.is_nan() {
            return None;
        }
        if self.is_zero() && other.is_zero() {
            return Some(Ordering::Equal);
        }
        let key = |x: &F128| -> i128 {
            let magnitude = (x.0 & !FMT.sign_mask()) as i128;
            if x.is_sign_negative() {
                -magnitude
            } else {
                magnitude
            }
        };
        Some(key(self).cmp(&key(other)))
    }
}

impl From<f64> for F128 {
    fn from(x: f64) -> F128 {
        F128::from_f64(x)
    }
}

impl From<f32> for F128 {
    fn from(x: f32) -> F128 {
        F128::from_f32(x)
    }
}

impl fmt::Debug for F128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F128({})", self.to_hex())
    }
}

impl fmt::Display for F128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(x: f64) -> F128 {
        F128::from_f64(x)
    }

    #[test]
    fn tiny_addend_survives_cancellation() {
        let tiny = q(2f64.powi(-60));
        let r = (F128::ONE + tiny) - F128::ONE;
        assert_eq!(r.to_bits(), tiny.to_bits());
    }

    #[test]
    fn adding_zero_is_identity() {
        for &x in &[1.5, -3.25e-300, 7.0e300, f64::MIN_POSITIVE / 8.0] {
            assert_eq!((q(x) + F128::ZERO).to_bits(), q(x).to_bits());
        }
    }

    #[test]
    fn signed_zero_rules() {
        let nz = -F128::ZERO;
        assert!(!(F128::ZERO + nz).is_sign_negative());
        assert!((nz + nz).is_sign_negative());
        assert!(!(q(1.0) - q(1.0)).is_sign_negative());
        assert!((nz * q(3.0)).is_sign_negative());
        assert_eq!(F128::ZERO, nz);
    }

    #[test]
    fn specials() {
        assert!((F128::INFINITY - F128::INFINITY).is_nan());
        assert!((F128::ZERO * F128::INFINITY).is_nan());
        assert!((F128::ZERO / F128::ZERO).is_nan());
        assert_eq!((q(1.0) / F128::ZERO).to_bits(), F128::INFINITY.to_bits());
        assert_eq!((q(-1.0) / F128::ZERO).to_bits(), F128::NEG_INFINITY.to_bits());
        assert!((q(1.0) / F128::INFINITY).is_zero());
        assert!((F128::NAN + q(1.0)).is_nan());
        assert!(F128::NAN.partial_cmp(&F128::NAN).is_none());
    }

    #[test]
    fn binary64_round_trip_and_order() {
        let xs = [-f64::MAX, -1.0, -f64::MIN_POSITIVE, -5e-324, 0.0, 5e-324, 0.1, 1.0, 1e300, f64::MAX];
        for w in xs.windows(2) {
            assert!(q(w[0]) < q(w[1]));
        }
        for &x in &xs {
            assert_eq!(q(x).to_f64().to_bits(), x.to_bits());
        }
        assert!(F128::from_f64(f64::NAN).to_f64().is_nan());
    }

    #[test]
    fn products_of_doubles_are_exact() {
        let a = 1.0 + f64::EPSILON;
        let p = q(a) * q(a);
        // (1 + 2^-52)^2 = 1 + 2^-51 + 2^-104 needs 105 bits.
        let expect = q(1.0) + q(2f64.powi(-51)) + q(2f64.powi(-104));
        assert_eq!(p.to_bits(), expect.to_bits());
    }

    #[test]
    fn one_third_is_correctly_rounded() {
        let third = q(1.0) / q(3.0);
        assert_eq!(third.to_hex(), "0x1.5555555555555555555555555555p-2");
        let two_thirds = q(2.0) / q(3.0);
        // 2/3 = 0x1.5555...p-1 with a remainder above half: rounds up.
        assert_eq!(two_thirds.to_hex(), "0x1.5555555555555555555555555555p-1");
    }

    #[test]
    fn narrowing_conversions_round_once() {
        let x = F128::parse_hex("0x1.000001p+0").unwrap(); // tie for binary32 -> even
        assert_eq!(x.to_f32(), 1.0);
        let y = F128::parse_hex("0x1.0000010000000000000000000001p+0").unwrap();
        assert_eq!(y.to_f32(), f32::from_bits(0x3f800001));
        let shadow = F128::parse_hex("0x8.458cb4531bef87ap-47").unwrap();
        assert_eq!(q(shadow.to_f64()).to_hex(), "0x1.08b1968a637dfp-44");
    }

    #[test]
    fn integer_conversions() {
        for &i in &[0i64, 1, -1, 1 << 53 | 1, i64::MAX, i64::MIN] {
            assert_eq!(F128::from_i64(i).to_i64(), i);
        }
        assert_eq!(q(-2.75).to_i64(), -2);
        assert_eq!(q(1e30).to_i64(), i64::MAX);
        assert_eq!(F128::NAN.to_i64(), 0);
    }

    #[test]
    fn subnormal_arithmetic() {
        let min_sub = F128::from_bits(1);
        assert_eq!((min_sub + min_sub).to_bits(), 2);
        assert_eq!((min_sub / q(2.0)).to_bits(), 0);
        assert_eq!((F128::from_bits(3) / q(2.0)).to_bits(), 2);
        let min_normal = F128::from_bits(1u128 << 112);
        assert_eq!((min_normal - F128::from_bits(1)).to_bits(), (1u128 << 112) - 1);
    }

    #[test]
    fn overflow_to_infinity() {
        let big = F128::from_bits(0x7ffe_u128 << 112 | ((1u128 << 112) - 1));
        assert!((big + big).is_infinite());
        assert!((big * q(2.0)).is_infinite());
    }

    #[test]
    fn scaling() {
        assert_eq!(q(3.0).scale_by_pow2(-3).to_f64(), 0.375);
        assert_eq!(q(1.0).exponent(), Some(0));
        assert_eq!(q(0.3).exponent(), Some(-2));
    }
}
